//! Brute-force cross-checks: satisfaction over finite scopes, the
//! input-versus-embedding equivalence, and grid search for LP optima.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::embedding::Matrix;
use crate::error::{Error, Result};
use crate::lang::{evaluate, Atom, ConceptName, Literal, SpecExpr};
use crate::lp::{BoundedSimplex, LpSolver, LpStatus};
use crate::regions::BoxRegion;
use crate::rep_maps::RepMap;
use crate::scalar::{dot, norm, Scalar};
use crate::verifier::{
    encode_query, expand_negated_predicts, QueryLp, Scorer, VerificationContext,
};

pub const GRID_POINT_LIMIT: u128 = 10_000_000;
pub const GRID_MAX_DIM: usize = 4;

/// A finite stand-in for an input scope.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteScope<T> {
    points: Vec<Vec<T>>,
}

impl<T: Scalar> FiniteScope<T> {
    pub fn new(points: Vec<Vec<T>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::EmptySelection);
        };
        if let Some(p) = points.iter().find(|p| p.len() != first.len()) {
            return Err(Error::DimMismatch {
                expected: first.len(),
                found: p.len(),
            });
        }
        Ok(FiniteScope { points })
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Classifier outputs keyed by scope index.
pub type ScoreTable<T> = HashMap<usize, Vec<T>>;
/// Concept strengths keyed by scope index.
pub type RepTable<T> = HashMap<usize, HashMap<ConceptName, T>>;

/// Whether `e` holds at every point of `scope`.
pub fn brute_force_satisfaction<T: Scalar>(
    e: &SpecExpr,
    scores: &ScoreTable<T>,
    reps: &RepTable<T>,
    scope: &FiniteScope<T>,
) -> Result<bool> {
    for i in 0..scope.len() {
        let s = scores.get(&i).ok_or(Error::MissingPoint(i))?;
        let r = reps.get(&i).ok_or(Error::MissingPoint(i))?;
        if !evaluate(e, s, r)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn safe_cos<T: Scalar>(a: &[T], b: &[T]) -> T {
    let (na, nb) = (norm(a), norm(b));
    if na == T::zero() || nb == T::zero() {
        T::zero()
    } else {
        (dot(a, b) / (na * nb)).max(-T::one()).min(T::one())
    }
}

/// Checks that `e` holds on the inputs exactly when it holds on their
/// embeddings.
///
/// Inputs are abstract: input `i` embeds to `enc[i]`, which may repeat.
/// The input side scores `scorer(enc[i])` and measures concepts by
/// composing the map and the cosine per input; the embedding side
/// evaluates `rep` and `scorer` once per distinct embedding.
pub fn theorem1_check<T: Scalar>(
    e: &SpecExpr,
    enc: &[Vec<T>],
    scorer: &Scorer<T>,
    rep: &RepMap<T>,
) -> Result<bool> {
    let scope = FiniteScope::new((0..enc.len()).map(|i| vec![T::lit(i as f64)]).collect())?;
    let mut scores = ScoreTable::new();
    let mut reps = RepTable::new();
    for (i, v) in enc.iter().enumerate() {
        scores.insert(i, scorer.scores(v)?);
        let z = match rep.map() {
            Some(m) => {
                let mut z = vec![T::zero(); m.p_g()];
                for (zr, (row, &d)) in z.iter_mut().zip(m.matrix().iter_rows().zip(m.offset())) {
                    *zr = dot(row, v) + d;
                }
                z
            }
            None => v.clone(),
        };
        let mut vals = HashMap::new();
        for d in rep.directions() {
            vals.insert(
                ConceptName::new(d.concept.clone())?,
                safe_cos(&z, &d.direction),
            );
        }
        reps.insert(i, vals);
    }
    let input_side = brute_force_satisfaction(e, &scores, &reps, &scope)?;

    let mut distinct: Vec<&Vec<T>> = Vec::new();
    for v in enc {
        if !distinct.iter().any(|d| d.as_slice() == v.as_slice()) {
            distinct.push(v);
        }
    }
    let mut embedding_side = true;
    for v in distinct {
        let s = scorer.scores(v)?;
        let r = rep.rep_values(v)?;
        if !evaluate(e, &s, &r)? {
            embedding_side = false;
            break;
        }
    }
    Ok(input_side == embedding_side)
}

/// Best grid point of a clause, or infeasibility.
#[derive(Debug, Clone, PartialEq)]
pub enum GridOutcome<T> {
    Infeasible,
    Feasible { epsilon: T, point: Vec<T> },
}

impl<T: Copy> GridOutcome<T> {
    pub fn epsilon(&self) -> Option<T> {
        match self {
            GridOutcome::Infeasible => None,
            GridOutcome::Feasible { epsilon, .. } => Some(*epsilon),
        }
    }
}

/// Coordinates `l, l + step, ...` below `u`, then `u`.
fn axis<T: Scalar>(l: T, u: T, step: T) -> Vec<T> {
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let x = l + step * T::from_usize(k).unwrap();
        if x >= u {
            break;
        }
        out.push(x);
        k += 1;
    }
    out.push(u);
    out
}

/// Largest violation of `clause` over a grid of `region` with spacing
/// `step`. Feasibility and violation are evaluated pointwise from scores
/// and cosines; `ε` at a point is the smallest `|z| (cos hi - cos lo)` over
/// its strength literals, or zero when there are none.
pub fn grid_violation_oracle<T: Scalar>(
    clause: &[Literal],
    ctx: &VerificationContext<T>,
    region: &BoxRegion<T>,
    step: T,
) -> Result<GridOutcome<T>> {
    if region.dim() > GRID_MAX_DIM {
        return Err(Error::GridDimension(region.dim()));
    }
    if region.dim() != ctx.input_dim() {
        return Err(Error::DimMismatch {
            expected: ctx.input_dim(),
            found: region.dim(),
        });
    }
    if !(step > T::zero()) {
        return Err(Error::Invalid("grid step must be positive".into()));
    }
    let mut total: u128 = 1;
    for (&l, &u) in region.lower().iter().zip(region.upper()) {
        let n = ((u - l) / step).to_f64().unwrap_or(f64::INFINITY).floor() + 2.0;
        total = total.saturating_mul(n.min(u128::MAX as f64) as u128);
        if total > GRID_POINT_LIMIT {
            return Err(Error::GridTooLarge(total));
        }
    }
    let axes: Vec<Vec<T>> = region
        .lower()
        .iter()
        .zip(region.upper())
        .map(|(&l, &u)| axis(l, u, step))
        .collect();
    let count: usize = axes.iter().map(Vec::len).product();

    let mut strengths: Vec<(Vec<T>, Vec<T>)> = Vec::new();
    let mut class_tests: Vec<(usize, bool)> = Vec::new();
    for lit in clause {
        match &lit.atom {
            Atom::Predict(c) => {
                if c.index >= ctx.scorer().num_classes() {
                    return Err(Error::UnknownClass(c.name.clone()));
                }
                class_tests.push((c.index, lit.positive));
            }
            Atom::Gt(a, b) => {
                let (hi, lo) = if lit.positive { (a, b) } else { (b, a) };
                strengths.push((
                    ctx.concept(hi.as_str())?.direction.clone(),
                    ctx.concept(lo.as_str())?.direction.clone(),
                ));
            }
        }
    }
    let scale = T::lit(1e-12);

    let evaluate_point = |idx: usize| -> Result<Option<(T, usize)>> {
        let mut w = Vec::with_capacity(axes.len());
        let mut rest = idx;
        for ax in &axes {
            w.push(ax[rest % ax.len()]);
            rest /= ax.len();
        }
        if !class_tests.is_empty() {
            let scores = match ctx.scorer() {
                Scorer::Head(h) => h.scores(&w)?,
                Scorer::ZeroShot(dirs) => dirs.iter().map(|d| safe_cos(&w, &d.direction)).collect(),
            };
            let top = scores.iter().copied().fold(T::neg_infinity(), T::max);
            let slack = scale * (T::one() + top.abs());
            let dominates = |c: usize| scores[c] >= top - slack;
            for &(c, positive) in &class_tests {
                let ok = if positive {
                    dominates(c)
                } else {
                    (0..scores.len()).any(|k| k != c && dominates(k))
                };
                if !ok {
                    return Ok(None);
                }
            }
        }
        let eps = if strengths.is_empty() {
            T::zero()
        } else {
            let z = ctx.embed(&w)?;
            let nz = norm(&z);
            strengths
                .iter()
                .map(|(hi, lo)| nz * (safe_cos(&z, hi) - safe_cos(&z, lo)))
                .fold(T::infinity(), T::min)
        };
        Ok(Some((eps, idx)))
    };

    let best = (0..count).into_par_iter().map(evaluate_point).try_reduce(
        || None,
        |a, b| {
            Ok(match (a, b) {
                (None, x) | (x, None) => x,
                (Some(x), Some(y)) => Some(if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) {
                    y
                } else {
                    x
                }),
            })
        },
    )?;
    Ok(match best {
        None => GridOutcome::Infeasible,
        Some((epsilon, idx)) => {
            let mut point = Vec::with_capacity(axes.len());
            let mut rest = idx;
            for ax in &axes {
                point.push(ax[rest % ax.len()]);
                rest /= ax.len();
            }
            GridOutcome::Feasible { epsilon, point }
        }
    })
}

/// How far a grid optimum may trail the LP optimum: `step` times the
/// largest coefficient mass any strength row puts on the free coordinates.
pub fn grid_tolerance<T: Scalar>(q: &QueryLp<T>, region: &BoxRegion<T>, step: T) -> T {
    let eps = q.epsilon_index();
    let free: Vec<bool> = region
        .lower()
        .iter()
        .zip(region.upper())
        .map(|(l, u)| u > l)
        .collect();
    q.lp.constraints
        .iter()
        .filter(|c| c.coeffs[eps] != T::zero())
        .map(|c| {
            c.coeffs[..eps]
                .iter()
                .zip(&free)
                .filter(|(_, &f)| f)
                .map(|(x, _)| x.abs())
                .sum::<T>()
        })
        .fold(T::zero(), T::max)
        * step
}

/// One clause of an audit.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditRow<T> {
    pub clause: String,
    pub lp_epsilon: Option<T>,
    pub grid_epsilon: Option<T>,
    pub tolerance: T,
}

impl<T: Scalar> AuditRow<T> {
    /// Same feasibility, grid never above the LP, and within tolerance.
    pub fn agrees(&self) -> bool {
        match (self.lp_epsilon, self.grid_epsilon) {
            (None, None) => true,
            (Some(lp), Some(grid)) => {
                let fuzz = T::lit(1e-9) * (T::one() + lp.abs());
                grid <= lp + fuzz && lp - grid <= self.tolerance + fuzz
            }
            // a thin feasible sliver can miss every grid point
            (Some(_), None) => true,
            (None, Some(_)) => false,
        }
    }
}

/// Compares the LP and the grid on `region` with every coordinate outside
/// `dims` pinned to `anchor`.
pub fn audit_projection<T: Scalar>(
    e: &SpecExpr,
    ctx: &VerificationContext<T>,
    region: &BoxRegion<T>,
    dims: &[usize],
    anchor: &[T],
    step: T,
) -> Result<Vec<AuditRow<T>>> {
    if dims.is_empty() || dims.len() > GRID_MAX_DIM {
        return Err(Error::GridDimension(dims.len()));
    }
    let pinned = region.pin_except(dims, anchor)?;
    let free: Vec<T> = dims.iter().map(|&i| region.lower()[i]).collect();
    let free_hi: Vec<T> = dims.iter().map(|&i| region.upper()[i]).collect();
    let reduced = BoxRegion::new(free, free_hi, pinned.provenance.clone())?;
    let projected = project_context(ctx, dims, pinned.lower())?;

    let mut rows = Vec::new();
    for clause in crate::lang::to_lp_queries(e)? {
        for clause in expand_negated_predicts(&clause, ctx)? {
            let q = encode_query(&clause, ctx, &pinned)?;
            let sol = BoundedSimplex::default().solve_max(&q.lp)?;
            let lp_epsilon = match sol.status {
                LpStatus::Optimal => Some(sol.point[q.epsilon_index()]),
                LpStatus::Infeasible => None,
            };
            let grid = grid_violation_oracle(&clause, &projected, &reduced, step)?;
            rows.push(AuditRow {
                clause: clause
                    .iter()
                    .map(Literal::to_string)
                    .collect::<Vec<_>>()
                    .join(" && "),
                lp_epsilon,
                grid_epsilon: grid.epsilon(),
                tolerance: grid_tolerance(&q, &pinned, step),
            });
        }
    }
    Ok(rows)
}

/// Context over the coordinates `dims` only, the rest fixed at `base`.
fn project_context<T: Scalar>(
    ctx: &VerificationContext<T>,
    dims: &[usize],
    base: &[T],
) -> Result<VerificationContext<T>> {
    use crate::directions::ConceptDirection;
    use crate::rep_maps::AffineMap;
    use crate::verifier::LinearHead;

    // w = base + P u where P scatters u into `dims` (with base zero there)
    let mut fixed = base.to_vec();
    for &i in dims {
        fixed[i] = T::zero();
    }
    let gather = |m: &Matrix<T>| -> Result<(Matrix<T>, Vec<T>)> {
        let rows: Vec<Vec<T>> = m
            .iter_rows()
            .map(|r| dims.iter().map(|&i| r[i]).collect())
            .collect();
        let offs = m.iter_rows().map(|r| dot(r, &fixed)).collect();
        Ok((Matrix::from_rows(&rows)?, offs))
    };
    match ctx.scorer() {
        Scorer::Head(h) => {
            let (a, extra) = gather(h.weights())?;
            let b = h.bias().iter().zip(&extra).map(|(&b, &e)| b + e).collect();
            let head = LinearHead::new(a, b, h.classes().to_vec())?;
            let map = ctx.map().expect("vision contexts carry a map");
            let (m, extra) = gather(map.matrix())?;
            let d = map
                .offset()
                .iter()
                .zip(&extra)
                .map(|(&d, &e)| d + e)
                .collect();
            VerificationContext::vision(head, AffineMap::new(m, d)?, ctx.concepts().to_vec())
        }
        Scorer::ZeroShot(_) => {
            // z = base + P u; class scores become the linear forms z · q/|q|
            let p = ctx.input_dim();
            let mut m = Matrix::zeros(p, dims.len());
            for (k, &i) in dims.iter().enumerate() {
                m[(i, k)] = T::one();
            }
            let classes: Vec<ConceptDirection<T>> = match ctx.scorer() {
                Scorer::ZeroShot(d) => d.clone(),
                Scorer::Head(_) => unreachable!(),
            };
            let rows: Vec<Vec<T>> = classes
                .iter()
                .map(|c| {
                    let q = c.unit();
                    dims.iter().map(|&i| q[i]).collect()
                })
                .collect();
            let b = classes.iter().map(|c| dot(&c.unit(), &fixed)).collect();
            let head = LinearHead::new(
                Matrix::from_rows(&rows)?,
                b,
                classes.iter().map(|c| c.concept.clone()).collect(),
            )?;
            VerificationContext::vision(head, AffineMap::new(m, fixed)?, ctx.concepts().to_vec())
        }
    }
}
