//! Proving or refuting specifications over boxes in embedding space.
//!
//! Every clause of the negated specification becomes one LP over the box
//! coordinates `w` and a slack `ε`. Class constraints say the head's score
//! for the predicted class dominates every other score. Strength literals
//! compare concept cosines in the vision-language space; since both cosines
//! share the factor `1/|z|`, the comparison is linear in `z = M w + d` once
//! that factor is dropped. The LP maximizes `ε`, the amount by which the
//! violated strength predicates fail.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::directions::ConceptDirection;
use crate::embedding::{cosine_similarity, Matrix};
use crate::error::{Error, Result};
use crate::lang::{to_lp_queries, Atom, ClassLabel, Clause, Literal, SpecExpr};
use crate::lp::{BoundedSimplex, Constraint, LinearProgram, LpSolver, LpStatus};
use crate::regions::BoxRegion;
use crate::rep_maps::AffineMap;
use crate::scalar::{dot, norm, Scalar};

/// Below this embedding norm the dropped `1/|z|` factor is suspect.
pub const ZERO_EMBEDDING_NORM: f64 = 1e-9;

/// Scores `A w + b`, one row per class.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead<T> {
    a: Matrix<T>,
    b: Vec<T>,
    classes: Vec<String>,
}

impl<T: Scalar> LinearHead<T> {
    pub fn new(a: Matrix<T>, b: Vec<T>, classes: Vec<String>) -> Result<Self> {
        if a.rows() != b.len() {
            return Err(Error::DimMismatch {
                expected: a.rows(),
                found: b.len(),
            });
        }
        if classes.len() != b.len() {
            return Err(Error::DimMismatch {
                expected: b.len(),
                found: classes.len(),
            });
        }
        if a.rows() == 0 || a.cols() == 0 {
            return Err(Error::Invalid(
                "head needs at least one class and one input".into(),
            ));
        }
        if !a.is_finite() || b.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("linear head".into()));
        }
        Ok(LinearHead { a, b, classes })
    }

    pub fn weights(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn bias(&self) -> &[T] {
        &self.b
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn input_dim(&self) -> usize {
        self.a.cols()
    }

    pub fn scores(&self, w: &[T]) -> Result<Vec<T>> {
        let mut s = self.a.mul_vec(w)?;
        s.iter_mut().zip(&self.b).for_each(|(s, &b)| *s = *s + b);
        Ok(s)
    }
}

/// `head.json`. `A` may be a list of rows or a flat row-major array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadFile {
    #[serde(rename = "A")]
    pub a: HeadWeights,
    pub b: Vec<f64>,
    pub classes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HeadWeights {
    Rows(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

impl HeadFile {
    pub fn to_head<T: Scalar>(&self) -> Result<LinearHead<T>> {
        let conv = |v: &[f64]| v.iter().map(|&x| T::lit(x)).collect::<Vec<T>>();
        let a = match &self.a {
            HeadWeights::Rows(rows) => {
                Matrix::from_rows(&rows.iter().map(|r| conv(r)).collect::<Vec<_>>())?
            }
            HeadWeights::Flat(flat) => {
                let k = self.b.len().max(1);
                if flat.len() % k != 0 {
                    return Err(Error::Invalid(format!(
                        "{} head weights do not split into {k} rows",
                        flat.len()
                    )));
                }
                Matrix::from_row_major(k, flat.len() / k, conv(flat))?
            }
        };
        LinearHead::new(a, conv(&self.b), self.classes.clone())
    }
}

impl<T: Scalar> From<&LinearHead<T>> for HeadFile {
    fn from(h: &LinearHead<T>) -> Self {
        HeadFile {
            a: HeadWeights::Rows(
                h.a.iter_rows()
                    .map(|r| r.iter().map(|x| x.as_f64()).collect())
                    .collect(),
            ),
            b: h.b.iter().map(|x| x.as_f64()).collect(),
            classes: h.classes.clone(),
        }
    }
}

/// The classifier whose `predict` literals are checked.
#[derive(Debug, Clone, PartialEq)]
pub enum Scorer<T> {
    /// A linear head over vision embeddings.
    Head(LinearHead<T>),
    /// Zero-shot classification against class directions.
    ZeroShot(Vec<ConceptDirection<T>>),
}

impl<T: Scalar> Scorer<T> {
    pub fn num_classes(&self) -> usize {
        match self {
            Scorer::Head(h) => h.b.len(),
            Scorer::ZeroShot(d) => d.len(),
        }
    }

    pub fn class_name(&self, k: usize) -> &str {
        match self {
            Scorer::Head(h) => &h.classes[k],
            Scorer::ZeroShot(d) => &d[k].concept,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Scorer::Head(h) => h.input_dim(),
            Scorer::ZeroShot(d) => d[0].direction.len(),
        }
    }

    /// Head scores, or cosines to each class direction.
    pub fn scores(&self, v: &[T]) -> Result<Vec<T>> {
        match self {
            Scorer::Head(h) => h.scores(v),
            Scorer::ZeroShot(d) => d
                .iter()
                .map(|c| cosine_similarity(v, &c.direction))
                .collect(),
        }
    }

    /// Per-class linear score `(row, offset)`; a zero-shot class scores
    /// `v · q/|q|`, its cosine times `|v|`.
    fn linear_score(&self, k: usize) -> (Vec<T>, T) {
        match self {
            Scorer::Head(h) => (h.a.row(k).to_vec(), h.b[k]),
            Scorer::ZeroShot(d) => (d[k].unit(), T::zero()),
        }
    }
}

/// Everything a query needs besides the clause and the box.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationContext<T> {
    scorer: Scorer<T>,
    map: Option<AffineMap<T>>,
    concepts: Vec<ConceptDirection<T>>,
}

impl<T: Scalar> VerificationContext<T> {
    /// Vision model with a linear head; boxes live in the vision space and
    /// concepts are measured after mapping through `map`.
    pub fn vision(
        head: LinearHead<T>,
        map: AffineMap<T>,
        concepts: Vec<ConceptDirection<T>>,
    ) -> Result<Self> {
        if map.p_f() != head.input_dim() {
            return Err(Error::DimMismatch {
                expected: head.input_dim(),
                found: map.p_f(),
            });
        }
        check_dims(&concepts, map.p_g())?;
        Ok(VerificationContext {
            scorer: Scorer::Head(head),
            map: Some(map),
            concepts,
        })
    }

    /// Zero-shot classification in the vision-language space itself.
    pub fn clip(
        class_dirs: Vec<ConceptDirection<T>>,
        concepts: Vec<ConceptDirection<T>>,
    ) -> Result<Self> {
        if class_dirs.len() < 2 {
            return Err(Error::TooFewClasses(class_dirs.len()));
        }
        let p = class_dirs[0].direction.len();
        check_dims(&class_dirs, p)?;
        check_dims(&concepts, p)?;
        Ok(VerificationContext {
            scorer: Scorer::ZeroShot(class_dirs),
            map: None,
            concepts,
        })
    }

    pub fn scorer(&self) -> &Scorer<T> {
        &self.scorer
    }

    pub fn map(&self) -> Option<&AffineMap<T>> {
        self.map.as_ref()
    }

    pub fn concepts(&self) -> &[ConceptDirection<T>] {
        &self.concepts
    }

    /// Dimension of the boxes this context verifies over.
    pub fn input_dim(&self) -> usize {
        self.scorer.input_dim()
    }

    /// Vision-language embedding of a box point.
    pub fn embed(&self, w: &[T]) -> Result<Vec<T>> {
        match &self.map {
            Some(m) => m.apply(w),
            None => Ok(w.to_vec()),
        }
    }

    pub fn concept(&self, name: &str) -> Result<&ConceptDirection<T>> {
        self.concepts
            .iter()
            .find(|c| c.concept == name)
            .ok_or_else(|| Error::UnknownConcept(name.to_string()))
    }

    /// `z · q/|q|` written over `w`: coefficients `Mᵀ q/|q|`, offset `d · q/|q|`.
    fn concept_form(&self, name: &str) -> Result<(Vec<T>, T)> {
        let q = self.concept(name)?.unit();
        Ok(match &self.map {
            None => (q, T::zero()),
            Some(m) => {
                let mut g = vec![T::zero(); m.p_f()];
                for (r, &qr) in m.matrix().iter_rows().zip(&q) {
                    g.iter_mut().zip(r).for_each(|(g, &x)| *g = *g + x * qr);
                }
                (g, dot(m.offset(), &q))
            }
        })
    }

    fn class_label(&self, k: usize) -> ClassLabel {
        ClassLabel {
            name: self.scorer.class_name(k).to_string(),
            index: k,
        }
    }

    fn check_class(&self, c: &ClassLabel) -> Result<()> {
        if c.index < self.scorer.num_classes() {
            Ok(())
        } else {
            Err(Error::UnknownClass(c.name.clone()))
        }
    }
}

fn check_dims<T: Scalar>(dirs: &[ConceptDirection<T>], p: usize) -> Result<()> {
    match dirs.iter().find(|d| d.direction.len() != p) {
        Some(d) => Err(Error::DimMismatch {
            expected: p,
            found: d.direction.len(),
        }),
        None => Ok(()),
    }
}

/// LP for one clause. Variables are the box coordinates followed by `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryLp<T> {
    pub lp: LinearProgram<T>,
    /// Number of strength literals; with none, `ε` is pinned to zero.
    pub strength_rows: usize,
}

impl<T: Scalar> QueryLp<T> {
    pub fn epsilon_index(&self) -> usize {
        self.lp.num_vars() - 1
    }
}

/// Encodes one clause of `predict` and strength literals over `region`.
/// Negated `predict` literals must be expanded first.
pub fn encode_query<T: Scalar>(
    clause: &[Literal],
    ctx: &VerificationContext<T>,
    region: &BoxRegion<T>,
) -> Result<QueryLp<T>> {
    let p = ctx.input_dim();
    if region.dim() != p {
        return Err(Error::DimMismatch {
            expected: p,
            found: region.dim(),
        });
    }
    let mut rows: Vec<Constraint<T>> = Vec::new();
    let mut forms: Vec<(Vec<T>, T)> = Vec::new();
    for lit in clause {
        match (&lit.atom, lit.positive) {
            (Atom::Predict(c), true) => {
                ctx.check_class(c)?;
                let (ac, bc) = ctx.scorer.linear_score(c.index);
                for k in (0..ctx.scorer.num_classes()).filter(|&k| k != c.index) {
                    let (ak, bk) = ctx.scorer.linear_score(k);
                    let mut coeffs: Vec<T> = ac.iter().zip(&ak).map(|(&x, &y)| x - y).collect();
                    coeffs.push(T::zero());
                    rows.push(Constraint::new(coeffs, bk - bc));
                }
            }
            (Atom::Predict(_), false) => return Err(Error::UnsupportedLiteral(lit.to_string())),
            (Atom::Gt(a, b), positive) => {
                // violated: q_b form - q_a form >= ε; held: the mirror image
                let (hi, lo) = if positive { (a, b) } else { (b, a) };
                let (gh, hh) = ctx.concept_form(hi.as_str())?;
                let (gl, hl) = ctx.concept_form(lo.as_str())?;
                let g: Vec<T> = gh.iter().zip(&gl).map(|(&x, &y)| x - y).collect();
                forms.push((g, hh - hl));
            }
        }
    }

    let (eps_lo, eps_hi) = if forms.is_empty() {
        (T::zero(), T::zero())
    } else {
        // wide enough never to bind: every form's range over the box, padded
        let range = |(g, h): &(Vec<T>, T)| {
            let (mut lo, mut hi) = (*h, *h);
            for ((&gi, &l), &u) in g.iter().zip(region.lower()).zip(region.upper()) {
                lo = lo + (gi * l).min(gi * u);
                hi = hi + (gi * l).max(gi * u);
            }
            (lo, hi)
        };
        let ranges: Vec<(T, T)> = forms.iter().map(range).collect();
        let lo = ranges.iter().map(|r| r.0).fold(T::infinity(), T::min);
        let hi = ranges.iter().map(|r| r.1).fold(T::neg_infinity(), T::max);
        (lo - T::one(), hi + T::one())
    };

    let mut lower = region.lower().to_vec();
    let mut upper = region.upper().to_vec();
    lower.push(eps_lo);
    upper.push(eps_hi);
    let mut objective = vec![T::zero(); p + 1];
    objective[p] = T::one();
    let mut lp = LinearProgram::new(lower, upper, objective)?;
    for r in rows {
        lp.push(r)?;
    }
    let strength_rows = forms.len();
    for (mut g, h) in forms {
        // g · w + h >= ε
        g.push(-T::one());
        lp.push(Constraint::new(g, -h))?;
    }
    Ok(QueryLp { lp, strength_rows })
}

/// LP for the vision path: head `A w + b`, map `z = M w + d`.
pub fn encode_vision_query<T: Scalar>(
    clause: &[Literal],
    head: &LinearHead<T>,
    map: &AffineMap<T>,
    dirs: &[ConceptDirection<T>],
    region: &BoxRegion<T>,
) -> Result<QueryLp<T>> {
    let ctx = VerificationContext::vision(head.clone(), map.clone(), dirs.to_vec())?;
    encode_query(clause, &ctx, region)
}

/// LP for the zero-shot path; the box lives in the vision-language space.
pub fn encode_clip_query<T: Scalar>(
    clause: &[Literal],
    class_dirs: &[ConceptDirection<T>],
    concept_dirs: &[ConceptDirection<T>],
    region: &BoxRegion<T>,
) -> Result<QueryLp<T>> {
    let ctx = VerificationContext::clip(class_dirs.to_vec(), concept_dirs.to_vec())?;
    encode_query(clause, &ctx, region)
}

/// Replaces each `!predict(c)` by a choice of some other class dominating,
/// giving one clause per combination.
pub fn expand_negated_predicts<T: Scalar>(
    clause: &[Literal],
    ctx: &VerificationContext<T>,
) -> Result<Vec<Clause>> {
    let mut out: Vec<Clause> = vec![Vec::new()];
    for lit in clause {
        match (&lit.atom, lit.positive) {
            (Atom::Predict(c), false) => {
                ctx.check_class(c)?;
                let others: Vec<Literal> = (0..ctx.scorer.num_classes())
                    .filter(|&k| k != c.index)
                    .map(|k| Literal::pos(Atom::Predict(ctx.class_label(k))))
                    .collect();
                out = out
                    .into_iter()
                    .flat_map(|cl| {
                        others.iter().map(move |o| {
                            let mut cl = cl.clone();
                            cl.push(o.clone());
                            cl
                        })
                    })
                    .collect();
            }
            _ => out.iter_mut().for_each(|cl| cl.push(lit.clone())),
        }
    }
    Ok(out)
}

/// Solver result for one expanded clause.
#[derive(Debug, Clone, PartialEq)]
pub struct ClauseResult<T> {
    pub clause: String,
    pub status: LpStatus,
    /// Maximal violation; `+∞` for a feasible clause without strength
    /// literals, `None` when infeasible.
    pub epsilon: Option<T>,
    pub point: Option<Vec<T>>,
    pub iterations: usize,
    /// The point's vision-language embedding is (numerically) zero.
    pub zero_embedding: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VerificationOutcome<T> {
    /// Every feasible clause has `ε <= 0`; `margin` is the largest.
    Proved {
        margin: T,
    },
    Counterexample {
        point: Vec<T>,
        epsilon: T,
    },
    /// No clause is feasible in the box.
    VacuouslyTrue,
}

impl<T> VerificationOutcome<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            VerificationOutcome::Proved { .. } => "proved",
            VerificationOutcome::Counterexample { .. } => "counterexample",
            VerificationOutcome::VacuouslyTrue => "vacuously_true",
        }
    }
}

impl<T: fmt::Display> fmt::Display for VerificationOutcome<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerificationOutcome::Proved { margin } => write!(f, "proved (margin {margin})"),
            VerificationOutcome::Counterexample { epsilon, .. } => {
                write!(f, "counterexample (ε = {epsilon})")
            }
            VerificationOutcome::VacuouslyTrue => f.write_str("vacuously true"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verification<T> {
    pub outcome: VerificationOutcome<T>,
    pub clauses: Vec<ClauseResult<T>>,
}

impl<T: Scalar> Verification<T> {
    /// `ε` of the outcome: the margin, the violation, or `None` when vacuous.
    pub fn epsilon(&self) -> Option<T> {
        match &self.outcome {
            VerificationOutcome::Proved { margin } => Some(*margin),
            VerificationOutcome::Counterexample { epsilon, .. } => Some(*epsilon),
            VerificationOutcome::VacuouslyTrue => None,
        }
    }
}

/// Solves every clause of the negated, desugared spec `e` over `region` with
/// the built-in simplex.
pub fn verify_spec<T: Scalar>(
    e: &SpecExpr,
    ctx: &VerificationContext<T>,
    region: &BoxRegion<T>,
) -> Result<Verification<T>> {
    verify_spec_with(e, ctx, region, &BoundedSimplex::default())
}

pub fn verify_spec_with<T: Scalar, S: LpSolver<T>>(
    e: &SpecExpr,
    ctx: &VerificationContext<T>,
    region: &BoxRegion<T>,
    solver: &S,
) -> Result<Verification<T>> {
    let mut clauses = Vec::new();
    for clause in to_lp_queries(e)? {
        clauses.extend(expand_negated_predicts(&clause, ctx)?);
    }
    let results = clauses
        .par_iter()
        .map(|clause| solve_clause(clause, ctx, region, solver))
        .collect::<Result<Vec<_>>>()?;

    let mut best: Option<usize> = None;
    for (i, r) in results.iter().enumerate() {
        if let Some(eps) = r.epsilon {
            if best.is_none_or(|b| eps > results[b].epsilon.unwrap()) {
                best = Some(i);
            }
        }
    }
    let outcome = match best {
        None => VerificationOutcome::VacuouslyTrue,
        Some(i) => {
            let eps = results[i].epsilon.unwrap();
            if eps > T::zero() {
                VerificationOutcome::Counterexample {
                    point: results[i].point.clone().unwrap_or_default(),
                    epsilon: eps,
                }
            } else {
                VerificationOutcome::Proved { margin: eps }
            }
        }
    };
    Ok(Verification {
        outcome,
        clauses: results,
    })
}

fn solve_clause<T: Scalar, S: LpSolver<T>>(
    clause: &[Literal],
    ctx: &VerificationContext<T>,
    region: &BoxRegion<T>,
    solver: &S,
) -> Result<ClauseResult<T>> {
    let text = clause
        .iter()
        .map(Literal::to_string)
        .collect::<Vec<_>>()
        .join(" && ");
    let q = encode_query(clause, ctx, region)?;
    let sol = solver.solve_max(&q.lp)?;
    if sol.status == LpStatus::Infeasible {
        return Ok(ClauseResult {
            clause: text,
            status: sol.status,
            epsilon: None,
            point: None,
            iterations: sol.iterations,
            zero_embedding: false,
        });
    }
    let eps_at = q.epsilon_index();
    let w = sol.point[..eps_at].to_vec();
    let z = ctx.embed(&w)?;
    let epsilon = if q.strength_rows == 0 {
        T::infinity()
    } else {
        sol.point[eps_at]
    };
    Ok(ClauseResult {
        clause: text,
        status: sol.status,
        epsilon: Some(epsilon),
        zero_embedding: norm(&z) < T::lit(ZERO_EMBEDDING_NORM),
        point: Some(w),
        iterations: sol.iterations,
    })
}
