//! Concept representation maps, the affine alignment between a vision
//! model's embedding space and a vision-language space, and alignment
//! quality checks.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::directions::{zero_shot_classify, ConceptDirection};
use crate::embedding::{align_rows, cosine_similarity, EmbeddingSet, Matrix};
use crate::error::{Error, Result};
use crate::lang::ConceptName;
use crate::linalg::cholesky_solve;
use crate::scalar::{norm, Scalar};

/// `z = M w + d`, from a `p_f`-dim vision space into a `p_g`-dim space.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap<T> {
    m: Matrix<T>,
    d: Vec<T>,
}

impl<T: Scalar> AffineMap<T> {
    pub fn new(m: Matrix<T>, d: Vec<T>) -> Result<Self> {
        if m.rows() != d.len() {
            return Err(Error::DimMismatch {
                expected: m.rows(),
                found: d.len(),
            });
        }
        if !m.is_finite() || d.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("affine map".into()));
        }
        Ok(AffineMap { m, d })
    }

    pub fn identity(p: usize) -> Self {
        AffineMap {
            m: Matrix::identity(p),
            d: vec![T::zero(); p],
        }
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.m
    }

    pub fn offset(&self) -> &[T] {
        &self.d
    }

    /// Input (vision) dimension.
    pub fn p_f(&self) -> usize {
        self.m.cols()
    }

    /// Output (vision-language) dimension.
    pub fn p_g(&self) -> usize {
        self.m.rows()
    }

    pub fn apply(&self, w: &[T]) -> Result<Vec<T>> {
        let mut z = self.m.mul_vec(w)?;
        z.iter_mut().zip(&self.d).for_each(|(z, &d)| *z = *z + d);
        Ok(z)
    }

    /// Mean over rows of `|M w + d - g|^2`, the alignment objective.
    pub fn objective(&self, f: &EmbeddingSet<T>, g: &EmbeddingSet<T>) -> Result<T> {
        let pairs = align_rows(f, g)?;
        let mut total = T::zero();
        for &(i, j) in &pairs {
            let z = self.apply(f.row(i))?;
            total = total + sq_dist(&z, g.row(j));
        }
        Ok(total / T::from_usize(pairs.len().max(1)).unwrap())
    }
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |s, (&x, &y)| s + (x - y) * (x - y))
}

/// On-disk form of an [`AffineMap`]: `M` is row-major, `p_g` rows by `p_f` columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineMapFile {
    pub p_f: usize,
    pub p_g: usize,
    #[serde(rename = "M")]
    pub m: Vec<f64>,
    pub d: Vec<f64>,
}

impl<T: Scalar> From<&AffineMap<T>> for AffineMapFile {
    fn from(map: &AffineMap<T>) -> Self {
        AffineMapFile {
            p_f: map.p_f(),
            p_g: map.p_g(),
            m: map.m.as_slice().iter().map(|x| x.as_f64()).collect(),
            d: map.d.iter().map(|x| x.as_f64()).collect(),
        }
    }
}

impl AffineMapFile {
    pub fn to_map<T: Scalar>(&self) -> Result<AffineMap<T>> {
        let conv = |v: &[f64]| v.iter().map(|&x| T::lit(x)).collect::<Vec<T>>();
        AffineMap::new(
            Matrix::from_row_major(self.p_g, self.p_f, conv(&self.m))?,
            conv(&self.d),
        )
    }
}

/// Ridge added to the Gram matrix diagonal by [`fit_affine_map`].
pub const RIDGE: f64 = 1e-8;

const REFINE_STEPS: usize = 2;

/// Least-squares affine map from `f`'s space to `g`'s, rows matched by id.
///
/// Solves the normal equations of the augmented design `[w, 1]` with ridge
/// damping [`RIDGE`], then refines toward the undamped solution. Fewer than
/// `p_f + 1` rows is reported as singular.
pub fn fit_affine_map<T: Scalar>(f: &EmbeddingSet<T>, g: &EmbeddingSet<T>) -> Result<AffineMap<T>> {
    let pairs = align_rows(f, g)?;
    let (pf, pg) = (f.dim(), g.dim());
    let n = pairs.len();
    if n < pf + 1 {
        return Err(Error::SingularSystem(format!(
            "{n} rows cannot determine a map with {} parameters per output",
            pf + 1
        )));
    }
    let k = pf + 1;
    let mut gram = Matrix::zeros(k, k);
    let mut rhs = Matrix::zeros(k, pg);
    let mut x = vec![T::one(); k];
    for &(i, j) in &pairs {
        x[..pf].copy_from_slice(f.row(i));
        let y = g.row(j);
        for a in 0..k {
            for b in a..k {
                gram[(a, b)] = gram[(a, b)] + x[a] * x[b];
            }
            for (c, &yc) in y.iter().enumerate() {
                rhs[(a, c)] = rhs[(a, c)] + x[a] * yc;
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    let mut damped = gram.clone();
    for a in 0..k {
        damped[(a, a)] = damped[(a, a)] + T::lit(RIDGE);
    }
    let mut beta = cholesky_solve(&damped, &rhs)?;
    // refinement against the undamped system removes most of the ridge bias;
    // directions the data does not pin down get no correction
    for _ in 0..REFINE_STEPS {
        let mut resid = rhs.clone();
        for a in 0..k {
            for c in 0..pg {
                let mut s = T::zero();
                for b in 0..k {
                    s = s + gram[(a, b)] * beta[(b, c)];
                }
                resid[(a, c)] = resid[(a, c)] - s;
            }
        }
        let step = cholesky_solve(&damped, &resid)?;
        for a in 0..k {
            for c in 0..pg {
                beta[(a, c)] = beta[(a, c)] + step[(a, c)];
            }
        }
    }
    let mut m = Matrix::zeros(pg, pf);
    let mut d = vec![T::zero(); pg];
    for c in 0..pg {
        for a in 0..pf {
            m[(c, a)] = beta[(a, c)];
        }
        d[c] = beta[(pf, c)];
    }
    AffineMap::new(m, d).map_err(|_| Error::SingularSystem("fit produced non-finite values".into()))
}

/// Hyperparameters of the gradient-descent fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
}

impl Default for GdConfig {
    fn default() -> Self {
        GdConfig {
            epochs: 50,
            learning_rate: 0.01,
            momentum: 0.9,
            weight_decay: 0.0005,
            batch_size: 32,
        }
    }
}

/// Mini-batch SGD with heavy-ball momentum and L2 weight decay on `M`,
/// starting from zero. Batches follow row order, so runs are reproducible.
pub fn fit_affine_map_gd<T: Scalar>(
    f: &EmbeddingSet<T>,
    g: &EmbeddingSet<T>,
    cfg: &GdConfig,
) -> Result<AffineMap<T>> {
    let pairs = align_rows(f, g)?;
    if pairs.is_empty() || cfg.batch_size == 0 {
        return Err(Error::EmptySelection);
    }
    let (pf, pg) = (f.dim(), g.dim());
    let (lr, mom, wd) = (
        T::lit(cfg.learning_rate),
        T::lit(cfg.momentum),
        T::lit(cfg.weight_decay),
    );
    let mut m = Matrix::zeros(pg, pf);
    let mut d = vec![T::zero(); pg];
    let mut vm = Matrix::<T>::zeros(pg, pf);
    let mut vd = vec![T::zero(); pg];
    let two = T::lit(2.0);
    for _ in 0..cfg.epochs {
        for batch in pairs.chunks(cfg.batch_size) {
            let scale = two / T::from_usize(batch.len()).unwrap();
            let mut gm = Matrix::<T>::zeros(pg, pf);
            let mut gd = vec![T::zero(); pg];
            for &(i, j) in batch {
                let w = f.row(i);
                let target = g.row(j);
                for c in 0..pg {
                    let z = (0..pf).fold(d[c], |s, a| s + m[(c, a)] * w[a]);
                    let r = (z - target[c]) * scale;
                    gd[c] = gd[c] + r;
                    for a in 0..pf {
                        gm[(c, a)] = gm[(c, a)] + r * w[a];
                    }
                }
            }
            for c in 0..pg {
                for a in 0..pf {
                    let grad = gm[(c, a)] + wd * m[(c, a)];
                    vm[(c, a)] = mom * vm[(c, a)] + grad;
                    m[(c, a)] = m[(c, a)] - lr * vm[(c, a)];
                }
                vd[c] = mom * vd[c] + gd[c];
                d[c] = d[c] - lr * vd[c];
            }
        }
    }
    AffineMap::new(m, d).map_err(|_| Error::NumericalBreakdown("gradient descent diverged".into()))
}

/// Alignment quality on a row-aligned evaluation set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapQuality {
    /// Mean over rows of the squared distance between mapped and target vectors.
    pub mse: f64,
    /// `1 - SS_res / SS_tot`, pooled over every output coordinate.
    pub r2: f64,
}

pub fn map_metrics<T: Scalar>(
    map: &AffineMap<T>,
    f: &EmbeddingSet<T>,
    g: &EmbeddingSet<T>,
) -> Result<MapQuality> {
    let pairs = align_rows(f, g)?;
    if pairs.is_empty() {
        return Err(Error::EmptySelection);
    }
    let rows: Vec<usize> = pairs.iter().map(|&(_, j)| j).collect();
    let mean = g.column_stats(&rows)?.mean;
    let (mut ss_res, mut ss_tot) = (T::zero(), T::zero());
    for &(i, j) in &pairs {
        let z = map.apply(f.row(i))?;
        ss_res = ss_res + sq_dist(&z, g.row(j));
        ss_tot = ss_tot + sq_dist(&mean, g.row(j));
    }
    let n = T::from_usize(pairs.len()).unwrap();
    let r2 = if ss_tot > T::zero() {
        T::one() - ss_res / ss_tot
    } else if ss_res == T::zero() {
        T::one()
    } else {
        T::neg_infinity()
    };
    Ok(MapQuality {
        mse: (ss_res / n).as_f64(),
        r2: r2.as_f64(),
    })
}

/// Which space `rep_value` inputs live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepMode {
    /// Inputs are vision-language image embeddings; `cos(v, q)`.
    VlmOnly,
    /// Inputs are vision embeddings mapped first; `cos(M v + d, q)`.
    ViaAffine,
    /// Inputs are embeddings consumed directly: through the map when one is
    /// attached, otherwise as-is.
    HatOnEmbeddings,
}

/// Assigns each concept a strength function over embeddings.
#[derive(Debug, Clone)]
pub struct RepMap<T> {
    mode: RepMode,
    directions: Vec<ConceptDirection<T>>,
    index: HashMap<String, usize>,
    map: Option<AffineMap<T>>,
}

impl<T: Scalar> RepMap<T> {
    pub fn new(
        mode: RepMode,
        directions: Vec<ConceptDirection<T>>,
        map: Option<AffineMap<T>>,
    ) -> Result<Self> {
        if mode == RepMode::ViaAffine && map.is_none() {
            return Err(Error::Invalid(
                "ViaAffine representation needs an affine map".into(),
            ));
        }
        if let (Some(m), Some(d)) = (&map, directions.first()) {
            if m.p_g() != d.direction.len() {
                return Err(Error::DimMismatch {
                    expected: d.direction.len(),
                    found: m.p_g(),
                });
            }
        }
        let index = directions
            .iter()
            .enumerate()
            .map(|(i, d)| (d.concept.clone(), i))
            .collect();
        Ok(RepMap {
            mode,
            directions,
            index,
            map,
        })
    }

    pub fn vlm(directions: Vec<ConceptDirection<T>>) -> Result<Self> {
        Self::new(RepMode::VlmOnly, directions, None)
    }

    pub fn via_affine(directions: Vec<ConceptDirection<T>>, map: AffineMap<T>) -> Result<Self> {
        Self::new(RepMode::ViaAffine, directions, Some(map))
    }

    pub fn mode(&self) -> RepMode {
        self.mode
    }

    pub fn map(&self) -> Option<&AffineMap<T>> {
        self.map.as_ref()
    }

    pub fn directions(&self) -> &[ConceptDirection<T>] {
        &self.directions
    }

    pub fn direction(&self, con: &str) -> Option<&ConceptDirection<T>> {
        self.index.get(con).map(|&i| &self.directions[i])
    }

    /// Embedding in the directions' space for input `v`.
    pub fn project(&self, v: &[T]) -> Result<Vec<T>> {
        match (self.mode, &self.map) {
            (RepMode::VlmOnly, _) | (RepMode::HatOnEmbeddings, None) => Ok(v.to_vec()),
            (_, Some(m)) => m.apply(v),
            (RepMode::ViaAffine, None) => unreachable!("checked in RepMap::new"),
        }
    }

    pub fn rep_value(&self, con: &ConceptName, v: &[T]) -> Result<T> {
        let dir = self
            .direction(con.as_str())
            .ok_or_else(|| Error::UnknownConcept(con.to_string()))?;
        cosine_similarity(&self.project(v)?, &dir.direction)
    }

    /// Strength of every concept on `v`, one projection shared by all.
    pub fn rep_values(&self, v: &[T]) -> Result<HashMap<ConceptName, T>> {
        let z = self.project(v)?;
        self.directions
            .iter()
            .map(|d| {
                let name = ConceptName::new(d.concept.clone())?;
                Ok((name, cosine_similarity(&z, &d.direction)?))
            })
            .collect()
    }
}

/// A row where the learned map is not faithful to the target space.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FaithfulnessViolation {
    Distance {
        id: String,
        distance: f64,
    },
    LabelDivergence {
        id: String,
        mapped: usize,
        native: usize,
    },
}

/// Rows where `|M w + d - g| > tol`, followed by rows where the zero-shot
/// label of the mapped embedding differs from that of the native one.
pub fn check_faithfulness<T: Scalar>(
    map: &AffineMap<T>,
    f: &EmbeddingSet<T>,
    g: &EmbeddingSet<T>,
    class_dirs: &[ConceptDirection<T>],
    tol: T,
) -> Result<Vec<FaithfulnessViolation>> {
    let pairs = align_rows(f, g)?;
    let mut far = Vec::new();
    let mut diverged = Vec::new();
    for &(i, j) in &pairs {
        let z = map.apply(f.row(i))?;
        let native = g.row(j);
        let dist = sq_dist(&z, native).sqrt();
        let id = f.ids()[i].clone();
        if dist > tol {
            far.push(FaithfulnessViolation::Distance {
                id: id.clone(),
                distance: dist.as_f64(),
            });
        }
        if norm(&z) > T::zero() && norm(native) > T::zero() {
            let mapped = zero_shot_classify(&z, class_dirs)?;
            let native = zero_shot_classify(native, class_dirs)?;
            if mapped != native {
                diverged.push(FaithfulnessViolation::LabelDivergence { id, mapped, native });
            }
        }
    }
    far.extend(diverged);
    Ok(far)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: Vec<Vec<f64>>) -> EmbeddingSet<f64> {
        EmbeddingSet::from_rows(rows).unwrap()
    }

    fn grid_rows(n: usize, p: usize) -> Vec<Vec<f64>> {
        // deterministic, well-spread, affinely independent rows
        (0..n)
            .map(|i| {
                (0..p)
                    .map(|j| (((i * 7 + j * 13 + i * j * 3) % 17) as f64 - 8.0) / 8.0)
                    .collect()
            })
            .collect()
    }

    #[test]
    fn recovers_scaled_shift() {
        let f_rows = grid_rows(50, 3);
        let g_rows = f_rows
            .iter()
            .map(|r| r.iter().map(|x| 2.0 * x + 1.0).collect())
            .collect();
        let map = fit_affine_map(&set(f_rows), &set(g_rows)).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                let want = if r == c { 2.0 } else { 0.0 };
                assert!((map.matrix()[(r, c)] - want).abs() < 1e-6);
            }
            assert!((map.offset()[r] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn identity_alignment() {
        let rows = grid_rows(40, 2);
        let map = fit_affine_map(&set(rows.clone()), &set(rows)).unwrap();
        let id = AffineMap::<f64>::identity(2);
        for (a, b) in map.matrix().as_slice().iter().zip(id.matrix().as_slice()) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!(map.offset().iter().all(|d| d.abs() < 1e-6));
    }

    #[test]
    fn one_row_is_singular() {
        let f = set(vec![vec![1.0, 2.0]]);
        assert!(matches!(
            fit_affine_map(&f, &f),
            Err(Error::SingularSystem(_))
        ));
    }

    #[test]
    fn mismatched_ids_are_rejected() {
        let f = set(vec![vec![1.0], vec![2.0]]);
        let g = EmbeddingSet::new(
            vec!["0".into(), "zz".into()],
            Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap(),
        )
        .unwrap();
        assert!(matches!(fit_affine_map(&f, &g), Err(Error::RowMismatch(_))));
    }

    #[test]
    fn apply_examples() {
        let id = AffineMap::<f64>::identity(2);
        assert_eq!(id.apply(&[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
        let swap = AffineMap::new(
            Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(),
            vec![1.0, 0.0],
        )
        .unwrap();
        // [5 + 1, 2 + 0]
        assert_eq!(swap.apply(&[2.0, 5.0]).unwrap(), vec![6.0, 2.0]);
        assert!(matches!(swap.apply(&[1.0]), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn metrics_of_perfect_and_mean_predictors() {
        let f = set(grid_rows(30, 2));
        let q = map_metrics(&AffineMap::identity(2), &f, &f).unwrap();
        assert_eq!(q.mse, 0.0);
        assert_eq!(q.r2, 1.0);

        let g = set(grid_rows(30, 2)
            .into_iter()
            .map(|r| vec![r[0] * 3.0, r[1] - r[0]])
            .collect());
        let all: Vec<usize> = (0..30).collect();
        let mean = g.column_stats(&all).unwrap().mean;
        let mean_map = AffineMap::new(Matrix::zeros(2, 2), mean).unwrap();
        let q = map_metrics(&mean_map, &f, &g).unwrap();
        assert!(q.r2.abs() < 1e-12, "{}", q.r2);
    }

    #[test]
    fn gradient_descent_reduces_the_objective() {
        let f_rows: Vec<Vec<f64>> = grid_rows(64, 2)
            .into_iter()
            .map(|r| r.into_iter().map(|x| x * 0.5).collect())
            .collect();
        let g_rows = f_rows.iter().map(|r| vec![r[0] + 0.2, -r[1]]).collect();
        let (f, g) = (set(f_rows), set(g_rows));
        let zero = AffineMap::new(Matrix::zeros(2, 2), vec![0.0, 0.0]).unwrap();
        let start = zero.objective(&f, &g).unwrap();
        let cfg = GdConfig {
            epochs: 200,
            ..GdConfig::default()
        };
        let gd = fit_affine_map_gd(&f, &g, &cfg).unwrap();
        let end = gd.objective(&f, &g).unwrap();
        let exact = fit_affine_map(&f, &g).unwrap().objective(&f, &g).unwrap();
        assert!(end < start * 0.01, "{start} -> {end}");
        assert!(exact <= end + 1e-12);
    }

    #[test]
    fn rep_value_modes() {
        let dirs = vec![ConceptDirection::new("a", vec![1.0, 0.0]).unwrap()];
        let a = ConceptName::new("a").unwrap();
        let vlm = RepMap::vlm(dirs.clone()).unwrap();
        assert_eq!(vlm.rep_value(&a, &[1.0, 0.0]).unwrap(), 1.0);

        let swap = AffineMap::new(
            Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(),
            vec![0.0, 0.0],
        )
        .unwrap();
        let via = RepMap::via_affine(dirs.clone(), swap).unwrap();
        assert_eq!(via.rep_value(&a, &[1.0, 0.0]).unwrap(), 0.0);

        let ident = RepMap::via_affine(dirs.clone(), AffineMap::identity(2)).unwrap();
        for v in [[0.3, -2.0], [1.0, 1.0], [-4.0, 0.5]] {
            assert_eq!(
                ident.rep_value(&a, &v).unwrap(),
                vlm.rep_value(&a, &v).unwrap()
            );
        }
        assert!(matches!(
            vlm.rep_value(&ConceptName::new("b").unwrap(), &[1.0, 0.0]),
            Err(Error::UnknownConcept(_))
        ));
        assert!(RepMap::new(RepMode::ViaAffine, dirs, None).is_err());
    }

    #[test]
    fn faithfulness_reports() {
        let dirs = vec![
            ConceptDirection::new("c0", vec![1.0, 0.0]).unwrap(),
            ConceptDirection::new("c1", vec![0.0, 1.0]).unwrap(),
        ];
        let f = set(vec![vec![1.0, 0.2], vec![0.5, 0.1]]);
        let id = AffineMap::identity(2);
        assert!(check_faithfulness(&id, &f, &f, &dirs, 1e-9)
            .unwrap()
            .is_empty());

        let g = set(vec![vec![1.0, 0.2], vec![0.5, 1.1]]);
        let v = check_faithfulness(&id, &f, &g, &dirs, 0.5).unwrap();
        assert!(v.contains(&FaithfulnessViolation::Distance {
            id: "1".into(),
            distance: 1.0
        }));

        // mapped [0.2, 1] lands in c1 while native [1, 0.2] is c0
        let f = set(vec![vec![1.0, 0.2]]);
        let g = set(vec![vec![1.0, 0.2]]);
        let swap = AffineMap::new(
            Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(),
            vec![0.0, 0.0],
        )
        .unwrap();
        let v = check_faithfulness(&swap, &f, &g, &dirs, 10.0).unwrap();
        assert_eq!(
            v,
            vec![FaithfulnessViolation::LabelDivergence {
                id: "0".into(),
                mapped: 1,
                native: 0
            }]
        );
    }
}
