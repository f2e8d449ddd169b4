//! Axis-aligned focus regions in embedding space.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How a box was built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Provenance {
    /// Hull of rows the model predicts as the class.
    A1,
    /// Hull of rows predicted as the class whose ground truth agrees.
    A2,
    /// Hull of one partition cell among rows predicted as the class.
    A3 { cell: String },
    /// Mean plus or minus `gamma` standard deviations of the class rows.
    GammaSigma { gamma: f64 },
    /// Anything else (hand-written boxes, projections).
    Custom { label: String },
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::A1 => f.write_str("A1"),
            Provenance::A2 => f.write_str("A2"),
            Provenance::A3 { cell } => write!(f, "A3:{cell}"),
            Provenance::GammaSigma { gamma } => write!(f, "gamma:{gamma}"),
            Provenance::Custom { label } => f.write_str(label),
        }
    }
}

/// `[[l_1, u_1], ..., [l_p, u_p]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxRegion<T> {
    lower: Vec<T>,
    upper: Vec<T>,
    pub provenance: Provenance,
}

impl<T: Scalar> BoxRegion<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>, provenance: Provenance) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::Invalid("box must have dimension >= 1".into()));
        }
        if lower.iter().chain(&upper).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("box bounds".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(Error::Invalid("box lower bound exceeds upper bound".into()));
        }
        Ok(BoxRegion {
            lower,
            upper,
            provenance,
        })
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, v: &[T]) -> bool {
        self.contains_within(v, T::zero())
    }

    pub fn contains_within(&self, v: &[T], tol: T) -> bool {
        v.len() == self.dim()
            && v.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&x, (&l, &u))| x >= l - tol && x <= u + tol)
    }

    /// Componentwise `self ⊆ other`.
    pub fn is_subset_of(&self, other: &BoxRegion<T>) -> bool {
        self.dim() == other.dim()
            && (0..self.dim())
                .all(|i| self.lower[i] >= other.lower[i] && self.upper[i] <= other.upper[i])
    }

    pub fn center(&self) -> Vec<T> {
        let two = T::lit(2.0);
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| (l + u) / two)
            .collect()
    }

    /// Box keeping `dims` free and pinning every other coordinate to `anchor`.
    pub fn pin_except(&self, dims: &[usize], anchor: &[T]) -> Result<Self> {
        if anchor.len() != self.dim() {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                found: anchor.len(),
            });
        }
        if let Some(&bad) = dims.iter().find(|&&d| d >= self.dim()) {
            return Err(Error::Invalid(format!("dimension {bad} out of range")));
        }
        let mut lower = self.lower.clone();
        let mut upper = self.upper.clone();
        for i in 0..self.dim() {
            if !dims.contains(&i) {
                let x = anchor[i].max(self.lower[i]).min(self.upper[i]);
                lower[i] = x;
                upper[i] = x;
            }
        }
        BoxRegion::new(lower, upper, self.provenance.clone())
    }
}

fn hull<T: Scalar>(
    set: &EmbeddingSet<T>,
    rows: &[usize],
    provenance: Provenance,
) -> Result<BoxRegion<T>> {
    let stats = set.column_stats(rows)?;
    BoxRegion::new(stats.min, stats.max, provenance)
}

fn class_name(class: usize) -> String {
    format!("#{class}")
}

/// Hull of the rows the model predicts as `class`.
pub fn region_a1<T: Scalar>(set: &EmbeddingSet<T>, class: usize) -> Result<BoxRegion<T>> {
    let rows = set.rows_predicted(class)?;
    if rows.is_empty() {
        return Err(Error::EmptyClassSelection(class_name(class)));
    }
    hull(set, &rows, Provenance::A1)
}

/// Hull of the rows predicted as `class` with ground truth `class`.
pub fn region_a2<T: Scalar>(set: &EmbeddingSet<T>, class: usize) -> Result<BoxRegion<T>> {
    let rows = set.rows_correct(class)?;
    if rows.is_empty() {
        return Err(Error::EmptyClassSelection(class_name(class)));
    }
    hull(set, &rows, Provenance::A2)
}

/// Assignment of row ids to partition cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegionPartition {
    pub assignment: BTreeMap<String, String>,
}

impl RegionPartition {
    pub fn new(assignment: BTreeMap<String, String>) -> Self {
        RegionPartition { assignment }
    }

    /// Fails if a referenced row id is not in `set`.
    pub fn check_rows<T: Scalar>(&self, set: &EmbeddingSet<T>) -> Result<()> {
        let ids: std::collections::HashSet<&str> = set.ids().iter().map(String::as_str).collect();
        match self.assignment.keys().find(|id| !ids.contains(id.as_str())) {
            Some(id) => Err(Error::Invalid(format!(
                "partition refers to unknown row `{id}`"
            ))),
            None => Ok(()),
        }
    }
}

/// One hull per partition cell over the rows predicted as `class`, cells in
/// sorted order.
pub fn region_a3<T: Scalar>(
    set: &EmbeddingSet<T>,
    class: usize,
    partition: &RegionPartition,
) -> Result<Vec<BoxRegion<T>>> {
    let rows = set.rows_predicted(class)?;
    if rows.is_empty() {
        return Err(Error::EmptyClassSelection(class_name(class)));
    }
    let mut cells: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for r in rows {
        let id = &set.ids()[r];
        let cell = partition
            .assignment
            .get(id)
            .ok_or_else(|| Error::UncoveredRow(id.clone()))?;
        cells.entry(cell).or_default().push(r);
    }
    cells
        .into_iter()
        .map(|(cell, rows)| {
            hull(
                set,
                &rows,
                Provenance::A3 {
                    cell: cell.to_string(),
                },
            )
        })
        .collect()
}

/// Stand-in for neuron-pattern preconditions: rows predicted as `class` are
/// grouped by the sign of `x_i - mean_i` over the `k` highest-variance
/// coordinates. Cell names are the sign strings, e.g. `+-+`.
pub fn surrogate_partition<T: Scalar>(
    set: &EmbeddingSet<T>,
    class: usize,
    k: usize,
) -> Result<RegionPartition> {
    let rows = set.rows_predicted(class)?;
    if rows.is_empty() {
        return Err(Error::EmptyClassSelection(class_name(class)));
    }
    let stats = set.column_stats(&rows)?;
    let mut order: Vec<usize> = (0..set.dim()).collect();
    // stable sort keeps lower coordinates first among equal variances
    order.sort_by(|&a, &b| {
        stats.std[b]
            .partial_cmp(&stats.std[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order.truncate(k.min(set.dim()));
    let assignment = rows
        .iter()
        .map(|&r| {
            let v = set.row(r);
            let cell: String = order
                .iter()
                .map(|&i| if v[i] >= stats.mean[i] { '+' } else { '-' })
                .collect();
            (set.ids()[r].clone(), cell)
        })
        .collect();
    Ok(RegionPartition { assignment })
}

/// Box `mean ± gamma * std` over the rows whose ground truth is `class`.
pub fn region_gamma<T: Scalar>(
    set: &EmbeddingSet<T>,
    class: usize,
    gamma: T,
) -> Result<BoxRegion<T>> {
    if !(gamma > T::zero()) {
        return Err(Error::Invalid("gamma must be positive".into()));
    }
    let rows = set.rows_with_truth(class)?;
    if rows.is_empty() {
        return Err(Error::EmptyClassSelection(class_name(class)));
    }
    let stats = set.column_stats(&rows)?;
    let lower = stats
        .mean
        .iter()
        .zip(&stats.std)
        .map(|(&m, &s)| m - gamma * s)
        .collect();
    let upper = stats
        .mean
        .iter()
        .zip(&stats.std)
        .map(|(&m, &s)| m + gamma * s)
        .collect();
    BoxRegion::new(
        lower,
        upper,
        Provenance::GammaSigma {
            gamma: gamma.as_f64(),
        },
    )
}

/// `regions.json` record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub provenance: Provenance,
    pub class: String,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl RegionRecord {
    pub fn from_box<T: Scalar>(class: &str, b: &BoxRegion<T>) -> Self {
        RegionRecord {
            provenance: b.provenance.clone(),
            class: class.to_string(),
            lower: b.lower.iter().map(|x| x.as_f64()).collect(),
            upper: b.upper.iter().map(|x| x.as_f64()).collect(),
        }
    }

    pub fn to_box<T: Scalar>(&self) -> Result<BoxRegion<T>> {
        let conv = |v: &[f64]| v.iter().map(|&x| T::lit(x)).collect();
        BoxRegion::new(
            conv(&self.lower),
            conv(&self.upper),
            self.provenance.clone(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labeled(rows: Vec<Vec<f64>>, gt: Vec<usize>, pred: Vec<usize>) -> EmbeddingSet<f64> {
        EmbeddingSet::from_rows(rows)
            .unwrap()
            .with_ground_truth(gt)
            .unwrap()
            .with_predicted(pred)
            .unwrap()
    }

    #[test]
    fn a1_hull() {
        let set = labeled(
            vec![vec![0.0, 1.0], vec![2.0, -1.0], vec![9.0, 9.0]],
            vec![0, 0, 1],
            vec![0, 0, 1],
        );
        let b = region_a1(&set, 0).unwrap();
        assert_eq!(b.lower(), &[0.0, -1.0]);
        assert_eq!(b.upper(), &[2.0, 1.0]);
        let single = region_a1(&set, 1).unwrap();
        assert_eq!(single.lower(), single.upper());
        assert!(matches!(
            region_a1(&set, 2),
            Err(Error::EmptyClassSelection(_))
        ));
    }

    #[test]
    fn a2_filters_misclassified_rows() {
        let set = labeled(vec![vec![0.0, 0.0], vec![5.0, 5.0]], vec![0, 1], vec![0, 0]);
        let b = region_a2(&set, 0).unwrap();
        assert_eq!(b.lower(), &[0.0, 0.0]);
        assert_eq!(b.upper(), &[0.0, 0.0]);
        assert!(b.is_subset_of(&region_a1(&set, 0).unwrap()));

        let all_right = labeled(vec![vec![0.0], vec![3.0]], vec![0, 0], vec![0, 0]);
        assert_eq!(
            region_a1(&all_right, 0).unwrap().lower(),
            region_a2(&all_right, 0).unwrap().lower()
        );
        assert_eq!(
            region_a1(&all_right, 0).unwrap().upper(),
            region_a2(&all_right, 0).unwrap().upper()
        );
    }

    #[test]
    fn a3_boxes_per_cell() {
        let set = labeled(
            vec![vec![0.0], vec![1.0], vec![3.0]],
            vec![0; 3],
            vec![0; 3],
        );
        let part = RegionPartition::new(
            [("0", "p"), ("1", "q"), ("2", "q")]
                .into_iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        );
        let boxes = region_a3(&set, 0, &part).unwrap();
        assert_eq!(boxes.len(), 2);
        assert_eq!(
            (boxes[0].lower(), boxes[0].upper()),
            (&[0.0][..], &[0.0][..])
        );
        assert_eq!(
            (boxes[1].lower(), boxes[1].upper()),
            (&[1.0][..], &[3.0][..])
        );
        assert_eq!(boxes[1].provenance, Provenance::A3 { cell: "q".into() });

        let partial =
            RegionPartition::new([("0".to_string(), "p".to_string())].into_iter().collect());
        assert_eq!(
            region_a3(&set, 0, &partial),
            Err(Error::UncoveredRow("1".into()))
        );
    }

    #[test]
    fn surrogate_separates_two_clusters() {
        // clusters offset by +-3 on the first three coordinates, small noise elsewhere
        let mut rows = Vec::new();
        for i in 0..20 {
            let s = if i % 2 == 0 { 3.0 } else { -3.0 };
            let e = (i as f64 * 0.37).sin() * 0.1;
            rows.push(vec![s + e, s - e, s + 0.5 * e, e, -e]);
        }
        let set = labeled(rows, vec![0; 20], vec![0; 20]);
        let part = surrogate_partition(&set, 0, 3).unwrap();
        let cells: std::collections::BTreeSet<&String> = part.assignment.values().collect();
        assert_eq!(cells.len(), 2);
        assert!(cells.contains(&"+++".to_string()) && cells.contains(&"---".to_string()));
        let boxes = region_a3(&set, 0, &part).unwrap();
        let a1 = region_a1(&set, 0).unwrap();
        assert!(boxes.iter().all(|b| b.is_subset_of(&a1)));
    }

    #[test]
    fn gamma_boxes() {
        let set = labeled(vec![vec![0.0], vec![2.0]], vec![0, 0], vec![1, 1]);
        let b = region_gamma(&set, 0, 1.0).unwrap();
        assert_eq!((b.lower(), b.upper()), (&[0.0][..], &[2.0][..]));
        let small = region_gamma(&set, 0, 0.25).unwrap();
        let large = region_gamma(&set, 0, 2.0).unwrap();
        assert!(small.is_subset_of(&large));
        assert!(region_gamma(&set, 0, 0.0).is_err());
        assert!(matches!(
            region_gamma(&set, 1, 1.0),
            Err(Error::EmptyClassSelection(_))
        ));
    }

    #[test]
    fn invalid_boxes() {
        assert!(BoxRegion::new(vec![1.0], vec![0.0], Provenance::A1).is_err());
        assert!(BoxRegion::new(vec![0.0], vec![0.0, 1.0], Provenance::A1).is_err());
        assert!(BoxRegion::<f64>::new(vec![], vec![], Provenance::A1).is_err());
    }

    #[test]
    fn pinning() {
        let b = BoxRegion::new(vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0], Provenance::A1).unwrap();
        let p = b.pin_except(&[1], &[0.5, 0.2, 7.0]).unwrap();
        assert_eq!(p.lower(), &[0.5, 0.0, 1.0]);
        assert_eq!(p.upper(), &[0.5, 1.0, 1.0]);
    }

    #[test]
    fn record_round_trip() {
        let b = BoxRegion::new(
            vec![0.0, -1.5],
            vec![2.0, 1.0],
            Provenance::GammaSigma { gamma: 0.25 },
        )
        .unwrap();
        let json = serde_json::to_string(&RegionRecord::from_box("truck", &b)).unwrap();
        let back: RegionRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_box::<f64>().unwrap(), b);
        assert!(json.contains("\"method\":\"gamma_sigma\""));
    }
}
