//! Dense embedding matrices, cosine similarity, column statistics and the
//! on-disk formats embeddings travel in.

pub mod io;

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::lang::ConceptName;
use crate::scalar::{dot, norm, Scalar};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    /// `self * v`.
    pub fn mul_vec(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.cols {
            return Err(Error::DimMismatch {
                expected: self.cols,
                found: v.len(),
            });
        }
        Ok(self.iter_rows().map(|r| dot(r, v)).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Matrix {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

/// Cosine of the angle between `a` and `b`, clamped to `[-1, 1]`.
pub fn cosine_similarity<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == T::zero() || nb == T::zero() {
        return Err(Error::ZeroVector);
    }
    let c = dot(a, b) / (na * nb);
    Ok(c.max(-T::one()).min(T::one()))
}

/// Per-column summary of a row selection. `std` is the population
/// standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnStats<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
    pub min: Vec<T>,
    pub max: Vec<T>,
}

pub fn column_stats<T: Scalar>(m: &Matrix<T>, rows: &[usize]) -> Result<ColumnStats<T>> {
    let Some(&first) = rows.first() else {
        return Err(Error::EmptySelection);
    };
    let p = m.cols();
    let mut min = m.row(first).to_vec();
    let mut max = min.clone();
    let mut sum = vec![T::zero(); p];
    for &r in rows {
        for (j, &x) in m.row(r).iter().enumerate() {
            min[j] = min[j].min(x);
            max[j] = max[j].max(x);
            sum[j] = sum[j] + x;
        }
    }
    let n = T::from_usize(rows.len()).expect("row count fits the scalar type");
    // mean can round just outside [min, max] for near-constant columns
    let mean: Vec<T> = (0..p)
        .map(|j| (sum[j] / n).max(min[j]).min(max[j]))
        .collect();
    let mut ss = vec![T::zero(); p];
    for &r in rows {
        for (j, &x) in m.row(r).iter().enumerate() {
            let d = x - mean[j];
            ss[j] = ss[j] + d * d;
        }
    }
    let std = ss.into_iter().map(|s| (s / n).sqrt()).collect();
    Ok(ColumnStats {
        mean,
        std,
        min,
        max,
    })
}

/// Binary concept annotations, one row per embedding row.
#[derive(Debug, Clone, PartialEq)]
pub struct Attributes {
    pub concepts: Vec<ConceptName>,
    pub present: Vec<Vec<bool>>,
}

impl Attributes {
    pub fn column(&self, concept: &ConceptName) -> Option<usize> {
        self.concepts.iter().position(|c| c == concept)
    }
}

/// Embedding vectors with per-row metadata. Labels are class indices into
/// the task vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet<T> {
    ids: Vec<String>,
    matrix: Matrix<T>,
    ground_truth: Option<Vec<usize>>,
    predicted: Option<Vec<usize>>,
    attributes: Option<Attributes>,
    split: Option<Vec<String>>,
}

impl<T: Scalar> EmbeddingSet<T> {
    pub fn new(ids: Vec<String>, matrix: Matrix<T>) -> Result<Self> {
        if ids.len() != matrix.rows() {
            return Err(Error::RowMismatch(format!(
                "{} ids for {} rows",
                ids.len(),
                matrix.rows()
            )));
        }
        if matrix.rows() > 0 && matrix.cols() == 0 {
            return Err(Error::Invalid("embeddings must have dimension >= 1".into()));
        }
        if !matrix.is_finite() {
            return Err(Error::NonFinite("embedding matrix".into()));
        }
        let mut seen = HashSet::new();
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Invalid(format!("duplicate row id `{id}`")));
            }
        }
        Ok(EmbeddingSet {
            ids,
            matrix,
            ground_truth: None,
            predicted: None,
            attributes: None,
            split: None,
        })
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::new(ids, Matrix::from_rows(&rows)?)
    }

    fn check_len(&self, n: usize, what: &str) -> Result<()> {
        if n == self.len() {
            Ok(())
        } else {
            Err(Error::RowMismatch(format!(
                "{what} has {n} rows, embeddings have {}",
                self.len()
            )))
        }
    }

    pub fn with_ground_truth(mut self, labels: Vec<usize>) -> Result<Self> {
        self.check_len(labels.len(), "ground truth")?;
        self.ground_truth = Some(labels);
        Ok(self)
    }

    pub fn with_predicted(mut self, labels: Vec<usize>) -> Result<Self> {
        self.check_len(labels.len(), "predictions")?;
        self.predicted = Some(labels);
        Ok(self)
    }

    pub fn with_attributes(mut self, attributes: Attributes) -> Result<Self> {
        self.check_len(attributes.present.len(), "attributes")?;
        if attributes
            .present
            .iter()
            .any(|r| r.len() != attributes.concepts.len())
        {
            return Err(Error::Invalid(
                "attribute rows must cover every concept".into(),
            ));
        }
        self.attributes = Some(attributes);
        Ok(self)
    }

    pub fn with_split(mut self, split: Vec<String>) -> Result<Self> {
        self.check_len(split.len(), "split column")?;
        self.split = Some(split);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn row(&self, i: usize) -> &[T] {
        self.matrix.row(i)
    }

    pub fn ground_truth(&self) -> Option<&[usize]> {
        self.ground_truth.as_deref()
    }

    pub fn predicted(&self) -> Option<&[usize]> {
        self.predicted.as_deref()
    }

    pub fn attributes(&self) -> Option<&Attributes> {
        self.attributes.as_ref()
    }

    pub fn split(&self) -> Option<&[String]> {
        self.split.as_deref()
    }

    /// Rows whose ground truth is `class`.
    pub fn rows_with_truth(&self, class: usize) -> Result<Vec<usize>> {
        let gt = self
            .ground_truth()
            .ok_or(Error::MissingColumn("ground truth"))?;
        Ok(positions(gt, |&g| g == class))
    }

    /// Rows the model classifies as `class`.
    pub fn rows_predicted(&self, class: usize) -> Result<Vec<usize>> {
        let pred = self
            .predicted()
            .ok_or(Error::MissingColumn("predictions"))?;
        Ok(positions(pred, |&p| p == class))
    }

    /// Rows predicted as `class` whose ground truth is also `class`.
    pub fn rows_correct(&self, class: usize) -> Result<Vec<usize>> {
        let gt = self
            .ground_truth()
            .ok_or(Error::MissingColumn("ground truth"))?;
        let pred = self
            .predicted()
            .ok_or(Error::MissingColumn("predictions"))?;
        Ok((0..self.len())
            .filter(|&i| gt[i] == class && pred[i] == class)
            .collect())
    }

    /// New set holding only `rows`, metadata carried along.
    pub fn subset(&self, rows: &[usize]) -> Self {
        let pick = |v: &Vec<usize>| rows.iter().map(|&r| v[r]).collect();
        EmbeddingSet {
            ids: rows.iter().map(|&r| self.ids[r].clone()).collect(),
            matrix: self.matrix.select_rows(rows),
            ground_truth: self.ground_truth.as_ref().map(pick),
            predicted: self.predicted.as_ref().map(pick),
            attributes: self.attributes.as_ref().map(|a| Attributes {
                concepts: a.concepts.clone(),
                present: rows.iter().map(|&r| a.present[r].clone()).collect(),
            }),
            split: self
                .split
                .as_ref()
                .map(|s| rows.iter().map(|&r| s[r].clone()).collect()),
        }
    }

    /// Rows belonging to `split`; every row when the set carries no split column.
    pub fn split_rows(&self, split: &str) -> Vec<usize> {
        match &self.split {
            Some(s) => positions(s, |x| x == split),
            None => (0..self.len()).collect(),
        }
    }

    /// Same set with every embedding replaced by `f(row)`.
    pub fn map_rows<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&[T]) -> Result<Vec<T>>,
    {
        let rows = self
            .matrix
            .iter_rows()
            .map(&mut f)
            .collect::<Result<Vec<_>>>()?;
        let mut out = self.clone();
        out.matrix = Matrix::from_rows(&rows)?;
        Ok(out)
    }

    pub fn column_stats(&self, rows: &[usize]) -> Result<ColumnStats<T>> {
        column_stats(&self.matrix, rows)
    }
}

fn positions<X>(v: &[X], keep: impl Fn(&X) -> bool) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, x)| keep(x))
        .map(|(i, _)| i)
        .collect()
}

/// Pairs up rows of `a` and `b` carrying the same id, in `a`'s order.
pub fn align_rows<T: Scalar>(
    a: &EmbeddingSet<T>,
    b: &EmbeddingSet<T>,
) -> Result<Vec<(usize, usize)>> {
    if a.len() != b.len() {
        return Err(Error::RowMismatch(format!(
            "{} rows vs {} rows",
            a.len(),
            b.len()
        )));
    }
    let index: HashMap<&str, usize> = b
        .ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    a.ids()
        .iter()
        .enumerate()
        .map(|(i, id)| {
            index
                .get(id.as_str())
                .map(|&j| (i, j))
                .ok_or_else(|| Error::RowMismatch(format!("id `{id}` missing from second set")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine_similarity::<f64>(&[1.0, 2.0], &[2.0, 4.0]).unwrap() - 1.0).abs() < 1e-15);
        let c = cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn cosine_errors() {
        assert_eq!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroVector)
        );
        assert!(matches!(
            cosine_similarity(&[1.0], &[1.0, 0.0]),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn cosine_is_clamped() {
        let a = [0.1f64, 0.2, 0.3];
        for s in [1.0, 3.0, 1e-3, 7.77] {
            let b: Vec<f64> = a.iter().map(|x| x * s).collect();
            let c = cosine_similarity(&a, &b).unwrap();
            assert!(c <= 1.0 && c > 1.0 - 1e-15);
        }
    }

    #[test]
    fn works_for_f32() {
        let c: f32 = cosine_similarity(&[1.0f32, 1.0], &[1.0, 0.0]).unwrap();
        assert!((c - std::f32::consts::FRAC_1_SQRT_2).abs() < 1e-6);
    }

    #[test]
    fn stats_examples() {
        let m = Matrix::from_rows(&[vec![0.0, 1.0], vec![2.0, -1.0]]).unwrap();
        let s = column_stats(&m, &[0, 1]).unwrap();
        assert_eq!(s.min, vec![0.0, -1.0]);
        assert_eq!(s.max, vec![2.0, 1.0]);
        assert_eq!(s.mean, vec![1.0, 0.0]);

        let one = Matrix::from_rows(&[vec![3.0, 4.0]]).unwrap();
        let s = column_stats(&one, &[0]).unwrap();
        assert_eq!(s.min, vec![3.0, 4.0]);
        assert_eq!(s.max, s.min);
        assert_eq!(s.mean, s.min);
        assert_eq!(s.std, vec![0.0, 0.0]);

        // population std of {0, 2}: sqrt(((0-1)^2 + (2-1)^2) / 2) = 1
        let m = Matrix::from_rows(&[vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(column_stats(&m, &[0, 1]).unwrap().std, vec![1.0]);

        assert_eq!(column_stats(&m, &[]), Err(Error::EmptySelection));
    }

    #[test]
    fn set_rejects_bad_rows() {
        let m = Matrix::from_rows(&[vec![0.0], vec![f64::NAN]]).unwrap();
        assert!(EmbeddingSet::new(vec!["a".into(), "b".into()], m).is_err());
        let m = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(EmbeddingSet::new(vec!["a".into(), "a".into()], m).is_err());
    }

    #[test]
    fn label_selections() {
        let set = EmbeddingSet::from_rows(vec![vec![0.0], vec![1.0], vec![2.0]])
            .unwrap()
            .with_ground_truth(vec![0, 0, 1])
            .unwrap()
            .with_predicted(vec![0, 1, 0])
            .unwrap();
        assert_eq!(set.rows_with_truth(0).unwrap(), vec![0, 1]);
        assert_eq!(set.rows_predicted(0).unwrap(), vec![0, 2]);
        assert_eq!(set.rows_correct(0).unwrap(), vec![0]);
        let sub = set.subset(&[2, 0]);
        assert_eq!(sub.ids(), &["2".to_string(), "0".to_string()]);
        assert_eq!(sub.predicted().unwrap(), &[0, 0]);
    }

    #[test]
    fn alignment_by_id() {
        let a = EmbeddingSet::new(
            vec!["x".into(), "y".into()],
            Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap(),
        )
        .unwrap();
        let b = EmbeddingSet::new(
            vec!["y".into(), "x".into()],
            Matrix::from_rows(&[vec![20.0], vec![10.0]]).unwrap(),
        )
        .unwrap();
        assert_eq!(align_rows(&a, &b).unwrap(), vec![(0, 1), (1, 0)]);
    }
}
