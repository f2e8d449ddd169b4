//! Manifest and CSV formats.
//!
//! All CSVs are UTF-8 and comma-separated with a header row. Floats are
//! written with Rust's shortest round-trip formatting, so saving and loading
//! reproduces every value exactly.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Attributes, EmbeddingSet, Matrix};
use crate::error::{Error, Result};
use crate::lang::{is_token, TaskVocabulary};
use crate::scalar::Scalar;

/// Data files referenced by a manifest, relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ManifestFiles {
    /// Vision-model embeddings (`id,d0,...`).
    pub embeddings: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attributes: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub captions: Option<String>,
    /// Image embeddings in the vision-language model's space, row-aligned by id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vlm_embeddings: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dim: usize,
    /// Dimension of the vision-language space; defaults to `dim`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vlm_dim: Option<usize>,
    pub class_names: Vec<String>,
    pub concept_names: Vec<String>,
    pub files: ManifestFiles,
    #[serde(skip)]
    base: PathBuf,
}

/// Which embedding space to load.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Vision,
    Vlm,
}

impl Manifest {
    /// Reads and validates a manifest. Data files are checked for existence
    /// but not opened.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        m.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate().map_err(|e| match e {
            Error::Invalid(msg) => Error::format(path, msg),
            other => other,
        })?;
        Ok(m)
    }

    pub fn with_base(mut self, base: impl Into<PathBuf>) -> Self {
        self.base = base.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.vlm_dim == Some(0) {
            return Err(Error::Invalid("dimensions must be >= 1".into()));
        }
        self.vocabulary()?;
        let f = &self.files;
        let named = [
            Some(&f.embeddings),
            f.labels.as_ref(),
            f.attributes.as_ref(),
            f.captions.as_ref(),
            f.vlm_embeddings.as_ref(),
            f.head.as_ref(),
            f.templates.as_ref(),
            f.partition.as_ref(),
        ];
        for rel in named.into_iter().flatten() {
            let p = self.base.join(rel);
            if !p.is_file() {
                return Err(Error::Invalid(format!(
                    "data file {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }

    pub fn vocabulary(&self) -> Result<TaskVocabulary> {
        TaskVocabulary::new(
            self.concept_names.iter().cloned(),
            self.class_names.iter().cloned(),
        )
        .map_err(|e| Error::Invalid(e.to_string()))
    }

    pub fn vlm_dim(&self) -> usize {
        self.vlm_dim.unwrap_or(self.dim)
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.base.join(rel)
    }

    fn require(&self, file: &Option<String>, what: &str) -> Result<PathBuf> {
        file.as_deref()
            .map(|f| self.path(f))
            .ok_or_else(|| Error::Invalid(format!("manifest has no `{what}` file")))
    }

    pub fn head_path(&self) -> Result<PathBuf> {
        self.require(&self.files.head, "head")
    }

    pub fn captions_path(&self) -> Result<PathBuf> {
        self.require(&self.files.captions, "captions")
    }

    pub fn partition_path(&self) -> Result<PathBuf> {
        self.require(&self.files.partition, "partition")
    }

    pub fn templates_path(&self) -> Option<PathBuf> {
        self.files.templates.as_deref().map(|f| self.path(f))
    }

    /// Loads one embedding space joined with labels, split and attributes.
    pub fn load_set<T: Scalar>(&self, space: Space) -> Result<EmbeddingSet<T>> {
        let (path, dim) = match space {
            Space::Vision => (self.path(&self.files.embeddings), self.dim),
            Space::Vlm => (
                self.require(&self.files.vlm_embeddings, "vlm_embeddings")?,
                self.vlm_dim(),
            ),
        };
        let (ids, matrix) = read_embeddings_csv::<T>(&path, Some(dim))?;
        let mut set = EmbeddingSet::new(ids, matrix)?;
        let vocab = self.vocabulary()?;
        if let Some(rel) = &self.files.labels {
            let labels = read_labels_csv(&self.path(rel), &vocab)?;
            let lookup = |id: &String| {
                labels.rows.get(id).ok_or_else(|| {
                    Error::format(self.path(rel), format!("no labels for id `{id}`"))
                })
            };
            let rows: Vec<&LabelRow> = set.ids().iter().map(lookup).collect::<Result<_>>()?;
            let gt = rows.iter().map(|r| r.ground_truth).collect();
            set = set.with_ground_truth(gt)?;
            if labels.has_predicted {
                let pred = rows
                    .iter()
                    .map(|r| r.predicted.expect("checked on load"))
                    .collect();
                set = set.with_predicted(pred)?;
            }
            if labels.has_split {
                let split = rows
                    .iter()
                    .map(|r| r.split.clone().expect("checked on load"))
                    .collect();
                set = set.with_split(split)?;
            }
        }
        if let Some(rel) = &self.files.attributes {
            let path = self.path(rel);
            let table = read_attributes_csv(&path, &vocab)?;
            let present =
                set.ids()
                    .iter()
                    .map(|id| {
                        table.rows.get(id).cloned().ok_or_else(|| {
                            Error::format(&path, format!("no attributes for id `{id}`"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
            set = set.with_attributes(Attributes {
                concepts: table.concepts,
                present,
            })?;
        }
        Ok(set)
    }
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::io(path, e))
}

fn parse_float<T: Scalar>(path: &Path, line: u64, cell: &str) -> Result<T> {
    let x: f64 = cell
        .parse()
        .map_err(|_| Error::format(path, format!("line {line}: `{cell}` is not a number")))?;
    if !x.is_finite() {
        return Err(Error::format(
            path,
            format!("line {line}: non-finite value `{cell}`"),
        ));
    }
    T::from_f64(x).ok_or_else(|| Error::format(path, format!("line {line}: `{cell}` out of range")))
}

/// Reads a `key,d0,...,d{p-1}` table. The key column is returned as-is.
fn read_keyed_vectors<T: Scalar>(
    path: &Path,
    key: &str,
    dim: Option<usize>,
) -> Result<(Vec<String>, Vec<Vec<T>>)> {
    let mut rdr = reader(path)?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .clone();
    if headers.get(0) != Some(key) {
        return Err(Error::format(path, format!("first column must be `{key}`")));
    }
    let p = headers.len() - 1;
    for (j, h) in headers.iter().skip(1).enumerate() {
        if h != format!("d{j}") {
            return Err(Error::format(
                path,
                format!("expected column `d{j}`, found `{h}`"),
            ));
        }
    }
    if p == 0 {
        return Err(Error::format(path, "no vector columns"));
    }
    if let Some(d) = dim {
        if d != p {
            return Err(Error::format(
                path,
                format!("manifest dim {d} but file has {p} columns"),
            ));
        }
    }
    let mut keys = Vec::new();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != p + 1 {
            return Err(Error::format(
                path,
                format!("line {line}: expected {} cells", p + 1),
            ));
        }
        keys.push(rec[0].to_string());
        rows.push(
            rec.iter()
                .skip(1)
                .map(|c| parse_float(path, line, c))
                .collect::<Result<Vec<T>>>()?,
        );
    }
    Ok((keys, rows))
}

/// Reads `embeddings.csv`.
pub fn read_embeddings_csv<T: Scalar>(
    path: impl AsRef<Path>,
    dim: Option<usize>,
) -> Result<(Vec<String>, Matrix<T>)> {
    let path = path.as_ref();
    let (ids, rows) = read_keyed_vectors(path, "id", dim)?;
    let matrix = Matrix::from_rows(&rows)?;
    Ok((ids, matrix))
}

fn write_keyed_vectors<'a, T: Scalar>(
    path: &Path,
    key: &str,
    dim: usize,
    rows: impl Iterator<Item = (&'a str, &'a [T])>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e))?;
    let mut header = vec![key.to_string()];
    header.extend((0..dim).map(|j| format!("d{j}")));
    w.write_record(&header).map_err(|e| Error::io(path, e))?;
    for (k, v) in rows {
        let mut rec = Vec::with_capacity(dim + 1);
        rec.push(k.to_string());
        rec.extend(v.iter().map(|x| format!("{}", x.as_f64())));
        w.write_record(&rec).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `embeddings.csv`.
pub fn write_embeddings_csv<T: Scalar>(
    path: impl AsRef<Path>,
    ids: &[String],
    m: &Matrix<T>,
) -> Result<()> {
    let rows = ids.iter().map(String::as_str).zip(m.iter_rows());
    write_keyed_vectors(path.as_ref(), "id", m.cols(), rows)
}

/// Reads `captions.csv` into a caption → embedding table.
pub fn read_captions_csv<T: Scalar>(
    path: impl AsRef<Path>,
    dim: Option<usize>,
) -> Result<HashMap<String, Vec<T>>> {
    let path = path.as_ref();
    let (keys, rows) = read_keyed_vectors(path, "caption", dim)?;
    let mut out = HashMap::with_capacity(keys.len());
    for (k, v) in keys.into_iter().zip(rows) {
        if out.insert(k.clone(), v).is_some() {
            return Err(Error::format(path, format!("duplicate caption `{k}`")));
        }
    }
    Ok(out)
}

/// Writes `captions.csv`; captions are quoted as needed.
pub fn write_captions_csv<T: Scalar>(
    path: impl AsRef<Path>,
    captions: &[(String, Vec<T>)],
) -> Result<()> {
    let dim = captions.first().map_or(0, |(_, v)| v.len());
    let rows = captions.iter().map(|(c, v)| (c.as_str(), v.as_slice()));
    write_keyed_vectors(path.as_ref(), "caption", dim, rows)
}

#[derive(Debug, Clone)]
struct LabelRow {
    ground_truth: usize,
    predicted: Option<usize>,
    split: Option<String>,
}

struct LabelTable {
    rows: HashMap<String, LabelRow>,
    has_predicted: bool,
    has_split: bool,
}

/// `labels.csv`: `id,ground_truth[,predicted][,split]`. Class names must be in
/// the vocabulary; the optional columns, when present, fill every row.
fn read_labels_csv(path: &Path, vocab: &TaskVocabulary) -> Result<LabelTable> {
    let mut rdr = reader(path)?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(id_col), Some(gt_col)) = (col("id"), col("ground_truth")) else {
        return Err(Error::format(path, "header needs `id` and `ground_truth`"));
    };
    let pred_col = col("predicted");
    let split_col = col("split");
    let class = |line: u64, name: &str| {
        vocab
            .class(name)
            .map(|c| c.index)
            .ok_or_else(|| Error::format(path, format!("line {line}: unknown class `{name}`")))
    };
    let mut rows = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let cell = |i: usize| rec.get(i).unwrap_or("");
        let predicted = match pred_col {
            Some(i) if cell(i).is_empty() => {
                return Err(Error::format(
                    path,
                    format!("line {line}: empty prediction"),
                ))
            }
            Some(i) => Some(class(line, cell(i))?),
            None => None,
        };
        let split = match split_col {
            Some(i) if cell(i).is_empty() => {
                return Err(Error::format(path, format!("line {line}: empty split")))
            }
            Some(i) => Some(cell(i).to_string()),
            None => None,
        };
        let row = LabelRow {
            ground_truth: class(line, cell(gt_col))?,
            predicted,
            split,
        };
        let id = cell(id_col).to_string();
        if rows.insert(id.clone(), row).is_some() {
            return Err(Error::format(path, format!("duplicate id `{id}`")));
        }
    }
    Ok(LabelTable {
        rows,
        has_predicted: pred_col.is_some(),
        has_split: split_col.is_some(),
    })
}

struct AttributeTable {
    concepts: Vec<crate::lang::ConceptName>,
    rows: HashMap<String, Vec<bool>>,
}

/// `attributes.csv`: `id,<concept>,...` with 0/1 cells.
fn read_attributes_csv(path: &Path, vocab: &TaskVocabulary) -> Result<AttributeTable> {
    let mut rdr = reader(path)?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .clone();
    if headers.get(0) != Some("id") {
        return Err(Error::format(path, "first column must be `id`"));
    }
    let concepts = headers
        .iter()
        .skip(1)
        .map(|h| {
            vocab
                .concept(h)
                .cloned()
                .ok_or_else(|| Error::format(path, format!("unknown concept column `{h}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let flags = rec
            .iter()
            .skip(1)
            .map(|c| match c {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(Error::format(
                    path,
                    format!("line {line}: `{other}` is not 0/1"),
                )),
            })
            .collect::<Result<Vec<_>>>()?;
        if flags.len() != concepts.len() {
            return Err(Error::format(
                path,
                format!("line {line}: wrong number of cells"),
            ));
        }
        rows.insert(rec[0].to_string(), flags);
    }
    Ok(AttributeTable { concepts, rows })
}

/// `partition.csv`: `id,cell`, returned as id → cell.
pub fn read_partition_csv(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["id", "cell"] {
        return Err(Error::format(path, "header must be `id,cell`"));
    }
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
        if !is_token(&rec[1]) {
            return Err(Error::format(path, format!("bad cell name `{}`", &rec[1])));
        }
        out.insert(rec[0].to_string(), rec[1].to_string());
    }
    Ok(out)
}

pub fn write_partition_csv(
    path: impl AsRef<Path>,
    assignment: &BTreeMap<String, String>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e))?;
    w.write_record(["id", "cell"])
        .map_err(|e| Error::io(path, e))?;
    for (id, cell) in assignment {
        w.write_record([id, cell]).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<D: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<D> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_json<S: Serialize>(path: impl AsRef<Path>, value: &S) -> Result<()> {
    let path = path.as_ref();
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embeddings_round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        let m = Matrix::from_rows(&[
            vec![0.1, -1.0 / 3.0, 1e-300],
            vec![std::f64::consts::PI, 12345.678901234567, -0.0],
        ])
        .unwrap();
        let ids = vec!["a".to_string(), "b,c".to_string()];
        write_embeddings_csv(&path, &ids, &m).unwrap();
        let (ids2, m2) = read_embeddings_csv::<f64>(&path, Some(3)).unwrap();
        assert_eq!(ids2, ids);
        for (x, y) in m.as_slice().iter().zip(m2.as_slice()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert!(read_embeddings_csv::<f64>(&path, Some(4)).is_err());
    }

    #[test]
    fn captions_are_quoted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let caps = vec![
            ("a photo of a truck.".to_string(), vec![1.0, 2.0]),
            ("a \"quoted\", caption".to_string(), vec![3.0, 4.0]),
        ];
        write_captions_csv(&path, &caps).unwrap();
        let back = read_captions_csv::<f64>(&path, Some(2)).unwrap();
        assert_eq!(back["a \"quoted\", caption"], vec![3.0, 4.0]);
        assert_eq!(back.len(), 2);
    }

    #[test]
    fn bad_cells_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        std::fs::write(&path, "id,d0\na,1.5\nb,abc\n").unwrap();
        assert!(matches!(
            read_embeddings_csv::<f64>(&path, None),
            Err(Error::Format { .. })
        ));
        std::fs::write(&path, "id,d0\na,NaN\n").unwrap();
        assert!(read_embeddings_csv::<f64>(&path, None).is_err());
        std::fs::write(&path, "key,d0\na,1\n").unwrap();
        assert!(read_embeddings_csv::<f64>(&path, None).is_err());
    }

    #[test]
    fn manifest_joins_labels_and_attributes() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        std::fs::write(d.join("e.csv"), "id,d0,d1\nx,1,0\ny,0,1\n").unwrap();
        std::fs::write(
            d.join("l.csv"),
            "id,ground_truth,predicted,split\ny,cat,cat,test\nx,truck,cat,train\n",
        )
        .unwrap();
        std::fs::write(d.join("a.csv"), "id,wheels,ears\nx,1,0\ny,0,1\n").unwrap();
        let manifest = serde_json::json!({
            "dim": 2,
            "class_names": ["truck", "cat"],
            "concept_names": ["wheels", "ears"],
            "files": {"embeddings": "e.csv", "labels": "l.csv", "attributes": "a.csv"}
        });
        std::fs::write(d.join("m.json"), manifest.to_string()).unwrap();
        let m = Manifest::load(d.join("m.json")).unwrap();
        let set: EmbeddingSet<f64> = m.load_set(Space::Vision).unwrap();
        assert_eq!(set.ground_truth().unwrap(), &[0, 1]);
        assert_eq!(set.predicted().unwrap(), &[1, 1]);
        assert_eq!(set.split_rows("train"), vec![0]);
        assert_eq!(
            set.attributes().unwrap().present,
            vec![vec![true, false], vec![false, true]]
        );
        assert!(m.load_set::<f64>(Space::Vlm).is_err());
    }

    #[test]
    fn manifest_validation_catches_missing_files_and_bad_names() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let write = |v: serde_json::Value| {
            std::fs::write(d.join("m.json"), v.to_string()).unwrap();
            Manifest::load(d.join("m.json"))
        };
        let err = write(serde_json::json!({
            "dim": 2, "class_names": ["a"], "concept_names": ["b"],
            "files": {"embeddings": "missing.csv"}
        }));
        assert!(matches!(err, Err(Error::Format { .. })));
        std::fs::write(d.join("e.csv"), "id,d0\n").unwrap();
        let err = write(serde_json::json!({
            "dim": 2, "class_names": ["a", "a"], "concept_names": ["b"],
            "files": {"embeddings": "e.csv"}
        }));
        assert!(err.is_err());
        let err = write(serde_json::json!({
            "dim": 0, "class_names": ["a"], "concept_names": ["b"],
            "files": {"embeddings": "e.csv"}
        }));
        assert!(err.is_err());
    }
}
