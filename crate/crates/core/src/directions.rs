//! Caption templates, concept directions and the zero-shot head.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::cosine_similarity;
use crate::error::{Error, Result};
use crate::scalar::{norm, Scalar};

const DEFAULT_TEMPLATES: &str = include_str!("../templates.txt");

/// Caption templates, each with exactly one `{}` placeholder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptionTemplateSet {
    templates: Vec<String>,
}

impl CaptionTemplateSet {
    pub fn new<I>(templates: I) -> Result<Self>
    where
        I: IntoIterator,
        I::Item: Into<String>,
    {
        let templates: Vec<String> = templates.into_iter().map(Into::into).collect();
        if templates.is_empty() {
            return Err(Error::EmptyTemplateSet);
        }
        if let Some(bad) = templates.iter().find(|t| t.matches("{}").count() != 1) {
            return Err(Error::BadTemplate(bad.clone()));
        }
        Ok(CaptionTemplateSet { templates })
    }

    /// Parses one template per line; blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        Self::new(text.lines().map(str::trim).filter(|l| !l.is_empty()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Keeps only the templates accepted by `keep`.
    pub fn filter(&self, keep: impl Fn(&str) -> bool) -> Result<Self> {
        Self::new(self.templates.iter().filter(|t| keep(t)).cloned())
    }

    pub fn templates(&self) -> &[String] {
        &self.templates
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    /// One caption per template with `{}` replaced by `name`, in template order.
    pub fn expand(&self, name: &str) -> Vec<String> {
        self.templates
            .iter()
            .map(|t| t.replacen("{}", name, 1))
            .collect()
    }
}

impl Default for CaptionTemplateSet {
    /// The 69 stock templates shipped in `templates.txt`.
    fn default() -> Self {
        Self::parse(DEFAULT_TEMPLATES).expect("shipped templates are valid")
    }
}

/// Precomputed text embeddings keyed by exact caption text.
#[derive(Debug, Clone, Default)]
pub struct TextEmbedder<T> {
    table: HashMap<String, Vec<T>>,
}

impl<T: Scalar> TextEmbedder<T> {
    pub fn new(table: HashMap<String, Vec<T>>) -> Self {
        TextEmbedder { table }
    }

    pub fn embed(&self, caption: &str) -> Option<&[T]> {
        self.table.get(caption).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

/// Mean caption embedding of a named concept or class. Not normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptDirection<T> {
    pub concept: String,
    pub direction: Vec<T>,
    pub caption_count: usize,
}

impl<T: Scalar> ConceptDirection<T> {
    pub fn new(concept: impl Into<String>, direction: Vec<T>) -> Result<Self> {
        if direction.is_empty() || norm(&direction) == T::zero() {
            return Err(Error::ZeroVector);
        }
        Ok(ConceptDirection {
            concept: concept.into(),
            direction,
            caption_count: 1,
        })
    }

    /// The direction scaled to unit length.
    pub fn unit(&self) -> Vec<T> {
        let n = norm(&self.direction);
        self.direction.iter().map(|&x| x / n).collect()
    }
}

/// Averages the embeddings of every caption generated for `name`.
pub fn concept_direction<T: Scalar>(
    name: &str,
    templates: &CaptionTemplateSet,
    embedder: &TextEmbedder<T>,
) -> Result<ConceptDirection<T>> {
    let captions = templates.expand(name);
    let mut sum: Option<Vec<T>> = None;
    let mut norm_sum = T::zero();
    for cap in &captions {
        let v = embedder
            .embed(cap)
            .ok_or_else(|| Error::MissingCaptionEmbedding(cap.clone()))?;
        norm_sum = norm_sum + norm(v);
        match &mut sum {
            None => sum = Some(v.to_vec()),
            Some(s) if s.len() != v.len() => {
                return Err(Error::DimMismatch {
                    expected: s.len(),
                    found: v.len(),
                })
            }
            Some(s) => s.iter_mut().zip(v).for_each(|(a, &b)| *a = *a + b),
        }
    }
    let n = T::from_usize(captions.len()).expect("caption count fits the scalar type");
    let mean: Vec<T> = sum.unwrap_or_default().into_iter().map(|x| x / n).collect();
    // cancellation leaves rounding noise, not a direction
    let scale = norm_sum / n;
    if norm(&mean) <= scale * T::epsilon() * T::lit(16.0) {
        return Err(Error::ZeroMeanVector(name.to_string()));
    }
    Ok(ConceptDirection {
        concept: name.to_string(),
        direction: mean,
        caption_count: captions.len(),
    })
}

/// Cosine of `img` to every class direction, in class order.
pub fn zero_shot_scores<T: Scalar>(
    img: &[T],
    class_dirs: &[ConceptDirection<T>],
) -> Result<Vec<T>> {
    class_dirs
        .iter()
        .map(|d| cosine_similarity(img, &d.direction))
        .collect()
}

/// Index of the class direction with the highest cosine to `img`; ties go to
/// the lowest index.
pub fn zero_shot_classify<T: Scalar>(
    img: &[T],
    class_dirs: &[ConceptDirection<T>],
) -> Result<usize> {
    if class_dirs.len() < 2 {
        return Err(Error::TooFewClasses(class_dirs.len()));
    }
    let scores = zero_shot_scores(img, class_dirs)?;
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = k;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dir(name: &str, v: &[f64]) -> ConceptDirection<f64> {
        ConceptDirection::new(name, v.to_vec()).unwrap()
    }

    fn embedder(pairs: &[(&str, &[f64])]) -> TextEmbedder<f64> {
        TextEmbedder::new(
            pairs
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_vec()))
                .collect(),
        )
    }

    #[test]
    fn stock_templates() {
        let t = CaptionTemplateSet::default();
        assert_eq!(t.len(), 69);
        let caps = t.expand("metallic");
        assert_eq!(caps.len(), 69);
        assert_eq!(caps[0], "a bad photo of a metallic.");
        assert!(caps.contains(&"a photo containing a metallic object.".to_string()));
    }

    #[test]
    fn expansion_keeps_order() {
        let t = CaptionTemplateSet::new(["a photo of a {}."]).unwrap();
        assert_eq!(t.expand("truck"), vec!["a photo of a truck."]);
        let t = CaptionTemplateSet::new(["x {}", "{} y"]).unwrap();
        assert_eq!(t.expand("n"), vec!["x n", "n y"]);
    }

    #[test]
    fn template_invariants() {
        assert_eq!(
            CaptionTemplateSet::new(Vec::<String>::new()),
            Err(Error::EmptyTemplateSet)
        );
        assert!(matches!(
            CaptionTemplateSet::new(["none"]),
            Err(Error::BadTemplate(_))
        ));
        assert!(matches!(
            CaptionTemplateSet::new(["{} and {}"]),
            Err(Error::BadTemplate(_))
        ));
        let t = CaptionTemplateSet::default()
            .filter(|s| s.contains("object"))
            .unwrap();
        assert_eq!(t.len(), 6);
        assert!(CaptionTemplateSet::default().filter(|_| false).is_err());
    }

    #[test]
    fn direction_is_the_caption_mean() {
        let t = CaptionTemplateSet::new(["a {}", "the {}"]).unwrap();
        let e = embedder(&[("a x", &[1.0, 0.0]), ("the x", &[0.0, 1.0])]);
        let d = concept_direction("x", &t, &e).unwrap();
        assert_eq!(d.direction, vec![0.5, 0.5]);
        assert_eq!(d.caption_count, 2);

        let t1 = CaptionTemplateSet::new(["a {}"]).unwrap();
        let e = embedder(&[("a x", &[2.0, 0.0])]);
        assert_eq!(
            concept_direction("x", &t1, &e).unwrap().direction,
            vec![2.0, 0.0]
        );
    }

    #[test]
    fn direction_errors() {
        let t = CaptionTemplateSet::new(["a {}", "the {}"]).unwrap();
        let e = embedder(&[("a x", &[1.0, 0.0]), ("the x", &[-1.0, 0.0])]);
        assert_eq!(
            concept_direction("x", &t, &e),
            Err(Error::ZeroMeanVector("x".into()))
        );
        let e = embedder(&[("a x", &[1.0, 0.0])]);
        assert_eq!(
            concept_direction("x", &t, &e),
            Err(Error::MissingCaptionEmbedding("the x".into()))
        );
    }

    #[test]
    fn zero_shot_examples() {
        let dirs = [dir("c0", &[1.0, 0.0]), dir("c1", &[0.0, 1.0])];
        assert_eq!(zero_shot_classify(&[1.0, 0.0], &dirs).unwrap(), 0);
        assert_eq!(zero_shot_classify(&[1.0, 1.0], &dirs).unwrap(), 0);
        // cos = 0.6 vs 0.8
        assert_eq!(zero_shot_classify(&[0.6, 0.8], &dirs).unwrap(), 1);
        assert_eq!(
            zero_shot_classify(&[0.0, 0.0], &dirs),
            Err(Error::ZeroVector)
        );
        assert_eq!(
            zero_shot_classify(&[1.0, 0.0], &dirs[..1]),
            Err(Error::TooFewClasses(1))
        );
    }
}
