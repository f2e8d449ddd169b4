//! Relevant concepts, elicited strength predicates and their empirical
//! satisfaction rates.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::lang::{ClassLabel, ConceptName, SpecExpr};
use crate::rep_maps::RepMap;
use crate::scalar::Scalar;

pub const RELEVANCE_THRESHOLD: f64 = 0.70;
pub const SIGNIFICANCE_LEVEL: f64 = 0.95;

/// `stronger > weaker` on inputs of class `class`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StrengthPredicate {
    pub stronger: ConceptName,
    pub weaker: ConceptName,
    pub class: ClassLabel,
}

impl StrengthPredicate {
    pub fn new(stronger: ConceptName, weaker: ConceptName, class: ClassLabel) -> Result<Self> {
        if stronger == weaker {
            return Err(Error::Invalid(format!(
                "predicate compares `{stronger}` with itself"
            )));
        }
        Ok(StrengthPredicate {
            stronger,
            weaker,
            class,
        })
    }

    /// `predict(class) => gt(stronger, weaker)`.
    pub fn to_spec(&self) -> SpecExpr {
        SpecExpr::implies(
            SpecExpr::Predict(self.class.clone()),
            SpecExpr::Gt(self.stronger.clone(), self.weaker.clone()),
        )
    }
}

impl fmt::Display for StrengthPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} > {} | {}", self.stronger, self.weaker, self.class)
    }
}

fn no_rows(class: &ClassLabel) -> Error {
    Error::NoRowsForClass(class.name.clone())
}

/// Concepts annotated on strictly more than `threshold` of the rows whose
/// ground truth is `class`.
pub fn relevant_concepts<T: Scalar>(
    set: &EmbeddingSet<T>,
    class: &ClassLabel,
    threshold: f64,
) -> Result<BTreeSet<ConceptName>> {
    let attrs = set.attributes().ok_or(Error::MissingColumn("attributes"))?;
    let rows = set.rows_with_truth(class.index)?;
    if rows.is_empty() {
        return Err(no_rows(class));
    }
    let n = rows.len() as f64;
    Ok(attrs
        .concepts
        .iter()
        .enumerate()
        .filter(|&(j, _)| {
            let hits = rows.iter().filter(|&&r| attrs.present[r][j]).count();
            hits as f64 / n > threshold
        })
        .map(|(_, c)| c.clone())
        .collect())
}

/// Every (relevant, irrelevant) pair, relevant concepts outer, both in
/// `all_concepts` order.
pub fn elicit_predicates(
    relevant: &BTreeSet<ConceptName>,
    all_concepts: &[ConceptName],
    class: &ClassLabel,
) -> Vec<StrengthPredicate> {
    let (strong, weak): (Vec<_>, Vec<_>) = all_concepts.iter().partition(|c| relevant.contains(c));
    strong
        .iter()
        .flat_map(|s| {
            weak.iter().map(move |w| StrengthPredicate {
                stronger: (*s).clone(),
                weaker: (*w).clone(),
                class: class.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateRate {
    pub predicate: StrengthPredicate,
    pub satisfied: usize,
    pub total: usize,
}

impl PredicateRate {
    pub fn probability(&self) -> f64 {
        self.satisfied as f64 / self.total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rates: Vec<PredicateRate>,
}

/// Fraction of ground-truth-`class` rows on which each predicate holds.
/// Predicates for other classes are rejected.
pub fn satisfaction_probability<T: Scalar>(
    set: &EmbeddingSet<T>,
    preds: &[StrengthPredicate],
    rep: &RepMap<T>,
    class: &ClassLabel,
) -> Result<ValidationReport> {
    if let Some(p) = preds.iter().find(|p| &p.class != class) {
        return Err(Error::Invalid(format!(
            "predicate `{p}` is not for class `{class}`"
        )));
    }
    let rows = set.rows_with_truth(class.index)?;
    if rows.is_empty() {
        return Err(no_rows(class));
    }
    let values = rows
        .par_iter()
        .map(|&r| rep.rep_values(set.row(r)))
        .collect::<Result<Vec<_>>>()?;
    let lookup = |vals: &std::collections::HashMap<ConceptName, T>, c: &ConceptName| {
        vals.get(c)
            .copied()
            .ok_or_else(|| Error::UnknownConcept(c.to_string()))
    };
    let rates = preds
        .par_iter()
        .map(|p| {
            let mut satisfied = 0;
            for vals in &values {
                if lookup(vals, &p.stronger)? > lookup(vals, &p.weaker)? {
                    satisfied += 1;
                }
            }
            Ok(PredicateRate {
                predicate: p.clone(),
                satisfied,
                total: values.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ValidationReport { rates })
}

/// Predicates whose rate is strictly above `level`.
pub fn filter_significant(report: &ValidationReport, level: f64) -> Vec<StrengthPredicate> {
    report
        .rates
        .iter()
        .filter(|r| r.probability() > level)
        .map(|r| r.predicate.clone())
        .collect()
}

/// `class,stronger,weaker,probability,n`.
pub fn write_report_csv(report: &ValidationReport, path: &std::path::Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e))?;
    w.write_record(["class", "stronger", "weaker", "probability", "n"])
        .map_err(|e| Error::io(path, e))?;
    for r in &report.rates {
        w.write_record([
            r.predicate.class.name.clone(),
            r.predicate.stronger.to_string(),
            r.predicate.weaker.to_string(),
            r.probability().to_string(),
            r.total.to_string(),
        ])
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    /// Relevant concept against an irrelevant one.
    Elicited,
    /// Neither concept is relevant to the class.
    Nonsensical,
    Other,
    Diagonal,
}

/// Heat-map grid: `probability[y][x]` for `stronger = rows[y]`,
/// `weaker = cols[x]`; `None` on the diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatMap {
    pub class: String,
    pub rows: Vec<ConceptName>,
    pub cols: Vec<ConceptName>,
    pub probability: Vec<Vec<Option<f64>>>,
    pub kind: Vec<Vec<CellKind>>,
}

/// Satisfaction rate of every ordered concept pair.
pub fn heat_map<T: Scalar>(
    set: &EmbeddingSet<T>,
    concepts: &[ConceptName],
    relevant: &BTreeSet<ConceptName>,
    rep: &RepMap<T>,
    class: &ClassLabel,
) -> Result<HeatMap> {
    let n = concepts.len();
    let preds: Vec<StrengthPredicate> = concepts
        .iter()
        .flat_map(|s| {
            concepts
                .iter()
                .filter(move |w| *w != s)
                .map(move |w| StrengthPredicate {
                    stronger: s.clone(),
                    weaker: w.clone(),
                    class: class.clone(),
                })
        })
        .collect();
    let report = satisfaction_probability(set, &preds, rep, class)?;
    let mut rates = report.rates.iter();
    let mut probability = vec![vec![None; n]; n];
    let mut kind = vec![vec![CellKind::Diagonal; n]; n];
    for y in 0..n {
        for x in 0..n {
            if x == y {
                continue;
            }
            probability[y][x] = rates.next().map(PredicateRate::probability);
            kind[y][x] = match (
                relevant.contains(&concepts[y]),
                relevant.contains(&concepts[x]),
            ) {
                (true, false) => CellKind::Elicited,
                (false, false) => CellKind::Nonsensical,
                _ => CellKind::Other,
            };
        }
    }
    Ok(HeatMap {
        class: class.name.clone(),
        rows: concepts.to_vec(),
        cols: concepts.to_vec(),
        probability,
        kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::directions::ConceptDirection;
    use crate::embedding::Attributes;

    fn name(s: &str) -> ConceptName {
        ConceptName::new(s).unwrap()
    }

    fn class(i: usize) -> ClassLabel {
        ClassLabel {
            name: format!("c{i}"),
            index: i,
        }
    }

    fn annotated(present: Vec<Vec<bool>>, gt: Vec<usize>, concepts: &[&str]) -> EmbeddingSet<f64> {
        let rows = vec![vec![1.0, 0.0]; gt.len()];
        EmbeddingSet::from_rows(rows)
            .unwrap()
            .with_ground_truth(gt)
            .unwrap()
            .with_attributes(Attributes {
                concepts: concepts.iter().map(|c| name(c)).collect(),
                present,
            })
            .unwrap()
    }

    #[test]
    fn relevance_is_strict() {
        // 10 rows of class 0: a present 8 times, b 7 times, c never
        let present = (0..10).map(|i| vec![i < 8, i < 7, false]).collect();
        let set = annotated(present, vec![0; 10], &["a", "b", "c"]);
        let rel = relevant_concepts(&set, &class(0), RELEVANCE_THRESHOLD).unwrap();
        assert_eq!(rel, [name("a")].into_iter().collect());
        assert_eq!(
            relevant_concepts(&set, &class(1), 0.7),
            Err(Error::NoRowsForClass("c1".into()))
        );
    }

    #[test]
    fn elicitation_is_the_cross_product() {
        let all: Vec<ConceptName> = (0..18).map(|i| name(&format!("k{i}"))).collect();
        let rel: BTreeSet<_> = all[..6].iter().cloned().collect();
        let preds = elicit_predicates(&rel, &all, &class(0));
        assert_eq!(preds.len(), 72);
        assert_eq!(preds[0].stronger, all[0]);
        assert_eq!(preds[0].weaker, all[6]);
        let everything: BTreeSet<_> = all.iter().cloned().collect();
        assert!(elicit_predicates(&everything, &all, &class(0)).is_empty());
    }

    fn rep2d() -> RepMap<f64> {
        RepMap::vlm(vec![
            ConceptDirection::new("a", vec![1.0, 0.0]).unwrap(),
            ConceptDirection::new("b", vec![0.0, 1.0]).unwrap(),
            ConceptDirection::new("a2", vec![2.0, 0.0]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn three_of_four_rows() {
        // cos to a vs b: (1,0.2) yes, (1,0.5) yes, (0.3,1) no, (2,1) yes
        let set = EmbeddingSet::from_rows(vec![
            vec![1.0, 0.2],
            vec![1.0, 0.5],
            vec![0.3, 1.0],
            vec![2.0, 1.0],
            vec![-5.0, 0.0],
        ])
        .unwrap()
        .with_ground_truth(vec![0, 0, 0, 0, 1])
        .unwrap();
        let p = StrengthPredicate::new(name("a"), name("b"), class(0)).unwrap();
        let r =
            satisfaction_probability(&set, std::slice::from_ref(&p), &rep2d(), &class(0)).unwrap();
        assert_eq!(r.rates[0].satisfied, 3);
        assert_eq!(r.rates[0].total, 4);
        assert_eq!(r.rates[0].probability(), 0.75);

        let same = StrengthPredicate::new(name("a"), name("a2"), class(0)).unwrap();
        let r = satisfaction_probability(&set, &[same], &rep2d(), &class(0)).unwrap();
        assert_eq!(r.rates[0].probability(), 0.0);
    }

    #[test]
    fn aligned_rows_satisfy_everywhere() {
        let set = EmbeddingSet::from_rows(vec![vec![1.0, 0.0], vec![3.0, 0.0]])
            .unwrap()
            .with_ground_truth(vec![0, 0])
            .unwrap();
        let p = StrengthPredicate::new(name("a"), name("b"), class(0)).unwrap();
        let r = satisfaction_probability(&set, &[p], &rep2d(), &class(0)).unwrap();
        assert_eq!(r.rates[0].probability(), 1.0);
    }

    #[test]
    fn significance_is_strict() {
        let p = |s: &str| StrengthPredicate::new(name(s), name("z"), class(0)).unwrap();
        let report = ValidationReport {
            rates: vec![
                PredicateRate {
                    predicate: p("x"),
                    satisfied: 96,
                    total: 100,
                },
                PredicateRate {
                    predicate: p("y"),
                    satisfied: 95,
                    total: 100,
                },
            ],
        };
        assert_eq!(
            filter_significant(&report, SIGNIFICANCE_LEVEL),
            vec![p("x")]
        );
    }

    #[test]
    fn predicate_spec_text() {
        let p = StrengthPredicate::new(name("wheels"), name("ears"), class(0)).unwrap();
        assert_eq!(p.to_spec().to_string(), "predict(c0) => gt(wheels, ears)");
        assert!(StrengthPredicate::new(name("a"), name("a"), class(0)).is_err());
    }

    #[test]
    fn heat_map_categories() {
        let set = EmbeddingSet::from_rows(vec![vec![1.0, 0.1]])
            .unwrap()
            .with_ground_truth(vec![0])
            .unwrap();
        let concepts = [name("a"), name("b"), name("a2")];
        let rel: BTreeSet<_> = [name("a")].into_iter().collect();
        let hm = heat_map(&set, &concepts, &rel, &rep2d(), &class(0)).unwrap();
        assert_eq!(hm.kind[0][1], CellKind::Elicited);
        assert_eq!(hm.kind[1][2], CellKind::Nonsensical);
        assert_eq!(hm.kind[1][0], CellKind::Other);
        assert_eq!(hm.probability[0][0], None);
        assert_eq!(hm.probability[0][1], Some(1.0));
        assert_eq!(hm.probability[1][0], Some(0.0));
    }
}
