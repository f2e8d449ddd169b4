use std::collections::HashMap;

use super::{ConceptName, LangError, SpecExpr};

/// True iff `class` is the unique maximum of `scores`.
///
/// A tie for the maximum makes the argmax set larger than `{class}`, so the
/// prediction does not hold.
pub fn predicts<T: PartialOrd + Copy>(scores: &[T], class: usize) -> bool {
    let Some(&mine) = scores.get(class) else {
        return false;
    };
    scores
        .iter()
        .enumerate()
        .all(|(k, &s)| k == class || mine > s)
}

/// Evaluates a desugared expression on one input.
///
/// `scores` is the classifier output and `rep` yields the strength of each
/// concept on the same input.
pub fn evaluate_with<T, F>(e: &SpecExpr, scores: &[T], rep: &F) -> Result<bool, LangError>
where
    T: PartialOrd + Copy,
    F: Fn(&ConceptName) -> Option<T>,
{
    let value = |c: &ConceptName| rep(c).ok_or_else(|| LangError::MissingRepValue(c.to_string()));
    Ok(match e {
        SpecExpr::Gt(a, b) => value(a)? > value(b)?,
        SpecExpr::Predict(c) => predicts(scores, c.index),
        SpecExpr::Not(x) => !evaluate_with(x, scores, rep)?,
        SpecExpr::And(a, b) => {
            // both sides are evaluated so missing values surface regardless of order
            let l = evaluate_with(a, scores, rep)?;
            let r = evaluate_with(b, scores, rep)?;
            l && r
        }
        SpecExpr::Or(a, b) => {
            let l = evaluate_with(a, scores, rep)?;
            let r = evaluate_with(b, scores, rep)?;
            l || r
        }
        SpecExpr::HasCon(..) => return Err(LangError::NotDesugared("hasCon")),
        SpecExpr::Implies(..) => return Err(LangError::NotDesugared("=>")),
    })
}

/// [`evaluate_with`] over an explicit table of representation values.
pub fn evaluate<T: PartialOrd + Copy>(
    e: &SpecExpr,
    scores: &[T],
    rep_values: &HashMap<ConceptName, T>,
) -> Result<bool, LangError> {
    evaluate_with(e, scores, &|c: &ConceptName| rep_values.get(c).copied())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::ClassLabel;

    fn c(s: &str) -> ConceptName {
        ConceptName::new(s).unwrap()
    }

    fn reps(pairs: &[(&str, f64)]) -> HashMap<ConceptName, f64> {
        pairs.iter().map(|(k, v)| (c(k), *v)).collect()
    }

    fn class(i: usize) -> ClassLabel {
        ClassLabel {
            name: format!("c{i}"),
            index: i,
        }
    }

    #[test]
    fn strict_strength_comparison() {
        let e = SpecExpr::Gt(c("a"), c("b"));
        assert!(evaluate(&e, &[1.0], &reps(&[("a", 0.9), ("b", 0.1)])).unwrap());
        assert!(!evaluate(&e, &[1.0], &reps(&[("a", 0.5), ("b", 0.5)])).unwrap());
    }

    #[test]
    fn tied_argmax_is_not_a_prediction() {
        let e = SpecExpr::Predict(class(0));
        assert!(!evaluate(&e, &[0.7, 0.7], &reps(&[])).unwrap());
        assert!(evaluate(&e, &[0.7, 0.6], &reps(&[])).unwrap());
        assert!(!evaluate(&SpecExpr::Predict(class(1)), &[0.7, 0.6], &reps(&[])).unwrap());
    }

    #[test]
    fn connectives() {
        let t = SpecExpr::Gt(c("a"), c("b"));
        let f = SpecExpr::Gt(c("b"), c("a"));
        let r = reps(&[("a", 1.0), ("b", 0.0)]);
        let ev = |e: &SpecExpr| evaluate(e, &[0.0], &r).unwrap();
        assert!(ev(&SpecExpr::not(f.clone())));
        assert!(!ev(&SpecExpr::and(t.clone(), f.clone())));
        assert!(ev(&SpecExpr::or(f.clone(), t.clone())));
    }

    #[test]
    fn missing_value_is_reported() {
        let e = SpecExpr::Gt(c("a"), c("zzz"));
        assert_eq!(
            evaluate(&e, &[0.0], &reps(&[("a", 1.0)])).unwrap_err(),
            LangError::MissingRepValue("zzz".into())
        );
    }

    #[test]
    fn sugar_is_refused() {
        let e = SpecExpr::HasCon(c("a"), None);
        assert!(matches!(
            evaluate(&e, &[0.0], &reps(&[("a", 1.0)])),
            Err(LangError::NotDesugared(_))
        ));
    }
}
