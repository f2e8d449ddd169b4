use super::{ConceptName, LangError, SpecExpr, TaskVocabulary};

/// Rewrites `HasCon` and `Implies` into the core forms.
///
/// `hasCon(con | S)` becomes the conjunction of `gt(con, s)` over `S` in
/// order; without an explicit `S` every other vocabulary concept is used.
/// `a => b` becomes `!a || b`.
pub fn desugar(e: &SpecExpr, vocab: &TaskVocabulary) -> Result<SpecExpr, LangError> {
    Ok(match e {
        SpecExpr::Gt(..) | SpecExpr::Predict(_) => e.clone(),
        SpecExpr::Not(x) => SpecExpr::not(desugar(x, vocab)?),
        SpecExpr::And(a, b) => SpecExpr::and(desugar(a, vocab)?, desugar(b, vocab)?),
        SpecExpr::Or(a, b) => SpecExpr::or(desugar(a, vocab)?, desugar(b, vocab)?),
        SpecExpr::Implies(a, b) => {
            SpecExpr::or(SpecExpr::not(desugar(a, vocab)?), desugar(b, vocab)?)
        }
        SpecExpr::HasCon(con, contrast) => {
            let set: Vec<ConceptName> = match contrast {
                Some(s) => s.clone(),
                None => vocab
                    .concepts()
                    .iter()
                    .filter(|c| *c != con)
                    .cloned()
                    .collect(),
            };
            let mut atoms = set
                .into_iter()
                .map(|other| SpecExpr::Gt(con.clone(), other));
            let first = atoms
                .next()
                .ok_or_else(|| LangError::EmptyContrastSet(con.to_string()))?;
            atoms.fold(first, SpecExpr::and)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: &str) -> ConceptName {
        ConceptName::new(s).unwrap()
    }

    fn vocab() -> TaskVocabulary {
        TaskVocabulary::new(["metallic", "ears", "wheels"], ["truck", "cat"]).unwrap()
    }

    #[test]
    fn has_con_defaults_to_all_other_concepts() {
        let e = desugar(&SpecExpr::HasCon(c("metallic"), None), &vocab()).unwrap();
        assert_eq!(
            e,
            SpecExpr::and(
                SpecExpr::Gt(c("metallic"), c("ears")),
                SpecExpr::Gt(c("metallic"), c("wheels"))
            )
        );
    }

    #[test]
    fn singleton_contrast_is_one_atom() {
        let e = desugar(
            &SpecExpr::HasCon(c("metallic"), Some(vec![c("ears")])),
            &vocab(),
        )
        .unwrap();
        assert_eq!(e, SpecExpr::Gt(c("metallic"), c("ears")));
    }

    #[test]
    fn implication_is_material() {
        let p = SpecExpr::Gt(c("ears"), c("wheels"));
        let q = SpecExpr::Gt(c("wheels"), c("ears"));
        let e = desugar(&SpecExpr::implies(p.clone(), q.clone()), &vocab()).unwrap();
        assert_eq!(e, SpecExpr::or(SpecExpr::not(p), q));
        assert!(e.is_core());
    }

    #[test]
    fn empty_contrast_set_is_an_error() {
        let lonely = TaskVocabulary::new(["metallic"], ["truck"]).unwrap();
        assert_eq!(
            desugar(&SpecExpr::HasCon(c("metallic"), None), &lonely).unwrap_err(),
            LangError::EmptyContrastSet("metallic".into())
        );
        assert_eq!(
            desugar(&SpecExpr::HasCon(c("metallic"), Some(vec![])), &vocab()).unwrap_err(),
            LangError::EmptyContrastSet("metallic".into())
        );
    }
}
