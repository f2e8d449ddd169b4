//! The concept specification language: names, syntax tree, parser,
//! desugaring, evaluation and DNF expansion of negated specifications.

mod desugar;
mod dnf;
mod eval;
mod parser;
mod print;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use desugar::desugar;
pub use dnf::{to_lp_queries, to_lp_queries_capped, Atom, Clause, Literal, DEFAULT_CLAUSE_CAP};
pub use eval::{evaluate, evaluate_with, predicts};
pub use parser::{parse_spec, parse_spec_file, SpecLine};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LangError {
    #[error("syntax error at offset {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown name `{0}`")]
    UnknownName(String),
    #[error("contrast set for `{0}` is empty")]
    EmptyContrastSet(String),
    #[error("no representation value for concept `{0}`")]
    MissingRepValue(String),
    #[error("classifier output has {found} entries, vocabulary has {expected} classes")]
    ScoreLength { expected: usize, found: usize },
    #[error("DNF exceeds the cap of {cap} clauses")]
    ClauseExplosion { cap: usize },
    #[error("expression still contains sugar ({0}); desugar it first")]
    NotDesugared(&'static str),
    #[error("invalid vocabulary: {0}")]
    Vocabulary(String),
}

/// A concept name such as `wheels` or `colored-eyes`. Case-sensitive.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptName(String);

impl ConceptName {
    pub fn new(name: impl Into<String>) -> Result<Self, LangError> {
        let name = name.into();
        if is_token(&name) {
            Ok(ConceptName(name))
        } else {
            Err(LangError::Vocabulary(format!(
                "`{name}` is not a valid name token"
            )))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ConceptName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A class name together with its index into the classifier output.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassLabel {
    pub name: String,
    pub index: usize,
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

pub(crate) fn is_token(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_alphanumeric() || c == '-' || c == '_')
}

/// Concepts and classes a specification may mention.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskVocabulary {
    concepts: Vec<ConceptName>,
    classes: Vec<ClassLabel>,
}

impl TaskVocabulary {
    pub fn new<C, K>(concepts: C, classes: K) -> Result<Self, LangError>
    where
        C: IntoIterator,
        C::Item: Into<String>,
        K: IntoIterator,
        K::Item: Into<String>,
    {
        let concepts = concepts
            .into_iter()
            .map(ConceptName::new)
            .collect::<Result<Vec<_>, _>>()?;
        let classes = classes
            .into_iter()
            .enumerate()
            .map(|(index, name)| {
                let name = name.into();
                if is_token(&name) {
                    Ok(ClassLabel { name, index })
                } else {
                    Err(LangError::Vocabulary(format!(
                        "`{name}` is not a valid class name"
                    )))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        if concepts.is_empty() || classes.is_empty() {
            return Err(LangError::Vocabulary(
                "concepts and classes must be non-empty".into(),
            ));
        }
        let mut seen = HashSet::new();
        for c in &concepts {
            if !seen.insert(c.as_str()) {
                return Err(LangError::Vocabulary(format!("duplicate concept `{c}`")));
            }
        }
        let mut seen = HashSet::new();
        for c in &classes {
            if !seen.insert(c.name.as_str()) {
                return Err(LangError::Vocabulary(format!("duplicate class `{c}`")));
            }
        }
        Ok(TaskVocabulary { concepts, classes })
    }

    pub fn concepts(&self) -> &[ConceptName] {
        &self.concepts
    }

    pub fn classes(&self) -> &[ClassLabel] {
        &self.classes
    }

    pub fn concept(&self, name: &str) -> Option<&ConceptName> {
        self.concepts.iter().find(|c| c.as_str() == name)
    }

    pub fn class(&self, name: &str) -> Option<&ClassLabel> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn concept_index(&self, name: &ConceptName) -> Option<usize> {
        self.concepts.iter().position(|c| c == name)
    }
}

/// Syntax tree of a specification. The input variable is implicit.
///
/// `HasCon` and `Implies` are sugar and disappear after [`desugar`].
/// A `HasCon` contrast set of `None` means "every other concept".
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SpecExpr {
    Gt(ConceptName, ConceptName),
    Predict(ClassLabel),
    Not(Box<SpecExpr>),
    And(Box<SpecExpr>, Box<SpecExpr>),
    Or(Box<SpecExpr>, Box<SpecExpr>),
    HasCon(ConceptName, Option<Vec<ConceptName>>),
    Implies(Box<SpecExpr>, Box<SpecExpr>),
}

impl SpecExpr {
    #[allow(clippy::should_implement_trait)]
    pub fn not(e: SpecExpr) -> Self {
        SpecExpr::Not(Box::new(e))
    }

    pub fn and(a: SpecExpr, b: SpecExpr) -> Self {
        SpecExpr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: SpecExpr, b: SpecExpr) -> Self {
        SpecExpr::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: SpecExpr, b: SpecExpr) -> Self {
        SpecExpr::Implies(Box::new(a), Box::new(b))
    }

    /// True when only the five core forms occur.
    pub fn is_core(&self) -> bool {
        match self {
            SpecExpr::Gt(..) | SpecExpr::Predict(_) => true,
            SpecExpr::Not(e) => e.is_core(),
            SpecExpr::And(a, b) | SpecExpr::Or(a, b) => a.is_core() && b.is_core(),
            SpecExpr::HasCon(..) | SpecExpr::Implies(..) => false,
        }
    }

    /// Concepts mentioned anywhere in the tree, in first-occurrence order.
    pub fn concepts(&self) -> Vec<ConceptName> {
        fn walk(e: &SpecExpr, out: &mut Vec<ConceptName>) {
            let mut push = |c: &ConceptName| {
                if !out.contains(c) {
                    out.push(c.clone());
                }
            };
            match e {
                SpecExpr::Gt(a, b) => {
                    push(a);
                    push(b);
                }
                SpecExpr::HasCon(c, contrast) => {
                    push(c);
                    for x in contrast.iter().flatten() {
                        push(x);
                    }
                }
                SpecExpr::Predict(_) => {}
                SpecExpr::Not(x) => walk(x, out),
                SpecExpr::And(a, b) | SpecExpr::Or(a, b) | SpecExpr::Implies(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }
}
