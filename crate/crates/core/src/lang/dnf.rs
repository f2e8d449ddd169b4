use std::fmt;

use super::{ClassLabel, ConceptName, LangError, SpecExpr};

pub const DEFAULT_CLAUSE_CAP: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Atom {
    Gt(ConceptName, ConceptName),
    Predict(ClassLabel),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Literal {
    pub positive: bool,
    pub atom: Atom,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Literal {
            positive: true,
            atom,
        }
    }

    pub fn neg(atom: Atom) -> Self {
        Literal {
            positive: false,
            atom,
        }
    }

    pub fn to_expr(&self) -> SpecExpr {
        let atom = match &self.atom {
            Atom::Gt(a, b) => SpecExpr::Gt(a.clone(), b.clone()),
            Atom::Predict(c) => SpecExpr::Predict(c.clone()),
        };
        if self.positive {
            atom
        } else {
            SpecExpr::not(atom)
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_expr())
    }
}

/// A conjunction of literals.
pub type Clause = Vec<Literal>;

/// Disjuncts of the DNF of `!e`: the spec is violated at an input exactly
/// when some clause has all of its literals true there.
pub fn to_lp_queries(e: &SpecExpr) -> Result<Vec<Clause>, LangError> {
    to_lp_queries_capped(e, DEFAULT_CLAUSE_CAP)
}

pub fn to_lp_queries_capped(e: &SpecExpr, cap: usize) -> Result<Vec<Clause>, LangError> {
    dnf(e, false, cap)
}

// DNF of `e` when `keep`, otherwise of `!e`; negation is pushed inward.
fn dnf(e: &SpecExpr, keep: bool, cap: usize) -> Result<Vec<Clause>, LangError> {
    let lit = |atom: Atom| {
        Ok(vec![vec![Literal {
            positive: keep,
            atom,
        }]])
    };
    match e {
        SpecExpr::Gt(a, b) => lit(Atom::Gt(a.clone(), b.clone())),
        SpecExpr::Predict(c) => lit(Atom::Predict(c.clone())),
        SpecExpr::Not(x) => dnf(x, !keep, cap),
        SpecExpr::And(a, b) if !keep => union(dnf(a, keep, cap)?, dnf(b, keep, cap)?, cap),
        SpecExpr::Or(a, b) if keep => union(dnf(a, keep, cap)?, dnf(b, keep, cap)?, cap),
        SpecExpr::And(a, b) | SpecExpr::Or(a, b) => {
            product(dnf(a, keep, cap)?, dnf(b, keep, cap)?, cap)
        }
        // !(a => b) == a && !b ; (a => b) == !a || b
        SpecExpr::Implies(a, b) if !keep => product(dnf(a, true, cap)?, dnf(b, false, cap)?, cap),
        SpecExpr::Implies(a, b) => union(dnf(a, false, cap)?, dnf(b, true, cap)?, cap),
        SpecExpr::HasCon(..) => Err(LangError::NotDesugared("hasCon")),
    }
}

fn union(mut a: Vec<Clause>, b: Vec<Clause>, cap: usize) -> Result<Vec<Clause>, LangError> {
    for clause in b {
        if !a.contains(&clause) {
            a.push(clause);
        }
    }
    if a.len() > cap {
        return Err(LangError::ClauseExplosion { cap });
    }
    Ok(a)
}

fn product(a: Vec<Clause>, b: Vec<Clause>, cap: usize) -> Result<Vec<Clause>, LangError> {
    if a.len().saturating_mul(b.len()) > cap {
        return Err(LangError::ClauseExplosion { cap });
    }
    let mut out: Vec<Clause> = Vec::with_capacity(a.len() * b.len());
    for x in &a {
        for y in &b {
            let mut clause = x.clone();
            for l in y {
                if !clause.contains(l) {
                    clause.push(l.clone());
                }
            }
            if !out.contains(&clause) {
                out.push(clause);
            }
        }
    }
    Ok(out)
}
