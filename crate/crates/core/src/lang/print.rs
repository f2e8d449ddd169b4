use std::fmt;

use super::SpecExpr;

fn child(f: &mut fmt::Formatter<'_>, e: &SpecExpr) -> fmt::Result {
    match e {
        SpecExpr::And(..) | SpecExpr::Or(..) | SpecExpr::Implies(..) => write!(f, "({e})"),
        _ => write!(f, "{e}"),
    }
}

/// Prints in the concrete grammar accepted by `parse_spec`. Compound operands
/// of binary connectives are always parenthesized, so printing then parsing
/// gives back the same tree.
impl fmt::Display for SpecExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecExpr::Gt(a, b) => write!(f, "gt({a}, {b})"),
            SpecExpr::Predict(c) => write!(f, "predict({c})"),
            SpecExpr::HasCon(c, None) => write!(f, "hasCon({c})"),
            SpecExpr::HasCon(c, Some(rest)) => {
                write!(f, "hasCon({c} | ")?;
                for (i, x) in rest.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str(")")
            }
            SpecExpr::Not(e) => {
                f.write_str("!")?;
                child(f, e)
            }
            SpecExpr::And(a, b) => {
                child(f, a)?;
                f.write_str(" && ")?;
                child(f, b)
            }
            SpecExpr::Or(a, b) => {
                child(f, a)?;
                f.write_str(" || ")?;
                child(f, b)
            }
            SpecExpr::Implies(a, b) => {
                child(f, a)?;
                f.write_str(" => ")?;
                child(f, b)
            }
        }
    }
}
