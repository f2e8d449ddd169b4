//! Linear programs over boxes and a solver for them.

mod simplex;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

pub use simplex::BoundedSimplex;

/// `coeffs · x >= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T> {
    pub coeffs: Vec<T>,
    pub rhs: T,
}

impl<T: Scalar> Constraint<T> {
    pub fn new(coeffs: Vec<T>, rhs: T) -> Self {
        Constraint { coeffs, rhs }
    }

    /// `coeffs · x - rhs`; non-negative when satisfied.
    pub fn slack(&self, x: &[T]) -> T {
        dot(&self.coeffs, x) - self.rhs
    }
}

/// Maximize `objective · x` subject to `lower <= x <= upper` and every
/// constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub constraints: Vec<Constraint<T>>,
    pub objective: Vec<T>,
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>, objective: Vec<T>) -> Result<Self> {
        let n = lower.len();
        for len in [upper.len(), objective.len()] {
            if len != n {
                return Err(Error::DimMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        Ok(LinearProgram {
            lower,
            upper,
            constraints: Vec::new(),
            objective,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.lower.len()
    }

    pub fn push(&mut self, c: Constraint<T>) -> Result<()> {
        if c.coeffs.len() != self.num_vars() {
            return Err(Error::DimMismatch {
                expected: self.num_vars(),
                found: c.coeffs.len(),
            });
        }
        self.constraints.push(c);
        Ok(())
    }

    /// Checks finiteness and bound order.
    pub fn validate(&self) -> Result<()> {
        for (j, (&l, &u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !l.is_finite() || !u.is_finite() {
                return Err(Error::UnboundedVariable(j));
            }
            if l > u {
                return Err(Error::Invalid(format!(
                    "variable {j} has lower bound above upper bound"
                )));
            }
        }
        let finite = |v: &[T]| v.iter().all(|x| x.is_finite());
        if !finite(&self.objective)
            || !self
                .constraints
                .iter()
                .all(|c| finite(&c.coeffs) && c.rhs.is_finite())
        {
            return Err(Error::NonFinite("linear program".into()));
        }
        Ok(())
    }

    /// Largest constraint violation of `x`, zero when feasible; bound
    /// violations count too.
    pub fn violation(&self, x: &[T]) -> T {
        let bounds = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&l, &u))| (l - v).max(v - u).max(T::zero()));
        let rows = self
            .constraints
            .iter()
            .map(|c| (-c.slack(x)).max(T::zero()));
        bounds.chain(rows).fold(T::zero(), T::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    /// Optimal objective value; meaningless when infeasible.
    pub value: T,
    /// Optimal point; empty when infeasible.
    pub point: Vec<T>,
    pub iterations: usize,
}

/// Anything that can maximize a bounded linear program.
pub trait LpSolver<T: Scalar>: Sync {
    fn solve_max(&self, lp: &LinearProgram<T>) -> Result<LpSolution<T>>;
}

/// Maximizes `lp` with the built-in simplex.
pub fn solve_lp_max<T: Scalar>(lp: &LinearProgram<T>) -> Result<LpSolution<T>> {
    BoundedSimplex::default().solve_max(lp)
}
