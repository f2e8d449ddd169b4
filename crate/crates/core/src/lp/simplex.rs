//! Dense-tableau primal simplex for bounded variables.
//!
//! Each constraint `a · x >= rhs` becomes `a · x - s = rhs` with a bounded
//! surplus `s`. Rows that the all-lower-bounds start does not satisfy get an
//! artificial variable; phase 1 drives those to zero. Entering and leaving
//! variables follow Bland's rule so degenerate problems cannot cycle.

use super::{LinearProgram, LpSolution, LpSolver, LpStatus};
use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, Default)]
pub struct BoundedSimplex {
    /// Pivot budget; `None` picks one from the problem size.
    pub max_iterations: Option<usize>,
}

impl<T: Scalar> LpSolver<T> for BoundedSimplex {
    fn solve_max(&self, lp: &LinearProgram<T>) -> Result<LpSolution<T>> {
        lp.validate()?;
        let infeasible = LpSolution {
            status: LpStatus::Infeasible,
            value: T::nan(),
            point: Vec::new(),
            iterations: 0,
        };
        let tol = T::pivot_tolerance();
        let scale = lp
            .constraints
            .iter()
            .map(|c| c.rhs.abs())
            .chain(lp.lower.iter().chain(&lp.upper).map(|x| x.abs()))
            .fold(T::one(), T::max);
        let feas_tol = tol * T::lit(100.0) * scale;

        // widest surplus each row can need over the box
        let mut surplus_max = Vec::with_capacity(lp.constraints.len());
        for c in &lp.constraints {
            let best: T = c
                .coeffs
                .iter()
                .zip(lp.lower.iter().zip(&lp.upper))
                .map(|(&a, (&l, &u))| (a * l).max(a * u))
                .sum();
            let s = best - c.rhs;
            if s < -feas_tol {
                return Ok(infeasible);
            }
            surplus_max.push(s.max(T::zero()));
        }

        let mut t = Tableau::new(lp, &surplus_max);
        let budget = self.max_iterations.unwrap_or(10_000 + 50 * (t.m + t.cols));

        if t.has_artificials() {
            let cost: Vec<T> = (0..t.total)
                .map(|v| {
                    if t.is_artificial(v) {
                        -T::one()
                    } else {
                        T::zero()
                    }
                })
                .collect();
            t.set_cost(&cost);
            t.run(budget)?;
            let residual: T = (0..t.m)
                .filter(|&r| t.is_artificial(t.basis[r]))
                .map(|r| t.beta[r])
                .sum();
            if residual > feas_tol {
                return Ok(LpSolution {
                    iterations: t.iterations,
                    ..infeasible
                });
            }
            t.retire_artificials();
        }

        let mut cost = vec![T::zero(); t.total];
        cost[..t.n].copy_from_slice(&lp.objective);
        t.set_cost(&cost);
        t.run(budget)?;

        let point: Vec<T> = (0..t.n)
            .map(|j| t.value(j).max(lp.lower[j]).min(lp.upper[j]))
            .collect();
        Ok(LpSolution {
            status: LpStatus::Optimal,
            value: dot(&lp.objective, &point),
            point,
            iterations: t.iterations,
        })
    }
}

/// Variables are numbered structural `0..n`, surplus `n..n+m`, artificial
/// `n+m..n+2m`. Only structural and surplus variables have tableau columns:
/// an artificial that leaves the basis never returns.
struct Tableau<T> {
    n: usize,
    m: usize,
    cols: usize,
    total: usize,
    tab: Vec<T>,
    beta: Vec<T>,
    basis: Vec<usize>,
    basic_row: Vec<Option<usize>>,
    at_upper: Vec<bool>,
    lb: Vec<T>,
    ub: Vec<T>,
    cost: Vec<T>,
    reduced: Vec<T>,
    iterations: usize,
}

impl<T: Scalar> Tableau<T> {
    fn new(lp: &LinearProgram<T>, surplus_max: &[T]) -> Self {
        let n = lp.num_vars();
        let m = lp.constraints.len();
        let cols = n + m;
        let total = n + 2 * m;
        let mut lb = lp.lower.clone();
        let mut ub = lp.upper.clone();
        lb.extend(std::iter::repeat_n(T::zero(), m));
        ub.extend_from_slice(surplus_max);
        lb.extend(std::iter::repeat_n(T::zero(), m));
        ub.extend(std::iter::repeat_n(T::zero(), m));

        let mut tab = vec![T::zero(); m * cols];
        let mut beta = vec![T::zero(); m];
        let mut basis = vec![0; m];
        let mut basic_row = vec![None; total];
        for (i, c) in lp.constraints.iter().enumerate() {
            // residual of a · l - s = rhs with s = 0
            let resid = c.rhs - dot(&c.coeffs, &lp.lower);
            let row = &mut tab[i * cols..(i + 1) * cols];
            if resid <= T::zero() {
                // surplus is basic: s = a · x - rhs
                for (dst, &a) in row.iter_mut().zip(&c.coeffs) {
                    *dst = -a;
                }
                row[n + i] = T::one();
                basis[i] = n + i;
                beta[i] = -resid;
            } else {
                // artificial is basic: art = rhs - a · x + s
                row[..n].copy_from_slice(&c.coeffs);
                row[n + i] = -T::one();
                basis[i] = n + m + i;
                beta[i] = resid;
                ub[n + m + i] = resid;
            }
            basic_row[basis[i]] = Some(i);
        }
        Tableau {
            n,
            m,
            cols,
            total,
            tab,
            beta,
            basis,
            basic_row,
            at_upper: vec![false; total],
            lb,
            ub,
            cost: vec![T::zero(); total],
            reduced: vec![T::zero(); cols],
            iterations: 0,
        }
    }

    fn is_artificial(&self, v: usize) -> bool {
        v >= self.cols
    }

    fn has_artificials(&self) -> bool {
        self.basis.iter().any(|&v| self.is_artificial(v))
    }

    fn at(&self, r: usize, j: usize) -> T {
        self.tab[r * self.cols + j]
    }

    fn value(&self, v: usize) -> T {
        match self.basic_row[v] {
            Some(r) => self.beta[r],
            None if self.at_upper[v] => self.ub[v],
            None => self.lb[v],
        }
    }

    fn set_cost(&mut self, cost: &[T]) {
        self.cost = cost.to_vec();
        for j in 0..self.cols {
            let mut d = cost[j];
            for r in 0..self.m {
                d = d - cost[self.basis[r]] * self.at(r, j);
            }
            self.reduced[j] = d;
        }
    }

    /// Smallest-index nonbasic column whose move improves the objective.
    fn entering(&self) -> Option<usize> {
        let tol = T::pivot_tolerance();
        (0..self.cols).find(|&j| {
            self.basic_row[j].is_none()
                && self.ub[j] > self.lb[j]
                && ((!self.at_upper[j] && self.reduced[j] > tol)
                    || (self.at_upper[j] && self.reduced[j] < -tol))
        })
    }

    fn run(&mut self, budget: usize) -> Result<()> {
        let tol = T::pivot_tolerance();
        while let Some(j) = self.entering() {
            if self.iterations >= budget {
                return Err(Error::NumericalBreakdown(format!(
                    "no optimum after {budget} pivots"
                )));
            }
            self.iterations += 1;
            let dir = if self.at_upper[j] {
                -T::one()
            } else {
                T::one()
            };

            // ratio test; a bound flip wins ties, then the lowest basic index
            let mut step = self.ub[j] - self.lb[j];
            let mut leave: Option<usize> = None;
            for r in 0..self.m {
                let alpha = self.at(r, j);
                if alpha.abs() <= tol {
                    continue;
                }
                let delta = -alpha * dir;
                let v = self.basis[r];
                let room = if delta < T::zero() {
                    (self.beta[r] - self.lb[v]) / -delta
                } else {
                    (self.ub[v] - self.beta[r]) / delta
                };
                let room = room.max(T::zero());
                let better = match leave {
                    _ if room < step - tol => true,
                    Some(l) => (room - step).abs() <= tol && v < self.basis[l],
                    None => false,
                };
                if better {
                    step = room;
                    leave = Some(r);
                }
            }

            for r in 0..self.m {
                let alpha = self.at(r, j);
                self.beta[r] = self.beta[r] - alpha * dir * step;
            }
            match leave {
                None => self.at_upper[j] = !self.at_upper[j],
                Some(r) => {
                    let entering_value = self.value(j) + dir * step;
                    let v = self.basis[r];
                    self.at_upper[v] = -self.at(r, j) * dir > T::zero();
                    self.pivot(r, j);
                    self.beta[r] = entering_value;
                }
            }
            if self.beta.iter().any(|b| !b.is_finite()) {
                return Err(Error::NumericalBreakdown(
                    "basic values became non-finite".into(),
                ));
            }
        }
        Ok(())
    }

    /// Makes column `j` basic in row `r`. Values in `beta` are left alone.
    fn pivot(&mut self, r: usize, j: usize) {
        let cols = self.cols;
        let alpha = self.at(r, j);
        let row_start = r * cols;
        for k in 0..cols {
            self.tab[row_start + k] = self.tab[row_start + k] / alpha;
        }
        let pivot_row: Vec<T> = self.tab[row_start..row_start + cols].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.tab[i * cols + j];
            if f == T::zero() {
                continue;
            }
            for (dst, &p) in self.tab[i * cols..(i + 1) * cols]
                .iter_mut()
                .zip(&pivot_row)
            {
                *dst = *dst - f * p;
            }
            self.tab[i * cols + j] = T::zero();
        }
        let f = self.reduced[j];
        for (dst, &p) in self.reduced.iter_mut().zip(&pivot_row) {
            *dst = *dst - f * p;
        }
        self.reduced[j] = T::zero();

        let old = self.basis[r];
        self.basic_row[old] = None;
        self.basis[r] = j;
        self.basic_row[j] = Some(r);
    }

    /// Fixes every artificial at zero and swaps the basic ones out where a
    /// real column can take their place.
    fn retire_artificials(&mut self) {
        let tol = T::pivot_tolerance();
        for v in self.cols..self.total {
            self.ub[v] = T::zero();
            self.at_upper[v] = false;
        }
        for r in 0..self.m {
            if !self.is_artificial(self.basis[r]) {
                continue;
            }
            let Some(j) =
                (0..self.cols).find(|&j| self.basic_row[j].is_none() && self.at(r, j).abs() > tol)
            else {
                // redundant row
                continue;
            };
            // zeroing the artificial moves column j by beta_r / alpha
            let shift = self.beta[r] / self.at(r, j);
            let entering_value = self.value(j) + shift;
            for i in 0..self.m {
                if i != r {
                    self.beta[i] = self.beta[i] - self.at(i, j) * shift;
                }
            }
            self.pivot(r, j);
            self.beta[r] = entering_value;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{solve_lp_max, Constraint};

    fn lp(bounds: &[(f64, f64)], objective: &[f64], rows: &[(&[f64], f64)]) -> LinearProgram<f64> {
        let mut p = LinearProgram::new(
            bounds.iter().map(|b| b.0).collect(),
            bounds.iter().map(|b| b.1).collect(),
            objective.to_vec(),
        )
        .unwrap();
        for (a, rhs) in rows {
            p.push(Constraint::new(a.to_vec(), *rhs)).unwrap();
        }
        p
    }

    #[test]
    fn single_slack() {
        // max e s.t. 0 <= x <= 1, x >= e, e in [-5, 5]
        let p = lp(
            &[(0.0, 1.0), (-5.0, 5.0)],
            &[0.0, 1.0],
            &[(&[1.0, -1.0], 0.0)],
        );
        let s = solve_lp_max(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 1.0).abs() < 1e-12);
        assert!((s.point[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_rows() {
        // x >= 1 and -x >= 0 inside a box wide enough for either alone
        let p = lp(&[(-5.0, 5.0)], &[1.0], &[(&[1.0], 1.0), (&[-1.0], 0.0)]);
        assert_eq!(solve_lp_max(&p).unwrap().status, LpStatus::Infeasible);
        // a row no point of the box can meet
        let p = lp(&[(0.0, 1.0)], &[1.0], &[(&[1.0], 2.0)]);
        assert_eq!(solve_lp_max(&p).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn one_dimensional_toys() {
        // max e: 0.5 <= w <= 1, 2w >= 0, -w >= e + w
        let p = lp(
            &[(0.5, 1.0), (-10.0, 10.0)],
            &[0.0, 1.0],
            &[(&[2.0, 0.0], 0.0), (&[-2.0, -1.0], 0.0)],
        );
        let s = solve_lp_max(&p).unwrap();
        assert!((s.value + 1.0).abs() < 1e-12);
        assert!((s.point[0] - 0.5).abs() < 1e-12);
        // swapped directions: w >= e - w
        let p = lp(
            &[(0.5, 1.0), (-10.0, 10.0)],
            &[0.0, 1.0],
            &[(&[2.0, 0.0], 0.0), (&[2.0, -1.0], 0.0)],
        );
        let s = solve_lp_max(&p).unwrap();
        assert!((s.value - 2.0).abs() < 1e-12);
        assert!((s.point[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn textbook_problem() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6)
        let p = lp(
            &[(0.0, 100.0), (0.0, 100.0)],
            &[3.0, 5.0],
            &[
                (&[-1.0, 0.0], -4.0),
                (&[0.0, -2.0], -12.0),
                (&[-3.0, -2.0], -18.0),
            ],
        );
        let s = solve_lp_max(&p).unwrap();
        assert!((s.value - 36.0).abs() < 1e-9);
        assert!((s.point[0] - 2.0).abs() < 1e-9 && (s.point[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_via_two_rows_and_fixed_variables() {
        // x + y = 1 with x fixed at 0.25; maximize y
        let p = lp(
            &[(0.25, 0.25), (-3.0, 3.0)],
            &[0.0, 1.0],
            &[(&[1.0, 1.0], 1.0), (&[-1.0, -1.0], -1.0)],
        );
        let s = solve_lp_max(&p).unwrap();
        assert!((s.value - 0.75).abs() < 1e-12);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // many redundant copies of the same row through one vertex
        let rows: Vec<(Vec<f64>, f64)> = (1..=8)
            .map(|k| (vec![-(k as f64), -(k as f64), 1.0], 0.0))
            .collect();
        let refs: Vec<(&[f64], f64)> = rows.iter().map(|(a, b)| (a.as_slice(), *b)).collect();
        let p = lp(
            &[(0.0, 1.0), (0.0, 1.0), (-1.0, 1.0)],
            &[1.0, 1.0, 1.0],
            &refs,
        );
        let s = solve_lp_max(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        // z >= 8 (x + y) binds: x + y = 1/8, z = 1
        assert!((s.value - 1.125).abs() < 1e-9, "{s:?}");
    }

    #[test]
    fn rejects_unbounded_variables() {
        let p = lp(&[(0.0, f64::INFINITY)], &[1.0], &[]);
        assert_eq!(solve_lp_max(&p), Err(Error::UnboundedVariable(0)));
    }

    #[test]
    fn f32_solves_too() {
        let mut p =
            LinearProgram::<f32>::new(vec![0.0, -5.0], vec![1.0, 5.0], vec![0.0, 1.0]).unwrap();
        p.push(Constraint::new(vec![1.0, -1.0], 0.0)).unwrap();
        let s = solve_lp_max(&p).unwrap();
        assert!((s.value - 1.0).abs() < 1e-5);
    }
}
