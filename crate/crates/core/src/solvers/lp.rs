//! Dense two-phase primal simplex.
//!
//! Problems are brought into the standard form `min cᵀx, A x = b, x ≥ 0`:
//! finite lower bounds are shifted to zero and finite upper bounds become
//! extra rows with a slack. Phase one minimizes the sum of one artificial
//! variable per row. The artificial columns stay in the tableau afterwards
//! (barred from entering) so the final tableau still carries `B⁻¹`, which
//! yields the dual solution.
//!
//! Pricing is Dantzig's rule; after a run of degenerate pivots the solver
//! switches to Bland's rule until the objective moves again. Every few dozen
//! pivots, and before a termination is accepted, the basic solution and the
//! duals are recomputed from an LU factorization of the basis; if they have
//! drifted from the tableau, the tableau is rebuilt from the original data.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Primal feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-9;
/// Smallest admissible pivot magnitude.
const PIVOT_TOL: f64 = 1e-9;
/// Smallest entry used to pivot a zero-level artificial out of the basis.
const DRIVE_OUT_TOL: f64 = 1e-7;
/// Reduced-cost optimality tolerance.
const COST_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots before Bland's rule takes over.
const DEGENERATE_RUN: usize = 50;
/// Pivots between two drift checks.
const CHECK_EVERY: usize = 64;
/// Relative drift of the basic solution that triggers a rebuild.
const DRIFT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Iteration cap reached.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    /// Minimized objective.
    pub objective: Vec<f64>,
    pub a_eq: SparseMatrix,
    pub b_eq: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpProblem {
    /// `min cᵀx, A x = b, x ≥ 0`.
    pub fn nonneg(objective: Vec<f64>, a_eq: SparseMatrix, b_eq: Vec<f64>) -> Self {
        let n = a_eq.cols();
        LpProblem { objective, a_eq, b_eq, lower: vec![0.0; n], upper: vec![f64::INFINITY; n] }
    }

    pub fn with_upper(mut self, upper: Vec<f64>) -> Self {
        self.upper = upper;
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.a_eq.cols();
        if self.objective.len() != n || self.lower.len() != n || self.upper.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "LP with {n} columns but objective/bounds of length {}/{}/{}",
                self.objective.len(),
                self.lower.len(),
                self.upper.len()
            )));
        }
        if self.b_eq.len() != self.a_eq.rows() {
            return Err(Error::DimensionMismatch("LP right-hand side length".into()));
        }
        for j in 0..n {
            if !self.lower[j].is_finite() {
                return Err(Error::InvalidArgument(format!("lower bound of x{j} must be finite")));
            }
            if self.upper[j] < self.lower[j] {
                return Err(Error::InvalidArgument(format!("bounds of x{j} are inconsistent")));
            }
        }
        if self.objective.iter().chain(&self.b_eq).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("LP data must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point in the original variables (meaningful when optimal).
    pub x: Vec<f64>,
    pub objective: f64,
    /// `bᵀy` of the dual solution read off the final tableau, when optimal.
    pub dual_bound: Option<f64>,
    pub iterations: usize,
}

/// Standard-form tableau with artificial columns kept at the right.
pub(crate) struct Tableau {
    rows: usize,
    /// structural + upper-bound slack columns
    n_std: usize,
    width: usize,
    t: Vec<f64>,
    /// initial tableau, the basis of every rebuild
    orig: Vec<f64>,
    basis: Vec<usize>,
    /// original (sign-corrected) standard form right-hand side
    rhs0: Vec<f64>,
    /// number of original variables and their lower-bound shift
    n_orig: usize,
    shift: Vec<f64>,
    iter_cap: usize,
    pub(crate) iterations: usize,
}

pub(crate) enum Phase1 {
    Feasible(Tableau),
    Infeasible,
    Stalled,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.t[i * self.width + self.width - 1]
    }

    /// Phase one on the feasible region of `p` (objective ignored).
    pub(crate) fn feasible_region(p: &LpProblem) -> Result<Phase1> {
        p.validate()?;
        let n = p.a_eq.cols();
        let m_eq = p.a_eq.rows();
        let bounded: Vec<usize> = (0..n).filter(|&j| p.upper[j].is_finite()).collect();
        let rows = m_eq + bounded.len();
        let n_std = n + bounded.len();
        let width = n_std + rows + 1;
        let mut t = vec![0.0; rows * width];
        let mut rhs0 = vec![0.0; rows];

        for (i, j, v) in p.a_eq.triplets() {
            t[i * width + j] = v;
        }
        for (i, r) in rhs0.iter_mut().enumerate().take(m_eq) {
            let (cols, vals) = p.a_eq.row(i);
            let shifted: f64 = cols.iter().zip(vals).map(|(&j, &v)| v * p.lower[j]).sum();
            *r = p.b_eq[i] - shifted;
        }
        for (s, &j) in bounded.iter().enumerate() {
            let i = m_eq + s;
            t[i * width + j] = 1.0;
            t[i * width + n + s] = 1.0;
            rhs0[i] = p.upper[j] - p.lower[j];
        }
        for i in 0..rows {
            if rhs0[i] < 0.0 {
                rhs0[i] = -rhs0[i];
                for j in 0..n_std {
                    t[i * width + j] = -t[i * width + j];
                }
            }
            t[i * width + n_std + i] = 1.0;
            t[i * width + width - 1] = rhs0[i];
        }
        let mut tab = Tableau {
            rows,
            n_std,
            width,
            orig: t.clone(),
            t,
            basis: (n_std..n_std + rows).collect(),
            rhs0,
            n_orig: n,
            shift: p.lower.clone(),
            iter_cap: 50 * (rows + n_std).max(1),
            iterations: 0,
        };

        let mut cost = vec![0.0; n_std + rows];
        cost[n_std..].iter_mut().for_each(|c| *c = 1.0);
        match tab.run(&cost, true) {
            LpStatus::Stalled => return Ok(Phase1::Stalled),
            LpStatus::Unbounded => unreachable!("phase one is bounded below by zero"),
            _ => {}
        }
        let infeas: f64 = (0..rows).filter(|&i| tab.basis[i] >= n_std).map(|i| tab.rhs(i)).sum();
        let scale = 1.0 + tab.rhs0.iter().fold(0.0f64, |a, &b| a.max(b));
        if infeas > FEAS_TOL * scale {
            return Ok(Phase1::Infeasible);
        }
        // drive zero-level artificials out of the basis where possible
        for i in 0..rows {
            if tab.basis[i] >= n_std {
                let best = (0..n_std).map(|j| (j, tab.at(i, j).abs())).max_by(|a, b| a.1.total_cmp(&b.1));
                if let Some((j, a)) = best {
                    if a > DRIVE_OUT_TOL {
                        tab.pivot(i, j);
                    }
                }
            }
        }
        tab.reinvert();
        Ok(Phase1::Feasible(tab))
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let cols = self.n_std + self.rows;
        let mut rc = cost[..cols].to_vec();
        for i in 0..self.rows {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.width..i * self.width + cols];
                rc.iter_mut().zip(row).for_each(|(r, a)| *r -= cb * a);
            }
        }
        rc
    }

    fn pivot(&mut self, r: usize, s: usize) {
        let w = self.width;
        let p = self.t[r * w + s];
        for j in 0..w {
            self.t[r * w + j] /= p;
        }
        let pivot_row: Vec<f64> = self.t[r * w..(r + 1) * w].to_vec();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.t[i * w + s];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * w..(i + 1) * w];
            for (x, &pr) in row.iter_mut().zip(&pivot_row) {
                *x -= f * pr;
            }
            row[s] = 0.0;
            if row[w - 1] < 0.0 && row[w - 1] > -FEAS_TOL {
                row[w - 1] = 0.0;
            }
        }
        self.basis[r] = s;
    }

    /// Recomputes the tableau as `B⁻¹ [A | I | b]` from the initial data.
    /// Leaves it untouched if the basis matrix is numerically singular.
    fn reinvert(&mut self) -> bool {
        let (m, w) = (self.rows, self.width);
        let basis_matrix = DMatrix::from_fn(m, m, |i, k| self.orig[i * w + self.basis[k]]);
        let full = DMatrix::from_row_slice(m, w, &self.orig);
        let Some(fresh) = basis_matrix.lu().solve(&full) else {
            log::debug!("basis matrix singular, keeping the updated tableau");
            return false;
        };
        for i in 0..m {
            for j in 0..w {
                self.t[i * w + j] = fresh[(i, j)];
            }
        }
        for (i, &b) in self.basis.iter().enumerate() {
            for k in 0..m {
                self.t[k * w + b] = if k == i { 1.0 } else { 0.0 };
            }
        }
        true
    }

    /// Recomputes `x_B` and the reduced costs from the original data. Returns
    /// the fresh reduced costs if `x_B` agrees with the tableau, `None` if
    /// the tableau has drifted. The right-hand side column is updated by
    /// the same pivots as the rest, so its error stands in for the whole.
    fn check_drift(&self, cost: &[f64]) -> Option<Vec<f64>> {
        let (m, w) = (self.rows, self.width);
        let cols = self.n_std + self.rows;
        let basis_matrix = DMatrix::from_fn(m, m, |i, k| self.orig[i * w + self.basis[k]]);
        let rhs = nalgebra::DVector::from_fn(m, |i, _| self.orig[i * w + w - 1]);
        let x_b = basis_matrix.clone().lu().solve(&rhs)?;
        let c_b = nalgebra::DVector::from_fn(m, |k, _| cost[self.basis[k]]);
        let y = basis_matrix.transpose().lu().solve(&c_b)?;
        let scale = 1.0 + x_b.amax();
        if (0..m).any(|i| (x_b[i] - self.rhs(i)).abs() > DRIFT_TOL * scale) {
            return None;
        }
        let mut rc = cost[..cols].to_vec();
        for i in 0..m {
            if y[i] != 0.0 {
                let row = &self.orig[i * w..i * w + cols];
                rc.iter_mut().zip(row).for_each(|(r, a)| *r -= y[i] * a);
            }
        }
        for &b in &self.basis {
            rc[b] = 0.0;
        }
        Some(rc)
    }

    /// Drift check, falling back to a full rebuild; returns fresh reduced costs.
    fn refresh(&mut self, cost: &[f64]) -> Vec<f64> {
        if let Some(rc) = self.check_drift(cost) {
            return rc;
        }
        log::debug!("tableau drifted after {} pivots, rebuilding", self.iterations);
        self.reinvert();
        self.reduced_costs(cost)
    }

    /// Leaving row for entering column `s`: minimum ratio, ties broken by the
    /// largest pivot (or by the smallest basic index under Bland's rule).
    fn ratio_test(&self, s: usize, bland: bool) -> Option<(usize, f64)> {
        let theta = (0..self.rows)
            .filter(|&i| self.at(i, s) > PIVOT_TOL)
            .map(|i| self.rhs(i).max(0.0) / self.at(i, s))
            .fold(f64::INFINITY, f64::min);
        if !theta.is_finite() {
            return None;
        }
        let slack = theta * 1e-9 + 1e-12;
        let mut best: Option<usize> = None;
        for i in 0..self.rows {
            let a = self.at(i, s);
            if a <= PIVOT_TOL || self.rhs(i).max(0.0) / a > theta + slack {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(b) if bland && self.basis[i] < self.basis[b] => Some(i),
                Some(b) if !bland && a > self.at(b, s) => Some(i),
                keep => keep,
            };
        }
        best.map(|r| (r, theta))
    }

    /// Minimizes `cost` (indexed over standard + artificial columns) from the
    /// current basis. Artificials may only enter during phase one.
    fn run(&mut self, cost: &[f64], phase_one: bool) -> LpStatus {
        let enter_limit = if phase_one { self.n_std + self.rows } else { self.n_std };
        let mut rc = self.reduced_costs(cost);
        let mut degenerate_run = 0usize;
        let mut since_rebuild = 0usize;
        let mut is_basic = vec![false; self.n_std + self.rows];
        for &b in &self.basis {
            is_basic[b] = true;
        }
        loop {
            if self.iterations >= self.iter_cap {
                return LpStatus::Stalled;
            }
            let bland = degenerate_run >= DEGENERATE_RUN;
            let mut enter = None;
            let mut best = -COST_TOL;
            for j in 0..enter_limit {
                if is_basic[j] || rc[j] >= -COST_TOL {
                    continue;
                }
                if bland {
                    enter = Some(j);
                    break;
                }
                if rc[j] < best {
                    best = rc[j];
                    enter = Some(j);
                }
            }
            let leave = enter.map(|s| (s, self.ratio_test(s, bland)));
            let (s, (r, ratio)) = match leave {
                Some((s, Some(rr))) => (s, rr),
                // terminate only after a drift check
                _ if since_rebuild > 0 => {
                    rc = self.refresh(cost);
                    since_rebuild = 0;
                    continue;
                }
                None => return LpStatus::Optimal,
                Some((_, None)) => return LpStatus::Unbounded,
            };
            if ratio <= FEAS_TOL {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            is_basic[self.basis[r]] = false;
            is_basic[s] = true;
            self.pivot(r, s);
            self.iterations += 1;
            since_rebuild += 1;
            if since_rebuild >= CHECK_EVERY {
                rc = self.refresh(cost);
                since_rebuild = 0;
                continue;
            }
            // update reduced costs from the new pivot row
            let f = rc[s];
            let w = self.width;
            let cols = self.n_std + self.rows;
            let row = &self.t[r * w..r * w + cols];
            rc.iter_mut().zip(row).for_each(|(x, a)| *x -= f * a);
            rc[s] = 0.0;
        }
    }

    /// Phase two: minimizes `objective` over the original variables.
    pub(crate) fn minimize(&mut self, objective: &[f64]) -> LpSolution {
        let mut cost = vec![0.0; self.n_std + self.rows];
        cost[..self.n_orig].copy_from_slice(objective);
        let start = self.iterations;
        let status = self.run(&cost, false);
        let x = self.primal();
        let objective_value = x.iter().zip(objective).map(|(a, b)| a * b).sum();
        let dual_bound = (status == LpStatus::Optimal).then(|| {
            let rc = self.reduced_costs(&cost);
            // y_i = −(reduced cost of artificial i), undoing the row sign flip
            let shift_const: f64 = self.shift.iter().zip(objective).map(|(l, c)| l * c).sum();
            (0..self.rows).map(|i| -rc[self.n_std + i] * self.rhs0[i]).sum::<f64>() + shift_const
        });
        LpSolution { status, x, objective: objective_value, dual_bound, iterations: self.iterations - start }
    }

    /// Current basic solution in the original variables.
    pub(crate) fn primal(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.n_std];
        for i in 0..self.rows {
            let b = self.basis[i];
            if b < self.n_std {
                z[b] = self.rhs(i).max(0.0);
            }
        }
        (0..self.n_orig).map(|j| z[j] + self.shift[j]).collect()
    }
}

/// Solves `min cᵀx, A x = b, lower ≤ x ≤ upper`.
pub fn lp_solve(p: &LpProblem) -> Result<LpSolution> {
    let n = p.a_eq.cols();
    match Tableau::feasible_region(p)? {
        Phase1::Feasible(mut tab) => {
            let phase_one = tab.iterations;
            let mut sol = tab.minimize(&p.objective);
            sol.iterations += phase_one;
            Ok(sol)
        }
        Phase1::Infeasible => Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: vec![f64::NAN; n],
            objective: f64::NAN,
            dual_bound: None,
            iterations: 0,
        }),
        Phase1::Stalled => Ok(LpSolution {
            status: LpStatus::Stalled,
            x: vec![f64::NAN; n],
            objective: f64::NAN,
            dual_bound: None,
            iterations: 0,
        }),
    }
}
