//! Uniqueness of a reference solution over `{A x = b, x ≥ 0}` and
//! `{A x = b, 0 ≤ x ≤ 1}`.
//!
//! Probing: for random objectives `f`, minimize and maximize `fᵀx` over the
//! feasible set. If every optimum equals the reference point the solution is
//! declared unique. A nonsingleton polytope has positive width in almost
//! every direction, so one probe already detects nonuniqueness with
//! probability one in exact arithmetic; the test stays one-sided under
//! rounding, which is why the verdict records how many probes ran.
//!
//! All LPs run on the reduced system. Its feasible set is the full feasible
//! set restricted to the supporting cells, so nothing is lost.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lp::{lp_solve, LpProblem, LpStatus, Phase1, Tableau, FEAS_TOL};
use super::rank::numeric_rank;
use crate::error::{Error, Result};
use crate::reduction::{reduce, ReducedSystem};
use crate::sparse::SparseMatrix;

/// Max-norm distance below which two solutions are considered equal.
pub const UNIQUENESS_TOL: f64 = 1e-6;

/// Residual tolerance (relative to `1 + max|b|`) for accepting `A x* = b`.
pub const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictStatus {
    Unique,
    Nonunique,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessVerdict {
    pub status: VerdictStatus,
    /// A second feasible point (full length), present for nonunique verdicts.
    pub witness: Option<Vec<f64>>,
    pub probes_used: usize,
    /// Decided by the overdetermined full-rank shortcut.
    pub fast_path: bool,
}

impl UniquenessVerdict {
    pub fn is_unique(&self) -> bool {
        self.status == VerdictStatus::Unique
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub probes: usize,
    pub seed: u64,
    /// Accept overdetermined reduced systems of full column rank without LPs.
    pub fast_path: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { probes: 5, seed: 0, fast_path: true }
    }
}

fn check_reference(a: &SparseMatrix, b: &[f64], x_star: &[f64]) -> Result<()> {
    if x_star.len() != a.cols() {
        return Err(Error::DimensionMismatch(format!(
            "reference solution of length {} for {} columns",
            x_star.len(),
            a.cols()
        )));
    }
    if let Some((index, &value)) = x_star.iter().enumerate().find(|(_, &v)| v < 0.0) {
        return Err(Error::NegativeEntry { index, value });
    }
    let ax = a.mul_vec(x_star)?;
    if ax.len() != b.len() {
        return Err(Error::DimensionMismatch("right-hand side length".into()));
    }
    let scale = 1.0 + b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if ax.iter().zip(b).any(|(p, q)| (p - q).abs() > RESIDUAL_TOL * scale) {
        return Err(Error::InvalidArgument("reference point does not solve A x = b".into()));
    }
    Ok(())
}

/// Overdetermined reduced system with full numeric column rank.
pub fn overdetermined_full_rank(r: &ReducedSystem) -> bool {
    r.n_red() > 0 && r.is_overdetermined() && numeric_rank(&r.a_red) == r.n_red()
}

/// Residual tolerance for accepting an LP optimum as a witness.
pub const WITNESS_TOL: f64 = 1e-7;

fn is_feasible(r: &ReducedSystem, x: &[f64], upper: Option<f64>) -> Result<bool> {
    let ax = r.a_red.mul_vec(x)?;
    let scale = 1.0 + r.b_red.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rows_ok = ax.iter().zip(&r.b_red).all(|(p, q)| (p - q).abs() <= WITNESS_TOL * scale);
    let bounds_ok = x.iter().all(|&v| v >= -WITNESS_TOL && upper.is_none_or(|u| v <= u + WITNESS_TOL));
    Ok(rows_ok && bounds_ok)
}

fn probe(
    r: &ReducedSystem,
    x_ref: &[f64],
    n_full: usize,
    upper: Option<f64>,
    opts: &VerifyOptions,
) -> Result<UniquenessVerdict> {
    let n = r.n_red();
    if n == 0 {
        return Ok(UniquenessVerdict {
            status: VerdictStatus::Unique,
            witness: None,
            probes_used: 0,
            fast_path: false,
        });
    }
    let mut problem = LpProblem::nonneg(vec![0.0; n], r.a_red.clone(), r.b_red.clone());
    if let Some(u) = upper {
        problem = problem.with_upper(vec![u; n]);
    }
    let mut tab = match Tableau::feasible_region(&problem)? {
        Phase1::Feasible(t) => t,
        Phase1::Infeasible => {
            // cannot happen for a valid reference point beyond rounding
            return Ok(UniquenessVerdict {
                status: VerdictStatus::Inconclusive,
                witness: None,
                probes_used: 0,
                fast_path: false,
            });
        }
        Phase1::Stalled => {
            return Ok(UniquenessVerdict {
                status: VerdictStatus::Inconclusive,
                witness: None,
                probes_used: 0,
                fast_path: false,
            })
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut inconclusive = false;
    for used in 1..=opts.probes.max(1) {
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let neg: Vec<f64> = f.iter().map(|v| -v).collect();
        for obj in [&f, &neg] {
            let sol = tab.minimize(obj);
            match sol.status {
                LpStatus::Optimal => {
                    let dist = sol.x.iter().zip(x_ref).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                    if dist > UNIQUENESS_TOL {
                        if !is_feasible(r, &sol.x, upper)? {
                            log::debug!("discarding probe optimum that violates the constraints");
                            inconclusive = true;
                            continue;
                        }
                        return Ok(UniquenessVerdict {
                            status: VerdictStatus::Nonunique,
                            witness: Some(r.lift(&sol.x, n_full)?),
                            probes_used: used,
                            fast_path: false,
                        });
                    }
                }
                // a feasible ray means the set is not a single point
                LpStatus::Unbounded => {
                    return Ok(UniquenessVerdict {
                        status: VerdictStatus::Nonunique,
                        witness: None,
                        probes_used: used,
                        fast_path: false,
                    });
                }
                _ => inconclusive = true,
            }
        }
    }
    let status = if inconclusive { VerdictStatus::Inconclusive } else { VerdictStatus::Unique };
    Ok(UniquenessVerdict { status, witness: None, probes_used: opts.probes.max(1), fast_path: false })
}

fn verify_on_reduced(
    r: &ReducedSystem,
    x_star: &[f64],
    upper: Option<f64>,
    opts: &VerifyOptions,
    n_full: usize,
) -> Result<UniquenessVerdict> {
    let x_ref = r.restrict(x_star);
    if x_star.iter().enumerate().any(|(j, &v)| v > FEAS_TOL && !r.col_set.contains(j)) {
        return Err(Error::InvalidArgument("reference support leaves the supporting cells".into()));
    }
    if opts.fast_path && overdetermined_full_rank(r) {
        return Ok(UniquenessVerdict { status: VerdictStatus::Unique, witness: None, probes_used: 0, fast_path: true });
    }
    probe(r, &x_ref, n_full, upper, opts)
}

/// Is `x_star` the only point of `{x : A x = b, x ≥ 0}`?
pub fn verify_unique_nonneg(
    a: &SparseMatrix,
    b: &[f64],
    x_star: &[f64],
    opts: &VerifyOptions,
) -> Result<UniquenessVerdict> {
    check_reference(a, b, x_star)?;
    let r = reduce(a, b)?;
    verify_on_reduced(&r, x_star, None, opts, a.cols())
}

/// Same as [`verify_unique_nonneg`] on an already reduced system.
pub fn verify_unique_nonneg_reduced(
    r: &ReducedSystem,
    x_star: &[f64],
    opts: &VerifyOptions,
) -> Result<UniquenessVerdict> {
    verify_on_reduced(r, x_star, None, opts, x_star.len())
}

fn check_binary(x_star: &[f64]) -> Result<()> {
    if let Some(j) = x_star.iter().position(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidArgument(format!("entry {j} of the reference point is not binary")));
    }
    Ok(())
}

/// Is the binary `x_star` the only point of `{x : A x = A x*, 0 ≤ x ≤ 1}`?
pub fn verify_unique_box(a: &SparseMatrix, x_star: &[f64], opts: &VerifyOptions) -> Result<UniquenessVerdict> {
    check_binary(x_star)?;
    let b = a.mul_vec(x_star)?;
    let r = reduce(a, &b)?;
    verify_on_reduced(&r, x_star, Some(1.0), opts, a.cols())
}

/// Same as [`verify_unique_box`] on an already reduced system.
pub fn verify_unique_box_reduced(r: &ReducedSystem, x_star: &[f64], opts: &VerifyOptions) -> Result<UniquenessVerdict> {
    check_binary(x_star)?;
    verify_on_reduced(r, x_star, Some(1.0), opts, x_star.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub found: bool,
    /// Separating vector `r ∈ [−1, 1]^m`.
    pub r: Vec<f64>,
    /// Achieved margin `min_j z_j (Aᵀr)_j`.
    pub margin: f64,
    pub status: LpStatus,
}

/// Margin above which the separating LP counts as successful.
pub const CERTIFICATE_TOL: f64 = 1e-9;

/// `max t` subject to `z_j (Aᵀr)_j ≥ t` for every column, `−1 ≤ r ≤ 1`,
/// `t ≥ 0`. With `r = u − 1`, `u ∈ [0, 2]`, each column gives the equality
/// `z_j A_jᵀ u − t − s_j = z_j A_jᵀ 1` with slack `s_j ≥ 0`.
fn certificate_lp(a: &SparseMatrix, z: &[f64]) -> Result<(LpStatus, Vec<f64>, f64)> {
    let m = a.rows();
    let n = a.cols();
    let t_col = m;
    let n_vars = m + 1 + n;
    let mut trip = Vec::with_capacity(a.nnz() + 2 * n);
    let mut rhs = vec![0.0; n];
    for (j, col) in a.columns().iter().enumerate() {
        for &(i, v) in col {
            trip.push((j, i, z[j] * v));
            rhs[j] += z[j] * v;
        }
        trip.push((j, t_col, -1.0));
        trip.push((j, m + 1 + j, -1.0));
    }
    let a_eq = SparseMatrix::from_triplets(n, n_vars, trip, true)?;
    let mut objective = vec![0.0; n_vars];
    objective[t_col] = -1.0;
    let mut upper = vec![f64::INFINITY; n_vars];
    upper[..m].iter_mut().for_each(|u| *u = 2.0);
    let sol = lp_solve(&LpProblem::nonneg(objective, a_eq, rhs).with_upper(upper))?;
    if sol.status != LpStatus::Optimal {
        return Ok((sol.status, vec![0.0; m], f64::NAN));
    }
    Ok((sol.status, sol.x[..m].iter().map(|u| u - 1.0).collect(), sol.x[t_col]))
}

fn margin(a: &SparseMatrix, x_star: &[f64], r: &[f64]) -> Result<f64> {
    let atr = a.transpose().mul_vec(r)?;
    Ok(atr.iter().zip(x_star).map(|(v, x)| (1.0 - 2.0 * x) * v).fold(f64::INFINITY, f64::min))
}

fn check_certificate_input(a: &SparseMatrix, x_star: &[f64]) -> Result<()> {
    check_binary(x_star)?;
    if x_star.len() != a.cols() {
        return Err(Error::DimensionMismatch("reference point length".into()));
    }
    Ok(())
}

/// Searches `r ∈ [−1, 1]^m` with `Diag(z) Aᵀ r > 0`, `z = 1 − 2x*`.
///
/// For nonnegative `A` the LP runs on the reduced system only: every column
/// outside it meets a zero ray, and putting `r = 1` on zero rays while
/// scaling the reduced part down makes those columns positive. The returned
/// `r` is the lifted full-length vector.
pub fn separating_certificate(a: &SparseMatrix, x_star: &[f64]) -> Result<Certificate> {
    check_certificate_input(a, x_star)?;
    if a.is_signed() {
        return separating_certificate_full(a, x_star);
    }
    let b = a.mul_vec(x_star)?;
    let red = reduce(a, &b)?;
    let (status, r_red, t) = if red.n_red() == 0 {
        (LpStatus::Optimal, Vec::new(), f64::INFINITY)
    } else {
        let z: Vec<f64> = red.col_set.iter().map(|j| 1.0 - 2.0 * x_star[j]).collect();
        certificate_lp(&red.a_red, &z)?
    };
    if status != LpStatus::Optimal {
        return Ok(Certificate { found: false, r: vec![0.0; a.rows()], margin: f64::NAN, status });
    }
    let found = t > CERTIFICATE_TOL;
    let mut scale = 1.0;
    let mut r = vec![1.0; a.rows()];
    let mut best = f64::NEG_INFINITY;
    for _ in 0..64 {
        for (i, &v) in red.row_set.iter().zip(&r_red) {
            r[i] = scale * v;
        }
        best = margin(a, x_star, &r)?;
        if !found || best > 0.0 {
            break;
        }
        scale *= 0.5;
    }
    Ok(Certificate { found, r, margin: best, status })
}

/// [`separating_certificate`] solved on the full system.
pub fn separating_certificate_full(a: &SparseMatrix, x_star: &[f64]) -> Result<Certificate> {
    check_certificate_input(a, x_star)?;
    let z: Vec<f64> = x_star.iter().map(|x| 1.0 - 2.0 * x).collect();
    let (status, r, t) = certificate_lp(a, &z)?;
    if status != LpStatus::Optimal {
        return Ok(Certificate { found: false, r, margin: f64::NAN, status });
    }
    let margin = margin(a, x_star, &r)?;
    Ok(Certificate { found: t > CERTIFICATE_TOL, r, margin, status })
}
