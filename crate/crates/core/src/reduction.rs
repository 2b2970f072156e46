//! Reduced systems: drop zero measurements and every cell they touch.
//!
//! For nonnegative `A` and `b`, every nonnegative solution of `A x = b`
//! vanishes outside `C_b = N(R_b) \ N(R_bᶜ)` with `R_b = supp(b)`, and its
//! restriction solves `A[R_b, C_b] x = b[R_b]`. Conversely, zero-padding any
//! nonnegative reduced solution solves the full system.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{neighbors, Side};
use crate::mm;
use crate::sparse::{SparseMatrix, SupportSet};

/// Entries of `b` at or below this magnitude count as zero measurements.
pub const ZERO_TOL: f64 = 1e-12;

/// Residual tolerance for [`check_equivalence`].
pub const EQUIVALENCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    pub row_set: SupportSet,
    pub col_set: SupportSet,
    pub a_red: SparseMatrix,
    pub b_red: Vec<f64>,
}

#[derive(Serialize)]
struct IndexDump<'a> {
    rows: &'a [usize],
    cols: &'a [usize],
    b: &'a [f64],
}

impl ReducedSystem {
    pub fn m_red(&self) -> usize {
        self.row_set.len()
    }

    pub fn n_red(&self) -> usize {
        self.col_set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_red() == 0 && self.m_red() == 0
    }

    pub fn is_overdetermined(&self) -> bool {
        self.m_red() >= self.n_red()
    }

    /// Zero-pads a reduced solution to the full cell count `n`.
    pub fn lift(&self, x_red: &[f64], n: usize) -> Result<Vec<f64>> {
        if x_red.len() != self.n_red() {
            return Err(Error::DimensionMismatch(format!(
                "reduced solution of length {} for {} reduced columns",
                x_red.len(),
                self.n_red()
            )));
        }
        let mut x = vec![0.0; n];
        for (v, j) in x_red.iter().zip(self.col_set.iter()) {
            x[j] = *v;
        }
        Ok(x)
    }

    /// Restricts a full-length vector to the reduced columns.
    pub fn restrict(&self, x: &[f64]) -> Vec<f64> {
        self.col_set.iter().map(|j| x[j]).collect()
    }

    /// Row/column index lists and right-hand side as JSON.
    pub fn index_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&IndexDump {
            rows: self.row_set.as_slice(),
            cols: self.col_set.as_slice(),
            b: &self.b_red,
        })?)
    }

    /// Writes `<prefix>.mtx` (reduced matrix) and `<prefix>.json` (indices).
    pub fn dump(&self, prefix: &str) -> Result<()> {
        mm::write_file(&self.a_red, format!("{prefix}.mtx"))?;
        std::fs::write(format!("{prefix}.json"), self.index_json()?)?;
        Ok(())
    }
}

/// Builds the reduced system of `A x = b`.
pub fn reduce(a: &SparseMatrix, b: &[f64]) -> Result<ReducedSystem> {
    if a.is_signed() {
        return Err(Error::InvalidArgument("reduction requires a nonnegative matrix".into()));
    }
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch(format!("right-hand side of length {} for {} rows", b.len(), a.rows())));
    }
    if let Some((index, &value)) = b.iter().enumerate().find(|(_, &v)| v < -ZERO_TOL || v.is_nan()) {
        return Err(Error::NegativeEntry { index, value });
    }
    let row_set = SupportSet::of_vector(b, ZERO_TOL);
    let zero_rows = row_set.complement(a.rows());
    let touched = neighbors(a, &row_set, Side::Right);
    let blocked = neighbors(a, &zero_rows, Side::Right);
    let col_set = touched.difference(&blocked);
    let a_red = a.submatrix(&row_set, &col_set);
    let b_red = row_set.iter().map(|i| b[i]).collect();
    Ok(ReducedSystem { row_set, col_set, a_red, b_red })
}

/// Whether zero-padding `x_red` solves `A x = b` within [`EQUIVALENCE_TOL`].
pub fn check_equivalence(a: &SparseMatrix, b: &[f64], r: &ReducedSystem, x_red: &[f64]) -> Result<bool> {
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch("right-hand side length".into()));
    }
    if r.row_set.as_slice().last().is_some_and(|&i| i >= a.rows())
        || r.col_set.as_slice().last().is_some_and(|&j| j >= a.cols())
    {
        return Err(Error::DimensionMismatch("reduced system does not belong to this matrix".into()));
    }
    let x = r.lift(x_red, a.cols())?;
    if x.iter().any(|&v| v < -EQUIVALENCE_TOL) {
        return Ok(false);
    }
    let ax = a.mul_vec(&x)?;
    Ok(ax.iter().zip(b).all(|(p, q)| (p - q).abs() <= EQUIVALENCE_TOL))
}

/// `m_red / (ℓ · n_red)`, compared against the expansion constants
/// `(√5 − 1)/2` (unperturbed) and `1/ℓ` (perturbed).
pub fn expansion_ratio(r: &ReducedSystem, ell: usize) -> Result<f64> {
    if r.n_red() == 0 {
        return Err(Error::EmptySystem);
    }
    if ell == 0 {
        return Err(Error::InvalidArgument("left degree must be positive".into()));
    }
    Ok(r.m_red() as f64 / (ell as f64 * r.n_red() as f64))
}
