//! Matrix rank: exact fraction-free elimination for integer matrices,
//! singular-value cutoff otherwise.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::sparse::SparseMatrix;

/// Relative singular-value cutoff for numeric rank.
pub const NUMERIC_RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankMethod {
    Exact,
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rank {
    pub rank: usize,
    pub method: RankMethod,
}

/// Exact rank for integer-valued matrices, numeric rank otherwise.
pub fn exact_rank(a: &SparseMatrix) -> Rank {
    match a.to_integer_dense() {
        Some(m) => Rank { rank: integer_rank(m), method: RankMethod::Exact },
        None => Rank { rank: numeric_rank(a), method: RankMethod::Numeric },
    }
}

/// Number of singular values above `NUMERIC_RANK_TOL · σ_max`.
pub fn numeric_rank(a: &SparseMatrix) -> usize {
    if a.rows() == 0 || a.cols() == 0 || a.nnz() == 0 {
        return 0;
    }
    let mut dense = DMatrix::<f64>::zeros(a.rows(), a.cols());
    for (i, j, v) in a.triplets() {
        dense[(i, j)] = v;
    }
    let sv = dense.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > NUMERIC_RANK_TOL * max).count()
}

/// Bareiss elimination; falls back to big integers if `i128` overflows.
pub fn integer_rank(m: Vec<Vec<i64>>) -> usize {
    let wide: Vec<Vec<i128>> = m.iter().map(|r| r.iter().map(|&v| v as i128).collect()).collect();
    match bareiss_i128(wide) {
        Some(r) => r,
        None => {
            log::debug!("i128 overflow in fraction-free elimination, retrying with big integers");
            let big = m.iter().map(|r| r.iter().map(|&v| BigInt::from(v)).collect()).collect();
            bareiss_big(big)
        }
    }
}

fn bareiss_i128(mut m: Vec<Vec<i128>>) -> Option<usize> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut prev: i128 = 1;
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| m[i][c] != 0) else { continue };
        m.swap(r, p);
        let (top, rest) = m.split_at_mut(r + 1);
        let pivot_row = &top[r];
        let pivot = pivot_row[c];
        for row in rest.iter_mut() {
            let lead = row[c];
            for j in c + 1..cols {
                let num = pivot.checked_mul(row[j])?.checked_sub(lead.checked_mul(pivot_row[j])?)?;
                debug_assert_eq!(num % prev, 0);
                row[j] = num / prev;
            }
            row[c] = 0;
        }
        prev = pivot;
        r += 1;
    }
    Some(r)
}

fn bareiss_big(mut m: Vec<Vec<BigInt>>) -> usize {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut prev = BigInt::from(1);
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, p);
        let (top, rest) = m.split_at_mut(r + 1);
        let pivot_row = &top[r];
        let pivot = pivot_row[c].clone();
        for row in rest.iter_mut() {
            let lead = row[c].clone();
            for j in c + 1..cols {
                row[j] = (&pivot * &row[j] - &lead * &pivot_row[j]) / &prev;
            }
            row[c] = BigInt::zero();
        }
        prev = pivot;
        r += 1;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_integer_ranks() {
        assert_eq!(integer_rank(vec![vec![1, 2], vec![2, 4]]), 1);
        assert_eq!(integer_rank(vec![vec![0, 1], vec![1, 0], vec![1, 1]]), 2);
        assert_eq!(integer_rank(vec![vec![0, 0, 0]]), 0);
        assert_eq!(integer_rank(vec![]), 0);
    }

    #[test]
    fn big_integer_path_agrees() {
        let m = vec![vec![3, 1, 4, 1], vec![5, 9, 2, 6], vec![8, 10, 6, 7], vec![1, 1, 1, 1]];
        let big = m.iter().map(|r| r.iter().map(|&v| BigInt::from(v)).collect()).collect();
        assert_eq!(bareiss_big(big), integer_rank(m.clone()));
        assert_eq!(integer_rank(m), 3);
    }

    #[test]
    fn numeric_rank_sees_dependence() {
        let a =
            SparseMatrix::from_dense(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0 + 1e-14], vec![0.0, 1.0, 0.5]], false)
                .unwrap();
        assert_eq!(numeric_rank(&a), 2);
        assert_eq!(exact_rank(&a).method, RankMethod::Numeric);
    }
}
