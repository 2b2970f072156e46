//! Brute-force Kruskal (complete) rank.
//!
//! Column subsets are enumerated depth first with an incrementally reduced
//! basis. A dependent subset ends its branch, and once a circuit of size `s`
//! is known no subset of size `≥ s` is tried again.

use num_integer::Integer;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Largest `C(n, limit)` accepted by [`kruskal_rank_bruteforce`].
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

/// Relative residual below which a floating column counts as dependent.
const FLOAT_DEP_TOL: f64 = 1e-9;

pub(crate) fn binomial_u128(n: u128, k: u128) -> u128 {
    let k = k.min(n.saturating_sub(k));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

trait Basis {
    /// Tries to add column `j`; returns false (and leaves the basis as is)
    /// if it is dependent on the current columns.
    fn push(&mut self, j: usize) -> bool;
    fn pop(&mut self);
}

struct IntBasis {
    cols: Vec<Vec<i64>>,
    stack: Vec<(Vec<i64>, usize)>,
}

impl Basis for IntBasis {
    fn push(&mut self, j: usize) -> bool {
        let mut v = self.cols[j].clone();
        for (b, piv) in &self.stack {
            let lead = v[*piv];
            if lead == 0 {
                continue;
            }
            let scale = b[*piv];
            let mut g = 0i64;
            for (x, y) in v.iter_mut().zip(b) {
                *x = scale * *x - lead * y;
                g = g.gcd(x);
            }
            if g > 1 {
                v.iter_mut().for_each(|x| *x /= g);
            }
        }
        match v.iter().position(|&x| x != 0) {
            Some(piv) => {
                self.stack.push((v, piv));
                true
            }
            None => false,
        }
    }

    fn pop(&mut self) {
        self.stack.pop();
    }
}

struct FloatBasis {
    cols: Vec<Vec<f64>>,
    // orthonormal vectors
    stack: Vec<Vec<f64>>,
}

impl Basis for FloatBasis {
    fn push(&mut self, j: usize) -> bool {
        let mut v = self.cols[j].clone();
        let norm0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm0 == 0.0 {
            return false;
        }
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for q in &self.stack {
                let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= FLOAT_DEP_TOL * norm0 {
            return false;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        self.stack.push(v);
        true
    }

    fn pop(&mut self) {
        self.stack.pop();
    }
}

struct Search<'a, B: Basis> {
    basis: &'a mut B,
    n: usize,
    /// Size of the smallest dependent subset seen so far.
    min_dependent: usize,
}

impl<B: Basis> Search<'_, B> {
    fn descend(&mut self, start: usize, depth: usize) {
        for j in start..self.n {
            if depth + 1 >= self.min_dependent {
                return;
            }
            if self.basis.push(j) {
                self.descend(j + 1, depth + 1);
                self.basis.pop();
            } else {
                self.min_dependent = depth + 1;
            }
        }
    }
}

/// Largest `r ≤ limit` such that every `r` columns of `a` are independent.
///
/// Integer matrices are handled exactly; floating matrices use a relative
/// residual test.
pub fn kruskal_rank_bruteforce(a: &SparseMatrix, limit: usize) -> Result<usize> {
    let n = a.cols();
    let limit = limit.min(n);
    let count = binomial_u128(n as u128, limit as u128);
    if count > ENUMERATION_LIMIT {
        return Err(Error::EnumerationGuard { count, limit: ENUMERATION_LIMIT });
    }
    // searching up to size limit + 1 tells whether all limit-subsets are independent
    let cap = limit + 1;
    let min_dependent = match a.to_integer_dense() {
        Some(dense) => {
            let cols = (0..n).map(|j| dense.iter().map(|r| r[j]).collect()).collect();
            let mut basis = IntBasis { cols, stack: Vec::new() };
            let mut s = Search { basis: &mut basis, n, min_dependent: cap };
            s.descend(0, 0);
            s.min_dependent
        }
        None => {
            let dense = a.to_dense();
            let cols = (0..n).map(|j| dense.iter().map(|r| r[j]).collect()).collect();
            let mut basis = FloatBasis { cols, stack: Vec::new() };
            let mut s = Search { basis: &mut basis, n, min_dependent: cap };
            s.descend(0, 0);
            s.min_dependent
        }
    };
    Ok((min_dependent - 1).min(limit))
}
