//! Closed-form average-case quantities for `k` particles dropped uniformly
//! (with replacement) into the `d^D` cells.
//!
//! With `q = 1/d^(D−1)` the chance that one particle meets a fixed ray and
//! `p = 1 − q`:
//!
//! * expected nonzero rays `N_R(k) = m (1 − p^k)`,
//! * expected supporting cells `N_C(k)` by inclusion–exclusion over the `D`
//!   rays through each cell,
//! * an Azuma bound on the deviation of the number of zero rays.
//!
//! Sparsity thresholds solve `N_R(k) = c · N_C(k)` over continuous `k`.

use num_bigint::BigInt;
use num_integer::binomial;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Geometry;

/// `(√5 − 1)/2`, the expansion constant of the unperturbed recovery condition.
pub const GOLDEN_DELTA: f64 = 0.618_033_988_749_894_9;

/// Absolute tolerance of [`solve_threshold`] in `k`.
pub const ROOT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedDims {
    /// Expected number of nonzero measurements.
    pub n_r: f64,
    /// Expected number of zero measurements.
    pub n_r0: f64,
    /// Expected number of supporting cells.
    pub n_c: f64,
}

fn ray_miss_probability(g: &Geometry) -> f64 {
    1.0 - 1.0 / (g.resolution() as f64).powi(g.dim() as i32 - 1)
}

pub fn expected_nonzero_rays(g: &Geometry, k: f64) -> f64 {
    g.n_rays() as f64 * (1.0 - ray_miss_probability(g).powf(k))
}

pub fn expected_zero_rays(g: &Geometry, k: f64) -> f64 {
    g.n_rays() as f64 * ray_miss_probability(g).powf(k)
}

pub fn expected_cells(g: &Geometry, k: f64) -> f64 {
    let d = g.resolution() as f64;
    match g.dim() {
        2 => d * d * (1.0 - (1.0 - 1.0 / d).powf(k)).powi(2),
        _ => {
            let n = d * d * d;
            let one = (1.0 - 1.0 / (d * d)).powf(k);
            let two = (1.0 - (2.0 * d - 1.0) / n).powf(k);
            let three = (1.0 - (3.0 * d - 2.0) / n).powf(k);
            n * (1.0 - 3.0 * one + 3.0 * two - three)
        }
    }
}

pub fn expected_dims(g: &Geometry, k: f64) -> ExpectedDims {
    ExpectedDims { n_r: expected_nonzero_rays(g, k), n_r0: expected_zero_rays(g, k), n_c: expected_cells(g, k) }
}

/// Azuma bound on `Pr(|X − N_R⁰| ≥ δ)` for the number `X` of zero rays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub bound: f64,
    /// `2·exp(−δ²/(2D²k))`, the `d → ∞` form.
    pub large_d_limit: f64,
}

pub fn tail_bound(g: &Geometry, k: u64, delta: f64) -> Result<TailBound> {
    if k == 0 {
        return Err(Error::InvalidArgument("tail bound needs k >= 1".into()));
    }
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let p = ray_miss_probability(g);
    let big_d = g.dim() as f64;
    let k = k as f64;
    let factor = (1.0 - p * p) / (1.0 - p.powf(2.0 * k));
    Ok(TailBound {
        bound: 2.0 * (-factor * delta * delta / (2.0 * big_d * big_d)).exp(),
        large_d_limit: 2.0 * (-delta * delta / (2.0 * big_d * big_d * k)).exp(),
    })
}

/// `Pr(n, m) = 2^(1−n) Σ_{i<m} C(n−1, i)` as an exact rational.
pub fn wendel_probability_exact(n: u64, m: u64) -> Result<BigRational> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument("wendel probability needs n, m >= 1".into()));
    }
    let top = n - 1;
    let mut sum = BigInt::zero();
    for i in 0..m.min(n) {
        sum += binomial(BigInt::from(top), BigInt::from(i));
    }
    Ok(BigRational::new(sum, BigInt::one() << top))
}

pub fn wendel_probability(n: u64, m: u64) -> Result<f64> {
    let exact = wendel_probability_exact(n, m)?;
    Ok(exact.to_f64().expect("probability in [0, 1] converts to f64"))
}

/// Smallest `k > 0` with `N_R(k) = c · N_C(k)`.
///
/// The ratio `N_R/N_C` starts at `D` for `k → 0` and decreases towards
/// `m/n`. The bracket starts at `k = 1` and doubles until the sign of
/// `N_R − c·N_C` changes; bisection then narrows it to [`ROOT_TOL`].
pub fn solve_threshold(g: &Geometry, c: f64) -> Result<f64> {
    if !c.is_finite() || c <= 0.0 {
        return Err(Error::InvalidArgument(format!("ratio constant must be positive, got {c}")));
    }
    let f = |k: f64| expected_nonzero_rays(g, k) - c * expected_cells(g, k);
    // Beyond this the ratio sits at m/n to machine precision.
    let upper_limit = 64.0 * g.n_cells() as f64 * (g.n_cells() as f64).ln().max(1.0);
    let mut lo = 1.0;
    if f(lo) <= 0.0 {
        // c >= D: no crossing above k = 1
        return Err(Error::NoSignChange { c, upper: lo });
    }
    let mut hi = 2.0;
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > upper_limit {
            return Err(Error::NoSignChange { c, upper: upper_limit });
        }
    }
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Sparsity thresholds for one geometry.
///
/// All values are continuous; the `*_floor` accessors give the integer
/// particle counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub geometry: Geometry,
    pub delta: f64,
    /// Root of `N_R(k) = ℓδ·N_C(k)`.
    pub k_delta_root: f64,
    /// Recoverable sparsity for unperturbed matrices, `k_delta_root / (1 + δ)`.
    pub k_delta: f64,
    /// `N_C(k_delta_root) / (1 + δ)`.
    pub k_delta_bound: f64,
    /// Root of `N_R(k) = N_C(k)`: reduced systems overdetermined below it.
    pub k_crit: f64,
    /// Root of `N_R(k) = δ·N_C(k)`.
    pub k_tilde_max: f64,
    /// `N_R(k_tilde_max) / ℓ`.
    pub k_max: f64,
    /// Root of `N_R(k) = N_C(k)/2`.
    pub k_opt: f64,
}

impl ThresholdReport {
    pub fn k_delta_floor(&self) -> u64 {
        self.k_delta.floor() as u64
    }

    pub fn k_crit_floor(&self) -> u64 {
        self.k_crit.floor() as u64
    }

    pub fn k_tilde_max_floor(&self) -> u64 {
        self.k_tilde_max.floor() as u64
    }

    pub fn k_max_floor(&self) -> u64 {
        self.k_max.floor() as u64
    }

    pub fn k_opt_floor(&self) -> u64 {
        self.k_opt.floor() as u64
    }
}

pub fn thresholds(g: &Geometry, delta: f64) -> Result<ThresholdReport> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1], got {delta}")));
    }
    let ell = g.left_degree() as f64;
    let k_delta_root = solve_threshold(g, ell * delta)?;
    let k_tilde_max = solve_threshold(g, delta)?;
    Ok(ThresholdReport {
        geometry: *g,
        delta,
        k_delta_root,
        k_delta: k_delta_root / (1.0 + delta),
        k_delta_bound: expected_cells(g, k_delta_root) / (1.0 + delta),
        k_crit: solve_threshold(g, 1.0)?,
        k_tilde_max,
        k_max: expected_nonzero_rays(g, k_tilde_max) / ell,
        k_opt: solve_threshold(g, 0.5)?,
    })
}

/// Closed-form `k_crit = log((d−2)/d) / log((d−1)/d)` for `D = 2`.
pub fn k_crit_2d(d: usize) -> f64 {
    let d = d as f64;
    ((d - 2.0) / d).ln() / ((d - 1.0) / d).ln()
}

/// Uniqueness probability of a random binary support in two special cases:
/// `(D = 3, k = 4)` for the unperturbed matrix, `1 − 2·C(d,2)³/C(d³,4)`, and
/// `(D = 2, k = 3)` for the perturbed matrix, `(d² + 6d − 10)/(3(d² − 2))`.
pub fn closed_form_uniqueness_probability(g: &Geometry, k: u64) -> Result<f64> {
    let d = g.resolution() as u64;
    match (g.dim(), k) {
        (3, 4) => {
            let bad = BigInt::from(2u32) * binomial(BigInt::from(d), BigInt::from(2u32)).pow(3);
            let total = binomial(BigInt::from(d.pow(3)), BigInt::from(4u32));
            let p = BigRational::one() - BigRational::new(bad, total);
            Ok(p.to_f64().expect("finite"))
        }
        (2, 3) => {
            let d = d as f64;
            Ok((d * d + 6.0 * d - 10.0) / (3.0 * (d * d - 2.0)))
        }
        (dim, k) => Err(Error::Unsupported(format!("no closed form for D = {dim}, k = {k}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn boundary_values() {
        for dim in [2, 3] {
            let g = Geometry::new(dim, 10).unwrap();
            assert_eq!(expected_nonzero_rays(&g, 0.0), 0.0);
            assert_eq!(expected_cells(&g, 0.0), 0.0);
            assert_relative_eq!(expected_nonzero_rays(&g, 1.0), dim as f64, epsilon = 1e-12);
            assert_relative_eq!(expected_cells(&g, 1.0), 1.0, epsilon = 1e-10);
            let e = expected_dims(&g, 37.0);
            assert_relative_eq!(e.n_r + e.n_r0, g.n_rays() as f64, epsilon = 1e-9);
        }
    }

    #[test]
    fn wendel_small_values() {
        assert_eq!(wendel_probability(3, 2).unwrap(), 0.75);
        assert_eq!(wendel_probability(20, 10).unwrap(), 0.5);
        assert_eq!(wendel_probability(4, 9).unwrap(), 1.0);
        assert!(wendel_probability(0, 1).is_err());
    }

    #[test]
    fn threshold_errors_without_crossing() {
        let g = Geometry::new(3, 10).unwrap();
        assert!(matches!(solve_threshold(&g, 3.5), Err(Error::NoSignChange { .. })));
        // the ratio never drops below m/n = 0.3
        assert!(matches!(solve_threshold(&g, 0.2), Err(Error::NoSignChange { .. })));
        assert!(solve_threshold(&g, -1.0).is_err());
    }

    #[test]
    fn two_dim_crossing_matches_closed_form() {
        for d in [5, 10, 40, 100] {
            let g = Geometry::new(2, d).unwrap();
            assert!((solve_threshold(&g, 1.0).unwrap() - k_crit_2d(d)).abs() < 1e-5);
        }
    }

    #[test]
    fn closed_forms() {
        let g = Geometry::new(3, 3).unwrap();
        assert_relative_eq!(closed_form_uniqueness_probability(&g, 4).unwrap(), 1.0 - 54.0 / 17550.0, epsilon = 1e-15);
        let g2 = Geometry::new(2, 3).unwrap();
        assert_relative_eq!(closed_form_uniqueness_probability(&g2, 3).unwrap(), 17.0 / 21.0, epsilon = 1e-15);
        assert!(closed_form_uniqueness_probability(&g2, 4).is_err());
        let far = Geometry::new(2, 100_000).unwrap();
        assert!((closed_form_uniqueness_probability(&far, 3).unwrap() - 1.0 / 3.0).abs() < 1e-4);
        let far3 = Geometry::new(3, 1000).unwrap();
        assert!(closed_form_uniqueness_probability(&far3, 4).unwrap() > 1.0 - 1e-15);
    }

    #[test]
    fn tail_bound_decreases_in_delta() {
        let g = Geometry::new(3, 20).unwrap();
        let mut last = f64::INFINITY;
        for delta in [1.0, 5.0, 10.0, 50.0, 200.0] {
            let b = tail_bound(&g, 20, delta).unwrap().bound;
            assert!(b < last);
            last = b;
        }
        assert!(last < 1e-10);
        assert!(tail_bound(&g, 0, 1.0).is_err());
    }
}
