//! Expected dimensions, thresholds, tail bound and Wendel probabilities
//! against simulation and independent formulas.

use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

use sparse_tomo::analysis::{
    expected_cells, expected_dims, expected_nonzero_rays, expected_zero_rays, k_crit_2d, solve_threshold, tail_bound,
    thresholds, wendel_probability, wendel_probability_exact, ROOT_TOL,
};
use sparse_tomo::geometry::{build_measurement_matrix, Geometry};
use sparse_tomo::reduction::reduce;

/// Drops `k` particles and returns (nonzero rays, supporting cells, occupied cells).
fn simulate(g: &Geometry, k: usize, rng: &mut ChaCha8Rng) -> (f64, f64, f64) {
    let a = build_measurement_matrix(g);
    let mut x = vec![0.0; g.n_cells()];
    for _ in 0..k {
        x[rng.gen_range(0..g.n_cells())] += 1.0;
    }
    let b = a.mul_vec(&x).unwrap();
    let r = reduce(&a, &b).unwrap();
    let occupied = x.iter().filter(|&&v| v > 0.0).count();
    (r.m_red() as f64, r.n_red() as f64, occupied as f64)
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn geometry() -> impl Strategy<Value = Geometry> {
    (2usize..=3, 3usize..=60).prop_map(|(dim, d)| Geometry::new(dim, d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expectations_are_monotone_and_bounded(g in geometry(), k in 0.0f64..2000.0, dk in 0.01f64..50.0) {
        let e = expected_dims(&g, k);
        let f = expected_dims(&g, k + dk);
        prop_assert!(f.n_r >= e.n_r && f.n_c >= e.n_c - 1e-9);
        prop_assert!(e.n_r <= g.n_rays() as f64 + 1e-9);
        prop_assert!(e.n_c <= g.n_cells() as f64 + 1e-9);
        prop_assert!(e.n_r >= 0.0 && e.n_c >= -1e-9);
        prop_assert!((e.n_r + e.n_r0 - g.n_rays() as f64).abs() < 1e-9 * g.n_rays() as f64);
        // supporting cells include every occupied cell
        let n = g.n_cells() as f64;
        prop_assert!(e.n_c >= n * (1.0 - (1.0 - 1.0 / n).powf(k)) - 1e-9 * n);
    }

    #[test]
    fn threshold_roots_are_roots(g in geometry(), u in 0.02f64..0.98) {
        // roots exist for constants between the limits m/n and D of the ratio
        let floor = g.n_rays() as f64 / g.n_cells() as f64;
        let c = floor + u * (g.dim() as f64 - floor);
        let k = solve_threshold(&g, c).unwrap();
        let f = |k: f64| expected_nonzero_rays(&g, k) - c * expected_cells(&g, k);
        prop_assert!(f(k - ROOT_TOL) >= -1e-9 && f(k + ROOT_TOL) <= 1e-9);
        prop_assert!(k > 1.0);
    }

    #[test]
    fn thresholds_are_ordered(g in geometry(), delta in 0.05f64..0.66) {
        prop_assume!(delta > g.n_rays() as f64 / g.n_cells() as f64);
        let t = thresholds(&g, delta).unwrap();
        // a smaller ratio constant is reached at a larger k
        let c = g.left_degree() as f64 * delta;
        prop_assume!((c - 1.0).abs() > 1e-3);
        prop_assert_eq!(t.k_delta_root < t.k_crit, c > 1.0);
        prop_assert!(t.k_crit < t.k_opt);
        prop_assert!(t.k_opt < t.k_tilde_max || delta >= 0.5);
        prop_assert!(t.k_delta < t.k_delta_root);
        prop_assert!(t.k_max <= t.k_tilde_max);
    }

    #[test]
    fn tail_bound_is_a_probability(g in geometry(), k in 1u64..500, delta in 0.1f64..100.0) {
        let t = tail_bound(&g, k, delta).unwrap();
        prop_assert!(t.bound > 0.0 && t.bound <= 2.0);
        prop_assert!(t.large_d_limit > 0.0 && t.large_d_limit <= 2.0);
    }

    #[test]
    fn wendel_symmetry(n in 1u64..120, m in 1u64..120) {
        prop_assume!(m < n);
        let p = wendel_probability_exact(n, m).unwrap() + wendel_probability_exact(n, n - m).unwrap();
        prop_assert_eq!(p, num_rational::BigRational::from_integer(1.into()));
    }
}

#[test]
fn three_d_ratio_decreases_in_k() {
    for d in [10usize, 20, 40, 80] {
        let g = Geometry::new(3, d).unwrap();
        let ratio = |k: f64| expected_nonzero_rays(&g, k) / expected_cells(&g, k);
        let mut prev = f64::INFINITY;
        for i in 1..=d * d {
            let k = i as f64 * d as f64;
            let r = ratio(k);
            // near saturation consecutive values agree to rounding
            assert!(r <= prev * (1.0 + 1e-12), "d={d} k={k}");
            prev = r;
        }
    }
}

#[test]
fn expectations_match_simulation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let trials = 400;
    for (dim, d, k) in [(2, 10, 5), (2, 20, 30), (3, 8, 20), (3, 10, 60), (3, 15, 150)] {
        let g = Geometry::new(dim, d).unwrap();
        let runs: Vec<(f64, f64, f64)> = (0..trials).map(|_| simulate(&g, k, &mut rng)).collect();
        let n = g.n_cells() as f64;
        let checks = [
            ("N_R", runs.iter().map(|r| r.0).collect::<Vec<_>>(), expected_nonzero_rays(&g, k as f64)),
            ("N_C", runs.iter().map(|r| r.1).collect(), expected_cells(&g, k as f64)),
            ("occupancy", runs.iter().map(|r| r.2).collect(), n * (1.0 - (1.0 - 1.0 / n).powi(k as i32))),
        ];
        for (name, sample, expected) in checks {
            let (mean, sd) = mean_sd(&sample);
            let se = sd / (trials as f64).sqrt();
            assert!(
                (mean - expected).abs() <= 3.0 * se + 1e-9,
                "{name} D={dim} d={d} k={k}: {mean} vs {expected} (se {se})"
            );
        }
    }
}

#[test]
fn tail_bound_holds_empirically() {
    let g = Geometry::new(3, 20).unwrap();
    let k = 20;
    let mean = expected_zero_rays(&g, k as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let zeros: Vec<f64> = (0..2000).map(|_| g.n_rays() as f64 - simulate(&g, k, &mut rng).0).collect();
    for delta in [5.0, 10.0, 20.0] {
        let freq = zeros.iter().filter(|&&z| (z - mean).abs() >= delta).count() as f64 / zeros.len() as f64;
        let bound = tail_bound(&g, k as u64, delta).unwrap().bound;
        assert!(freq <= bound, "delta {delta}: {freq} > {bound}");
    }
}

#[test]
fn wendel_matches_log_gamma_sum() {
    let ln_binom = |n: f64, i: f64| ln_gamma(n + 1.0) - ln_gamma(i + 1.0) - ln_gamma(n - i + 1.0);
    for n in 1..=200u64 {
        for m in [1, n / 4 + 1, n / 2, n / 2 + 1, n - 1, n, n + 3] {
            if m == 0 {
                continue;
            }
            let top = (n - 1) as f64;
            let oracle: f64 = (0..m.min(n)).map(|i| (ln_binom(top, i as f64) - top * 2f64.ln()).exp()).sum();
            let got = wendel_probability(n, m).unwrap();
            assert!((got - oracle).abs() < 1e-10, "n={n} m={m}: {got} vs {oracle}");
        }
    }
    assert_eq!(wendel_probability(20, 10).unwrap(), 0.5);
    assert_eq!(wendel_probability(5, 5).unwrap(), 1.0);
    assert!(wendel_probability(0, 1).is_err());
}

#[test]
fn two_d_level_lines_are_flat_in_k() {
    // in 2D the ratio level lines sit at an almost fixed particle count
    for c in [1.0, 0.5] {
        let ks: Vec<f64> =
            (30..=60).step_by(5).map(|d| solve_threshold(&Geometry::new(2, d).unwrap(), c).unwrap()).collect();
        let mean = ks.iter().sum::<f64>() / ks.len() as f64;
        for (i, k) in ks.iter().enumerate() {
            assert!((k / mean - 1.0).abs() <= 0.05, "c={c} d={}: {k} vs mean {mean}", 30 + 5 * i);
        }
    }
}

#[test]
fn two_d_closed_form_critical_point_is_a_root() {
    // the closed form solves the occupancy version of N_R = N_C
    for d in [5usize, 10, 30] {
        let k = k_crit_2d(d);
        let q = 1.0 - 1.0 / d as f64;
        let lhs = 2.0 * (1.0 - q.powf(k));
        let rhs = d as f64 * (1.0 - q.powf(k)).powi(2);
        assert_relative_eq!(lhs, rhs, max_relative = 1e-9);
    }
}

#[test]
fn invalid_arguments() {
    let g = Geometry::new(3, 10).unwrap();
    assert!(solve_threshold(&g, 0.0).is_err());
    assert!(solve_threshold(&g, 3.5).is_err());
    assert!(thresholds(&g, 1.5).is_err());
    assert!(tail_bound(&g, 0, 1.0).is_err());
    assert!(tail_bound(&g, 5, -1.0).is_err());
}
