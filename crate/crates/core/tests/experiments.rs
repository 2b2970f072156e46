//! Monte Carlo drivers: reproducibility, qualitative phase-transition shape
//! and exhaustive enumeration against closed forms.

use proptest::prelude::*;

use sparse_tomo::analysis::{closed_form_uniqueness_probability, solve_threshold};
use sparse_tomo::experiments::{
    enumerate_corner_supports, enumerate_lp_uniqueness, run_cell, run_grid, sample_sparse_signal, GridCell, GridConfig,
    SignalKind, TrialOptions, Variant, CSV_HEADER,
};
use sparse_tomo::geometry::{build_measurement_matrix, Geometry};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn signals_have_the_requested_size(dim in 2usize..=3, d in 3usize..=8, k in 0usize..30, seed in any::<u64>()) {
        let g = Geometry::new(dim, d).unwrap();
        let multi = sample_sparse_signal(&g, k, SignalKind::NonnegMultiplicity, seed).unwrap();
        prop_assert_eq!(multi.iter().sum::<f64>(), k as f64);
        prop_assert!(multi.iter().all(|v| v.fract() == 0.0 && *v >= 0.0));
        let k = k.min(g.n_cells());
        let binary = sample_sparse_signal(&g, k, SignalKind::Binary, seed).unwrap();
        prop_assert_eq!(binary.iter().filter(|&&v| v == 1.0).count(), k);
        prop_assert!(binary.iter().all(|&v| v == 0.0 || v == 1.0));
        prop_assert_eq!(binary, sample_sparse_signal(&g, k, SignalKind::Binary, seed).unwrap());
    }
}

fn small_config() -> GridConfig {
    GridConfig {
        dim: 3,
        d: vec![6, 8],
        rho: vec![0.1, 0.3, 0.6, 1.0],
        trials: 12,
        seed: 99,
        stop_below: None,
        ..Default::default()
    }
}

#[test]
fn grid_is_independent_of_thread_count() {
    let one = run_grid(&GridConfig { jobs: Some(1), ..small_config() }).unwrap().0;
    let many = run_grid(&GridConfig { jobs: Some(4), ..small_config() }).unwrap().0;
    assert_eq!(one.cells, many.cells);
    assert_eq!(one.to_csv(), many.to_csv());
    let csv = one.to_csv();
    assert!(csv.starts_with(CSV_HEADER));
    assert_eq!(csv.lines().count(), one.cells.len() + 1);
}

#[test]
fn config_round_trips_through_json() {
    let cfg = small_config();
    let text = serde_json::to_string(&cfg).unwrap();
    let back: GridConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back, cfg);
    assert!(serde_json::from_str::<GridConfig>(r#"{"dims": 3}"#).is_err());
    let partial: GridConfig = serde_json::from_str(r#"{"d": [12], "trials": 3}"#).unwrap();
    assert_eq!(partial.d, vec![12]);
    assert_eq!(partial.dim, GridConfig::default().dim);
    assert!(GridConfig { trials: 0, ..cfg.clone() }.validate().is_err());
    assert!(GridConfig { d: vec![2], ..cfg }.validate().is_err());
}

fn cell(g: &Geometry, k: usize, variant: Variant, trials: usize) -> GridCell {
    let base = build_measurement_matrix(g);
    let opts = TrialOptions::default();
    let records = run_cell(g, &base, k, variant, SignalKind::Binary, trials, 5, &opts).unwrap();
    GridCell::aggregate(variant, SignalKind::Binary, g.resolution(), k, 0.0, &records)
}

#[test]
fn uniqueness_falls_with_sparsity_and_perturbation_helps() {
    let g = Geometry::new(3, 8).unwrap();
    let ks = [4usize, 16, 32, 48, 64];
    let trials = 20;
    let mut prev = [1.0f64, 1.0];
    for &k in &ks {
        let plain = cell(&g, k, Variant::Unperturbed, trials);
        let pert = cell(&g, k, Variant::Perturbed, trials);
        let p = [plain.p_unique_nonneg.unwrap(), pert.p_unique_nonneg.unwrap()];
        for v in 0..2 {
            assert!(p[v] <= prev[v] + 0.1, "variant {v} k={k}: {} after {}", p[v], prev[v]);
        }
        assert!(p[1] >= p[0] - 0.1, "k={k}: perturbed {} < unperturbed {}", p[1], p[0]);
        assert!(plain.p_inconclusive <= 0.1 && pert.p_inconclusive <= 0.1, "k={k}");
        prev = p;
    }
}

#[test]
fn simulated_ratio_crosses_one_near_the_critical_sparsity() {
    // m_red / n_red of multiplicity signals compared to the expected-dimension root
    let opts = TrialOptions { uniqueness: false, ..Default::default() };
    for (d, expected_k) in [(10usize, 65.29), (15, 107.75), (20, 157.10)] {
        let g = Geometry::new(3, d).unwrap();
        let k_crit = solve_threshold(&g, 1.0).unwrap();
        assert!((k_crit - expected_k).abs() < 0.01, "d={d}: {k_crit} vs {expected_k}");
        let base = build_measurement_matrix(&g);
        let ratio = |k: usize| {
            let recs =
                run_cell(&g, &base, k, Variant::Unperturbed, SignalKind::NonnegMultiplicity, 60, 1, &opts).unwrap();
            let m: f64 = recs.iter().map(|r| r.m_red as f64).sum();
            let n: f64 = recs.iter().map(|r| r.n_red as f64).sum();
            m / n
        };
        let (mut lo, mut hi) = ((k_crit * 0.5) as usize, (k_crit * 1.5) as usize);
        assert!(ratio(lo) > 1.0 && ratio(hi) < 1.0, "d={d}");
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if ratio(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let crossing = 0.5 * (lo + hi) as f64;
        assert!((crossing / k_crit - 1.0).abs() <= 0.1, "d={d}: crossing {crossing} vs {k_crit}");
    }
}

#[test]
fn four_sparse_enumeration_matches_closed_form() {
    for d in 3..=5 {
        let g = Geometry::new(3, d).unwrap();
        let counts = enumerate_corner_supports(&g).unwrap();
        let closed = closed_form_uniqueness_probability(&g, 4).unwrap();
        assert!((counts.unique_fraction() - closed).abs() < 1e-12, "d={d}");
    }
}

#[test]
fn perturbed_three_sparse_enumeration_matches_closed_form() {
    for d in 3..=5 {
        let g = Geometry::new(2, d).unwrap();
        let counts = enumerate_lp_uniqueness(&g, 3, 0.1, 4, 5).unwrap();
        assert_eq!(counts.inconclusive, 0, "d={d}");
        let closed = closed_form_uniqueness_probability(&g, 3).unwrap();
        assert!((counts.unique_fraction() - closed).abs() < 1e-12, "d={d}: {} vs {closed}", counts.unique_fraction());
    }
}

#[test]
fn enumeration_guard_trips() {
    let g = Geometry::new(3, 30).unwrap();
    assert!(enumerate_corner_supports(&g).is_err());
    assert!(enumerate_lp_uniqueness(&g, 3, 0.1, 0, 1).is_err());
}
