//! Structural properties of the measurement matrices and their nullspace.

use proptest::prelude::*;

use sparse_tomo::geometry::{
    build_measurement_matrix, build_nullspace_basis, nonunique_pair, perturb, Geometry, Normalization,
};
use sparse_tomo::solvers::kruskal::kruskal_rank_bruteforce;
use sparse_tomo::solvers::rank::{exact_rank, RankMethod};
use sparse_tomo::SparseMatrix;

/// Rank by exact rational Gaussian elimination, independent of the crate's
/// fraction-free routine.
fn rational_rank(m: &SparseMatrix) -> usize {
    use num_rational::BigRational;
    use num_traits::{FromPrimitive, Zero};
    let mut rows: Vec<Vec<BigRational>> =
        m.to_dense().iter().map(|r| r.iter().map(|&v| BigRational::from_f64(v).unwrap()).collect()).collect();
    let (nr, nc) = (m.rows(), m.cols());
    let mut rank = 0;
    for c in 0..nc {
        let Some(p) = (rank..nr).find(|&i| !rows[i][c].is_zero()) else { continue };
        rows.swap(rank, p);
        let pivot = rows[rank][c].clone();
        for i in 0..nr {
            if i != rank && !rows[i][c].is_zero() {
                let f = rows[i][c].clone() / pivot.clone();
                let pivot_row = rows[rank].clone();
                for (x, p) in rows[i].iter_mut().zip(&pivot_row).skip(c) {
                    *x -= f.clone() * p.clone();
                }
            }
        }
        rank += 1;
    }
    rank
}

fn geometry() -> impl Strategy<Value = Geometry> {
    prop_oneof![(3usize..=10).prop_map(|d| (2, d)), (3usize..=8).prop_map(|d| (3, d))]
        .prop_map(|(dim, d)| Geometry::new(dim, d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn degrees_and_shape(g in geometry()) {
        let a = build_measurement_matrix(&g);
        let d = g.resolution();
        prop_assert_eq!(a.rows(), g.n_rays());
        prop_assert_eq!(a.cols(), g.n_cells());
        for i in 0..a.rows() {
            prop_assert_eq!(a.row_nnz(i), d);
        }
        prop_assert!(a.col_nnz().iter().all(|&c| c == g.dim()));
        prop_assert!(a.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn columns_match_ray_lists(g in geometry()) {
        let a = build_measurement_matrix(&g);
        let cols = a.columns();
        for (j, col) in cols.iter().enumerate() {
            let rows: Vec<usize> = col.iter().map(|&(i, _)| i).collect();
            prop_assert_eq!(rows, g.rays_of_cell(j));
            prop_assert_eq!(g.cell_index(&g.cell_coords(j)).unwrap(), j);
        }
    }

    #[test]
    fn nullspace_basis_annihilates(g in geometry()) {
        let a = build_measurement_matrix(&g);
        let b = build_nullspace_basis(&g);
        let d = g.resolution();
        prop_assert_eq!(b.cols(), (d - 1).pow(g.dim() as u32));
        let product = a.integer_product(&b).unwrap();
        prop_assert!(product.iter().all(|&(_, _, v)| v == 0));
        // each column is a signed alternating corner set
        let half = 1usize << (g.dim() - 1);
        for col in b.columns() {
            prop_assert_eq!(col.iter().filter(|&&(_, v)| v == 1.0).count(), half);
            prop_assert_eq!(col.iter().filter(|&&(_, v)| v == -1.0).count(), half);
        }
    }

    #[test]
    fn corner_pairs_share_projections(
        dim in 2usize..=3,
        d in 3usize..=9,
        picks in proptest::collection::vec((0usize..9, 0usize..9), 3),
    ) {
        let g = Geometry::new(dim, d).unwrap();
        let pairs: Vec<(usize, usize)> = picks
            .iter()
            .take(dim)
            .map(|&(a, b)| (a % d, if a % d == b % d { (b + 1) % d } else { b % d }))
            .collect();
        let (s, t) = nonunique_pair(&g, &pairs).unwrap();
        let a = build_measurement_matrix(&g);
        let n = g.n_cells();
        prop_assert!(s.iter().all(|c| !t.contains(c)));
        prop_assert_eq!(a.mul_vec(&s.indicator(n)).unwrap(), a.mul_vec(&t.indicator(n)).unwrap());
    }

    #[test]
    fn perturbation_keeps_pattern_and_bounds(
        g in geometry(),
        eps in 0.0f64..0.9,
        seed in any::<u64>(),
    ) {
        let a = build_measurement_matrix(&g);
        let p = perturb(&a, eps, Normalization::None, seed).unwrap();
        prop_assert!(p.same_pattern(&a));
        prop_assert!(p.values().iter().all(|&v| (v - 1.0).abs() <= eps && v > 0.0));
        prop_assert_eq!(&p, &perturb(&a, eps, Normalization::None, seed).unwrap());
        for norm in [Normalization::Sum, Normalization::Euclidean] {
            let q = perturb(&a, eps, norm, seed).unwrap();
            prop_assert!(q.same_pattern(&a));
            let mut acc = vec![0.0; q.cols()];
            for (_, j, v) in q.triplets() {
                acc[j] += if norm == Normalization::Sum { v } else { v * v };
            }
            prop_assert!(acc.iter().all(|s| (s - 1.0).abs() < 1e-12));
        }
    }
}

#[test]
fn ranks_match_rational_elimination() {
    for (dim, max_d) in [(2usize, 8usize), (3, 5)] {
        for d in 3..=max_d {
            let g = Geometry::new(dim, d).unwrap();
            let a = build_measurement_matrix(&g);
            let b = build_nullspace_basis(&g);
            let ra = exact_rank(&a);
            assert_eq!(ra.method, RankMethod::Exact);
            assert_eq!(ra.rank, d.pow(dim as u32) - (d - 1).pow(dim as u32), "D={dim} d={d}");
            assert_eq!(ra.rank, rational_rank(&a), "D={dim} d={d}");
            assert_eq!(exact_rank(&b).rank, (d - 1).pow(dim as u32), "D={dim} d={d}");
            // rank-nullity: the basis spans the whole nullspace
            assert_eq!(ra.rank + exact_rank(&b).rank, g.n_cells());
        }
    }
}

#[test]
fn smallest_nullspace_support_is_a_corner_box() {
    // Kruskal rank 2^D − 1 means the sparsest nullspace vector has 2^D entries.
    for (dim, d) in [(2usize, 3usize), (2, 4), (3, 3)] {
        let g = Geometry::new(dim, d).unwrap();
        let a = build_measurement_matrix(&g);
        let limit = 1 << dim;
        assert_eq!(kruskal_rank_bruteforce(&a, limit).unwrap(), limit - 1, "D={dim} d={d}");
    }
}

#[test]
fn kruskal_guard_blocks_large_enumerations() {
    let g = Geometry::new(3, 4).unwrap();
    let a = build_measurement_matrix(&g);
    assert!(kruskal_rank_bruteforce(&a, 8).is_err());
}

#[test]
fn perturbed_small_matrix_has_kruskal_rank_four() {
    let g = Geometry::new(2, 3).unwrap();
    let a = build_measurement_matrix(&g);
    for seed in 0..100 {
        let p = perturb(&a, 0.1, Normalization::None, seed).unwrap();
        assert!(kruskal_rank_bruteforce(&p, 6).unwrap() >= 4, "seed {seed}");
    }
}

#[test]
fn invalid_geometries_are_rejected() {
    assert!(Geometry::new(4, 5).is_err());
    assert!(Geometry::new(2, 2).is_err());
    let g = Geometry::new(2, 3).unwrap();
    assert!(g.cell_index(&[3, 0]).is_err());
    assert!(g.cell_index(&[0]).is_err());
    let a = build_measurement_matrix(&g);
    assert!(perturb(&a, 1.0, Normalization::None, 0).is_err());
    assert!(perturb(&build_nullspace_basis(&g), 0.1, Normalization::None, 0).is_err());
}
