//! Measurement matrices of the axis-aligned projection geometry.
//!
//! Cells of the `d^D` grid are ordered lexicographically by `(slab, row,
//! column)` (or `(row, column)` in 2D). Rays are ordered block-wise by
//! projection direction, in the order the Kronecker blocks are stacked:
//!
//! * 2D: `[I_d ⊗ 1ᵀ; 1ᵀ ⊗ I_d]`, i.e. one ray per grid row, then one per
//!   grid column.
//! * 3D: `[1ᵀ ⊗ I ⊗ I; I ⊗ 1ᵀ ⊗ I; I ⊗ I ⊗ 1ᵀ]`, i.e. rays along the slab
//!   axis indexed by `(row, col)`, rays along the row axis indexed by
//!   `(slab, col)`, rays along the column axis indexed by `(slab, row)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{SparseMatrix, SupportSet};

/// Problem descriptor: grid dimension `D ∈ {2, 3}` and resolution `d ≥ 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Geometry {
    dim: usize,
    d: usize,
}

impl Geometry {
    pub fn new(dim: usize, d: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidGeometry(format!("dimension must be 2 or 3, got {dim}")));
        }
        if d < 3 {
            return Err(Error::InvalidGeometry(format!("resolution must be at least 3, got {d}")));
        }
        Ok(Geometry { dim, d })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.d
    }

    /// `n = d^D`.
    pub fn n_cells(&self) -> usize {
        self.d.pow(self.dim as u32)
    }

    /// `m = D·d^(D−1)`.
    pub fn n_rays(&self) -> usize {
        self.dim * self.d.pow(self.dim as u32 - 1)
    }

    /// Number of rays through every cell, `ℓ = D`.
    pub fn left_degree(&self) -> usize {
        self.dim
    }

    /// Linear index of a cell from its grid coordinates (slowest axis first).
    pub fn cell_index(&self, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.dim {
            return Err(Error::DimensionMismatch(format!("{} coordinates for a {}D grid", coords.len(), self.dim)));
        }
        coords.iter().try_fold(0usize, |acc, &c| {
            if c >= self.d {
                Err(Error::IndexOutOfBounds { index: c, bound: self.d })
            } else {
                Ok(acc * self.d + c)
            }
        })
    }

    pub fn cell_coords(&self, index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim];
        let mut rest = index;
        for slot in out.iter_mut().rev() {
            *slot = rest % self.d;
            rest /= self.d;
        }
        out
    }

    /// Rays through a cell, in ray-index order.
    pub fn rays_of_cell(&self, index: usize) -> Vec<usize> {
        let d = self.d;
        let c = self.cell_coords(index);
        match self.dim {
            2 => vec![c[0], d + c[1]],
            _ => vec![c[1] * d + c[2], d * d + c[0] * d + c[2], 2 * d * d + c[0] * d + c[1]],
        }
    }
}

/// `A_d^D` assembled from its Kronecker closed form.
pub fn build_measurement_matrix(g: &Geometry) -> SparseMatrix {
    let d = g.resolution();
    let eye = SparseMatrix::identity(d);
    let ones = SparseMatrix::ones_row(d);
    let blocks = match g.dim() {
        2 => vec![eye.kron(&ones), ones.kron(&eye)],
        _ => vec![ones.kron(&eye).kron(&eye), eye.kron(&ones).kron(&eye), eye.kron(&eye).kron(&ones)],
    };
    SparseMatrix::vstack(&blocks).expect("blocks share the column count")
}

/// Sparse nullspace basis `B_d^D = M ⊗ … ⊗ M` with `M = [−1ᵀ; I_{d−1}]`.
///
/// The result is flagged signed: every column holds `2^(D−1)` entries `+1`
/// and as many `−1`.
pub fn build_nullspace_basis(g: &Geometry) -> SparseMatrix {
    let d = g.resolution();
    let mut trip = Vec::with_capacity(2 * (d - 1));
    for j in 0..d - 1 {
        trip.push((0, j, -1.0));
        trip.push((j + 1, j, 1.0));
    }
    let m = SparseMatrix::from_triplets(d, d - 1, trip, true).expect("valid factor");
    (1..g.dim()).fold(m.clone(), |acc, _| acc.kron(&m))
}

/// Column normalization applied after perturbing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    #[default]
    None,
    Euclidean,
    Sum,
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Normalization::None),
            "euclidean" => Ok(Normalization::Euclidean),
            "sum" => Ok(Normalization::Sum),
            _ => Err(Error::InvalidArgument(format!("unknown normalization `{s}`"))),
        }
    }
}

/// Replaces every stored value `v` by a uniform draw from `(v − ε, v + ε)`.
///
/// The sparsity pattern is preserved exactly. `epsilon == 0` returns the
/// input values unchanged (before normalization).
pub fn perturb(a: &SparseMatrix, epsilon: f64, normalization: Normalization, seed: u64) -> Result<SparseMatrix> {
    if a.is_signed() {
        return Err(Error::InvalidArgument("perturbation requires a nonnegative matrix".into()));
    }
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::InvalidArgument(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    let min_val = a.values().iter().copied().fold(f64::INFINITY, f64::min);
    if a.nnz() > 0 && epsilon >= min_val {
        return Err(Error::InvalidArgument(format!(
            "epsilon {epsilon} would allow nonpositive entries (smallest value {min_val})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = a.map_values(|_, _, v| {
        if epsilon == 0.0 {
            return v;
        }
        loop {
            let x = rng.gen_range(v - epsilon..v + epsilon);
            if x > v - epsilon {
                return x;
            }
        }
    });
    if normalization != Normalization::None {
        let mut scale = vec![0.0f64; out.cols()];
        for (_, j, v) in out.triplets() {
            scale[j] += match normalization {
                Normalization::Euclidean => v * v,
                _ => v,
            };
        }
        if normalization == Normalization::Euclidean {
            scale.iter_mut().for_each(|s| *s = s.sqrt());
        }
        out = out.map_values(|_, j, v| v / scale[j]);
    }
    Ok(out)
}

/// Side of the bipartite graph a [`SupportSet`] lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Columns (cells).
    Left,
    /// Rows (rays).
    Right,
}

/// Neighborhood `N(S)` of a set of nodes on the given side.
pub fn neighbors(a: &SparseMatrix, s: &SupportSet, side: Side) -> SupportSet {
    match side {
        Side::Left => {
            let rows = (0..a.rows()).filter(|&i| a.row(i).0.iter().any(|&j| s.contains(j))).collect();
            SupportSet::from_sorted_unchecked(rows)
        }
        Side::Right => {
            let mut hit = vec![false; a.cols()];
            for i in s.iter() {
                for &j in a.row(i).0 {
                    hit[j] = true;
                }
            }
            SupportSet::from_sorted_unchecked(hit.iter().enumerate().filter(|(_, &h)| h).map(|(j, _)| j).collect())
        }
    }
}

/// Two disjoint `2^(D−1)`-sparse supports with identical projections.
///
/// `pairs` holds one pair of distinct coordinates per axis (slab, row, column
/// in 3D; row, column in 2D). The corners of the spanned box are split by the
/// parity of how many "second" coordinates they use.
pub fn nonunique_pair(g: &Geometry, pairs: &[(usize, usize)]) -> Result<(SupportSet, SupportSet)> {
    if pairs.len() != g.dim() {
        return Err(Error::DimensionMismatch(format!("{} coordinate pairs for a {}D grid", pairs.len(), g.dim())));
    }
    for &(a, b) in pairs {
        if a == b {
            return Err(Error::InvalidArgument(format!("coordinate pair ({a}, {b}) is not distinct")));
        }
    }
    let mut even = Vec::new();
    let mut odd = Vec::new();
    for mask in 0..(1usize << g.dim()) {
        let coords: Vec<usize> =
            pairs.iter().enumerate().map(|(axis, &(a, b))| if mask >> axis & 1 == 0 { a } else { b }).collect();
        let idx = g.cell_index(&coords)?;
        if mask.count_ones() % 2 == 0 {
            even.push(idx);
        } else {
            odd.push(idx);
        }
    }
    let n = g.n_cells();
    Ok((SupportSet::from_unsorted(even, n)?, SupportSet::from_unsorted(odd, n)?))
}
