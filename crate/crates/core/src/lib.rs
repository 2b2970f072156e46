//! Sparse tomographic measurement matrices over `d×d` and `d×d×d` grids:
//! construction, support reduction, average-case dimension analysis, and LP
//! based uniqueness tests for nonnegative and binary signals.

pub mod analysis;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod mm;
pub mod reduction;
pub mod solvers;
pub mod sparse;

pub use error::{Error, Result};
pub use geometry::{build_measurement_matrix, build_nullspace_basis, Geometry};
pub use reduction::{reduce, ReducedSystem};
pub use sparse::{SparseMatrix, SupportSet};
