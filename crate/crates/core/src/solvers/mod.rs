//! Rank computations, linear programming and uniqueness verification.

pub mod kruskal;
pub mod lp;
pub mod rank;
pub mod uniqueness;

pub use kruskal::kruskal_rank_bruteforce;
pub use lp::{lp_solve, LpProblem, LpSolution, LpStatus};
pub use rank::{exact_rank, numeric_rank, Rank, RankMethod};
pub use uniqueness::{
    separating_certificate, separating_certificate_full, verify_unique_box, verify_unique_nonneg, Certificate,
    UniquenessVerdict, VerdictStatus, VerifyOptions,
};
