//! Ground-truth and baseline machinery: exhaustive enumeration, least
//! squares, rank checks, and the thresholded l1 relaxation.

pub mod brute;
pub mod l1;
pub mod lp;
pub mod lsq;

pub use brute::{brute_force_attack, brute_force_protection, OracleError, OracleReport, ProtectionOptimum};
pub use l1::{l1_attack, L1Error, L1Result};
pub use lsq::{least_squares_estimate, protections_pin_all_states, rank, LeastSquares, RankError};
