//! Sparse-violation perturbations of P-matrices and the search problem
//! they induce.
//!
//! * [`matrix`], [`mask`], [`instance`]: dense matrices, subset masks,
//!   `A(u, v) = M + u vᵀ` instances and their JSON format.
//! * [`minors`]: principal-minor enumeration and violation sets.
//! * [`forge`]: rank-one construction of single-violation instances and the
//!   6×6 reference fixture.
//! * [`oracle`]: determinant-sign oracle, query strategies, first-hit
//!   experiments.
//! * [`info`]: entropy, mutual information, Fano bounds, transcript
//!   distances.
//! * [`schur`]: Schur-complement checks and conditional sign statistics.

pub mod error;
pub mod export;
pub mod forge;
pub mod info;
pub mod instance;
pub mod mask;
pub mod matrix;
pub mod minors;
pub mod oracle;
pub mod rng;
pub mod schur;

pub use error::{Error, Result};
pub use forge::{appendix_b_fixture, forge_single_violation, ForgeConfig, ForgeResult};
pub use instance::Instance;
pub use mask::SubsetMask;
pub use matrix::Matrix;
pub use minors::{violation_set, MinorRecord, Regime, ViolationReport};
