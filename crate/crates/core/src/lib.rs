//! Tensor robust principal component analysis by scaled gradient descent on
//! Tucker factors.
//!
//! An observation `Y = X⋆ + S⋆` is split into a low-multilinear-rank part
//! `X⋆` and a sparse corruption `S⋆`. The solver alternates a soft-threshold
//! corruption estimate with a preconditioned gradient step on the Tucker
//! factors, starting from a thresholded truncated HOSVD.
//!
//! Modules:
//! - [`tensor`]: dense storage, matricization, multilinear products, norms.
//! - [`linalg`]: thin SVD (Jacobi / Golub–Kahan), SPD inverse, QR.
//! - [`tucker`]: Tucker factors, truncated HOSVD, companion factors.
//! - [`rpca`]: soft shrinkage, threshold schedule, the solver loop.
//! - [`metrics`]: incoherence, condition numbers, sparsity, alignment distance.
//! - [`synth`]: synthetic ground truth and phase-transition sweeps.
//! - [`io`]: the TRPC binary tensor format and run reports.

pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod rpca;
pub mod synth;
pub mod tensor;
pub mod tucker;

pub use error::{Error, Result};
pub use metrics::{AlignmentResult, Diagnostics, ErrorReport};
pub use rpca::{
    scaled_step, soft_shrink, solve, solve_order_n, spectral_init, update_sparse, IterationRecord,
    IterationTrace, SolveOutput, SolverConfig, SolverState, Threshold, ThresholdSchedule,
};
pub use synth::{gen_truth, run_sweep, GroundTruth, SweepSpec, TruthSpec};
pub use tensor::{DenseMatrix, DenseTensor};
pub use tucker::{hosvd, TuckerFactors};
