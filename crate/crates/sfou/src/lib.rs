//! Sub-fractional Brownian motion, the Ornstein-Uhlenbeck-type process it
//! drives, and maximum likelihood inference for the drift parameter.
//!
//! The library covers the whole chain from special functions to Monte
//! Carlo experiments:
//!
//! - [`hurst`], [`cov`], [`kernels`]: derived constants, closed-form
//!   covariances, Erdelyi-Kober fractional integrals, and the Volterra
//!   kernels (with singularity-aware quadrature in [`quad`]).
//! - [`simulate`]: seeded, reproducible path generation for sub-fBm (exact
//!   Cholesky, fBm folding, Wiener-integral discretization) and the drift
//!   process dX = theta X dt + d zeta.
//! - [`inference`]: the fundamental-martingale transform, the score
//!   process, drift MLE, likelihood ratios, the Girsanov weight, and the
//!   conditional-mean predictor.
//! - [`montecarlo`]: replication engine plus the consistency, asymptotic
//!   normality, Berry-Esseen-bound, and tail-bound experiments.
//! - [`report`], [`cli`]: bit-stable CSV/JSON emission and the command
//!   line driver.
//!
//! Start with the runnable programs under `examples/`; each demonstrates
//! one capability end to end.

pub mod cli;
pub mod cov;
pub mod error;
pub mod grid;
pub mod hurst;
pub mod inference;
pub mod kernels;
pub mod linalg;
pub mod montecarlo;
pub mod quad;
pub mod report;
pub mod simulate;
pub mod special;

pub use error::{Result, SfouError};
pub use grid::{build_grid, PathBatch, SeedPolicy, SfouScheme, SubfbmMethod, TimeGrid};
pub use hurst::{derive_constants, HurstParams};
pub use inference::{build_cache, mle, EstimationResult, TransformCache};
pub use montecarlo::{ks_statistic, McConfig};
pub use quad::QuadratureSpec;
pub use simulate::{simulate_sfou, simulate_subfbm};
