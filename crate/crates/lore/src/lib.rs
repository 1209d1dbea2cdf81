//! Implicit ensembles for tabular MLPs via low-rank weight adapters.
//!
//! A single network carries `K` ensemble members that share one weight
//! matrix per linear block. Each member perturbs the shared weight with a
//! rank-`r` identity-residual multiplicative adapter,
//!
//! ```text
//! W_k = W ⊙ (1 + A_k B_kᵀ)
//! ```
//!
//! together with two ablations: the rank-1 multiplicative mask
//! `W ⊙ (s_k r_kᵀ)` and the additive adapter `W + A_k B_kᵀ`. The crate
//! provides:
//!
//! - [`math`]: a dense row-major matrix type generic over the scalar,
//!   a counter-based RNG with portable streams, and small numeric kernels
//!   (softmax, numerical rank, samplers);
//! - [`layers`]: the ensemble linear layer family with factored forward
//!   and closed-form backward passes, piecewise-linear numeric embeddings,
//!   and fused ReLU/dropout;
//! - [`model`]: the full `K`-member MLP with member-wise losses,
//!   ensemble prediction, and exact-round-trip checkpoints;
//! - [`trainer`]: AdamW with decoupled weight decay, global-norm gradient
//!   clipping, early stopping, and best-epoch weight restoration;
//! - [`metrics`]: ensemble diversity and calibration measures (pairwise
//!   symmetric KL, argmax disagreement, ambiguity decomposition, ECE);
//! - [`expressivity`]: constructive rank machinery relating rank-1 masks
//!   to rank-r adapters, including a ratio-rank witness;
//! - [`data`]: CSV ingestion with a schema sidecar, deterministic splits,
//!   standardization, and synthetic generators;
//! - [`harness`]: grid/axis sweeps, the multiplicative-vs-additive gap
//!   experiment, random-search HPO, and CSV/JSON-lines export.
//!
//! Everything above the math kernels is pinned to `f64` through the
//! [`Real`] and [`Mat`] aliases; the tight tolerances this crate is tested
//! under are not meaningful in single precision.

// Index-based loops mirror the subscripts the kernels are written in, and
// `!(x > 0.0)`-style guards deliberately treat NaN as invalid input.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod expressivity;
pub mod harness;
pub mod layers;
pub mod math;
pub mod metrics;
pub mod model;
pub mod trainer;

pub use error::Error;

/// Scalar type used by everything above the math kernels.
pub type Real = f64;

/// Dense row-major matrix over [`Real`].
pub type Mat = math::DenseMatrix<Real>;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
