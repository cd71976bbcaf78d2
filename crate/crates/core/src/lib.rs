//! Automatic latent-dimensionality estimation for nonnegative matrices.
//!
//! The pipeline factorizes resampled copies of a data matrix over a range of
//! candidate inner dimensions K, measures the stability of the resulting
//! basis vectors with balanced cosine clustering and silhouette statistics,
//! and classifies sliding 7-K windows of those statistics with a small
//! multilayer perceptron. Window classifications are aggregated by voting
//! into a single K estimate.
//!
//! Modules follow the pipeline stages:
//!
//! - [`matrix`], [`stats`], [`rng`]: dense nonnegative matrices, vector
//!   statistics, seeded randomness
//! - [`nmf`]: multiplicative-update NMF at a fixed K
//! - [`cluster`], [`scan`]: the resampled-ensemble scan and its per-K
//!   statistics
//! - [`synth`]: labeled synthetic matrices and the swimmer fixture
//! - [`window`]: window feature extraction and labeling
//! - [`mlp`]: the 7-class window classifier
//! - [`pipeline`]: end-to-end rank prediction, voting, and baselines

pub mod cluster;
pub mod error;
pub mod matrix;
pub mod mlp;
pub mod nmf;
pub mod pipeline;
pub mod rng;
pub mod scan;
pub mod stats;
pub mod synth;
pub mod window;

pub use error::{Error, ErrorCategory, Result};
pub use matrix::NonNegMatrix;
pub use nmf::{nmf_factorize, relative_error, FactorPair, NmfConfig};
pub use rng::RngSeed;
pub use scan::{scan, KScanRecord, ScanConfig};

