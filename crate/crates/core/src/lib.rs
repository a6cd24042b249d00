//! Grokking laboratory for modular addition.
//!
//! Small bias-free MLPs are trained on `(i + j) % P` classification from
//! concatenated one-hot inputs. The crate provides the dataset machinery,
//! the network with its polynomial/odd activation family, a closed-form
//! cosine solution used as a correctness oracle, weight diagnostics
//! (entropy, circular autocorrelation, Fourier spectra, dead-weight
//! fractions), PCA projection analysis with cluster-based factoring of
//! non-prime moduli, and a config-driven experiment runner.
//!
//! The `groklab` binary exposes all of it as subcommands; see the README.

pub mod analytic;
pub mod dataset;
pub mod experiment;
pub mod metrics;
pub mod network;
pub mod pca;
pub mod plot;

mod error;

pub use error::{Error, Result};

/// Version stamp carried by every JSON document this crate writes
/// (configs, checkpoints, summaries, metric reports).
pub const FORMAT_VERSION: u32 = 1;
