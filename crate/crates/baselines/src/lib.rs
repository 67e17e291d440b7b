//! Classifiers that do not learn symmetry directly: Fourier coefficients
//! ranked by augmented variance ratio, and a one-vs-one Gaussian-kernel SVM
//! that also runs on network embeddings.

pub mod avr;
pub mod cache;
pub mod error;
pub mod fourier;
pub mod normalize;
pub mod svm;

pub use error::{BaselineError, Result};

/// Where a feature vector came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Fourier,
    Embedding,
}
