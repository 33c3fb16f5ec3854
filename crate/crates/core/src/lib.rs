//! Tensor feature compression and hashing-based retrieval.
//!
//! This crate reduces third-order feature tensors with a single-pass
//! multilinear PCA (per-mode scatter eigenvectors, no iteration), offers a
//! classical PCA baseline on vectorized tensors, binarizes the reduced
//! features with random-hyperplane hashing, and evaluates exhaustive
//! Hamming-distance retrieval by mean average precision.
//!
//! All randomness flows through the seeded generator in [`rng`], so fits,
//! codes, and reports are reproducible bit for bit — including across
//! thread counts. The data-parallel paths in [`par`] reduce over
//! fixed-size chunks for that reason; compile without the `parallel`
//! feature to drop the rayon dependency entirely.

pub mod eig;
pub mod error;
pub mod hash;
pub mod index;
pub mod io;
pub mod mpca;
pub mod par;
pub mod pca;
pub mod pipeline;
pub mod rng;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
