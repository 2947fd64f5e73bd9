//! Fragment-quantize-index (FQI) transmission of embeddings over a binary
//! symmetric channel, with benchmark-driven configuration selection and a
//! small control-plane negotiation protocol.
//!
//! Pipeline: an `N`-dimensional [`Embedding`] is cut into `F = N/d`
//! fragments, each fragment is snapped to the nearest of `k = 2^b` shared
//! centroids, and the centroid's `b`-bit codeword is sent. See [`codec`].

pub mod bench;
pub mod channel;
pub mod codebook;
pub mod codec;
pub mod control;
mod error;
pub mod format;
pub mod sla;
mod types;

pub use error::{Error, Result};
pub use types::{validate_config, BitSequence, Embedding, FqiConfig, LabeledDataset, Seed, MAX_BITS};
