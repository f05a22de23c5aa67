//! Spatial single-cell proteomics to cell sentences and contrastive prompt
//! corpora.
//!
//! The pipeline ingests a cell × protein table with centroids, encodes each
//! cell as its proteins in decreasing order of expression, ranks every
//! cell's neighbors by expression similarity and by spatial distance, and
//! renders positive (similar, nearby) and negative (dissimilar, distant)
//! multi-sentence prompts. A neighbor-vote reference classifier and an
//! evaluation harness run over the same rankings.

pub mod checksum;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod prompting;
pub mod ranking;
pub mod refclass;
pub mod sentence;
pub mod synth;
pub mod warn;

pub use error::{Error, Result};
pub use warn::{WarningKind, Warnings};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Total order on finite floats that treats `-0.0 == 0.0`.
#[inline]
pub(crate) fn cmp_f64(a: f64, b: f64) -> std::cmp::Ordering {
    a.partial_cmp(&b).unwrap_or(std::cmp::Ordering::Equal)
}
