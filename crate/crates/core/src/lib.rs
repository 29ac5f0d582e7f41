//! Background subtraction under spatial downsampling.
//!
//! Two per-pixel background models ([`vibe`] and [`gmm`]) run on grayscale
//! frames that have been shrunk by a compression ratio between 0% and 99%.
//! The resulting foreground masks are scaled back to the source resolution,
//! scored against groundtruth, and the [`bench`] module records how precision,
//! recall, F-measure and segmentation time change relative to the
//! uncompressed run.

pub mod bench;
pub mod datasets;
pub mod error;
pub mod evaluation;
pub mod gmm;
pub mod imaging;
pub mod vibe;

pub use error::{Error, Result};
pub use evaluation::{ConfusionCounts, GroundTruthFrame};
pub use imaging::{BinaryMask, CompressionRatio, GrayFrame};
