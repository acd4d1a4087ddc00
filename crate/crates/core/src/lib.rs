//! Self-supervised ECG representation learning by temporal/spatial reverse
//! detection.
//!
//! An encoder is pretrained to tell original ECG segments from their
//! time-reversed, amplitude-flipped and doubly flipped copies, then reused
//! for atrial-fibrillation detection. Random projection, PCA, autoencoder
//! and contrastive baselines, evaluation metrics and relevance propagation
//! live alongside.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod eval;
pub mod ingest;
pub mod interpret;
pub mod nn;
pub mod pipelines;
pub mod rng;
pub mod signal;
pub mod synth;
pub mod transforms;

pub use error::{Error, Result};
pub use signal::{EcgRecord, Label, LabeledSegment, Segment, SEGMENT_LEN};
