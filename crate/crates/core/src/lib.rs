//! Markup-preserving machine translation: document model, segmentation,
//! word alignment, tag projection, translation backends, chrF metrics and
//! an evaluation harness.

pub mod aligner;
pub mod docmodel;
pub mod segmenter;
pub mod tagproject;
pub mod metrics;
pub mod backends;
pub mod pipeline;
pub mod evalharness;
