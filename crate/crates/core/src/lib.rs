//! Volumetric airway segmentation with long-term slice propagation:
//! phantoms, volume IO, the two-stage network, metrics and the
//! training/inference pipeline.

pub mod error;
pub mod kv;
pub mod metrics;
pub mod model;
pub mod phantom;
pub mod pipeline;
pub mod volio;

pub use error::{CoreError, ErrorCategory, FormatError, Result};
