//! Time and frequency domain feature extraction.
//!
//! Every window is turned into one row of statistics whose layout is fixed
//! by a [`FeatureManifest`]. Downstream stages key off the manifest length,
//! never a hard-coded feature count.

pub mod extract;
pub mod fft;
pub mod manifest;
pub mod stats;

pub use extract::{extract_all, extract_window, FeatureMatrix, FeatureVector, RowMeta};
pub use fft::fft_spectrum;
pub use manifest::{Axis, Domain, FeatureDescriptor, FeatureManifest, Sensor};
pub use stats::{compute_statistic, Statistic};
