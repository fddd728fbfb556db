//! Human activity recognition from smartphone accelerometer and gyroscope
//! recordings.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! 1. [`ingest`]: parse CSV recordings, validate sampling, align tracks.
//! 2. [`segment`]: cut series into fixed-length, non-overlapping windows.
//! 3. [`features`]: time and frequency domain statistics per window.
//! 4. [`preprocess`]: scaling, random-forest importance ranking, top-k selection.
//! 5. [`models`]: gradient-boosted trees, RBF SVM, MLP and soft/hard voting.
//! 6. [`eval`]: consecutive-fold cross-validation, metrics, confusion, PCA.
//!
//! [`synth`] generates a deterministic synthetic gait dataset so the whole
//! pipeline can be exercised without private recordings.

pub mod error;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod models;
pub mod preprocess;
pub mod rng;
pub mod segment;
pub mod synth;

pub use error::{HarError, Result};
