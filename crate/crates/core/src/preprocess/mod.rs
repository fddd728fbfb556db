//! Feature scaling, random-forest importance ranking and top-k selection.

pub mod forest;
pub mod scaler;

pub use forest::{
    rank_features, select_top_k, ImportanceRanking, SelectionMask, DEFAULT_N_TREES, DEFAULT_TOP_K,
};
pub use scaler::{apply_scaler, fit_scaler, ScaleMode, ScalerParams};
