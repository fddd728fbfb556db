//! Evaluation protocol: consecutive folds, merge scenarios, metrics,
//! confusion matrices and PCA of the top-ranked features.

pub mod cv;
pub mod folds;
pub mod metrics;
pub mod pca;
pub mod scenario;

pub use cv::{
    leakage_guard, run_cv, run_cv_with, ClassName, CvOptions, EvaluationReport, FeatureSet, FoldObserver,
    ModelResult, Stage, VariantResult, HARD_VOTE, SOFT_VOTE,
};
pub use folds::{make_folds, make_user_folds, FoldPlan, DEFAULT_FOLDS};
pub use metrics::{classification_report, confusion_matrix, ClassMetrics, ClassificationReport, ConfusionMatrix};
pub use pca::{pca_summary, PcaSummary};
pub use scenario::{apply_scenario, ScenarioSpec};
