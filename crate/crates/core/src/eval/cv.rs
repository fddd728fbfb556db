//! Cross-validated evaluation of the full preprocessing and model stack.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{make_folds, make_user_folds, FoldPlan, DEFAULT_FOLDS};
use super::metrics::{classification_report, confusion_matrix, ClassificationReport, ConfusionMatrix};
use super::pca::{pca_summary, PcaSummary};
use super::scenario::ScenarioSpec;
use crate::error::{HarError, Result};
use crate::features::FeatureMatrix;
use crate::ingest::ActivityLabel;
use crate::models::{encode_labels, hard_vote, soft_vote, ClassProbs, Learner, ModelKind, ModelSpecs, StandardLearner};
use crate::preprocess::{
    apply_scaler, fit_scaler, rank_features, select_top_k, ImportanceRanking, ScaleMode, DEFAULT_N_TREES,
    DEFAULT_TOP_K,
};
use crate::rng::{derive_seed, tag};

pub const SOFT_VOTE: &str = "soft_vote";
pub const HARD_VOTE: &str = "hard_vote";

/// Which columns the models see.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    /// The `k` highest-ranked features of the training fold.
    Top(usize),
    /// Every column of the matrix.
    All,
}

impl FeatureSet {
    pub fn name(self) -> String {
        match self {
            FeatureSet::Top(k) => format!("top{k}"),
            FeatureSet::All => "all".into(),
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for FeatureSet {
    type Err = HarError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "all" || s == "full" {
            return Ok(FeatureSet::All);
        }
        let digits = s.strip_prefix("top").unwrap_or(&s);
        match digits.parse::<usize>() {
            Ok(k) if k > 0 => Ok(FeatureSet::Top(k)),
            _ => Err(HarError::InvalidParameter(format!(
                "unknown feature set '{s}' (expected all or top<k>)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvOptions {
    pub n_folds: usize,
    pub feature_sets: Vec<FeatureSet>,
    pub scale: ScaleMode,
    pub n_trees: usize,
    /// Keep every user's rows inside a single fold.
    pub group_by_user: bool,
    /// Number of top-ranked features fed to the PCA summary.
    pub pca_top: usize,
    pub pca_components: usize,
    pub seed: u64,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            n_folds: DEFAULT_FOLDS,
            feature_sets: vec![FeatureSet::Top(DEFAULT_TOP_K), FeatureSet::All],
            scale: ScaleMode::Standardize,
            n_trees: DEFAULT_N_TREES,
            group_by_user: false,
            pca_top: 10,
            pca_components: 3,
            seed: 0,
        }
    }
}

/// Pipeline steps that must only ever see training rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stage {
    Scale,
    Rank,
    Train,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Scale => "scale",
            Stage::Rank => "rank",
            Stage::Train => "train",
        }
    }
}

/// Receives the row indices handed to every guarded stage.
pub trait FoldObserver: Sync {
    fn observe(&self, stage: Stage, fold: usize, rows: &[usize]);
}

/// Fails if any of `rows` lies in the validation block `test`.
pub fn leakage_guard(stage: Stage, fold: usize, rows: &[usize], test: &Range<usize>) -> Result<()> {
    match rows.iter().find(|r| test.contains(r)) {
        Some(&row) => Err(HarError::Leakage {
            stage: stage.name().into(),
            fold,
            row,
        }),
        None => Ok(()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub name: String,
    pub fold_accuracy: Vec<f64>,
    pub mean_fold_accuracy: f64,
    /// Accuracy of the predictions pooled over all folds.
    pub accuracy: f64,
    pub report: ClassificationReport,
    pub confusion: ConfusionMatrix,
    /// Pooled predictions in row order.
    pub predictions: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantResult {
    pub feature_set: FeatureSet,
    pub n_features: usize,
    /// Base models first, then soft and hard voting when there are at
    /// least two base models.
    pub models: Vec<ModelResult>,
    /// Per fold, base model names from most to least accurate on training
    /// rows; this order breaks hard-vote ties.
    pub hard_vote_priority: Vec<Vec<String>>,
}

impl VariantResult {
    pub fn model(&self, name: &str) -> Option<&ModelResult> {
        self.models.iter().find(|m| m.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassName {
    pub code: u8,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub scenario: ScenarioSpec,
    pub classes: Vec<ClassName>,
    pub n_rows: usize,
    pub n_features: usize,
    pub folds: FoldPlan,
    pub options: CvOptions,
    /// Merged label of every row.
    pub labels: Vec<u8>,
    pub variants: Vec<VariantResult>,
    /// Importances averaged over the folds' training rankings.
    pub importance: ImportanceRanking,
    pub pca: PcaSummary,
}

impl EvaluationReport {
    pub fn class_name(&self, code: u8) -> String {
        self.classes
            .iter()
            .find(|c| c.code == code)
            .map_or_else(|| code.to_string(), |c| c.name.clone())
    }

    pub fn variant(&self, set: FeatureSet) -> Option<&VariantResult> {
        self.variants.iter().find(|v| v.feature_set == set)
    }

    pub fn importance_top(&self, n: usize) -> Vec<(String, f64)> {
        self.importance.top(n)
    }
}

struct VariantFold {
    n_features: usize,
    predictions: Vec<Vec<u8>>,
    priority: Vec<usize>,
}

struct FoldOutcome {
    ranking: ImportanceRanking,
    variants: Vec<VariantFold>,
}

fn rows_of(x: ArrayView2<f64>, rows: &[usize]) -> Array2<f64> {
    x.select(Axis(0), rows)
}

fn accuracy(a: &[u8], b: &[u8]) -> f64 {
    a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len().max(1) as f64
}

/// Cross-validate the built-in classifiers.
pub fn run_cv(
    data: &FeatureMatrix,
    scenario: &ScenarioSpec,
    models: &[ModelKind],
    specs: &ModelSpecs,
    options: &CvOptions,
) -> Result<EvaluationReport> {
    let learners: Vec<StandardLearner> = models
        .iter()
        .map(|&kind| StandardLearner {
            kind,
            specs: specs.clone(),
        })
        .collect();
    let refs: Vec<&dyn Learner> = learners.iter().map(|l| l as &dyn Learner).collect();
    run_cv_with(data, scenario, &refs, options, None)
}

/// Cross-validate arbitrary learners. Per fold: fit the scaler, rank the
/// features and train every learner on training rows only, then predict the
/// validation block and vote. Folds run concurrently and are merged in order.
pub fn run_cv_with(
    data: &FeatureMatrix,
    scenario: &ScenarioSpec,
    learners: &[&dyn Learner],
    options: &CvOptions,
    observer: Option<&dyn FoldObserver>,
) -> Result<EvaluationReport> {
    scenario.validate()?;
    let n = data.n_rows();
    let p = data.n_features();
    if n == 0 || p == 0 {
        return Err(HarError::EmptyInput("feature matrix".into()));
    }
    if learners.is_empty() {
        return Err(HarError::InvalidParameter("no models to evaluate".into()));
    }
    if options.feature_sets.is_empty() {
        return Err(HarError::InvalidParameter("no feature sets to evaluate".into()));
    }
    if data.rows.windows(2).any(|w| w[0].sort_key() > w[1].sort_key()) {
        return Err(HarError::InvalidParameter(
            "rows must be in canonical (user, day, activity, start) order".into(),
        ));
    }
    let labels: Vec<u8> = data.rows.iter().map(|r| scenario.map(r.label).code() as u8).collect();
    let (class_codes, _) = encode_labels(&labels);
    if class_codes.len() < 2 {
        return Err(HarError::SingleClass(class_codes.len()));
    }
    let plan = if options.group_by_user {
        let users: Vec<String> = data.rows.iter().map(|r| r.user_id.clone()).collect();
        make_user_folds(&users, options.n_folds)?
    } else {
        make_folds(n, options.n_folds)?
    };
    let x = data.values.view();

    let outcomes: Vec<FoldOutcome> = (0..plan.k())
        .into_par_iter()
        .map(|f| run_fold(f, &plan, x, &labels, &data.feature_ids, learners, options, observer))
        .collect::<Result<_>>()?;

    let mut names: Vec<String> = learners.iter().map(|l| l.name()).collect();
    if learners.len() >= 2 {
        names.push(SOFT_VOTE.into());
        names.push(HARD_VOTE.into());
    }
    let mut variants = Vec::with_capacity(options.feature_sets.len());
    for (v, &set) in options.feature_sets.iter().enumerate() {
        let mut models = Vec::with_capacity(names.len());
        for (m, name) in names.iter().enumerate() {
            let mut pooled = Vec::with_capacity(n);
            let mut fold_accuracy = Vec::with_capacity(plan.k());
            for (f, out) in outcomes.iter().enumerate() {
                let pred = &out.variants[v].predictions[m];
                fold_accuracy.push(accuracy(pred, &labels[plan.folds[f].clone()]));
                pooled.extend_from_slice(pred);
            }
            let report = classification_report(&labels, &pooled)?;
            let confusion = confusion_matrix(&labels, &pooled, Some(&class_union_with(&class_codes, &pooled)))?;
            models.push(ModelResult {
                name: name.clone(),
                mean_fold_accuracy: fold_accuracy.iter().sum::<f64>() / fold_accuracy.len() as f64,
                fold_accuracy,
                accuracy: report.accuracy,
                report,
                confusion,
                predictions: pooled,
            });
        }
        variants.push(VariantResult {
            feature_set: set,
            n_features: outcomes[0].variants[v].n_features,
            models,
            hard_vote_priority: outcomes
                .iter()
                .map(|o| o.variants[v].priority.iter().map(|&i| names[i].clone()).collect())
                .collect(),
        });
    }

    let rankings: Vec<ImportanceRanking> = outcomes.into_iter().map(|o| o.ranking).collect();
    let mut importance = ImportanceRanking::mean_of(&rankings)?;
    importance.seed = options.seed;

    let top: Vec<String> = importance.ranked.iter().take(options.pca_top.clamp(1, p)).cloned().collect();
    let sub = data.select_columns(&top)?;
    let scaler = fit_scaler(sub.values.view(), ScaleMode::Standardize)?;
    let scaled = apply_scaler(sub.values.view(), &scaler)?;
    let pca = pca_summary(scaled.view(), &top, options.pca_components.clamp(1, top.len()))?;

    Ok(EvaluationReport {
        scenario: scenario.clone(),
        classes: class_codes
            .iter()
            .map(|&code| ClassName {
                code,
                name: ActivityLabel::from_code(code as usize)
                    .map_or_else(|| code.to_string(), |l| scenario.class_name(l)),
            })
            .collect(),
        n_rows: n,
        n_features: p,
        folds: plan,
        options: options.clone(),
        labels,
        variants,
        importance,
        pca,
    })
}

fn class_union_with(classes: &[u8], pred: &[u8]) -> Vec<u8> {
    let mut c: Vec<u8> = classes.iter().chain(pred).copied().collect();
    c.sort_unstable();
    c.dedup();
    c
}

#[allow(clippy::too_many_arguments)]
fn run_fold(
    fold: usize,
    plan: &FoldPlan,
    x: ArrayView2<f64>,
    labels: &[u8],
    feature_ids: &[String],
    learners: &[&dyn Learner],
    options: &CvOptions,
    observer: Option<&dyn FoldObserver>,
) -> Result<FoldOutcome> {
    let test = plan.folds[fold].clone();
    let train_rows = plan.train_rows(fold);
    let test_rows = plan.test_rows(fold);
    let guard = |stage: Stage| -> Result<()> {
        leakage_guard(stage, fold, &train_rows, &test)?;
        if let Some(o) = observer {
            o.observe(stage, fold, &train_rows);
        }
        Ok(())
    };
    let y_train: Vec<u8> = train_rows.iter().map(|&r| labels[r]).collect();
    let (_, y_index) = encode_labels(&y_train);
    if y_index.iter().all(|&c| c == y_index[0]) {
        return Err(HarError::SingleClass(1));
    }

    guard(Stage::Scale)?;
    let scaler = fit_scaler(rows_of(x, &train_rows).view(), options.scale)?;
    let x_train = apply_scaler(rows_of(x, &train_rows).view(), &scaler)?;
    let x_test = apply_scaler(rows_of(x, &test_rows).view(), &scaler)?;

    guard(Stage::Rank)?;
    let rank_seed = derive_seed(options.seed, &[fold as u64, tag("rank")]);
    let ranking = rank_features(x_train.view(), &y_index, feature_ids, options.n_trees, rank_seed)?;

    let mut variants = Vec::with_capacity(options.feature_sets.len());
    for &set in &options.feature_sets {
        let cols: Vec<usize> = match set {
            FeatureSet::All => (0..feature_ids.len()).collect(),
            FeatureSet::Top(k) => select_top_k(&ranking, k)
                .ids
                .iter()
                .map(|id| feature_ids.iter().position(|f| f == id).expect("ranked id present"))
                .collect(),
        };
        let tr = x_train.select(Axis(1), &cols);
        let te = x_test.select(Axis(1), &cols);

        guard(Stage::Train)?;
        let fitted: Vec<(Vec<u8>, Array2<f64>, Vec<u8>, f64)> = learners
            .par_iter()
            .map(|l| {
                let seed = derive_seed(options.seed, &[fold as u64, tag(&l.name())]);
                let model = l.fit(tr.view(), &y_train, seed)?;
                let probs = model.predict_proba(te.view())?;
                let pred = model.predict(te.view())?;
                let train_acc = accuracy(&model.predict(tr.view())?, &y_train);
                Ok((model.classes().to_vec(), probs, pred, train_acc))
            })
            .collect::<Result<_>>()?;

        let mut predictions: Vec<Vec<u8>> = fitted.iter().map(|f| f.2.clone()).collect();
        let mut priority: Vec<usize> = (0..fitted.len()).collect();
        priority.sort_by(|&a, &b| fitted[b].3.total_cmp(&fitted[a].3).then(a.cmp(&b)));
        if fitted.len() >= 2 {
            let tables: Vec<ClassProbs> = fitted
                .iter()
                .map(|f| ClassProbs {
                    classes: &f.0,
                    probs: f.1.view(),
                })
                .collect();
            let soft = soft_vote(&tables)?;
            let hard = hard_vote(&predictions, &priority)?;
            predictions.push(soft);
            predictions.push(hard);
        }
        variants.push(VariantFold {
            n_features: cols.len(),
            predictions,
            priority,
        });
    }
    Ok(FoldOutcome { ranking, variants })
}
