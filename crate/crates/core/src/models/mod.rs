//! Classifiers and their combination by voting.
//!
//! Trainers work on class indices `0..K`; [`TrainedModel`] maps those back
//! to the class codes seen in training, which also fix the column order of
//! every probability table.

pub mod gbt;
pub mod mlp;
pub mod svm;
pub mod voting;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{HarError, Result};
use crate::rng::{derive_seed, tag};

pub use gbt::{train_gbt, GbtModel, GbtSpec};
pub use mlp::{train_mlp, MlpModel, MlpSpec};
pub use svm::{train_svm, Gamma, SvmModel, SvmSpec};
pub use voting::{hard_vote, soft_vote, soft_vote_proba, ClassProbs};

pub(crate) fn check_width(x: ArrayView2<f64>, n_features: usize) -> Result<()> {
    if x.ncols() != n_features {
        return Err(HarError::ShapeMismatch {
            expected: n_features,
            got: x.ncols(),
        });
    }
    Ok(())
}

pub(crate) fn check_training(x: ArrayView2<f64>, y: &[usize], n_classes: usize) -> Result<()> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(HarError::EmptyInput("training matrix".into()));
    }
    if y.len() != x.nrows() {
        return Err(HarError::ShapeMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(HarError::NonFinite("training matrix".into()));
    }
    let mut counts = vec![0usize; n_classes];
    for &c in y {
        if c >= n_classes {
            return Err(HarError::InvalidParameter(format!("class index {c} >= {n_classes}")));
        }
        counts[c] += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(HarError::SingleClass(present));
    }
    if present < n_classes {
        return Err(HarError::InvalidParameter("every class index must occur in training".into()));
    }
    Ok(())
}

/// Numerically stable in-place softmax of every row.
pub(crate) fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in row.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gbt,
    Svm,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Gbt, ModelKind::Svm, ModelKind::Mlp];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gbt => "gbt",
            ModelKind::Svm => "svm",
            ModelKind::Mlp => "mlp",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = HarError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gbt" | "xgb" | "gb" => Ok(ModelKind::Gbt),
            "svm" => Ok(ModelKind::Svm),
            "mlp" | "nn" => Ok(ModelKind::Mlp),
            other => Err(HarError::InvalidParameter(format!("unknown model '{other}'"))),
        }
    }
}

/// Hyperparameters for all three classifiers. Seeds inside the specs are
/// overwritten by the seed passed to [`train_model`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpecs {
    pub gbt: GbtSpec,
    pub svm: SvmSpec,
    pub mlp: MlpSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelBody {
    Gbt(GbtModel),
    Svm(SvmModel),
    Mlp(MlpModel),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    /// Class code of each probability column.
    pub classes: Vec<u8>,
    pub n_features: usize,
    pub body: ModelBody,
}

pub const MODEL_FORMAT: &str = "har-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: TrainedModel,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self.body {
            ModelBody::Gbt(_) => ModelKind::Gbt,
            ModelBody::Svm(_) => ModelKind::Svm,
            ModelBody::Mlp(_) => ModelKind::Mlp,
        }
    }

    /// Probability table with one column per entry of `classes`.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_width(x, self.n_features)?;
        if x.nrows() == 0 {
            return Ok(Array2::zeros((0, self.classes.len())));
        }
        match &self.body {
            ModelBody::Gbt(m) => m.predict_proba(x),
            ModelBody::Svm(m) => m.predict_proba(x),
            ModelBody::Mlp(m) => m.predict_proba(x),
        }
    }

    /// Predicted class codes. The SVM uses one-vs-one voting on its
    /// decision values; the others take the probability argmax.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<u8>> {
        check_width(x, self.n_features)?;
        if x.nrows() == 0 {
            return Ok(Vec::new());
        }
        let idx: Vec<usize> = match &self.body {
            ModelBody::Svm(m) => m.predict(x)?,
            _ => self
                .predict_proba(x)?
                .rows()
                .into_iter()
                .map(|r| argmax(r.iter().copied()))
                .collect(),
        };
        Ok(idx.into_iter().map(|i| self.classes[i]).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(s)?;
        if f.format != MODEL_FORMAT || f.version != MODEL_VERSION {
            return Err(HarError::Parse(format!(
                "unsupported model file {} v{}",
                f.format, f.version
            )));
        }
        Ok(f.model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| HarError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| HarError::io(path, e))?;
        Self::from_json(&s)
    }
}

/// Sorted distinct codes and the index of each label among them.
pub fn encode_labels(labels: &[u8]) -> (Vec<u8>, Vec<usize>) {
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let y = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label present"))
        .collect();
    (classes, y)
}

/// Train one classifier on rows `x` with class codes `labels`.
pub fn train_model(
    kind: ModelKind,
    x: ArrayView2<f64>,
    labels: &[u8],
    specs: &ModelSpecs,
    seed: u64,
) -> Result<TrainedModel> {
    if labels.len() != x.nrows() {
        return Err(HarError::ShapeMismatch {
            expected: x.nrows(),
            got: labels.len(),
        });
    }
    let (classes, y) = encode_labels(labels);
    let k = classes.len();
    let seed = derive_seed(seed, &[tag(kind.name())]);
    let body = match kind {
        ModelKind::Gbt => ModelBody::Gbt(train_gbt(x, &y, k, &GbtSpec { seed, ..specs.gbt.clone() })?),
        ModelKind::Svm => ModelBody::Svm(train_svm(x, &y, k, &specs.svm)?),
        ModelKind::Mlp => ModelBody::Mlp(train_mlp(x, &y, k, &MlpSpec { seed, ..specs.mlp.clone() })?),
    };
    Ok(TrainedModel {
        classes,
        n_features: x.ncols(),
        body,
    })
}

/// A fitted classifier as seen by the evaluation driver.
pub trait Predictor: Send + Sync {
    /// Class code of each probability column.
    fn classes(&self) -> &[u8];
    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>>;
    fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<u8>> {
        let p = self.predict_proba(x)?;
        Ok(p.rows()
            .into_iter()
            .map(|r| self.classes()[argmax(r.iter().copied())])
            .collect())
    }
    /// The underlying model, when it can be serialised.
    fn as_trained(&self) -> Option<&TrainedModel> {
        None
    }
}

impl Predictor for TrainedModel {
    fn classes(&self) -> &[u8] {
        &self.classes
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        TrainedModel::predict_proba(self, x)
    }

    fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<u8>> {
        TrainedModel::predict(self, x)
    }

    fn as_trained(&self) -> Option<&TrainedModel> {
        Some(self)
    }
}

/// Something that can be fitted on labelled rows.
pub trait Learner: Send + Sync {
    fn name(&self) -> String;
    fn fit(&self, x: ArrayView2<f64>, labels: &[u8], seed: u64) -> Result<Box<dyn Predictor>>;
}

/// One of the built-in classifiers with its hyperparameters.
#[derive(Clone, Debug)]
pub struct StandardLearner {
    pub kind: ModelKind,
    pub specs: ModelSpecs,
}

impl Learner for StandardLearner {
    fn name(&self) -> String {
        self.kind.name().to_string()
    }

    fn fit(&self, x: ArrayView2<f64>, labels: &[u8], seed: u64) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(train_model(self.kind, x, labels, &self.specs, seed)?))
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn label_encoding_and_kind_names() {
        let (classes, y) = encode_labels(&[3, 0, 3, 5]);
        assert_eq!(classes, vec![0, 3, 5]);
        assert_eq!(y, vec![1, 0, 1, 2]);
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert!("forest".parse::<ModelKind>().is_err());
    }

    #[test]
    fn training_checks() {
        let x = array![[0.0], [1.0], [2.0]];
        assert!(matches!(check_training(x.view(), &[0, 0, 0], 1), Err(HarError::SingleClass(1))));
        assert!(check_training(x.view(), &[0, 1], 2).is_err());
        assert!(check_training(x.view(), &[0, 2, 0], 3).is_err());
        let mut bad = x.clone();
        bad[[1, 0]] = f64::NAN;
        assert!(matches!(check_training(bad.view(), &[0, 1, 0], 2), Err(HarError::NonFinite(_))));
        assert!(check_training(x.view(), &[0, 1, 0], 2).is_ok());
    }

    #[test]
    fn every_model_round_trips_and_predicts_valid_distributions() {
        let (x, y) = testdata::blobs(20, 3, 4, 6.0, 1);
        let labels: Vec<u8> = y.iter().map(|&c| [1u8, 3, 4][c]).collect();
        let specs = ModelSpecs {
            gbt: GbtSpec {
                n_estimators: 20,
                ..GbtSpec::default()
            },
            mlp: MlpSpec {
                epochs: 30,
                ..MlpSpec::default()
            },
            ..ModelSpecs::default()
        };
        for kind in ModelKind::ALL {
            let m = train_model(kind, x.view(), &labels, &specs, 7).unwrap();
            assert_eq!(m.kind(), kind);
            assert_eq!(m.classes, vec![1, 3, 4]);
            let p = m.predict_proba(x.view()).unwrap();
            for row in p.rows() {
                assert!((row.sum() - 1.0).abs() < 1e-9);
                assert!(row.iter().all(|v| *v >= 0.0));
            }
            let back = TrainedModel::from_json(&m.to_json().unwrap()).unwrap();
            assert_eq!(back.predict_proba(x.view()).unwrap(), p);
            assert_eq!(back.predict(x.view()).unwrap(), m.predict(x.view()).unwrap());
            assert_eq!(m.predict_proba(Array2::zeros((0, 4)).view()).unwrap().dim(), (0, 3));
            assert!(matches!(
                m.predict_proba(Array2::zeros((2, 5)).view()),
                Err(HarError::ShapeMismatch { expected: 4, got: 5 })
            ));
            let again = train_model(kind, x.view(), &labels, &specs, 7).unwrap();
            assert_eq!(again, m);
        }
    }

    #[test]
    fn model_file_version_is_checked() {
        assert!(TrainedModel::from_json(r#"{"format":"other","version":1,"model":{}}"#).is_err());
    }
}
