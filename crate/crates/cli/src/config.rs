//! Pipeline configuration: one JSON file, overridden by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use har_core::eval::{FeatureSet, ScenarioSpec, DEFAULT_FOLDS};
use har_core::ingest::IngestConfig;
use har_core::models::{ModelKind, ModelSpecs};
use har_core::preprocess::{ScaleMode, DEFAULT_N_TREES, DEFAULT_TOP_K};
use har_core::segment::DEFAULT_WINDOW_LEN;
use har_core::synth::SynthSpec;

pub const DEFAULT_SEED: u64 = 42;

/// Where inputs are read from and artifacts are written to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Directory holding the recordings.
    pub data_dir: PathBuf,
    /// Session manifest; defaults to `sessions.csv` inside `data_dir`.
    pub sessions: Option<PathBuf>,
    /// Feature matrix CSV written by `extract` and read by later stages.
    pub features: PathBuf,
    /// Directory for reports.
    pub out_dir: PathBuf,
    /// Custom feature manifest; the built-in catalogue when absent.
    pub feature_manifest: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            data_dir: PathBuf::from("data"),
            sessions: None,
            features: PathBuf::from("features.csv"),
            out_dir: PathBuf::from("results"),
            feature_manifest: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankingConfig {
    pub n_trees: usize,
}

impl Default for RankingConfig {
    fn default() -> Self {
        RankingConfig {
            n_trees: DEFAULT_N_TREES,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaConfig {
    /// Number of top-ranked features projected.
    pub top: usize,
    pub components: usize,
}

impl Default for PcaConfig {
    fn default() -> Self {
        PcaConfig { top: 10, components: 3 }
    }
}

/// A scenario given either by preset name or as an explicit merge map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioEntry {
    Name(String),
    Spec(ScenarioSpec),
}

impl ScenarioEntry {
    pub fn resolve(&self) -> Result<ScenarioSpec> {
        let spec = match self {
            ScenarioEntry::Name(name) => name.parse()?,
            ScenarioEntry::Spec(spec) => spec.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    /// Base seed for every stochastic stage, including the generator.
    pub seed: u64,
    /// Synthetic dataset parameters; its own seed is replaced by `seed`.
    pub synth: SynthSpec,
    pub ingest: IngestConfig,
    pub window_len: usize,
    pub scale: ScaleMode,
    pub ranking: RankingConfig,
    pub k_selected: usize,
    /// Feature-set sizes evaluated; `top<k_selected>` and `all` when absent.
    pub feature_sets: Option<Vec<String>>,
    pub folds: usize,
    pub group_by_user: bool,
    pub models: Vec<String>,
    pub specs: ModelSpecs,
    pub scenarios: Vec<ScenarioEntry>,
    pub pca: PcaConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            paths: Paths::default(),
            seed: DEFAULT_SEED,
            synth: SynthSpec::default(),
            ingest: IngestConfig::default(),
            window_len: DEFAULT_WINDOW_LEN,
            scale: ScaleMode::Standardize,
            ranking: RankingConfig::default(),
            k_selected: DEFAULT_TOP_K,
            feature_sets: None,
            folds: DEFAULT_FOLDS,
            group_by_user: false,
            models: ["gbt", "svm", "mlp"].map(String::from).to_vec(),
            specs: ModelSpecs::default(),
            scenarios: ScenarioSpec::presets()
                .into_iter()
                .map(|s| ScenarioEntry::Name(s.name))
                .collect(),
            pca: PcaConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len == 0 {
            bail!("window_len must be positive");
        }
        if self.k_selected == 0 {
            bail!("k_selected must be positive");
        }
        if self.folds < 2 {
            bail!("folds must be at least 2");
        }
        if self.ranking.n_trees == 0 {
            bail!("ranking.n_trees must be positive");
        }
        if self.pca.components == 0 || self.pca.top < self.pca.components {
            bail!("pca needs 1 <= components <= top");
        }
        let (low, high) = self.ingest.rate_band;
        if !(low > 0.0 && low <= high) {
            bail!("ingest.rate_band must satisfy 0 < low <= high");
        }
        if !(0.0..=1.0).contains(&self.ingest.max_drop_fraction) {
            bail!("ingest.max_drop_fraction must lie in [0, 1]");
        }
        self.synth_spec().validate()?;
        self.model_kinds()?;
        self.feature_set_list()?;
        self.scenario_list()?;
        self.specs.gbt.validate()?;
        self.specs.svm.validate()?;
        self.specs.mlp.validate()?;
        Ok(())
    }

    pub fn synth_spec(&self) -> SynthSpec {
        SynthSpec {
            seed: self.seed,
            ..self.synth.clone()
        }
    }

    pub fn model_kinds(&self) -> Result<Vec<ModelKind>> {
        if self.models.is_empty() {
            bail!("at least one model is required");
        }
        let mut kinds = Vec::new();
        for name in &self.models {
            let kind: ModelKind = name.parse()?;
            if kinds.contains(&kind) {
                bail!("model '{name}' listed twice");
            }
            kinds.push(kind);
        }
        Ok(kinds)
    }

    pub fn feature_set_list(&self) -> Result<Vec<FeatureSet>> {
        let sets = match &self.feature_sets {
            None => vec![FeatureSet::Top(self.k_selected), FeatureSet::All],
            Some(names) => names.iter().map(|n| n.parse()).collect::<har_core::Result<Vec<_>>>()?,
        };
        if sets.is_empty() {
            bail!("at least one feature set is required");
        }
        Ok(sets)
    }

    pub fn scenario_list(&self) -> Result<Vec<ScenarioSpec>> {
        if self.scenarios.is_empty() {
            bail!("at least one scenario is required");
        }
        let list = self.scenarios.iter().map(ScenarioEntry::resolve).collect::<Result<Vec<_>>>()?;
        for (i, s) in list.iter().enumerate() {
            if list[..i].iter().any(|t| t.name == s.name) {
                bail!("scenario '{}' listed twice", s.name);
            }
        }
        Ok(list)
    }

    pub fn sessions_path(&self) -> PathBuf {
        self.paths
            .sessions
            .clone()
            .unwrap_or_else(|| self.paths.data_dir.join(har_core::ingest::SESSION_MANIFEST))
    }
}
