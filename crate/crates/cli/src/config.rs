use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stylodrift::archetypes::{BootstrapConfig, NamingConfig};
use stylodrift::corpus::Granularity;
use stylodrift::stylometry::FeatureConfig;
use stylodrift::synth::SynthCorpusConfig;
use stylodrift::{BoundaryConfig, FilterConfig, HdbscanConfig, PeltConfig, QuotaConfig};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Seeds {
    /// Sampling and synthetic data.
    pub main: u64,
    /// Bootstrap resampling.
    pub robustness: u64,
    /// Permutation re-clustering check.
    pub validation: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            main: 42,
            robustness: 1337,
            validation: 2024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Corpus JSONL. Defaults to the run's `synth/corpus.jsonl`.
    pub corpus: Option<PathBuf>,
    /// Scorer output JSONL. Defaults to the run's `synth/logprobs.jsonl`.
    pub logprobs: Option<PathBuf>,
    pub bot_list: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub judge_model: String,
    pub current_model: String,
    pub filter: FilterConfig,
    pub boundary: BoundaryConfig,
    /// Stratified sampling is applied only when quotas are given.
    pub quotas: Option<QuotaConfig>,
    pub features: FeatureConfig,
    /// Whether the AI-topic share enters the clustering metric.
    pub include_theme: bool,
    pub granularity: Granularity,
    pub pelt: PeltConfig,
    pub hdbscan: HdbscanConfig,
    pub naming: NamingConfig,
    pub bootstrap: BootstrapConfig,
    pub holm_alpha: f64,
    pub seeds: Seeds,
    pub synth: SynthCorpusConfig,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            logprobs: None,
            bot_list: None,
            lexicon: None,
            judge_model: "judge".into(),
            current_model: "current".into(),
            filter: FilterConfig::default(),
            boundary: BoundaryConfig::default(),
            quotas: None,
            features: FeatureConfig::default(),
            include_theme: true,
            granularity: Granularity::Monthly,
            pelt: PeltConfig::default(),
            hdbscan: HdbscanConfig::default(),
            naming: NamingConfig::default(),
            bootstrap: BootstrapConfig::default(),
            holm_alpha: 0.05,
            seeds: Seeds::default(),
            synth: SynthCorpusConfig::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());
        self.filter.validate().map_err(|e| cfg(&e))?;
        self.boundary.validate().map_err(|e| cfg(&e))?;
        if let Some(q) = &self.quotas {
            q.validate().map_err(|e| cfg(&e))?;
        }
        self.pelt.validate().map_err(|e| cfg(&e))?;
        self.hdbscan.validate().map_err(|e| cfg(&e))?;
        self.bootstrap.validate().map_err(|e| cfg(&e))?;
        if self.features.ttr_window == 0 || self.features.ttr_overlap >= self.features.ttr_window {
            return Err(CliError::Config(
                "ttr_overlap must be smaller than a non-zero ttr_window".into(),
            ));
        }
        if !(self.holm_alpha > 0.0 && self.holm_alpha < 1.0) {
            return Err(CliError::Config(format!(
                "holm_alpha {} outside (0, 1)",
                self.holm_alpha
            )));
        }
        if self.judge_model.is_empty() || self.current_model.is_empty() {
            return Err(CliError::Config("model ids must be non-empty".into()));
        }
        Ok(())
    }
}
