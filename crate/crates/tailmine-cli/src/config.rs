//! Run configuration: one structured TOML file, per-command flag overrides,
//! and a resolved snapshot written next to every run's outputs so the run
//! can be reproduced from the snapshot alone.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use tailmine::describer::{builtin, PromptTemplate};
use tailmine::evalbench::SyntheticSpec;
use tailmine::scoring::{FrequencyMode, Phi, Pooling};
use tailmine::selection::SelectionMethod;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendChoice {
    Live,
    Cache,
    Fixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum KeywordModeChoice {
    Heuristic,
    TwoStep,
    OneStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PopulationChoice {
    /// Frequency statistics over the unlabeled pool only.
    Unlabeled,
    /// Include the labeled pool as well.
    All,
}

/// Where examples with empty keyword sets land in frequency-based ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EmptyKeywordPolicy {
    /// Excluded from selection and reported (the default).
    Exclude,
    /// Scored below every real score.
    Last,
    /// Scored above every real score.
    First,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendChoice,
    pub endpoint: Option<String>,
    pub model: String,
    pub fixture: Option<PathBuf>,
    pub concurrency: usize,
    pub temperature: f64,
    pub max_tokens: u32,
    pub retry_attempts: u32,
    pub retry_backoff_ms: u64,
    pub requests_per_second: Option<f64>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendChoice::Fixture,
            endpoint: None,
            model: "llava-1.5-7b".into(),
            fixture: None,
            concurrency: 4,
            temperature: 0.0,
            max_tokens: 512,
            retry_attempts: 3,
            retry_backoff_ms: 1000,
            requests_per_second: None,
        }
    }
}

impl BackendConfig {
    /// Model identity plus decoding parameters; must match across runs for
    /// cache hits.
    pub fn model_tag(&self) -> String {
        format!(
            "{}:temp={},max_tokens={}",
            self.model, self.temperature, self.max_tokens
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescribeConfig {
    pub template: String,
}

impl Default for DescribeConfig {
    fn default() -> Self {
        Self {
            template: "waymo_describe".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeywordsConfig {
    pub mode: KeywordModeChoice,
    pub summarize_template: String,
    pub onestep_template: String,
    /// Apply the category filter after extraction.
    pub filter: bool,
    pub categorize_template: String,
    /// Categories kept by the filter.
    pub keep: Vec<String>,
}

impl Default for KeywordsConfig {
    fn default() -> Self {
        Self {
            mode: KeywordModeChoice::Heuristic,
            summarize_template: "waymo_summarize".into(),
            onestep_template: "waymo_onestep".into(),
            filter: false,
            categorize_template: "waymo_categorize".into(),
            keep: vec!["vehicle".into(), "pedestrian".into(), "cyclist".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    /// Signals to compute: vlmine, entropy, variation_ratio,
    /// ensemble_variance.
    pub signals: Vec<String>,
    pub pooling: Pooling,
    /// Transform of the pooled frequency; defaults per pooling mode
    /// (negate for min, neg_log for avg).
    pub phi: Option<Phi>,
    pub frequency: FrequencyMode,
    pub population: PopulationChoice,
    pub empty_keywords: EmptyKeywordPolicy,
    /// Line-delimited prediction records for the uncertainty signals.
    pub predictions: Option<PathBuf>,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            signals: vec!["vlmine".into()],
            pooling: Pooling::Min,
            phi: None,
            frequency: FrequencyMode::Set,
            population: PopulationChoice::Unlabeled,
            empty_keywords: EmptyKeywordPolicy::Exclude,
            predictions: None,
        }
    }
}

impl ScoreConfig {
    pub fn effective_phi(&self) -> Phi {
        self.phi.unwrap_or_else(|| Phi::default_for(self.pooling))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MineConfig {
    pub method: SelectionMethod,
    pub budget: usize,
    /// Column for top-k; defaults to the single configured signal.
    pub column: Option<String>,
    /// Mine selection units defined by the manifest `group` field instead of
    /// single examples.
    pub group_by: bool,
}

impl Default for MineConfig {
    fn default() -> Self {
        Self {
            method: SelectionMethod::Pareto,
            budget: 100,
            column: None,
            group_by: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Classes with labeled-pool cardinality at or under this are "tail".
    pub tail_threshold: u32,
    /// Mined-set CSV to evaluate; defaults to `<out_dir>/mined.csv`.
    pub mined: Option<PathBuf>,
    /// Export pairwise signal correlations (needs at least two signals).
    pub correlations: bool,
    /// When set, run the synthetic benchmark instead of evaluating a real
    /// corpus. The run seed overrides the spec's seed.
    pub synthetic: Option<SyntheticSpec>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            tail_threshold: 20,
            mined: None,
            correlations: true,
            synthetic: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Root seed; all run randomness derives from it.
    pub seed: u64,
    pub backend: BackendConfig,
    pub describe: DescribeConfig,
    pub keywords: KeywordsConfig,
    pub score: ScoreConfig,
    pub mine: MineConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            out_dir: PathBuf::from("out"),
            seed: 0,
            backend: BackendConfig::default(),
            describe: DescribeConfig::default(),
            keywords: KeywordsConfig::default(),
            score: ScoreConfig::default(),
            mine: MineConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn manifest(&self) -> Result<&Path> {
        self.manifest
            .as_deref()
            .context("no manifest configured (set `manifest` in the config or pass --manifest)")
    }

    /// Resolve a template by name: built-ins only for now; unknown names are
    /// configuration errors.
    pub fn template(&self, name: &str) -> Result<PromptTemplate> {
        if name.trim().is_empty() {
            bail!("template name is empty");
        }
        builtin(name).with_context(|| format!("unknown template {name:?}"))
    }

    /// Write the fully resolved config next to the outputs; re-running the
    /// same command with `--config <snapshot>` reproduces the run.
    pub fn write_snapshot(&self, command: &str) -> Result<PathBuf> {
        let path = self.out_dir.join(format!("{command}_config.toml"));
        let text = toml::to_string_pretty(self).context("serializing config snapshot")?;
        std::fs::write(&path, text)
            .with_context(|| format!("writing snapshot {}", path.display()))?;
        Ok(path)
    }
}
