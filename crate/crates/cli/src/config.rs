//! Experiment configuration: one TOML file, overridden by command-line flags.
//!
//! ```toml
//! [paths]
//! features = "data/features.csv"
//! returns = "data/returns.csv"
//! embeddings = "data/embeddings.jsonl"   # required by LG-LLM and alignment
//! out = "runs/exp1"
//!
//! [model]
//! variant = "LG-STOCK"    # Local | LG-STOCK | LG-LLM
//! hidden = 36
//! factors = 36
//! d_llm = 4096
//! mask_path = "feature"   # feature | factor
//! seed = 0
//!
//! [data]
//! standardize = true
//! horizon = 1             # training target horizon; returns file must be daily
//! missing_embeddings = "error"  # error | zero-fill
//!
//! [split]
//! train_end = "2021-12-31"
//! test_start = "2022-01-03"
//! validation_start = "2021-09-01"  # optional; defaults to the last 20% of training days
//!
//! [supervised]
//! epochs = 50
//! batch_days = 16
//! learning_rate = 0.001
//!
//! [scrl]
//! theta = 0.1
//! steps_per_rollout = 2048
//! batch_size = 128
//! learning_rate = 0.00025
//! reward_scale = 0.0001
//! clip_epsilon = 0.2
//! ppo_epochs = 4
//! reward_kind = "neg_mse" # neg_mse | rank_ic
//! rollouts = 1
//! participants = 1
//! rounds = 1
//!
//! [backtest]
//! quantiles = 10
//! cost_rate = 0.003
//! holding = 1
//! annualization_days = 252
//! risk_free_rate = 0.0
//! ```
//!
//! Every key is optional except where a command needs it. The effective configuration
//! is written to `config.toml` in the output directory.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use lgscrl::backtest::BacktestConfig;
use lgscrl::embeddings::MissingDayPolicy;
use lgscrl::lgmodel::{MaskPath, Variant};
use lgscrl::training::{ScrlConfig, SupervisedConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub returns: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub variant: Variant,
    /// feature count; checked against the data when set
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub hidden: usize,
    pub factors: usize,
    pub d_llm: usize,
    pub mask_path: MaskPath,
    pub seed: u64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            variant: Variant::LgStock,
            m: None,
            hidden: 36,
            factors: 36,
            d_llm: lgscrl::embeddings::DEFAULT_D_LLM,
            mask_path: MaskPath::Feature,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub standardize: bool,
    pub horizon: usize,
    pub missing_embeddings: MissingDayPolicy,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            standardize: true,
            horizon: 1,
            missing_embeddings: MissingDayPolicy::Error,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_end: Option<NaiveDate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_start: Option<NaiveDate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation_start: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScrlSection {
    #[serde(flatten)]
    pub ppo: ScrlConfig,
    pub rounds: usize,
}

impl Default for ScrlSection {
    fn default() -> Self {
        Self {
            ppo: ScrlConfig::default(),
            rounds: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub paths: Paths,
    pub model: ModelSection,
    pub data: DataSection,
    pub split: SplitSection,
    pub supervised: SupervisedConfig,
    pub scrl: ScrlSection,
    pub backtest: BacktestConfig,
}

fn clean(p: &Path) -> PathBuf {
    p.components()
        .filter(|c| !matches!(c, std::path::Component::CurDir))
        .collect()
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        cfg.resolve_relative(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Paths in a config file are relative to the file's directory.
    fn resolve_relative(&mut self, base: &Path) {
        let base = std::path::absolute(base).unwrap_or_else(|_| base.to_path_buf());
        for p in [
            &mut self.paths.features,
            &mut self.paths.returns,
            &mut self.paths.embeddings,
            &mut self.paths.out,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = clean(&base.join(&*p));
            }
        }
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Runtime(format!("serialising config: {e}")))
    }

    pub fn require_path(&self, field: &str) -> Result<&Path, CliError> {
        let p = match field {
            "features" => &self.paths.features,
            "returns" => &self.paths.returns,
            "embeddings" => &self.paths.embeddings,
            _ => unreachable!("unknown path field {field}"),
        };
        let p = p
            .as_deref()
            .ok_or_else(|| usage(format!("paths.{field} is required (set it in the config or with --{field})")))?;
        if !p.exists() {
            return Err(usage(format!("paths.{field} = {} does not exist", p.display())));
        }
        Ok(p)
    }

    pub fn validate_common(&self) -> Result<(), CliError> {
        if let (Some(a), Some(b)) = (self.split.train_end, self.split.test_start) {
            if a >= b {
                return Err(usage(format!("split.train_end {a} must be before split.test_start {b}")));
            }
        }
        if let (Some(v), Some(e)) = (self.split.validation_start, self.split.train_end) {
            if v > e {
                return Err(usage(format!("split.validation_start {v} is after split.train_end {e}")));
            }
        }
        if self.data.horizon == 0 {
            return Err(usage("data.horizon must be >= 1"));
        }
        for (name, v) in [("hidden", self.model.hidden), ("factors", self.model.factors), ("d_llm", self.model.d_llm)] {
            if v == 0 {
                return Err(usage(format!("model.{name} must be >= 1")));
            }
        }
        self.supervised.validate().map_err(|e| usage(e.to_string()))?;
        self.scrl.ppo.validate().map_err(|e| usage(e.to_string()))?;
        if self.scrl.rounds == 0 {
            return Err(usage("scrl.rounds must be >= 1"));
        }
        self.backtest.validate().map_err(|e| usage(e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.paths.features = Some("f.csv".into());
        cfg.split.train_end = NaiveDate::from_ymd_opt(2020, 3, 1);
        cfg.scrl.ppo.theta = 0.5;
        cfg.model.variant = Variant::LgLlm;
        let text = cfg.to_toml().unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn parses_documented_example() {
        let text = include_str!("config.rs")
            .lines()
            .skip_while(|l| !l.starts_with("//! ```toml"))
            .skip(1)
            .take_while(|l| !l.starts_with("//! ```"))
            .map(|l| l.trim_start_matches("//!").trim_start())
            .collect::<Vec<_>>()
            .join("\n");
        let cfg: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg.model.variant, Variant::LgStock);
        assert_eq!(cfg.scrl.rounds, 1);
        cfg.validate_common().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("[model]\nvarient = \"Local\"\n").is_err());
    }
}
