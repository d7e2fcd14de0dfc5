pub mod align;
pub mod backtest;
pub mod report;
pub mod synth;
pub mod train;

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::Args;
use lgscrl::embeddings::{load_embeddings, EmbeddingSeries};
use lgscrl::panel::{compound_returns, load_panel, standardize, FeaturePanel, ReturnPanel};
use lgscrl::training::split_date;

use crate::config::ExperimentConfig;
use crate::CliError;

/// Fraction of the calendar used for training when no split is configured.
const DEFAULT_TRAIN_FRACTION: f64 = 0.7;

pub struct Context {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
}

/// Data-path overrides shared by the commands that read panels.
#[derive(Debug, Clone, Default, Args)]
pub struct PathArgs {
    /// feature CSV (date,stock_id,f0..)
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// return CSV (date,stock_id,return)
    #[arg(long)]
    pub returns: Option<PathBuf>,
    /// embedding JSONL
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

impl PathArgs {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(p) = &self.features {
            cfg.paths.features = Some(p.clone());
        }
        if let Some(p) = &self.returns {
            cfg.paths.returns = Some(p.clone());
        }
        if let Some(p) = &self.embeddings {
            cfg.paths.embeddings = Some(p.clone());
        }
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Features (standardised if configured) and daily returns.
pub struct Market {
    pub features: FeaturePanel,
    pub returns: ReturnPanel,
}

pub fn load_market(cfg: &ExperimentConfig) -> Result<Market, CliError> {
    let (features, returns) = load_panel(cfg.require_path("features")?, cfg.require_path("returns")?)?;
    if let Some(m) = cfg.model.m {
        if m != features.m() {
            return Err(usage(format!(
                "model.m = {m} but the feature file has {} feature columns",
                features.m()
            )));
        }
    }
    let features = if cfg.data.standardize {
        standardize(&features)
    } else {
        features
    };
    Ok(Market { features, returns })
}

pub fn load_series(cfg: &ExperimentConfig, market: &Market) -> Result<EmbeddingSeries, CliError> {
    let path = cfg.require_path("embeddings")?;
    Ok(load_embeddings(
        path,
        Some(market.features.calendar()),
        cfg.data.missing_embeddings,
    )?)
}

/// Returns over `horizon` days, compounded from the daily file when needed.
pub fn target_returns(daily: &ReturnPanel, horizon: usize) -> Result<ReturnPanel, CliError> {
    if horizon == daily.horizon() {
        return Ok(daily.clone());
    }
    if daily.horizon() != 1 {
        return Err(usage(format!(
            "returns file has horizon {} and cannot be compounded to {horizon}",
            daily.horizon()
        )));
    }
    Ok(compound_returns(daily, horizon)?)
}

/// Last training date: `split.train_end`, or the 70% point of the calendar.
pub fn train_end(cfg: &ExperimentConfig, market: &Market) -> Result<NaiveDate, CliError> {
    match cfg.split.train_end {
        Some(d) => Ok(d),
        None => Ok(split_date(market.features.calendar().dates(), DEFAULT_TRAIN_FRACTION)?),
    }
}

/// First test date: `split.test_start`, or the first trading day after the training period.
pub fn test_start(cfg: &ExperimentConfig, market: &Market) -> Result<NaiveDate, CliError> {
    if let Some(d) = cfg.split.test_start {
        return Ok(d);
    }
    let end = train_end(cfg, market)?;
    market
        .features
        .calendar()
        .dates()
        .iter()
        .copied()
        .find(|d| *d > end)
        .ok_or_else(|| usage(format!("no trading days after the training period ending {end}")))
}

pub fn create_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create output directory {}: {e}", dir.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn write_snapshot(cfg: &ExperimentConfig, dir: &Path) -> Result<(), CliError> {
    write_text(&dir.join("config.toml"), &cfg.to_toml()?)
}

pub fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

/// File-name friendly form of a label.
pub fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c.to_ascii_lowercase() } else { '_' })
        .collect()
}
