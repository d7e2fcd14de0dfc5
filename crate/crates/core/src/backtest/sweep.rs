use serde::{Deserialize, Serialize};

use super::engine::{run_backtest, BacktestConfig, BacktestData, Predictor};
use crate::panel::compound_returns;
use crate::Result;

pub struct SweepModel<'a> {
    pub label: String,
    pub horizon: usize,
    pub predictor: &'a dyn Predictor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub horizon: usize,
    pub rank_ic: Option<f64>,
    pub annual_return: f64,
    pub sharpe: Option<f64>,
    pub turnover: f64,
}

/// Backtests each model with daily rebalancing; RankIC is scored against returns
/// compounded over the model's horizon.
pub fn horizon_sweep(models: &[SweepModel<'_>], data: BacktestData<'_>, cfg: &BacktestConfig) -> Result<Vec<SweepRow>> {
    let daily_cfg = BacktestConfig {
        holding: 1,
        ..cfg.clone()
    };
    let mut rows = Vec::with_capacity(models.len());
    for model in models {
        let ic = compound_returns(data.returns, model.horizon)?;
        let report = run_backtest(
            model.predictor,
            BacktestData {
                ic_returns: Some(&ic),
                ..data
            },
            &daily_cfg,
        )?;
        rows.push(SweepRow {
            label: model.label.clone(),
            horizon: model.horizon,
            rank_ic: report.metrics.rank_ic_mean,
            annual_return: report.metrics.annual_return,
            sharpe: report.metrics.sharpe,
            turnover: report.metrics.turnover_mean,
        });
    }
    Ok(rows)
}
