//! Decile backtests and evaluation metrics.
//!
//! Each day the predictor ranks the cross-section, the book rebalances into an
//! equal-weight top quantile at the close, and the next day's returns accrue net of a
//! proportional cost on traded notional.

mod engine;
mod metrics;
mod portfolio;
mod predictor;
mod report;
mod sweep;

pub use engine::{run_backtest, BacktestConfig, BacktestData, BacktestReport, DecisionContext, Predictor};
pub use metrics::{
    annual_return, average_ranks, cumulative_return, max_drawdown, rank_ic, sharpe_ratio, summary_metrics,
    MetricInputs, Metrics,
};
pub use portfolio::{quantile_assign, rebalance, PortfolioState, Trade};
pub use predictor::ModelPredictor;
pub use report::{write_comparison_table, write_cumulative_csv, write_metrics_json, write_report_csv, write_sweep_csv};
pub use sweep::{horizon_sweep, SweepModel, SweepRow};
