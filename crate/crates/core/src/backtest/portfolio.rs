use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::BacktestConfig;
use crate::{Error, Result};

/// Quantile labels `0..quantiles` (0 = lowest prediction).
///
/// Stocks are ordered by prediction, ties by stock id; the stock at rank `r` gets label
/// `floor(r * quantiles / n)`, so bucket sizes differ by at most one.
pub fn quantile_assign(predictions: &[f64], stock_ids: &[String], quantiles: usize) -> Result<Vec<usize>> {
    let n = predictions.len();
    if stock_ids.len() != n {
        return Err(Error::dims("stock ids", n, stock_ids.len()));
    }
    if quantiles < 1 || n < quantiles {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n} stocks into {quantiles} quantiles"
        )));
    }
    if predictions.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("predictions".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        predictions[a]
            .total_cmp(&predictions[b])
            .then_with(|| stock_ids[a].cmp(&stock_ids[b]))
    });
    let mut labels = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        labels[i] = rank * quantiles / n;
    }
    Ok(labels)
}

/// Long-only book: weights as fractions of equity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioState {
    pub weights: BTreeMap<String, f64>,
    pub equity: f64,
}

impl Default for PortfolioState {
    fn default() -> Self {
        Self {
            weights: BTreeMap::new(),
            equity: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trade {
    pub cost: f64,
    pub turnover: f64,
}

/// Moves to an equal-weight book on `targets`.
///
/// `turnover = sum|dw| / 2`, `cost = cost_rate * sum|dw| * equity`; the returned state's
/// equity is net of the cost.
pub fn rebalance(
    state: &PortfolioState,
    targets: &BTreeSet<String>,
    cfg: &BacktestConfig,
) -> Result<(PortfolioState, Trade)> {
    if targets.is_empty() {
        return Err(Error::InvalidArgument("rebalance to an empty target set".into()));
    }
    let w = 1.0 / targets.len() as f64;
    let weights: BTreeMap<String, f64> = targets.iter().map(|id| (id.clone(), w)).collect();
    let mut traded = 0.0;
    for (id, old) in &state.weights {
        traded += (weights.get(id).copied().unwrap_or(0.0) - old).abs();
    }
    for (id, new) in &weights {
        if !state.weights.contains_key(id) {
            traded += new.abs();
        }
    }
    let cost = cfg.cost_rate * traded * state.equity;
    Ok((
        PortfolioState {
            weights,
            equity: state.equity - cost,
        },
        Trade {
            cost,
            turnover: traded / 2.0,
        },
    ))
}
