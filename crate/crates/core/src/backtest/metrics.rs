use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use super::BacktestConfig;
use crate::{Error, Result};

/// Average ranks (1-based) with ties sharing the mean of their positions.
pub fn average_ranks(x: ArrayView1<'_, f64>) -> Vec<f64> {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && x[idx[end]] == x[idx[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        None
    } else {
        Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
    }
}

/// Spearman rank correlation with average ranks for ties.
pub fn rank_ic(predictions: ArrayView1<'_, f64>, realized: ArrayView1<'_, f64>) -> Result<f64> {
    if predictions.len() != realized.len() {
        return Err(Error::dims("rank_ic inputs", predictions.len(), realized.len()));
    }
    if predictions.len() < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two stocks".into()));
    }
    if predictions.iter().chain(realized.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("rank_ic inputs".into()));
    }
    pearson(&average_ranks(predictions), &average_ranks(realized))
        .ok_or_else(|| Error::UndefinedCorrelation("constant ranking".into()))
}

/// Largest peak-to-trough decline, `max_t (1 - equity_t / peak_t)`.
pub fn max_drawdown(equity: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut mdd: f64 = 0.0;
    for &e in equity {
        peak = peak.max(e);
        if peak > 0.0 {
            mdd = mdd.max(1.0 - e / peak);
        }
    }
    mdd
}

/// Annualised Sharpe ratio from daily returns, using the sample standard deviation.
pub fn sharpe_ratio(daily: &[f64], risk_free_rate: f64, annualization_days: usize) -> Result<f64> {
    if daily.len() < 2 {
        return Err(Error::UndefinedMetric("Sharpe ratio needs at least two returns".into()));
    }
    let n = daily.len() as f64;
    let rf = risk_free_rate / annualization_days as f64;
    let mean_excess = daily.iter().map(|r| r - rf).sum::<f64>() / n;
    let mean = daily.iter().sum::<f64>() / n;
    let var = daily.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var <= 0.0 || daily.iter().all(|r| *r == daily[0]) {
        return Err(Error::UndefinedMetric("Sharpe ratio of zero-variance returns".into()));
    }
    Ok(mean_excess / var.sqrt() * (annualization_days as f64).sqrt())
}

pub fn cumulative_return(daily: &[f64]) -> f64 {
    daily.iter().fold(1.0, |acc, r| acc * (1.0 + r)) - 1.0
}

pub fn annual_return(cumulative: f64, days: usize, annualization_days: usize) -> f64 {
    (1.0 + cumulative).powf(annualization_days as f64 / days as f64) - 1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// mean over days with a defined RankIC
    pub rank_ic_mean: Option<f64>,
    pub rank_ic_days: usize,
    pub rank_ic_undefined_days: usize,
    pub cumulative_return: f64,
    pub annual_return: f64,
    /// gross growth of the top bucket divided by that of the bottom bucket
    pub top_minus_bottom: f64,
    /// undefined for zero-variance returns
    pub sharpe: Option<f64>,
    pub mdd: f64,
    pub turnover_mean: f64,
}

/// Inputs for [`summary_metrics`].
#[derive(Debug, Clone, Copy)]
pub struct MetricInputs<'a> {
    pub daily_returns: &'a [f64],
    pub equity_curve: &'a [f64],
    pub turnover: &'a [f64],
    pub rank_ic: &'a [Option<f64>],
    pub top_bucket_returns: &'a [f64],
    pub bottom_bucket_returns: &'a [f64],
}

pub fn summary_metrics(inputs: MetricInputs<'_>, cfg: &BacktestConfig) -> Result<Metrics> {
    let days = inputs.daily_returns.len();
    if days < 2 {
        return Err(Error::InvalidArgument(format!("metrics need >= 2 daily returns, got {days}")));
    }
    let defined: Vec<f64> = inputs.rank_ic.iter().flatten().copied().collect();
    let cumulative = cumulative_return(inputs.daily_returns);
    let sharpe = match sharpe_ratio(inputs.daily_returns, cfg.risk_free_rate, cfg.annualization_days) {
        Ok(s) => Some(s),
        Err(Error::UndefinedMetric(msg)) => {
            log::warn!("{msg}");
            None
        }
        Err(e) => return Err(e),
    };
    let top = 1.0 + cumulative_return(inputs.top_bucket_returns);
    let bottom = 1.0 + cumulative_return(inputs.bottom_bucket_returns);
    Ok(Metrics {
        rank_ic_mean: (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64),
        rank_ic_days: defined.len(),
        rank_ic_undefined_days: inputs.rank_ic.len() - defined.len(),
        cumulative_return: cumulative,
        annual_return: annual_return(cumulative, days, cfg.annualization_days),
        top_minus_bottom: top / bottom,
        sharpe,
        mdd: max_drawdown(inputs.equity_curve),
        turnover_mean: inputs.turnover.iter().sum::<f64>() / inputs.turnover.len().max(1) as f64,
    })
}
