use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use super::ppo::ScrlConfig;
use crate::backtest::rank_ic;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    /// `-MSE` of the day's predictions
    #[default]
    NegMse,
    /// Spearman correlation of predictions with realised returns
    RankIc,
}

/// Per-sample log-ratio estimate of the KL penalty for one sampled mask.
pub fn kl_term(actor_log_prob: f64, ref_log_prob: f64) -> Result<f64> {
    if !(actor_log_prob.is_finite() && ref_log_prob.is_finite()) {
        return Err(Error::NonFinite(format!(
            "log-probabilities {actor_log_prob}, {ref_log_prob}"
        )));
    }
    Ok(actor_log_prob - ref_log_prob)
}

/// Returns `(raw, total)` with `total = raw - theta * kl`.
pub fn step_reward(
    predictions: ArrayView1<'_, f64>,
    realized: ArrayView1<'_, f64>,
    cfg: &ScrlConfig,
    kl: f64,
) -> Result<(f64, f64)> {
    if predictions.len() != realized.len() {
        return Err(Error::dims("reward inputs", predictions.len(), realized.len()));
    }
    if predictions.iter().chain(realized.iter()).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("reward inputs".into()));
    }
    let score = match cfg.reward_kind {
        RewardKind::NegMse => {
            if predictions.is_empty() {
                return Err(Error::InvalidArgument("empty cross-section".into()));
            }
            let resid = &predictions - &realized;
            -resid.dot(&resid) / resid.len() as f64
        }
        RewardKind::RankIc => rank_ic(predictions, realized)?,
    };
    let raw = cfg.reward_scale * score;
    Ok((raw, raw - cfg.theta * kl))
}
