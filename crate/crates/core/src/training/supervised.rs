use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{mean_mse, DaySample};
use super::optim::Adam;
use crate::lgmodel::{LgModelParams, MaskVector, ParamTensors, Variant};
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SupervisedConfig {
    pub epochs: usize,
    /// days per mini-batch
    pub batch_days: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SupervisedConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_days: 16,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

impl SupervisedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("supervised.epochs must be >= 1".into()));
        }
        if self.batch_days == 0 {
            return Err(Error::InvalidArgument("supervised.batch_days must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "supervised.learning_rate = {} must be > 0",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// mean daily MSE before the first update
    pub initial_loss: f64,
    /// mean daily MSE after each epoch
    pub epoch_losses: Vec<f64>,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        self.epoch_losses.last().copied().unwrap_or(self.initial_loss)
    }
}

/// Average loss and gradient over a set of days. Per-day work runs in parallel; the
/// reduction is sequential in day order, so the result does not depend on thread count.
pub(crate) fn batch_mse_grad(
    model: &LgModelParams,
    days: &[&DaySample],
    masks: Option<&[&MaskVector]>,
) -> Result<(f64, LgModelParams)> {
    let parts: Vec<Result<(f64, LgModelParams)>> = days
        .par_iter()
        .enumerate()
        .map(|(k, s)| model.mse_and_grad(s.inputs(masks.map(|m| m[k])), s.targets.view()))
        .collect();
    let scale = 1.0 / days.len() as f64;
    let mut grads = model.zeros_like();
    let mut loss = 0.0;
    for part in parts {
        let (l, g) = part?;
        loss += l * scale;
        grads.add_scaled(&g, scale);
    }
    Ok((loss, grads))
}

/// Supervised training of the Local-Global model on squared error.
///
/// Days are shuffled each epoch with a seeded generator and grouped into mini-batches of
/// `batch_days`; each batch takes one Adam step on the mean of the per-day MSEs.
pub fn train_critic(
    samples: &[DaySample],
    mut params: LgModelParams,
    cfg: &SupervisedConfig,
) -> Result<(LgModelParams, TrainReport)> {
    cfg.validate()?;
    if params.variant == Variant::ScrlLg {
        return Err(Error::InvalidArgument(
            "supervised training supports Local, LG-STOCK and LG-LLM; SCRL-LG is trained by alignment".into(),
        ));
    }
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no training days".into()));
    }
    let initial_loss = mean_mse(&params, samples, None)?;
    if !initial_loss.is_finite() {
        return Err(Error::Divergence(format!("initial loss is {initial_loss}")));
    }
    log::info!("{} initial loss {initial_loss:.6e} on {} days", params.variant, samples.len());

    let mut rng = rng::seeded(cfg.seed);
    let mut adam = Adam::new(cfg.learning_rate);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        rng::shuffle(&mut rng, &mut order);
        for chunk in order.chunks(cfg.batch_days) {
            let days: Vec<&DaySample> = chunk.iter().map(|&k| &samples[k]).collect();
            let (loss, grads) = batch_mse_grad(&params, &days, None)?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::Divergence(format!(
                    "non-finite batch loss {loss} in epoch {epoch} (learning rate {})",
                    cfg.learning_rate
                )));
            }
            adam.step(&mut params, &grads);
        }
        let loss = mean_mse(&params, samples, None)?;
        if !loss.is_finite() {
            return Err(Error::Divergence(format!(
                "epoch {epoch} loss is {loss} (initial {initial_loss:.6e}, learning rate {})",
                cfg.learning_rate
            )));
        }
        log::debug!("epoch {epoch} loss {loss:.6e}");
        epoch_losses.push(loss);
    }
    Ok((
        params,
        TrainReport {
            initial_loss,
            epoch_losses,
        },
    ))
}
