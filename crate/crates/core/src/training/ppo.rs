//! PPO alignment of the mask policy.
//!
//! Each rollout walks the training calendar from a cursor for up to `steps_per_rollout`
//! days per participant. On each day the actor samples a mask, predicts with it, and
//! earns `raw - theta * kl`. Advantages are the total reward minus a running mean of all
//! totals seen so far, normalised per rollout. The policy then maximises the clipped
//! surrogate over `ppo_epochs` passes of shuffled mini-batches, and the actor's prediction
//! heads take a squared-error step on each mini-batch with the sampled masks.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use ndarray::ArrayView1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::DaySample;
use super::optim::Adam;
use super::policy::{Actor, MaskPolicy};
use super::reward::{kl_term, step_reward, RewardKind};
use super::supervised::batch_mse_grad;
use crate::lgmodel::{MaskVector, ParamTensors};
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScrlConfig {
    /// KL coefficient
    pub theta: f64,
    pub steps_per_rollout: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub reward_scale: f64,
    pub clip_epsilon: f64,
    pub ppo_epochs: usize,
    pub reward_kind: RewardKind,
    pub seed: u64,
    /// rollouts per alignment call
    pub rollouts: usize,
    /// parallel collectors, each gathering `steps_per_rollout` steps
    pub participants: usize,
    /// co-train the actor's prediction heads on each mini-batch
    pub train_heads: bool,
    /// Adam step size for the co-trained heads
    pub head_learning_rate: f64,
    pub baseline: BaselineKind,
}

impl Default for ScrlConfig {
    fn default() -> Self {
        Self {
            theta: 0.1,
            steps_per_rollout: 2048,
            batch_size: 128,
            learning_rate: 2.5e-4,
            reward_scale: 1e-4,
            clip_epsilon: 0.2,
            ppo_epochs: 4,
            reward_kind: RewardKind::NegMse,
            seed: 0,
            rollouts: 1,
            participants: 1,
            train_heads: true,
            head_learning_rate: 2.5e-4,
            baseline: BaselineKind::PerDate,
        }
    }
}

impl ScrlConfig {
    pub fn validate(&self) -> Result<()> {
        let positive_ints = [
            ("steps_per_rollout", self.steps_per_rollout),
            ("batch_size", self.batch_size),
            ("ppo_epochs", self.ppo_epochs),
            ("rollouts", self.rollouts),
            ("participants", self.participants),
        ];
        if let Some((name, _)) = positive_ints.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("scrl.{name} must be >= 1")));
        }
        let positive = [
            ("learning_rate", self.learning_rate),
            ("reward_scale", self.reward_scale),
            ("clip_epsilon", self.clip_epsilon),
            ("head_learning_rate", self.head_learning_rate),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument(format!("scrl.{name} = {v} must be > 0")));
        }
        if !(self.theta.is_finite() && self.theta >= 0.0) {
            return Err(Error::InvalidArgument(format!("scrl.theta = {} must be >= 0", self.theta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    /// index into the sample slice; the state is that day's embedding
    pub sample: usize,
    pub date: NaiveDate,
    pub action: MaskVector,
    pub log_prob_actor: f64,
    pub log_prob_ref: f64,
    pub raw_reward: f64,
    pub kl: f64,
    pub total_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
}

/// One row of the diagnostics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub rollout: usize,
    pub step: usize,
    pub date: NaiveDate,
    pub raw_reward: f64,
    pub kl: f64,
    pub total_reward: f64,
    /// mean clipped surrogate of the rollout's last PPO epoch
    pub surrogate: f64,
    pub validation_rank_ic: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutSummary {
    pub rollout: usize,
    pub steps: usize,
    pub mean_raw_reward: f64,
    pub mean_kl: f64,
    pub mean_total_reward: f64,
    /// surrogate of the first mini-batch of the first epoch (ratio 1 everywhere)
    pub first_surrogate: f64,
    /// mean advantage over that same mini-batch
    pub first_batch_mean_advantage: f64,
    pub final_surrogate: f64,
    /// max over mini-batches of clipped minus unclipped surrogate (never positive)
    pub max_clip_excess: f64,
    pub mean_probabilities: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PpoOutcome {
    pub actor: Actor,
    pub log: Vec<StepLog>,
    pub rollouts: Vec<RolloutSummary>,
}

/// Clipped surrogate value on a mini-batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateValue {
    pub clipped: f64,
    pub unclipped: f64,
}

/// Mean clipped surrogate `mean(min(rho A, clip(rho, 1-eps, 1+eps) A))` over a mini-batch,
/// with its gradient with respect to the policy parameters.
pub fn clipped_surrogate(
    policy: &MaskPolicy,
    states: &[ArrayView1<'_, f64>],
    actions: &[&MaskVector],
    old_log_probs: &[f64],
    advantages: &[f64],
    clip_epsilon: f64,
) -> Result<(SurrogateValue, MaskPolicy)> {
    let b = states.len();
    if b == 0 || actions.len() != b || old_log_probs.len() != b || advantages.len() != b {
        return Err(Error::InvalidArgument("surrogate mini-batch sizes disagree".into()));
    }
    let mut grads = MaskPolicy::zeros(policy.d_llm(), policy.out_dim());
    let (mut clipped, mut unclipped) = (0.0, 0.0);
    let inv_b = 1.0 / b as f64;
    for k in 0..b {
        let lp = policy.log_prob(states[k], actions[k])?;
        let rho = (lp - old_log_probs[k]).exp();
        let a = advantages[k];
        let rho_c = rho.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon);
        let (u, c) = (rho * a, rho_c * a);
        unclipped += u * inv_b;
        clipped += u.min(c) * inv_b;
        let inside = rho > 1.0 - clip_epsilon && rho < 1.0 + clip_epsilon;
        if inside || u < c {
            policy.accumulate_log_prob_grad(states[k], actions[k], rho * a * inv_b, &mut grads)?;
        }
    }
    Ok((SurrogateValue { clipped, unclipped }, grads))
}

struct Collected {
    trajectory: Trajectory,
}

fn collect_rollout(
    actor: &Actor,
    reference: &MaskPolicy,
    samples: &[DaySample],
    day_indices: &[usize],
    cfg: &ScrlConfig,
    first_step_id: u64,
) -> Result<Collected> {
    let steps: Vec<Result<TrajectoryStep>> = day_indices
        .par_iter()
        .enumerate()
        .map(|(k, &idx)| {
            let s = &samples[idx];
            let v = s
                .embedding
                .as_ref()
                .ok_or_else(|| Error::MissingInput {
                    variant: "SCRL-LG".into(),
                    what: format!("an embedding on {}", s.date),
                })?
                .view();
            let mut r = rng::stream(cfg.seed, first_step_id + k as u64);
            let action = actor.policy.sample(v, &mut r)?;
            let log_prob_actor = actor.policy.log_prob(v, &action)?;
            let log_prob_ref = reference.log_prob(v, &action)?;
            let kl = kl_term(log_prob_actor, log_prob_ref)?;
            let pred = actor.model.predict(s.inputs(Some(&action)))?;
            let (raw_reward, total_reward) = step_reward(pred.view(), s.targets.view(), cfg, kl)?;
            Ok(TrajectoryStep {
                sample: idx,
                date: s.date,
                action,
                log_prob_actor,
                log_prob_ref,
                raw_reward,
                kl,
                total_reward,
            })
        })
        .collect();
    Ok(Collected {
        trajectory: Trajectory {
            steps: steps.into_iter().collect::<Result<_>>()?,
        },
    })
}

/// How the advantage baseline is pooled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// one running mean over every step
    Global,
    /// a running mean per trading day, since rollouts revisit the same days
    #[default]
    PerDate,
}

#[derive(Debug, Clone, Copy, Default)]
struct Mean {
    count: u64,
    value: f64,
}

impl Mean {
    fn push(&mut self, x: f64) {
        self.count += 1;
        self.value += (x - self.value) / self.count as f64;
    }
}

/// Running-mean baseline carried across rollouts.
#[derive(Debug, Clone, Default)]
pub(crate) struct Baseline {
    kind: BaselineKind,
    global: Mean,
    per_date: BTreeMap<NaiveDate, Mean>,
}

impl Baseline {
    pub(crate) fn new(kind: BaselineKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    /// Folds in the rollout's totals, then returns `total - baseline` for each step.
    fn residuals(&mut self, steps: &[(NaiveDate, f64)]) -> Vec<f64> {
        for &(date, total) in steps {
            match self.kind {
                BaselineKind::Global => self.global.push(total),
                BaselineKind::PerDate => self.per_date.entry(date).or_default().push(total),
            }
        }
        steps
            .iter()
            .map(|(date, total)| {
                total
                    - match self.kind {
                        BaselineKind::Global => self.global.value,
                        BaselineKind::PerDate => self.per_date[date].value,
                    }
            })
            .collect()
    }
}

/// Total reward minus the running-mean baseline (which already includes this rollout),
/// standardised over the rollout; all zeros when the spread is zero.
pub(crate) fn advantages(steps: &[(NaiveDate, f64)], baseline: &mut Baseline) -> Vec<f64> {
    let raw = baseline.residuals(steps);
    let n = raw.len() as f64;
    let mean = raw.iter().sum::<f64>() / n;
    let var = raw.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std > 1e-12 * raw.iter().fold(0.0f64, |m, a| m.max(a.abs())) && std.is_finite() && std > 0.0 {
        raw.iter().map(|a| (a - mean) / std).collect()
    } else {
        vec![0.0; raw.len()]
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Mean keep probability per feature over the given days.
pub fn mean_probabilities(policy: &MaskPolicy, samples: &[DaySample]) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; policy.out_dim()];
    let mut days = 0usize;
    for s in samples {
        if let Some(v) = &s.embedding {
            for (a, p) in acc.iter_mut().zip(policy.probabilities(v.view())?) {
                *a += p;
            }
            days += 1;
        }
    }
    if days == 0 {
        return Err(Error::InvalidArgument("no days with embeddings".into()));
    }
    Ok(acc.into_iter().map(|a| a / days as f64).collect())
}

/// Runs `cfg.rollouts` collect-and-update cycles on the training days.
pub fn ppo_align(mut actor: Actor, reference: &MaskPolicy, samples: &[DaySample], cfg: &ScrlConfig) -> Result<PpoOutcome> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("alignment needs at least one training day".into()));
    }
    if reference.d_llm() != actor.policy.d_llm() || reference.out_dim() != actor.policy.out_dim() {
        return Err(Error::dims("reference policy", actor.policy.num_params(), reference.num_params()));
    }
    let mut policy_opt = Adam::new(cfg.learning_rate);
    let mut head_opt = Adam::new(cfg.head_learning_rate);
    let mut baseline = Baseline::new(cfg.baseline);
    let mut log = Vec::new();
    let mut summaries = Vec::with_capacity(cfg.rollouts);
    let mut cursor = 0usize;
    let mut step_id = 0u64;

    for rollout in 0..cfg.rollouts {
        // day schedule: each participant walks the calendar from the shared cursor
        let len = cfg.steps_per_rollout.min(samples.len() - cursor);
        let mut days = Vec::with_capacity(len * cfg.participants);
        for _ in 0..cfg.participants {
            days.extend(cursor..cursor + len);
        }
        cursor += len;
        if cursor >= samples.len() {
            cursor = 0;
        }

        let collected = collect_rollout(&actor, reference, samples, &days, cfg, step_id)?;
        step_id += days.len() as u64;
        let traj = collected.trajectory;
        let totals: Vec<(NaiveDate, f64)> = traj.steps.iter().map(|s| (s.date, s.total_reward)).collect();
        let adv = advantages(&totals, &mut baseline);

        let mut order: Vec<usize> = (0..traj.steps.len()).collect();
        let mut shuffle_rng = rng::stream(cfg.seed, (1 << 48) + rollout as u64);
        let mut first = None;
        let mut max_clip_excess = f64::NEG_INFINITY;
        let mut last_epoch = Vec::new();
        for epoch in 0..cfg.ppo_epochs {
            rng::shuffle(&mut shuffle_rng, &mut order);
            let mut epoch_vals = Vec::new();
            for batch in order.chunks(cfg.batch_size) {
                let states: Vec<ArrayView1<'_, f64>> = batch
                    .iter()
                    .map(|&k| samples[traj.steps[k].sample].embedding.as_ref().expect("checked").view())
                    .collect();
                let actions: Vec<&MaskVector> = batch.iter().map(|&k| &traj.steps[k].action).collect();
                let old: Vec<f64> = batch.iter().map(|&k| traj.steps[k].log_prob_actor).collect();
                let a: Vec<f64> = batch.iter().map(|&k| adv[k]).collect();
                let (value, mut grads) =
                    clipped_surrogate(&actor.policy, &states, &actions, &old, &a, cfg.clip_epsilon)?;
                if !(value.clipped.is_finite() && grads.is_finite()) {
                    return Err(Error::Divergence(format!(
                        "non-finite surrogate {} in rollout {rollout}, epoch {epoch}",
                        value.clipped
                    )));
                }
                if first.is_none() {
                    first = Some((value.clipped, mean(a.iter().copied())));
                }
                max_clip_excess = max_clip_excess.max(value.clipped - value.unclipped);
                epoch_vals.push(value.clipped);
                // ascent on the surrogate
                grads.w_map.mapv_inplace(|g| -g);
                grads.b_map.mapv_inplace(|g| -g);
                policy_opt.step(&mut actor.policy, &grads);

                if cfg.train_heads {
                    let batch_days: Vec<&DaySample> = batch.iter().map(|&k| &samples[traj.steps[k].sample]).collect();
                    let (loss, head_grads) = batch_mse_grad(&actor.model, &batch_days, Some(&actions))?;
                    if !(loss.is_finite() && head_grads.is_finite()) {
                        return Err(Error::Divergence(format!(
                            "non-finite head loss {loss} in rollout {rollout}, epoch {epoch}"
                        )));
                    }
                    head_opt.step(&mut actor.model, &head_grads);
                }
            }
            last_epoch = epoch_vals;
        }
        let final_surrogate = mean(last_epoch.iter().copied());
        let (first_surrogate, first_batch_mean_advantage) = first.expect("at least one batch");
        let summary = RolloutSummary {
            rollout,
            steps: traj.steps.len(),
            mean_raw_reward: mean(traj.steps.iter().map(|s| s.raw_reward)),
            mean_kl: mean(traj.steps.iter().map(|s| s.kl)),
            mean_total_reward: mean(traj.steps.iter().map(|s| s.total_reward)),
            first_surrogate,
            first_batch_mean_advantage,
            final_surrogate,
            max_clip_excess,
            mean_probabilities: mean_probabilities(&actor.policy, samples)?,
        };
        log::info!(
            "rollout {rollout}: {} steps, raw {:.4e}, kl {:.4e}, surrogate {:.4}",
            summary.steps,
            summary.mean_raw_reward,
            summary.mean_kl,
            summary.final_surrogate
        );
        log.extend(traj.steps.iter().enumerate().map(|(k, s)| StepLog {
            rollout,
            step: k,
            date: s.date,
            raw_reward: s.raw_reward,
            kl: s.kl,
            total_reward: s.total_reward,
            surrogate: final_surrogate,
            validation_rank_ic: None,
        }));
        summaries.push(summary);
    }
    Ok(PpoOutcome {
        actor,
        log,
        rollouts: summaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn advantages_are_standardised() {
        let d = |k: u32| NaiveDate::from_ymd_opt(2021, 3, k).unwrap();
        let mut b = Baseline::new(BaselineKind::Global);
        let a = advantages(&[(d(1), 1.0), (d(2), 2.0), (d(3), 3.0), (d(4), 4.0)], &mut b);
        let m: f64 = a.iter().sum::<f64>() / 4.0;
        let v: f64 = a.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 4.0;
        assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
        let mut b = Baseline::new(BaselineKind::Global);
        assert_eq!(advantages(&[(d(1), 2.0), (d(2), 2.0)], &mut b), vec![0.0, 0.0]);
        // per-date pooling removes the day effect
        let mut b = Baseline::new(BaselineKind::PerDate);
        let a = advantages(&[(d(1), 10.0), (d(1), 12.0), (d(2), -5.0), (d(2), -3.0)], &mut b);
        assert_eq!(a, vec![-1.0, 1.0, -1.0, 1.0]);
    }

    #[test]
    fn config_defaults() {
        let c = ScrlConfig::default();
        assert_eq!((c.steps_per_rollout, c.batch_size), (2048, 128));
        assert_eq!((c.learning_rate, c.reward_scale), (0.00025, 1e-4));
        c.validate().unwrap();
    }
}
