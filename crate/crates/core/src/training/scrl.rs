use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::dataset::{attach_embeddings, DaySample};
use super::policy::{Actor, MaskPolicy};
use super::ppo::{ppo_align, RolloutSummary, ScrlConfig, StepLog};
use crate::backtest::rank_ic;
use crate::embeddings::{load_embeddings, EmbeddingSeries, MissingDayPolicy};
use crate::panel::TradingCalendar;
use crate::Result;

/// Supplies the embedding series at the start of each round.
pub trait EmbeddingSource {
    fn load(&mut self, round: usize) -> Result<EmbeddingSeries>;
}

/// Fixed in-memory series.
#[derive(Debug, Clone)]
pub struct StaticEmbeddings(pub EmbeddingSeries);

impl EmbeddingSource for StaticEmbeddings {
    fn load(&mut self, _round: usize) -> Result<EmbeddingSeries> {
        Ok(self.0.clone())
    }
}

/// Re-reads a JSONL file every round, so an external process can refresh it in between.
#[derive(Debug, Clone)]
pub struct FileEmbeddings {
    pub path: PathBuf,
    pub calendar: Option<TradingCalendar>,
    pub policy: MissingDayPolicy,
}

impl EmbeddingSource for FileEmbeddings {
    fn load(&mut self, round: usize) -> Result<EmbeddingSeries> {
        log::info!("round {round}: loading embeddings from {}", self.path.display());
        load_embeddings(&self.path, self.calendar.as_ref(), self.policy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub validation_rank_ic: Option<f64>,
    pub rollouts: Vec<RolloutSummary>,
}

#[derive(Debug, Clone)]
pub struct ScrlOutcome {
    pub actor: Actor,
    pub rounds: Vec<RoundReport>,
    pub log: Vec<StepLog>,
    pub stopped_early: bool,
}

/// Mean daily RankIC of the actor's evaluation-mask predictions; undefined days skipped.
pub fn validation_rank_ic(actor: &Actor, samples: &[DaySample]) -> Result<Option<f64>> {
    let mut total = 0.0;
    let mut days = 0usize;
    for s in samples {
        let Some(v) = &s.embedding else { continue };
        let pred = actor.predict(s.features.view(), v.view())?;
        if let Ok(ic) = rank_ic(pred.view(), s.targets.view()) {
            total += ic;
            days += 1;
        }
    }
    Ok((days > 0).then(|| total / days as f64))
}

/// Alternates alignment with embedding re-ingestion for up to `rounds` rounds.
///
/// Round r uses seed `cfg.seed + r`. Stops once validation RankIC has failed to improve on
/// its best value for two consecutive rounds.
pub fn scrl_loop(
    mut actor: Actor,
    reference: &MaskPolicy,
    train: &mut [DaySample],
    validation: &mut [DaySample],
    source: &mut dyn EmbeddingSource,
    cfg: &ScrlConfig,
    rounds: usize,
) -> Result<ScrlOutcome> {
    if rounds == 0 {
        return Err(crate::Error::InvalidArgument("rounds must be >= 1".into()));
    }
    let mut reports = Vec::new();
    let mut log = Vec::new();
    let mut best: Option<f64> = None;
    let mut stale = 0;
    let mut stopped_early = false;
    for round in 0..rounds {
        let series = source.load(round)?;
        attach_embeddings(train, &series)?;
        attach_embeddings(validation, &series)?;
        let round_cfg = ScrlConfig {
            seed: cfg.seed.wrapping_add(round as u64),
            ..cfg.clone()
        };
        let outcome = ppo_align(actor, reference, train, &round_cfg)?;
        actor = outcome.actor;
        let ic = validation_rank_ic(&actor, validation)?;
        // rollout numbering continues across rounds
        let offset: usize = reports.iter().map(|r: &RoundReport| r.rollouts.len()).sum();
        log.extend(outcome.log.into_iter().map(|mut row| {
            row.rollout += offset;
            row.validation_rank_ic = ic;
            row
        }));
        log::info!("round {round}: validation RankIC {ic:?}");
        let rollouts = outcome
            .rollouts
            .into_iter()
            .map(|mut r| {
                r.rollout += offset;
                r
            })
            .collect();
        reports.push(RoundReport {
            round,
            validation_rank_ic: ic,
            rollouts,
        });

        let improved = match (ic, best) {
            (Some(v), Some(b)) => v > b,
            (Some(_), None) => true,
            (None, _) => false,
        };
        if improved {
            best = ic;
            stale = 0;
        } else {
            stale += 1;
            if stale >= 2 && round + 1 < rounds {
                log::info!("validation RankIC flat for 2 rounds; stopping after round {round}");
                stopped_early = true;
                break;
            }
        }
    }
    Ok(ScrlOutcome {
        actor,
        rounds: reports,
        log,
        stopped_early,
    })
}
