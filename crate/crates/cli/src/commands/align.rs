use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use lgscrl::lgmodel::{Checkpoint, Variant};
use lgscrl::training::{build_samples, init_actor, scrl_loop, split_date, FileEmbeddings, RoundReport, StepLog};
use serde::Serialize;

use super::{create_out, load_market, load_series, slug, train_end, usage, write_json, write_snapshot, write_text, Context, PathArgs};
use crate::CliError;

/// Share of the training days kept for alignment when no validation start is configured.
const ALIGN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, Args)]
pub struct AlignArgs {
    /// LG-STOCK critic checkpoint
    #[arg(long)]
    pub critic: PathBuf,
    /// alignment rounds, each re-reading the embedding file [default: config scrl.rounds]
    #[arg(long)]
    pub rounds: Option<usize>,
    /// KL coefficient
    #[arg(long)]
    pub theta: Option<f64>,
    /// steps per rollout
    #[arg(long)]
    pub steps: Option<usize>,
    /// rollouts per round
    #[arg(long)]
    pub rollouts: Option<usize>,
    #[arg(long)]
    pub participants: Option<usize>,
    /// policy step size
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// checkpoint label
    #[arg(long, default_value = "SCRL-LG")]
    pub label: String,
    #[command(flatten)]
    pub paths: PathArgs,
}

#[derive(Serialize)]
struct RoundsFile<'a> {
    stopped_early: bool,
    train_days: usize,
    validation_days: usize,
    rounds: &'a [RoundReport],
}

fn diagnostics_csv(log: &[StepLog]) -> String {
    let mut s = String::from("rollout,step,date,raw_reward,kl,total_reward,surrogate,validation_rank_ic\n");
    for r in log {
        let ic = r.validation_rank_ic.map_or(String::new(), |v| v.to_string());
        writeln!(
            s,
            "{},{},{},{},{},{},{},{ic}",
            r.rollout, r.step, r.date, r.raw_reward, r.kl, r.total_reward, r.surrogate
        )
        .expect("string write");
    }
    s
}

pub fn run(ctx: Context, args: AlignArgs) -> Result<(), CliError> {
    let mut cfg = ctx.cfg;
    args.paths.apply(&mut cfg);
    let ppo = &mut cfg.scrl.ppo;
    if let Some(v) = args.theta {
        ppo.theta = v;
    }
    if let Some(v) = args.steps {
        ppo.steps_per_rollout = v;
    }
    if let Some(v) = args.rollouts {
        ppo.rollouts = v;
    }
    if let Some(v) = args.participants {
        ppo.participants = v;
    }
    if let Some(v) = args.learning_rate {
        ppo.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        ppo.batch_size = v;
    }
    if let Some(v) = args.rounds {
        cfg.scrl.rounds = v;
    }
    cfg.validate_common()?;
    if !args.critic.exists() {
        return Err(usage(format!("critic checkpoint {} does not exist", args.critic.display())));
    }
    let critic = Checkpoint::load(&args.critic)?;
    if critic.model.variant != Variant::LgStock {
        return Err(usage(format!(
            "critic {} is {}, alignment needs an LG-STOCK critic",
            args.critic.display(),
            critic.model.variant
        )));
    }

    let market = load_market(&cfg)?;
    let series = load_series(&cfg, &market)?;
    if critic.dims.m != market.features.m() {
        return Err(lgscrl::Error::DimensionMismatch {
            context: "critic feature count".into(),
            expected: critic.dims.m,
            actual: market.features.m(),
        }
        .into());
    }
    cfg.model.d_llm = series.d_llm();
    let end = train_end(&cfg, &market)?;
    let all = build_samples(&market.features, &market.returns, Some(&series), None, Some(end))?;
    let dates: Vec<_> = all.iter().map(|s| s.date).collect();
    let val_start = match cfg.split.validation_start {
        Some(d) => d,
        None => {
            let last_train = split_date(&dates, ALIGN_FRACTION)?;
            *dates
                .iter()
                .find(|d| **d > last_train)
                .ok_or_else(|| usage("training period too short for a validation split"))?
        }
    };
    let (mut train, mut validation): (Vec<_>, Vec<_>) = all.into_iter().partition(|s| s.date < val_start);
    if train.is_empty() || validation.is_empty() {
        return Err(usage(format!(
            "validation start {val_start} leaves {} training and {} validation days",
            train.len(),
            validation.len()
        )));
    }

    let (actor, reference) = init_actor(&critic.model, series.d_llm(), cfg.scrl.ppo.seed)?;
    let mut source = FileEmbeddings {
        path: cfg.require_path("embeddings")?.to_path_buf(),
        calendar: Some(market.features.calendar().clone()),
        policy: cfg.data.missing_embeddings,
    };
    let outcome = scrl_loop(
        actor,
        &reference,
        &mut train,
        &mut validation,
        &mut source,
        &cfg.scrl.ppo,
        cfg.scrl.rounds,
    )?;

    let out = &ctx.out;
    create_out(out)?;
    let ckpt = Checkpoint::new(
        args.label.clone(),
        critic.horizon,
        outcome.actor.model.clone(),
        Some(outcome.actor.policy.clone()),
    );
    ckpt.save(out.join(format!("{}.ckpt.json", slug(&args.label))))?;
    write_text(&out.join("ppo_diagnostics.csv"), &diagnostics_csv(&outcome.log))?;
    write_json(
        &RoundsFile {
            stopped_early: outcome.stopped_early,
            train_days: train.len(),
            validation_days: validation.len(),
            rounds: &outcome.rounds,
        },
        &out.join("rounds.json"),
    )?;
    write_snapshot(&cfg, out)?;
    Ok(())
}
