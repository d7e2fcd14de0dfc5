use std::path::PathBuf;

use clap::Args;
use lgscrl::panel::{generate_synthetic, save_panel, SynthConfig};
use lgscrl::training::split_date;

use super::{create_out, usage, write_json, write_snapshot, Context};
use crate::CliError;

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    pub stocks: usize,
    /// feature count m
    #[arg(long, default_value_t = 30)]
    pub features: usize,
    /// factor count D
    #[arg(long, default_value_t = 10)]
    pub factors: usize,
    /// planted support size
    #[arg(long, default_value_t = 4)]
    pub support: usize,
    #[arg(long, default_value_t = 32)]
    pub d_llm: usize,
    #[arg(long, default_value_t = 500)]
    pub days: usize,
    /// idiosyncratic return noise
    #[arg(long, default_value_t = 0.02)]
    pub noise: f64,
    /// noise added to the encoded embeddings
    #[arg(long, default_value_t = 0.3)]
    pub embedding_noise: f64,
}

pub fn run(ctx: Context, args: SynthArgs, seed: Option<u64>) -> Result<(), CliError> {
    let seed = seed.unwrap_or(ctx.cfg.model.seed);
    let mut sc = SynthConfig::new(
        seed,
        args.stocks,
        args.features,
        args.factors,
        args.d_llm,
        args.days,
        args.noise,
    );
    sc.support = args.support;
    sc.embedding_noise = args.embedding_noise;
    let market = generate_synthetic(&sc).map_err(|e| match e {
        lgscrl::Error::InvalidArgument(m) => usage(m),
        other => other.into(),
    })?;

    // a config that points at the generated files, ready for `train --config`
    let mut cfg = ctx.cfg;
    cfg.paths.features = Some(PathBuf::from("features.csv"));
    cfg.paths.returns = Some(PathBuf::from("returns.csv"));
    cfg.paths.embeddings = Some(PathBuf::from("embeddings.jsonl"));
    cfg.paths.out = None;
    cfg.model.seed = seed;
    cfg.model.m = Some(args.features);
    cfg.model.d_llm = args.d_llm;
    if args.days >= 2 {
        cfg.split.train_end = Some(split_date(market.features.calendar().dates(), 0.7)?);
    }

    let out = &ctx.out;
    create_out(out)?;
    save_panel(
        &market.features,
        &market.returns,
        out.join("features.csv"),
        out.join("returns.csv"),
    )?;
    market.embeddings.save(out.join("embeddings.jsonl"))?;
    write_json(&market.truth, &out.join("truth.json"))?;
    write_snapshot(&cfg, out)?;
    log::info!("wrote synthetic market ({} days) to {}", args.days, out.display());
    Ok(())
}
