use std::fmt::Write as _;

use clap::Args;
use lgscrl::lgmodel::{Checkpoint, LgModelParams, ModelDims, Variant};
use lgscrl::training::{build_samples, train_critic};

use super::{create_out, load_market, load_series, slug, target_returns, train_end, usage, write_snapshot, write_text, Context, PathArgs};
use crate::CliError;

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Local, LG-STOCK or LG-LLM [default: config model.variant]
    #[arg(long)]
    pub variant: Option<Variant>,
    /// target return horizon in trading days [default: config data.horizon]
    #[arg(long)]
    pub horizon: Option<usize>,
    /// checkpoint label [default: the variant name]
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[command(flatten)]
    pub paths: PathArgs,
}

pub fn run(ctx: Context, args: TrainArgs) -> Result<(), CliError> {
    let mut cfg = ctx.cfg;
    args.paths.apply(&mut cfg);
    if let Some(v) = args.variant {
        cfg.model.variant = v;
    }
    if let Some(h) = args.horizon {
        cfg.data.horizon = h;
    }
    if let Some(e) = args.epochs {
        cfg.supervised.epochs = e;
    }
    if let Some(lr) = args.learning_rate {
        cfg.supervised.learning_rate = lr;
    }
    cfg.validate_common()?;
    let variant = cfg.model.variant;
    if variant == Variant::ScrlLg {
        return Err(usage("train handles Local, LG-STOCK and LG-LLM; use `align` for SCRL-LG"));
    }
    if variant.needs_embedding() && cfg.paths.embeddings.is_none() {
        return Err(usage(format!(
            "paths.embeddings is required for variant {variant} (set it in the config or with --embeddings)"
        )));
    }
    let label = args.label.unwrap_or_else(|| variant.name().to_string());

    let market = load_market(&cfg)?;
    let series = if variant.needs_embedding() {
        Some(load_series(&cfg, &market)?)
    } else {
        None
    };
    if let Some(s) = &series {
        cfg.model.d_llm = s.d_llm();
    }
    let targets = target_returns(&market.returns, cfg.data.horizon)?;
    let end = train_end(&cfg, &market)?;
    let samples = build_samples(&market.features, &targets, series.as_ref(), None, Some(end))?;
    if samples.is_empty() {
        return Err(usage(format!("no training days on or before {end}")));
    }
    let dims = ModelDims {
        m: market.features.m(),
        hidden: cfg.model.hidden,
        factors: cfg.model.factors,
        d_llm: cfg.model.d_llm,
    };
    let mut init = LgModelParams::init(dims, variant, cfg.model.seed)?;
    init.mask_path = cfg.model.mask_path;

    let (model, report) = train_critic(&samples, init, &cfg.supervised)?;
    log::info!(
        "{label}: loss {:.4e} -> {:.4e} over {} days",
        report.initial_loss,
        report.final_loss(),
        samples.len()
    );

    let mut loss_csv = String::from("epoch,loss\n");
    writeln!(loss_csv, "0,{}", report.initial_loss).expect("string write");
    for (k, l) in report.epoch_losses.iter().enumerate() {
        writeln!(loss_csv, "{},{l}", k + 1).expect("string write");
    }
    let out = &ctx.out;
    let name = slug(&label);
    create_out(out)?;
    Checkpoint::new(label, cfg.data.horizon, model, None).save(out.join(format!("{name}.ckpt.json")))?;
    write_text(&out.join(format!("{name}_loss.csv")), &loss_csv)?;
    write_snapshot(&cfg, out)?;
    Ok(())
}
