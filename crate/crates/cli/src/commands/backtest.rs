use std::collections::BTreeSet;
use std::path::PathBuf;

use clap::Args;
use lgscrl::backtest::{
    horizon_sweep, run_backtest, write_comparison_table, write_cumulative_csv, write_metrics_json, write_report_csv,
    write_sweep_csv, BacktestData, BacktestReport, ModelPredictor, SweepModel,
};
use lgscrl::lgmodel::Checkpoint;

use super::{create_out, load_market, load_series, slug, test_start, usage, write_snapshot, Context, PathArgs};
use crate::CliError;

#[derive(Debug, Clone, Args)]
pub struct BacktestArgs {
    /// model checkpoints to evaluate
    #[arg(required = true)]
    pub checkpoints: Vec<PathBuf>,
    /// comma-separated RankIC horizons for the sweep, e.g. 5,10,20
    #[arg(long, value_delimiter = ',')]
    pub horizons: Vec<usize>,
    #[command(flatten)]
    pub paths: PathArgs,
}

fn uses_embeddings(c: &Checkpoint) -> bool {
    c.model.variant.needs_embedding() || c.policy.is_some()
}

pub fn run(ctx: Context, args: BacktestArgs) -> Result<(), CliError> {
    let mut cfg = ctx.cfg;
    args.paths.apply(&mut cfg);
    cfg.validate_common()?;
    if args.horizons.contains(&0) {
        return Err(usage("--horizons entries must be >= 1"));
    }
    let mut checkpoints = Vec::with_capacity(args.checkpoints.len());
    let mut names = BTreeSet::new();
    for path in &args.checkpoints {
        if !path.exists() {
            return Err(usage(format!("checkpoint {} does not exist", path.display())));
        }
        let ckpt = Checkpoint::load(path)?;
        if !names.insert(slug(&ckpt.label)) {
            return Err(usage(format!("two checkpoints share the label {:?}", ckpt.label)));
        }
        checkpoints.push(ckpt);
    }
    let needs_embeddings = checkpoints.iter().any(uses_embeddings);
    if needs_embeddings && cfg.paths.embeddings.is_none() {
        return Err(usage("paths.embeddings is required to backtest LG-LLM or SCRL-LG checkpoints"));
    }

    let market = load_market(&cfg)?;
    let series = if needs_embeddings {
        Some(load_series(&cfg, &market)?)
    } else {
        None
    };
    for c in &checkpoints {
        if c.dims.m != market.features.m() {
            return Err(lgscrl::Error::DimensionMismatch {
                context: format!("feature count of checkpoint {:?}", c.label),
                expected: c.dims.m,
                actual: market.features.m(),
            }
            .into());
        }
        if let (true, Some(s)) = (uses_embeddings(c), &series) {
            if c.dims.d_llm != s.d_llm() {
                return Err(lgscrl::Error::DimensionMismatch {
                    context: format!("embedding width of checkpoint {:?}", c.label),
                    expected: c.dims.d_llm,
                    actual: s.d_llm(),
                }
                .into());
            }
        }
    }
    let predictors = checkpoints
        .iter()
        .map(ModelPredictor::from_checkpoint)
        .collect::<lgscrl::Result<Vec<_>>>()?;
    let data = BacktestData {
        embeddings: series.as_ref(),
        start: Some(test_start(&cfg, &market)?),
        ..BacktestData::new(&market.features, &market.returns)
    };

    let mut reports: Vec<(String, BacktestReport)> = Vec::with_capacity(checkpoints.len());
    for (c, p) in checkpoints.iter().zip(&predictors) {
        let report = run_backtest(p, data, &cfg.backtest)?;
        log::info!(
            "{}: RankIC {:?}, annual return {:.4}",
            c.label,
            report.metrics.rank_ic_mean,
            report.metrics.annual_return
        );
        reports.push((c.label.clone(), report));
    }
    let sweep = if args.horizons.is_empty() {
        None
    } else {
        let models: Vec<SweepModel<'_>> = checkpoints
            .iter()
            .zip(&predictors)
            .flat_map(|(c, p)| {
                args.horizons.iter().map(move |&h| SweepModel {
                    label: c.label.clone(),
                    horizon: h,
                    predictor: p,
                })
            })
            .collect();
        Some(horizon_sweep(&models, data, &cfg.backtest)?)
    };

    let out = &ctx.out;
    create_out(out)?;
    for (label, report) in &reports {
        let name = slug(label);
        write_report_csv(report, out.join(format!("{name}_report.csv")))?;
        write_metrics_json(&report.metrics, out.join(format!("{name}_metrics.json")))?;
    }
    let table: Vec<_> = reports.iter().map(|(l, r)| (l.clone(), &r.metrics)).collect();
    write_comparison_table(&table, out.join("comparison.csv"))?;
    let curves: Vec<_> = reports.iter().map(|(l, r)| (l.clone(), r)).collect();
    write_cumulative_csv(&curves, out.join("cumulative.csv"))?;
    if let Some(rows) = &sweep {
        write_sweep_csv(rows, out.join("horizon_sweep.csv"))?;
    }
    write_snapshot(&cfg, out)?;
    Ok(())
}
