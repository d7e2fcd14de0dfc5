use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::Args;
use lgscrl::backtest::Metrics;

use super::{slug, usage, write_text, Context};
use crate::CliError;

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// backtest output directory [default: --out]
    pub dir: Option<PathBuf>,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

/// Markdown summary of a backtest directory: one row per model of `comparison.csv`, read
/// from its metrics file, plus the horizon sweep if present.
pub fn run(ctx: Context, args: ReportArgs) -> Result<(), CliError> {
    let dir = args.dir.unwrap_or(ctx.out);
    let table = dir.join("comparison.csv");
    let text = fs::read_to_string(&table).map_err(|e| usage(format!("cannot read {}: {e}", table.display())))?;
    let labels: Vec<&str> = text
        .lines()
        .skip(1)
        .filter_map(|l| l.split(',').next())
        .filter(|l| !l.is_empty())
        .collect();
    if labels.is_empty() {
        return Err(usage(format!("{} lists no models", table.display())));
    }

    let mut md = String::from("| model | RankIC | Annual Return | Top Minus Bottom | Sharpe | MDD | Turnover |\n");
    md.push_str("|---|---|---|---|---|---|---|\n");
    for label in labels {
        let path = dir.join(format!("{}_metrics.json", slug(label)));
        let text = fs::read_to_string(&path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        let m: Metrics =
            serde_json::from_str(&text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        writeln!(
            md,
            "| {label} | {} | {:.4} | {:.4} | {} | {:.4} | {:.4} |",
            cell(m.rank_ic_mean),
            m.annual_return,
            m.top_minus_bottom,
            cell(m.sharpe),
            m.mdd,
            m.turnover_mean
        )
        .expect("string write");
    }

    let sweep = dir.join("horizon_sweep.csv");
    if sweep.exists() {
        let text = fs::read_to_string(&sweep)?;
        md.push_str("\n| model | horizon | RankIC | Annual Return | Sharpe |\n|---|---|---|---|---|\n");
        for line in text.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() < 5 {
                return Err(CliError::Runtime(format!("{}: malformed row {line:?}", sweep.display())));
            }
            let num = |s: &str| s.parse::<f64>().ok();
            writeln!(
                md,
                "| {} | {} | {} | {} | {} |",
                f[0],
                f[1],
                cell(num(f[2])),
                cell(num(f[3])),
                cell(num(f[4]))
            )
            .expect("string write");
        }
    }
    write_text(&dir.join("report.md"), &md)?;
    print!("{md}");
    Ok(())
}
