use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::engine::BacktestReport;
use super::metrics::Metrics;
use super::sweep::SweepRow;
use crate::{Error, Result};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

macro_rules! line {
    ($path:expr, $w:expr, $($arg:tt)*) => {
        writeln!($w, $($arg)*).map_err(|e| Error::io($path, e))?
    };
}

/// `date,equity,daily_return,rank_ic,turnover,cost`, equity at each day's end.
pub fn write_report_csv(report: &BacktestReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    line!(path, w, "date,equity,daily_return,rank_ic,turnover,cost");
    for (k, date) in report.dates.iter().enumerate() {
        line!(
            path,
            w,
            "{date},{},{},{},{},{}",
            report.equity_curve[k + 1],
            report.daily_returns[k],
            opt(report.rank_ic_series[k]),
            report.turnover[k],
            report.costs[k]
        );
    }
    finish(path, w)
}

pub fn write_metrics_json(metrics: &Metrics, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(metrics)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Cumulative return per date, one column per labelled report. Reports must share dates.
pub fn write_cumulative_csv(reports: &[(String, &BacktestReport)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let Some((_, first)) = reports.first() else {
        return Err(Error::InvalidArgument("no reports to write".into()));
    };
    if let Some((label, _)) = reports.iter().find(|(_, r)| r.dates != first.dates) {
        return Err(Error::DateMisalignment(format!("report {label} covers different dates")));
    }
    let mut w = create(path)?;
    let header: Vec<&str> = reports.iter().map(|(l, _)| l.as_str()).collect();
    line!(path, w, "date,{}", header.join(","));
    for (k, date) in first.dates.iter().enumerate() {
        let cols: Vec<String> = reports.iter().map(|(_, r)| (r.equity_curve[k + 1] - 1.0).to_string()).collect();
        line!(path, w, "{date},{}", cols.join(","));
    }
    finish(path, w)
}

/// `model,rank_ic,annual_return,top_minus_bottom,sharpe,mdd`, one row per model.
pub fn write_comparison_table(rows: &[(String, &Metrics)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    line!(path, w, "model,rank_ic,annual_return,top_minus_bottom,sharpe,mdd");
    for (label, m) in rows {
        line!(
            path,
            w,
            "{label},{},{},{},{},{}",
            opt(m.rank_ic_mean),
            m.annual_return,
            m.top_minus_bottom,
            opt(m.sharpe),
            m.mdd
        );
    }
    finish(path, w)
}

/// `label,horizon,rank_ic,annual_return,sharpe,turnover`.
pub fn write_sweep_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    line!(path, w, "label,horizon,rank_ic,annual_return,sharpe,turnover");
    for r in rows {
        line!(
            path,
            w,
            "{},{},{},{},{},{}",
            r.label,
            r.horizon,
            opt(r.rank_ic),
            r.annual_return,
            opt(r.sharpe),
            r.turnover
        );
    }
    finish(path, w)
}
