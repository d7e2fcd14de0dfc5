use std::cell::RefCell;
use std::collections::BTreeSet;

use chrono::NaiveDate;
use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use super::metrics::{rank_ic, summary_metrics, MetricInputs, Metrics};
use super::portfolio::{quantile_assign, rebalance, PortfolioState, Trade};
use crate::embeddings::EmbeddingSeries;
use crate::panel::{CrossSection, FeaturePanel, ReturnPanel};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BacktestConfig {
    pub quantiles: usize,
    /// fraction of traded notional charged per side
    pub cost_rate: f64,
    /// rebalance every `holding` trading days
    pub holding: usize,
    pub annualization_days: usize,
    /// annual
    pub risk_free_rate: f64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            quantiles: 10,
            cost_rate: 0.003,
            holding: 1,
            annualization_days: 252,
            risk_free_rate: 0.0,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.quantiles < 2 {
            return Err(Error::InvalidArgument("backtest.quantiles must be >= 2".into()));
        }
        if !(0.0..1.0).contains(&self.cost_rate) {
            return Err(Error::InvalidArgument(format!(
                "backtest.cost_rate = {} must be in [0, 1)",
                self.cost_rate
            )));
        }
        if self.holding == 0 || self.annualization_days == 0 {
            return Err(Error::InvalidArgument(
                "backtest.holding and backtest.annualization_days must be >= 1".into(),
            ));
        }
        if !self.risk_free_rate.is_finite() {
            return Err(Error::InvalidArgument("backtest.risk_free_rate must be finite".into()));
        }
        Ok(())
    }
}

/// What a predictor may see when deciding on `date`: data dated on or before it.
pub struct DecisionContext<'a> {
    date: NaiveDate,
    features: &'a FeaturePanel,
    embeddings: Option<&'a EmbeddingSeries>,
    queried: RefCell<Vec<NaiveDate>>,
}

impl<'a> DecisionContext<'a> {
    pub fn new(date: NaiveDate, features: &'a FeaturePanel, embeddings: Option<&'a EmbeddingSeries>) -> Self {
        Self {
            date,
            features,
            embeddings,
            queried: RefCell::new(Vec::new()),
        }
    }

    pub fn date(&self) -> NaiveDate {
        self.date
    }

    fn guard(&self, date: NaiveDate) -> Result<()> {
        self.queried.borrow_mut().push(date);
        if date > self.date {
            return Err(Error::LookAhead {
                decision: self.date,
                queried: date,
            });
        }
        Ok(())
    }

    /// The cross-section being ranked today; predictions must follow its row order.
    pub fn cross_section(&self) -> Result<&'a CrossSection> {
        self.features_on(self.date)
    }

    pub fn features_on(&self, date: NaiveDate) -> Result<&'a CrossSection> {
        self.guard(date)?;
        self.features.section_on(date).ok_or(Error::NotTradingDay(date))
    }

    pub fn embedding(&self) -> Result<&'a [f64]> {
        self.embedding_on(self.date)
    }

    pub fn embedding_on(&self, date: NaiveDate) -> Result<&'a [f64]> {
        self.guard(date)?;
        let series = self.embeddings.ok_or_else(|| Error::MissingInput {
            variant: "this predictor".into(),
            what: "an embedding series".into(),
        })?;
        series.vector_for_prediction(date)
    }

    /// Dates queried so far.
    pub fn queried(&self) -> Vec<NaiveDate> {
        self.queried.borrow().clone()
    }
}

/// Produces one prediction per row of `ctx.cross_section()`.
pub trait Predictor {
    fn predict(&self, ctx: &DecisionContext<'_>) -> Result<Array1<f64>>;
}

impl<F> Predictor for F
where
    F: Fn(&DecisionContext<'_>) -> Result<Array1<f64>>,
{
    fn predict(&self, ctx: &DecisionContext<'_>) -> Result<Array1<f64>> {
        self(ctx)
    }
}

/// Panels for one backtest.
#[derive(Debug, Clone, Copy)]
pub struct BacktestData<'a> {
    pub features: &'a FeaturePanel,
    /// one-day returns accrued by the portfolio
    pub returns: &'a ReturnPanel,
    /// returns scored by RankIC; defaults to `returns`
    pub ic_returns: Option<&'a ReturnPanel>,
    pub embeddings: Option<&'a EmbeddingSeries>,
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
}

impl<'a> BacktestData<'a> {
    pub fn new(features: &'a FeaturePanel, returns: &'a ReturnPanel) -> Self {
        Self {
            features,
            returns,
            ic_returns: None,
            embeddings: None,
            start: None,
            end: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub dates: Vec<NaiveDate>,
    /// start-of-test equity followed by the equity after each day
    pub equity_curve: Vec<f64>,
    pub daily_returns: Vec<f64>,
    pub rank_ic_series: Vec<Option<f64>>,
    pub turnover: Vec<f64>,
    pub costs: Vec<f64>,
    pub top_bucket_returns: Vec<f64>,
    pub bottom_bucket_returns: Vec<f64>,
    pub metrics: Metrics,
}

fn mean_of(rows: &[usize], r: &[f64]) -> f64 {
    rows.iter().map(|&i| r[i]).sum::<f64>() / rows.len() as f64
}

/// Daily decile simulation.
///
/// On each test date: predict, sort into quantiles, rebalance into the top bucket at the
/// close, and accrue the next day's returns on the held weights:
/// `equity_next = equity * (1 + sum_i w_i r_i) - cost`. Weights then drift with returns.
pub fn run_backtest(predictor: &dyn Predictor, data: BacktestData<'_>, cfg: &BacktestConfig) -> Result<BacktestReport> {
    cfg.validate()?;
    if data.returns.horizon() != 1 {
        return Err(Error::InvalidArgument(format!(
            "the accrual panel must hold one-day returns, got horizon {}",
            data.returns.horizon()
        )));
    }
    let dates: Vec<NaiveDate> = data
        .returns
        .calendar()
        .dates()
        .iter()
        .copied()
        .filter(|d| data.start.is_none_or(|s| *d >= s) && data.end.is_none_or(|e| *d <= e))
        .collect();
    if dates.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "backtest window has {} trading days; need at least 2",
            dates.len()
        )));
    }

    let mut state = PortfolioState::default();
    let mut equity_curve = vec![state.equity];
    let (mut daily_returns, mut rank_ics, mut turnover, mut costs) = (vec![], vec![], vec![], vec![]);
    let (mut top_returns, mut bottom_returns) = (vec![], vec![]);

    for (k, &date) in dates.iter().enumerate() {
        let section = data.features.section_on(date).ok_or_else(|| {
            Error::DateMisalignment(format!("return date {date} has no feature cross-section"))
        })?;
        let ctx = DecisionContext::new(date, data.features, data.embeddings);
        let pred = predictor.predict(&ctx)?;
        if pred.len() != section.len() {
            return Err(Error::dims(format!("predictions on {date}"), section.len(), pred.len()));
        }
        let aligned = data.returns.aligned(date, section).expect("date is in the return calendar");
        let rows: Vec<usize> = (0..section.len()).filter(|&i| aligned[i].is_some()).collect();
        let ids: Vec<String> = rows.iter().map(|&i| section.stock_ids[i].clone()).collect();
        let preds: Vec<f64> = rows.iter().map(|&i| pred[i]).collect();
        let rets: Vec<f64> = rows.iter().map(|&i| aligned[i].expect("kept")).collect();
        let labels = quantile_assign(&preds, &ids, cfg.quantiles)?;

        let top: Vec<usize> = (0..rows.len()).filter(|&j| labels[j] == cfg.quantiles - 1).collect();
        let bottom: Vec<usize> = (0..rows.len()).filter(|&j| labels[j] == 0).collect();
        top_returns.push(mean_of(&top, &rets));
        bottom_returns.push(mean_of(&bottom, &rets));

        let trade = if k % cfg.holding == 0 {
            let targets: BTreeSet<String> = top.iter().map(|&j| ids[j].clone()).collect();
            let (next, trade) = rebalance(&state, &targets, cfg)?;
            state.weights = next.weights;
            trade
        } else {
            Trade {
                cost: 0.0,
                turnover: 0.0,
            }
        };

        let ret_of = |id: &str| ids.binary_search_by(|s| s.as_str().cmp(id)).map_or(0.0, |j| rets[j]);
        let port: f64 = state.weights.iter().map(|(id, w)| w * ret_of(id)).sum();
        let equity_next = state.equity * (1.0 + port) - trade.cost;
        if !(equity_next.is_finite() && equity_next > 0.0) {
            return Err(Error::NonFinite(format!("equity {equity_next} on {date}")));
        }
        daily_returns.push(equity_next / state.equity - 1.0);
        if 1.0 + port > 0.0 {
            for (id, w) in state.weights.iter_mut() {
                *w *= (1.0 + ret_of(id)) / (1.0 + port);
            }
        }
        state.equity = equity_next;
        equity_curve.push(equity_next);
        turnover.push(trade.turnover);
        costs.push(trade.cost);

        let ic_panel = data.ic_returns.unwrap_or(data.returns);
        let ic = match ic_panel.aligned(date, section) {
            Some(ic_aligned) => {
                let keep: Vec<usize> = (0..section.len()).filter(|&i| ic_aligned[i].is_some()).collect();
                let p: Array1<f64> = keep.iter().map(|&i| pred[i]).collect();
                let r: Array1<f64> = keep.iter().map(|&i| ic_aligned[i].expect("kept")).collect();
                day_ic(p.view(), r.view(), date)?
            }
            None => None,
        };
        rank_ics.push(ic);
    }

    let metrics = summary_metrics(
        MetricInputs {
            daily_returns: &daily_returns,
            equity_curve: &equity_curve,
            turnover: &turnover,
            rank_ic: &rank_ics,
            top_bucket_returns: &top_returns,
            bottom_bucket_returns: &bottom_returns,
        },
        cfg,
    )?;
    Ok(BacktestReport {
        dates,
        equity_curve,
        daily_returns,
        rank_ic_series: rank_ics,
        turnover,
        costs,
        top_bucket_returns: top_returns,
        bottom_bucket_returns: bottom_returns,
        metrics,
    })
}

fn day_ic(p: ArrayView1<'_, f64>, r: ArrayView1<'_, f64>, date: NaiveDate) -> Result<Option<f64>> {
    match rank_ic(p, r) {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedCorrelation(why)) => {
            log::debug!("RankIC undefined on {date}: {why}");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}
