use ndarray::Array2;

use super::{check_sorted_unique, CrossSection, FeaturePanel, ReturnPanel, TradingCalendar};
use crate::{Error, Result};

/// Columns whose population std is below this fraction of their largest magnitude are
/// treated as constant.
const CONSTANT_TOLERANCE: f64 = 1e-12;

/// Per-date cross-sectional z-score of every feature column (population std).
///
/// Constant columns map to zeros.
pub fn standardize(panel: &FeaturePanel) -> FeaturePanel {
    let sections = panel
        .sections()
        .iter()
        .map(|s| {
            let mut x = s.features.clone();
            let n = x.nrows() as f64;
            for mut col in x.columns_mut() {
                if col.is_empty() {
                    continue;
                }
                let mean = col.sum() / n;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let std = var.sqrt();
                let scale = col.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                if std <= CONSTANT_TOLERANCE * scale || std == 0.0 {
                    col.fill(0.0);
                } else {
                    col.mapv_inplace(|v| (v - mean) / std);
                }
            }
            CrossSection {
                stock_ids: s.stock_ids.clone(),
                features: x,
            }
        })
        .collect();
    FeaturePanel {
        calendar: panel.calendar().clone(),
        sections,
        m: panel.m(),
    }
}

/// Rectangular close-price table: every stock priced on every date.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    pub calendar: TradingCalendar,
    pub stock_ids: Vec<String>,
    /// dates x stocks
    pub prices: Array2<f64>,
}

impl PriceTable {
    pub fn new(calendar: TradingCalendar, stock_ids: Vec<String>, prices: Array2<f64>) -> Result<Self> {
        if prices.nrows() != calendar.len() {
            return Err(Error::dims("price table rows", calendar.len(), prices.nrows()));
        }
        if prices.ncols() != stock_ids.len() {
            return Err(Error::dims("price table columns", stock_ids.len(), prices.ncols()));
        }
        check_sorted_unique(&stock_ids)?;
        Ok(Self {
            calendar,
            stock_ids,
            prices,
        })
    }
}

/// `price[t+h] / price[t] - 1`; the last `h` dates have no forward return and are dropped.
pub fn forward_returns(prices: &PriceTable, horizon: usize) -> Result<ReturnPanel> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be >= 1".into()));
    }
    let t_len = prices.calendar.len();
    if horizon >= t_len {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon} leaves no dates in a {t_len}-date table"
        )));
    }
    if let Some(((t, i), p)) = prices.prices.indexed_iter().find(|(_, p)| !(**p > 0.0 && p.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "non-positive price {p} for {} on {}",
            prices.stock_ids[i],
            prices.calendar.date(t)
        )));
    }
    let n_out = t_len - horizon;
    let dates = prices.calendar.dates()[..n_out].to_vec();
    let returns = (0..n_out)
        .map(|t| {
            prices
                .prices
                .row(t)
                .iter()
                .zip(prices.prices.row(t + horizon))
                .map(|(p0, p1)| p1 / p0 - 1.0)
                .collect()
        })
        .collect();
    ReturnPanel::new(
        TradingCalendar::new(dates)?,
        horizon,
        vec![prices.stock_ids.clone(); n_out],
        returns,
    )
}

/// Compounds a 1-day return panel into `horizon`-day forward returns.
///
/// A stock is kept on date t only if it has returns on all of t..t+horizon-1.
pub fn compound_returns(daily: &ReturnPanel, horizon: usize) -> Result<ReturnPanel> {
    if daily.horizon() != 1 {
        return Err(Error::InvalidArgument(format!(
            "compounding needs a 1-day panel, got horizon {}",
            daily.horizon()
        )));
    }
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be >= 1".into()));
    }
    if horizon == 1 {
        return Ok(daily.clone());
    }
    let t_len = daily.len();
    if horizon > t_len {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon} exceeds the {t_len} dates of the daily panel"
        )));
    }
    let n_out = t_len - horizon + 1;
    let mut ids_out = Vec::with_capacity(n_out);
    let mut rets_out = Vec::with_capacity(n_out);
    for t in 0..n_out {
        let mut ids = Vec::new();
        let mut rets = Vec::new();
        'stock: for (i, id) in daily.stock_ids(t).iter().enumerate() {
            let mut growth = 1.0 + daily.returns(t)[i];
            for k in 1..horizon {
                let later = daily.stock_ids(t + k);
                match later.binary_search(id) {
                    Ok(j) => growth *= 1.0 + daily.returns(t + k)[j],
                    Err(_) => continue 'stock,
                }
            }
            ids.push(id.clone());
            rets.push(growth - 1.0);
        }
        ids_out.push(ids);
        rets_out.push(rets);
    }
    ReturnPanel::new(
        TradingCalendar::new(daily.calendar().dates()[..n_out].to_vec())?,
        horizon,
        ids_out,
        rets_out,
    )
}
