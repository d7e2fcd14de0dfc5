//! Aligned stock feature and return panels.
//!
//! A panel is a sequence of per-date cross-sections. Cross-sections may differ across
//! dates (stocks enter and leave the universe); within a date, stock ids are unique and
//! sorted ascending, which is the canonical row order used everywhere downstream.

mod io;
mod preprocess;
mod synth;

use chrono::NaiveDate;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use io::{load_features, load_panel, load_returns, save_features, save_panel, save_returns};
pub use preprocess::{compound_returns, forward_returns, standardize, PriceTable};
pub use synth::{generate_synthetic, SynthConfig, SyntheticMarket, SyntheticTruth};

/// Strictly increasing list of trading days.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<NaiveDate>", into = "Vec<NaiveDate>")]
pub struct TradingCalendar {
    dates: Vec<NaiveDate>,
}

impl TradingCalendar {
    pub fn new(dates: Vec<NaiveDate>) -> Result<Self> {
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!(
                "calendar dates must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { dates })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn date(&self, t: usize) -> NaiveDate {
        self.dates[t]
    }

    pub fn position(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    pub fn first(&self) -> Option<NaiveDate> {
        self.dates.first().copied()
    }

    pub fn last(&self) -> Option<NaiveDate> {
        self.dates.last().copied()
    }
}

impl TryFrom<Vec<NaiveDate>> for TradingCalendar {
    type Error = Error;

    fn try_from(dates: Vec<NaiveDate>) -> Result<Self> {
        Self::new(dates)
    }
}

impl From<TradingCalendar> for Vec<NaiveDate> {
    fn from(c: TradingCalendar) -> Self {
        c.dates
    }
}

/// One date's feature matrix, rows in `stock_ids` order.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection {
    pub stock_ids: Vec<String>,
    pub features: Array2<f64>,
}

impl CrossSection {
    pub fn new(stock_ids: Vec<String>, features: Array2<f64>) -> Result<Self> {
        if stock_ids.len() != features.nrows() {
            return Err(Error::dims("cross-section rows", stock_ids.len(), features.nrows()));
        }
        check_sorted_unique(&stock_ids)?;
        Ok(Self {
            stock_ids,
            features,
        })
    }

    pub fn len(&self) -> usize {
        self.stock_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stock_ids.is_empty()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn row_of(&self, stock_id: &str) -> Option<usize> {
        self.stock_ids
            .binary_search_by(|s| s.as_str().cmp(stock_id))
            .ok()
    }
}

pub(crate) fn check_sorted_unique(ids: &[String]) -> Result<()> {
    if let Some(w) = ids.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!(
            "stock ids must be unique and ascending ({:?} then {:?})",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// Per-date standardized feature matrices with a fixed column count `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePanel {
    calendar: TradingCalendar,
    sections: Vec<CrossSection>,
    m: usize,
}

impl FeaturePanel {
    pub fn new(calendar: TradingCalendar, sections: Vec<CrossSection>, m: usize) -> Result<Self> {
        if calendar.len() != sections.len() {
            return Err(Error::dims("feature panel dates", calendar.len(), sections.len()));
        }
        for (t, s) in sections.iter().enumerate() {
            if s.features.ncols() != m {
                return Err(Error::dims(
                    format!("feature columns on {}", calendar.date(t)),
                    m,
                    s.features.ncols(),
                ));
            }
        }
        Ok(Self {
            calendar,
            sections,
            m,
        })
    }

    pub fn calendar(&self) -> &TradingCalendar {
        &self.calendar
    }

    pub fn sections(&self) -> &[CrossSection] {
        &self.sections
    }

    pub fn section(&self, t: usize) -> &CrossSection {
        &self.sections[t]
    }

    pub fn section_on(&self, date: NaiveDate) -> Option<&CrossSection> {
        self.calendar.position(date).map(|t| &self.sections[t])
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.sections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }

    /// Returns true when every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.sections
            .iter()
            .all(|s| s.features.iter().all(|x| x.is_finite()))
    }
}

/// Simple returns over the next `horizon` trading days, keyed by decision date.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    calendar: TradingCalendar,
    horizon: usize,
    stock_ids: Vec<Vec<String>>,
    returns: Vec<Vec<f64>>,
}

impl ReturnPanel {
    pub fn new(
        calendar: TradingCalendar,
        horizon: usize,
        stock_ids: Vec<Vec<String>>,
        returns: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidArgument("return horizon must be >= 1".into()));
        }
        if calendar.len() != stock_ids.len() || calendar.len() != returns.len() {
            return Err(Error::dims("return panel dates", calendar.len(), returns.len()));
        }
        for (t, (ids, rs)) in stock_ids.iter().zip(&returns).enumerate() {
            if ids.len() != rs.len() {
                return Err(Error::dims(
                    format!("returns on {}", calendar.date(t)),
                    ids.len(),
                    rs.len(),
                ));
            }
            check_sorted_unique(ids)?;
            if let Some(r) = rs.iter().find(|r| !(r.is_finite() && **r > -1.0)) {
                return Err(Error::InvalidArgument(format!(
                    "return {r} on {} is not a finite value > -1",
                    calendar.date(t)
                )));
            }
        }
        Ok(Self {
            calendar,
            horizon,
            stock_ids,
            returns,
        })
    }

    pub fn calendar(&self) -> &TradingCalendar {
        &self.calendar
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn stock_ids(&self, t: usize) -> &[String] {
        &self.stock_ids[t]
    }

    pub fn returns(&self, t: usize) -> &[f64] {
        &self.returns[t]
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    /// Return of `stock_id` on `date`, if both are present.
    pub fn lookup(&self, date: NaiveDate, stock_id: &str) -> Option<f64> {
        let t = self.calendar.position(date)?;
        let i = self.stock_ids[t]
            .binary_search_by(|s| s.as_str().cmp(stock_id))
            .ok()?;
        Some(self.returns[t][i])
    }

    /// Returns aligned to the rows of `section` (None where a stock has no return).
    pub fn aligned(&self, date: NaiveDate, section: &CrossSection) -> Option<Vec<Option<f64>>> {
        let t = self.calendar.position(date)?;
        let ids = &self.stock_ids[t];
        let rs = &self.returns[t];
        Some(
            section
                .stock_ids
                .iter()
                .map(|id| {
                    ids.binary_search_by(|s| s.as_str().cmp(id))
                        .ok()
                        .map(|i| rs[i])
                })
                .collect(),
        )
    }
}

/// Checks that a feature and return panel share one calendar and per-date stock ids.
pub fn check_aligned(features: &FeaturePanel, returns: &ReturnPanel) -> Result<()> {
    if features.calendar() != returns.calendar() {
        return Err(Error::DateMisalignment(format!(
            "feature panel has {} dates, return panel has {} (or the dates differ)",
            features.len(),
            returns.len()
        )));
    }
    for (t, s) in features.sections().iter().enumerate() {
        if s.stock_ids != returns.stock_ids(t) {
            return Err(Error::DateMisalignment(format!(
                "stock ids differ between features and returns on {}",
                features.calendar().date(t)
            )));
        }
    }
    Ok(())
}
