//! Small hand-built panels shared by the integration tests.
#![allow(dead_code)]

use chrono::{Days, NaiveDate};
use lgscrl::panel::{CrossSection, FeaturePanel, ReturnPanel, TradingCalendar};
use ndarray::Array2;

pub fn day(k: u64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2021, 1, 4).unwrap() + Days::new(k)
}

pub fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("S{i:03}")).collect()
}

/// Panels over `features.len()` consecutive days with the same `n` stocks every day.
/// `returns[t][i]` is the one-day return of stock i accrued after day t's close.
pub fn panels(features: &[Array2<f64>], returns: &[Vec<f64>]) -> (FeaturePanel, ReturnPanel) {
    let t = features.len();
    let n = features[0].nrows();
    let m = features[0].ncols();
    let calendar = TradingCalendar::new((0..t as u64).map(day).collect()).unwrap();
    let sections = features
        .iter()
        .map(|f| CrossSection::new(ids(n), f.clone()).unwrap())
        .collect();
    let fp = FeaturePanel::new(calendar.clone(), sections, m).unwrap();
    let rp = ReturnPanel::new(calendar, 1, vec![ids(n); t], returns.to_vec()).unwrap();
    (fp, rp)
}

/// Single-feature panels whose feature on each day is the given score per stock.
pub fn score_panels(scores: &[Vec<f64>], returns: &[Vec<f64>]) -> (FeaturePanel, ReturnPanel) {
    let features: Vec<Array2<f64>> = scores
        .iter()
        .map(|s| Array2::from_shape_vec((s.len(), 1), s.clone()).unwrap())
        .collect();
    panels(&features, returns)
}
