//! Seeded synthetic market with planted Local-Global structure.
//!
//! For each day t, with factor vector `f*_t ~ N(0, I_D)`:
//!
//! - feature column j < D carries the factor level plus idiosyncratic dispersion,
//!   `M[i, j] = f*_t[j] + dispersion * z`; columns j >= D are pure stock characteristics `z`;
//! - the realised return is
//!   `r[i] = alpha_scale * tanh(M_i . u) + beta_scale * sum_j tanh(M_i . w_j) * f*_t[j] * mask[j] + noise_sigma * e`,
//!   where `u`, `w_j` only load on characteristic columns whenever m > D;
//! - the day's embedding is `decode * f*_t + embedding_noise * eta`, rounded to f32.
//!
//! Only factors inside the planted support (`mask[j] = 1`) move returns, and factor j is
//! readable from feature column j, so the support is also a feature-column support.
//!
//! Draw order (all from [`crate::rng`], seeded once): support shuffle, `u`, `w`, `decode`,
//! then per day: factors, features row-major, return noise, embedding noise.

use chrono::{Datelike, Days, NaiveDate, Weekday};
use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{CrossSection, FeaturePanel, ReturnPanel, TradingCalendar};
use crate::embeddings::EmbeddingSeries;
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_stocks: usize,
    /// feature count m
    pub m: usize,
    /// factor count D (D <= m)
    pub factors: usize,
    pub d_llm: usize,
    pub days: usize,
    pub noise_sigma: f64,
    /// number of factors in the planted support
    pub support: usize,
    pub factor_dispersion: f64,
    pub alpha_scale: f64,
    pub beta_scale: f64,
    pub embedding_noise: f64,
    pub start_date: NaiveDate,
}

impl SynthConfig {
    pub fn new(
        seed: u64,
        n_stocks: usize,
        m: usize,
        factors: usize,
        d_llm: usize,
        days: usize,
        noise_sigma: f64,
    ) -> Self {
        Self {
            seed,
            n_stocks,
            m,
            factors,
            d_llm,
            days,
            noise_sigma,
            support: factors.clamp(1, 4),
            factor_dispersion: 3.0,
            alpha_scale: 0.01,
            beta_scale: 0.01,
            embedding_noise: 0.3,
            start_date: NaiveDate::from_ymd_opt(2020, 1, 2).expect("valid date"),
        }
    }

    fn validate(&self) -> Result<()> {
        let sizes = [
            ("n_stocks", self.n_stocks),
            ("m", self.m),
            ("factors", self.factors),
            ("d_llm", self.d_llm),
            ("days", self.days),
            ("support", self.support),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be >= 1")));
        }
        if self.factors > self.m {
            return Err(Error::InvalidArgument(format!(
                "factor count {} exceeds feature count {}",
                self.factors, self.m
            )));
        }
        if self.support > self.factors {
            return Err(Error::InvalidArgument(format!(
                "support {} exceeds factor count {}",
                self.support, self.factors
            )));
        }
        let scales = [
            ("noise_sigma", self.noise_sigma),
            ("factor_dispersion", self.factor_dispersion),
            ("alpha_scale", self.alpha_scale),
            ("beta_scale", self.beta_scale),
            ("embedding_noise", self.embedding_noise),
        ];
        if let Some((name, v)) = scales.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument(format!("{name} = {v} must be finite and >= 0")));
        }
        Ok(())
    }
}

/// Ground truth of a synthetic instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    /// length D, entries in {0, 1}
    pub true_mask: Vec<u8>,
    /// per date, length D
    pub factor_series: Vec<Vec<f64>>,
    /// d_llm rows of length D
    pub decode_matrix: Vec<Vec<f64>>,
    pub noise_sigma: f64,
    pub embedding_noise: f64,
    pub alpha_scale: f64,
    pub beta_scale: f64,
    /// length m
    pub local_weights: Vec<f64>,
    /// D rows of length m
    pub beta_weights: Vec<Vec<f64>>,
    pub dates: Vec<NaiveDate>,
}

impl SyntheticTruth {
    pub fn factors(&self) -> usize {
        self.true_mask.len()
    }

    /// Feature columns in the planted support.
    pub fn support(&self) -> Vec<usize> {
        self.true_mask
            .iter()
            .enumerate()
            .filter(|(_, v)| **v == 1)
            .map(|(j, _)| j)
            .collect()
    }

    /// The planted support as a length-m feature mask.
    pub fn feature_mask(&self, m: usize) -> Vec<f64> {
        let mut mask = vec![0.0; m];
        for j in self.support() {
            mask[j] = 1.0;
        }
        mask
    }

    /// Noise-free return of one stock given its feature row and the day's factors.
    pub fn expected_return(&self, row: ArrayView1<'_, f64>, factors: &[f64]) -> f64 {
        let alpha = self.alpha_scale * row.dot(&ArrayView1::from(&self.local_weights)).tanh();
        let global: f64 = self
            .beta_weights
            .iter()
            .zip(factors)
            .zip(&self.true_mask)
            .map(|((w, f), on)| {
                if *on == 0 {
                    0.0
                } else {
                    row.dot(&ArrayView1::from(w)).tanh() * f
                }
            })
            .sum();
        alpha + self.beta_scale * global
    }

    /// Noise-free returns for the cross-section of day `t`.
    pub fn predict(&self, t: usize, features: ArrayView2<'_, f64>) -> Vec<f64> {
        features
            .rows()
            .into_iter()
            .map(|row| self.expected_return(row, &self.factor_series[t]))
            .collect()
    }
}

/// Everything a synthetic run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMarket {
    pub features: FeaturePanel,
    pub returns: ReturnPanel,
    pub embeddings: EmbeddingSeries,
    pub truth: SyntheticTruth,
}

fn business_days(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut day = start;
    while out.len() < count {
        if !matches!(day.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(day);
        }
        day = day + Days::new(1);
    }
    out
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SyntheticMarket> {
    cfg.validate()?;
    let (n, m, d, d_llm) = (cfg.n_stocks, cfg.m, cfg.factors, cfg.d_llm);
    let mut rng = rng::seeded(cfg.seed);

    let mut order: Vec<usize> = (0..d).collect();
    rng::shuffle(&mut rng, &mut order);
    let mut true_mask = vec![0u8; d];
    for &j in &order[..cfg.support] {
        true_mask[j] = 1;
    }

    // Alpha and beta maps read characteristic columns only, unless there are none.
    let loading_cols: Vec<usize> = if m > d { (d..m).collect() } else { (0..m).collect() };
    let scale = 1.0 / (loading_cols.len() as f64).sqrt();
    let draw_loading = |rng: &mut rng::Pcg32| {
        let mut w = vec![0.0; m];
        for &j in &loading_cols {
            w[j] = rng::normal(rng) * scale;
        }
        w
    };
    let local_weights = draw_loading(&mut rng);
    let beta_weights: Vec<Vec<f64>> = (0..d).map(|_| draw_loading(&mut rng)).collect();
    let decode_scale = 1.0 / (d as f64).sqrt();
    let decode_matrix: Vec<Vec<f64>> = (0..d_llm)
        .map(|_| (0..d).map(|_| rng::normal(&mut rng) * decode_scale).collect())
        .collect();

    let dates = business_days(cfg.start_date, cfg.days);
    let width = n.to_string().len().max(4);
    let stock_ids: Vec<String> = (0..n).map(|i| format!("S{i:0width$}")).collect();

    let mut truth = SyntheticTruth {
        true_mask,
        factor_series: Vec::with_capacity(cfg.days),
        decode_matrix,
        noise_sigma: cfg.noise_sigma,
        embedding_noise: cfg.embedding_noise,
        alpha_scale: cfg.alpha_scale,
        beta_scale: cfg.beta_scale,
        local_weights,
        beta_weights,
        dates: dates.clone(),
    };

    let mut sections = Vec::with_capacity(cfg.days);
    let mut returns = Vec::with_capacity(cfg.days);
    let mut vectors = Vec::with_capacity(cfg.days);
    for t in 0..cfg.days {
        let factors: Vec<f64> = (0..d).map(|_| rng::normal(&mut rng)).collect();
        let mut x = Array2::zeros((n, m));
        for i in 0..n {
            for j in 0..m {
                let z = rng::normal(&mut rng);
                x[[i, j]] = if j < d {
                    factors[j] + cfg.factor_dispersion * z
                } else {
                    z
                };
            }
        }
        truth.factor_series.push(factors);
        let mut r = truth.predict(t, x.view());
        for ri in r.iter_mut() {
            *ri += cfg.noise_sigma * rng::normal(&mut rng);
        }
        if let Some(bad) = r.iter().find(|v| **v <= -1.0) {
            return Err(Error::InvalidArgument(format!(
                "synthetic return {bad} <= -1; reduce the noise or scales"
            )));
        }
        let f = &truth.factor_series[t];
        let v: Vec<f64> = truth
            .decode_matrix
            .iter()
            .map(|row| {
                let clean: f64 = row.iter().zip(f).map(|(a, b)| a * b).sum();
                let noisy = clean + cfg.embedding_noise * rng::normal(&mut rng);
                f64::from(noisy as f32)
            })
            .collect();
        sections.push(CrossSection {
            stock_ids: stock_ids.clone(),
            features: x,
        });
        returns.push(r);
        vectors.push(v);
    }

    let calendar = TradingCalendar::new(dates)?;
    let features = FeaturePanel::new(calendar.clone(), sections, m)?;
    let returns = ReturnPanel::new(calendar.clone(), 1, vec![stock_ids; cfg.days], returns)?;
    let embeddings = EmbeddingSeries::new(
        calendar,
        vectors,
        format!("synthetic(seed={}, d_llm={d_llm})", cfg.seed),
    )?;
    Ok(SyntheticMarket {
        features,
        returns,
        embeddings,
        truth,
    })
}
