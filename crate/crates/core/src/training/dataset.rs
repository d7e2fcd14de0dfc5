use chrono::NaiveDate;
use ndarray::{Array1, Array2, Axis};

use crate::embeddings::EmbeddingSeries;
use crate::lgmodel::{LgModelParams, MaskVector, PredictInputs};
use crate::panel::{FeaturePanel, ReturnPanel};
use crate::{Error, Result};

/// One training day: the cross-section with a realised return, and optionally its embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct DaySample {
    pub date: NaiveDate,
    pub stock_ids: Vec<String>,
    /// n x m, rows restricted to stocks with a return
    pub features: Array2<f64>,
    pub targets: Array1<f64>,
    pub embedding: Option<Array1<f64>>,
}

impl DaySample {
    pub fn inputs<'a>(&'a self, mask: Option<&'a MaskVector>) -> PredictInputs<'a> {
        PredictInputs {
            features: self.features.view(),
            embedding: self.embedding.as_ref().map(|e| e.view()),
            mask,
        }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Builds one sample per feature date in `[start, end]` (inclusive, either bound optional).
///
/// Stocks without a return on that date are dropped; days left with no stocks are skipped.
/// When `embeddings` is given, every kept day must have a vector.
pub fn build_samples(
    features: &FeaturePanel,
    returns: &ReturnPanel,
    embeddings: Option<&EmbeddingSeries>,
    start: Option<NaiveDate>,
    end: Option<NaiveDate>,
) -> Result<Vec<DaySample>> {
    let mut out = Vec::new();
    for (t, &date) in features.calendar().dates().iter().enumerate() {
        if start.is_some_and(|s| date < s) || end.is_some_and(|e| date > e) {
            continue;
        }
        let section = features.section(t);
        let Some(aligned) = returns.aligned(date, section) else {
            continue;
        };
        let keep: Vec<usize> = (0..aligned.len()).filter(|&i| aligned[i].is_some()).collect();
        if keep.is_empty() {
            continue;
        }
        let embedding = match embeddings {
            Some(series) => Some(Array1::from(series.vector_for_prediction(date)?.to_vec())),
            None => None,
        };
        out.push(DaySample {
            date,
            stock_ids: keep.iter().map(|&i| section.stock_ids[i].clone()).collect(),
            features: section.features.select(Axis(0), &keep),
            targets: keep.iter().map(|&i| aligned[i].expect("kept")).collect(),
            embedding,
        });
    }
    Ok(out)
}

/// Replaces every sample's embedding with the series' vector for its date.
pub fn attach_embeddings(samples: &mut [DaySample], series: &EmbeddingSeries) -> Result<()> {
    for s in samples.iter_mut() {
        s.embedding = Some(Array1::from(series.vector_for_prediction(s.date)?.to_vec()));
    }
    Ok(())
}

/// Mean over days of the per-day cross-sectional MSE.
pub fn mean_mse(model: &LgModelParams, samples: &[DaySample], masks: Option<&[MaskVector]>) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no training days".into()));
    }
    let mut total = 0.0;
    for (k, s) in samples.iter().enumerate() {
        let mask = masks.map(|m| &m[k]);
        total += model.mse(s.inputs(mask), s.targets.view())?;
    }
    Ok(total / samples.len() as f64)
}

/// Date that splits `calendar` so that roughly `fraction` of the days fall on or before it.
pub fn split_date(dates: &[NaiveDate], fraction: f64) -> Result<NaiveDate> {
    if dates.len() < 2 || !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "cannot split {} dates at fraction {fraction}",
            dates.len()
        )));
    }
    let k = ((dates.len() as f64 * fraction).round() as usize).clamp(1, dates.len() - 1);
    Ok(dates[k - 1])
}
