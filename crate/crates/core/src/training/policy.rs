//! Bernoulli mask policy mapping an embedding to per-feature keep probabilities.
//!
//! `p = sigmoid(W_map^T v + b)`. Log-probabilities go through softplus so that saturated
//! logits stay finite: `log p = -softplus(-z)`, `log(1 - p) = -softplus(z)`.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::lgmodel::{LgModelParams, MaskVector, ParamTensors, Variant};
use crate::rng::{self, Pcg32};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    /// element-wise Bernoulli draws
    #[default]
    Sample,
    /// the probabilities themselves
    Expectation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskPolicy {
    /// d_llm x out
    pub w_map: Array2<f64>,
    pub b_map: Array1<f64>,
    pub mode: PolicyMode,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl MaskPolicy {
    pub fn zeros(d_llm: usize, out: usize) -> Self {
        Self {
            w_map: Array2::zeros((d_llm, out)),
            b_map: Array1::zeros(out),
            mode: PolicyMode::Sample,
        }
    }

    /// Small uniform weights in `±0.01/sqrt(d_llm)`, zero bias, so initial probabilities are near 0.5.
    pub fn init(d_llm: usize, out: usize, seed: u64) -> Self {
        let mut r = rng::seeded(seed);
        let bound = 0.01 / (d_llm as f64).sqrt();
        Self {
            w_map: Array2::from_shape_simple_fn((d_llm, out), || rng::symmetric(&mut r, bound)),
            b_map: Array1::zeros(out),
            mode: PolicyMode::Sample,
        }
    }

    pub fn d_llm(&self) -> usize {
        self.w_map.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.w_map.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.b_map.len() != self.out_dim() {
            return Err(Error::dims("policy bias", self.out_dim(), self.b_map.len()));
        }
        if !self.is_finite() {
            return Err(Error::NonFinite("mask policy parameters".into()));
        }
        Ok(())
    }

    pub fn logits(&self, v_llm: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if v_llm.len() != self.d_llm() {
            return Err(Error::dims("policy input", self.d_llm(), v_llm.len()));
        }
        Ok(self.w_map.t().dot(&v_llm) + &self.b_map)
    }

    pub fn probabilities(&self, v_llm: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        Ok(self.logits(v_llm)?.mapv(sigmoid))
    }

    /// Draws a binary mask with independent Bernoulli(p_j) entries.
    pub fn sample(&self, v_llm: ArrayView1<'_, f64>, rng: &mut Pcg32) -> Result<MaskVector> {
        let p = self.probabilities(v_llm)?;
        MaskVector::new(p.mapv(|p| if rng::uniform(rng) < p { 1.0 } else { 0.0 }))
    }

    /// Mask according to `mode`: a Bernoulli draw or the probabilities.
    pub fn mask(&self, v_llm: ArrayView1<'_, f64>, rng: &mut Pcg32) -> Result<MaskVector> {
        match self.mode {
            PolicyMode::Sample => self.sample(v_llm, rng),
            PolicyMode::Expectation => MaskVector::new(self.probabilities(v_llm)?),
        }
    }

    /// Deterministic binary mask for evaluation: probabilities thresholded at 0.5.
    pub fn evaluation_mask(&self, v_llm: ArrayView1<'_, f64>) -> Result<MaskVector> {
        let z = self.logits(v_llm)?;
        MaskVector::new(z.mapv(|z| if sigmoid(z) >= 0.5 { 1.0 } else { 0.0 }))
    }

    pub fn log_prob(&self, v_llm: ArrayView1<'_, f64>, mask: &MaskVector) -> Result<f64> {
        let z = self.logits(v_llm)?;
        if mask.len() != z.len() {
            return Err(Error::dims("mask length", z.len(), mask.len()));
        }
        Ok(z.iter()
            .zip(mask.values())
            .map(|(z, y)| -(y * softplus(-z) + (1.0 - y) * softplus(*z)))
            .sum())
    }

    /// Adds `scale * d log pi(mask | v) / d params` into `grads`.
    pub(crate) fn accumulate_log_prob_grad(
        &self,
        v_llm: ArrayView1<'_, f64>,
        mask: &MaskVector,
        scale: f64,
        grads: &mut MaskPolicy,
    ) -> Result<()> {
        let p = self.probabilities(v_llm)?;
        let dz = (&mask.values() - &p) * scale;
        grads.b_map += &dz;
        let outer = v_llm.insert_axis(Axis(1)).dot(&dz.view().insert_axis(Axis(0)));
        grads.w_map += &outer;
        Ok(())
    }
}

impl ParamTensors for MaskPolicy {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![
            self.w_map.as_slice().expect("contiguous"),
            self.b_map.as_slice().expect("contiguous"),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_map.as_slice_mut().expect("contiguous"),
            self.b_map.as_slice_mut().expect("contiguous"),
        ]
    }
}

/// Probabilities of `policy` for the embedding `v_llm`.
pub fn policy_distribution(policy: &MaskPolicy, v_llm: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    policy.probabilities(v_llm)
}

/// The RL-tuned model: prediction heads plus the mask policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Actor {
    pub model: LgModelParams,
    pub policy: MaskPolicy,
}

impl Actor {
    /// Prediction with the deterministic evaluation mask.
    pub fn predict(&self, features: ndarray::ArrayView2<'_, f64>, v_llm: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        let mask = self.policy.evaluation_mask(v_llm)?;
        self.model.predict(crate::lgmodel::PredictInputs::new(features).with_mask(&mask))
    }
}

/// Copies the critic into an SCRL-LG actor and creates the policy with its frozen reference.
pub fn init_actor(critic: &LgModelParams, d_llm: usize, seed: u64) -> Result<(Actor, MaskPolicy)> {
    if critic.variant != Variant::LgStock {
        log::warn!("actor initialised from a {} critic (expected LG-STOCK)", critic.variant);
    }
    let mut model = critic.clone();
    model.variant = Variant::ScrlLg;
    let policy = MaskPolicy::init(d_llm, model.mask_len(), seed);
    let reference = policy.clone();
    Ok((Actor { model, policy }, reference))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_policy_gives_half() {
        let p = MaskPolicy::zeros(3, 4);
        let probs = p.probabilities(array![1.0, -2.0, 0.5].view()).unwrap();
        assert!(probs.iter().all(|x| *x == 0.5));
    }

    #[test]
    fn saturation_and_log_prob_stay_finite() {
        let mut p = MaskPolicy::zeros(1, 2);
        p.b_map = array![20.0, -800.0];
        let probs = p.probabilities(array![0.0].view()).unwrap();
        assert!((probs[0] - 1.0).abs() < 1e-8);
        let mask = MaskVector::new(array![1.0, 1.0]).unwrap();
        let lp = p.log_prob(array![0.0].view(), &mask).unwrap();
        assert!(lp.is_finite());
        assert!((lp + 800.0).abs() < 1e-6);
    }

    #[test]
    fn log_prob_matches_product_of_bernoullis() {
        let mut p = MaskPolicy::init(3, 4, 5);
        p.b_map = array![0.3, -1.0, 2.0, 0.0];
        let v = array![0.5, -0.25, 1.5];
        let probs = p.probabilities(v.view()).unwrap();
        let mask = MaskVector::new(array![1.0, 0.0, 1.0, 0.0]).unwrap();
        let expected: f64 = probs
            .iter()
            .zip(mask.values())
            .map(|(p, y)| if *y == 1.0 { p.ln() } else { (1.0 - p).ln() })
            .sum();
        assert!((p.log_prob(v.view(), &mask).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn sample_mean_concentrates() {
        let p = MaskPolicy::zeros(2, 1000);
        let mut r = rng::seeded(9);
        let mask = p.sample(array![0.0, 0.0].view(), &mut r).unwrap();
        let mean = mask.values().sum() / 1000.0;
        assert!((0.45..=0.55).contains(&mean), "{mean}");
    }
}
