use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use super::params::{slice, slice_mut, ParamTensors};
use crate::rng::{self, Pcg32};
use crate::{Error, Result};

/// Linear map from an embedding vector to the D-dimensional global vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmMapper {
    /// D x d_llm
    pub w_llm: Array2<f64>,
}

impl LlmMapper {
    pub fn init(d: usize, d_llm: usize, rng: &mut Pcg32) -> Self {
        let bound = 1.0 / (d_llm as f64).sqrt();
        Self {
            w_llm: Array2::from_shape_simple_fn((d, d_llm), || rng::symmetric(rng, bound)),
        }
    }

    pub fn zeros(d: usize, d_llm: usize) -> Self {
        Self {
            w_llm: Array2::zeros((d, d_llm)),
        }
    }

    pub fn d_llm(&self) -> usize {
        self.w_llm.ncols()
    }

    pub fn map(&self, v_llm: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if v_llm.len() != self.d_llm() {
            return Err(Error::dims("embedding length", self.d_llm(), v_llm.len()));
        }
        Ok(self.w_llm.dot(&v_llm))
    }

    pub(crate) fn backward(&self, v_llm: ArrayView1<'_, f64>, d_out: ArrayView1<'_, f64>, grads: &mut LlmMapper) {
        let outer = d_out
            .insert_axis(Axis(1))
            .dot(&v_llm.insert_axis(Axis(0)));
        grads.w_llm += &outer;
    }
}

impl ParamTensors for LlmMapper {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![slice(&self.w_llm)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![slice_mut(&mut self.w_llm)]
    }
}

/// Feature-selector mask with entries in [0, 1].
///
/// Sampled masks are binary; expectation-mode masks carry the probabilities themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskVector {
    values: Array1<f64>,
}

impl MaskVector {
    pub fn new(values: impl Into<Array1<f64>>) -> Result<Self> {
        let values = values.into();
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("mask entry {v} outside [0, 1]")));
        }
        Ok(Self { values })
    }

    pub fn ones(len: usize) -> Self {
        Self {
            values: Array1::ones(len),
        }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            values: Array1::zeros(len),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> ArrayView1<'_, f64> {
        self.values.view()
    }

    pub fn is_all_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }
}

/// Element-wise product of a global vector with a mask of the same length.
pub fn apply_mask(f: ArrayView1<'_, f64>, mask: &MaskVector) -> Result<Array1<f64>> {
    if f.len() != mask.len() {
        return Err(Error::dims("mask length", f.len(), mask.len()));
    }
    Ok(&f * &mask.values)
}
