use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::attention::{AttentionAggregator, AttentionPass};
use super::mapper::{apply_mask, LlmMapper, MaskVector};
use super::mlp::{MlpCache, MlpHead};
use super::params::ParamTensors;
use crate::rng;
use crate::{Error, Result};

/// Which global component the model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// alpha head only
    #[serde(rename = "Local")]
    Local,
    /// global vector aggregated from stock features
    #[serde(rename = "LG-STOCK")]
    LgStock,
    /// global vector mapped from the news embedding
    #[serde(rename = "LG-LLM")]
    LgLlm,
    /// feature aggregation filtered by an embedding-driven mask
    #[serde(rename = "SCRL-LG")]
    ScrlLg,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Local, Variant::LgStock, Variant::LgLlm, Variant::ScrlLg];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Local => "Local",
            Variant::LgStock => "LG-STOCK",
            Variant::LgLlm => "LG-LLM",
            Variant::ScrlLg => "SCRL-LG",
        }
    }

    pub fn needs_embedding(self) -> bool {
        matches!(self, Variant::LgLlm)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('_', "-");
        match norm.as_str() {
            "LOCAL" => Ok(Variant::Local),
            "LG-STOCK" => Ok(Variant::LgStock),
            "LG-LLM" => Ok(Variant::LgLlm),
            "SCRL-LG" => Ok(Variant::ScrlLg),
            _ => Err(Error::InvalidArgument(format!(
                "unknown variant {s:?} (expected Local, LG-STOCK, LG-LLM or SCRL-LG)"
            ))),
        }
    }
}

/// Where the selector mask enters the SCRL-LG model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskPath {
    /// length-m mask on the feature columns fed to the aggregator
    #[default]
    Feature,
    /// length-D mask on the aggregated global vector
    Factor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// feature count
    pub m: usize,
    /// hidden width of both heads
    pub hidden: usize,
    /// global vector dimension D
    pub factors: usize,
    pub d_llm: usize,
}

impl ModelDims {
    pub fn new(m: usize) -> Self {
        Self {
            m,
            hidden: 36,
            factors: 36,
            d_llm: crate::embeddings::DEFAULT_D_LLM,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("m", self.m), ("hidden", self.hidden), ("factors", self.factors), ("d_llm", self.d_llm)] {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("model dimension {name} must be >= 1")));
            }
        }
        Ok(())
    }
}

/// Inputs for one date's prediction.
#[derive(Debug, Clone, Copy)]
pub struct PredictInputs<'a> {
    /// n x m
    pub features: ArrayView2<'a, f64>,
    pub embedding: Option<ArrayView1<'a, f64>>,
    pub mask: Option<&'a MaskVector>,
}

impl<'a> PredictInputs<'a> {
    pub fn new(features: ArrayView2<'a, f64>) -> Self {
        Self {
            features,
            embedding: None,
            mask: None,
        }
    }

    pub fn with_embedding(mut self, v: ArrayView1<'a, f64>) -> Self {
        self.embedding = Some(v);
        self
    }

    pub fn with_mask(mut self, mask: &'a MaskVector) -> Self {
        self.mask = Some(mask);
        self
    }
}

/// Parameters of the Local-Global model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LgModelParams {
    pub local: MlpHead,
    pub beta: MlpHead,
    pub aggregator: AttentionAggregator,
    pub mapper: LlmMapper,
    pub variant: Variant,
    #[serde(default)]
    pub mask_path: MaskPath,
}

#[derive(Debug, Clone)]
enum GlobalPass {
    Stock {
        /// aggregator input when it differs from the raw features
        masked_input: Option<Array2<f64>>,
        attention: AttentionPass,
        factor_mask: Option<Array1<f64>>,
    },
    /// aggregator skipped because the feature mask removed every column
    Masked,
    Llm {
        embedding: Array1<f64>,
    },
}

/// Forward activations for one date.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    local: MlpCache,
    beta: Option<MlpCache>,
    global: Option<GlobalPass>,
    global_vector: Option<Array1<f64>>,
    pub prediction: Array1<f64>,
}

impl ForwardPass {
    pub fn global_vector(&self) -> Option<&Array1<f64>> {
        self.global_vector.as_ref()
    }
}

impl LgModelParams {
    /// Seeded initialisation: uniform in `±1/sqrt(fan_in)` everywhere.
    pub fn init(dims: ModelDims, variant: Variant, seed: u64) -> Result<Self> {
        dims.validate()?;
        let mut r = rng::seeded(seed);
        Ok(Self {
            local: MlpHead::init(dims.m, dims.hidden, 1, &mut r),
            beta: MlpHead::init(dims.m, dims.hidden, dims.factors, &mut r),
            aggregator: AttentionAggregator::init(dims.m, dims.factors, &mut r),
            mapper: LlmMapper::init(dims.factors, dims.d_llm, &mut r),
            variant,
            mask_path: MaskPath::default(),
        })
    }

    pub fn zeros(dims: ModelDims, variant: Variant) -> Self {
        Self {
            local: MlpHead::zeros(dims.m, dims.hidden, 1),
            beta: MlpHead::zeros(dims.m, dims.hidden, dims.factors),
            aggregator: AttentionAggregator::zeros(dims.m, dims.factors),
            mapper: LlmMapper::zeros(dims.factors, dims.d_llm),
            variant,
            mask_path: MaskPath::default(),
        }
    }

    /// Zero tensor set with this model's shapes, used to hold gradients.
    pub fn zeros_like(&self) -> Self {
        let mut z = Self::zeros(self.dims(), self.variant);
        z.mask_path = self.mask_path;
        z
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            m: self.local.input_dim(),
            hidden: self.local.hidden_dim(),
            factors: self.beta.output_dim(),
            d_llm: self.mapper.d_llm(),
        }
    }

    /// Checks the cross-tensor shape invariants (after deserialisation, say).
    pub fn validate(&self) -> Result<()> {
        let d = self.dims();
        let checks = [
            ("local output", 1, self.local.output_dim()),
            ("beta input", d.m, self.beta.input_dim()),
            ("aggregator rows", d.m, self.aggregator.w_key.nrows()),
            ("aggregator value rows", d.m, self.aggregator.w_value.nrows()),
            ("aggregator D", d.factors, self.aggregator.factors()),
            ("aggregator value D", d.factors, self.aggregator.w_value.ncols()),
            ("aggregator key D", d.factors, self.aggregator.w_key.ncols()),
            ("mapper D", d.factors, self.mapper.w_llm.nrows()),
            ("local b1", d.hidden, self.local.b1.len()),
            ("local b2", 1, self.local.b2.len()),
            ("local w2 rows", d.hidden, self.local.w2.nrows()),
            ("beta b1", self.beta.hidden_dim(), self.beta.b1.len()),
            ("beta w2 rows", self.beta.hidden_dim(), self.beta.w2.nrows()),
            ("beta b2", d.factors, self.beta.b2.len()),
        ];
        for (what, expected, actual) in checks {
            if expected != actual {
                return Err(Error::dims(what, expected, actual));
            }
        }
        if !self.is_finite() {
            return Err(Error::NonFinite("model parameters".into()));
        }
        Ok(())
    }

    /// Length of the mask SCRL-LG expects on this model's mask path.
    pub fn mask_len(&self) -> usize {
        match self.mask_path {
            MaskPath::Feature => self.dims().m,
            MaskPath::Factor => self.dims().factors,
        }
    }

    pub fn forward(&self, inputs: PredictInputs<'_>) -> Result<ForwardPass> {
        let x = inputs.features;
        let dims = self.dims();
        if x.ncols() != dims.m {
            return Err(Error::dims("feature columns", dims.m, x.ncols()));
        }
        if x.nrows() == 0 {
            return Err(Error::InvalidArgument("empty cross-section".into()));
        }
        let local = self.local.forward(x);
        let alpha = local.output.column(0);

        let global = match self.variant {
            Variant::Local => None,
            Variant::LgStock => Some(GlobalPass::Stock {
                masked_input: None,
                attention: self.aggregator.forward(x)?,
                factor_mask: None,
            }),
            Variant::ScrlLg => {
                let mask = inputs.mask.ok_or_else(|| Error::MissingInput {
                    variant: self.variant.to_string(),
                    what: "a selector mask".into(),
                })?;
                if mask.len() != self.mask_len() {
                    return Err(Error::dims("selector mask length", self.mask_len(), mask.len()));
                }
                match self.mask_path {
                    MaskPath::Feature if mask.is_all_zero() => Some(GlobalPass::Masked),
                    MaskPath::Feature => {
                        let masked = &x * &mask.values().insert_axis(Axis(0));
                        let attention = self.aggregator.forward(masked.view())?;
                        Some(GlobalPass::Stock {
                            masked_input: Some(masked),
                            attention,
                            factor_mask: None,
                        })
                    }
                    MaskPath::Factor => Some(GlobalPass::Stock {
                        masked_input: None,
                        attention: self.aggregator.forward(x)?,
                        factor_mask: Some(mask.values().to_owned()),
                    }),
                }
            }
            Variant::LgLlm => {
                let v = inputs.embedding.ok_or_else(|| Error::MissingInput {
                    variant: self.variant.to_string(),
                    what: "an embedding vector".into(),
                })?;
                if v.len() != dims.d_llm {
                    return Err(Error::dims("embedding length", dims.d_llm, v.len()));
                }
                Some(GlobalPass::Llm {
                    embedding: v.to_owned(),
                })
            }
        };

        let global_vector = match &global {
            None => None,
            Some(GlobalPass::Masked) => Some(Array1::zeros(dims.factors)),
            Some(GlobalPass::Stock {
                attention,
                factor_mask,
                ..
            }) => Some(match factor_mask {
                Some(mask) => apply_mask(attention.output.view(), &MaskVector::new(mask.clone())?)?,
                None => attention.output.clone(),
            }),
            Some(GlobalPass::Llm { embedding }) => Some(self.mapper.map(embedding.view())?),
        };

        let (beta, prediction) = match &global_vector {
            None => (None, alpha.to_owned()),
            Some(f) => {
                let beta = self.beta.forward(x);
                let prediction = &alpha + &beta.output.dot(f);
                (Some(beta), prediction)
            }
        };
        Ok(ForwardPass {
            local,
            beta,
            global,
            global_vector,
            prediction,
        })
    }

    pub fn predict(&self, inputs: PredictInputs<'_>) -> Result<Array1<f64>> {
        Ok(self.forward(inputs)?.prediction)
    }

    /// Gradients of a scalar loss given `d_pred = dL/d(prediction)`.
    pub fn backward(&self, inputs: PredictInputs<'_>, pass: &ForwardPass, d_pred: ArrayView1<'_, f64>) -> Self {
        let mut grads = self.zeros_like();
        self.accumulate_backward(inputs, pass, d_pred, &mut grads);
        grads
    }

    pub fn accumulate_backward(
        &self,
        inputs: PredictInputs<'_>,
        pass: &ForwardPass,
        d_pred: ArrayView1<'_, f64>,
        grads: &mut Self,
    ) {
        let x = inputs.features;
        let d_col = d_pred.insert_axis(Axis(1));
        self.local.backward(x, &pass.local, d_col, &mut grads.local);

        let (Some(beta), Some(f)) = (&pass.beta, &pass.global_vector) else {
            return;
        };
        let d_beta = d_col.dot(&f.view().insert_axis(Axis(0)));
        self.beta.backward(x, beta, d_beta.view(), &mut grads.beta);
        let d_global = beta.output.t().dot(&d_pred);

        match pass.global.as_ref().expect("global pass present") {
            GlobalPass::Masked => {}
            GlobalPass::Stock {
                masked_input,
                attention,
                factor_mask,
            } => {
                let d_stock = match factor_mask {
                    Some(mask) => &d_global * mask,
                    None => d_global,
                };
                let agg_in = masked_input.as_ref().map_or(x, |m| m.view());
                self.aggregator
                    .backward(agg_in, attention, d_stock.view(), &mut grads.aggregator);
            }
            GlobalPass::Llm { embedding } => {
                self.mapper
                    .backward(embedding.view(), d_global.view(), &mut grads.mapper);
            }
        }
    }

    /// Cross-sectional mean squared error and its parameter gradient.
    pub fn mse_and_grad(&self, inputs: PredictInputs<'_>, targets: ArrayView1<'_, f64>) -> Result<(f64, Self)> {
        let pass = self.forward(inputs)?;
        if targets.len() != pass.prediction.len() {
            return Err(Error::dims("targets", pass.prediction.len(), targets.len()));
        }
        let resid = &pass.prediction - &targets;
        let n = resid.len() as f64;
        let loss = resid.dot(&resid) / n;
        let d_pred = resid * (2.0 / n);
        let grads = self.backward(inputs, &pass, d_pred.view());
        Ok((loss, grads))
    }

    pub fn mse(&self, inputs: PredictInputs<'_>, targets: ArrayView1<'_, f64>) -> Result<f64> {
        let pred = self.predict(inputs)?;
        if targets.len() != pred.len() {
            return Err(Error::dims("targets", pred.len(), targets.len()));
        }
        let resid = &pred - &targets;
        Ok(resid.dot(&resid) / resid.len() as f64)
    }
}

impl ParamTensors for LgModelParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.local.tensors();
        t.extend(self.beta.tensors());
        t.extend(self.aggregator.tensors());
        t.extend(self.mapper.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.local.tensors_mut();
        t.extend(self.beta.tensors_mut());
        t.extend(self.aggregator.tensors_mut());
        t.extend(self.mapper.tensors_mut());
        t
    }
}
