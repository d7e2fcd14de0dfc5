//! The Local-Global predictor.
//!
//! A prediction for the cross-section `M` (n x m) is `F_local(M) + F_beta(M) f`, where the
//! global vector `f` depends on the variant: absent for `Local`, an attention aggregate of
//! the stock features for `LG-STOCK`, a linear map of the day's embedding for `LG-LLM`, and
//! a mask-filtered aggregate for `SCRL-LG`.

mod attention;
mod checkpoint;
mod mapper;
mod mlp;
mod model;
mod params;

use ndarray::{Array1, ArrayView1, ArrayView2};

pub use attention::{normalize_similarities, AttentionAggregator, AttentionPass};
pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use mapper::{apply_mask, LlmMapper, MaskVector};
pub use mlp::{MlpCache, MlpHead};
pub use model::{ForwardPass, LgModelParams, MaskPath, ModelDims, PredictInputs, Variant};
pub use params::ParamTensors;

use crate::Result;

/// Non-negative attention weights over the rows of `m`, summing to one.
pub fn attention_weights(agg: &AttentionAggregator, m: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    agg.attention_weights(m)
}

/// Attention-weighted sum of the value rows `M W_value`.
pub fn aggregate_stock(agg: &AttentionAggregator, m: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    agg.aggregate(m)
}

pub fn map_llm(mapper: &LlmMapper, v_llm: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    mapper.map(v_llm)
}

pub fn predict(
    params: &LgModelParams,
    m: ArrayView2<'_, f64>,
    v_llm: Option<ArrayView1<'_, f64>>,
    mask: Option<&MaskVector>,
) -> Result<Array1<f64>> {
    params.predict(PredictInputs {
        features: m,
        embedding: v_llm,
        mask,
    })
}
