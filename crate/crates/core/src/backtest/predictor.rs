use ndarray::{Array1, ArrayView1};

use super::engine::{DecisionContext, Predictor};
use crate::lgmodel::{Checkpoint, LgModelParams, PredictInputs, Variant};
use crate::training::{Actor, MaskPolicy};
use crate::{Error, Result};

/// Any trained variant, with the mask policy for SCRL-LG.
#[derive(Debug, Clone)]
pub struct ModelPredictor {
    pub model: LgModelParams,
    pub policy: Option<MaskPolicy>,
}

impl ModelPredictor {
    pub fn new(model: LgModelParams, policy: Option<MaskPolicy>) -> Result<Self> {
        if model.variant == Variant::ScrlLg && policy.is_none() {
            return Err(Error::MissingInput {
                variant: model.variant.to_string(),
                what: "a mask policy".into(),
            });
        }
        Ok(Self { model, policy })
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        Self::new(ckpt.model.clone(), ckpt.policy.clone())
    }

    pub fn from_actor(actor: &Actor) -> Self {
        Self {
            model: actor.model.clone(),
            policy: Some(actor.policy.clone()),
        }
    }
}

impl Predictor for ModelPredictor {
    fn predict(&self, ctx: &DecisionContext<'_>) -> Result<Array1<f64>> {
        let section = ctx.cross_section()?;
        let x = section.view();
        match self.model.variant {
            Variant::Local | Variant::LgStock => self.model.predict(PredictInputs::new(x)),
            Variant::LgLlm => {
                let v = ctx.embedding()?;
                self.model.predict(PredictInputs::new(x).with_embedding(ArrayView1::from(v)))
            }
            Variant::ScrlLg => {
                let v = ArrayView1::from(ctx.embedding()?);
                let policy = self.policy.as_ref().expect("checked in new");
                let mask = policy.evaluation_mask(v)?;
                self.model.predict(PredictInputs::new(x).with_mask(&mask))
            }
        }
    }
}
