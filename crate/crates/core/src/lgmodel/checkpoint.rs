use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{LgModelParams, ModelDims};
use crate::training::MaskPolicy;
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Serialized model plus the metadata needed to use it.
///
/// JSON with shortest round-trip float formatting, so save then load is bit-exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    /// free-text name shown in reports
    pub label: String,
    /// return horizon the model was trained on
    pub horizon: usize,
    pub dims: ModelDims,
    pub model: LgModelParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<MaskPolicy>,
}

impl Checkpoint {
    pub fn new(label: impl Into<String>, horizon: usize, model: LgModelParams, policy: Option<MaskPolicy>) -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            label: label.into(),
            horizon,
            dims: model.dims(),
            model,
            policy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported checkpoint format version {} (expected {CHECKPOINT_FORMAT_VERSION})",
                self.format_version
            )));
        }
        self.model.validate()?;
        if self.model.dims() != self.dims {
            return Err(Error::InvalidArgument(format!(
                "checkpoint header dims {:?} disagree with tensors {:?}",
                self.dims,
                self.model.dims()
            )));
        }
        if let Some(policy) = &self.policy {
            policy.validate()?;
            if policy.out_dim() != self.model.mask_len() {
                return Err(Error::dims("policy mask length", self.model.mask_len(), policy.out_dim()));
            }
            if policy.d_llm() != self.dims.d_llm {
                return Err(Error::dims("policy d_llm", self.dims.d_llm, policy.d_llm()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        ckpt.validate()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json(inner) => Error::Schema {
                path: path.to_path_buf(),
                line: inner.line() as u64,
                message: inner.to_string(),
            },
            other => other,
        })
    }
}
