//! JSON checkpoints: the model config plus every parameter's name, shape and
//! flat row-major data.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MffbmConfig, MffbmModel};
use crate::tensor::Tensor;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StoredParam {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: MffbmConfig,
    pub params: Vec<StoredParam>,
}

impl Checkpoint {
    pub fn from_model(model: &MffbmModel) -> Self {
        Checkpoint {
            config: model.config().clone(),
            params: model
                .named_params()
                .map(|(name, t)| StoredParam {
                    name: name.to_string(),
                    shape: t.shape().to_vec(),
                    data: t.data().to_vec(),
                })
                .collect(),
        }
    }

    pub fn into_model(self) -> Result<MffbmModel> {
        let named = self
            .params
            .into_iter()
            .map(|p| {
                let t = Tensor::new(p.shape, p.data)
                    .map_err(|e| Error::Config(format!("parameter {}: {e}", p.name)))?;
                Ok((p.name, t))
            })
            .collect::<Result<Vec<_>>>()?;
        MffbmModel::from_params(self.config, named)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parses and fully validates a checkpoint.
    pub fn parse_model(json: &str) -> Result<MffbmModel> {
        let ck: Checkpoint = serde_json::from_str(json)?;
        ck.into_model()
    }
}

pub fn save_checkpoint(model: &MffbmModel, path: &Path) -> Result<()> {
    std::fs::write(path, Checkpoint::from_model(model).to_json()?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<MffbmModel> {
    Checkpoint::parse_model(&std::fs::read_to_string(path)?)
}
