//! Versioned JSON checkpoints.
//!
//! Parameters are stored as named, flattened row-major arrays. serde_json
//! writes floats in shortest round-trip form, so save/load is bit-exact.

use std::path::Path;

use reentry_core::features::MinMax;
use reentry_core::nn::{ModelConfig, OptimizerState, Seq2SeqModel};
use reentry_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_json, write_json};

pub const CHECKPOINT_SCHEMA: &str = "reentry.checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerCheckpoint {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub clipnorm: f64,
    pub step: u64,
    pub m: Vec<NamedTensor>,
    pub v: Vec<NamedTensor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema: String,
    pub train_config: TrainConfig,
    pub model_config: ModelConfig,
    /// Epoch the parameters come from (1-based), if known.
    pub epoch: Option<usize>,
    pub feature_names: Vec<String>,
    /// Min-max statistics per feature; `None` for raw features.
    pub norm_stats: Vec<Option<MinMax>>,
    pub parameters: Vec<NamedTensor>,
    pub optimizer: Option<OptimizerCheckpoint>,
}

fn named(names: &[String], tensors: Vec<&Vec<f64>>) -> Vec<NamedTensor> {
    names.iter().zip(tensors).map(|(n, t)| NamedTensor { name: n.clone(), values: t.clone() }).collect()
}

fn unpack(names: &[String], stored: &[NamedTensor], what: &str) -> Result<Vec<Vec<f64>>> {
    if stored.len() != names.len() {
        return Err(Error::input(format!("{what}: expected {} tensors, found {}", names.len(), stored.len())));
    }
    names
        .iter()
        .zip(stored)
        .map(|(n, t)| {
            if &t.name != n {
                return Err(Error::input(format!("{what}: expected tensor {n}, found {}", t.name)));
            }
            Ok(t.values.clone())
        })
        .collect()
}

impl Checkpoint {
    pub fn new(
        model: &Seq2SeqModel,
        train_config: TrainConfig,
        epoch: Option<usize>,
        feature_names: Vec<String>,
        norm_stats: Vec<Option<MinMax>>,
        optimizer: Option<&OptimizerState>,
    ) -> Self {
        let names = model.tensor_names();
        Self {
            schema: CHECKPOINT_SCHEMA.to_string(),
            train_config,
            model_config: model.config,
            epoch,
            feature_names,
            norm_stats,
            parameters: named(&names, model.tensors()),
            optimizer: optimizer.map(|o| OptimizerCheckpoint {
                lr: o.lr,
                beta1: o.beta1,
                beta2: o.beta2,
                epsilon: o.epsilon,
                clipnorm: o.clipnorm,
                step: o.step,
                m: named(&names, o.m.iter().collect()),
                v: named(&names, o.v.iter().collect()),
            }),
        }
    }

    pub fn model(&self) -> Result<Seq2SeqModel> {
        let mut model = Seq2SeqModel::zeros(self.model_config)?;
        let names = model.tensor_names();
        let values = unpack(&names, &self.parameters, "parameters")?;
        for ((dst, src), name) in model.tensors_mut().into_iter().zip(values).zip(&names) {
            if dst.len() != src.len() {
                return Err(Error::input(format!("parameter {name}: expected {} values, found {}", dst.len(), src.len())));
            }
            *dst = src;
        }
        Ok(model)
    }

    pub fn optimizer_state(&self) -> Result<Option<OptimizerState>> {
        let Some(o) = &self.optimizer else { return Ok(None) };
        let names = Seq2SeqModel::zeros(self.model_config)?.tensor_names();
        Ok(Some(OptimizerState {
            lr: o.lr,
            beta1: o.beta1,
            beta2: o.beta2,
            epsilon: o.epsilon,
            clipnorm: o.clipnorm,
            step: o.step,
            m: unpack(&names, &o.m, "optimizer.m")?,
            v: unpack(&names, &o.v, "optimizer.v")?,
        }))
    }

    /// Min-max statistics of the time feature.
    pub fn time_stats(&self) -> Option<MinMax> {
        self.norm_stats.first().copied().flatten()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck: Checkpoint = read_json(path)?;
        if ck.schema != CHECKPOINT_SCHEMA {
            return Err(Error::input(format!("{}: unsupported schema {}", path.display(), ck.schema)));
        }
        ck.model()?;
        Ok(ck)
    }
}
