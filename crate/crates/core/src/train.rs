//! Training loop with scheduled sampling.

use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureTensor, MinMax, Role, FEATURE_TIME, GRID_POINTS};
use crate::math::{mix_seed, powf};
use crate::nn::{ModelConfig, NnError, OptimizerState, Sample, Seq2SeqModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("no training objects")]
    EmptyDataset,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("time normalization statistics are missing")]
    MissingStats,
    #[error(transparent)]
    Network(#[from] NnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Scheduled-sampling base `k`; teacher forcing probability is `k^epoch`.
    pub decay_k: f64,
    /// Encoder length Tx; the decoder predicts the remaining `25 - Tx` points.
    pub input_steps: usize,
    pub hidden_size: usize,
    pub num_layers: usize,
    pub seed: u64,
    /// Feed the last input step's non-time features to every decoder step.
    #[serde(default)]
    pub decoder_static: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub clipnorm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001795,
            batch_size: 27,
            epochs: 2900,
            decay_k: 0.15665,
            input_steps: 5,
            hidden_size: 59,
            num_layers: 3,
            seed: 0,
            decoder_static: false,
            beta1: 0.999,
            beta2: 0.999,
            clipnorm: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn output_steps(&self) -> usize {
        GRID_POINTS.saturating_sub(self.input_steps)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.input_steps == 0 || self.input_steps >= GRID_POINTS {
            return Err(TrainError::InvalidConfig("input_steps must lie in 1..=24"));
        }
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch_size must be positive"));
        }
        if !(self.decay_k > 0.0 && self.decay_k < 1.0) {
            return Err(TrainError::InvalidConfig("decay_k must lie in (0, 1)"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(TrainError::InvalidConfig("learning_rate must be positive"));
        }
        if self.hidden_size == 0 || self.num_layers == 0 {
            return Err(TrainError::InvalidConfig("model dimensions must be positive"));
        }
        Ok(())
    }

    pub fn model_config(&self, n_features: usize) -> ModelConfig {
        ModelConfig {
            input_size: n_features,
            hidden_size: self.hidden_size,
            num_layers: self.num_layers,
            input_steps: self.input_steps,
            output_steps: self.output_steps(),
            decoder_extra: if self.decoder_static { n_features - 1 } else { 0 },
        }
    }

    fn optimizer(&self, model: &Seq2SeqModel) -> OptimizerState {
        let mut opt = OptimizerState::new(self.learning_rate, model);
        opt.beta1 = self.beta1;
        opt.beta2 = self.beta2;
        opt.clipnorm = self.clipnorm;
        opt
    }
}

/// Teacher-forcing probability `k^j` at epoch `j`.
pub fn sampling_probability(epoch: usize, k: f64) -> f64 {
    powf(k, epoch as f64)
}

/// Independent Bernoulli(`p`) per output step; `true` feeds the true value.
pub fn draw_mask<R: Rng + ?Sized>(steps: usize, p: f64, rng: &mut R) -> Vec<bool> {
    (0..steps).map(|_| rng.random::<f64>() < p).collect()
}

/// Per-object model inputs cut from a feature tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSet {
    pub inputs: Vec<Vec<f64>>,
    pub y0: Vec<f64>,
    pub extra: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl SequenceSet {
    pub fn from_tensor(tensor: &FeatureTensor, objects: &[usize], cfg: &ModelConfig) -> Result<Self, TrainError> {
        let tx = cfg.input_steps;
        if tx + cfg.output_steps != tensor.steps || cfg.input_size != tensor.n_features {
            return Err(NnError::ShapeMismatch {
                what: "tensor steps",
                expected: tx + cfg.output_steps,
                got: tensor.steps,
            }
            .into());
        }
        let mut set = Self { inputs: vec![], y0: vec![], extra: vec![], targets: vec![] };
        for &i in objects {
            let inputs: Vec<f64> = (0..tx).flat_map(|s| tensor.step(i, s).iter().copied()).collect();
            let last = tensor.step(i, tx - 1);
            set.y0.push(last[FEATURE_TIME]);
            set.extra.push(if cfg.decoder_extra > 0 { last[1..].to_vec() } else { vec![] });
            set.targets.push((tx..tensor.steps).map(|s| tensor.get(i, s, FEATURE_TIME)).collect());
            set.inputs.push(inputs);
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn sample(&self, i: usize) -> Sample<'_> {
        Sample { inputs: &self.inputs[i], y0: self.y0[i], extra: &self.extra[i], targets: &self.targets[i] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Per-epoch mean training loss, normalized time units squared.
    pub train_loss: Vec<f64>,
    /// Per-epoch validation loss in pure inference mode.
    pub val_loss: Vec<f64>,
    /// Index of the epoch whose model was kept, if any epoch ran.
    pub best_epoch: Option<usize>,
    pub best_val_loss: f64,
    /// Width of the time normalization range, days; converts losses to day².
    pub time_range_days: f64,
    /// Validation objects whose best-model prediction is not strictly increasing.
    pub monotonicity_violations: usize,
    /// Filled in by callers that measure time.
    pub wall_time_secs: Option<f64>,
}

impl TrainReport {
    pub fn to_days_squared(&self, loss: f64) -> f64 {
        loss * self.time_range_days * self.time_range_days
    }
}

/// Resumable training state; `advance_to` continues where it left off.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub cfg: TrainConfig,
    pub model: Seq2SeqModel,
    pub optimizer: OptimizerState,
    pub best_model: Seq2SeqModel,
    train: SequenceSet,
    validation: SequenceSet,
    validation_is_training: bool,
    rng: ChaCha8Rng,
    epoch: usize,
    train_loss: Vec<f64>,
    val_loss: Vec<f64>,
    best_epoch: Option<usize>,
    best_val: f64,
    time_range: f64,
}

impl Trainer {
    /// Builds the model from `cfg.seed` and prepares train/validation
    /// sequences. Without validation objects the training set is scored in
    /// inference mode instead.
    pub fn new(tensor: &FeatureTensor, cfg: TrainConfig) -> Result<Self, TrainError> {
        cfg.validate()?;
        let model = Seq2SeqModel::new(cfg.model_config(tensor.n_features), mix_seed(cfg.seed, 0))?;
        Self::with_model(tensor, cfg, model)
    }

    pub fn with_model(tensor: &FeatureTensor, cfg: TrainConfig, model: Seq2SeqModel) -> Result<Self, TrainError> {
        cfg.validate()?;
        let stats = tensor.time_stats().ok_or(TrainError::MissingStats)?;
        let train_idx = tensor.indices_with_role(Role::Train);
        if train_idx.is_empty() {
            return Err(TrainError::EmptyDataset);
        }
        let val_idx = tensor.indices_with_role(Role::Validation);
        let train = SequenceSet::from_tensor(tensor, &train_idx, &model.config)?;
        let validation_is_training = val_idx.is_empty();
        let validation = if validation_is_training {
            train.clone()
        } else {
            SequenceSet::from_tensor(tensor, &val_idx, &model.config)?
        };
        Ok(Self {
            optimizer: cfg.optimizer(&model),
            best_model: model.clone(),
            model,
            cfg,
            train,
            validation,
            validation_is_training,
            rng: ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 1)),
            epoch: 0,
            train_loss: vec![],
            val_loss: vec![],
            best_epoch: None,
            best_val: f64::INFINITY,
            time_range: stats.range(),
        })
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    pub fn validation_uses_training_set(&self) -> bool {
        self.validation_is_training
    }

    /// Latest validation loss, or `None` before the first epoch.
    pub fn last_val_loss(&self) -> Option<f64> {
        self.val_loss.last().copied()
    }

    pub fn run_epoch(&mut self) -> Result<(f64, f64), TrainError> {
        let ty = self.model.config.output_steps;
        let p = sampling_probability(self.epoch, self.cfg.decay_k);
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        order.shuffle(&mut self.rng);
        let mut weighted = 0.0;
        for chunk in order.chunks(self.cfg.batch_size) {
            let mask = draw_mask(ty, p, &mut self.rng);
            let batch: Vec<Sample<'_>> = chunk.iter().map(|&i| self.train.sample(i)).collect();
            let mut grad = self.model.zeros_like();
            let loss = self.model.loss_and_gradient(&batch, &mask, &mut grad)?;
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch: self.epoch });
            }
            self.optimizer.clip_and_step(&mut self.model, &grad)?;
            weighted += loss * chunk.len() as f64;
        }
        let train_loss = weighted / self.train.len() as f64;
        let val_loss = self.inference_loss(&self.model)?;
        if !val_loss.is_finite() {
            return Err(TrainError::NonFiniteLoss { epoch: self.epoch });
        }
        if val_loss < self.best_val {
            self.best_val = val_loss;
            self.best_epoch = Some(self.epoch);
            self.best_model.clone_from(&self.model);
        }
        self.train_loss.push(train_loss);
        self.val_loss.push(val_loss);
        self.epoch += 1;
        Ok((train_loss, val_loss))
    }

    /// Trains until `epochs` epochs have run in total.
    pub fn advance_to(&mut self, epochs: usize) -> Result<(), TrainError> {
        while self.epoch < epochs {
            self.run_epoch()?;
        }
        Ok(())
    }

    fn inference_loss(&self, model: &Seq2SeqModel) -> Result<f64, TrainError> {
        let free = vec![false; model.config.output_steps];
        let batch: Vec<Sample<'_>> = (0..self.validation.len()).map(|i| self.validation.sample(i)).collect();
        Ok(model.batch_loss(&batch, &free)?)
    }

    pub fn report(&self) -> Result<TrainReport, TrainError> {
        let free = vec![false; self.model.config.output_steps];
        let mut violations = 0;
        if self.best_epoch.is_some() {
            for i in 0..self.validation.len() {
                let s = self.validation.sample(i);
                let p = self.best_model.forward(&s, &free)?.predictions;
                if !p.windows(2).all(|w| w[0] < w[1]) {
                    violations += 1;
                }
            }
        }
        Ok(TrainReport {
            train_loss: self.train_loss.clone(),
            val_loss: self.val_loss.clone(),
            best_epoch: self.best_epoch,
            best_val_loss: self.best_val,
            time_range_days: self.time_range,
            monotonicity_violations: violations,
            wall_time_secs: None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub best_model: Seq2SeqModel,
    pub final_model: Seq2SeqModel,
    pub optimizer: OptimizerState,
}

/// Full training run of `cfg.epochs` epochs.
pub fn train(tensor: &FeatureTensor, cfg: TrainConfig) -> Result<TrainOutcome, TrainError> {
    let mut trainer = Trainer::new(tensor, cfg)?;
    trainer.advance_to(cfg.epochs)?;
    Ok(TrainOutcome {
        report: trainer.report()?,
        best_model: trainer.best_model,
        final_model: trainer.model,
        optimizer: trainer.optimizer,
    })
}

/// Inference on one input segment (`Tx × F`, normalized). Returns residual
/// times in days for the output steps; the last one is the re-entry time.
pub fn predict(
    model: &Seq2SeqModel,
    time_stats: Option<MinMax>,
    input_segment: &[f64],
    y0: f64,
    extra: &[f64],
) -> Result<Vec<f64>, TrainError> {
    let stats = time_stats.ok_or(TrainError::MissingStats)?;
    let out = model.predict(input_segment, y0, extra)?;
    Ok(out.into_iter().map(|v| stats.invert(v)).collect())
}

/// [`predict`] for object `index` of `tensor`.
pub fn predict_object(model: &Seq2SeqModel, tensor: &FeatureTensor, index: usize) -> Result<Vec<f64>, TrainError> {
    let set = SequenceSet::from_tensor(tensor, &[index], &model.config)?;
    predict(model, tensor.time_stats(), &set.inputs[0], set.y0[0], &set.extra[0])
}
