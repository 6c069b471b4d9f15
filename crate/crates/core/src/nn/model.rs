use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gru::{gru_step, gru_step_backward, GruCache, GruLayer, GRU_TENSORS};
use super::{check_len, NnError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Features per encoder step.
    pub input_size: usize,
    pub hidden_size: usize,
    pub num_layers: usize,
    /// Number of encoder steps (Tx).
    pub input_steps: usize,
    /// Number of decoder steps (Ty).
    pub output_steps: usize,
    /// Extra constant decoder inputs appended to the fed-back time value.
    #[serde(default)]
    pub decoder_extra: usize,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.input_size == 0 {
            return Err(NnError::InvalidConfig("input_size must be positive"));
        }
        if self.hidden_size == 0 {
            return Err(NnError::InvalidConfig("hidden_size must be positive"));
        }
        if self.num_layers == 0 {
            return Err(NnError::InvalidConfig("num_layers must be positive"));
        }
        if self.input_steps == 0 || self.output_steps == 0 {
            return Err(NnError::InvalidConfig("sequence lengths must be positive"));
        }
        Ok(())
    }

    pub fn decoder_input_size(&self) -> usize {
        1 + self.decoder_extra
    }
}

/// Encoder–decoder GRU stack with an affine read-out of the top decoder state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seq2SeqModel {
    pub config: ModelConfig,
    pub encoder: Vec<GruLayer>,
    pub decoder: Vec<GruLayer>,
    pub dense_w: Vec<f64>,
    pub dense_b: Vec<f64>,
}

/// One training or inference example, all in normalized units.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    /// `input_steps × input_size`, row-major.
    pub inputs: &'a [f64],
    /// Seed value fed to the first decoder step.
    pub y0: f64,
    /// Constant extra decoder inputs, `decoder_extra` long.
    pub extra: &'a [f64],
    /// True outputs, `output_steps` long. May be empty for inference.
    pub targets: &'a [f64],
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `[layer][step]`
    pub encoder: Vec<Vec<GruCache>>,
    pub decoder: Vec<Vec<GruCache>>,
    pub predictions: Vec<f64>,
}

impl Seq2SeqModel {
    pub fn zeros(config: ModelConfig) -> Result<Self, NnError> {
        config.validate()?;
        let layers = |first_input: usize| {
            (0..config.num_layers)
                .map(|l| {
                    let p = if l == 0 { first_input } else { config.hidden_size };
                    GruLayer::zeros(p, config.hidden_size)
                })
                .collect()
        };
        Ok(Self {
            config,
            encoder: layers(config.input_size),
            decoder: layers(config.decoder_input_size()),
            dense_w: vec![0.0; config.hidden_size],
            dense_b: vec![0.0],
        })
    }

    /// Seeded initialization: weights uniform in `±1/sqrt(hidden)`, biases zero.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, NnError> {
        let mut model = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = config.hidden_size;
        for (l, layer) in model.encoder.iter_mut().enumerate() {
            *layer = GruLayer::init(if l == 0 { config.input_size } else { k }, k, &mut rng);
        }
        for (l, layer) in model.decoder.iter_mut().enumerate() {
            *layer = GruLayer::init(if l == 0 { config.decoder_input_size() } else { k }, k, &mut rng);
        }
        let s = 1.0 / crate::math::sqrt(k as f64);
        model.dense_w.iter_mut().for_each(|w| *w = rand::Rng::random_range(&mut rng, -s..=s));
        Ok(model)
    }

    /// A zeroed model of identical shape, used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.config).expect("config already validated")
    }

    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (part, layers) in [("encoder", &self.encoder), ("decoder", &self.decoder)] {
            for l in 0..layers.len() {
                for t in GRU_TENSORS {
                    names.push(format!("{part}.{l}.{t}"));
                }
            }
        }
        names.push("dense.w".into());
        names.push("dense.b".into());
        names
    }

    /// All parameter tensors in the order of [`Self::tensor_names`].
    pub fn tensors(&self) -> Vec<&Vec<f64>> {
        let mut out: Vec<&Vec<f64>> = Vec::new();
        for layer in self.encoder.iter().chain(&self.decoder) {
            out.extend(layer.tensors());
        }
        out.push(&self.dense_w);
        out.push(&self.dense_b);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out: Vec<&mut Vec<f64>> = Vec::new();
        for layer in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            out.extend(layer.tensors_mut());
        }
        out.push(&mut self.dense_w);
        out.push(&mut self.dense_b);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Runs the encoder; layer `l` reads layer `l-1`'s state sequence.
    pub fn encode(&self, inputs: &[f64]) -> Result<Vec<Vec<GruCache>>, NnError> {
        let cfg = &self.config;
        check_len("encoder inputs", cfg.input_steps * cfg.input_size, inputs.len())?;
        let mut caches: Vec<Vec<GruCache>> = Vec::with_capacity(cfg.num_layers);
        for (l, layer) in self.encoder.iter().enumerate() {
            let mut state = vec![0.0; cfg.hidden_size];
            let mut steps = Vec::with_capacity(cfg.input_steps);
            for t in 0..cfg.input_steps {
                let x: &[f64] = if l == 0 {
                    &inputs[t * cfg.input_size..(t + 1) * cfg.input_size]
                } else {
                    &caches[l - 1][t].c
                };
                let cache = gru_step(layer, x, &state)?;
                state.clone_from(&cache.c);
                steps.push(cache);
            }
            caches.push(steps);
        }
        Ok(caches)
    }

    /// Final encoder state of each layer.
    pub fn context(&self, inputs: &[f64]) -> Result<Vec<Vec<f64>>, NnError> {
        Ok(self.encode(inputs)?.into_iter().map(|steps| steps.last().expect("input_steps > 0").c.clone()).collect())
    }

    /// Runs the decoder from `context`. Step 0 reads `y0`; step `t > 0` reads
    /// `teacher[t-1]` when `mask[t]` is set and its own previous prediction
    /// otherwise. `mask[0]` is ignored.
    pub fn decode(
        &self,
        context: &[Vec<f64>],
        y0: f64,
        extra: &[f64],
        teacher: Option<&[f64]>,
        mask: &[bool],
    ) -> Result<(Vec<Vec<GruCache>>, Vec<f64>), NnError> {
        let cfg = &self.config;
        let ty = cfg.output_steps;
        check_len("context layers", cfg.num_layers, context.len())?;
        check_len("decoder extra inputs", cfg.decoder_extra, extra.len())?;
        check_len("sampling mask", ty, mask.len())?;
        let forced = mask.iter().skip(1).any(|m| *m);
        if forced {
            match teacher {
                Some(t) => check_len("teacher values", ty, t.len())?,
                None => return Err(NnError::MissingTeacher),
            }
        }
        let mut states: Vec<Vec<f64>> = context.to_vec();
        let mut caches: Vec<Vec<GruCache>> = (0..cfg.num_layers).map(|_| Vec::with_capacity(ty)).collect();
        let mut predictions = Vec::with_capacity(ty);
        let mut x = vec![0.0; cfg.decoder_input_size()];
        x[1..].copy_from_slice(extra);
        for t in 0..ty {
            x[0] = if t == 0 {
                y0
            } else if mask[t] {
                teacher.expect("checked above")[t - 1]
            } else {
                predictions[t - 1]
            };
            for (l, layer) in self.decoder.iter().enumerate() {
                let cache = if l == 0 { gru_step(layer, &x, &states[l])? } else { gru_step(layer, &caches[l - 1][t].c, &states[l])? };
                states[l].clone_from(&cache.c);
                caches[l].push(cache);
            }
            predictions.push(self.read_out(&states[cfg.num_layers - 1]));
        }
        Ok((caches, predictions))
    }

    fn read_out(&self, h: &[f64]) -> f64 {
        self.dense_b[0] + self.dense_w.iter().zip(h).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn forward(&self, sample: &Sample<'_>, mask: &[bool]) -> Result<ForwardCache, NnError> {
        let encoder = self.encode(sample.inputs)?;
        let context: Vec<Vec<f64>> = encoder.iter().map(|s| s.last().expect("input_steps > 0").c.clone()).collect();
        let teacher = (!sample.targets.is_empty()).then_some(sample.targets);
        let (decoder, predictions) = self.decode(&context, sample.y0, sample.extra, teacher, mask)?;
        Ok(ForwardCache { encoder, decoder, predictions })
    }

    /// Pure inference: every decoder step reads its own previous prediction.
    pub fn predict(&self, inputs: &[f64], y0: f64, extra: &[f64]) -> Result<Vec<f64>, NnError> {
        let sample = Sample { inputs, y0, extra, targets: &[] };
        Ok(self.forward(&sample, &vec![false; self.config.output_steps])?.predictions)
    }

    /// Batch-mean MSE without gradients.
    pub fn batch_loss(&self, batch: &[Sample<'_>], mask: &[bool]) -> Result<f64, NnError> {
        let mut total = 0.0;
        for s in batch {
            check_len("targets", self.config.output_steps, s.targets.len())?;
            let p = self.forward(s, mask)?.predictions;
            total += super::mse_loss(s.targets, &p)?;
        }
        Ok(total / batch.len().max(1) as f64)
    }

    /// Batch-mean MSE and its exact gradient, accumulated into `grad`
    /// (which should start zeroed). One mask is shared by the batch.
    pub fn loss_and_gradient(
        &self,
        batch: &[Sample<'_>],
        mask: &[bool],
        grad: &mut Seq2SeqModel,
    ) -> Result<f64, NnError> {
        let ty = self.config.output_steps;
        let scale = 1.0 / (batch.len().max(1) * ty) as f64;
        let mut total = 0.0;
        for s in batch {
            check_len("targets", ty, s.targets.len())?;
            let cache = self.forward(s, mask)?;
            total += super::mse_loss(s.targets, &cache.predictions)?;
            let dpred: Vec<f64> =
                cache.predictions.iter().zip(s.targets).map(|(p, y)| 2.0 * (p - y) * scale).collect();
            self.backward(&cache, &dpred, mask, grad);
        }
        Ok(total / batch.len().max(1) as f64)
    }

    /// Reverse pass for one sample given `dpred = dL/dprediction`.
    pub fn backward(&self, cache: &ForwardCache, dpred: &[f64], mask: &[bool], grad: &mut Seq2SeqModel) {
        let cfg = &self.config;
        let (nl, k, ty) = (cfg.num_layers, cfg.hidden_size, cfg.output_steps);
        let mut dpred = dpred.to_vec();
        let mut carry = vec![vec![0.0; k]; nl];
        for t in (0..ty).rev() {
            let top = &cache.decoder[nl - 1][t].c;
            grad.dense_b[0] += dpred[t];
            for i in 0..k {
                grad.dense_w[i] += dpred[t] * top[i];
            }
            let mut from_above: Vec<f64> = self.dense_w.iter().map(|w| w * dpred[t]).collect();
            for l in (0..nl).rev() {
                let dh: Vec<f64> = carry[l].iter().zip(&from_above).map(|(a, b)| a + b).collect();
                let (dx, dprev) = gru_step_backward(&self.decoder[l], &cache.decoder[l][t], &dh, &mut grad.decoder[l]);
                carry[l] = dprev;
                from_above = dx;
            }
            if t > 0 && !mask[t] {
                dpred[t - 1] += from_above[0];
            }
        }
        // `carry` now holds the gradient on each layer's context vector.
        let tx = cfg.input_steps;
        for t in (0..tx).rev() {
            let mut from_above = vec![0.0; k];
            for l in (0..nl).rev() {
                let dh: Vec<f64> = carry[l].iter().zip(&from_above).map(|(a, b)| a + b).collect();
                let (dx, dprev) = gru_step_backward(&self.encoder[l], &cache.encoder[l][t], &dh, &mut grad.encoder[l]);
                carry[l] = dprev;
                from_above = dx;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn config() -> ModelConfig {
        ModelConfig { input_size: 2, hidden_size: 4, num_layers: 2, input_steps: 3, output_steps: 3, decoder_extra: 0 }
    }

    struct Data {
        inputs: Vec<Vec<f64>>,
        targets: Vec<Vec<f64>>,
    }

    fn data(seed: u64, n: usize, cfg: &ModelConfig) -> Data {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Data {
            inputs: (0..n).map(|_| (0..cfg.input_steps * cfg.input_size).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(),
            targets: (0..n).map(|_| (0..cfg.output_steps).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(),
        }
    }

    fn batch<'a>(d: &'a Data) -> Vec<Sample<'a>> {
        d.inputs.iter().zip(&d.targets).map(|(i, t)| Sample { inputs: i, y0: 0.3, extra: &[], targets: t }).collect()
    }

    fn gradient_check(model: &Seq2SeqModel, samples: &[Sample<'_>], mask: &[bool]) -> f64 {
        let mut grad = model.zeros_like();
        model.loss_and_gradient(samples, mask, &mut grad).unwrap();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        let n_tensors = model.tensors().len();
        for ti in 0..n_tensors {
            for idx in 0..model.tensors()[ti].len() {
                let mut plus = model.clone();
                plus.tensors_mut()[ti][idx] += h;
                let mut minus = model.clone();
                minus.tensors_mut()[ti][idx] -= h;
                let fd = (plus.batch_loss(samples, mask).unwrap() - minus.batch_loss(samples, mask).unwrap()) / (2.0 * h);
                let an = grad.tensors()[ti][idx];
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        let cfg = config();
        let model = Seq2SeqModel::new(cfg, 11).unwrap();
        let d = data(5, 2, &cfg);
        let samples = batch(&d);
        for mask in [[true; 3], [false; 3], [false, true, false]] {
            let err = gradient_check(&model, &samples, &mask);
            assert!(err < 1e-4, "mask {mask:?}: {err}");
        }
    }

    #[test]
    fn gradients_with_decoder_extra_inputs() {
        let cfg = ModelConfig { decoder_extra: 2, num_layers: 1, ..config() };
        let model = Seq2SeqModel::new(cfg, 3).unwrap();
        let d = data(6, 2, &cfg);
        let extra = [0.4, -0.2];
        let samples: Vec<Sample<'_>> =
            d.inputs.iter().zip(&d.targets).map(|(i, t)| Sample { inputs: i, y0: 0.1, extra: &extra, targets: t }).collect();
        assert!(gradient_check(&model, &samples, &[false; 3]) < 1e-4);
    }

    #[test]
    fn zero_model_predicts_zero() {
        let model = Seq2SeqModel::zeros(config()).unwrap();
        let p = model.predict(&[0.5; 6], 0.7, &[]).unwrap();
        assert_eq!(p, vec![0.0; 3]);
        assert!(model.context(&[0.5; 6]).unwrap().iter().all(|c| c.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn teacher_equal_to_own_output_is_inference() {
        let model = Seq2SeqModel::new(config(), 2).unwrap();
        let inputs = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let free = model.predict(&inputs, 0.2, &[]).unwrap();
        let s = Sample { inputs: &inputs, y0: 0.2, extra: &[], targets: &free };
        let forced = model.forward(&s, &[true; 3]).unwrap().predictions;
        assert_eq!(free, forced);
    }

    #[test]
    fn mask_changes_gradient() {
        let cfg = config();
        let model = Seq2SeqModel::new(cfg, 8).unwrap();
        let d = data(1, 2, &cfg);
        let samples = batch(&d);
        let mut g1 = model.zeros_like();
        let mut g2 = model.zeros_like();
        model.loss_and_gradient(&samples, &[true; 3], &mut g1).unwrap();
        model.loss_and_gradient(&samples, &[false; 3], &mut g2).unwrap();
        assert_ne!(g1, g2);
    }

    #[test]
    fn single_step_context_is_chained_step() {
        let cfg = ModelConfig { input_steps: 1, ..config() };
        let model = Seq2SeqModel::new(cfg, 4).unwrap();
        let x = [0.3, -0.8];
        let c0 = gru_step(&model.encoder[0], &x, &[0.0; 4]).unwrap().c;
        let c1 = gru_step(&model.encoder[1], &c0, &[0.0; 4]).unwrap().c;
        assert_eq!(model.context(&x).unwrap(), vec![c0, c1]);
    }

    #[test]
    fn errors() {
        let model = Seq2SeqModel::new(config(), 1).unwrap();
        assert!(matches!(model.predict(&[0.0; 5], 0.0, &[]), Err(NnError::ShapeMismatch { .. })));
        let ctx = model.context(&[0.0; 6]).unwrap();
        assert_eq!(model.decode(&ctx, 0.0, &[], None, &[false, true, false]).unwrap_err(), NnError::MissingTeacher);
        // The first step never reads the teacher.
        assert!(model.decode(&ctx, 0.0, &[], None, &[true, false, false]).is_ok());
        assert!(Seq2SeqModel::new(ModelConfig { num_layers: 0, ..config() }, 0).is_err());
    }

    #[test]
    fn names_align_with_tensors() {
        let model = Seq2SeqModel::new(config(), 1).unwrap();
        assert_eq!(model.tensor_names().len(), model.tensors().len());
        assert_eq!(model.tensor_names()[0], "encoder.0.w_z");
        assert_eq!(model.tensor_names().last().unwrap(), "dense.b");
        assert_eq!(model.parameter_count(), 2 * (3 * (4 * 2 + 16 + 4)) + 2 * 3 * (4 * 4 + 16 + 4) - 3 * 4 + 5);
    }
}
