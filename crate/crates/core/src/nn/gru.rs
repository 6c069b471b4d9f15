use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_len, NnError};
use crate::math::{sigmoid, tanh};

/// Parameters of one GRU layer. Matrices are row-major; `w_*` are
/// `hidden × input`, `v_*` are `hidden × hidden`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruLayer {
    pub input_size: usize,
    pub hidden_size: usize,
    pub w_z: Vec<f64>,
    pub w_r: Vec<f64>,
    pub w_c: Vec<f64>,
    pub v_z: Vec<f64>,
    pub v_r: Vec<f64>,
    pub v_c: Vec<f64>,
    pub b_z: Vec<f64>,
    pub b_r: Vec<f64>,
    pub b_c: Vec<f64>,
}

pub(crate) const GRU_TENSORS: [&str; 9] = ["w_z", "w_r", "w_c", "v_z", "v_r", "v_c", "b_z", "b_r", "b_c"];

impl GruLayer {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let (p, k) = (input_size, hidden_size);
        Self {
            input_size,
            hidden_size,
            w_z: vec![0.0; k * p],
            w_r: vec![0.0; k * p],
            w_c: vec![0.0; k * p],
            v_z: vec![0.0; k * k],
            v_r: vec![0.0; k * k],
            v_c: vec![0.0; k * k],
            b_z: vec![0.0; k],
            b_r: vec![0.0; k],
            b_c: vec![0.0; k],
        }
    }

    /// Weights uniform in `±1/sqrt(hidden)`, biases zero.
    pub fn init<R: Rng + ?Sized>(input_size: usize, hidden_size: usize, rng: &mut R) -> Self {
        let mut layer = Self::zeros(input_size, hidden_size);
        let s = 1.0 / crate::math::sqrt(hidden_size as f64);
        for m in [
            &mut layer.w_z,
            &mut layer.w_r,
            &mut layer.w_c,
            &mut layer.v_z,
            &mut layer.v_r,
            &mut layer.v_c,
        ] {
            m.iter_mut().for_each(|x| *x = rng.random_range(-s..=s));
        }
        layer
    }

    /// Tensors in the fixed order `w_z, w_r, w_c, v_z, v_r, v_c, b_z, b_r, b_c`.
    pub fn tensors(&self) -> [&Vec<f64>; 9] {
        [&self.w_z, &self.w_r, &self.w_c, &self.v_z, &self.v_r, &self.v_c, &self.b_z, &self.b_r, &self.b_c]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 9] {
        [
            &mut self.w_z,
            &mut self.w_r,
            &mut self.w_c,
            &mut self.v_z,
            &mut self.v_r,
            &mut self.v_c,
            &mut self.b_z,
            &mut self.b_r,
            &mut self.b_c,
        ]
    }
}

/// Intermediate values of one step, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct GruCache {
    pub x: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub candidate: Vec<f64>,
    pub c: Vec<f64>,
}

/// out = W x + V h + b for one gate, with `W` of width `p` and `V` of width `k`.
fn affine(w: &[f64], x: &[f64], v: &[f64], h: &[f64], b: &[f64]) -> Vec<f64> {
    let (p, k) = (x.len(), h.len());
    (0..b.len())
        .map(|i| {
            let mut acc = b[i];
            for (wij, xj) in w[i * p..(i + 1) * p].iter().zip(x) {
                acc += wij * xj;
            }
            for (vij, hj) in v[i * k..(i + 1) * k].iter().zip(h) {
                acc += vij * hj;
            }
            acc
        })
        .collect()
}

pub fn gru_step(layer: &GruLayer, x: &[f64], c_prev: &[f64]) -> Result<GruCache, NnError> {
    check_len("gru input", layer.input_size, x.len())?;
    check_len("gru state", layer.hidden_size, c_prev.len())?;
    let z: Vec<f64> = affine(&layer.w_z, x, &layer.v_z, c_prev, &layer.b_z).into_iter().map(sigmoid).collect();
    let r: Vec<f64> = affine(&layer.w_r, x, &layer.v_r, c_prev, &layer.b_r).into_iter().map(sigmoid).collect();
    let gated: Vec<f64> = r.iter().zip(c_prev).map(|(a, b)| a * b).collect();
    let candidate: Vec<f64> =
        affine(&layer.w_c, x, &layer.v_c, &gated, &layer.b_c).into_iter().map(tanh).collect();
    let c = (0..layer.hidden_size)
        .map(|i| (1.0 - z[i]) * candidate[i] + z[i] * c_prev[i])
        .collect();
    Ok(GruCache { x: x.to_vec(), c_prev: c_prev.to_vec(), z, r, candidate, c })
}

/// Accumulates parameter gradients into `grad` and returns `(dx, dc_prev)`
/// for an upstream gradient `dc` on the step output.
pub fn gru_step_backward(
    layer: &GruLayer,
    cache: &GruCache,
    dc: &[f64],
    grad: &mut GruLayer,
) -> (Vec<f64>, Vec<f64>) {
    let (p, k) = (layer.input_size, layer.hidden_size);
    let GruCache { x, c_prev, z, r, candidate, .. } = cache;
    let mut dx = vec![0.0; p];
    let mut dc_prev: Vec<f64> = (0..k).map(|i| dc[i] * z[i]).collect();

    let da_c: Vec<f64> =
        (0..k).map(|i| dc[i] * (1.0 - z[i]) * (1.0 - candidate[i] * candidate[i])).collect();
    let da_z: Vec<f64> = (0..k).map(|i| dc[i] * (c_prev[i] - candidate[i]) * z[i] * (1.0 - z[i])).collect();
    let gated: Vec<f64> = (0..k).map(|i| r[i] * c_prev[i]).collect();

    // Gradient w.r.t. r ⊙ c_prev through the candidate's recurrent weights.
    let mut d_gated = vec![0.0; k];
    for i in 0..k {
        let row = &layer.v_c[i * k..(i + 1) * k];
        for j in 0..k {
            d_gated[j] += row[j] * da_c[i];
        }
    }
    let da_r: Vec<f64> = (0..k).map(|i| d_gated[i] * c_prev[i] * r[i] * (1.0 - r[i])).collect();
    for j in 0..k {
        dc_prev[j] += d_gated[j] * r[j];
    }

    accumulate_gate(&layer.w_c, None, &da_c, x, &gated, &mut grad.w_c, &mut grad.v_c, &mut grad.b_c, &mut dx, None);
    accumulate_gate(
        &layer.w_z,
        Some(&layer.v_z),
        &da_z,
        x,
        c_prev,
        &mut grad.w_z,
        &mut grad.v_z,
        &mut grad.b_z,
        &mut dx,
        Some(&mut dc_prev),
    );
    accumulate_gate(
        &layer.w_r,
        Some(&layer.v_r),
        &da_r,
        x,
        c_prev,
        &mut grad.w_r,
        &mut grad.v_r,
        &mut grad.b_r,
        &mut dx,
        Some(&mut dc_prev),
    );
    (dx, dc_prev)
}

/// Gradient of one gate pre-activation `a = W x + V h + b` given `da`.
#[allow(clippy::too_many_arguments)]
fn accumulate_gate(
    w: &[f64],
    v: Option<&[f64]>,
    da: &[f64],
    x: &[f64],
    h: &[f64],
    gw: &mut [f64],
    gv: &mut [f64],
    gb: &mut [f64],
    dx: &mut [f64],
    dh: Option<&mut Vec<f64>>,
) {
    let (p, k) = (x.len(), h.len());
    for i in 0..da.len() {
        let d = da[i];
        gb[i] += d;
        for j in 0..p {
            gw[i * p + j] += d * x[j];
            dx[j] += w[i * p + j] * d;
        }
        for j in 0..k {
            gv[i * k + j] += d * h[j];
        }
    }
    if let (Some(v), Some(dh)) = (v, dh) {
        for i in 0..da.len() {
            let row = &v[i * k..(i + 1) * k];
            for j in 0..k {
                dh[j] += row[j] * da[i];
            }
        }
    }
}
