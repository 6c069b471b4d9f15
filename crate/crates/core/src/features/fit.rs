//! Fractional-power decay law fitted with Levenberg–Marquardt.
//!
//! `f(t) = a1 + a2·s^(1/2) + a3·s^(1/3) + a4·s^(1/4)` with `s = t_ref - t`,
//! where `a1` is pinned to the 80 km re-entry altitude.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{powf, sqrt};

pub const REENTRY_ALTITUDE_KM: f64 = 80.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitCoefficients {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    /// Re-entry epoch, days.
    pub t_ref: f64,
}

impl FitCoefficients {
    /// Altitude at a lead time `s = t_ref - t` (days, `s >= 0`).
    pub fn altitude_at_lead(&self, s: f64) -> f64 {
        self.a1 + self.a2 * sqrt(s) + self.a3 * powf(s, 1.0 / 3.0) + self.a4 * powf(s, 0.25)
    }

    pub fn altitude_at(&self, t: f64) -> f64 {
        self.altitude_at_lead(self.t_ref - t)
    }

    fn basis(s: f64) -> [f64; 3] {
        [sqrt(s), powf(s, 1.0 / 3.0), powf(s, 0.25)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Only samples strictly below this altitude (km) enter the fit.
    pub ceiling_km: f64,
    pub lambda_init: f64,
    pub max_iterations: usize,
    /// Stop once an accepted step changes the cost by less than this fraction.
    pub relative_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            ceiling_km: 240.0,
            lambda_init: 1e-3,
            max_iterations: 200,
            relative_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub coefficients: FitCoefficients,
    /// False when the iteration budget ran out; the coefficients are then
    /// the best seen so far.
    pub converged: bool,
    pub iterations: usize,
    /// Half the sum of squared residuals, km².
    pub cost: f64,
    pub samples_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum FitError {
    #[error("need at least 3 samples below the fit ceiling, found {0}")]
    TooFewSamples(usize),
    #[error("sample epoch {0} is not before the reference epoch")]
    SampleAfterReference(f64),
    #[error("non-finite sample")]
    NonFinite,
}

pub fn fit_decay_curve(samples: &[(f64, f64)], t_ref: f64) -> Result<FitOutcome, FitError> {
    fit_decay_curve_with(samples, t_ref, &FitOptions::default())
}

/// Fits `(a2, a3, a4)` to `(epoch, altitude)` samples; `a1` stays at 80 km.
pub fn fit_decay_curve_with(
    samples: &[(f64, f64)],
    t_ref: f64,
    opts: &FitOptions,
) -> Result<FitOutcome, FitError> {
    let mut leads = Vec::new();
    let mut heights = Vec::new();
    for &(t, h) in samples {
        if !(t.is_finite() && h.is_finite()) {
            return Err(FitError::NonFinite);
        }
        if h >= opts.ceiling_km {
            continue;
        }
        if t >= t_ref {
            return Err(FitError::SampleAfterReference(t));
        }
        leads.push(t_ref - t);
        heights.push(h - REENTRY_ALTITUDE_KM);
    }
    if leads.len() < 3 {
        return Err(FitError::TooFewSamples(leads.len()));
    }

    let mean_h = heights.iter().sum::<f64>() / heights.len() as f64;
    let mean_root = leads.iter().map(|s| sqrt(*s)).sum::<f64>() / leads.len() as f64;
    let x0 = [mean_h / mean_root, 0.0, 0.0];

    let residuals = |p: &[f64; 3], r: &mut [f64], jac: Option<&mut [[f64; 3]]>| {
        let mut jac = jac;
        for (i, (&s, &h)) in leads.iter().zip(&heights).enumerate() {
            let b = FitCoefficients::basis(s);
            r[i] = p[0] * b[0] + p[1] * b[1] + p[2] * b[2] - h;
            if let Some(j) = jac.as_deref_mut() {
                j[i] = b;
            }
        }
    };
    let lm = levenberg_marquardt(residuals, leads.len(), x0, opts);
    Ok(FitOutcome {
        coefficients: FitCoefficients {
            a1: REENTRY_ALTITUDE_KM,
            a2: lm.params[0],
            a3: lm.params[1],
            a4: lm.params[2],
            t_ref,
        },
        converged: lm.converged,
        iterations: lm.iterations,
        cost: lm.cost,
        samples_used: leads.len(),
    })
}

struct LmResult<const N: usize> {
    params: [f64; N],
    cost: f64,
    iterations: usize,
    converged: bool,
}

/// Levenberg–Marquardt with Marquardt diagonal scaling. Each damped step is
/// solved as the least-squares problem `[J; √λ·D] δ = [-r; 0]` by Householder
/// QR, which avoids squaring the condition number of `J`.
fn levenberg_marquardt<const N: usize, F>(
    mut eval: F,
    m: usize,
    x0: [f64; N],
    opts: &FitOptions,
) -> LmResult<N>
where
    F: FnMut(&[f64; N], &mut [f64], Option<&mut [[f64; N]]>),
{
    let cost_of = |r: &[f64]| 0.5 * r.iter().map(|v| v * v).sum::<f64>();
    let mut params = x0;
    let mut r = vec![0.0; m];
    let mut jac = vec![[0.0; N]; m];
    let mut trial_r = vec![0.0; m];
    eval(&params, &mut r, Some(&mut jac));
    let mut cost = cost_of(&r);
    let mut lambda = opts.lambda_init;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        if cost == 0.0 {
            converged = true;
            break;
        }
        let mut scale = [0.0; N];
        for (k, s) in scale.iter_mut().enumerate() {
            let d: f64 = jac.iter().map(|row| row[k] * row[k]).sum();
            *s = sqrt(d.max(f64::MIN_POSITIVE));
        }
        // Augmented system, row-major (m + N) x N.
        let rows = m + N;
        let mut a = vec![0.0; rows * N];
        let mut b = vec![0.0; rows];
        for i in 0..m {
            a[i * N..(i + 1) * N].copy_from_slice(&jac[i]);
            b[i] = -r[i];
        }
        let damp = sqrt(lambda);
        for k in 0..N {
            a[(m + k) * N + k] = damp * scale[k];
        }
        let Some(delta) = householder_solve(&mut a, &mut b, rows, N) else {
            lambda *= 10.0;
            continue;
        };
        let mut trial = params;
        for k in 0..N {
            trial[k] += delta[k];
        }
        eval(&trial, &mut trial_r, None);
        let trial_cost = cost_of(&trial_r);
        if trial_cost.is_finite() && trial_cost < cost {
            let change = (cost - trial_cost) / cost;
            params = trial;
            cost = trial_cost;
            eval(&params, &mut r, Some(&mut jac));
            lambda = (lambda / 10.0).max(1e-300);
            if change < opts.relative_tolerance {
                converged = true;
                break;
            }
        } else {
            if (trial_cost - cost).abs() <= opts.relative_tolerance * cost || lambda > 1e16 {
                // No representable improvement left: at the minimum.
                converged = true;
                break;
            }
            lambda *= 10.0;
        }
    }
    LmResult {
        params,
        cost,
        iterations,
        converged,
    }
}

/// Least-squares solve of an overdetermined row-major `rows x cols` system.
fn householder_solve(a: &mut [f64], b: &mut [f64], rows: usize, cols: usize) -> Option<Vec<f64>> {
    for k in 0..cols {
        let norm = sqrt((k..rows).map(|i| a[i * cols + k] * a[i * cols + k]).sum::<f64>());
        if norm == 0.0 {
            return None;
        }
        let alpha = if a[k * cols + k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..rows).map(|i| a[i * cols + k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..cols {
            let dot: f64 = (k..rows).map(|i| v[i - k] * a[i * cols + j]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..rows {
                a[i * cols + j] -= f * v[i - k];
            }
        }
        let dot: f64 = (k..rows).map(|i| v[i - k] * b[i]).sum();
        let f = 2.0 * dot / vnorm2;
        for i in k..rows {
            b[i] -= f * v[i - k];
        }
    }
    let mut x = vec![0.0; cols];
    for k in (0..cols).rev() {
        let diag = a[k * cols + k];
        if diag == 0.0 || !diag.is_finite() {
            return None;
        }
        let s: f64 = (k + 1..cols).map(|j| a[k * cols + j] * x[j]).sum();
        x[k] = (b[k] - s) / diag;
    }
    Some(x)
}
