//! Inversion of the fitted decay law onto the 25-point altitude grid.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::fit::FitCoefficients;

pub const GRID_POINTS: usize = 25;
pub const GRID_TOP_KM: f64 = 200.0;
pub const GRID_BOTTOM_KM: f64 = 80.0;
pub const GRID_SPACING_KM: f64 = (GRID_TOP_KM - GRID_BOTTOM_KM) / (GRID_POINTS - 1) as f64;

/// Longest lead time searched when bracketing 200 km, days.
const MAX_LEAD_DAYS: f64 = 1.0e5;
const MONOTONE_SAMPLES: usize = 4096;
const BISECTION_TOL_DAYS: f64 = 1e-10;

/// 200, 195, ..., 80 km.
pub fn grid_altitudes() -> Vec<f64> {
    (0..GRID_POINTS)
        .map(|i| GRID_TOP_KM - GRID_SPACING_KM * i as f64)
        .collect()
}

/// Grid index of an altitude lying exactly on the grid.
pub fn grid_index_of_altitude(altitude_km: f64) -> Option<usize> {
    let pos = (GRID_TOP_KM - altitude_km) / GRID_SPACING_KM;
    let idx = libm::round(pos);
    ((pos - idx).abs() < 1e-9 && (0.0..GRID_POINTS as f64).contains(&idx)).then_some(idx as usize)
}

/// An object's trajectory sampled on the altitude grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayTrajectory {
    pub norad_id: u32,
    /// 200 → 80 km.
    pub grid_altitudes: Vec<f64>,
    /// Days since `origin_epoch`; starts at 0, ends at the re-entry lead time.
    pub grid_times: Vec<f64>,
    /// Absolute epoch (days) at which the fit crosses 200 km.
    pub origin_epoch: f64,
    pub coefficients: FitCoefficients,
}

impl DecayTrajectory {
    /// Residual lifetime from 200 km to re-entry, days.
    pub fn lifetime(&self) -> f64 {
        self.grid_times[GRID_POINTS - 1]
    }

    pub fn absolute_times(&self) -> Vec<f64> {
        self.grid_times.iter().map(|t| t + self.origin_epoch).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GridError {
    #[error("fitted curve is not invertible between 80 and 200 km")]
    NonMonotoneFit,
}

/// Solves `f(t) = x_i` for each grid altitude by bisection.
pub fn sample_grid(norad_id: u32, coeffs: &FitCoefficients) -> Result<DecayTrajectory, GridError> {
    let g = |s: f64| coeffs.altitude_at_lead(s);

    let mut hi = 1.0;
    while g(hi) < GRID_TOP_KM {
        hi *= 2.0;
        if hi > MAX_LEAD_DAYS || !g(hi).is_finite() {
            return Err(GridError::NonMonotoneFit);
        }
    }
    // Strictly increasing altitude with lead time until 200 km is passed.
    let mut prev = g(0.0);
    for k in 1..=MONOTONE_SAMPLES {
        let v = g(hi * k as f64 / MONOTONE_SAMPLES as f64);
        if !(v > prev) {
            return Err(GridError::NonMonotoneFit);
        }
        if v >= GRID_TOP_KM {
            break;
        }
        prev = v;
    }

    let solve = |target: f64, mut lo: f64, mut up: f64| {
        while up - lo > BISECTION_TOL_DAYS {
            let mid = 0.5 * (lo + up);
            if g(mid) < target {
                lo = mid;
            } else {
                up = mid;
            }
        }
        0.5 * (lo + up)
    };
    let altitudes = grid_altitudes();
    let lead_top = solve(GRID_TOP_KM, 0.0, hi);
    let mut times = Vec::with_capacity(GRID_POINTS);
    for (i, &x) in altitudes.iter().enumerate() {
        let lead = if i == 0 {
            lead_top
        } else if i == GRID_POINTS - 1 {
            0.0
        } else {
            solve(x, 0.0, lead_top)
        };
        times.push(lead_top - lead);
    }
    if !times.windows(2).all(|w| w[0] < w[1]) {
        return Err(GridError::NonMonotoneFit);
    }
    Ok(DecayTrajectory {
        norad_id,
        grid_altitudes: altitudes,
        grid_times: times,
        origin_epoch: coeffs.t_ref - lead_top,
        coefficients: *coeffs,
    })
}
