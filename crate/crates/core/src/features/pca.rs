//! Principal component diagnostics on standardized features.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::grid::DecayTrajectory;
use crate::math::{mean, median, sqrt};
use crate::tle::ObjectTrack;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PcaError {
    #[error("feature column {0} has zero variance")]
    DegenerateFeature(usize),
    #[error("need at least 2 samples and 2 features, got {samples}x{features}")]
    TooSmall { samples: usize, features: usize },
    #[error("rows have inconsistent lengths")]
    Ragged,
    #[error("Jacobi sweeps did not converge")]
    NoConvergence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    /// `loadings[c]` is component `c`, unit length, one entry per feature.
    pub loadings: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

const OFF_DIAGONAL_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// PCA of `rows` (samples × features) via cyclic Jacobi on the correlation
/// matrix. Components come out in descending eigenvalue order; each loading
/// vector's largest-magnitude entry is made positive.
pub fn pca(rows: &[Vec<f64>]) -> Result<PcaResult, PcaError> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if n < 2 || p < 2 {
        return Err(PcaError::TooSmall { samples: n, features: p });
    }
    if rows.iter().any(|r| r.len() != p) {
        return Err(PcaError::Ragged);
    }

    let mut z = vec![vec![0.0; p]; n];
    for j in 0..p {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let m = mean(&col);
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64;
        let sd = sqrt(var);
        if !(sd > 0.0) || sd <= 1e-14 * m.abs() {
            return Err(PcaError::DegenerateFeature(j));
        }
        for i in 0..n {
            z[i][j] = (rows[i][j] - m) / sd;
        }
    }
    let mut a = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in i..p {
            let c = z.iter().map(|r| r[i] * r[j]).sum::<f64>() / (n - 1) as f64;
            a[i][j] = c;
            a[j][i] = c;
        }
    }
    let (eig, vecs) = jacobi_eigen(a)?;

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| eig[y].total_cmp(&eig[x]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig[k].max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();
    let mut loadings = Vec::with_capacity(p);
    for &k in &order {
        let mut v: Vec<f64> = (0..p).map(|r| vecs[r][k]).collect();
        let pivot = v.iter().cloned().fold(0.0, |acc: f64, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        loadings.push(v);
    }
    Ok(PcaResult {
        explained_variance_ratio: eigenvalues.iter().map(|e| e / total).collect(),
        eigenvalues,
        loadings,
    })
}

/// Returns eigenvalues and the eigenvector matrix (columns) of symmetric `a`.
fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> Result<(Vec<f64>, Vec<Vec<f64>>), PcaError> {
    let p = a.len();
    let mut v = vec![vec![0.0; p]; p];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..p)
            .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if sqrt(off) < OFF_DIAGONAL_TOL {
            return Ok(((0..p).map(|i| a[i][i]).collect(), v));
        }
        for k in 0..p {
            for l in k + 1..p {
                if a[k][l] == 0.0 {
                    continue;
                }
                let theta = (a[l][l] - a[k][k]) / (2.0 * a[k][l]);
                let t = theta.signum() / (theta.abs() + sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                for r in 0..p {
                    let (ark, arl) = (a[r][k], a[r][l]);
                    a[r][k] = c * ark - s * arl;
                    a[r][l] = s * ark + c * arl;
                }
                for r in 0..p {
                    let (akr, alr) = (a[k][r], a[l][r]);
                    a[k][r] = c * akr - s * alr;
                    a[l][r] = s * akr + c * alr;
                }
                for row in v.iter_mut() {
                    let (vk, vl) = (row[k], row[l]);
                    row[k] = c * vk - s * vl;
                    row[l] = s * vk + c * vl;
                }
            }
        }
    }
    Err(PcaError::NoConvergence)
}

/// One row per trajectory holding its 25 grid times.
pub fn decay_feature_matrix(trajectories: &[DecayTrajectory]) -> Vec<Vec<f64>> {
    trajectories.iter().map(|t| t.grid_times.clone()).collect()
}

/// Rows of `[mean eccentricity, mean inclination, median B*, lifetime]` for
/// tracks matched to trajectories by NORAD id. Unmatched trajectories are skipped.
pub fn physical_feature_matrix(
    tracks: &[ObjectTrack],
    trajectories: &[DecayTrajectory],
) -> Vec<Vec<f64>> {
    trajectories
        .iter()
        .filter_map(|traj| {
            let track = tracks.iter().find(|t| t.norad_id == traj.norad_id)?;
            if track.records.is_empty() {
                return None;
            }
            let ecc: Vec<f64> = track.records.iter().map(|r| r.eccentricity).collect();
            let inc: Vec<f64> = track.records.iter().map(|r| r.inclination).collect();
            let bs: Vec<f64> = track.records.iter().map(|r| r.bstar).collect();
            Some(vec![mean(&ecc), mean(&inc), median(&bs)?, traj.lifetime()])
        })
        .collect()
}
