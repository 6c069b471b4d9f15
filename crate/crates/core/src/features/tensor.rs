//! Rank-3 `[objects × steps × features]` tensor assembly.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::grid::{DecayTrajectory, GRID_POINTS};
use super::normalize::{MinMax, NormalizeError};
use super::series::{bstar_feature, solar_feature, BStarSmoothing, SpaceWeatherSeries};
use crate::math::{mean, median};
use crate::tle::ObjectTrack;

pub const FEATURE_TIME: usize = 0;
pub const FEATURE_BSTAR: usize = 1;
pub const FEATURE_F107: usize = 2;
pub const FEATURE_AREA_TO_MASS: usize = 3;
pub const FEATURE_NAMES: [&str; 4] = ["time", "bstar", "f107_81day", "area_to_mass"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("missing data for object {0}")]
    MissingObjectData(u32),
    #[error("no training objects")]
    NoTrainingObjects,
    #[error("{0} roles supplied for {1} trajectories")]
    RoleCountMismatch(usize, usize),
    #[error("normalizing feature {feature}: {source}")]
    Normalize { feature: String, source: NormalizeError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub smoothing: BStarSmoothing,
    /// Also min–max scale B* and A/m (they enter raw by default).
    #[serde(default)]
    pub normalize_static: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTensor {
    pub n_objects: usize,
    pub steps: usize,
    pub n_features: usize,
    /// Row-major `[object][step][feature]`, model-ready values.
    pub data: Vec<f64>,
    /// Same layout, physical units.
    pub raw: Vec<f64>,
    pub feature_names: Vec<String>,
    /// Per feature; `None` means the feature is passed through unscaled.
    pub norm_stats: Vec<Option<MinMax>>,
    /// `[object][step]` residual times since the 200 km epoch, days.
    pub targets: Vec<f64>,
    pub norad_ids: Vec<u32>,
    pub roles: Vec<Role>,
    pub origin_epochs: Vec<f64>,
    pub area_to_mass: Vec<f64>,
    /// Median raw B* of each object's pruned track.
    pub median_bstar: Vec<f64>,
    /// Mean eccentricity of each object's pruned track.
    pub eccentricity: Vec<f64>,
}

impl FeatureTensor {
    fn offset(&self, object: usize, step: usize) -> usize {
        (object * self.steps + step) * self.n_features
    }

    pub fn get(&self, object: usize, step: usize, feature: usize) -> f64 {
        self.data[self.offset(object, step) + feature]
    }

    /// All features of one step.
    pub fn step(&self, object: usize, step: usize) -> &[f64] {
        let o = self.offset(object, step);
        &self.data[o..o + self.n_features]
    }

    pub fn target_row(&self, object: usize) -> &[f64] {
        &self.targets[object * self.steps..(object + 1) * self.steps]
    }

    pub fn time_stats(&self) -> Option<MinMax> {
        self.norm_stats[FEATURE_TIME]
    }

    pub fn indices_with_role(&self, role: Role) -> Vec<usize> {
        (0..self.n_objects).filter(|&i| self.roles[i] == role).collect()
    }

    pub fn index_of(&self, norad_id: u32) -> Option<usize> {
        self.norad_ids.iter().position(|&id| id == norad_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledTensor {
    pub tensor: FeatureTensor,
    /// Objects whose A/m was filled with the training median.
    pub imputed_area_to_mass: Vec<u32>,
}

/// Builds the tensor for `trajectories`, with `roles` parallel to them.
/// Tracks are matched by NORAD id. Missing A/m values are filled with the
/// training median; missing tracks or flux coverage are errors.
pub fn assemble_tensor(
    trajectories: &[DecayTrajectory],
    roles: &[Role],
    tracks: &[ObjectTrack],
    sw: &SpaceWeatherSeries,
    area_to_mass: &BTreeMap<u32, f64>,
    cfg: &FeatureConfig,
) -> Result<AssembledTensor, TensorError> {
    if roles.len() != trajectories.len() {
        return Err(TensorError::RoleCountMismatch(roles.len(), trajectories.len()));
    }
    let by_id: BTreeMap<u32, &ObjectTrack> = tracks.iter().map(|t| (t.norad_id, t)).collect();
    let train_a2m: Vec<f64> = trajectories
        .iter()
        .zip(roles)
        .filter(|(_, r)| **r == Role::Train)
        .filter_map(|(t, _)| area_to_mass.get(&t.norad_id).copied())
        .collect();
    let fallback_a2m = median(&train_a2m);

    let n = trajectories.len();
    let f = FEATURE_NAMES.len();
    let mut raw = Vec::with_capacity(n * GRID_POINTS * f);
    let mut targets = Vec::with_capacity(n * GRID_POINTS);
    let mut a2m_out = Vec::with_capacity(n);
    let mut median_bstar = Vec::with_capacity(n);
    let mut eccentricity = Vec::with_capacity(n);
    let mut imputed = Vec::new();
    for traj in trajectories {
        let id = traj.norad_id;
        let track = by_id.get(&id).ok_or(TensorError::MissingObjectData(id))?;
        let bstar = bstar_feature(track, &traj.absolute_times(), cfg.smoothing)
            .map_err(|_| TensorError::MissingObjectData(id))?;
        let flux =
            solar_feature(sw, traj.origin_epoch).map_err(|_| TensorError::MissingObjectData(id))?;
        let a2m = match area_to_mass.get(&id) {
            Some(v) => *v,
            None => {
                imputed.push(id);
                fallback_a2m.ok_or(TensorError::MissingObjectData(id))?
            }
        };
        for step in 0..GRID_POINTS {
            raw.extend_from_slice(&[traj.grid_times[step], bstar[step], flux, a2m]);
        }
        targets.extend_from_slice(&traj.grid_times);
        a2m_out.push(a2m);
        let bs: Vec<f64> = track.records.iter().map(|r| r.bstar).collect();
        median_bstar.push(median(&bs).unwrap_or(0.0));
        let ecc: Vec<f64> = track.records.iter().map(|r| r.eccentricity).collect();
        eccentricity.push(mean(&ecc));
    }

    let train_rows: Vec<usize> = (0..n).filter(|&i| roles[i] == Role::Train).collect();
    if train_rows.is_empty() {
        return Err(TensorError::NoTrainingObjects);
    }
    let scaled = |feat: usize| match feat {
        FEATURE_TIME | FEATURE_F107 => true,
        _ => cfg.normalize_static,
    };
    let mut norm_stats = Vec::with_capacity(f);
    for feat in 0..f {
        if !scaled(feat) {
            norm_stats.push(None);
            continue;
        }
        let column: Vec<f64> = train_rows
            .iter()
            .flat_map(|&i| (0..GRID_POINTS).map(move |s| (i * GRID_POINTS + s) * f + feat))
            .map(|k| raw[k])
            .collect();
        let stats = MinMax::fit(&column).map_err(|source| TensorError::Normalize {
            feature: FEATURE_NAMES[feat].to_string(),
            source,
        })?;
        norm_stats.push(Some(stats));
    }
    let data = raw
        .iter()
        .enumerate()
        .map(|(k, &v)| match norm_stats[k % f] {
            Some(s) => s.apply(v),
            None => v,
        })
        .collect();

    Ok(AssembledTensor {
        tensor: FeatureTensor {
            n_objects: n,
            steps: GRID_POINTS,
            n_features: f,
            data,
            raw,
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            norm_stats,
            targets,
            norad_ids: trajectories.iter().map(|t| t.norad_id).collect(),
            roles: roles.to_vec(),
            origin_epochs: trajectories.iter().map(|t| t.origin_epoch).collect(),
            area_to_mass: a2m_out,
            median_bstar,
            eccentricity,
        },
        imputed_area_to_mass: imputed,
    })
}
