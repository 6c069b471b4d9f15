//! Dataset selection and the training/validation split.

use alloc::vec::Vec;
use core::fmt;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ObjectTrack;
use crate::features::altitude::mean_altitude;
use crate::math::{mean, std_dev};

/// Bounds are inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionCriteria {
    /// Minutes.
    pub max_reentry_uncertainty: f64,
    /// Average altitude of the first record, km.
    pub max_initial_altitude: f64,
    /// Average altitude of the last record, km.
    pub min_final_altitude: f64,
    pub max_eccentricity: f64,
    pub min_points: usize,
}

impl Default for SelectionCriteria {
    fn default() -> Self {
        Self {
            max_reentry_uncertainty: 20.0,
            max_initial_altitude: 200.0,
            min_final_altitude: 180.0,
            max_eccentricity: 0.1,
            min_points: 4,
        }
    }
}

impl SelectionCriteria {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.max_reentry_uncertainty > 0.0
            && self.max_initial_altitude > 0.0
            && self.min_final_altitude > 0.0
            && self.max_eccentricity > 0.0
            && self.min_points > 0)
        {
            return Err("selection bounds must be positive");
        }
        if self.min_final_altitude >= self.max_initial_altitude {
            return Err("min_final_altitude must be below max_initial_altitude");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    ReentryUncertainty,
    InitialAltitude,
    FinalAltitude,
    Eccentricity,
    MinPoints,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ReentryUncertainty => "reentry_uncertainty",
            Self::InitialAltitude => "initial_altitude",
            Self::FinalAltitude => "final_altitude",
            Self::Eccentricity => "eccentricity",
            Self::MinPoints => "min_points",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub norad_id: u32,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub accepted: Vec<ObjectTrack>,
    pub rejected: Vec<Rejection>,
}

fn first_failure(track: &ObjectTrack, crit: &SelectionCriteria) -> Option<RejectReason> {
    let (Some(first), Some(last)) = (track.records.first(), track.records.last()) else {
        return Some(RejectReason::MinPoints);
    };
    if !(track.reentry_uncertainty <= crit.max_reentry_uncertainty) {
        return Some(RejectReason::ReentryUncertainty);
    }
    match mean_altitude(first) {
        Ok(h) if h <= crit.max_initial_altitude => {}
        _ => return Some(RejectReason::InitialAltitude),
    }
    match mean_altitude(last) {
        Ok(h) if h >= crit.min_final_altitude => {}
        _ => return Some(RejectReason::FinalAltitude),
    }
    if track.records.iter().any(|r| r.eccentricity > crit.max_eccentricity) {
        return Some(RejectReason::Eccentricity);
    }
    if track.records.len() < crit.min_points {
        return Some(RejectReason::MinPoints);
    }
    None
}

/// Accepts tracks meeting every criterion; each rejection names the first
/// failed criterion in the order uncertainty, initial altitude, final
/// altitude, eccentricity, point count.
pub fn select_objects(tracks: Vec<ObjectTrack>, crit: &SelectionCriteria) -> SelectionOutcome {
    let mut out = SelectionOutcome::default();
    for t in tracks {
        match first_failure(&t, crit) {
            None => out.accepted.push(t),
            Some(reason) => out.rejected.push(Rejection {
                norad_id: t.norad_id,
                reason,
            }),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub objects: usize,
    pub eccentricity_mean: f64,
    pub eccentricity_std: f64,
    pub bstar_mean: f64,
    pub bstar_std: f64,
}

impl SplitSummary {
    /// Statistics over every record of every object in the split.
    pub fn of(tracks: &[ObjectTrack]) -> Self {
        let ecc: Vec<f64> = tracks
            .iter()
            .flat_map(|t| t.records.iter().map(|r| r.eccentricity))
            .collect();
        let bstar: Vec<f64> = tracks
            .iter()
            .flat_map(|t| t.records.iter().map(|r| r.bstar))
            .collect();
        Self {
            objects: tracks.len(),
            eccentricity_mean: mean(&ecc),
            eccentricity_std: std_dev(&ecc),
            bstar_mean: mean(&bstar),
            bstar_std: std_dev(&bstar),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit<T> {
    pub train: Vec<T>,
    pub validation: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SelectionError {
    #[error("need at least 5 objects to split, got {0}")]
    TooFewObjects(usize),
}

/// Seeded shuffle followed by a ⌈0.8·N⌉ / remainder split.
pub fn split_dataset<T>(mut objects: Vec<T>, seed: u64) -> Result<DatasetSplit<T>, SelectionError> {
    let n = objects.len();
    if n < 5 {
        return Err(SelectionError::TooFewObjects(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    objects.shuffle(&mut rng);
    let n_train = (4 * n).div_ceil(5);
    let validation = objects.split_off(n_train);
    Ok(DatasetSplit {
        train: objects,
        validation,
    })
}

impl DatasetSplit<ObjectTrack> {
    /// Eccentricity and B* statistics of both halves, training first.
    pub fn summaries(&self) -> (SplitSummary, SplitSummary) {
        (SplitSummary::of(&self.train), SplitSummary::of(&self.validation))
    }
}
