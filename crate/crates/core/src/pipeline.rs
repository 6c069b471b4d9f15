//! Raw tracks to fitted trajectories: prune, select, fit, grid.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::features::altitude::mean_altitude;
use crate::features::{fit_decay_curve_with, sample_grid, DecayTrajectory, FitOptions};
use crate::tle::{prune, select_objects, ObjectTrack, PruneConfig, PruneReport, Rejection, SelectionCriteria};

/// Which epoch anchors the 80 km end of the fitted curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// Re-entry epoch from the TIP message.
    #[default]
    Tip,
    /// Epoch of the last TLE, as available operationally.
    LastTle,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PrepareConfig {
    pub prune: PruneConfig,
    pub selection: SelectionCriteria,
    pub fit: FitOptions,
    pub fit_mode: FitMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFailure {
    pub norad_id: u32,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedTracks {
    /// Accepted tracks with a usable trajectory, parallel to `trajectories`.
    pub tracks: Vec<ObjectTrack>,
    pub trajectories: Vec<DecayTrajectory>,
    pub prune_report: PruneReport,
    pub rejected: Vec<Rejection>,
    pub fit_failures: Vec<FitFailure>,
}

/// Fits the decay curve to a pruned track and samples the 25-point grid.
pub fn trajectory_for(track: &ObjectTrack, opts: &FitOptions, mode: FitMode) -> Result<DecayTrajectory, String> {
    let t_ref = match mode {
        FitMode::Tip => track.reentry_epoch,
        FitMode::LastTle => track.records.last().ok_or("track is empty")?.epoch,
    };
    let samples: Vec<(f64, f64)> = track
        .records
        .iter()
        .filter(|r| mode == FitMode::Tip || r.epoch < t_ref)
        .map(|r| mean_altitude(r).map(|h| (r.epoch, h)))
        .collect::<Result<_, _>>()
        .map_err(|e| format!("{e}"))?;
    let fit = fit_decay_curve_with(&samples, t_ref, opts).map_err(|e| format!("{e}"))?;
    sample_grid(track.norad_id, &fit.coefficients).map_err(|e| format!("{e}"))
}

pub fn prepare_tracks(raw: Vec<ObjectTrack>, cfg: &PrepareConfig) -> PreparedTracks {
    let mut report = PruneReport::default();
    let pruned: Vec<ObjectTrack> = raw
        .into_iter()
        .map(|t| {
            let (t, r) = prune(t, &cfg.prune);
            report.accumulate(&r);
            t
        })
        .collect();
    let selected = select_objects(pruned, &cfg.selection);
    let mut tracks = Vec::new();
    let mut trajectories = Vec::new();
    let mut fit_failures = Vec::new();
    for track in selected.accepted {
        match trajectory_for(&track, &cfg.fit, cfg.fit_mode) {
            Ok(traj) => {
                trajectories.push(traj);
                tracks.push(track);
            }
            Err(reason) => fit_failures.push(FitFailure { norad_id: track.norad_id, reason }),
        }
    }
    PreparedTracks { tracks, trajectories, prune_report: report, rejected: selected.rejected, fit_failures }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate_tracks, SyntheticSpec};

    #[test]
    fn synthetic_tracks_pass_the_pipeline() {
        let ds = generate_tracks(&SyntheticSpec { n_objects: 6, ..SyntheticSpec::default() }).unwrap();
        let out = prepare_tracks(ds.tracks, &PrepareConfig::default());
        assert!(out.rejected.is_empty(), "{:?}", out.rejected);
        assert!(out.fit_failures.is_empty(), "{:?}", out.fit_failures);
        assert_eq!(out.trajectories.len(), 6);
        for (traj, truth) in out.trajectories.iter().zip(&ds.truth) {
            assert_eq!(traj.norad_id, truth.norad_id);
            assert!(traj.grid_times.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn last_tle_mode_anchors_on_final_record() {
        let ds = generate_tracks(&SyntheticSpec { n_objects: 1, ..SyntheticSpec::default() }.noiseless()).unwrap();
        let t = &ds.tracks[0];
        let traj = trajectory_for(t, &FitOptions::default(), FitMode::LastTle).unwrap();
        assert_eq!(traj.coefficients.t_ref, t.records.last().unwrap().epoch);
    }
}
