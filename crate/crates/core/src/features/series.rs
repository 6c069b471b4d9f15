//! Per-step B* samples and the solar-flux feature.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tle::ObjectTrack;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SeriesError {
    #[error("track has no records")]
    EmptyTrack,
    #[error("epoch {0} outside space-weather coverage")]
    OutOfCoverage(f64),
    #[error("space-weather series must have increasing dates and positive flux")]
    InvalidSeries,
}

/// How the running B* average is formed before step interpolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BStarSmoothing {
    /// Mean of all records up to and including the current one.
    #[default]
    Cumulative,
    /// Mean of the last `n` records.
    Trailing(usize),
}

/// Running mean of B*, held constant between records and sampled at `epochs`
/// (absolute days). Epochs before the first record take the first value.
pub fn bstar_feature(
    track: &ObjectTrack,
    epochs: &[f64],
    smoothing: BStarSmoothing,
) -> Result<Vec<f64>, SeriesError> {
    if track.records.is_empty() {
        return Err(SeriesError::EmptyTrack);
    }
    let values: Vec<f64> = track.records.iter().map(|r| r.bstar).collect();
    let mut averaged = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        let avg = match smoothing {
            BStarSmoothing::Cumulative => sum / (i + 1) as f64,
            BStarSmoothing::Trailing(n) => {
                let n = n.max(1);
                let start = (i + 1).saturating_sub(n);
                values[start..=i].iter().sum::<f64>() / (i + 1 - start) as f64
            }
        };
        averaged.push(avg);
    }
    Ok(epochs
        .iter()
        .map(|&t| {
            // Last record with epoch <= t.
            let held = track.records.partition_point(|r| r.epoch <= t);
            averaged[held.saturating_sub(1)]
        })
        .collect())
}

/// Daily 81-day-average F10.7 series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceWeatherSeries {
    /// Days since the reference epoch, strictly increasing.
    pub dates: Vec<f64>,
    /// Solar flux units.
    pub f107_81day: Vec<f64>,
}

impl SpaceWeatherSeries {
    pub fn new(dates: Vec<f64>, f107_81day: Vec<f64>) -> Result<Self, SeriesError> {
        let s = Self { dates, f107_81day };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SeriesError> {
        let ok = self.dates.len() == self.f107_81day.len()
            && !self.dates.is_empty()
            && self.dates.windows(2).all(|w| w[0] < w[1])
            && self.f107_81day.iter().all(|f| *f > 0.0 && f.is_finite());
        if ok {
            Ok(())
        } else {
            Err(SeriesError::InvalidSeries)
        }
    }
}

/// F̄10.7 at the latest series date not after `start_epoch`. Coverage ends
/// one day after the last date.
pub fn solar_feature(sw: &SpaceWeatherSeries, start_epoch: f64) -> Result<f64, SeriesError> {
    let idx = sw.dates.partition_point(|d| *d <= start_epoch);
    let last = *sw.dates.last().ok_or(SeriesError::InvalidSeries)?;
    if idx == 0 || start_epoch >= last + 1.0 || !start_epoch.is_finite() {
        return Err(SeriesError::OutOfCoverage(start_epoch));
    }
    Ok(sw.f107_81day[idx - 1])
}
