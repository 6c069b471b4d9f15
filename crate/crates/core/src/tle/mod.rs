//! TLE/OMM records, outlier pruning and dataset selection.

mod prune;
mod select;

pub use prune::{
    filter_corrections, filter_ecc_incl, filter_mean_motion, filter_negative_bstar, prune,
    split_windows, PruneConfig, PruneReport,
};
pub use select::{
    select_objects, split_dataset, DatasetSplit, Rejection, RejectReason, SelectionCriteria,
    SelectionError, SelectionOutcome, SplitSummary,
};

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::Range;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::parse_epoch;

/// One mean-element observation of a catalogued object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TleRecord {
    pub norad_id: u32,
    /// Days since 2000-01-01T00:00:00 UTC.
    pub epoch: f64,
    /// Revolutions per day.
    pub mean_motion: f64,
    pub eccentricity: f64,
    /// Degrees.
    pub inclination: f64,
    /// Drag-like coefficient, 1/ER.
    pub bstar: f64,
    pub raan: f64,
    pub arg_perigee: f64,
    pub mean_anomaly: f64,
}

/// All observations of one object, plus its assessed re-entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectTrack {
    pub norad_id: u32,
    pub records: Vec<TleRecord>,
    /// Index ranges into `records`; empty until [`split_windows`] runs.
    pub windows: Vec<Range<usize>>,
    /// Re-entry epoch in days (from TIP).
    pub reentry_epoch: f64,
    /// TIP window, minutes.
    pub reentry_uncertainty: f64,
}

impl ObjectTrack {
    /// Builds a track, sorting records by epoch. The sort is stable so that,
    /// among equal epochs, the record parsed last stays last.
    pub fn new(
        norad_id: u32,
        mut records: Vec<TleRecord>,
        reentry_epoch: f64,
        reentry_uncertainty: f64,
    ) -> Self {
        records.sort_by(|a, b| a.epoch.total_cmp(&b.epoch));
        Self {
            norad_id,
            records,
            windows: Vec::new(),
            reentry_epoch,
            reentry_uncertainty,
        }
    }

    /// Windows to operate on: the recorded ones, or the whole track.
    pub(crate) fn effective_windows(&self) -> Vec<Range<usize>> {
        if self.windows.is_empty() && !self.records.is_empty() {
            alloc::vec![0..self.records.len()]
        } else {
            self.windows.clone()
        }
    }

    /// Drops records where `keep` is false and remaps the windows.
    pub(crate) fn retain(mut self, keep: &[bool]) -> Self {
        debug_assert_eq!(keep.len(), self.records.len());
        let mut new_index = Vec::with_capacity(keep.len() + 1);
        let mut count = 0usize;
        for &k in keep {
            new_index.push(count);
            if k {
                count += 1;
            }
        }
        new_index.push(count);
        self.windows = self
            .windows
            .iter()
            .map(|w| new_index[w.start]..new_index[w.end])
            .filter(|w| !w.is_empty())
            .collect();
        let mut i = 0;
        self.records.retain(|_| {
            let k = keep[i];
            i += 1;
            k
        });
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("missing field {0}")]
    MissingField(String),
    #[error("malformed value for field {field}: `{value}`")]
    MalformedNumber { field: String, value: String },
}

/// Builds a record from OMM-style named fields. `field` looks a key up in the
/// raw record (a JSON object, a CSV row, ...).
///
/// The orientation angles (RA_OF_ASC_NODE, ARG_OF_PERICENTER, MEAN_ANOMALY)
/// default to zero when absent since nothing downstream depends on them.
pub fn parse_omm<'a, F>(field: F) -> Result<TleRecord, ParseError>
where
    F: Fn(&str) -> Option<&'a str>,
{
    let required = |name: &str| -> Result<&'a str, ParseError> {
        field(name)
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .ok_or_else(|| ParseError::MissingField(name.to_string()))
    };
    let malformed = |name: &str, value: &str| ParseError::MalformedNumber {
        field: name.to_string(),
        value: value.to_string(),
    };
    let number = |name: &str| -> Result<f64, ParseError> {
        let v = required(name)?;
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| malformed(name, v))
    };
    let optional = |name: &str| -> Result<f64, ParseError> {
        match field(name).map(str::trim).filter(|v| !v.is_empty()) {
            None => Ok(0.0),
            Some(v) => v.parse::<f64>().map_err(|_| malformed(name, v)),
        }
    };

    let id_raw = required("NORAD_CAT_ID")?;
    let norad_id = id_raw
        .parse::<u32>()
        .map_err(|_| malformed("NORAD_CAT_ID", id_raw))?;
    let epoch_raw = required("EPOCH")?;
    let epoch = parse_epoch(epoch_raw).map_err(|_| malformed("EPOCH", epoch_raw))?;

    let mean_motion = number("MEAN_MOTION")?;
    if mean_motion <= 0.0 {
        return Err(malformed("MEAN_MOTION", required("MEAN_MOTION")?));
    }
    let eccentricity = number("ECCENTRICITY")?;
    if !(0.0..1.0).contains(&eccentricity) {
        return Err(malformed("ECCENTRICITY", required("ECCENTRICITY")?));
    }
    let inclination = number("INCLINATION")?;
    if !(0.0..=180.0).contains(&inclination) {
        return Err(malformed("INCLINATION", required("INCLINATION")?));
    }
    let bstar = number("BSTAR")?;

    Ok(TleRecord {
        norad_id,
        epoch,
        mean_motion,
        eccentricity,
        inclination,
        bstar,
        raan: optional("RA_OF_ASC_NODE")?,
        arg_perigee: optional("ARG_OF_PERICENTER")?,
        mean_anomaly: optional("MEAN_ANOMALY")?,
    })
}

#[cfg(test)]
pub(crate) fn test_record(epoch: f64) -> TleRecord {
    TleRecord {
        norad_id: 1,
        epoch,
        mean_motion: 16.2,
        eccentricity: 0.001,
        inclination: 51.6,
        bstar: 1e-4,
        raan: 0.0,
        arg_perigee: 0.0,
        mean_anomaly: 0.0,
    }
}
