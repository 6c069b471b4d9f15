//! The five pruning steps, applied in a fixed order by [`prune`].

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;
use serde::{Deserialize, Serialize};

use super::{ObjectTrack, TleRecord};
use crate::math::median;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneConfig {
    /// Fraction of the orbital period below which two consecutive records are
    /// treated as a correction of the earlier one.
    pub correction_threshold: f64,
    /// Gap in days that starts a new window.
    pub gap_threshold: f64,
    /// Number of records in the mean-motion regression window.
    pub mm_window: usize,
    pub mm_rel_tol: f64,
    /// Rev/day.
    pub mm_abs_tol: f64,
    /// Window length of the eccentricity/inclination statistics.
    pub stat_window: usize,
    pub mad_threshold: f64,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            correction_threshold: 0.5,
            gap_threshold: 7.0,
            mm_window: 7,
            mm_rel_tol: 1e-3,
            mm_abs_tol: 1e-4,
            stat_window: 7,
            mad_threshold: 8.0,
        }
    }
}

impl PruneConfig {
    pub fn validate(&self) -> Result<(), &'static str> {
        let positive = [
            self.correction_threshold,
            self.gap_threshold,
            self.mm_rel_tol,
            self.mm_abs_tol,
            self.mad_threshold,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err("prune thresholds must be strictly positive");
        }
        if self.mm_window < 3 || self.stat_window < 3 {
            return Err("prune windows must hold at least 3 records");
        }
        Ok(())
    }
}

/// Per-step removal counts of one pruning run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneReport {
    pub input: usize,
    pub corrections: usize,
    pub windows: usize,
    pub mean_motion: usize,
    pub ecc_incl: usize,
    pub negative_bstar: usize,
    pub output: usize,
}

impl PruneReport {
    pub fn removed(&self) -> usize {
        self.corrections + self.mean_motion + self.ecc_incl + self.negative_bstar
    }

    pub fn accumulate(&mut self, other: &PruneReport) {
        self.input += other.input;
        self.corrections += other.corrections;
        self.windows += other.windows;
        self.mean_motion += other.mean_motion;
        self.ecc_incl += other.ecc_incl;
        self.negative_bstar += other.negative_bstar;
        self.output += other.output;
    }
}

/// Runs steps 1 to 5 in order and counts what each step removed.
pub fn prune(track: ObjectTrack, cfg: &PruneConfig) -> (ObjectTrack, PruneReport) {
    let mut report = PruneReport {
        input: track.records.len(),
        ..PruneReport::default()
    };
    let mut n = track.records.len();
    let mut step = |t: ObjectTrack, slot: &mut usize| {
        *slot = n - t.records.len();
        n = t.records.len();
        t
    };
    let t = filter_corrections(track, cfg);
    let t = step(t, &mut report.corrections);
    let t = split_windows(t, cfg);
    report.windows = t.windows.len();
    let t = filter_mean_motion(t, cfg);
    let t = step(t, &mut report.mean_motion);
    let t = filter_ecc_incl(t, cfg);
    let t = step(t, &mut report.ecc_incl);
    let t = filter_negative_bstar(t);
    let t = step(t, &mut report.negative_bstar);
    report.output = t.records.len();
    (t, report)
}

/// Step 1: when a record follows its predecessor by less than
/// `correction_threshold` orbital periods (period taken from the later record),
/// the predecessor is dropped. Chains collapse onto their last record.
pub fn filter_corrections(track: ObjectTrack, cfg: &PruneConfig) -> ObjectTrack {
    let records = &track.records;
    let mut kept: Vec<usize> = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let threshold = cfg.correction_threshold / rec.mean_motion;
        while let Some(&last) = kept.last() {
            if rec.epoch - records[last].epoch < threshold {
                kept.pop();
            } else {
                break;
            }
        }
        kept.push(i);
    }
    let mut keep = vec![false; records.len()];
    for i in kept {
        keep[i] = true;
    }
    track.retain(&keep)
}

/// Step 2: a new window starts after every gap longer than `gap_threshold` days.
pub fn split_windows(mut track: ObjectTrack, cfg: &PruneConfig) -> ObjectTrack {
    let mut windows = Vec::new();
    let mut start = 0;
    for i in 1..track.records.len() {
        if track.records[i].epoch - track.records[i - 1].epoch > cfg.gap_threshold {
            windows.push(start..i);
            start = i;
        }
    }
    if !track.records.is_empty() {
        windows.push(start..track.records.len());
    }
    track.windows = windows;
    track
}

/// Theil–Sen line through `(x, y)`: median pairwise slope, median intercept.
pub(crate) fn theil_sen(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    let mut slopes = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let dx = xs[j] - xs[i];
            if dx != 0.0 {
                slopes.push((ys[j] - ys[i]) / dx);
            }
        }
    }
    let slope = median(&slopes)?;
    let intercepts: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| y - slope * x).collect();
    Some((slope, median(&intercepts)?))
}

fn mean_motion_outlier(records: &[TleRecord], window: &[usize], target: usize, cfg: &PruneConfig) -> bool {
    let origin = records[target].epoch;
    let xs: Vec<f64> = window.iter().map(|&i| records[i].epoch - origin).collect();
    let ys: Vec<f64> = window.iter().map(|&i| records[i].mean_motion).collect();
    // x is measured from the target epoch, so the intercept is the prediction.
    let Some((_, predicted)) = theil_sen(&xs, &ys) else {
        return false;
    };
    let observed = records[target].mean_motion;
    let residual = (predicted - observed).abs();
    residual > cfg.mm_abs_tol && residual > cfg.mm_rel_tol * observed.abs()
}

/// Step 3: robust-regression check of mean motion.
///
/// Each record is compared with the Theil–Sen line through the `mm_window`
/// accepted records preceding it. Rejected records never enter later windows.
/// The first `mm_window` records of a window have no full predecessor window,
/// so each is checked against a line through the other records among the
/// first `2 * mm_window`. Windows with fewer than `mm_window + 1` records are
/// left untouched. Passes repeat until nothing more is removed.
pub fn filter_mean_motion(track: ObjectTrack, cfg: &PruneConfig) -> ObjectTrack {
    to_fixed_point(track, |t| mean_motion_pass(t, cfg))
}

/// Reapplies `pass` until the record count stops shrinking.
fn to_fixed_point(mut track: ObjectTrack, pass: impl Fn(ObjectTrack) -> ObjectTrack) -> ObjectTrack {
    loop {
        let before = track.records.len();
        track = pass(track);
        if track.records.len() == before {
            return track;
        }
    }
}

fn mean_motion_pass(track: ObjectTrack, cfg: &PruneConfig) -> ObjectTrack {
    let w = cfg.mm_window;
    let mut keep = vec![true; track.records.len()];
    let records = &track.records;
    for range in track.effective_windows() {
        if range.len() < w + 1 {
            continue;
        }
        let idx: Vec<usize> = range.collect();
        let head = &idx[..idx.len().min(2 * w)];
        let mut accepted = Vec::with_capacity(idx.len());
        for &i in &idx[..w] {
            let others: Vec<usize> = head.iter().copied().filter(|&k| k != i).collect();
            if mean_motion_outlier(records, &others, i, cfg) {
                keep[i] = false;
            } else {
                accepted.push(i);
            }
        }
        for &j in &idx[w..] {
            let window = &accepted[accepted.len().saturating_sub(w)..];
            if mean_motion_outlier(records, window, j, cfg) {
                keep[j] = false;
            } else {
                accepted.push(j);
            }
        }
    }
    track.retain(&keep)
}

/// Start of the `len`-long run of indices around `center`, clamped to `0..n`.
fn window_start(center: usize, len: usize, n: usize) -> usize {
    center.saturating_sub(len / 2).min(n - len)
}

/// Flags outliers of one element series inside one window of records.
///
/// `d[c]` is the element minus the mean of the other members of its sliding
/// window. The mean absolute deviation of the differences is taken over a
/// second sliding window, again leaving the centre out so that an isolated
/// spike cannot mask itself.
pub(crate) fn mad_outliers(values: &[f64], stat_window: usize, threshold: f64) -> Vec<bool> {
    let n = values.len();
    let w = stat_window;
    let mut flags = vec![false; n];
    if n < w {
        return flags;
    }
    let diffs: Vec<f64> = (0..n)
        .map(|c| {
            let s = window_start(c, w, n);
            let others: f64 = (s..s + w).filter(|&j| j != c).map(|j| values[j]).sum();
            values[c] - others / (w - 1) as f64
        })
        .collect();
    for c in 0..n {
        let s = window_start(c, w, n);
        let others: Vec<f64> = (s..s + w).filter(|&j| j != c).map(|j| diffs[j]).collect();
        let m = others.iter().sum::<f64>() / others.len() as f64;
        let mad = others.iter().map(|d| (d - m).abs()).sum::<f64>() / others.len() as f64;
        // Rounding slack so that exactly constant series never trip the test.
        let floor = 64.0 * f64::EPSILON * values[c].abs() + f64::MIN_POSITIVE;
        flags[c] = diffs[c].abs() > threshold * mad + floor;
    }
    flags
}

/// Step 4: sliding-window mean absolute deviation test on eccentricity and
/// inclination. A record flagged in either element is removed, and passes
/// repeat until nothing more is removed.
pub fn filter_ecc_incl(track: ObjectTrack, cfg: &PruneConfig) -> ObjectTrack {
    to_fixed_point(track, |t| ecc_incl_pass(t, cfg))
}

fn ecc_incl_pass(track: ObjectTrack, cfg: &PruneConfig) -> ObjectTrack {
    let mut keep = vec![true; track.records.len()];
    for range in track.effective_windows() {
        if range.len() < cfg.stat_window {
            continue;
        }
        let recs = &track.records[range.clone()];
        let ecc: Vec<f64> = recs.iter().map(|r| r.eccentricity).collect();
        let inc: Vec<f64> = recs.iter().map(|r| r.inclination).collect();
        let fe = mad_outliers(&ecc, cfg.stat_window, cfg.mad_threshold);
        let fi = mad_outliers(&inc, cfg.stat_window, cfg.mad_threshold);
        for (k, i) in range.enumerate() {
            if fe[k] || fi[k] {
                keep[i] = false;
            }
        }
    }
    track.retain(&keep)
}

/// Step 5: drop records with a negative B*. Zero is kept.
pub fn filter_negative_bstar(track: ObjectTrack) -> ObjectTrack {
    let keep: Vec<bool> = track.records.iter().map(|r| r.bstar >= 0.0).collect();
    track.retain(&keep)
}

#[allow(dead_code)]
fn covered(windows: &[Range<usize>]) -> usize {
    windows.iter().map(|w| w.len()).sum()
}
