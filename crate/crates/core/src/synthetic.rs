//! Drag-only decay simulator that emits TLE-like tracks with known truth.

use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::altitude::{bstar_from_ballistic, mean_motion_from_axis, EARTH_RADIUS_KM, MU_KM3_S2};
use crate::features::SpaceWeatherSeries;
use crate::math::{exp, mix_seed, sqrt};
use crate::time::SECONDS_PER_DAY;
use crate::tle::{ObjectTrack, TleRecord};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SyntheticError {
    #[error("object {norad_id} did not reach 80 km within {horizon_days} days")]
    NonDecayingOrbit { norad_id: u32, horizon_days: f64 },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(&'static str),
}

/// Base altitude (km), base density (kg/m³), scale height (km).
const ATMOSPHERE: [(f64, f64, f64); 28] = [
    (0.0, 1.225, 7.249),
    (25.0, 3.899e-2, 6.349),
    (30.0, 1.774e-2, 6.682),
    (40.0, 3.972e-3, 7.554),
    (50.0, 1.057e-3, 8.382),
    (60.0, 3.206e-4, 7.714),
    (70.0, 8.770e-5, 6.549),
    (80.0, 1.905e-5, 5.799),
    (90.0, 3.396e-6, 5.382),
    (100.0, 5.297e-7, 5.877),
    (110.0, 9.661e-8, 7.263),
    (120.0, 2.438e-8, 9.473),
    (130.0, 8.484e-9, 12.636),
    (140.0, 3.845e-9, 16.149),
    (150.0, 2.070e-9, 22.523),
    (180.0, 5.464e-10, 29.740),
    (200.0, 2.789e-10, 37.105),
    (250.0, 7.248e-11, 45.546),
    (300.0, 2.418e-11, 53.628),
    (350.0, 9.518e-12, 53.298),
    (400.0, 3.725e-12, 58.515),
    (450.0, 1.585e-12, 60.828),
    (500.0, 6.967e-13, 63.822),
    (600.0, 1.454e-13, 71.835),
    (700.0, 3.614e-14, 88.667),
    (800.0, 1.170e-14, 124.64),
    (900.0, 5.245e-15, 181.05),
    (1000.0, 3.019e-15, 268.00),
];

/// Piecewise exponential density, kg/m³.
pub fn density(altitude_km: f64) -> f64 {
    let h = altitude_km.max(0.0);
    let row = ATMOSPHERE.iter().rev().find(|(h0, _, _)| *h0 <= h).unwrap_or(&ATMOSPHERE[0]);
    row.1 * exp(-(h - row.0) / row.2)
}

/// Reference flux for which the tabulated density applies.
pub const REFERENCE_FLUX_SFU: f64 = 150.0;
pub const REENTRY_ALTITUDE_KM: f64 = 80.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_objects: usize,
    pub first_norad_id: u32,
    /// CD·A/m range in m²/kg, sampled log-uniformly.
    pub ballistic_range: (f64, f64),
    pub drag_coefficient: f64,
    /// Integration starts here.
    pub initial_altitude_km: f64,
    /// Records are emitted only while the true altitude lies in this band.
    pub emit_band_km: (f64, f64),
    pub cadence_hours: f64,
    /// Start epochs (days since 2000-01-01) are drawn uniformly from this range.
    pub start_epoch_range: (f64, f64),
    /// Mean level of the 81-day F10.7 average, sfu.
    pub solar_flux_sfu: f64,
    pub solar_amplitude_sfu: f64,
    pub solar_period_days: f64,
    pub mean_motion_noise: f64,
    pub eccentricity_noise: f64,
    pub inclination_noise: f64,
    /// Relative standard deviation of B* about its nominal value.
    pub bstar_noise: f64,
    /// Probability that a record receives an injected outlier.
    pub outlier_rate: f64,
    /// Minimum number of clean records between injected outliers.
    pub outlier_spacing: usize,
    pub tip_uncertainty_minutes: f64,
    pub step_seconds: f64,
    pub horizon_days: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_objects: 40,
            first_norad_id: 90_000,
            ballistic_range: (0.005, 0.03),
            drag_coefficient: 2.2,
            initial_altitude_km: 210.0,
            emit_band_km: (181.0, 199.0),
            cadence_hours: 1.0,
            start_epoch_range: (6600.0, 7300.0),
            solar_flux_sfu: 120.0,
            solar_amplitude_sfu: 40.0,
            solar_period_days: 4000.0,
            mean_motion_noise: 2e-5,
            eccentricity_noise: 1e-6,
            inclination_noise: 1e-3,
            bstar_noise: 0.02,
            outlier_rate: 0.0,
            outlier_spacing: 8,
            tip_uncertainty_minutes: 5.0,
            step_seconds: 10.0,
            horizon_days: 400.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn noiseless(self) -> Self {
        Self { mean_motion_noise: 0.0, eccentricity_noise: 0.0, inclination_noise: 0.0, bstar_noise: 0.0, outlier_rate: 0.0, ..self }
    }

    pub fn validate(&self) -> Result<(), SyntheticError> {
        let (b0, b1) = self.ballistic_range;
        if !(b0 > 0.0 && b1 >= b0) {
            return Err(SyntheticError::InvalidSpec("ballistic range must be positive and ordered"));
        }
        let (lo, hi) = self.emit_band_km;
        if !(REENTRY_ALTITUDE_KM < lo && lo < hi && hi <= self.initial_altitude_km) {
            return Err(SyntheticError::InvalidSpec("emit band must lie between 80 km and the initial altitude"));
        }
        if !(0.0..=1.0).contains(&self.outlier_rate) {
            return Err(SyntheticError::InvalidSpec("outlier rate must lie in [0, 1]"));
        }
        if !(self.cadence_hours > 0.0 && self.step_seconds > 0.0 && self.horizon_days > 0.0) {
            return Err(SyntheticError::InvalidSpec("cadence, step and horizon must be positive"));
        }
        if !(self.solar_flux_sfu > self.solar_amplitude_sfu.abs() && self.solar_period_days > 0.0) {
            return Err(SyntheticError::InvalidSpec("solar flux must stay positive"));
        }
        if self.start_epoch_range.1 < self.start_epoch_range.0 || self.drag_coefficient <= 0.0 {
            return Err(SyntheticError::InvalidSpec("start range or drag coefficient invalid"));
        }
        let noise = [self.mean_motion_noise, self.eccentricity_noise, self.inclination_noise, self.bstar_noise];
        if noise.iter().any(|n| !(*n >= 0.0)) {
            return Err(SyntheticError::InvalidSpec("noise amplitudes must be non-negative"));
        }
        Ok(())
    }

    /// 81-day-average flux at `epoch`.
    pub fn flux_at(&self, epoch: f64) -> f64 {
        let phase = 2.0 * core::f64::consts::PI * epoch / self.solar_period_days;
        self.solar_flux_sfu + self.solar_amplitude_sfu * libm::sin(phase)
    }

    /// Daily series covering every possible start epoch plus the horizon.
    pub fn space_weather(&self) -> SpaceWeatherSeries {
        let first = libm::floor(self.start_epoch_range.0) - 1.0;
        let last = libm::ceil(self.start_epoch_range.1 + self.horizon_days) + 1.0;
        let days = (last - first) as usize + 1;
        let dates: Vec<f64> = (0..days).map(|d| first + d as f64).collect();
        let flux = dates.iter().map(|&d| self.flux_at(d)).collect();
        SpaceWeatherSeries { dates, f107_81day: flux }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub norad_id: u32,
    /// Epoch of the 80 km crossing, days.
    pub decay_epoch: f64,
    pub cd_a_over_m: f64,
    pub area_to_mass: f64,
    pub nominal_bstar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierKind {
    MeanMotion,
    Eccentricity,
    Inclination,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierLabel {
    pub norad_id: u32,
    pub epoch: f64,
    pub kind: OutlierKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub tracks: Vec<ObjectTrack>,
    pub truth: Vec<GroundTruth>,
    pub outliers: Vec<OutlierLabel>,
    pub space_weather: SpaceWeatherSeries,
}

/// Semi-major-axis rate (km/s) under drag for ballistic coefficient `b` (m²/kg).
fn decay_rate(a_km: f64, b: f64, flux_scale: f64) -> f64 {
    let rho = density(a_km - EARTH_RADIUS_KM) * flux_scale;
    // ρ·B is per metre; ×1000 converts to per km.
    -sqrt(MU_KM3_S2 * a_km) * rho * b * 1000.0
}

/// One decay history sampled on the integration grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayHistory {
    pub start_epoch: f64,
    pub step_seconds: f64,
    /// Semi-major axis at each step, km.
    pub axis_km: Vec<f64>,
    pub crossing_epoch: f64,
}

fn rk4<F: Fn(f64) -> f64>(f: &F, a: f64, dt: f64) -> f64 {
    let k1 = f(a);
    let k2 = f(a + 0.5 * dt * k1);
    let k3 = f(a + 0.5 * dt * k2);
    let k4 = f(a + dt * k3);
    a + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Largest change in semi-major axis allowed in one RK4 step, km.
const MAX_AXIS_STEP_KM: f64 = 0.25;

/// Fixed-step RK4 from `initial_altitude_km` down to 80 km. The history is
/// recorded on the fixed grid; once a step would move the orbit by more than
/// a quarter kilometre (the last minutes of descent) the remaining path is
/// integrated with shorter steps and only the crossing time is kept.
pub fn integrate_decay(
    initial_altitude_km: f64,
    cd_a_over_m: f64,
    flux_scale: f64,
    start_epoch: f64,
    step_seconds: f64,
    horizon_days: f64,
) -> Option<DecayHistory> {
    let target = EARTH_RADIUS_KM + REENTRY_ALTITUDE_KM;
    let f = |a: f64| decay_rate(a, cd_a_over_m, flux_scale);
    let dt = step_seconds;
    let horizon = horizon_days * SECONDS_PER_DAY;
    let max_steps = (horizon / dt) as usize;
    let mut axis = Vec::new();
    let mut a = EARTH_RADIUS_KM + initial_altitude_km;
    axis.push(a);
    let mut step = 0;
    while step < max_steps && a > target && -f(a) * dt <= MAX_AXIS_STEP_KM {
        a = rk4(&f, a, dt);
        step += 1;
        if a > target {
            axis.push(a);
        }
    }
    let mut t = step as f64 * dt;
    if a <= target {
        // Crossed inside a full step; undo it and refine below.
        step -= 1;
        a = axis[step];
        t = step as f64 * dt;
    }
    loop {
        if t > horizon {
            return None;
        }
        let h = (MAX_AXIS_STEP_KM / -f(a)).min(dt);
        let next = rk4(&f, a, h);
        if next <= target {
            let frac = (a - target) / (a - next);
            let crossing = start_epoch + (t + frac * h) / SECONDS_PER_DAY;
            return Some(DecayHistory { start_epoch, step_seconds, axis_km: axis, crossing_epoch: crossing });
        }
        a = next;
        t += h;
    }
}

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("sigma validated non-negative")
}

/// Generates `spec.n_objects` tracks. Each object uses its own RNG stream, so
/// object `i` does not depend on how many objects are generated.
pub fn generate_tracks(spec: &SyntheticSpec) -> Result<SyntheticDataset, SyntheticError> {
    spec.validate()?;
    let mut tracks = Vec::with_capacity(spec.n_objects);
    let mut truth = Vec::with_capacity(spec.n_objects);
    let mut outliers = Vec::new();
    for i in 0..spec.n_objects {
        let norad_id = spec.first_norad_id + i as u32;
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, i as u64));
        let (b0, b1) = spec.ballistic_range;
        let b = if b0 == b1 { b0 } else { exp(rng.random_range(libm::log(b0)..libm::log(b1))) };
        let start = if spec.start_epoch_range.0 == spec.start_epoch_range.1 {
            spec.start_epoch_range.0
        } else {
            rng.random_range(spec.start_epoch_range.0..spec.start_epoch_range.1)
        };
        let flux = spec.flux_at(start);
        let history = integrate_decay(
            spec.initial_altitude_km,
            b,
            flux / REFERENCE_FLUX_SFU,
            start,
            spec.step_seconds,
            spec.horizon_days,
        )
        .ok_or(SyntheticError::NonDecayingOrbit { norad_id, horizon_days: spec.horizon_days })?;

        let nominal_bstar = bstar_from_ballistic(b);
        let base_ecc = rng.random_range(1e-4..2e-3);
        let base_inc = rng.random_range(20.0..98.0);
        let raan = rng.random_range(0.0..360.0);
        let argp = rng.random_range(0.0..360.0);
        let cadence_steps = ((spec.cadence_hours * 3600.0 / spec.step_seconds) as usize).max(1);
        let (lo, hi) = spec.emit_band_km;
        let mut records = Vec::new();
        let mut since_outlier = spec.outlier_spacing;
        let mut step = 0usize;
        while step < history.axis_km.len() {
            let a = history.axis_km[step];
            let h = a - EARTH_RADIUS_KM;
            let jitter = rng.random_range(0..=cadence_steps / 4);
            if h < lo {
                break;
            }
            if h <= hi {
                let epoch = start + step as f64 * spec.step_seconds / SECONDS_PER_DAY;
                let n = mean_motion_from_axis(a);
                let mut rec = TleRecord {
                    norad_id,
                    epoch,
                    mean_motion: n + normal(spec.mean_motion_noise).sample(&mut rng),
                    eccentricity: (base_ecc + normal(spec.eccentricity_noise).sample(&mut rng)).max(0.0),
                    inclination: base_inc + normal(spec.inclination_noise).sample(&mut rng),
                    bstar: nominal_bstar * (1.0 + normal(spec.bstar_noise).sample(&mut rng)),
                    raan,
                    arg_perigee: argp,
                    mean_anomaly: rng.random_range(0.0..360.0),
                };
                since_outlier += 1;
                if since_outlier > spec.outlier_spacing && rng.random::<f64>() < spec.outlier_rate {
                    let kind = match rng.random_range(0..3) {
                        0 => OutlierKind::MeanMotion,
                        1 => OutlierKind::Eccentricity,
                        _ => OutlierKind::Inclination,
                    };
                    inject(&mut rec, kind, spec, &mut rng);
                    outliers.push(OutlierLabel { norad_id, epoch, kind });
                    since_outlier = 0;
                }
                records.push(rec);
            }
            step += cadence_steps + jitter;
        }
        tracks.push(ObjectTrack::new(norad_id, records, history.crossing_epoch, spec.tip_uncertainty_minutes));
        truth.push(GroundTruth {
            norad_id,
            decay_epoch: history.crossing_epoch,
            cd_a_over_m: b,
            area_to_mass: b / spec.drag_coefficient,
            nominal_bstar,
        });
    }
    Ok(SyntheticDataset { tracks, truth, outliers, space_weather: spec.space_weather() })
}

/// Mean-motion spikes are 10–20 times the regression tolerance. Eccentricity
/// and inclination spikes are 50–100 noise standard deviations.
fn inject<R: Rng + ?Sized>(rec: &mut TleRecord, kind: OutlierKind, spec: &SyntheticSpec, rng: &mut R) {
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let factor = sign * rng.random_range(10.0..20.0);
    match kind {
        OutlierKind::MeanMotion => {
            let tol = (1e-3 * rec.mean_motion).max(1e-4);
            rec.mean_motion += factor * tol;
        }
        OutlierKind::Eccentricity => {
            let scale = 5.0 * spec.eccentricity_noise.max(1e-7);
            // Keep the spiked value non-negative.
            rec.eccentricity += factor.abs() * scale;
        }
        OutlierKind::Inclination => {
            rec.inclination += factor * 5.0 * spec.inclination_noise.max(1e-5);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::altitude::mean_altitude;
    use crate::features::{fit_decay_curve, sample_grid};

    fn spec(n: usize) -> SyntheticSpec {
        SyntheticSpec { n_objects: n, ..SyntheticSpec::default() }
    }

    #[test]
    fn density_table_continuity() {
        assert!((density(700.0) - 3.614e-14).abs() < 1e-20);
        assert!((density(0.0) - 1.225).abs() < 1e-12);
        // Each layer's top matches the next base within a few percent.
        for w in ATMOSPHERE.windows(2) {
            let top = w[0].1 * exp(-(w[1].0 - w[0].0) / w[0].2);
            assert!((top / w[1].1 - 1.0).abs() < 0.1, "{} km", w[1].0);
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(generate_tracks(&spec(3)).unwrap(), generate_tracks(&spec(3)).unwrap());
        let a = generate_tracks(&spec(3)).unwrap();
        let b = generate_tracks(&spec(5)).unwrap();
        assert_eq!(a.tracks[..], b.tracks[..3]);
    }

    #[test]
    fn noiseless_altitude_strictly_decreasing() {
        let ds = generate_tracks(&spec(5).noiseless()).unwrap();
        for t in &ds.tracks {
            assert!(t.records.len() >= 4, "{}", t.records.len());
            let h: Vec<f64> = t.records.iter().map(|r| mean_altitude(r).unwrap()).collect();
            assert!(h.windows(2).all(|w| w[1] < w[0]));
            assert!(h[0] <= 199.0 + 1e-9 && *h.last().unwrap() >= 181.0 - 1e-9);
        }
    }

    #[test]
    fn axis_never_increases() {
        let h = integrate_decay(210.0, 0.01, 1.0, 0.0, 10.0, 100.0).unwrap();
        assert!(h.axis_km.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn more_drag_shorter_life() {
        let slow = integrate_decay(210.0, 0.01, 1.0, 0.0, 10.0, 100.0).unwrap();
        let fast = integrate_decay(210.0, 0.02, 1.0, 0.0, 10.0, 100.0).unwrap();
        assert!(fast.crossing_epoch < slow.crossing_epoch);
    }

    #[test]
    fn step_size_converged() {
        let fine = integrate_decay(210.0, 0.01, 1.0, 0.0, 1.0, 100.0).unwrap();
        let coarse = integrate_decay(210.0, 0.01, 1.0, 0.0, 10.0, 100.0).unwrap();
        assert!((fine.crossing_epoch - coarse.crossing_epoch).abs() < 1e-4);
    }

    #[test]
    fn refit_crossing_matches_integrator() {
        let ds = generate_tracks(&spec(4).noiseless()).unwrap();
        for (t, truth) in ds.tracks.iter().zip(&ds.truth) {
            let samples: Vec<(f64, f64)> = t.records.iter().map(|r| (r.epoch, mean_altitude(r).unwrap())).collect();
            let fit = fit_decay_curve(&samples, t.reentry_epoch).unwrap();
            let traj = sample_grid(t.norad_id, &fit.coefficients).unwrap();
            let crossing = traj.origin_epoch + traj.lifetime();
            assert!((crossing - truth.decay_epoch).abs() < 0.02);
        }
    }

    #[test]
    fn non_decaying_orbit() {
        let s = SyntheticSpec { initial_altitude_km: 900.0, emit_band_km: (181.0, 199.0), horizon_days: 1.0, ..spec(1) };
        assert!(matches!(generate_tracks(&s), Err(SyntheticError::NonDecayingOrbit { .. })));
    }

    #[test]
    fn outliers_labelled_and_isolated() {
        let s = SyntheticSpec { outlier_rate: 0.2, ..spec(5) };
        let ds = generate_tracks(&s).unwrap();
        assert!(!ds.outliers.is_empty());
        for label in &ds.outliers {
            let t = ds.tracks.iter().find(|t| t.norad_id == label.norad_id).unwrap();
            assert!(t.records.iter().any(|r| r.epoch == label.epoch));
        }
        for w in ds.outliers.windows(2) {
            if w[0].norad_id == w[1].norad_id {
                let t = ds.tracks.iter().find(|t| t.norad_id == w[0].norad_id).unwrap();
                let i = t.records.iter().position(|r| r.epoch == w[0].epoch).unwrap();
                let j = t.records.iter().position(|r| r.epoch == w[1].epoch).unwrap();
                assert!(j - i > s.outlier_spacing);
            }
        }
    }
}
