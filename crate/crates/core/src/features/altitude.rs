//! Average altitude from mean motion, and the B* / ballistic-coefficient link.

use core::f64::consts::PI;
use thiserror::Error;

use crate::math::{cbrt, sqrt};
use crate::time::SECONDS_PER_DAY;
use crate::tle::TleRecord;

/// Earth gravitational parameter, km³/s².
pub const MU_KM3_S2: f64 = 398_600.441_8;
/// Earth radius used for average altitudes, km.
pub const EARTH_RADIUS_KM: f64 = 6378.135;
/// SGP4 reference density term of the B* definition, kg/m²/ER.
pub const BSTAR_REFERENCE_DENSITY: f64 = 2.461e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AltitudeError {
    #[error("mean motion must be positive")]
    NonPositiveMeanMotion,
}

/// Converts a mean-element record into a semi-major axis.
///
/// The default [`Keplerian`] conversion reads the axis straight off the mean
/// motion; a propagator-based mean-to-osculating conversion can be plugged in
/// here without touching callers.
pub trait ElementConversion {
    fn semi_major_axis_km(&self, record: &TleRecord) -> Result<f64, AltitudeError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Keplerian;

impl ElementConversion for Keplerian {
    fn semi_major_axis_km(&self, record: &TleRecord) -> Result<f64, AltitudeError> {
        semi_major_axis_km(record.mean_motion)
    }
}

/// Semi-major axis (km) for a mean motion in rev/day.
pub fn semi_major_axis_km(mean_motion: f64) -> Result<f64, AltitudeError> {
    if !(mean_motion > 0.0) {
        return Err(AltitudeError::NonPositiveMeanMotion);
    }
    let n = mean_motion * 2.0 * PI / SECONDS_PER_DAY;
    Ok(cbrt(MU_KM3_S2 / (n * n)))
}

/// Mean motion (rev/day) of a circular orbit with semi-major axis `a_km`.
pub fn mean_motion_from_axis(a_km: f64) -> f64 {
    sqrt(MU_KM3_S2 / (a_km * a_km * a_km)) * SECONDS_PER_DAY / (2.0 * PI)
}

/// Average altitude `h = a - R⊕` in km.
pub fn mean_altitude(record: &TleRecord) -> Result<f64, AltitudeError> {
    mean_altitude_with(&Keplerian, record)
}

pub fn mean_altitude_with<C: ElementConversion + ?Sized>(
    conversion: &C,
    record: &TleRecord,
) -> Result<f64, AltitudeError> {
    Ok(conversion.semi_major_axis_km(record)? - EARTH_RADIUS_KM)
}

pub fn altitude_from_mean_motion(mean_motion: f64) -> Result<f64, AltitudeError> {
    Ok(semi_major_axis_km(mean_motion)? - EARTH_RADIUS_KM)
}

pub fn mean_motion_from_altitude(altitude_km: f64) -> f64 {
    mean_motion_from_axis(altitude_km + EARTH_RADIUS_KM)
}

/// B* (1/ER) for a ballistic coefficient `CD·A/m` in m²/kg:
/// `B* = ½ · CD·A/m · ρ0 · R⊕`, with ρ0 = 2.461e-5 and R⊕ = 6378.135 taken
/// as plain numbers (the customary SGP4 convention, ρ0·R⊕ ≈ 0.157 kg/m²/ER).
pub fn bstar_from_ballistic(cd_area_over_mass: f64) -> f64 {
    0.5 * cd_area_over_mass * BSTAR_REFERENCE_DENSITY * EARTH_RADIUS_KM
}

pub fn ballistic_from_bstar(bstar: f64) -> f64 {
    bstar / (0.5 * BSTAR_REFERENCE_DENSITY * EARTH_RADIUS_KM)
}
