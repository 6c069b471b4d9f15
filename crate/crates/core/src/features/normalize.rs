use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum NormalizeError {
    #[error("min-max range is degenerate (max = min = {0})")]
    DegenerateRange(f64),
    #[error("no values to normalize")]
    Empty,
}

/// Min–max statistics learned on the training split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    pub fn fit(values: &[f64]) -> Result<Self, NormalizeError> {
        let (min, max) = values
            .iter()
            .fold(None, |acc: Option<(f64, f64)>, &v| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
            })
            .ok_or(NormalizeError::Empty)?;
        if !(max > min) {
            return Err(NormalizeError::DegenerateRange(min));
        }
        Ok(Self { min, max })
    }

    pub fn range(&self) -> f64 {
        self.max - self.min
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.min) / (self.max - self.min)
    }

    pub fn invert(&self, x: f64) -> f64 {
        x * (self.max - self.min) + self.min
    }
}

/// Scales to `[0, 1]` with the given statistics, or with statistics fitted to
/// `values` when none are supplied. Supplied statistics are applied as-is, so
/// outputs may leave `[0, 1]`.
pub fn minmax_normalize(
    values: &[f64],
    stats: Option<MinMax>,
) -> Result<(Vec<f64>, MinMax), NormalizeError> {
    let stats = match stats {
        Some(s) => s,
        None => MinMax::fit(values)?,
    };
    Ok((values.iter().map(|&v| stats.apply(v)).collect(), stats))
}
