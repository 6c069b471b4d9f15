//! Training cases, error metrics and B*-distribution categories.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{grid_index_of_altitude, FeatureTensor, Role, GRID_POINTS};
use crate::math::{median, quantile_sorted};
use crate::nn::Seq2SeqModel;
use crate::tle::ObjectTrack;
use crate::train::{predict_object, train, TrainConfig, TrainError, TrainReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("actual re-entry time {actual} is not after the initial time {initial}")]
    DegenerateInterval { actual: f64, initial: f64 },
    #[error("empty B* distribution")]
    EmptyDistribution,
    #[error("case {name}: Tx = {input_steps} does not start at {start_altitude_km} km")]
    InconsistentCase { name: String, input_steps: usize, start_altitude_km: f64 },
    #[error("sequence lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("unknown case {0}")]
    UnknownCase(String),
    #[error(transparent)]
    Train(#[from] TrainError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub name: String,
    pub input_steps: usize,
    pub start_altitude_km: f64,
    pub epochs: usize,
}

impl CaseSpec {
    fn new(name: &str, input_steps: usize, start_altitude_km: f64, epochs: usize) -> Self {
        Self { name: name.into(), input_steps, start_altitude_km, epochs }
    }

    pub fn a() -> Self {
        Self::new("A", 5, 180.0, 2900)
    }

    pub fn b() -> Self {
        Self::new("B", 9, 160.0, 3000)
    }

    pub fn c() -> Self {
        Self::new("C", 13, 140.0, 1200)
    }

    pub fn d() -> Self {
        Self::new("D", 17, 120.0, 1200)
    }

    pub fn all() -> [Self; 4] {
        [Self::a(), Self::b(), Self::c(), Self::d()]
    }

    pub fn by_name(name: &str) -> Result<Self, EvalError> {
        Self::all()
            .into_iter()
            .find(|c| c.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| EvalError::UnknownCase(name.into()))
    }

    /// The last encoder step must sit on the starting altitude.
    pub fn validate(&self) -> Result<(), EvalError> {
        match grid_index_of_altitude(self.start_altitude_km) {
            Some(i) if i + 1 == self.input_steps && self.input_steps < GRID_POINTS => Ok(()),
            _ => Err(EvalError::InconsistentCase {
                name: self.name.clone(),
                input_steps: self.input_steps,
                start_altitude_km: self.start_altitude_km,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub eps_abs_hours: f64,
    pub eps_rel_percent: f64,
    pub mse_day2: f64,
}

/// Errors of one prediction. Times are in days; `t_initial` is the epoch of
/// the starting altitude.
pub fn metrics(
    t_pred: f64,
    t_actual: f64,
    t_initial: f64,
    predicted: &[f64],
    actual: &[f64],
) -> Result<MetricSet, EvalError> {
    if !(t_actual > t_initial) {
        return Err(EvalError::DegenerateInterval { actual: t_actual, initial: t_initial });
    }
    if predicted.len() != actual.len() || predicted.is_empty() {
        return Err(EvalError::LengthMismatch(predicted.len(), actual.len()));
    }
    let abs_days = (t_pred - t_actual).abs();
    let mse = predicted.iter().zip(actual).map(|(p, a)| (p - a) * (p - a)).sum::<f64>() / actual.len() as f64;
    Ok(MetricSet {
        eps_abs_hours: abs_days * 24.0,
        eps_rel_percent: abs_days / (t_actual - t_initial) * 100.0,
        mse_day2: mse,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryAssignment {
    pub norad_id: u32,
    /// 1 inside the training interquartile range, 2 outside.
    pub category: u8,
    pub median_bstar: f64,
    pub q1: f64,
    pub q3: f64,
}

/// Quartiles (linear interpolation) of the training medians.
pub fn training_iqr(training_medians: &[f64]) -> Result<(f64, f64), EvalError> {
    if training_medians.is_empty() || training_medians.iter().any(|m| m.is_nan()) {
        return Err(EvalError::EmptyDistribution);
    }
    let mut sorted = training_medians.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok((quantile_sorted(&sorted, 0.25), quantile_sorted(&sorted, 0.75)))
}

/// Assigns categories from per-object median B* values.
pub fn categorize_medians(test: &[(u32, f64)], training_medians: &[f64]) -> Result<Vec<CategoryAssignment>, EvalError> {
    let (q1, q3) = training_iqr(training_medians)?;
    Ok(test
        .iter()
        .map(|&(norad_id, m)| CategoryAssignment {
            norad_id,
            category: if q1 <= m && m <= q3 { 1 } else { 2 },
            median_bstar: m,
            q1,
            q3,
        })
        .collect())
}

/// Median of the non-negative B* values of a track.
pub fn track_median_bstar(track: &ObjectTrack) -> Option<f64> {
    let values: Vec<f64> = track.records.iter().map(|r| r.bstar).filter(|b| *b >= 0.0).collect();
    median(&values)
}

pub fn categorize(test: &[ObjectTrack], training: &[ObjectTrack]) -> Result<Vec<CategoryAssignment>, EvalError> {
    let train: Vec<f64> =
        training.iter().map(track_median_bstar).collect::<Option<_>>().ok_or(EvalError::EmptyDistribution)?;
    let test: Vec<(u32, f64)> = test
        .iter()
        .map(|t| track_median_bstar(t).map(|m| (t.norad_id, m)))
        .collect::<Option<_>>()
        .ok_or(EvalError::EmptyDistribution)?;
    categorize_medians(&test, &train)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectResult {
    pub norad_id: u32,
    pub category: u8,
    pub median_bstar: f64,
    /// Reported so that eccentric outliers can be explained; never filtered.
    pub eccentricity: f64,
    pub metrics: MetricSet,
    /// Residual times since the 200 km epoch, days.
    pub t_initial: f64,
    pub t_actual: f64,
    pub t_pred: f64,
    pub predicted: Vec<f64>,
    pub actual: Vec<f64>,
}

/// Scores `model` on every test-role object of `tensor`. Categories use the
/// training and validation objects as the reference distribution.
pub fn evaluate(model: &Seq2SeqModel, tensor: &FeatureTensor, case: &CaseSpec) -> Result<Vec<ObjectResult>, EvalError> {
    case.validate()?;
    let tx = case.input_steps;
    if model.config.input_steps != tx {
        return Err(TrainError::Network(crate::nn::NnError::ShapeMismatch {
            what: "case input steps",
            expected: tx,
            got: model.config.input_steps,
        })
        .into());
    }
    let reference: Vec<f64> = (0..tensor.n_objects)
        .filter(|&i| tensor.roles[i] != Role::Test)
        .map(|i| tensor.median_bstar[i])
        .collect();
    let tests = tensor.indices_with_role(Role::Test);
    let medians: Vec<(u32, f64)> = tests.iter().map(|&i| (tensor.norad_ids[i], tensor.median_bstar[i])).collect();
    let cats = categorize_medians(&medians, &reference)?;
    let mut out = Vec::with_capacity(tests.len());
    for (&i, cat) in tests.iter().zip(cats) {
        let predicted = predict_object(model, tensor, i)?;
        let row = tensor.target_row(i);
        let actual = row[tx..].to_vec();
        let (t_initial, t_actual) = (row[tx - 1], row[GRID_POINTS - 1]);
        let t_pred = *predicted.last().expect("output_steps > 0");
        out.push(ObjectResult {
            norad_id: tensor.norad_ids[i],
            category: cat.category,
            median_bstar: cat.median_bstar,
            eccentricity: tensor.eccentricity[i],
            metrics: metrics(t_pred, t_actual, t_initial, &predicted, &actual)?,
            t_initial,
            t_actual,
            t_pred,
            predicted,
            actual,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct CaseResult {
    pub case: CaseSpec,
    pub report: TrainReport,
    pub model: Seq2SeqModel,
    pub objects: Vec<ObjectResult>,
}

/// Trains on the case's Tx for the case's epoch count, then evaluates the
/// best-validation model on the test objects.
pub fn run_case(case: &CaseSpec, tensor: &FeatureTensor, base: TrainConfig) -> Result<CaseResult, EvalError> {
    case.validate()?;
    let cfg = TrainConfig { input_steps: case.input_steps, epochs: case.epochs, ..base };
    let outcome = train(tensor, cfg)?;
    let objects = evaluate(&outcome.best_model, tensor, case)?;
    Ok(CaseResult { case: case.clone(), report: outcome.report, model: outcome.best_model, objects })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub objects: usize,
    pub median_eps_abs_hours: f64,
    pub median_eps_rel_percent: f64,
    pub median_residual_days: f64,
}

impl CaseSummary {
    /// Medians over `rows`, optionally restricted to one category.
    pub fn of(rows: &[ObjectResult], category: Option<u8>) -> Option<Self> {
        let sel: Vec<&ObjectResult> = rows.iter().filter(|r| category.is_none_or(|c| r.category == c)).collect();
        let col = |f: &dyn Fn(&ObjectResult) -> f64| median(&sel.iter().map(|r| f(r)).collect::<Vec<_>>());
        Some(Self {
            objects: sel.len(),
            median_eps_abs_hours: col(&|r| r.metrics.eps_abs_hours)?,
            median_eps_rel_percent: col(&|r| r.metrics.eps_rel_percent)?,
            median_residual_days: col(&|r| r.t_actual - r.t_initial)?,
        })
    }
}
