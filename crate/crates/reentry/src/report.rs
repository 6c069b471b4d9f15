//! Evaluation tables, plot data and loss curves.

use reentry_core::eval::{CaseSpec, CaseSummary, ObjectResult};
use reentry_core::features::grid_altitudes;
use reentry_core::train::TrainReport;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn csv_string<T: Serialize>(header: &str, rows: impl IntoIterator<Item = T>) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let body = w.into_inner().map_err(|e| Error::input(e.to_string()))?;
    Ok(format!("{header}\n{}", String::from_utf8(body).map_err(Error::input)?))
}

/// `epoch,train_loss,val_loss` with losses converted to day².
pub fn loss_curve_csv(report: &TrainReport) -> Result<String> {
    csv_string(
        "epoch,train_loss,val_loss",
        report
            .train_loss
            .iter()
            .zip(&report.val_loss)
            .enumerate()
            .map(|(e, (&t, &v))| (e + 1, report.to_days_squared(t), report.to_days_squared(v))),
    )
}

/// Long table keyed by (case, norad_id, metric).
pub fn metrics_csv(case: &str, rows: &[ObjectResult]) -> Result<String> {
    let mut out = Vec::new();
    for r in rows {
        let values = [
            ("eps_abs_hours", r.metrics.eps_abs_hours),
            ("eps_rel_percent", r.metrics.eps_rel_percent),
            ("mse_day2", r.metrics.mse_day2),
            ("t_initial_days", r.t_initial),
            ("t_actual_days", r.t_actual),
            ("t_pred_days", r.t_pred),
            ("median_bstar", r.median_bstar),
            ("eccentricity", r.eccentricity),
        ];
        out.extend(values.into_iter().map(|(m, v)| (case, r.norad_id, r.category, m, v)));
    }
    csv_string("case,norad_id,category,metric,value", out)
}

/// True and predicted times per output grid point, for external plotting.
pub fn plot_csv(case: &str, input_steps: usize, rows: &[ObjectResult]) -> Result<String> {
    let alts = grid_altitudes();
    let mut out = Vec::new();
    for r in rows {
        for (i, (&a, &p)) in r.actual.iter().zip(&r.predicted).enumerate() {
            let g = input_steps + i;
            out.push((case, r.norad_id, g, alts[g], a, p));
        }
    }
    csv_string("case,norad_id,grid_index,altitude_km,actual_days,predicted_days", out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySummary {
    pub category: u8,
    pub summary: CaseSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub case: CaseSpec,
    pub overall: Option<CaseSummary>,
    pub by_category: Vec<CategorySummary>,
    pub objects: Vec<ObjectResult>,
}

impl EvalReport {
    pub fn new(case: CaseSpec, objects: Vec<ObjectResult>) -> Self {
        let by_category = (1..=3)
            .filter_map(|c| CaseSummary::of(&objects, Some(c)).map(|summary| CategorySummary { category: c, summary }))
            .collect();
        Self { overall: CaseSummary::of(&objects, None), by_category, case, objects }
    }
}
