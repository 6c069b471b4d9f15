use super::NnError;

/// Mean squared difference.
pub fn mse_loss(y: &[f64], yhat: &[f64]) -> Result<f64, NnError> {
    if y.len() != yhat.len() || y.is_empty() {
        return Err(NnError::LengthMismatch(y.len(), yhat.len()));
    }
    let ss: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(ss / y.len() as f64)
}
