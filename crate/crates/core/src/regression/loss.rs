use super::{CoefficientVector, DesignMatrix, PenaltyVector};
use crate::error::Result;

/// Loss of a fitted coefficient vector, per time step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossReport {
    pub mse: f64,
    /// `Σ_j (2/T)·λ_j·|β_j|`; in the market this is the buyer's total payment.
    pub penalty_term: f64,
    pub lasso_loss: f64,
}

/// `(1/T)·Σ_t (y_t − x_t·β)²`.
pub fn mse(x: &DesignMatrix, beta: &CoefficientVector, y: &[f64]) -> Result<f64> {
    x.check_target(y)?;
    let fitted = x.predict(beta)?;
    let sse: f64 = y
        .iter()
        .zip(fitted.iter())
        .map(|(yt, ft)| (yt - ft) * (yt - ft))
        .sum();
    Ok(sse / y.len() as f64)
}

pub fn lasso_loss(
    x: &DesignMatrix,
    penalties: &PenaltyVector,
    beta: &CoefficientVector,
    y: &[f64],
) -> Result<LossReport> {
    penalties.check_against(x)?;
    let mse = mse(x, beta, y)?;
    let t = x.nrows() as f64;
    let penalty_term: f64 = penalties
        .as_slice()
        .iter()
        .zip(beta.as_slice())
        .map(|(lambda, b)| (2.0 / t * lambda * b).abs())
        .sum();
    Ok(LossReport {
        mse,
        penalty_term,
        lasso_loss: mse + penalty_term,
    })
}
