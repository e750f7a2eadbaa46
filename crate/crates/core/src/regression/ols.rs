use nalgebra::{DMatrix, DVector, SVD};

use super::{CoefficientVector, DesignMatrix};
use crate::error::{Error, Result};

/// Ordinary least squares, `argmin ‖y − Xβ‖²`.
///
/// Rank-deficient systems (including `T < P`) get the minimum-norm
/// least-squares solution.
pub fn ols_fit(x: &DesignMatrix, y: &[f64]) -> Result<CoefficientVector> {
    x.check_target(y)?;
    let b = DVector::from_column_slice(y);
    min_norm_lstsq(x.values(), &b).map(CoefficientVector::from)
}

/// Minimum-norm solution of `min ‖b − A·z‖²` through a truncated SVD.
///
/// Singular values below `max(m, n)·ε·σ_max` are treated as zero.
pub(crate) fn min_norm_lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok(DVector::zeros(n));
    }
    let svd = SVD::try_new(a.clone(), true, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::invalid("SVD failed to converge"))?;
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let s = &svd.singular_values;
    let s_max = s.iter().cloned().fold(0.0, f64::max);
    let cutoff = s_max * f64::EPSILON * m.max(n) as f64;

    let mut coords = u.transpose() * b;
    for (c, &sv) in coords.iter_mut().zip(s.iter()) {
        if sv > cutoff {
            *c /= sv;
        } else {
            *c = 0.0;
        }
    }
    Ok(v_t.transpose() * coords)
}
