use std::time::Instant;

use nalgebra::DVector;

use super::{EstimateReport, Method, VarianceComponents};
use crate::error::{Error, Result};
use crate::linalg::{check_len, DesignMatrix};

/// Method-of-moments estimator matching off-diagonal and diagonal second moments of `y`.
///
/// Off-diagonal sums use `Σ_{i≠k} a_ik = 1ᵀA1 − tr(A)`, so neither `yyᵀ` nor
/// `XXᵀ` is ever formed. Negative estimates are returned as they are, with a
/// `negative_estimate` note.
pub fn mom_estimate(x: &DesignMatrix, y: &DVector<f64>) -> Result<EstimateReport> {
    let start = Instant::now();
    let n = x.nrows();
    check_len(y, n, "response")?;

    let sum_y = y.sum();
    let sum_y2 = y.norm_squared();
    let col_sums = x.values().row_sum(); // 1ᵀX
    let trace_gram = x.values().norm_squared();
    let denom = col_sums.norm_squared() - trace_gram;
    if denom.abs() < 1e-12 * (n * n) as f64 {
        return Err(Error::Instability(format!(
            "off-diagonal Gram sum {denom:e} is numerically zero"
        )));
    }
    let tau2 = (sum_y * sum_y - sum_y2) / denom;
    let sigma2 = (sum_y2 - tau2 * trace_gram) / n as f64;

    let mut report = EstimateReport::from_components(Method::Mom, VarianceComponents::new(sigma2, tau2, x.ncols()));
    if tau2 < 0.0 || sigma2 < 0.0 {
        report.add_note("negative_estimate");
    }
    Ok(report.timed(start))
}
