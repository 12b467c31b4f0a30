//! Plug-in estimators of `σ²` that condition on a ridge or principal-component fit.

use std::time::Instant;

use nalgebra::DVector;

use super::{gcv_lambda, EstimateReport, Method, VarianceComponents};
use crate::error::{input, Error, Result};
use crate::linalg::{hat_traces, ridge_solve, SvdFactors};

/// Residual degrees of freedom used by [`basic_sigma2`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DegreesOfFreedom {
    /// `ν = n − tr(2H − HHᵀ)`
    #[default]
    Residual,
    /// `ν = n − tr(H)`
    HatTrace,
}

/// Residual mean square `‖y − Xβ̂_λ‖²/ν` of a ridge fit.
pub fn basic_sigma2(svd: &SvdFactors, y: &DVector<f64>, lambda: f64, df: DegreesOfFreedom) -> Result<f64> {
    let sol = ridge_solve(svd, y, lambda)?;
    let n = svd.nrows() as f64;
    let nu = match df {
        DegreesOfFreedom::Residual => n - 2.0 * sol.hat_trace + sol.hat2_trace,
        DegreesOfFreedom::HatTrace => n - sol.hat_trace,
    };
    if nu <= 1e-8 * n {
        return Err(Error::DegreesOfFreedom(format!(
            "residual degrees of freedom {nu:e} at lambda = {lambda:e}"
        )));
    }
    Ok((y - &sol.fitted).norm_squared() / nu)
}

/// GCV for `λ`, then the basic `σ²` and `τ² = σ²/λ`.
pub fn basic_estimate(svd: &SvdFactors, y: &DVector<f64>) -> Result<EstimateReport> {
    let start = Instant::now();
    let gcv = gcv_lambda(svd, y)?;
    let lambda = gcv.lambda.expect("gcv always reports lambda");
    let sigma2 = basic_sigma2(svd, y, lambda, DegreesOfFreedom::Residual)?;
    let mut report = EstimateReport::from_components(
        Method::Basic,
        VarianceComponents::new(sigma2, sigma2 / lambda, svd.ncols()),
    );
    report.converged = gcv.converged;
    report.note = gcv.note;
    Ok(report.timed(start))
}

/// Residual mean square after regressing `y` on the first `r` principal-component scores.
pub fn pcr_sigma2(svd: &SvdFactors, y: &DVector<f64>, r: usize) -> Result<f64> {
    let n = svd.nrows();
    if r == 0 {
        return Err(input("at least one principal component is required"));
    }
    if r >= n {
        return Err(Error::DegreesOfFreedom(format!("{r} components leave no residual degrees of freedom with n = {n}")));
    }
    if r > svd.rank {
        return Err(Error::Rank(format!("{r} components requested but numeric rank is {}", svd.rank)));
    }
    let ur = svd.u.columns(0, r);
    let coef = ur.tr_mul(y);
    let resid = y - ur * coef;
    Ok(resid.norm_squared() / (n - r) as f64)
}

/// Chooses the number of components so that the ridge penalty implied by the
/// PCR fit, `λ_r = r·σ̂²_r/‖α̂_r‖²`, has effective degrees of freedom closest to `r`.
/// Returns `(r, σ̂²_r, λ_r)`.
pub fn pcr_select_components(svd: &SvdFactors, y: &DVector<f64>) -> Result<(usize, f64, f64)> {
    let n = svd.nrows();
    let max_r = svd.rank.min(n.saturating_sub(2));
    if max_r == 0 {
        return Err(Error::Rank("no principal component leaves residual degrees of freedom".into()));
    }
    let uty = svd.rotate(y)?;
    let mut alpha_ss = 0.0;
    let mut best: Option<(f64, usize, f64, f64)> = None;
    for r in 1..=max_r {
        alpha_ss += uty[r - 1] * uty[r - 1] / (svd.d[r - 1] * svd.d[r - 1]);
        let sigma2 = pcr_sigma2(svd, y, r)?;
        if alpha_ss <= 0.0 {
            continue;
        }
        let lambda = r as f64 * sigma2 / alpha_ss;
        if !(lambda > 0.0) {
            continue;
        }
        let (df, _) = hat_traces(&svd.d, lambda);
        let gap = (df - r as f64).abs();
        if best.is_none_or(|b| gap < b.0) {
            best = Some((gap, r, sigma2, lambda));
        }
    }
    best.map(|(_, r, s, l)| (r, s, l))
        .ok_or_else(|| Error::Numeric("response has no component along the principal directions".into()))
}

/// PCR `σ²` with automatically selected `r`, paired with its implied `λ_r`.
pub fn pcr_estimate(svd: &SvdFactors, y: &DVector<f64>) -> Result<EstimateReport> {
    let start = Instant::now();
    let (_, sigma2, lambda) = pcr_select_components(svd, y)?;
    let report = EstimateReport::from_components(
        Method::Pcr,
        VarianceComponents::new(sigma2, sigma2 / lambda, svd.ncols()),
    );
    Ok(report.timed(start))
}
