use std::time::Instant;

use nalgebra::DVector;

use super::{EstimateReport, Method};
use crate::error::{input, Result};
use crate::linalg::{check_lambda, hat_traces, SvdFactors};
use crate::optim::{maximize_1d, OptBounds};

/// Response projected on the SVD basis: `Uᵀy` and the squared norm of the
/// remainder outside `U`'s column space.
struct Projected {
    coef: DVector<f64>,
    resid_ss: f64,
}

fn project(svd: &SvdFactors, y: &DVector<f64>) -> Result<Projected> {
    let coef = svd.rotate(y)?;
    let resid_ss = (y - &svd.u * &coef).norm_squared();
    Ok(Projected { coef, resid_ss })
}

fn gcv_projected(svd: &SvdFactors, proj: &Projected, lambda: f64) -> f64 {
    let n = svd.nrows() as f64;
    let rss = svd
        .d
        .iter()
        .zip(proj.coef.iter())
        .map(|(d, c)| {
            let shrink = lambda / (d * d + lambda);
            shrink * shrink * c * c
        })
        .sum::<f64>()
        + proj.resid_ss;
    let (tr, _) = hat_traces(&svd.d, lambda);
    rss / ((n - tr) * (n - tr))
}

/// `GCV(λ) = Σᵢ ((yᵢ − ŷᵢ)/(n − tr H_λ))²`.
pub fn gcv_value(svd: &SvdFactors, y: &DVector<f64>, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(gcv_projected(svd, &project(svd, y)?, lambda))
}

pub fn gcv_curve(svd: &SvdFactors, y: &DVector<f64>, lambdas: &[f64]) -> Result<Vec<f64>> {
    let proj = project(svd, y)?;
    lambdas
        .iter()
        .map(|&l| {
            check_lambda(l)?;
            Ok(gcv_projected(svd, &proj, l))
        })
        .collect()
}

/// Minimizes GCV over `log λ ∈ [log(1e-6·d₁²), log(1e8·d₁²)]`.
pub fn gcv_lambda(svd: &SvdFactors, y: &DVector<f64>) -> Result<EstimateReport> {
    let start = Instant::now();
    let proj = project(svd, y)?;
    let d1 = svd.d[0];
    if d1 <= 0.0 {
        return Err(input("GCV needs a design matrix with a nonzero singular value"));
    }
    let scale = (d1 * d1).ln();
    let bounds = OptBounds::scalar(scale + (1e-6_f64).ln(), scale + (1e8_f64).ln())?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let opt = maximize_1d(
        |t| {
            let g = gcv_projected(svd, &proj, t.exp());
            lo = lo.min(g);
            hi = hi.max(g);
            -g
        },
        &bounds,
    )?;
    let lambda = opt.argmax.exp();
    let mut report = EstimateReport::from_lambda(Method::Gcv, lambda);
    report.log_objective = Some(-opt.value);
    if hi - lo < 1e-12 * lo.abs().max(f64::MIN_POSITIVE) {
        report.flag("non_identifiable");
    }
    if opt.at_bound {
        report.flag("at_bound");
    }
    if !opt.converged {
        report.flag("not_converged");
    }
    Ok(report.timed(start))
}
