use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DVector;

use super::{EstimateReport, Method, VarianceComponents};
use crate::error::Result;
use crate::linalg::{GramEigen, RotatedResponse};
use crate::optim::{maximize_nd, OptBounds};

/// `log N(y; 0, τ²XXᵀ + σ²I)` evaluated in the eigenbasis of `XXᵀ`, O(n).
pub fn gaussian_log_marginal(rot: &RotatedResponse, sigma2: f64, tau2: f64) -> f64 {
    let mut acc = 0.0;
    for (e, c) in rot.eig.iter().zip(rot.coef.iter()) {
        let v = tau2 * e + sigma2;
        acc += v.ln() + c * c / v;
    }
    if rot.resid_dim > 0 {
        acc += rot.resid_dim as f64 * sigma2.ln() + rot.resid_ss / sigma2;
    }
    -0.5 * acc - 0.5 * rot.dim() as f64 * (2.0 * PI).ln()
}

/// Search box for `(log σ², log τ²)`, relative to the response scale so that
/// rescaling `y` shifts the box instead of changing its shape.
pub fn mml_bounds(rot: &RotatedResponse) -> (OptBounds, [f64; 2]) {
    let n = rot.dim() as f64;
    let ss = rot.total_ss() / n;
    let scale = if ss > 0.0 { ss } else { 1.0 };
    let mean_eig = (rot.eig.sum() / n).max(f64::MIN_POSITIVE);
    let ls = scale.ln();
    let lt = (scale / mean_eig).ln();
    let bounds = OptBounds::new(
        vec![ls + (1e-8_f64).ln(), lt + (1e-8_f64).ln()],
        vec![ls + (1e4_f64).ln(), lt + (1e4_f64).ln()],
    )
    .expect("bounds are ordered by construction");
    // half the total variance to each component
    (bounds, [ls + 0.5_f64.ln(), lt + 0.5_f64.ln()])
}

/// Maximum marginal likelihood for the random-effects ridge model.
pub fn mml_estimate(eigen: &GramEigen, y: &DVector<f64>) -> Result<EstimateReport> {
    let start = Instant::now();
    let rot = eigen.rotate(y)?;
    Ok(mml_from_rotated(&rot, eigen.p, Method::Mml)?.timed(start))
}

/// MML on an already-rotated response (shared with REML).
pub fn mml_from_rotated(rot: &RotatedResponse, p: usize, method: Method) -> Result<EstimateReport> {
    let (bounds, init) = mml_bounds(rot);
    let opt = maximize_nd(|x| gaussian_log_marginal(rot, x[0].exp(), x[1].exp()), &init, &bounds)?;
    let comps = VarianceComponents::new(opt.argmax[0].exp(), opt.argmax[1].exp(), p);
    let mut report = EstimateReport::from_components(method, comps);
    report.log_objective = Some(opt.value);
    if !opt.converged {
        report.flag("not_converged");
    }
    if opt.at_bound {
        report.flag("at_bound");
    }
    Ok(report)
}
