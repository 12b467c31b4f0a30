//! Direct maximum-likelihood estimation of heritability.
//!
//! With `R = XXᵀ/p = Q·diag(ℓ)·Qᵀ` and `ỹ = Qᵀy`, the model
//! `y ~ N(0, σ*²(h²R + (1−h²)I))` profiles to a one-dimensional criterion in `h²`.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DVector;

use super::{EstimateReport, Method, VarianceComponents};
use crate::error::Result;
use crate::linalg::{GramEigen, RotatedResponse};
use crate::optim::{maximize_1d, OptBounds};

const H2_MIN: f64 = 1e-6;

/// Iterates `(ℓᵢ, ỹᵢ²)` over all `n` eigen-directions, including the zero
/// eigenvalues of the complement.
fn terms(rot: &RotatedResponse, p: usize) -> impl Iterator<Item = (f64, f64)> + '_ {
    let pf = p as f64;
    rot.eig
        .iter()
        .zip(rot.coef.iter())
        .map(move |(e, c)| (e / pf, c * c))
        .chain((rot.resid_dim > 0).then_some((0.0, rot.resid_ss)))
}

/// `σ*²(h²) = n⁻¹ Σ ỹᵢ²/(h²(ℓᵢ−1)+1)`; the complement enters through its total.
fn sigma_star2(rot: &RotatedResponse, p: usize, h2: f64) -> f64 {
    terms(rot, p).map(|(l, y2)| y2 / (h2 * (l - 1.0) + 1.0)).sum::<f64>() / rot.dim() as f64
}

fn mean_log_scale(rot: &RotatedResponse, p: usize, h2: f64) -> f64 {
    let mut acc: f64 = rot
        .eig
        .iter()
        .map(|e| (h2 * (e / p as f64 - 1.0) + 1.0).ln())
        .sum();
    acc += rot.resid_dim as f64 * (1.0 - h2).ln();
    acc / rot.dim() as f64
}

/// `−log(n⁻¹ Σ ỹᵢ²/(h²(ℓᵢ−1)+1)) − n⁻¹ Σ log(h²(ℓᵢ−1)+1)`.
pub fn hilmm_objective(rot: &RotatedResponse, p: usize, h2: f64) -> f64 {
    -sigma_star2(rot, p, h2).ln() - mean_log_scale(rot, p, h2)
}

/// `log N(y; 0, h²σ*²R + (1−h²)σ*²I)`.
pub fn hilmm_log_density(rot: &RotatedResponse, p: usize, h2: f64, sigma_star2: f64) -> f64 {
    let n = rot.dim() as f64;
    let mut acc = 0.0;
    for (e, c) in rot.eig.iter().zip(rot.coef.iter()) {
        let v = sigma_star2 * (h2 * (e / p as f64 - 1.0) + 1.0);
        acc += v.ln() + c * c / v;
    }
    if rot.resid_dim > 0 {
        let v = sigma_star2 * (1.0 - h2);
        acc += rot.resid_dim as f64 * v.ln() + rot.resid_ss / v;
    }
    -0.5 * acc - 0.5 * n * (2.0 * PI).ln()
}

fn logit(x: f64) -> f64 {
    (x / (1.0 - x)).ln()
}

fn expit(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

pub fn hilmm_h2(eigen: &GramEigen, y: &DVector<f64>) -> Result<EstimateReport> {
    let start = Instant::now();
    let rot = eigen.rotate(y)?;
    let p = eigen.p;
    let bounds = OptBounds::scalar(logit(H2_MIN), logit(1.0 - H2_MIN))?;
    let opt = maximize_1d(|t| hilmm_objective(&rot, p, expit(t)), &bounds)?;
    let h2 = expit(opt.argmax);
    let s2 = sigma_star2(&rot, p, h2);
    let comps = VarianceComponents::new((1.0 - h2) * s2, h2 * s2 / p as f64, p);
    let mut report = EstimateReport::from_components(Method::Hilmm, comps);
    report.h2 = Some(h2);
    report.log_objective = Some(opt.value);
    if opt.at_bound {
        report.flag("at_bound");
    }
    if !opt.converged {
        report.flag("not_converged");
    }
    Ok(report.timed(start))
}
