//! Conjugate Bayesian ridge regression:
//! `y | β, σ² ~ N(Xβ, σ²I)`, `β | σ² ~ N(0, σ²/ν·I)`, `σ⁻² ~ Gamma(a, b)`.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DVector;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::{check_len, SvdFactors};
use crate::linear::{EstimateReport, Method, VarianceComponents};
use crate::optim::{maximize_1d, OptBounds};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesHyper {
    pub a: f64,
    pub b: f64,
    pub nu: f64,
}

impl Default for BayesHyper {
    fn default() -> Self {
        Self { a: 1.0, b: 0.001, nu: 1.0 }
    }
}

impl BayesHyper {
    pub fn new(a: f64, b: f64, nu: f64) -> Result<Self> {
        let h = Self { a, b, nu };
        h.validate()?;
        Ok(h)
    }

    pub fn with_nu(self, nu: f64) -> Result<Self> {
        Self::new(self.a, self.b, nu)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("a", self.a), ("b", self.b), ("nu", self.nu)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("hyperparameter {name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// Marginal posterior `σ⁻² | y ~ Gamma(a*, b*_ν)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorSigma {
    pub a_star: f64,
    pub b_star: f64,
    /// `√(b*/(a*−1))`, the square root of the posterior mean of `σ²`.
    pub sigma_mean_sqrt: f64,
}

impl PosteriorSigma {
    pub fn sigma2(&self) -> f64 {
        self.sigma_mean_sqrt * self.sigma_mean_sqrt
    }
}

/// `uₖᵀy` and `yᵀy`, shared by every `ν`.
struct Projected {
    coef: DVector<f64>,
    yty: f64,
    n: usize,
}

fn project(svd: &SvdFactors, y: &DVector<f64>) -> Result<Projected> {
    check_len(y, svd.nrows(), "response")?;
    Ok(Projected {
        coef: svd.rotate(y)?,
        yty: y.norm_squared(),
        n: y.len(),
    })
}

/// `b + ½(yᵀy − Σₖ (uₖᵀy)²dₖ²/(dₖ²+ν))` over the numerically nonzero `dₖ`.
fn b_star(svd: &SvdFactors, proj: &Projected, b: f64, nu: f64) -> f64 {
    let fit: f64 = (0..svd.rank)
        .map(|k| {
            let d2 = svd.d[k] * svd.d[k];
            proj.coef[k] * proj.coef[k] * d2 / (d2 + nu)
        })
        .sum();
    b + 0.5 * (proj.yty - fit)
}

fn posterior(svd: &SvdFactors, proj: &Projected, a: f64, b: f64, nu: f64) -> Result<PosteriorSigma> {
    let a_star = a + 0.5 * proj.n as f64;
    let bs = b_star(svd, proj, b, nu);
    if !(bs > 0.0) {
        return Err(Error::Numeric(format!("posterior rate b* = {bs:e} is not positive")));
    }
    if a_star <= 1.0 {
        return Err(Error::Domain(format!("posterior mean of sigma^2 needs a* > 1, got {a_star}")));
    }
    Ok(PosteriorSigma {
        a_star,
        b_star: bs,
        sigma_mean_sqrt: (bs / (a_star - 1.0)).sqrt(),
    })
}

fn log_ml_projected(svd: &SvdFactors, proj: &Projected, h: &BayesHyper) -> Result<f64> {
    let q = svd.q();
    let a_star = h.a + 0.5 * proj.n as f64;
    let bs = b_star(svd, proj, h.b, h.nu);
    if !(bs > 0.0) {
        return Err(Error::Numeric(format!("posterior rate b* = {bs:e} is not positive")));
    }
    let log_det: f64 = (0..q)
        .map(|k| {
            let d2 = if k < svd.rank { svd.d[k] * svd.d[k] } else { 0.0 };
            (d2 + h.nu).ln()
        })
        .sum();
    let c = h.a * h.b.ln() + ln_gamma(a_star) - ln_gamma(h.a) - 0.5 * proj.n as f64 * PI.ln();
    Ok(0.5 * q as f64 * h.nu.ln() - 0.5 * log_det - a_star * bs.ln() + c)
}

/// Log marginal likelihood `log π(y)` in SVD form, `O(q)` per `ν`.
///
/// The normalizing constant uses `π^{n/2}` in place of `(2π)^{n/2}`; it does
/// not depend on `ν`.
pub fn bayes_log_ml(svd: &SvdFactors, y: &DVector<f64>, hyper: &BayesHyper) -> Result<f64> {
    hyper.validate()?;
    log_ml_projected(svd, &project(svd, y)?, hyper)
}

pub fn bayes_fixed_nu_sigma(svd: &SvdFactors, y: &DVector<f64>, nu: f64, a: f64, b: f64) -> Result<PosteriorSigma> {
    let h = BayesHyper::new(a, b, nu)?;
    posterior(svd, &project(svd, y)?, h.a, h.b, h.nu)
}

#[derive(Debug, Clone)]
pub struct EbEstimate {
    pub nu: f64,
    pub posterior: PosteriorSigma,
    pub components: VarianceComponents,
    pub log_ml: f64,
    pub converged: bool,
    pub at_bound: bool,
}

impl EbEstimate {
    pub fn report(&self) -> EstimateReport {
        let mut r = EstimateReport::from_components(Method::BayesEb, self.components);
        r.log_objective = Some(self.log_ml);
        if self.at_bound {
            r.flag("at_bound");
        }
        if !self.converged {
            r.flag("not_converged");
        }
        r
    }
}

/// Empirical Bayes: maximizes `log π(y)` over `log ν ∈ log(d₁²) + [log 1e-10, log 1e8]`.
/// Reports `σ̂² = b*/(a*−1)` and `τ̂² = σ̂²/ν̂`, so that `λ̂ = ν̂`.
pub fn eb_estimate(svd: &SvdFactors, y: &DVector<f64>, a: f64, b: f64) -> Result<EbEstimate> {
    let base = BayesHyper::new(a, b, 1.0)?;
    let proj = project(svd, y)?;
    let d1 = svd.d.iter().next().copied().unwrap_or(0.0);
    let scale = if d1 > 0.0 { 2.0 * d1.ln() } else { 0.0 };
    let bounds = OptBounds::scalar(scale + (1e-10_f64).ln(), scale + (1e8_f64).ln())?;
    let opt = maximize_1d(
        |t| log_ml_projected(svd, &proj, &BayesHyper { nu: t.exp(), ..base }).unwrap_or(f64::NEG_INFINITY),
        &bounds,
    )?;
    let nu = opt.argmax.exp();
    let post = posterior(svd, &proj, a, b, nu)?;
    let sigma2 = post.sigma2();
    Ok(EbEstimate {
        nu,
        posterior: post,
        components: VarianceComponents::new(sigma2, sigma2 / nu, svd.ncols()),
        log_ml: opt.value,
        converged: opt.converged,
        at_bound: opt.at_bound,
    })
}

pub fn eb_report(svd: &SvdFactors, y: &DVector<f64>, a: f64, b: f64) -> Result<EstimateReport> {
    let start = Instant::now();
    Ok(eb_estimate(svd, y, a, b)?.report().timed(start))
}

/// Fixed-`ν` posterior mapped to components: `σ̂² = b*/(a*−1)`, `τ̂² = σ̂²/ν`.
pub fn bayes_fixed_report(svd: &SvdFactors, y: &DVector<f64>, nu: f64, a: f64, b: f64) -> Result<EstimateReport> {
    let start = Instant::now();
    let post = bayes_fixed_nu_sigma(svd, y, nu, a, b)?;
    let sigma2 = post.sigma2();
    let mut r = EstimateReport::from_components(Method::BayesFixed, VarianceComponents::new(sigma2, sigma2 / nu, svd.ncols()));
    let h = BayesHyper::new(a, b, nu)?;
    r.log_objective = Some(bayes_log_ml(svd, y, &h)?);
    Ok(r.timed(start))
}
