//! Marginal likelihood of ridge GLMs through the `n`-dimensional latent
//! predictor `βˣ = Xβ ~ N(0, XXᵀ/λ)` and a Laplace approximation at its mode.
//!
//! All latent computations happen in the `r`-dimensional eigenbasis of `XXᵀ`,
//! whitened so that `βˣ = U·diag(√(e/λ))·z` with `z ~ N(0, I_r)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{input, Error, Result};
use crate::linalg::{check_len, DesignMatrix, GramEigen, SvdFactors};
use crate::linear::{EstimateReport, Method, LAMBDA_GRID};
use crate::optim::{maximize_1d, OptBounds};

const MAX_NEWTON: usize = 100;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GlmFamily {
    /// Identity link, unit dispersion.
    Gaussian,
    /// Log link.
    Poisson,
    /// Logit link with `n_trials` trials per observation.
    Binomial { n_trials: u32 },
}

fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl GlmFamily {
    pub fn binomial(n_trials: u32) -> Result<Self> {
        if n_trials == 0 {
            return Err(input("binomial trial count must be at least 1"));
        }
        Ok(Self::Binomial { n_trials })
    }

    /// Per-observation log-likelihood, normalizing constants included.
    pub fn log_lik(&self, y: f64, eta: f64) -> f64 {
        match *self {
            Self::Gaussian => -0.5 * (2.0 * PI).ln() - 0.5 * (y - eta) * (y - eta),
            Self::Poisson => y * eta - eta.exp() - ln_gamma(y + 1.0),
            Self::Binomial { n_trials } => {
                let n = n_trials as f64;
                ln_gamma(n + 1.0) - ln_gamma(y + 1.0) - ln_gamma(n - y + 1.0) + y * eta - n * log1p_exp(eta)
            }
        }
    }

    /// `∂ℓ/∂η`
    pub fn score(&self, y: f64, eta: f64) -> f64 {
        match *self {
            Self::Gaussian => y - eta,
            Self::Poisson => y - eta.exp(),
            Self::Binomial { n_trials } => y - n_trials as f64 * logistic(eta),
        }
    }

    /// `−∂²ℓ/∂η²`
    pub fn weight(&self, eta: f64) -> f64 {
        match *self {
            Self::Gaussian => 1.0,
            Self::Poisson => eta.exp(),
            Self::Binomial { n_trials } => {
                let m = logistic(eta);
                n_trials as f64 * m * (1.0 - m)
            }
        }
    }

    pub fn mean(&self, eta: f64) -> f64 {
        match *self {
            Self::Gaussian => eta,
            Self::Poisson => eta.exp(),
            Self::Binomial { n_trials } => n_trials as f64 * logistic(eta),
        }
    }

    pub fn validate(&self, y: &DVector<f64>) -> Result<()> {
        for (i, &v) in y.iter().enumerate() {
            let ok = match *self {
                Self::Gaussian => v.is_finite(),
                Self::Poisson => v >= 0.0 && v.fract() == 0.0 && v.is_finite(),
                Self::Binomial { n_trials } => v >= 0.0 && v <= n_trials as f64 && v.fract() == 0.0,
            };
            if !ok {
                return Err(input(format!("response {i} = {v} is not valid for the {self} family")));
            }
        }
        Ok(())
    }

    pub fn total_log_lik(&self, y: &DVector<f64>, eta: &DVector<f64>) -> f64 {
        y.iter().zip(eta.iter()).map(|(&y, &e)| self.log_lik(y, e)).sum()
    }
}

impl fmt::Display for GlmFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Gaussian => f.write_str("gaussian"),
            Self::Poisson => f.write_str("poisson"),
            Self::Binomial { n_trials } => write!(f, "binomial:{n_trials}"),
        }
    }
}

impl FromStr for GlmFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gaussian" => Ok(Self::Gaussian),
            "poisson" => Ok(Self::Poisson),
            other => match other.strip_prefix("binomial:") {
                Some(n) => {
                    let n: u32 = n
                        .parse()
                        .map_err(|_| input(format!("binomial trial count '{n}' is not a positive integer")))?;
                    Self::binomial(n)
                }
                None => Err(input(format!("unknown family '{other}'; expected gaussian, poisson or binomial:N"))),
            },
        }
    }
}

/// `N(0, XXᵀ/λ)` on the column space of `XXᵀ`.
#[derive(Debug, Clone)]
pub struct LatentGaussianPrior {
    /// `n × r` eigenvectors of `XXᵀ` with nonzero eigenvalue.
    pub u: DMatrix<f64>,
    /// The `r` nonzero eigenvalues `dₖ²` of `XXᵀ`.
    pub eig: DVector<f64>,
    pub lambda: f64,
}

impl LatentGaussianPrior {
    pub fn from_svd(svd: &SvdFactors, lambda: f64) -> Result<Self> {
        Self::from_parts(svd.u.columns(0, svd.rank).into_owned(), svd.d2().rows(0, svd.rank).into_owned(), lambda)
    }

    pub fn from_eigen(eigen: &GramEigen, lambda: f64) -> Result<Self> {
        Self::from_parts(
            eigen.u.columns(0, eigen.rank).into_owned(),
            eigen.eig.rows(0, eigen.rank).into_owned(),
            lambda,
        )
    }

    fn from_parts(u: DMatrix<f64>, eig: DVector<f64>, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!("penalty must be positive and finite, got {lambda}")));
        }
        if eig.is_empty() {
            return Err(Error::Rank("design has no nonzero singular value".into()));
        }
        Ok(Self { u, eig, lambda })
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::from_parts(self.u.clone(), self.eig.clone(), lambda)
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn rank(&self) -> usize {
        self.eig.len()
    }

    /// `√(e/λ)`: prior standard deviations along the eigenvectors.
    fn scales(&self) -> DVector<f64> {
        self.eig.map(|e| (e / self.lambda).sqrt())
    }

    /// Whitened basis `B = U·diag(√(e/λ))`, so `βˣ = Bz`.
    fn basis(&self) -> DMatrix<f64> {
        let s = self.scales();
        let mut b = self.u.clone();
        for (k, mut col) in b.column_iter_mut().enumerate() {
            col *= s[k];
        }
        b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GlmOptions {
    /// Adds an unpenalized intercept to the latent predictor; it is profiled
    /// (maximized) rather than integrated.
    pub intercept: bool,
}

#[derive(Debug, Clone)]
pub struct LaplaceFit {
    /// Latent mode `β̂ˣ` (intercept included when fitted).
    pub beta_x_hat: DVector<f64>,
    /// Whitened coordinates `ẑ` of the penalized part.
    pub z: DVector<f64>,
    pub intercept: f64,
    /// `log h(β̂ˣ)` up to the prior normalizer: `ℓ(y; β̂ˣ) − ½‖ẑ‖²`.
    pub objective: f64,
    /// Objective after each accepted Newton step, starting at the initial point.
    pub objective_path: Vec<f64>,
    pub log_ml: f64,
    pub newton_iters: usize,
    pub converged: bool,
    pub gradient_norm: f64,
}

struct NewtonState {
    z: DVector<f64>,
    c: f64,
    eta: DVector<f64>,
    obj: f64,
}

fn state(y: &DVector<f64>, family: &GlmFamily, basis: &DMatrix<f64>, z: DVector<f64>, c: f64) -> NewtonState {
    let eta = basis * &z + DVector::from_element(y.len(), c);
    let obj = family.total_log_lik(y, &eta) - 0.5 * z.norm_squared();
    NewtonState { z, c, eta, obj }
}

/// Gradient and negative Hessian of the whitened objective; the intercept,
/// when present, is the last coordinate.
fn derivatives(
    y: &DVector<f64>,
    family: &GlmFamily,
    basis: &DMatrix<f64>,
    s: &NewtonState,
    intercept: bool,
) -> (DVector<f64>, DMatrix<f64>) {
    let r = basis.ncols();
    let dim = r + intercept as usize;
    let score = DVector::from_iterator(y.len(), y.iter().zip(s.eta.iter()).map(|(&y, &e)| family.score(y, e)));
    let w = s.eta.map(|e| family.weight(e));
    let mut grad = DVector::zeros(dim);
    grad.rows_mut(0, r).copy_from(&(basis.tr_mul(&score) - &s.z));
    let mut wb = basis.clone();
    for (i, mut row) in wb.row_iter_mut().enumerate() {
        row *= w[i];
    }
    let mut hess = DMatrix::zeros(dim, dim);
    let mut block = basis.tr_mul(&wb);
    for k in 0..r {
        block[(k, k)] += 1.0;
    }
    hess.view_mut((0, 0), (r, r)).copy_from(&block);
    if intercept {
        grad[r] = score.sum();
        let cross = wb.row_sum().transpose();
        hess.view_mut((0, r), (r, 1)).copy_from(&cross);
        hess.view_mut((r, 0), (1, r)).copy_from(&cross.transpose());
        hess[(r, r)] = w.sum();
    }
    (grad, hess)
}

/// Penalized Newton for the latent mode with step-halving.
///
/// `warm_start` is a previous `β̂ˣ` (any `λ`); it is projected onto the prior support.
pub fn fit_latent_mode(
    y: &DVector<f64>,
    prior: &LatentGaussianPrior,
    family: &GlmFamily,
    warm_start: Option<&DVector<f64>>,
    options: GlmOptions,
) -> Result<LaplaceFit> {
    check_len(y, prior.n(), "response")?;
    family.validate(y)?;
    let basis = prior.basis();
    let scales = prior.scales();
    let r = prior.rank();

    let (z0, c0) = match warm_start {
        Some(b) => {
            check_len(b, prior.n(), "warm start")?;
            let c = if options.intercept { b.mean() } else { 0.0 };
            let centered = b - DVector::from_element(b.len(), c);
            let w = prior.u.tr_mul(&centered);
            (w.component_div(&scales), c)
        }
        None => (DVector::zeros(r), 0.0),
    };
    let mut s = state(y, family, &basis, z0, c0);
    if !s.obj.is_finite() {
        s = state(y, family, &basis, DVector::zeros(r), 0.0);
    }
    let mut path = vec![s.obj];
    let mut converged = false;
    let mut iters = 0;
    let (mut grad, mut hess) = derivatives(y, family, &basis, &s, options.intercept);

    while iters < MAX_NEWTON {
        if grad.norm() <= 1e-9 * (1.0 + s.obj.abs()) {
            converged = true;
            break;
        }
        let chol = hess
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numeric("latent Hessian is not positive definite".into()))?;
        let step = chol.solve(&grad);
        // half the Newton decrement bounds the remaining gain near the mode
        let small = 0.5 * grad.dot(&step) <= 1e-12 * (1.0 + s.obj.abs());
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let dz = step.rows(0, r) * t;
            let dc = if options.intercept { step[r] * t } else { 0.0 };
            let cand = state(y, family, &basis, &s.z + dz, s.c + dc);
            if cand.obj.is_finite() && cand.obj >= s.obj {
                accepted = Some(cand);
                break;
            }
            t *= 0.5;
        }
        iters += 1;
        let Some(next) = accepted else {
            converged = small;
            break;
        };
        let rel = (next.obj - s.obj).abs() / (1.0 + s.obj.abs());
        s = next;
        path.push(s.obj);
        (grad, hess) = derivatives(y, family, &basis, &s, options.intercept);
        if small || (rel < 1e-10 && t == 1.0) {
            converged = true;
            break;
        }
    }

    let chol = hess
        .view((0, 0), (r, r))
        .into_owned()
        .cholesky()
        .ok_or_else(|| Error::Numeric("latent Hessian is not positive definite".into()))?;
    let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok(LaplaceFit {
        beta_x_hat: s.eta.clone(),
        log_ml: s.obj - 0.5 * log_det,
        objective: s.obj,
        objective_path: path,
        gradient_norm: grad.norm(),
        intercept: s.c,
        z: s.z,
        newton_iters: iters,
        converged,
    })
}

/// Laplace approximation of `log ML(λ) = log ∫ L(y; βˣ)·N(βˣ; 0, XXᵀ/λ) dβˣ`.
pub fn laplace_log_ml(y: &DVector<f64>, prior: &LatentGaussianPrior, family: &GlmFamily) -> Result<LaplaceFit> {
    fit_latent_mode(y, prior, family, None, GlmOptions::default())
}

const GLM_LAMBDA_LO: f64 = 1e-4;
const GLM_LAMBDA_HI: f64 = 1e8;

/// MML choice of `λ` by maximizing the Laplace log marginal likelihood over
/// `log λ ∈ [log 1e-4, log 1e8]`, warm-starting each mode from the previous one.
pub fn glm_mml_lambda(x: &DesignMatrix, y: &DVector<f64>, family: &GlmFamily) -> Result<EstimateReport> {
    glm_mml_lambda_with(x, y, family, GlmOptions::default())
}

pub fn glm_mml_lambda_with(x: &DesignMatrix, y: &DVector<f64>, family: &GlmFamily, options: GlmOptions) -> Result<EstimateReport> {
    let start = Instant::now();
    check_len(y, x.nrows(), "response")?;
    family.validate(y)?;
    let prior = LatentGaussianPrior::from_eigen(&x.gram_eigen()?, 1.0)?;
    let mut warm: Option<DVector<f64>> = None;
    let mut inner_failures = 0usize;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let bounds = OptBounds::scalar(GLM_LAMBDA_LO.ln(), GLM_LAMBDA_HI.ln())?;
    let opt = maximize_1d(
        |t| {
            let Ok(pr) = prior.with_lambda(t.exp()) else { return f64::NAN };
            match fit_latent_mode(y, &pr, family, warm.as_ref(), options) {
                Ok(fit) => {
                    if !fit.converged {
                        inner_failures += 1;
                    }
                    lo = lo.min(fit.log_ml);
                    hi = hi.max(fit.log_ml);
                    warm = Some(fit.beta_x_hat);
                    fit.log_ml
                }
                Err(_) => {
                    inner_failures += 1;
                    f64::NAN
                }
            }
        },
        &bounds,
    )?;
    let lambda = opt.argmax.exp();
    let final_fit = fit_latent_mode(y, &prior.with_lambda(lambda)?, family, None, options)?;

    let mut report = EstimateReport::from_lambda(Method::GlmMml, lambda);
    report.log_objective = Some(final_fit.log_ml);
    if hi - lo < 1e-12 * lo.abs().max(1.0) {
        report.flag("non_identifiable");
    }
    if opt.at_bound {
        report.flag("at_bound");
    }
    if !opt.converged {
        report.flag("not_converged");
    }
    if inner_failures > 0 || !final_fit.converged {
        report.flag("inner_not_converged");
    }
    Ok(report.timed(start))
}

/// Out-of-sample linear predictor for test rows from a latent fit on the training
/// rows: `η_test = X_test·X_trainᵀ·(X_train X_trainᵀ)⁺·β̂ˣ_train`.
fn kernel_predict(x_test: &DMatrix<f64>, x_train: &DMatrix<f64>, prior: &LatentGaussianPrior, fit: &LaplaceFit) -> DVector<f64> {
    let centered = &fit.beta_x_hat - DVector::from_element(fit.beta_x_hat.len(), fit.intercept);
    let w = prior.u.tr_mul(&centered).component_div(&prior.eig);
    let beta = x_train.tr_mul(&(&prior.u * w));
    x_test * beta + DVector::from_element(x_test.nrows(), fit.intercept)
}

/// `−2·Σ ℓ(yᵢ; η̂ᵢ)` summed over held-out folds for each `λ`.
pub fn glm_cv_curve(
    x: &DesignMatrix,
    y: &DVector<f64>,
    family: &GlmFamily,
    folds: &[Vec<usize>],
    lambdas: &[f64],
) -> Result<Vec<f64>> {
    check_len(y, x.nrows(), "response")?;
    family.validate(y)?;
    let n = x.nrows();
    let mut total = vec![0.0; lambdas.len()];
    for test in folds {
        let mut is_test = vec![false; n];
        for &i in test {
            is_test[i] = true;
        }
        let train: Vec<usize> = (0..n).filter(|&i| !is_test[i]).collect();
        let x_train = x.select_rows(&train);
        let x_test = x.select_rows(test);
        let y_train = DVector::from_iterator(train.len(), train.iter().map(|&i| y[i]));
        let y_test = DVector::from_iterator(test.len(), test.iter().map(|&i| y[i]));
        let base = LatentGaussianPrior::from_eigen(&GramEigen::from_gram(&(&x_train * x_train.transpose()), x.ncols())?, 1.0)?;
        let mut warm: Option<DVector<f64>> = None;
        for (j, &l) in lambdas.iter().enumerate() {
            let prior = base.with_lambda(l)?;
            let fit = fit_latent_mode(&y_train, &prior, family, warm.as_ref(), GlmOptions::default())?;
            let eta = kernel_predict(&x_test, &x_train, &prior, &fit);
            total[j] -= 2.0 * family.total_log_lik(&y_test, &eta);
            warm = Some(fit.beta_x_hat);
        }
    }
    Ok(total)
}

/// K-fold predictive-deviance CV over 25 log-spaced `λ` from the shared grid.
pub fn glm_cv_lambda(x: &DesignMatrix, y: &DVector<f64>, family: &GlmFamily, k: usize, seed: u64) -> Result<EstimateReport> {
    let start = Instant::now();
    let folds = crate::linear::assign_folds(x.nrows(), k, seed)?;
    let grid: Vec<f64> = LAMBDA_GRID.iter().step_by(4).copied().collect();
    let dev = glm_cv_curve(x, y, family, &folds, &grid)?;
    let best = (0..grid.len()).fold(0, |b, i| if dev[i] < dev[b] { i } else { b });
    let mut report = EstimateReport::from_lambda(Method::GlmCv, grid[best]);
    report.log_objective = Some(dev[best]);
    if best == 0 || best == grid.len() - 1 {
        report.flag("at_bound");
    }
    Ok(report.timed(start))
}
