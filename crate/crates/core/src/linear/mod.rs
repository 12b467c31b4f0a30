//! Single-response linear-model estimators of `(σ², τ²)`, `λ = σ²/τ²` and
//! `h² = pτ²/(pτ² + σ²)`.

mod cv;
mod gcv;
mod hilmm;
mod mml;
mod mom;
mod sigma;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub(crate) use cv::assign_folds;
pub use cv::{kfold_cv_curve, kfold_cv_lambda, loo_cv_curve_explicit, press_curve, CvOptions, LAMBDA_GRID};
pub use gcv::{gcv_curve, gcv_lambda, gcv_value};
pub use hilmm::{hilmm_h2, hilmm_log_density, hilmm_objective};
pub use mml::{gaussian_log_marginal, mml_bounds, mml_estimate, mml_from_rotated};
pub use mom::mom_estimate;
pub use sigma::{basic_estimate, basic_sigma2, pcr_estimate, pcr_select_components, pcr_sigma2, DegreesOfFreedom};

/// Error variance `σ²` and per-variable effect variance `τ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    pub sigma2: f64,
    pub tau2: f64,
    /// Number of variables the effect variance is spread over.
    pub p: usize,
}

impl VarianceComponents {
    pub fn new(sigma2: f64, tau2: f64, p: usize) -> Self {
        Self { sigma2, tau2, p }
    }

    /// `σ²/τ²`, or `+∞` when `τ² = 0`.
    pub fn lambda(&self) -> f64 {
        convert(self).0
    }

    pub fn h2(&self) -> f64 {
        convert(self).1
    }
}

/// `(λ, h²)` from `(σ², τ²)`; `τ² = 0` maps to `(+∞, 0)`.
pub fn convert(c: &VarianceComponents) -> (f64, f64) {
    if c.tau2 == 0.0 {
        return (f64::INFINITY, 0.0);
    }
    let signal = c.p as f64 * c.tau2;
    let total = signal + c.sigma2;
    let h2 = if total == 0.0 { f64::NAN } else { signal / total };
    (c.sigma2 / c.tau2, h2)
}

/// Estimator identifiers, also used as the `method` column of exported tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mml,
    Mom,
    Basic,
    Pcr,
    Gcv,
    Cv,
    Hilmm,
    Reml,
    MmlMixed,
    BayesEb,
    BayesFixed,
    GlmMml,
    GlmCv,
}

impl Method {
    pub const ALL: [Method; 13] = [
        Method::Mml,
        Method::Mom,
        Method::Basic,
        Method::Pcr,
        Method::Gcv,
        Method::Cv,
        Method::Hilmm,
        Method::Reml,
        Method::MmlMixed,
        Method::BayesEb,
        Method::BayesFixed,
        Method::GlmMml,
        Method::GlmCv,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Mml => "mml",
            Method::Mom => "mom",
            Method::Basic => "basic",
            Method::Pcr => "pcr",
            Method::Gcv => "gcv",
            Method::Cv => "cv",
            Method::Hilmm => "hilmm",
            Method::Reml => "reml",
            Method::MmlMixed => "mml_mixed",
            Method::BayesEb => "bayes_eb",
            Method::BayesFixed => "bayes_fixed",
            Method::GlmMml => "glm_mml",
            Method::GlmCv => "glm_cv",
        }
    }

    pub fn valid_names() -> String {
        Self::ALL.iter().map(Method::as_str).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown estimator '{s}'; valid names: {}", Self::valid_names()))
    }
}

/// One estimator's output on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub method: Method,
    pub components: Option<VarianceComponents>,
    pub lambda: Option<f64>,
    pub h2: Option<f64>,
    pub converged: bool,
    pub log_objective: Option<f64>,
    pub wall_time_s: f64,
    /// Fixed-effect estimates (mixed models only).
    pub alpha_hat: Option<Vec<f64>>,
    /// Free-form diagnostic, e.g. `at_bound` or `negative_estimate`.
    pub note: Option<String>,
}

impl EstimateReport {
    pub fn from_components(method: Method, components: VarianceComponents) -> Self {
        let (lambda, h2) = convert(&components);
        Self {
            method,
            components: Some(components),
            lambda: Some(lambda),
            h2: Some(h2),
            converged: true,
            log_objective: None,
            wall_time_s: 0.0,
            alpha_hat: None,
            note: None,
        }
    }

    pub fn from_lambda(method: Method, lambda: f64) -> Self {
        Self {
            method,
            components: None,
            lambda: Some(lambda),
            h2: None,
            converged: true,
            log_objective: None,
            wall_time_s: 0.0,
            alpha_hat: None,
            note: None,
        }
    }

    pub fn sigma2(&self) -> Option<f64> {
        self.components.map(|c| c.sigma2)
    }

    pub fn tau2(&self) -> Option<f64> {
        self.components.map(|c| c.tau2)
    }

    pub(crate) fn add_note(&mut self, note: &str) {
        match &mut self.note {
            Some(existing) if !existing.split(';').any(|n| n == note) => {
                existing.push(';');
                existing.push_str(note);
            }
            Some(_) => {}
            None => self.note = Some(note.to_string()),
        }
    }

    /// Marks the estimate as unreliable without discarding it.
    pub(crate) fn flag(&mut self, note: &str) {
        self.converged = false;
        self.add_note(note);
    }

    pub(crate) fn timed(mut self, start: std::time::Instant) -> Self {
        self.wall_time_s = start.elapsed().as_secs_f64();
        self
    }
}
