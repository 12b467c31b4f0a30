use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dispatch::{EstimatorSettings, ResponseModel};
use crate::error::{Error, Result};
use crate::glm::GlmFamily;
use crate::linear::Method;
use crate::report::Truth;

pub const SCHEMA_VERSION: u32 = 1;

/// Relative slack allowed between a declared `tau2` and the variance implied by
/// Laplace or uniform parameters.
pub const VARIANCE_SLACK: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignModel {
    IidNormal,
    /// Unit-variance rows with within-block correlation `rho`; the last block may be short.
    BlockCorr { rho: f64, block_size: usize },
    /// Fixed matrix read from CSV or binary; only effects and noise are redrawn.
    UserMatrix { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EffectPrior {
    Gaussian { tau2: f64 },
    SpikeSlab { p0: f64, tau0_2: f64 },
    Laplace { b: f64, tau2: Option<f64> },
    /// Uniform on `[−a, a]`.
    Uniform { a: f64, tau2: Option<f64> },
    /// The same coefficients in every replicate.
    Fixed { values: Vec<f64> },
}

impl EffectPrior {
    /// `Var(βⱼ)` implied by the parameters (mean square for fixed effects).
    pub fn implied_variance(&self) -> f64 {
        match self {
            Self::Gaussian { tau2 } => *tau2,
            Self::SpikeSlab { p0, tau0_2 } => (1.0 - p0) * tau0_2,
            Self::Laplace { b, .. } => 2.0 * b * b,
            Self::Uniform { a, .. } => a * a / 3.0,
            Self::Fixed { values } => values.iter().map(|v| v * v).sum::<f64>() / values.len().max(1) as f64,
        }
    }

    /// The declared `τ²` when one is given, otherwise the implied one.
    pub fn tau2(&self) -> f64 {
        match self {
            Self::Laplace { tau2: Some(t), .. } | Self::Uniform { tau2: Some(t), .. } => *t,
            _ => self.implied_variance(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorModel {
    Gaussian { sigma2: f64 },
    /// `√(σ²/2)·t₄`, which has variance `σ²`.
    ScaledT4 { sigma2: f64 },
}

impl ErrorModel {
    pub fn sigma2(&self) -> f64 {
        match *self {
            Self::Gaussian { sigma2 } | Self::ScaledT4 { sigma2 } => sigma2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResponseKind {
    #[default]
    Linear,
    /// Adds `X_f α` with `m` iid N(0,1) fixed-effect columns and spike-and-slab `α`.
    Mixed { p0f: f64, tau0f_2: f64 },
    Poisson,
    Binomial { n_trials: u32 },
}

impl ResponseKind {
    pub fn model(&self) -> ResponseModel {
        match *self {
            Self::Linear | Self::Mixed { .. } => ResponseModel::Linear,
            Self::Poisson => ResponseModel::Glm(GlmFamily::Poisson),
            Self::Binomial { n_trials } => ResponseModel::Glm(GlmFamily::Binomial { n_trials }),
        }
    }

    pub fn is_glm(&self) -> bool {
        matches!(self, Self::Poisson | Self::Binomial { .. })
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub schema_version: u32,
    pub n: usize,
    pub p: usize,
    #[serde(default)]
    pub m: usize,
    pub design: DesignModel,
    pub effects: EffectPrior,
    #[serde(default)]
    pub errors: Option<ErrorModel>,
    #[serde(default)]
    pub response: ResponseKind,
    pub replicates: usize,
    pub base_seed: u64,
    pub estimators: Vec<String>,
    /// Standardize the columns of every simulated design.
    #[serde(default = "default_true")]
    pub standardize: bool,
    /// Keep measured wall times in the output; off by default so reruns are byte-identical.
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default)]
    pub settings: EstimatorSettings,
}

impl SimConfig {
    /// Independent-X standard setting: `n = 100, p = 1000, τ² = 0.01, σ² = 10`.
    pub fn standard() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            n: 100,
            p: 1000,
            m: 0,
            design: DesignModel::IidNormal,
            effects: EffectPrior::Gaussian { tau2: 0.01 },
            errors: Some(ErrorModel::Gaussian { sigma2: 10.0 }),
            response: ResponseKind::Linear,
            replicates: 100,
            base_seed: 1,
            estimators: ["mml", "mom", "basic", "pcr", "gcv", "cv", "hilmm"].map(String::from).to_vec(),
            standardize: true,
            record_timing: false,
            settings: EstimatorSettings::default(),
        }
    }

    /// Parses JSON or TOML (by extension, falling back to content sniffing) and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::File {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let is_json = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => true,
            Some("toml") => false,
            _ => text.trim_start().starts_with('{'),
        };
        let mut cfg = Self::parse(&text, is_json).map_err(|message| Error::File {
            path: path.to_path_buf(),
            message,
        })?;
        if let DesignModel::UserMatrix { path: m } = &mut cfg.design {
            if m.is_relative() {
                if let Some(dir) = path.parent() {
                    *m = dir.join(&*m);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str, json: bool) -> std::result::Result<Self, String> {
        if json {
            serde_json::from_str(text).map_err(|e| e.to_string())
        } else {
            toml::from_str(text).map_err(|e| e.to_string())
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn methods(&self) -> Result<Vec<Method>> {
        let model = self.response.model();
        let mut out = Vec::new();
        for name in &self.estimators {
            let m: Method = name.parse().map_err(|e: String| Error::Config(vec![e]))?;
            let routed = model.route(m).map_err(|e| Error::Config(vec![e.to_string()]))?;
            if !out.contains(&routed) {
                out.push(routed);
            }
        }
        Ok(out)
    }

    pub fn truth(&self) -> Truth {
        let tau2 = self.effects.tau2();
        if self.response.is_glm() {
            return Truth {
                sigma2: None,
                tau2: Some(tau2),
                lambda: Some(1.0 / tau2),
                h2: None,
            };
        }
        let sigma2 = self.errors.map(|e| e.sigma2());
        let signal = self.p as f64 * tau2;
        Truth {
            sigma2,
            tau2: Some(tau2),
            lambda: sigma2.map(|s| s / tau2),
            h2: sigma2.map(|s| signal / (signal + s)),
        }
    }

    /// Collects every semantic violation instead of stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut v: Vec<String> = Vec::new();
        let mut check = |ok: bool, msg: String| {
            if !ok {
                v.push(msg);
            }
        };
        check(
            self.schema_version == SCHEMA_VERSION,
            format!("schema_version must be {SCHEMA_VERSION}, got {}", self.schema_version),
        );
        check(self.n >= 2, format!("n must be at least 2, got {}", self.n));
        check(self.p >= 1, format!("p must be at least 1, got {}", self.p));
        check(self.replicates >= 1, "replicates must be at least 1".into());
        check(self.m < self.n.max(1), format!("m = {} must be smaller than n = {}", self.m, self.n));

        match &self.design {
            DesignModel::IidNormal => {}
            DesignModel::BlockCorr { rho, block_size } => {
                check(
                    *block_size >= 1 && *block_size <= self.p,
                    format!("design.block_size must be in 1..=p, got {block_size}"),
                );
                let lo = if *block_size > 1 { -1.0 / (*block_size as f64 - 1.0) } else { -1.0 };
                check(
                    rho.is_finite() && *rho > lo && *rho < 1.0,
                    format!("design.rho = {rho} outside ({lo}, 1): block correlation matrix would not be positive definite"),
                );
            }
            DesignModel::UserMatrix { path } => {
                check(!path.as_os_str().is_empty(), "design.path must not be empty".into());
            }
        }

        let positive = |x: f64| x > 0.0 && x.is_finite();
        match &self.effects {
            EffectPrior::Gaussian { tau2 } => check(positive(*tau2), format!("effects.tau2 must be positive, got {tau2}")),
            EffectPrior::SpikeSlab { p0, tau0_2 } => {
                check((0.0..1.0).contains(p0), format!("effects.p0 must be in [0, 1), got {p0}"));
                check(positive(*tau0_2), format!("effects.tau0_2 must be positive, got {tau0_2}"));
            }
            EffectPrior::Laplace { b, tau2 } | EffectPrior::Uniform { a: b, tau2 } => {
                let (name, formula) = match self.effects {
                    EffectPrior::Laplace { .. } => ("b", "2b^2"),
                    _ => ("a", "a^2/3"),
                };
                check(positive(*b), format!("effects.{name} must be positive, got {b}"));
                if let Some(t) = tau2 {
                    let implied = self.effects.implied_variance();
                    check(positive(*t), format!("effects.tau2 must be positive, got {t}"));
                    check(
                        (implied - t).abs() <= VARIANCE_SLACK * t,
                        format!("effects: {formula} = {implied} differs from declared tau2 = {t} by more than {}%", VARIANCE_SLACK * 100.0),
                    );
                }
            }
            EffectPrior::Fixed { values } => {
                check(
                    values.len() == self.p,
                    format!("effects.values has {} entries, expected p = {}", values.len(), self.p),
                );
                check(values.iter().all(|x| x.is_finite()), "effects.values must be finite".into());
                check(values.iter().any(|x| *x != 0.0), "effects.values must not be all zero".into());
            }
        }

        match (&self.response, &self.errors) {
            (ResponseKind::Linear | ResponseKind::Mixed { .. }, None) => {
                v.push("errors must be given for linear and mixed responses".into())
            }
            (ResponseKind::Linear | ResponseKind::Mixed { .. }, Some(e)) => {
                let s = e.sigma2();
                if !positive(s) {
                    v.push(format!("errors.sigma2 must be positive, got {s}"));
                }
            }
            (r, Some(_)) => v.push(format!("errors has no effect for a {} response; remove it", r.model_name())),
            (_, None) => {}
        }
        match self.response {
            ResponseKind::Mixed { p0f, tau0f_2 } => {
                if !(0.0..1.0).contains(&p0f) {
                    v.push(format!("response.p0f must be in [0, 1), got {p0f}"));
                }
                if !positive(tau0f_2) {
                    v.push(format!("response.tau0f_2 must be positive, got {tau0f_2}"));
                }
                if self.m == 0 {
                    v.push("mixed response needs m >= 1 fixed effects".into());
                }
            }
            ResponseKind::Binomial { n_trials } if n_trials == 0 => v.push("response.n_trials must be at least 1".into()),
            _ if self.m > 0 => v.push(format!("m = {} fixed effects need a mixed response", self.m)),
            _ => {}
        }

        if self.estimators.is_empty() {
            v.push("estimators must list at least one estimator".into());
        }
        let model = self.response.model();
        for name in &self.estimators {
            match name.parse::<Method>() {
                Err(e) => v.push(format!("estimators: {e}")),
                Ok(m) => {
                    if let Err(e) = model.route(m) {
                        v.push(format!("estimators: {}", e.to_string().trim_start_matches("invalid input: ")));
                    }
                }
            }
        }

        let s = &self.settings;
        if s.k_folds < 2 || s.k_folds > self.n {
            v.push(format!("settings.k_folds must be in 2..=n, got {}", s.k_folds));
        }
        for (name, x) in [("bayes_a", s.bayes_a), ("bayes_b", s.bayes_b), ("bayes_fixed_nu", s.bayes_fixed_nu)] {
            if !positive(x) {
                v.push(format!("settings.{name} must be positive, got {x}"));
            }
        }

        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }
}

impl ResponseKind {
    fn model_name(&self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Mixed { .. } => "mixed",
            Self::Poisson => "poisson",
            Self::Binomial { .. } => "binomial",
        }
    }
}
