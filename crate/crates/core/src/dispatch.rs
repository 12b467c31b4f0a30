//! Runs any estimator by name on one dataset, sharing decompositions between them.

use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bayes::{bayes_fixed_report, eb_report};
use crate::error::{input, Error, Result};
use crate::glm::{glm_cv_lambda, glm_mml_lambda, GlmFamily};
use crate::linalg::{check_len, DesignMatrix, GramEigen, SvdFactors};
use crate::linear::{
    basic_estimate, gcv_lambda, hilmm_h2, kfold_cv_lambda, mml_estimate, mom_estimate, pcr_estimate, EstimateReport,
    Method,
};
use crate::mixed::{mml_mixed_estimate, reml_estimate, MixedDesign};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSettings {
    pub k_folds: usize,
    pub bayes_a: f64,
    pub bayes_b: f64,
    /// `ν` for `bayes_fixed`.
    pub bayes_fixed_nu: f64,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        Self {
            k_folds: 10,
            bayes_a: 1.0,
            bayes_b: 0.001,
            bayes_fixed_nu: 0.01,
        }
    }
}

/// How to model the response. `Linear` uses the Gaussian estimators; a GLM family
/// routes `mml` to `glm_mml` and `cv` to `glm_cv`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResponseModel {
    #[default]
    Linear,
    Glm(GlmFamily),
}

impl ResponseModel {
    /// The estimator that actually runs when `requested` is asked for.
    pub fn route(&self, requested: Method) -> Result<Method> {
        match (self, requested) {
            (Self::Linear, Method::GlmMml | Method::GlmCv) => {
                Err(input(format!("{requested} needs a GLM family (poisson or binomial:N)")))
            }
            (Self::Linear, m) => Ok(m),
            (Self::Glm(_), Method::Mml | Method::GlmMml) => Ok(Method::GlmMml),
            (Self::Glm(_), Method::Cv | Method::GlmCv) => Ok(Method::GlmCv),
            (Self::Glm(f), m) => Err(input(format!("{m} is not available for the {f} family"))),
        }
    }
}

pub struct Problem {
    x: DesignMatrix,
    y: DVector<f64>,
    xf: Option<DMatrix<f64>>,
    model: ResponseModel,
    settings: EstimatorSettings,
    seed: u64,
    svd: OnceLock<std::result::Result<SvdFactors, String>>,
    eigen: OnceLock<std::result::Result<GramEigen, String>>,
}

impl Problem {
    pub fn new(x: DesignMatrix, y: DVector<f64>, seed: u64) -> Result<Self> {
        check_len(&y, x.nrows(), "response")?;
        Ok(Self {
            x,
            y,
            xf: None,
            model: ResponseModel::Linear,
            settings: EstimatorSettings::default(),
            seed,
            svd: OnceLock::new(),
            eigen: OnceLock::new(),
        })
    }

    pub fn with_fixed(mut self, xf: DMatrix<f64>) -> Result<Self> {
        if xf.nrows() != self.x.nrows() {
            return Err(input(format!("fixed design has {} rows, expected {}", xf.nrows(), self.x.nrows())));
        }
        self.xf = Some(xf);
        Ok(self)
    }

    pub fn with_model(mut self, model: ResponseModel) -> Result<Self> {
        if let ResponseModel::Glm(f) = model {
            f.validate(&self.y)?;
        }
        self.model = model;
        Ok(self)
    }

    pub fn with_settings(mut self, settings: EstimatorSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn x(&self) -> &DesignMatrix {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    fn svd(&self) -> Result<&SvdFactors> {
        self.svd
            .get_or_init(|| self.x.svd().map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| Error::Numeric(e.clone()))
    }

    fn eigen(&self) -> Result<&GramEigen> {
        self.eigen
            .get_or_init(|| self.x.gram_eigen().map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| Error::Numeric(e.clone()))
    }

    fn mixed(&self) -> Result<MixedDesign> {
        let xf = self.xf.clone().unwrap_or_else(|| DMatrix::zeros(self.x.nrows(), 0));
        MixedDesign::new(xf, self.x.clone())
    }

    /// Runs one estimator after routing it through the response model.
    pub fn run(&self, requested: Method) -> Result<EstimateReport> {
        let method = self.model.route(requested)?;
        let s = &self.settings;
        let y = &self.y;
        let start = Instant::now();
        let report = match method {
            Method::Mml => mml_estimate(self.eigen()?, y)?,
            Method::Mom => mom_estimate(&self.x, y)?,
            Method::Basic => basic_estimate(self.svd()?, y)?,
            Method::Pcr => pcr_estimate(self.svd()?, y)?,
            Method::Gcv => gcv_lambda(self.svd()?, y)?,
            Method::Cv => kfold_cv_lambda(&self.x, y, s.k_folds, self.seed)?,
            Method::Hilmm => hilmm_h2(self.eigen()?, y)?,
            Method::Reml => reml_estimate(&self.mixed()?, y)?,
            Method::MmlMixed => mml_mixed_estimate(&self.mixed()?, y)?,
            Method::BayesEb => eb_report(self.svd()?, y, s.bayes_a, s.bayes_b)?,
            Method::BayesFixed => bayes_fixed_report(self.svd()?, y, s.bayes_fixed_nu, s.bayes_a, s.bayes_b)?,
            Method::GlmMml | Method::GlmCv => {
                let ResponseModel::Glm(family) = self.model else { unreachable!("routing rejects this") };
                if method == Method::GlmMml {
                    glm_mml_lambda(&self.x, y, &family)?
                } else {
                    glm_cv_lambda(&self.x, y, &family, s.k_folds, self.seed)?
                }
            }
        };
        Ok(report.timed(start))
    }
}
