//! Variance components with a low-rank fixed-effect design alongside the
//! high-dimensional random one: REML through error contrasts, and MML with
//! the fixed effects profiled out by generalized least squares.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{input, Error, Result};
use crate::linalg::{check_len, svd_thin, DesignMatrix, GramEigen, RotatedResponse};
use crate::linear::{mml_bounds, mml_from_rotated, EstimateReport, Method, VarianceComponents};
use crate::optim::{maximize_nd, OptBounds};

#[derive(Debug, Clone)]
pub struct MixedDesign {
    xf: DMatrix<f64>,
    xr: DesignMatrix,
    condition: f64,
}

impl MixedDesign {
    /// `xf` may have zero columns, in which case both estimators reduce to plain MML.
    pub fn new(xf: DMatrix<f64>, xr: DesignMatrix) -> Result<Self> {
        let (n, m) = xf.shape();
        if n != xr.nrows() {
            return Err(input(format!("fixed design has {n} rows, random design has {}", xr.nrows())));
        }
        if m >= n {
            return Err(input(format!("fixed design needs fewer columns than rows, got {m} >= {n}")));
        }
        if xf.iter().any(|v| !v.is_finite()) {
            return Err(input("fixed design contains non-finite values"));
        }
        let condition = if m == 0 {
            1.0
        } else {
            let svd = svd_thin(&xf)?;
            if svd.rank < m {
                return Err(input(format!("fixed design is rank deficient: rank {} < {m} columns", svd.rank)));
            }
            svd.d[0] / svd.d[m - 1]
        };
        Ok(Self { xf, xr, condition })
    }

    pub fn xf(&self) -> &DMatrix<f64> {
        &self.xf
    }

    pub fn xr(&self) -> &DesignMatrix {
        &self.xr
    }

    pub fn m(&self) -> usize {
        self.xf.ncols()
    }

    pub fn n(&self) -> usize {
        self.xf.nrows()
    }

    /// 2-norm condition number of `X_f`.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Orthonormal `n×(n−m)` basis of the orthogonal complement of `col(X_f)`.
    pub fn contrast_basis(&self) -> Result<DMatrix<f64>> {
        let (n, m) = self.xf.shape();
        if m == 0 {
            return Ok(DMatrix::identity(n, n));
        }
        let q = self.xf.clone().qr().q();
        let proj = DMatrix::identity(n, n) - &q * q.transpose();
        let eig = SymmetricEigen::try_new(proj, f64::EPSILON, 0)
            .ok_or_else(|| Error::Numeric(format!("eigensolver failed on the {n}x{n} contrast projector")))?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        Ok(eig.eigenvectors.select_columns(&order[..n - m]))
    }
}

/// Contrasted problem: eigen-decomposition of `KᵀXrXrᵀK` and `Kᵀy` in that basis.
fn contrasted(design: &MixedDesign, basis: &DMatrix<f64>, y: &DVector<f64>) -> Result<RotatedResponse> {
    let gram = design.xr.gram();
    let reduced = basis.tr_mul(&gram) * basis;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    GramEigen::from_gram(&reduced, design.xr.ncols())?.rotate(&basis.tr_mul(y))
}

/// REML log-likelihood `log N(Kᵀy; 0, Kᵀ(τ²XrXrᵀ + σ²I)K)` by dense Cholesky,
/// for an arbitrary orthonormal contrast basis `K`.
pub fn reml_objective_with_basis(
    basis: &DMatrix<f64>,
    gram: &DMatrix<f64>,
    y: &DVector<f64>,
    sigma2: f64,
    tau2: f64,
) -> Result<f64> {
    let k = basis.ncols();
    let cov = basis.tr_mul(&(gram * tau2)) * basis + DMatrix::identity(k, k) * sigma2;
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::Numeric("contrast covariance is not positive definite".into()))?;
    let z = basis.tr_mul(y);
    let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok(-0.5 * (k as f64 * (2.0 * PI).ln() + logdet + z.dot(&chol.solve(&z))))
}

/// REML via the eigenbasis of the contrasted Gram matrix.
pub fn reml_estimate(design: &MixedDesign, y: &DVector<f64>) -> Result<EstimateReport> {
    let start = Instant::now();
    check_len(y, design.n(), "response")?;
    let p = design.xr.ncols();
    let rot = if design.m() == 0 {
        design.xr.gram_eigen()?.rotate(y)?
    } else {
        contrasted(design, &design.contrast_basis()?, y)?
    };
    Ok(mml_from_rotated(&rot, p, Method::Reml)?.timed(start))
}

/// REML log-likelihood at given components, evaluated the same way as [`reml_estimate`].
pub fn reml_log_likelihood(design: &MixedDesign, y: &DVector<f64>, sigma2: f64, tau2: f64) -> Result<f64> {
    check_len(y, design.n(), "response")?;
    let rot = contrasted(design, &design.contrast_basis()?, y)?;
    Ok(crate::linear::gaussian_log_marginal(&rot, sigma2, tau2))
}

/// Everything needed to profile `α` at any `(σ², τ²)` in O(n·m²).
struct GlsParts {
    eig: DVector<f64>,
    xf_rot: DMatrix<f64>,
    y_rot: DVector<f64>,
    resid_dim: usize,
    // cross-products of the parts outside U's column space
    xx_perp: DMatrix<f64>,
    xy_perp: DVector<f64>,
    yy_perp: f64,
}

impl GlsParts {
    fn new(eigen: &GramEigen, xf: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        let xf_rot = eigen.u.tr_mul(xf);
        let y_rot = eigen.u.tr_mul(y);
        let xf_perp = xf - &eigen.u * &xf_rot;
        let y_perp = y - &eigen.u * &y_rot;
        Self {
            eig: eigen.eig.clone(),
            resid_dim: eigen.n() - eigen.u.ncols(),
            xx_perp: xf_perp.tr_mul(&xf_perp),
            xy_perp: xf_perp.tr_mul(&y_perp),
            yy_perp: y_perp.norm_squared(),
            xf_rot,
            y_rot,
        }
    }

    fn n(&self) -> usize {
        self.y_rot.len() + self.resid_dim
    }

    /// `N(y; X_f α, τ²XrXrᵀ + σ²I)` log-density at a given `α`.
    fn log_density(&self, alpha: &DVector<f64>, sigma2: f64, tau2: f64) -> f64 {
        let r = &self.y_rot - &self.xf_rot * alpha;
        let mut acc = 0.0;
        for (e, c) in self.eig.iter().zip(r.iter()) {
            let v = tau2 * e + sigma2;
            acc += v.ln() + c * c / v;
        }
        if self.resid_dim > 0 {
            let rss = self.yy_perp - 2.0 * alpha.dot(&self.xy_perp) + alpha.dot(&(&self.xx_perp * alpha));
            acc += self.resid_dim as f64 * sigma2.ln() + rss.max(0.0) / sigma2;
        }
        -0.5 * acc - 0.5 * self.n() as f64 * (2.0 * PI).ln()
    }

    fn gls(&self, sigma2: f64, tau2: f64) -> Option<DVector<f64>> {
        let w = self.eig.map(|e| 1.0 / (tau2 * e + sigma2));
        let mut xw = self.xf_rot.clone();
        for (i, mut row) in xw.row_iter_mut().enumerate() {
            row *= w[i];
        }
        let mut lhs = self.xf_rot.tr_mul(&xw);
        let mut rhs = xw.tr_mul(&self.y_rot);
        if self.resid_dim > 0 {
            lhs += &self.xx_perp / sigma2;
            rhs += &self.xy_perp / sigma2;
        }
        lhs.cholesky().map(|c| c.solve(&rhs))
    }

    fn profiled(&self, sigma2: f64, tau2: f64) -> f64 {
        match self.gls(sigma2, tau2) {
            Some(a) => self.log_density(&a, sigma2, tau2),
            None => f64::NEG_INFINITY,
        }
    }
}

/// Mixed-model MML profile: returns `max_α log N(y; X_f α, τ²XrXrᵀ + σ²I)` and the maximizer.
pub fn mml_mixed_profile(design: &MixedDesign, y: &DVector<f64>, sigma2: f64, tau2: f64) -> Result<(f64, DVector<f64>)> {
    check_len(y, design.n(), "response")?;
    let parts = GlsParts::new(&design.xr.gram_eigen()?, &design.xf, y);
    let alpha = parts
        .gls(sigma2, tau2)
        .ok_or_else(|| Error::Numeric("GLS normal equations are singular".into()))?;
    Ok((parts.log_density(&alpha, sigma2, tau2), alpha))
}

/// Joint log-density at arbitrary `(α, σ², τ²)`.
pub fn mml_mixed_log_density(design: &MixedDesign, y: &DVector<f64>, alpha: &DVector<f64>, sigma2: f64, tau2: f64) -> Result<f64> {
    check_len(y, design.n(), "response")?;
    if alpha.len() != design.m() {
        return Err(input(format!("alpha has length {}, expected {}", alpha.len(), design.m())));
    }
    let parts = GlsParts::new(&design.xr.gram_eigen()?, &design.xf, y);
    Ok(parts.log_density(alpha, sigma2, tau2))
}

/// MML over `(α, σ², τ²)` with `α` profiled by GLS; reports `α̂` as `alpha_hat`.
pub fn mml_mixed_estimate(design: &MixedDesign, y: &DVector<f64>) -> Result<EstimateReport> {
    let start = Instant::now();
    check_len(y, design.n(), "response")?;
    let eigen = design.xr.gram_eigen()?;
    let p = design.xr.ncols();
    if design.m() == 0 {
        let mut report = mml_from_rotated(&eigen.rotate(y)?, p, Method::MmlMixed)?;
        report.alpha_hat = Some(Vec::new());
        return Ok(report.timed(start));
    }
    let parts = GlsParts::new(&eigen, &design.xf, y);

    // search box from the OLS residual so it scales with the response
    let ols = design
        .xf
        .clone()
        .svd(true, true)
        .solve(y, f64::EPSILON)
        .map_err(|e| Error::Numeric(e.to_string()))?;
    let (bounds, init): (OptBounds, [f64; 2]) = mml_bounds(&eigen.rotate(&(y - &design.xf * ols))?);
    let opt = maximize_nd(|x| parts.profiled(x[0].exp(), x[1].exp()), &init, &bounds)?;
    let (sigma2, tau2) = (opt.argmax[0].exp(), opt.argmax[1].exp());
    let alpha = parts
        .gls(sigma2, tau2)
        .ok_or_else(|| Error::Numeric("GLS normal equations are singular at the optimum".into()))?;

    let mut report = EstimateReport::from_components(Method::MmlMixed, VarianceComponents::new(sigma2, tau2, p));
    report.log_objective = Some(opt.value);
    report.alpha_hat = Some(alpha.iter().copied().collect());
    if !opt.converged {
        report.flag("not_converged");
    }
    if opt.at_bound {
        report.flag("at_bound");
    }
    Ok(report.timed(start))
}
