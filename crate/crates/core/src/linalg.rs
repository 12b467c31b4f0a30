//! Dense linear-algebra kernels shared by every estimator.
//!
//! The design matrix is `n × p` with samples in rows. Almost everything
//! downstream runs on one of two factorizations:
//!
//! * [`SvdFactors`], the thin SVD `X = U·diag(d)·Vᵀ`, used whenever ridge
//!   coefficients or hat-matrix traces are needed;
//! * [`GramEigen`], the eigen-decomposition of `XXᵀ`, which is all that the
//!   Gaussian marginal likelihood needs and is much cheaper for `p ≫ n`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{input, Error, Result};

/// Dense `n × p` design matrix (rows are samples, columns are variables).
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
    standardized: bool,
}

impl DesignMatrix {
    /// Wraps a raw matrix without touching its values.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let (n, p) = values.shape();
        if n < 2 {
            return Err(input(format!("design matrix needs at least 2 rows, got {n}")));
        }
        if p < 1 {
            return Err(input("design matrix needs at least 1 column"));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(input(format!(
                "non-finite entry at row {}, column {}",
                idx % n,
                idx / n
            )));
        }
        Ok(Self {
            values,
            standardized: false,
        })
    }

    /// Centers every column and scales it to unit population variance.
    pub fn standardized(values: DMatrix<f64>) -> Result<Self> {
        Self::new(values)?.standardize()
    }

    pub fn standardize(mut self) -> Result<Self> {
        let n = self.nrows() as f64;
        for (j, mut col) in self.values.column_iter_mut().enumerate() {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            // relative test so that large-valued constant columns are caught too
            let scale = col.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if var <= (4.0 * f64::EPSILON * scale).powi(2) {
                return Err(input(format!("column {j} has zero variance and cannot be standardized")));
            }
            let sd = var.sqrt();
            for v in col.iter_mut() {
                *v = (*v - mean) / sd;
            }
        }
        self.standardized = true;
        Ok(self)
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    /// `XXᵀ`, the only product that touches dimension `p`.
    pub fn gram(&self) -> DMatrix<f64> {
        &self.values * self.values.transpose()
    }

    pub fn svd(&self) -> Result<SvdFactors> {
        svd_thin(&self.values)
    }

    pub fn gram_eigen(&self) -> Result<GramEigen> {
        GramEigen::from_gram(&self.gram(), self.ncols())
    }

    /// Rows selected by `idx`, in the given order. Standardization is not re-applied.
    pub fn select_rows(&self, idx: &[usize]) -> DMatrix<f64> {
        self.values.select_rows(idx)
    }
}

/// Thin SVD `X = U·diag(d)·Vᵀ` with `q = min(n, p)` retained components.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DMatrix<f64>,
    /// Singular values, descending.
    pub d: DVector<f64>,
    pub v: DMatrix<f64>,
    /// Number of singular values above `q·eps·d₁`.
    pub rank: usize,
}

impl SvdFactors {
    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.v.nrows()
    }

    pub fn q(&self) -> usize {
        self.d.len()
    }

    /// `d_k²`, the nonzero part of the spectrum of `XXᵀ`.
    pub fn d2(&self) -> DVector<f64> {
        self.d.map(|v| v * v)
    }

    /// `Uᵀy`.
    pub fn rotate(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(y, self.nrows(), "response")?;
        Ok(self.u.tr_mul(y))
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut ud = self.u.clone();
        for (k, mut col) in ud.column_iter_mut().enumerate() {
            col *= self.d[k];
        }
        ud * self.v.transpose()
    }
}

/// Rank cutoff on singular values: `d_k ≤ q·eps·d₁` counts as zero.
pub fn singular_rank(d: &DVector<f64>) -> usize {
    let Some(&d1) = d.iter().next() else { return 0 };
    let tol = d.len() as f64 * f64::EPSILON * d1;
    d.iter().filter(|&&v| v > tol).count()
}

/// Thin singular value decomposition.
///
/// Strongly rectangular inputs are first reduced by a QR factorization so that
/// the iterative SVD only ever sees a `min(n,p)`-square matrix.
pub fn svd_thin(x: &DMatrix<f64>) -> Result<SvdFactors> {
    let (n, p) = x.shape();
    if n == 0 || p == 0 {
        return Err(input("cannot decompose an empty matrix"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(input(format!("{n}x{p} matrix contains non-finite values")));
    }
    let fail = || Error::Numeric(format!("SVD did not converge for {n}x{p} matrix"));

    let (u, d, v) = if 2 * p > 3 * n {
        // X = Rᵀ Qᵀ with Xᵀ = Q R
        let qr = x.transpose().qr();
        let (q, r) = qr.unpack();
        let svd = r.transpose().try_svd(true, true, f64::EPSILON, 0).ok_or_else(fail)?;
        let w = svd.v_t.ok_or_else(fail)?.transpose();
        (svd.u.ok_or_else(fail)?, svd.singular_values, q * w)
    } else if 2 * n > 3 * p {
        let (q, r) = x.clone().qr().unpack();
        let svd = r.try_svd(true, true, f64::EPSILON, 0).ok_or_else(fail)?;
        let ur = svd.u.ok_or_else(fail)?;
        (q * ur, svd.singular_values, svd.v_t.ok_or_else(fail)?.transpose())
    } else {
        let svd = x.clone().try_svd(true, true, f64::EPSILON, 0).ok_or_else(fail)?;
        (
            svd.u.ok_or_else(fail)?,
            svd.singular_values,
            svd.v_t.ok_or_else(fail)?.transpose(),
        )
    };

    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
    let d = DVector::from_iterator(d.len(), order.iter().map(|&k| d[k].max(0.0)));
    let u = u.select_columns(&order);
    let v = v.select_columns(&order);
    let rank = singular_rank(&d);
    Ok(SvdFactors { u, d, v, rank })
}

/// Ridge fit `β̂_λ = (XᵀX + λI)⁻¹Xᵀy` together with the hat-matrix traces.
#[derive(Debug, Clone)]
pub struct RidgeSolution {
    pub beta_hat: DVector<f64>,
    pub lambda: f64,
    pub fitted: DVector<f64>,
    /// `tr(H_λ)`
    pub hat_trace: f64,
    /// `tr(H_λ H_λᵀ)`
    pub hat2_trace: f64,
}

/// Ridge solution through the SVD: `β̂ = V·diag(d/(d²+λ))·Uᵀy`.
pub fn ridge_solve(svd: &SvdFactors, y: &DVector<f64>, lambda: f64) -> Result<RidgeSolution> {
    check_lambda(lambda)?;
    let uty = svd.rotate(y)?;
    let coef = DVector::from_iterator(
        svd.q(),
        svd.d.iter().zip(uty.iter()).map(|(d, c)| d / (d * d + lambda) * c),
    );
    let smooth = DVector::from_iterator(
        svd.q(),
        svd.d.iter().zip(uty.iter()).map(|(d, c)| d * d / (d * d + lambda) * c),
    );
    let (hat_trace, hat2_trace) = hat_traces(&svd.d, lambda);
    Ok(RidgeSolution {
        beta_hat: &svd.v * coef,
        lambda,
        fitted: &svd.u * smooth,
        hat_trace,
        hat2_trace,
    })
}

/// `(tr H_λ, tr H_λ²)` from the singular values alone.
pub fn hat_traces(d: &DVector<f64>, lambda: f64) -> (f64, f64) {
    d.iter().fold((0.0, 0.0), |(t1, t2), &dk| {
        let s = dk * dk / (dk * dk + lambda);
        (t1 + s, t2 + s * s)
    })
}

/// `tr(AB)` for `A: p×n`, `B: n×p`, without forming the product.
pub fn trace_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != b.ncols() || a.ncols() != b.nrows() {
        return Err(input(format!(
            "trace_product needs A: p×n and B: n×p, got {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    // Σ_ij A_ij B_ji; B's column j is contiguous, matching A's row j access via transpose
    let mut acc = 0.0;
    for i in 0..a.ncols() {
        for j in 0..a.nrows() {
            acc += a[(j, i)] * b[(i, j)];
        }
    }
    Ok(acc)
}

/// Moore–Penrose pseudo-inverse of `XXᵀ`: `U·diag(g)·Uᵀ` with `g_k = 1/d_k²` above the rank cutoff.
pub fn gram_pseudo_inverse(svd: &SvdFactors) -> DMatrix<f64> {
    let n = svd.nrows();
    let mut scaled = svd.u.columns(0, svd.rank).into_owned();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col /= svd.d[k] * svd.d[k];
    }
    let ur = svd.u.columns(0, svd.rank);
    if svd.rank == 0 {
        return DMatrix::zeros(n, n);
    }
    scaled * ur.transpose()
}

/// Eigen-decomposition of the Gram matrix `XXᵀ = U·diag(e)·Uᵀ`.
///
/// `u` has `n` rows and `q ≤ n` columns; when `q < n` the remaining directions
/// have eigenvalue zero and are handled through [`RotatedResponse::resid_ss`].
#[derive(Debug, Clone)]
pub struct GramEigen {
    pub u: DMatrix<f64>,
    /// Eigenvalues, descending, clipped at zero.
    pub eig: DVector<f64>,
    pub rank: usize,
    /// Number of columns of the underlying design (needed for heritability).
    pub p: usize,
}

/// A response expressed in the eigenbasis of a [`GramEigen`].
#[derive(Debug, Clone)]
pub struct RotatedResponse {
    pub eig: DVector<f64>,
    /// `Uᵀy`
    pub coef: DVector<f64>,
    /// Dimension of the orthogonal complement of `U`'s column space.
    pub resid_dim: usize,
    /// Squared norm of the part of `y` in that complement.
    pub resid_ss: f64,
}

impl RotatedResponse {
    pub fn dim(&self) -> usize {
        self.coef.len() + self.resid_dim
    }

    pub fn total_ss(&self) -> f64 {
        self.coef.norm_squared() + self.resid_ss
    }
}

impl GramEigen {
    /// Eigen-decomposes a symmetric PSD matrix.
    pub fn from_gram(gram: &DMatrix<f64>, p: usize) -> Result<Self> {
        let n = gram.nrows();
        if n == 0 || gram.ncols() != n {
            return Err(input("Gram matrix must be square and non-empty"));
        }
        if gram.iter().any(|v| !v.is_finite()) {
            return Err(input("Gram matrix contains non-finite values"));
        }
        let eigen = SymmetricEigen::try_new(gram.clone(), f64::EPSILON, 0)
            .ok_or_else(|| Error::Numeric(format!("symmetric eigensolver did not converge for {n}x{n} Gram matrix")))?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));
        let eig = DVector::from_iterator(n, order.iter().map(|&k| eigen.eigenvalues[k].max(0.0)));
        let u = eigen.eigenvectors.select_columns(&order);
        let rank = gram_rank(&eig, p);
        Ok(Self { u, eig, rank, p })
    }

    /// Reuses an existing SVD; no completion of the basis is performed.
    pub fn from_svd(svd: &SvdFactors) -> Self {
        Self {
            u: svd.u.clone(),
            eig: svd.d2(),
            rank: svd.rank,
            p: svd.ncols(),
        }
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn rotate(&self, y: &DVector<f64>) -> Result<RotatedResponse> {
        check_len(y, self.n(), "response")?;
        let coef = self.u.tr_mul(y);
        let resid_dim = self.n() - self.u.ncols();
        let resid_ss = if resid_dim == 0 {
            0.0
        } else {
            (y - &self.u * &coef).norm_squared()
        };
        Ok(RotatedResponse {
            eig: self.eig.clone(),
            coef,
            resid_dim,
            resid_ss,
        })
    }

    /// Rebuilds `XXᵀ` from the factors.
    pub fn gram(&self) -> DMatrix<f64> {
        let mut scaled = self.u.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= self.eig[k];
        }
        scaled * self.u.transpose()
    }
}

/// Eigenvalues formed from an explicit Gram matrix carry absolute error of
/// order `n·p·eps·e₁`; anything below that is treated as zero.
fn gram_rank(eig: &DVector<f64>, p: usize) -> usize {
    let Some(&e1) = eig.iter().next() else { return 0 };
    let tol = eig.len() as f64 * p.max(eig.len()) as f64 * f64::EPSILON * e1;
    eig.iter().filter(|&&v| v > tol).count()
}

pub(crate) fn check_len(v: &DVector<f64>, n: usize, what: &str) -> Result<()> {
    if v.len() != n {
        return Err(input(format!("{what} has length {}, expected {n}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(input(format!("{what} contains non-finite values")));
    }
    Ok(())
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("penalty must be positive and finite, got {lambda}")));
    }
    Ok(())
}
