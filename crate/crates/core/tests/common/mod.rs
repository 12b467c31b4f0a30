#![allow(dead_code)]

pub mod props;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use ridgepen::rng::{gaussian_matrix, stream, Stream};
use ridgepen::DesignMatrix;

/// Standard normal vector from the noise stream of `seed`.
pub fn gauss_vec(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = stream(seed, Stream::Noise);
    DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng))
}

pub fn raw_design(n: usize, p: usize, seed: u64) -> DesignMatrix {
    DesignMatrix::new(gaussian_matrix(n, p, seed)).unwrap()
}

pub fn std_design(n: usize, p: usize, seed: u64) -> DesignMatrix {
    DesignMatrix::standardized(gaussian_matrix(n, p, seed)).unwrap()
}

/// `y = Xβ + ε`, `β ~ N(0, τ²)`, `ε ~ N(0, σ²)`.
pub fn linear_response(x: &DesignMatrix, tau2: f64, sigma2: f64, seed: u64) -> DVector<f64> {
    let beta = gauss_vec(x.ncols(), seed ^ 0x5eed) * tau2.sqrt();
    x.values() * beta + gauss_vec(x.nrows(), seed) * sigma2.sqrt()
}

/// Haar-ish random orthogonal matrix from the QR of a Gaussian matrix.
pub fn random_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
    let qr = gaussian_matrix(n, n, seed).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `log N(y; 0, cov)` by dense Cholesky.
pub fn dense_mvn_logpdf(y: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let n = y.len() as f64;
    let chol = cov.clone().cholesky().expect("covariance must be positive definite");
    let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    -0.5 * (n * (2.0 * PI).ln() + logdet + y.dot(&chol.solve(y)))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Adaptive Simpson quadrature.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64, whole: f64, m: f64, fm: f64, tol: f64, depth: u32) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1) + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 50)
}

/// Sample variance and its standard error `√(Var((x−x̄)²)/N)`.
pub fn variance_with_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sq: Vec<f64> = x.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = sq.iter().sum::<f64>() / (n - 1.0);
    let m = sq.iter().sum::<f64>() / n;
    let v4 = sq.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / (n - 1.0);
    (var, (v4 / n).sqrt())
}

pub fn mean_with_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}
