use std::sync::LazyLock;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;

use super::{EstimateReport, Method};
use crate::error::{input, Result};
use crate::linalg::{check_lambda, check_len, svd_thin, DesignMatrix, SvdFactors};
use crate::optim::{maximize_1d, OptBounds};
use crate::rng::{stream, Stream};

const GRID_POINTS: usize = 100;
const GRID_LO: f64 = 1e-4;
const GRID_HI: f64 = 1e8;

/// 100 log-spaced candidate penalties on `[1e-4, 1e8]`.
pub static LAMBDA_GRID: LazyLock<Vec<f64>> = LazyLock::new(|| {
    let (a, b) = (GRID_LO.ln(), GRID_HI.ln());
    (0..GRID_POINTS)
        .map(|i| (a + (b - a) * i as f64 / (GRID_POINTS - 1) as f64).exp())
        .collect()
});

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CvOptions {
    pub folds: usize,
    pub seed: u64,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self { folds: 10, seed: 1 }
    }
}

/// Seeded random fold assignment; fold sizes differ by at most one.
pub(crate) fn assign_folds(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(input(format!("fold count must satisfy 2 <= K <= n = {n}, got {k}")));
    }
    if n - n.div_ceil(k) < 2 {
        return Err(input(format!("with n = {n} and K = {k} a training fold has fewer than 2 samples")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream(seed, Stream::Folds));
    let mut folds = vec![Vec::new(); k];
    for (j, &i) in perm.iter().enumerate() {
        folds[j % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Per-fold precomputation: everything a λ evaluation needs in O(n_test·q).
struct FoldFit {
    d: DVector<f64>,
    uty: DVector<f64>,
    test_v: DMatrix<f64>,
    y_test: DVector<f64>,
}

impl FoldFit {
    fn new(x: &DMatrix<f64>, y: &DVector<f64>, test: &[usize]) -> Result<Self> {
        let n = x.nrows();
        let mut is_test = vec![false; n];
        for &i in test {
            is_test[i] = true;
        }
        let train: Vec<usize> = (0..n).filter(|&i| !is_test[i]).collect();
        let svd: SvdFactors = svd_thin(&x.select_rows(&train))?;
        let y_train = DVector::from_iterator(train.len(), train.iter().map(|&i| y[i]));
        Ok(Self {
            uty: svd.u.tr_mul(&y_train),
            test_v: x.select_rows(test) * &svd.v,
            y_test: DVector::from_iterator(test.len(), test.iter().map(|&i| y[i])),
            d: svd.d,
        })
    }

    fn sq_error(&self, lambda: f64) -> f64 {
        let coef = DVector::from_iterator(
            self.d.len(),
            self.d.iter().zip(self.uty.iter()).map(|(d, c)| d / (d * d + lambda) * c),
        );
        (&self.y_test - &self.test_v * coef).norm_squared()
    }
}

fn fold_fits(x: &DMatrix<f64>, y: &DVector<f64>, folds: &[Vec<usize>]) -> Result<Vec<FoldFit>> {
    folds.iter().map(|f| FoldFit::new(x, y, f)).collect()
}

/// Cross-validated squared prediction error `Σᵢ (yᵢ − Xᵢβ̂^{−f(i)}_λ)²` at each λ.
pub fn kfold_cv_curve(x: &DesignMatrix, y: &DVector<f64>, folds: &[Vec<usize>], lambdas: &[f64]) -> Result<Vec<f64>> {
    check_len(y, x.nrows(), "response")?;
    let fits = fold_fits(x.values(), y, folds)?;
    lambdas
        .iter()
        .map(|&l| {
            check_lambda(l)?;
            Ok(fits.iter().map(|f| f.sq_error(l)).sum())
        })
        .collect()
}

/// Leave-one-out error by refitting `n` times.
pub fn loo_cv_curve_explicit(x: &DesignMatrix, y: &DVector<f64>, lambdas: &[f64]) -> Result<Vec<f64>> {
    let folds: Vec<Vec<usize>> = (0..x.nrows()).map(|i| vec![i]).collect();
    kfold_cv_curve(x, y, &folds, lambdas)
}

/// Leave-one-out error from a single SVD: `Σᵢ ((yᵢ − ŷᵢ)/(1 − Hᵢᵢ))²`.
pub fn press_curve(svd: &SvdFactors, y: &DVector<f64>, lambdas: &[f64]) -> Result<Vec<f64>> {
    let uty = svd.rotate(y)?;
    let u2 = svd.u.map(|v| v * v);
    lambdas
        .iter()
        .map(|&l| {
            check_lambda(l)?;
            let s = svd.d.map(|d| d * d / (d * d + l));
            let fitted = &svd.u * uty.component_mul(&s);
            let lev = &u2 * &s;
            Ok((0..y.len()).map(|i| ((y[i] - fitted[i]) / (1.0 - lev[i])).powi(2)).sum())
        })
        .collect()
}

/// K-fold CV choice of `λ`: grid search, then golden-section refinement between
/// the neighbours of the best grid point.
pub fn kfold_cv_lambda(x: &DesignMatrix, y: &DVector<f64>, folds: usize, seed: u64) -> Result<EstimateReport> {
    let start = Instant::now();
    check_len(y, x.nrows(), "response")?;
    let assignment = assign_folds(x.nrows(), folds, seed)?;
    let fits = fold_fits(x.values(), y, &assignment)?;
    let cv = |l: f64| fits.iter().map(|f| f.sq_error(l)).sum::<f64>();

    let grid = &*LAMBDA_GRID;
    let errors: Vec<f64> = grid.iter().map(|&l| cv(l)).collect();
    let best = (0..grid.len()).fold(0, |b, i| if errors[i] < errors[b] { i } else { b });
    let lo = grid[best.saturating_sub(1)].ln();
    let hi = grid[(best + 1).min(grid.len() - 1)].ln();
    let opt = maximize_1d(|t| -cv(t.exp()), &OptBounds::scalar(lo, hi)?)?;
    let (lambda, err) = if -opt.value < errors[best] {
        (opt.argmax.exp(), -opt.value)
    } else {
        (grid[best], errors[best])
    };

    let mut report = EstimateReport::from_lambda(Method::Cv, lambda);
    report.log_objective = Some(err);
    if best == 0 || best == grid.len() - 1 {
        report.flag("at_bound");
    }
    Ok(report.timed(start))
}
