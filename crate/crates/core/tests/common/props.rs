//! Invariants and properties of every module, as plain functions so that both the
//! standalone property tests and the acceptance run can drive them.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseResult, TestRng, TestRunner};
use rand_distr::{Binomial, Distribution, Poisson};
use ridgepen::bayes::{bayes_fixed_nu_sigma, bayes_log_ml, eb_estimate, BayesHyper};
use ridgepen::dispatch::{EstimatorSettings, Problem, ResponseModel};
use ridgepen::glm::{glm_mml_lambda, laplace_log_ml, GlmFamily, LatentGaussianPrior};
use ridgepen::linalg::{gram_pseudo_inverse, ridge_solve, svd_thin, trace_product};
use ridgepen::linear::{gaussian_log_marginal, gcv_curve, hilmm_log_density, mml_estimate, mom_estimate};
use ridgepen::mixed::{mml_mixed_estimate, reml_estimate, reml_objective_with_basis, MixedDesign};
use ridgepen::optim::{maximize_1d, maximize_nd, OptBounds};
use ridgepen::report::{read_rows, write_rows, Format, ReportRow};
use ridgepen::rng::{gaussian_matrix, stream, Stream};
use ridgepen::sim::{
    draw_effects, draw_errors, gen_design, gen_effects, gen_replicate, gen_response, run_comparison, run_replicate,
    DesignModel, EffectPrior, Effects, ErrorModel, ResponseKind, SimConfig,
};
use ridgepen::{DesignMatrix, Method};

use super::oracle::bayes_svd_vs_det_on;
use super::*;

pub type PropResult = Result<(), String>;

fn check<S: Strategy>(cases: u32, strat: S, test: impl Fn(S::Value) -> TestCaseResult) -> PropResult {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strat, test).map_err(|e| e.to_string())
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> PropResult {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn norm_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm()
}

// core-linalg

pub fn hat_trace_matches_trace_product() -> PropResult {
    check(32, (any::<u64>(), -3.0..4.0f64), |(seed, log_l)| {
        let lambda = 10f64.powf(log_l);
        let x = gaussian_matrix(10, 20, seed);
        let fit = ridge_solve(&svd_thin(&x).unwrap(), &DVector::zeros(10), lambda).unwrap();
        let c = (x.tr_mul(&x) + DMatrix::identity(20, 20) * lambda).try_inverse().unwrap() * x.transpose();
        let explicit = trace_product(&c, &x).unwrap();
        prop_assert!((fit.hat_trace - explicit).abs() <= 1e-8, "{} vs {explicit}", fit.hat_trace);
        Ok(())
    })
}

pub fn ridge_norm_monotone() -> PropResult {
    check(64, (any::<u64>(), 2usize..15, 1usize..30, -4.0..6.0f64, 1e-3..3.0f64), |(seed, n, p, l1, step)| {
        let x = gaussian_matrix(n, p, seed);
        let y = gauss_vec(n, seed);
        let svd = svd_thin(&x).unwrap();
        let b1 = ridge_solve(&svd, &y, 10f64.powf(l1)).unwrap().beta_hat.norm();
        let b2 = ridge_solve(&svd, &y, 10f64.powf(l1 + step)).unwrap().beta_hat.norm();
        prop_assert!(b1 >= b2 * (1.0 - 1e-12), "{b1} < {b2}");
        Ok(())
    })
}

pub fn svd_reconstructs() -> PropResult {
    check(64, (any::<u64>(), 1usize..20, 1usize..40), |(seed, n, p)| {
        let x = gaussian_matrix(n, p, seed);
        let svd = svd_thin(&x).unwrap();
        let q = n.min(p);
        prop_assert_eq!(svd.q(), q);
        let resid = (svd.reconstruct() - &x).amax();
        prop_assert!(resid <= 1e-10, "reconstruction residual {resid}");
        prop_assert!(norm_diff(&svd.u.tr_mul(&svd.u), &DMatrix::identity(q, q)) <= 1e-10);
        prop_assert!(norm_diff(&svd.v.tr_mul(&svd.v), &DMatrix::identity(q, q)) <= 1e-10);
        prop_assert!(svd.d.as_slice().windows(2).all(|w| w[0] >= w[1]) && svd.d.min() >= 0.0);
        Ok(())
    })
}

pub fn penrose_conditions() -> PropResult {
    check(48, (any::<u64>(), 3usize..12, 1usize..30), |(seed, n, p)| {
        let x = std_design(n, p, seed);
        let svd = x.svd().unwrap();
        prop_assert_eq!(svd.rank, p.min(n - 1));
        let a = x.gram();
        let m = gram_pseudo_inverse(&svd);
        let am = &a * &m;
        let ma = &m * &a;
        let tol = 1e-7;
        prop_assert!(norm_diff(&(&ma * &m), &m) <= tol * m.norm());
        prop_assert!(norm_diff(&(&am * &a), &a) <= tol * a.norm());
        prop_assert!(norm_diff(&am, &am.transpose()) <= tol * am.norm());
        prop_assert!(norm_diff(&ma, &ma.transpose()) <= tol * ma.norm());
        Ok(())
    })
}

// scalar-opt

fn wiggly(a: f64, w: f64) -> impl Fn(f64) -> f64 {
    move |x| -(x - a).powi(2) + w * (3.0 * x).sin()
}

pub fn optimizer_deterministic() -> PropResult {
    check(32, (-5.0..5.0f64, -5.0..5.0f64, 0.0..3.0f64), |(a, b, w)| {
        let b1 = OptBounds::scalar(-10.0, 10.0).unwrap();
        let r1 = maximize_1d(wiggly(a, w), &b1).unwrap();
        let r2 = maximize_1d(wiggly(a, w), &b1).unwrap();
        prop_assert_eq!(r1.argmax.to_bits(), r2.argmax.to_bits());
        prop_assert_eq!(r1, r2);
        let f = |x: &[f64]| -(x[0] - a).powi(2) - w * (x[1] - b).powi(2) + 0.3 * (x[0] * x[1]).sin();
        let b2 = OptBounds::new(vec![-10.0; 2], vec![10.0; 2]).unwrap();
        let s1 = maximize_nd(f, &[0.0, 0.0], &b2).unwrap();
        let s2 = maximize_nd(f, &[0.0, 0.0], &b2).unwrap();
        prop_assert_eq!(s1, s2);
        Ok(())
    })
}

pub fn optimizer_respects_bounds() -> PropResult {
    check(64, (-10.0..0.0f64, 0.1..10.0f64, -20.0..20.0f64, -20.0..20.0f64), |(lo, width, c1, c2)| {
        let hi = lo + width;
        let r = maximize_1d(|x| -(x - c1).powi(2), &OptBounds::scalar(lo, hi).unwrap()).unwrap();
        prop_assert!(r.argmax >= lo && r.argmax <= hi, "{} outside [{lo}, {hi}]", r.argmax);
        let bounds = OptBounds::new(vec![lo, -hi], vec![hi, -lo]).unwrap();
        let init = [0.5 * (lo + hi), -0.5 * (lo + hi)];
        let s = maximize_nd(|x| -(x[0] - c1).powi(2) - (x[1] - c2).powi(2), &init, &bounds).unwrap();
        for k in 0..2 {
            prop_assert!(s.argmax[k] >= bounds.lo[k] && s.argmax[k] <= bounds.hi[k], "{:?} outside bounds", s.argmax);
        }
        Ok(())
    })
}

// linear-estimators

pub fn mml_scale_equivariance() -> PropResult {
    check(16, (any::<u64>(), -2.0..2.0f64), |(seed, log_c)| {
        let c = 10f64.powf(log_c);
        let x = std_design(20, 40, seed);
        let y = linear_response(&x, 0.05, 1.0, seed.wrapping_add(1));
        let eigen = x.gram_eigen().unwrap();
        let a = mml_estimate(&eigen, &y).unwrap();
        let b = mml_estimate(&eigen, &(&y * c)).unwrap();
        let c2 = c * c;
        prop_assert!(rel_diff(b.sigma2().unwrap(), c2 * a.sigma2().unwrap()) <= 1e-6, "sigma2 {a:?} {b:?}");
        prop_assert!(rel_diff(b.tau2().unwrap(), c2 * a.tau2().unwrap()) <= 1e-6, "tau2 {a:?} {b:?}");
        prop_assert!(rel_diff(b.lambda.unwrap(), a.lambda.unwrap()) <= 1e-6, "lambda {a:?} {b:?}");
        prop_assert!((b.h2.unwrap() - a.h2.unwrap()).abs() <= 1e-6, "h2 {a:?} {b:?}");
        Ok(())
    })
}

pub fn gcv_rotation_invariance() -> PropResult {
    check(32, (any::<u64>(), 4usize..15, 2usize..30), |(seed, n, p)| {
        let x = gaussian_matrix(n, p, seed);
        let y = gauss_vec(n, seed);
        let q = random_orthogonal(n, seed.wrapping_add(7));
        let grid: Vec<f64> = (0..20).map(|k| 10f64.powf(-3.0 + 7.0 * k as f64 / 19.0)).collect();
        let g1 = gcv_curve(&svd_thin(&x).unwrap(), &y, &grid).unwrap();
        let g2 = gcv_curve(&svd_thin(&(&q * &x)).unwrap(), &(&q * &y), &grid).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            prop_assert!(rel_diff(*a, *b) <= 1e-8, "{a} vs {b}");
        }
        Ok(())
    })
}

/// Mean of `τ̂²` over 2000 datasets on one fixed 10×20 design with `(σ², τ²) = (1, 0.05)`.
pub fn mom_unbiased() -> PropResult {
    let x = raw_design(10, 20, 2024);
    let est: Vec<f64> = (0..2000u64)
        .map(|r| {
            let beta = gauss_vec(20, 1_000_000 + 2 * r) * 0.05f64.sqrt();
            let y = x.values() * beta + gauss_vec(10, 1_000_001 + 2 * r);
            mom_estimate(&x, &y).unwrap().tau2().unwrap()
        })
        .collect();
    let (mean, se) = mean_with_se(&est);
    ensure((mean - 0.05).abs() <= 3.0 * se, || format!("mean tau2 {mean} is more than 3 SE ({se}) from 0.05"))
}

pub fn hilmm_mml_identity() -> PropResult {
    check(64, (any::<u64>(), 0.01..0.99f64, -2.0..3.0f64), |(seed, h2, log_s)| {
        let s2 = 10f64.powf(log_s);
        let x = std_design(10, 20, seed);
        let y = linear_response(&x, 0.05, 1.0, seed.wrapping_add(3));
        let rot = x.gram_eigen().unwrap().rotate(&y).unwrap();
        let h = hilmm_log_density(&rot, 20, h2, s2);
        let m = gaussian_log_marginal(&rot, (1.0 - h2) * s2, h2 * s2 / 20.0);
        prop_assert!((h - m).abs() <= 1e-8, "{h} vs {m}");
        Ok(())
    })
}

fn all_reports(x: &DesignMatrix, y: &DVector<f64>, xf: &DMatrix<f64>, counts: &DVector<f64>, seed: u64) -> Vec<ridgepen::EstimateReport> {
    let settings = EstimatorSettings { k_folds: 5, ..EstimatorSettings::default() };
    let linear = Problem::new(x.clone(), y.clone(), seed).unwrap().with_fixed(xf.clone()).unwrap().with_settings(settings);
    let glm = Problem::new(x.clone(), counts.clone(), seed)
        .unwrap()
        .with_model(ResponseModel::Glm(GlmFamily::Poisson))
        .unwrap()
        .with_settings(settings);
    let mut out: Vec<_> = Method::ALL[..11].iter().map(|&m| linear.run(m).unwrap()).collect();
    out.extend([Method::GlmMml, Method::GlmCv].iter().map(|&m| glm.run(m).unwrap()));
    for r in &mut out {
        r.wall_time_s = 0.0;
    }
    out
}

pub fn poisson_counts(x: &DesignMatrix, scale: f64, seed: u64) -> DVector<f64> {
    let eta = x.values() * (gauss_vec(x.ncols(), seed ^ 0xbeef) * scale);
    let mut rng = stream(seed, Stream::Noise);
    eta.map(|e| Poisson::new(e.exp()).unwrap().sample(&mut rng))
}

fn binomial_counts(x: &DesignMatrix, scale: f64, trials: u64, seed: u64) -> DVector<f64> {
    let eta = x.values() * (gauss_vec(x.ncols(), seed ^ 0xbeef) * scale);
    let mut rng = stream(seed, Stream::Noise);
    eta.map(|e| Binomial::new(trials, 1.0 / (1.0 + (-e).exp())).unwrap().sample(&mut rng) as f64)
}

pub fn estimators_deterministic() -> PropResult {
    check(4, any::<u64>(), |seed| {
        let x = std_design(15, 30, seed);
        let y = linear_response(&x, 0.05, 1.0, seed.wrapping_add(1));
        let xf = gaussian_matrix(15, 2, seed.wrapping_add(2));
        let counts = poisson_counts(&x, 0.1, seed);
        let a = all_reports(&x, &y, &xf, &counts, seed);
        let b = all_reports(&x.clone(), &y.clone(), &xf.clone(), &counts.clone(), seed);
        prop_assert_eq!(a, b);
        Ok(())
    })
}

// mixed-effects

pub fn reml_invariant_under_fixed_transform() -> PropResult {
    check(16, (any::<u64>(), prop::array::uniform9(-1.0..1.0f64)), |(seed, t)| {
        let t = DMatrix::from_column_slice(3, 3, &t) + DMatrix::identity(3, 3) * 2.0;
        prop_assume!(t.determinant().abs() > 0.1);
        let xf = gaussian_matrix(20, 3, seed.wrapping_add(5));
        let xr = std_design(20, 40, seed);
        let y = linear_response(&xr, 0.05, 1.0, seed.wrapping_add(1)) + &xf * DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let a = reml_estimate(&MixedDesign::new(xf.clone(), xr.clone()).unwrap(), &y).unwrap();
        let b = reml_estimate(&MixedDesign::new(&xf * t, xr).unwrap(), &y).unwrap();
        prop_assert!(rel_diff(a.sigma2().unwrap(), b.sigma2().unwrap()) <= 1e-8, "{a:?} vs {b:?}");
        prop_assert!(rel_diff(a.tau2().unwrap(), b.tau2().unwrap()) <= 1e-8, "{a:?} vs {b:?}");
        Ok(())
    })
}

pub fn mixed_without_fixed_is_mml() -> PropResult {
    check(16, any::<u64>(), |seed| {
        let x = std_design(20, 40, seed);
        let y = linear_response(&x, 0.05, 1.0, seed.wrapping_add(1));
        let mml = mml_estimate(&x.gram_eigen().unwrap(), &y).unwrap().components.unwrap();
        let design = MixedDesign::new(DMatrix::zeros(20, 0), x).unwrap();
        let reml = reml_estimate(&design, &y).unwrap().components.unwrap();
        let mixed = mml_mixed_estimate(&design, &y).unwrap().components.unwrap();
        for c in [reml, mixed] {
            prop_assert_eq!(c.sigma2.to_bits(), mml.sigma2.to_bits());
            prop_assert_eq!(c.tau2.to_bits(), mml.tau2.to_bits());
        }
        Ok(())
    })
}

pub fn contrast_basis_independence() -> PropResult {
    check(16, any::<u64>(), |seed| {
        let xf = gaussian_matrix(15, 2, seed.wrapping_add(5));
        let xr = std_design(15, 30, seed);
        let y = linear_response(&xr, 0.05, 1.0, seed.wrapping_add(1));
        let gram = xr.gram();
        let k1 = MixedDesign::new(xf, xr).unwrap().contrast_basis().unwrap();
        let k2 = &k1 * random_orthogonal(13, seed.wrapping_add(9));
        for s2 in [0.3, 1.0, 5.0] {
            for t2 in [0.003, 0.05, 1.0] {
                let a = reml_objective_with_basis(&k1, &gram, &y, s2, t2).unwrap();
                let b = reml_objective_with_basis(&k2, &gram, &y, s2, t2).unwrap();
                prop_assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
            }
        }
        Ok(())
    })
}

// bayes-conjugate

pub fn bayes_svd_equals_determinant_form() -> PropResult {
    check(32, (any::<u64>(), 3usize..10, 2usize..8), |(seed, n, p)| {
        let x = gaussian_matrix(n, p, seed);
        let y = &x * gauss_vec(p, seed ^ 1) + gauss_vec(n, seed);
        let err = bayes_svd_vs_det_on(&x, &y);
        prop_assert!(err <= 1e-8, "max difference {err}");
        Ok(())
    })
}

pub fn eb_maximizer_dominates_grid() -> PropResult {
    check(16, (any::<u64>(), 0.001..0.2f64), |(seed, tau2)| {
        let x = std_design(20, 40, seed);
        let y = linear_response(&x, tau2, 1.0, seed.wrapping_add(1));
        let svd = x.svd().unwrap();
        let eb = eb_estimate(&svd, &y, 1.0, 0.001).unwrap();
        let d1 = svd.d[0];
        for k in 0..400 {
            let nu = d1 * d1 * 10f64.powf(-10.0 + 18.0 * k as f64 / 399.0);
            let f = bayes_log_ml(&svd, &y, &BayesHyper::new(1.0, 0.001, nu).unwrap()).unwrap();
            prop_assert!(eb.log_ml >= f - 1e-9 * (1.0 + f.abs()), "grid value {f} at nu {nu} beats {} at {}", eb.log_ml, eb.nu);
        }
        Ok(())
    })
}

pub fn posterior_rate_exceeds_prior() -> PropResult {
    check(64, (any::<u64>(), 2usize..15, 1usize..30, -6.0..6.0f64, -6.0..1.0f64), |(seed, n, p, log_nu, log_b)| {
        let x = gaussian_matrix(n, p, seed);
        let y = &x * gauss_vec(p, seed ^ 1) + gauss_vec(n, seed) * 0.01;
        let b = 10f64.powf(log_b);
        let post = bayes_fixed_nu_sigma(&svd_thin(&x).unwrap(), &y, 10f64.powf(log_nu), 1.0, b).unwrap();
        prop_assert!(post.b_star > b, "b* = {} <= b = {b}", post.b_star);
        Ok(())
    })
}

// glm-mml

pub fn laplace_exact_for_gaussian() -> PropResult {
    check(32, (any::<u64>(), -2.0..3.0f64), |(seed, log_l)| {
        let lambda = 10f64.powf(log_l);
        let x = gaussian_matrix(10, 20, seed);
        let y = gauss_vec(10, seed) * 2.0;
        let prior = LatentGaussianPrior::from_svd(&svd_thin(&x).unwrap(), lambda).unwrap();
        let fit = laplace_log_ml(&y, &prior, &GlmFamily::Gaussian).unwrap();
        let cov = &x * x.transpose() / lambda + DMatrix::identity(10, 10);
        let exact = dense_mvn_logpdf(&y, &cov);
        prop_assert!((fit.log_ml - exact).abs() <= 1e-6, "{} vs {exact}", fit.log_ml);
        Ok(())
    })
}

fn glm_instance(seed: u64, family: usize, n: usize, p: usize) -> (DesignMatrix, DVector<f64>, GlmFamily) {
    let x = std_design(n, p, seed);
    match family {
        0 => (x.clone(), poisson_counts(&x, 0.1, seed), GlmFamily::Poisson),
        _ => (x.clone(), binomial_counts(&x, 0.1, 5, seed), GlmFamily::Binomial { n_trials: 5 }),
    }
}

pub fn latent_mode_is_stationary() -> PropResult {
    check(24, (any::<u64>(), 0usize..2, -1.0..3.0f64), |(seed, fam, log_l)| {
        let lambda = 10f64.powf(log_l);
        let (x, y, family) = glm_instance(seed, fam, 12, 25);
        let prior = LatentGaussianPrior::from_svd(&x.svd().unwrap(), lambda).unwrap();
        let fit = laplace_log_ml(&y, &prior, &family).unwrap();
        let pinv = gram_pseudo_inverse(&x.svd().unwrap());
        let h = |b: &DVector<f64>| family.total_log_lik(&y, b) - 0.5 * lambda * b.dot(&(&pinv * b));
        let step = 1e-6;
        let grad = DVector::from_iterator(
            prior.rank(),
            prior.u.column_iter().map(|u| (h(&(&fit.beta_x_hat + u * step)) - h(&(&fit.beta_x_hat - u * step))) / (2.0 * step)),
        );
        let h0 = h(&fit.beta_x_hat);
        prop_assert!(grad.norm() <= 1e-6 * (1.0 + h0.abs()), "gradient norm {} at h = {h0}", grad.norm());
        Ok(())
    })
}

pub fn newton_is_monotone() -> PropResult {
    check(24, (any::<u64>(), 0usize..2, -2.0..4.0f64), |(seed, fam, log_l)| {
        let (x, y, family) = glm_instance(seed, fam, 20, 40);
        let prior = LatentGaussianPrior::from_eigen(&x.gram_eigen().unwrap(), 10f64.powf(log_l)).unwrap();
        let fit = laplace_log_ml(&y, &prior, &family).unwrap();
        prop_assert!(fit.objective_path.len() >= 2);
        for w in fit.objective_path.windows(2) {
            prop_assert!(w[1] >= w[0], "objective decreased: {} -> {}", w[0], w[1]);
        }
        Ok(())
    })
}

pub fn latent_mode_in_column_space() -> PropResult {
    check(24, (any::<u64>(), 0usize..2, -2.0..4.0f64, prop::bool::ANY), |(seed, fam, log_l, wide)| {
        let (n, p) = if wide { (15, 30) } else { (20, 5) };
        let (x, y, family) = glm_instance(seed, fam, n, p);
        let prior = LatentGaussianPrior::from_eigen(&x.gram_eigen().unwrap(), 10f64.powf(log_l)).unwrap();
        let fit = laplace_log_ml(&y, &prior, &family).unwrap();
        let outside = &fit.beta_x_hat - &prior.u * prior.u.tr_mul(&fit.beta_x_hat);
        prop_assert!(outside.amax() <= 1e-8, "component outside col(XX^T): {}", outside.amax());
        let ones = fit.beta_x_hat.sum() / (n as f64).sqrt();
        prop_assert!(ones.abs() <= 1e-8, "all-ones component {ones}");
        Ok(())
    })
}

pub fn glm_lambda_row_permutation() -> PropResult {
    check(6, (any::<u64>(), 0usize..2, any::<u64>()), |(seed, fam, perm_seed)| {
        let raw = gaussian_matrix(20, 40, seed);
        let (_, y, family) = glm_instance(seed, fam, 20, 40);
        let keys = gauss_vec(20, perm_seed);
        let mut perm: Vec<usize> = (0..20).collect();
        perm.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]));
        let x1 = DesignMatrix::standardized(raw.clone()).unwrap();
        let x2 = DesignMatrix::standardized(raw.select_rows(&perm)).unwrap();
        let y2 = DVector::from_iterator(20, perm.iter().map(|&i| y[i]));
        let a = glm_mml_lambda(&x1, &y, &family).unwrap().lambda.unwrap();
        let b = glm_mml_lambda(&x2, &y2, &family).unwrap().lambda.unwrap();
        prop_assert!(rel_diff(a, b) <= 1e-4, "{a} vs {b}");
        Ok(())
    })
}

// simulation

fn small_config(seed: u64) -> SimConfig {
    let mut cfg = SimConfig::standard();
    cfg.n = 20;
    cfg.p = 30;
    cfg.replicates = 4;
    cfg.base_seed = seed;
    cfg.estimators = vec!["mml".into(), "gcv".into(), "cv".into()];
    cfg.settings.k_folds = 4;
    cfg
}

pub fn seed_isolation() -> PropResult {
    check(8, (0u64..u64::MAX / 2, 0usize..4, 1u64..1000), |(seed, r, shift)| {
        let cfg = small_config(seed);
        let mut moved = cfg.clone();
        moved.base_seed = seed + shift;

        let echo_lines = |c: &SimConfig| -> Vec<String> { c.to_toml().lines().filter(|l| !l.starts_with("base_seed")).map(str::to_string).collect() };
        prop_assert_eq!(echo_lines(&cfg), echo_lines(&moved));

        let a = gen_replicate(&cfg, r, None).unwrap();
        let b = gen_replicate(&moved, r, None).unwrap();
        prop_assert_ne!(&a.y, &b.y);

        let mut direct = cfg.clone();
        direct.base_seed = seed + r as u64;
        let c = gen_replicate(&direct, 0, None).unwrap();
        prop_assert_eq!(&a.x, &c.x);
        prop_assert_eq!(&a.y, &c.y);

        let methods = cfg.methods().unwrap();
        let sweep = run_comparison(&cfg).unwrap();
        let alone = run_replicate(&cfg, r, None, &methods);
        let from_sweep: Vec<ReportRow> = sweep.rows.iter().filter(|row| row.replicate == Some(r)).cloned().collect();
        prop_assert_eq!(alone, from_sweep);
        Ok(())
    })
}

fn within_3se(name: &str, est: f64, se: f64, target: f64) -> PropResult {
    ensure((est - target).abs() <= 3.0 * se, || format!("{name}: estimate {est} is more than 3 SE ({se}) from {target}"))
}

pub fn effect_generator_moments() -> PropResult {
    let cases = [
        ("gaussian(0.01)", EffectPrior::Gaussian { tau2: 0.01 }, 100_000, 0.01),
        ("spike_slab(0.9, 0.1)", EffectPrior::SpikeSlab { p0: 0.9, tau0_2: 0.1 }, 1_000_000, 0.01),
        ("laplace(0.0707)", EffectPrior::Laplace { b: 0.0707, tau2: None }, 1_000_000, 2.0 * 0.0707 * 0.0707),
        ("uniform(0.17)", EffectPrior::Uniform { a: 0.17, tau2: None }, 1_000_000, 0.17 * 0.17 / 3.0),
    ];
    for (k, (name, prior, p, target)) in cases.into_iter().enumerate() {
        let mut rng = stream(900 + k as u64, Stream::Effects);
        let beta = draw_effects(&prior, p, &mut rng);
        let (var, se) = variance_with_se(beta.as_slice());
        within_3se(name, var, se, target)?;
        let (mean, se) = mean_with_se(beta.as_slice());
        within_3se(name, mean, se, 0.0)?;
    }
    let mut cfg = SimConfig::standard();
    cfg.p = 1;
    cfg.m = 200_000;
    cfg.response = ResponseKind::Mixed { p0f: 0.5, tau0f_2: 0.2 };
    let alpha = gen_effects(&cfg, 77).alpha;
    let (var, se) = variance_with_se(alpha.as_slice());
    within_3se("fixed-effect spike_slab(0.5, 0.2)", var, se, 0.1)
}

pub fn error_and_response_moments() -> PropResult {
    let mut rng = stream(31, Stream::Noise);
    let e = draw_errors(&ErrorModel::Gaussian { sigma2: 10.0 }, 100_000, &mut rng);
    let (var, se) = variance_with_se(e.as_slice());
    within_3se("gaussian(10)", var, se, 10.0)?;
    let e = draw_errors(&ErrorModel::ScaledT4 { sigma2: 10.0 }, 1_000_000, &mut rng);
    let (var, se) = variance_with_se(e.as_slice());
    within_3se("scaled_t4(10)", var, se, 10.0)?;

    let n = 100_000;
    let x = DesignMatrix::new(gaussian_matrix(n, 1, 5)).unwrap();
    let xf = DMatrix::zeros(n, 0);
    let zero = Effects { beta: DVector::zeros(1), alpha: DVector::zeros(0) };
    let mut cfg = SimConfig::standard();
    cfg.n = n;
    cfg.p = 1;
    let y = gen_response(&cfg, &x, &xf, &zero, 8).unwrap();
    let (var, se) = variance_with_se(y.as_slice());
    within_3se("linear response with beta = 0", var, se, 10.0)?;
    cfg.errors = None;
    cfg.response = ResponseKind::Poisson;
    let y = gen_response(&cfg, &x, &xf, &zero, 9).unwrap();
    let (mean, se) = mean_with_se(y.as_slice());
    within_3se("poisson with beta = 0", mean, se, 1.0)?;
    cfg.response = ResponseKind::Binomial { n_trials: 5 };
    let y = gen_response(&cfg, &x, &xf, &zero, 10).unwrap();
    let (mean, se) = mean_with_se(y.as_slice());
    within_3se("binomial(5) with beta = 0", mean, se, 2.5)
}

fn block_design(rho: f64) -> DMatrix<f64> {
    let mut cfg = SimConfig::standard();
    cfg.n = 5000;
    cfg.p = 20;
    cfg.design = DesignModel::BlockCorr { rho, block_size: 10 };
    gen_design(&cfg, 17).unwrap().into_values()
}

pub fn block_correlation_structure() -> PropResult {
    for rho in [0.0, 0.5] {
        let x = block_design(rho);
        for i in 0..20 {
            for j in (i + 1)..20 {
                let r = correlation(x.column(i).as_slice(), x.column(j).as_slice());
                let target = if i / 10 == j / 10 { rho } else { 0.0 };
                ensure((r - target).abs() <= 0.05, || format!("rho = {rho}: corr({i}, {j}) = {r}, expected {target} +- 0.05"))?;
            }
        }
    }
    Ok(())
}

pub fn simulation_deterministic() -> PropResult {
    ensure(block_design(0.5) == block_design(0.5), || "block design differs between calls".into())?;
    let cfg = small_config(3);
    let a = run_comparison(&cfg).map_err(|e| e.to_string())?;
    let b = run_comparison(&cfg).map_err(|e| e.to_string())?;
    ensure(a.rows == b.rows, || "replicate table differs between runs".into())
}

// cli

fn opt_value() -> impl Strategy<Value = Option<f64>> {
    prop_oneof![
        Just(None),
        any::<f64>().prop_filter("finite", |v| v.is_finite()).prop_map(Some),
        Just(Some(f64::INFINITY)),
        Just(Some(f64::NEG_INFINITY)),
    ]
}

fn report_row() -> impl Strategy<Value = ReportRow> {
    (
        (0usize..Method::ALL.len(), opt_value(), opt_value(), opt_value(), opt_value()),
        (any::<bool>(), opt_value(), 0.0..100.0f64, proptest::option::of(any::<u64>()), proptest::option::of(0usize..1000)),
        (proptest::option::of("[a-z_;:=., 0-9-]{1,30}"), proptest::option::of(prop::collection::vec(-1e3..1e3f64, 0..4))),
    )
        .prop_map(|((m, sigma2, tau2, lambda, h2), (converged, log_objective, wall_time_s, seed, replicate), (note, alpha_hat))| ReportRow {
            method: Method::ALL[m],
            sigma2,
            tau2,
            lambda,
            h2,
            converged,
            log_objective,
            wall_time_s,
            seed,
            replicate,
            note,
            alpha_hat,
        })
}

pub fn report_files_round_trip() -> PropResult {
    check(64, prop::collection::vec(report_row(), 0..6), |rows| {
        for format in [Format::Csv, Format::Json] {
            let mut buf = Vec::new();
            write_rows(&rows, format, &mut buf).unwrap();
            let back = read_rows(format, buf.as_slice()).unwrap();
            prop_assert_eq!(&back, &rows, "{:?}", format);
        }
        Ok(())
    })?;
    for name in ["standard", "mixed", "poisson", "moran"] {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("examples/{name}.toml"));
        let cfg = SimConfig::load(&path).map_err(|e| e.to_string())?;
        let back = SimConfig::parse(&cfg.to_toml(), false)?;
        ensure(back == cfg, || format!("{name}.toml does not survive a config echo round trip"))?;
    }
    Ok(())
}

pub fn seed_determines_output() -> PropResult {
    check(4, (1u64..1000, 1u64..1000), |(s1, s2)| {
        prop_assume!(s1 != s2);
        let run = |seed: u64| {
            let mut cfg = small_config(seed);
            cfg.replicates = 2;
            run_comparison(&cfg).unwrap().rows
        };
        prop_assert_eq!(run(s1), run(s1));
        prop_assert_ne!(run(s1), run(s2));
        Ok(())
    })
}

pub type Property = (&'static str, fn() -> PropResult);

pub const ALL: &[Property] = &[
    ("linalg: hat trace equals trace_product", hat_trace_matches_trace_product),
    ("linalg: ridge norm monotone in lambda", ridge_norm_monotone),
    ("linalg: thin SVD reconstructs X", svd_reconstructs),
    ("linalg: Penrose conditions", penrose_conditions),
    ("optim: determinism", optimizer_deterministic),
    ("optim: bound respect", optimizer_respects_bounds),
    ("linear: MML scale equivariance", mml_scale_equivariance),
    ("linear: GCV rotation invariance", gcv_rotation_invariance),
    ("linear: MoM unbiasedness (2000 replicates)", mom_unbiased),
    ("linear: HiLMM and MML surfaces coincide", hilmm_mml_identity),
    ("linear: estimators deterministic", estimators_deterministic),
    ("mixed: REML invariant under Xf T", reml_invariant_under_fixed_transform),
    ("mixed: m = 0 reduces to MML bit for bit", mixed_without_fixed_is_mml),
    ("mixed: contrast basis independence", contrast_basis_independence),
    ("bayes: SVD form equals determinant form", bayes_svd_equals_determinant_form),
    ("bayes: EB maximizer dominates a 400-point grid", eb_maximizer_dominates_grid),
    ("bayes: b* exceeds b", posterior_rate_exceeds_prior),
    ("glm: Laplace exact for Gaussian family", laplace_exact_for_gaussian),
    ("glm: latent mode stationary", latent_mode_is_stationary),
    ("glm: Newton objective monotone", newton_is_monotone),
    ("glm: latent mode in column space", latent_mode_in_column_space),
    ("glm: lambda invariant under row permutation", glm_lambda_row_permutation),
    ("sim: seed isolation", seed_isolation),
    ("sim: effect generator moments", effect_generator_moments),
    ("sim: error and response moments", error_and_response_moments),
    ("sim: block correlation structure", block_correlation_structure),
    ("sim: determinism", simulation_deterministic),
    ("cli: output files round trip", report_files_round_trip),
    ("cli: seed determines output", seed_determines_output),
];
