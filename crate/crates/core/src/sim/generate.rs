use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp1, Poisson, StandardNormal, StudentT, Uniform};

use super::config::{DesignModel, EffectPrior, ErrorModel, ResponseKind, SimConfig};
use crate::error::{Error, Result};
use crate::linalg::DesignMatrix;
use crate::matio::read_matrix;
use crate::rng::{stream, Stream};

/// Linear predictors above this make Poisson draws unusable.
pub const POISSON_ETA_LIMIT: f64 = 30.0;

/// Cholesky factor of the `b × b` equicorrelation matrix with off-diagonal `rho`.
pub fn block_cholesky(rho: f64, b: usize) -> Result<DMatrix<f64>> {
    let lo = if b > 1 { -1.0 / (b as f64 - 1.0) } else { -1.0 };
    if !(rho > lo && rho < 1.0) {
        return Err(Error::Domain(format!(
            "rho = {rho} outside ({lo}, 1): block correlation matrix of size {b} is not positive definite"
        )));
    }
    let xi = DMatrix::from_fn(b, b, |i, j| if i == j { 1.0 } else { rho });
    xi.cholesky()
        .map(|c| c.unpack())
        .ok_or_else(|| Error::Domain(format!("block correlation matrix (rho = {rho}, size {b}) is not positive definite")))
}

/// Raw (unstandardized) `n × p` design with rows iid `N(0, Ξ)`.
pub fn block_corr_matrix(n: usize, p: usize, rho: f64, block_size: usize, seed: u64) -> Result<DMatrix<f64>> {
    let mut rng = stream(seed, Stream::Design);
    let mut x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
    if rho == 0.0 {
        return Ok(x);
    }
    let full = block_cholesky(rho, block_size)?;
    let mut start = 0;
    while start < p {
        let b = block_size.min(p - start);
        let l = if b == block_size { full.clone() } else { block_cholesky(rho, b)? };
        let z = x.columns(start, b).into_owned();
        x.columns_mut(start, b).copy_from(&(z * l.transpose()));
        start += b;
    }
    Ok(x)
}

/// Loads a `user_matrix` design once; simulated designs return `None`.
pub fn load_user_design(cfg: &SimConfig) -> Result<Option<DesignMatrix>> {
    let DesignModel::UserMatrix { path } = &cfg.design else { return Ok(None) };
    let raw = read_matrix(path)?;
    if raw.shape() != (cfg.n, cfg.p) {
        return Err(Error::File {
            path: path.clone(),
            message: format!("matrix is {}x{}, config declares n = {}, p = {}", raw.nrows(), raw.ncols(), cfg.n, cfg.p),
        });
    }
    let x = DesignMatrix::new(raw)?;
    Ok(Some(if cfg.standardize { x.standardize()? } else { x }))
}

/// Design for one replicate. `user_matrix` designs are loaded (and standardized) on every call;
/// the harness loads them once through [`load_user_design`] instead.
pub fn gen_design(cfg: &SimConfig, seed: u64) -> Result<DesignMatrix> {
    let raw = match &cfg.design {
        DesignModel::IidNormal => block_corr_matrix(cfg.n, cfg.p, 0.0, 1, seed)?,
        DesignModel::BlockCorr { rho, block_size } => block_corr_matrix(cfg.n, cfg.p, *rho, *block_size, seed)?,
        DesignModel::UserMatrix { .. } => return Ok(load_user_design(cfg)?.expect("user design")),
    };
    let x = DesignMatrix::new(raw)?;
    if cfg.standardize {
        x.standardize()
    } else {
        Ok(x)
    }
}

/// `n × m` fixed-effect design, iid N(0,1) and left unstandardized.
pub fn gen_fixed_design(cfg: &SimConfig, seed: u64) -> DMatrix<f64> {
    let mut rng = stream(seed, Stream::FixedDesign);
    DMatrix::from_fn(cfg.n, cfg.m, |_, _| StandardNormal.sample(&mut rng))
}

fn spike_slab<R: Rng>(rng: &mut R, p0: f64, slab_var: f64) -> f64 {
    let u: f64 = rng.random();
    let z: f64 = StandardNormal.sample(rng);
    if u < p0 {
        0.0
    } else {
        slab_var.sqrt() * z
    }
}

pub fn draw_effects<R: Rng>(prior: &EffectPrior, p: usize, rng: &mut R) -> DVector<f64> {
    match prior {
        EffectPrior::Gaussian { tau2 } => {
            let s = tau2.sqrt();
            DVector::from_fn(p, |_, _| {
                let z: f64 = StandardNormal.sample(rng);
                s * z
            })
        }
        EffectPrior::SpikeSlab { p0, tau0_2 } => DVector::from_fn(p, |_, _| spike_slab(rng, *p0, *tau0_2)),
        EffectPrior::Laplace { b, .. } => DVector::from_fn(p, |_, _| {
            let e1: f64 = Exp1.sample(rng);
            let e2: f64 = Exp1.sample(rng);
            b * (e1 - e2)
        }),
        EffectPrior::Uniform { a, .. } => {
            let u = Uniform::new(-a, *a).expect("validated half-width");
            DVector::from_fn(p, |_, _| u.sample(rng))
        }
        EffectPrior::Fixed { values } => DVector::from_column_slice(values),
    }
}

/// Random effects `β` and, for mixed responses, fixed effects `α`.
#[derive(Debug, Clone, PartialEq)]
pub struct Effects {
    pub beta: DVector<f64>,
    pub alpha: DVector<f64>,
}

pub fn gen_effects(cfg: &SimConfig, seed: u64) -> Effects {
    effects_from(cfg, seed, Stream::Effects)
}

fn effects_from(cfg: &SimConfig, seed: u64, which: Stream) -> Effects {
    let mut rng = stream(seed, which);
    let beta = draw_effects(&cfg.effects, cfg.p, &mut rng);
    let alpha = match cfg.response {
        ResponseKind::Mixed { p0f, tau0f_2 } => {
            let mut rng = stream(seed, Stream::FixedEffects);
            DVector::from_fn(cfg.m, |_, _| spike_slab(&mut rng, p0f, tau0f_2))
        }
        _ => DVector::zeros(0),
    };
    Effects { beta, alpha }
}

pub fn draw_errors<R: Rng>(model: &ErrorModel, n: usize, rng: &mut R) -> DVector<f64> {
    match *model {
        ErrorModel::Gaussian { sigma2 } => {
            let s = sigma2.sqrt();
            DVector::from_fn(n, |_, _| {
                let z: f64 = StandardNormal.sample(rng);
                s * z
            })
        }
        ErrorModel::ScaledT4 { sigma2 } => {
            let t = StudentT::new(4.0).expect("4 degrees of freedom");
            let s = (sigma2 / 2.0).sqrt();
            DVector::from_fn(n, |_, _| s * t.sample(rng))
        }
    }
}

pub fn gen_response(
    cfg: &SimConfig,
    x: &DesignMatrix,
    xf: &DMatrix<f64>,
    effects: &Effects,
    seed: u64,
) -> Result<DVector<f64>> {
    response_from(cfg, x, xf, effects, seed, Stream::Noise)
}

fn response_from(
    cfg: &SimConfig,
    x: &DesignMatrix,
    xf: &DMatrix<f64>,
    effects: &Effects,
    seed: u64,
    which: Stream,
) -> Result<DVector<f64>> {
    let mut eta = x.values() * &effects.beta;
    if effects.alpha.len() > 0 {
        eta += xf * &effects.alpha;
    }
    let mut rng = stream(seed, which);
    match cfg.response {
        ResponseKind::Linear | ResponseKind::Mixed { .. } => {
            let model = cfg.errors.as_ref().ok_or_else(|| Error::Input("linear response needs an error model".into()))?;
            Ok(eta + draw_errors(model, cfg.n, &mut rng))
        }
        ResponseKind::Poisson => {
            let worst = eta.max();
            if worst > POISSON_ETA_LIMIT {
                return Err(Error::Domain(format!(
                    "Poisson linear predictor {worst:.3} exceeds {POISSON_ETA_LIMIT}"
                )));
            }
            Ok(eta.map(|e| match e.exp() {
                0.0 => 0.0,
                mu => Poisson::new(mu).expect("finite positive mean").sample(&mut rng),
            }))
        }
        ResponseKind::Binomial { n_trials } => Ok(eta.map(|e| {
            let prob = 1.0 / (1.0 + (-e).exp());
            Binomial::new(n_trials as u64, prob).expect("probability in [0, 1]").sample(&mut rng) as f64
        })),
    }
}

/// One simulated dataset.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub index: usize,
    pub seed: u64,
    pub x: DesignMatrix,
    pub xf: DMatrix<f64>,
    pub effects: Effects,
    pub y: DVector<f64>,
    /// Set when the Poisson guard forced a redraw of effects and noise.
    pub resampled: bool,
}

/// Replicate `r` from scratch; reproducible in isolation given `(cfg, r)`.
pub fn gen_replicate(cfg: &SimConfig, r: usize, user: Option<&DesignMatrix>) -> Result<Replicate> {
    let seed = cfg.base_seed.wrapping_add(r as u64);
    let x = match user {
        Some(x) => x.clone(),
        None => gen_design(cfg, seed)?,
    };
    let xf = gen_fixed_design(cfg, seed);
    let effects = gen_effects(cfg, seed);
    let (effects, y, resampled) = match gen_response(cfg, &x, &xf, &effects, seed) {
        Ok(y) => (effects, y, false),
        Err(Error::Domain(first)) => {
            let effects = effects_from(cfg, seed, Stream::EffectsRetry);
            let y = response_from(cfg, &x, &xf, &effects, seed, Stream::NoiseRetry)
                .map_err(|e| Error::Domain(format!("replicate {r}: {first}; resampled once: {e}")))?;
            (effects, y, true)
        }
        Err(e) => return Err(e),
    };
    Ok(Replicate {
        index: r,
        seed,
        x,
        xf,
        effects,
        y,
        resampled,
    })
}
