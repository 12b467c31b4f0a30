//! Deterministic bounded maximization used by all likelihood-based estimators.
//!
//! Parameters are optimized in a transformed space (log or logit) chosen by the
//! caller; the bounds below live in that space.

use crate::error::{input, Error, Result};

const SCAN_POINTS: usize = 64;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, PartialEq)]
pub struct OptBounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub max_iter: usize,
    /// Relative tolerance on the (transformed) argument.
    pub tol: f64,
}

impl OptBounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let b = Self {
            lo,
            hi,
            max_iter: 500,
            tol: 1e-8,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn scalar(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    pub fn with_tol(mut self, tol: f64) -> Result<Self> {
        self.tol = tol;
        self.validate()?;
        Ok(self)
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Result<Self> {
        self.max_iter = max_iter;
        self.validate()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    fn validate(&self) -> Result<()> {
        if self.lo.is_empty() || self.lo.len() != self.hi.len() {
            return Err(input("bounds must be non-empty and of equal length"));
        }
        if let Some(k) = (0..self.lo.len()).find(|&k| !(self.lo[k] < self.hi[k]) || !self.lo[k].is_finite() || !self.hi[k].is_finite()) {
            return Err(input(format!(
                "bound {k}: need finite lo < hi, got [{}, {}]",
                self.lo[k], self.hi[k]
            )));
        }
        if !(self.tol > 0.0) {
            return Err(input("tolerance must be positive"));
        }
        if self.max_iter < 10 {
            return Err(input("max_iter must be at least 10"));
        }
        Ok(())
    }

    fn clamp(&self, x: &mut [f64]) {
        for (k, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lo[k], self.hi[k]);
        }
    }

    fn at_bound(&self, x: &[f64]) -> bool {
        x.iter().enumerate().any(|(k, &v)| {
            let w = 1e-6 * (self.hi[k] - self.lo[k]);
            v - self.lo[k] <= w || self.hi[k] - v <= w
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarOptimum {
    pub argmax: f64,
    pub value: f64,
    pub converged: bool,
    /// The maximizer sits on (or within 1e-6 of the width of) an endpoint.
    pub at_bound: bool,
    pub evaluations: usize,
}

/// Coarse scan over 64 equally spaced points of `[lo, hi]`, then golden-section
/// refinement on the bracket around the best scan point.
pub fn maximize_1d<F: FnMut(f64) -> f64>(mut f: F, bounds: &OptBounds) -> Result<ScalarOptimum> {
    if bounds.dim() != 1 {
        return Err(input("maximize_1d needs one-dimensional bounds"));
    }
    let (lo, hi) = (bounds.lo[0], bounds.hi[0]);
    let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
    let mut eval = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::NEG_INFINITY
        }
    };

    let scan: Vec<(f64, f64)> = (0..SCAN_POINTS)
        .map(|i| {
            let x = if i == SCAN_POINTS - 1 { hi } else { lo + step * i as f64 };
            (x, eval(x))
        })
        .collect();
    let mut evaluations = SCAN_POINTS;
    let best = (0..SCAN_POINTS).fold(0, |b, i| if scan[i].1 > scan[b].1 { i } else { b });
    if scan[best].1 == f64::NEG_INFINITY {
        return Err(Error::Optimization {
            message: format!("objective non-finite at every scan point of [{lo}, {hi}]"),
            scan,
        });
    }

    let mut a = scan[best.saturating_sub(1)].0;
    let mut b = scan[(best + 1).min(SCAN_POINTS - 1)].0;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c);
    let mut fd = eval(d);
    evaluations += 2;
    let mut converged = false;
    for _ in 0..bounds.max_iter {
        if (b - a).abs() <= bounds.tol * (1.0 + 0.5 * (a + b).abs()) {
            converged = true;
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d);
        }
        evaluations += 1;
    }

    let mut candidates = vec![(c, fc), (d, fd), scan[best]];
    for x in [a, b] {
        candidates.push((x, eval(x)));
        evaluations += 1;
    }
    let (argmax, value) = candidates
        .into_iter()
        .fold((f64::NAN, f64::NEG_INFINITY), |acc, cand| if cand.1 > acc.1 { cand } else { acc });

    Ok(ScalarOptimum {
        argmax,
        value,
        converged,
        at_bound: bounds.at_bound(&[argmax]),
        evaluations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub argmax: Vec<f64>,
    pub value: f64,
    /// Stationarity check passed and the iteration cap was not hit.
    pub converged: bool,
    pub at_bound: bool,
    pub iterations: usize,
    /// Norm of the projected central-difference gradient at the optimum.
    pub gradient_norm: f64,
}

/// Bounded Nelder–Mead simplex search, restarted once from its own optimum,
/// then a few damped Newton steps when the optimum is interior.
///
/// Convergence is confirmed by a projected central-difference gradient
/// (step 1e-5) whose norm must be below `1e-3·(1 + |f|)`.
pub fn maximize_nd<F: FnMut(&[f64]) -> f64>(mut f: F, init: &[f64], bounds: &OptBounds) -> Result<Optimum> {
    let k = bounds.dim();
    if init.len() != k {
        return Err(input(format!("initial point has {} coordinates, bounds have {k}", init.len())));
    }
    let mut x0 = init.to_vec();
    bounds.clamp(&mut x0);
    let f0 = f(&x0);
    if !f0.is_finite() {
        return Err(input(format!("objective is not finite at the initial point {x0:?}")));
    }
    let mut neg = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            -v
        } else {
            f64::INFINITY
        }
    };

    let first = nelder_mead(&mut neg, x0, bounds);
    let second = nelder_mead(&mut neg, first.x.clone(), bounds);
    let iterations = first.iterations + second.iterations;
    let hit_cap = second.hit_cap;
    let (x, fx) = if second.fx <= first.fx { (second.x, second.fx) } else { (first.x, first.fx) };
    let (x, fx) = newton_polish(&mut neg, x, fx, bounds);

    let gradient_norm = projected_gradient_norm(&mut neg, &x, bounds);
    let value = -fx;
    Ok(Optimum {
        converged: !hit_cap && gradient_norm <= 1e-3 * (1.0 + value.abs()),
        at_bound: bounds.at_bound(&x),
        argmax: x,
        value,
        iterations,
        gradient_norm,
    })
}

struct SimplexRun {
    x: Vec<f64>,
    fx: f64,
    iterations: usize,
    hit_cap: bool,
}

fn nelder_mead<F: FnMut(&[f64]) -> f64>(f: &mut F, x0: Vec<f64>, bounds: &OptBounds) -> SimplexRun {
    let k = x0.len();
    let mut pts = vec![x0.clone()];
    for i in 0..k {
        let width = bounds.hi[i] - bounds.lo[i];
        let step = (0.1 * x0[i].abs()).max(0.25).min(0.1 * width);
        let mut p = x0.clone();
        p[i] = if p[i] + step <= bounds.hi[i] { p[i] + step } else { p[i] - step };
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();

    let mut iterations = 0;
    let mut hit_cap = true;
    while iterations < bounds.max_iter {
        let mut order: Vec<usize> = (0..=k).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let scale = 1.0 + pts[0].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let size = pts[1..]
            .iter()
            .map(|p| p.iter().zip(&pts[0]).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
            .fold(0.0_f64, f64::max);
        let spread = vals[k] - vals[0];
        if size <= bounds.tol * scale || (spread.is_finite() && spread <= 1e-14 * (1.0 + vals[0].abs()) && size <= 1e-4 * scale) {
            hit_cap = false;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..k).map(|j| pts[..k].iter().map(|p| p[j]).sum::<f64>() / k as f64).collect();
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = (0..k).map(|j| centroid[j] + t * (pts[k][j] - centroid[j])).collect();
            bounds.clamp(&mut p);
            p
        };

        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                pts[k] = xe;
                vals[k] = fe;
            } else {
                pts[k] = xr;
                vals[k] = fr;
            }
            continue;
        }
        if fr < vals[k - 1] {
            pts[k] = xr;
            vals[k] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[k] {
            let xc = along(-0.5);
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = along(0.5);
            let fc = f(&xc);
            (xc, fc)
        };
        if fc < vals[k].min(fr) {
            pts[k] = xc;
            vals[k] = fc;
            continue;
        }
        // shrink toward the best vertex
        for i in 1..=k {
            let p: Vec<f64> = (0..k).map(|j| pts[0][j] + 0.5 * (pts[i][j] - pts[0][j])).collect();
            vals[i] = f(&p);
            pts[i] = p;
        }
    }
    let best = (0..=k).fold(0, |b, i| if vals[i] < vals[b] { i } else { b });
    SimplexRun {
        x: pts[best].clone(),
        fx: vals[best],
        iterations,
        hit_cap,
    }
}

/// Finite-difference Newton on the negated objective. Steps that leave the
/// box, lack a positive definite Hessian or fail to decrease are rejected.
fn newton_polish<F: FnMut(&[f64]) -> f64>(f: &mut F, mut x: Vec<f64>, mut fx: f64, bounds: &OptBounds) -> (Vec<f64>, f64) {
    const H: f64 = 1e-4;
    let k = x.len();
    for _ in 0..5 {
        if (0..k).any(|j| x[j] - 2.0 * H < bounds.lo[j] || x[j] + 2.0 * H > bounds.hi[j]) {
            break;
        }
        let mut at = |d: &[(usize, f64)]| {
            let mut p = x.clone();
            for &(j, h) in d {
                p[j] += h;
            }
            f(&p)
        };
        let mut g = nalgebra::DVector::zeros(k);
        let mut hess = nalgebra::DMatrix::zeros(k, k);
        for i in 0..k {
            let (fu, fd) = (at(&[(i, H)]), at(&[(i, -H)]));
            g[i] = (fu - fd) / (2.0 * H);
            hess[(i, i)] = (fu - 2.0 * fx + fd) / (H * H);
            for j in 0..i {
                let v = (at(&[(i, H), (j, H)]) - at(&[(i, H), (j, -H)]) - at(&[(i, -H), (j, H)]) + at(&[(i, -H), (j, -H)])) / (4.0 * H * H);
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }
        if !g.iter().chain(hess.iter()).all(|v| v.is_finite()) {
            break;
        }
        let Some(chol) = hess.cholesky() else { break };
        let step = -chol.solve(&g);
        let mut cand: Vec<f64> = (0..k).map(|j| x[j] + step[j]).collect();
        bounds.clamp(&mut cand);
        let fc = f(&cand);
        if !(fc <= fx + 1e-12 * (1.0 + fx.abs())) {
            break;
        }
        let moved = (0..k).fold(0.0_f64, |m, j| m.max((cand[j] - x[j]).abs()));
        x = cand;
        fx = fc;
        if moved <= 1e-12 * (1.0 + x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))) {
            break;
        }
    }
    (x, fx)
}

/// Central differences with step 1e-5; one-sided at an active bound, where
/// only the component pointing back into the box counts.
fn projected_gradient_norm<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], bounds: &OptBounds) -> f64 {
    const H: f64 = 1e-5;
    let mut sq = 0.0;
    let mut p = x.to_vec();
    for j in 0..x.len() {
        let up = (x[j] + H).min(bounds.hi[j]);
        let dn = (x[j] - H).max(bounds.lo[j]);
        p[j] = up;
        let fu = f(&p);
        p[j] = dn;
        let fd = f(&p);
        p[j] = x[j];
        let mut g = (fu - fd) / (up - dn);
        // f is the negated objective here, so descent direction is -g
        if (x[j] <= bounds.lo[j] && g > 0.0) || (x[j] >= bounds.hi[j] && g < 0.0) {
            g = 0.0;
        }
        sq += g * g;
    }
    sq.sqrt()
}
