//! Maximum-likelihood hyperparameters: projected BFGS in log space from a
//! set of low-discrepancy starting points.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::{seq::index, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{covariance, factor_with_jitter, sq_dist, Input, Kernel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub sigma_f: (f64, f64),
    pub length: (f64, f64),
    pub sigma_n: (f64, f64),
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            sigma_f: (1e-2, 1e3),
            length: (1e-4, 1.0),
            sigma_n: (1e-6, 10.0),
        }
    }
}

impl Bounds {
    fn log_box(&self) -> (Vector3<f64>, Vector3<f64>) {
        (
            Vector3::new(self.sigma_f.0.ln(), self.length.0.ln(), self.sigma_n.0.ln()),
            Vector3::new(self.sigma_f.1.ln(), self.length.1.ln(), self.sigma_n.1.ln()),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeOptions {
    pub bounds: Bounds,
    pub restarts: usize,
    pub seed: u64,
    /// Optimize on a seeded random subset of at most this many points.
    pub max_points: usize,
    pub max_iterations: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            bounds: Bounds::default(),
            restarts: 20,
            seed: 0,
            max_points: 300,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestartRecord {
    pub initial: Kernel,
    pub initial_lml: f64,
    pub final_lml: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationReport {
    pub kernel: Kernel,
    /// Log marginal likelihood of `kernel` on the optimization subset.
    pub lml: f64,
    /// Set when no restart finished with a successful line search.
    pub warning: bool,
    pub points_used: usize,
    pub restarts: Vec<RestartRecord>,
}

/// Log marginal likelihood and its gradient with respect to
/// `(ln σ_f, ln ℓ, ln σ_n)`; `None` when the covariance cannot be factored.
pub fn lml_with_gradient(x: &[Input], y: &[f64], kernel: &Kernel) -> Option<(f64, [f64; 3])> {
    let n = x.len();
    let k = covariance(x, kernel);
    let (l, _) = factor_with_jitter(&k, kernel.sigma_f * kernel.sigma_f).ok()?;
    let yv = DVector::from_column_slice(y);
    let mut alpha = yv.clone();
    l.solve_lower_triangular_mut(&mut alpha);
    l.tr_solve_lower_triangular_mut(&mut alpha);
    let logdet: f64 = l.diagonal().iter().map(|d| d.ln()).sum();
    let lml = -0.5 * yv.dot(&alpha) - logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    if !lml.is_finite() {
        return None;
    }
    let linv = lower_inverse(&l);
    let kinv = linv.transpose() * &linv;
    let inv_l2 = 1.0 / (kernel.length * kernel.length);
    let sf2 = kernel.sigma_f * kernel.sigma_f;
    let mut g = [0.0; 3];
    for j in 0..n {
        for i in 0..n {
            let w = alpha[i] * alpha[j] - kinv[(i, j)];
            let kf = if i == j { sf2 } else { k[(i, j)] };
            g[0] += w * 2.0 * kf;
            g[1] += w * kf * sq_dist(&x[i], &x[j]) * inv_l2;
        }
        g[2] += (alpha[j] * alpha[j] - kinv[(j, j)]) * 2.0 * kernel.sigma_n * kernel.sigma_n;
    }
    Some((lml, [0.5 * g[0], 0.5 * g[1], 0.5 * g[2]]))
}

/// Inverse of a lower-triangular matrix, by column-wise forward substitution.
fn lower_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let ls = l.as_slice();
    let mut x = DMatrix::zeros(n, n);
    let xs = x.as_mut_slice();
    for j in 0..n {
        let col = &mut xs[j * n..(j + 1) * n];
        col[j] = 1.0;
        for k in j..n {
            let v = col[k] / ls[k * n + k];
            col[k] = v;
            if v != 0.0 {
                for (c, lk) in col[k + 1..].iter_mut().zip(&ls[k * n + k + 1..(k + 1) * n]) {
                    *c -= v * lk;
                }
            }
        }
    }
    x
}

fn kernel_at(theta: &Vector3<f64>) -> Kernel {
    Kernel {
        sigma_f: theta[0].exp(),
        length: theta[1].exp(),
        sigma_n: theta[2].exp(),
    }
}

fn halton(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

pub fn optimize_hyperparameters(x: &[Input], y: &[f64], options: &OptimizeOptions) -> Result<OptimizationReport> {
    if x.len() < 2 || x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "hyperparameter optimization needs at least two points with targets (got {} / {})",
            x.len(),
            y.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let (xs, ys): (Vec<Input>, Vec<f64>) = if x.len() > options.max_points {
        let mut idx = index::sample(&mut rng, x.len(), options.max_points).into_vec();
        idx.sort_unstable();
        idx.iter().map(|&i| (x[i], y[i])).unzip()
    } else {
        (x.to_vec(), y.to_vec())
    };
    let (lo, hi) = options.bounds.log_box();
    let shift: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
    let objective = |t: &Vector3<f64>| {
        lml_with_gradient(&xs, &ys, &kernel_at(t)).map(|(l, g)| (-l, Vector3::new(-g[0], -g[1], -g[2])))
    };

    let mut best: Option<(f64, Vector3<f64>)> = None;
    let mut records = Vec::with_capacity(options.restarts);
    let mut any_clean = false;
    for r in 0..options.restarts.max(1) {
        let u = [
            (halton(r + 1, 2) + shift[0]).fract(),
            (halton(r + 1, 3) + shift[1]).fract(),
            (halton(r + 1, 5) + shift[2]).fract(),
        ];
        let t0 = Vector3::from_fn(|i, _| lo[i] + u[i] * (hi[i] - lo[i]));
        let Some(start) = objective(&t0) else {
            log::debug!("restart {r}: covariance not factorable at the start point");
            continue;
        };
        let out = projected_bfgs(&objective, t0, start, &lo, &hi, options.max_iterations);
        any_clean |= !out.line_search_failed;
        records.push(RestartRecord {
            initial: kernel_at(&t0),
            initial_lml: -start.0,
            final_lml: -out.f,
            converged: out.converged,
        });
        if best.as_ref().is_none_or(|(f, _)| out.f < *f) {
            best = Some((out.f, out.x));
        }
    }
    let Some((f, t)) = best else {
        return Err(Error::Factorization { condition: f64::INFINITY });
    };
    let warning = !any_clean;
    if warning {
        log::warn!("every hyperparameter restart ended in a failed line search");
    }
    Ok(OptimizationReport {
        kernel: kernel_at(&t),
        lml: -f,
        warning,
        points_used: xs.len(),
        restarts: records,
    })
}

struct LocalResult {
    x: Vector3<f64>,
    f: f64,
    converged: bool,
    line_search_failed: bool,
}

fn clamp(x: Vector3<f64>, lo: &Vector3<f64>, hi: &Vector3<f64>) -> Vector3<f64> {
    Vector3::from_fn(|i, _| x[i].clamp(lo[i], hi[i]))
}

fn projected_bfgs(
    f: &dyn Fn(&Vector3<f64>) -> Option<(f64, Vector3<f64>)>,
    x0: Vector3<f64>,
    start: (f64, Vector3<f64>),
    lo: &Vector3<f64>,
    hi: &Vector3<f64>,
    max_iterations: usize,
) -> LocalResult {
    let mut x = x0;
    let (mut fx, mut g) = start;
    let initial_h = || Matrix3::identity() / g.norm().max(1.0);
    let mut h = initial_h();
    let mut fresh = true;
    let result = |x, f, converged, failed| LocalResult {
        x,
        f,
        converged,
        line_search_failed: failed,
    };
    for _ in 0..max_iterations {
        let active = Vector3::from_fn(|i, _| {
            let at_lo = x[i] <= lo[i] && g[i] > 0.0;
            let at_hi = x[i] >= hi[i] && g[i] < 0.0;
            if at_lo || at_hi { 0.0 } else { 1.0 }
        });
        let pg = g.component_mul(&active);
        if pg.amax() <= 1e-6 * (1.0 + fx.abs()) {
            return result(x, fx, true, false);
        }
        let mut d = -(h * pg).component_mul(&active);
        if g.dot(&d) >= 0.0 {
            h = Matrix3::identity() / g.norm().max(1.0);
            fresh = true;
            d = -h * pg;
        }
        let mut accepted = None;
        let mut t = 1.0;
        for _ in 0..40 {
            let xt = clamp(x + d * t, lo, hi);
            if let Some((ft, gt)) = f(&xt) {
                if ft <= fx + 1e-4 * g.dot(&(xt - x)) {
                    accepted = Some((xt, ft, gt));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xt, ft, gt)) = accepted else {
            if fresh {
                return result(x, fx, false, true);
            }
            h = Matrix3::identity() / g.norm().max(1.0);
            fresh = true;
            continue;
        };
        let s = xt - x;
        let yv = gt - g;
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() {
            let rho = 1.0 / sy;
            let i = Matrix3::identity();
            h = (i - s * yv.transpose() * rho) * h * (i - yv * s.transpose() * rho) + s * s.transpose() * rho;
            fresh = false;
        }
        let small = (fx - ft).abs() <= 1e-10 * (1.0 + fx.abs()) || s.amax() <= 1e-10;
        x = xt;
        fx = ft;
        g = gt;
        if small {
            return result(x, fx, true, false);
        }
    }
    result(x, fx, false, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::GpModel;
    use rand_distr::{Distribution, StandardNormal};

    fn prior_sample(seed: u64, n: usize, k: &Kernel) -> (Vec<Input>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Input> = (0..n)
            .map(|_| [rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05)])
            .collect();
        let l = covariance(&x, k).cholesky().unwrap().unpack();
        let z = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
        let y = l * z;
        (x, y.iter().copied().collect())
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let k = Kernel::new(2.0, 0.03, 0.2).unwrap();
        let (x, y) = prior_sample(1, 40, &k);
        let probe = Kernel::new(1.5, 0.02, 0.3).unwrap();
        let (_, g) = lml_with_gradient(&x, &y, &probe).unwrap();
        let t = Vector3::new(probe.sigma_f.ln(), probe.length.ln(), probe.sigma_n.ln());
        for i in 0..3 {
            let h = 1e-6;
            let mut a = t;
            let mut b = t;
            a[i] += h;
            b[i] -= h;
            let fa = lml_with_gradient(&x, &y, &kernel_at(&a)).unwrap().0;
            let fb = lml_with_gradient(&x, &y, &kernel_at(&b)).unwrap().0;
            let fd = (fa - fb) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-5 * (1.0 + g[i].abs()), "{i}: {fd} vs {}", g[i]);
        }
        let gp = GpModel::fit(x.clone(), y.clone(), probe).unwrap();
        assert!((gp.log_marginal_likelihood() - lml_with_gradient(&x, &y, &probe).unwrap().0).abs() < 1e-9);
    }

    #[test]
    fn recovers_length_scale_of_prior_data() {
        let truth = Kernel::new(5.0, 0.02, 0.1).unwrap();
        let (x, y) = prior_sample(42, 200, &truth);
        let rep = optimize_hyperparameters(&x, &y, &OptimizeOptions { seed: 3, ..Default::default() }).unwrap();
        assert!(
            rep.kernel.length >= 0.01 && rep.kernel.length <= 0.04,
            "recovered length {}",
            rep.kernel.length
        );
        for r in &rep.restarts {
            assert!(rep.lml >= r.initial_lml);
            assert!(r.final_lml >= r.initial_lml);
        }
    }

    #[test]
    fn constant_targets_give_finite_likelihood() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<Input> = (0..40).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let y = vec![3.0; 40];
        let rep = optimize_hyperparameters(&x, &y, &OptimizeOptions::default()).unwrap();
        assert!(rep.lml.is_finite());
        // the constant is absorbed by a large amplitude, long length scale or noise
        assert!(rep.kernel.sigma_f > 1.0 || rep.kernel.sigma_n > 1.0);
    }

    #[test]
    fn optimization_is_deterministic() {
        let truth = Kernel::new(1.0, 0.05, 0.05).unwrap();
        let (x, y) = prior_sample(7, 60, &truth);
        let opts = OptimizeOptions { seed: 11, restarts: 5, ..Default::default() };
        let a = optimize_hyperparameters(&x, &y, &opts).unwrap();
        let b = optimize_hyperparameters(&x, &y, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_single_point() {
        assert!(optimize_hyperparameters(&[[0.0; 3]], &[1.0], &OptimizeOptions::default()).is_err());
    }
}
