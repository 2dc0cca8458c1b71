//! Gaussian-process regression with a squared-exponential kernel, the
//! three-component constitutive surrogate built on it, and the tools that
//! produce its training data.

mod dataset;
mod optimize;
mod surrogate;

pub use dataset::{generate_training_data, Sample, TrainingDataset};
pub use optimize::{lml_with_gradient, optimize_hyperparameters, Bounds, OptimizeOptions, OptimizationReport};
pub use surrogate::{SurrogateSet, TrainOptions};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Input = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    pub sigma_f: f64,
    pub length: f64,
    pub sigma_n: f64,
}

impl Kernel {
    pub fn new(sigma_f: f64, length: f64, sigma_n: f64) -> Result<Self> {
        if !(sigma_f > 0.0 && length > 0.0 && sigma_n > 0.0) {
            return Err(Error::InvalidInput(format!(
                "kernel parameters must be positive (sigma_f {sigma_f}, length {length}, sigma_n {sigma_n})"
            )));
        }
        Ok(Kernel { sigma_f, length, sigma_n })
    }

    /// Noise-free covariance `σ_f²·exp(−|x − x'|²/(2ℓ²))`.
    pub fn eval(&self, a: &Input, b: &Input) -> f64 {
        self.sigma_f * self.sigma_f * (-sq_dist(a, b) / (2.0 * self.length * self.length)).exp()
    }
}

pub(crate) fn sq_dist(a: &Input, b: &Input) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

/// Training covariance `K(X, X) + σ_n²·I`.
pub fn covariance(x: &[Input], kernel: &Kernel) -> DMatrix<f64> {
    let n = x.len();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let v = kernel.eval(&x[i], &x[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(j, j)] += kernel.sigma_n * kernel.sigma_n;
    }
    k
}

/// A fitted zero-mean GP.
#[derive(Debug, Clone)]
pub struct GpModel {
    x: Vec<Input>,
    y: Vec<f64>,
    kernel: Kernel,
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    jitter: f64,
}

const VARIANCE_BLOCK: usize = 64;
const QUERY_CHUNK: usize = 512;

impl GpModel {
    /// Factors `K + σ_n²I`. The first attempt adds nothing; on failure a
    /// diagonal jitter of `1e-10·σ_f²` is added and raised tenfold up to
    /// `1e-4·σ_f²`.
    pub fn fit(x: Vec<Input>, y: Vec<f64>, kernel: Kernel) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::InvalidInput("GP needs at least one training point".into()));
        }
        if x.len() != y.len() {
            return Err(Error::InvalidInput(format!("{} inputs but {} targets", x.len(), y.len())));
        }
        if x.iter().flatten().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite training data".into()));
        }
        let k = covariance(&x, &kernel);
        let (chol, jitter) = factor_with_jitter(&k, kernel.sigma_f * kernel.sigma_f)?;
        let mut alpha = DVector::from_column_slice(&y);
        chol.solve_lower_triangular_mut(&mut alpha);
        chol.tr_solve_lower_triangular_mut(&mut alpha);
        Ok(GpModel {
            x,
            y,
            kernel,
            chol,
            alpha,
            jitter,
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn inputs(&self) -> &[Input] {
        &self.x
    }

    pub fn targets(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Diagonal jitter that the factorization needed (zero when none).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn mean(&self, x: &Input) -> f64 {
        self.x
            .iter()
            .zip(self.alpha.iter())
            .map(|(xi, a)| a * self.kernel.eval(x, xi))
            .sum()
    }

    /// Posterior mean and its gradient with respect to the input.
    pub fn mean_and_gradient(&self, x: &Input) -> (f64, Input) {
        let inv_l2 = 1.0 / (self.kernel.length * self.kernel.length);
        let mut m = 0.0;
        let mut g = [0.0; 3];
        for (xi, a) in self.x.iter().zip(self.alpha.iter()) {
            let w = a * self.kernel.eval(x, xi);
            m += w;
            for d in 0..3 {
                g[d] -= w * (x[d] - xi[d]) * inv_l2;
            }
        }
        (m, g)
    }

    pub fn predict(&self, x: &Input) -> (f64, f64) {
        let mut ks = DVector::from_iterator(self.len(), self.x.iter().map(|xi| self.kernel.eval(x, xi)));
        let mean = ks.dot(&self.alpha);
        self.chol.solve_lower_triangular_mut(&mut ks);
        let var = self.kernel.sigma_f * self.kernel.sigma_f - ks.norm_squared();
        (mean, var.max(0.0))
    }

    /// Posterior variances at many points using blocked triangular solves.
    pub fn variances(&self, points: &[Input]) -> Vec<f64> {
        let n = self.len();
        let sf2 = self.kernel.sigma_f * self.kernel.sigma_f;
        let mut out = Vec::with_capacity(points.len());
        for chunk in points.chunks(QUERY_CHUNK) {
            let m = chunk.len();
            let mut v = DMatrix::from_fn(n, m, |i, j| self.kernel.eval(&self.x[i], &chunk[j]));
            let mut start = 0;
            while start < n {
                let end = (start + VARIANCE_BLOCK).min(n);
                if start > 0 {
                    let (done, mut rows) = v.rows_range_pair_mut(0..start, start..end);
                    rows.gemm(-1.0, &self.chol.view((start, 0), (end - start, start)), &done, 1.0);
                }
                let diag = self.chol.view((start, start), (end - start, end - start));
                let mut rows = v.rows_range_mut(start..end);
                diag.solve_lower_triangular_mut(&mut rows);
                start = end;
            }
            out.extend(v.column_iter().map(|c| (sf2 - c.norm_squared()).max(0.0)));
        }
        out
    }

    /// `−½yᵀα − Σ log L_ii − (n/2)·log 2π`.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.len() as f64;
        let fit = -0.5 * DVector::from_column_slice(&self.y).dot(&self.alpha);
        let logdet: f64 = self.chol.diagonal().iter().map(|d| d.ln()).sum();
        fit - logdet - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }
}

/// Lower Cholesky factor of `a`, with the jitter policy of [`GpModel::fit`].
pub(crate) fn factor_with_jitter(a: &DMatrix<f64>, scale: f64) -> Result<(DMatrix<f64>, f64)> {
    if let Some(c) = a.clone().cholesky() {
        return Ok((c.unpack(), 0.0));
    }
    let mut jitter = 1e-10 * scale;
    while jitter <= 1e-4 * scale * (1.0 + 1e-12) {
        let mut b = a.clone();
        for i in 0..b.nrows() {
            b[(i, i)] += jitter;
        }
        if let Some(c) = b.cholesky() {
            log::debug!("covariance factored with jitter {jitter:e}");
            return Ok((c.unpack(), jitter));
        }
        jitter *= 10.0;
    }
    let eig = a.clone().symmetric_eigenvalues();
    let max = eig.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.iter().cloned().fold(f64::MAX, f64::min);
    Err(Error::Factorization {
        condition: if min > 0.0 { max / min } else { f64::INFINITY },
    })
}
