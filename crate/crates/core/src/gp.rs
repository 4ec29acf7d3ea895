//! Gaussian-process regression with a squared-exponential ARD kernel.
//!
//! Inputs are expected to be normalized to `[0, 1]` per dimension (see
//! [`normalize_columns`]); targets are standardized internally and every
//! prediction is reported back on the original target scale.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Hyperparameters of the squared-exponential ARD kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub signal_variance: f64,
    pub lengthscales: Vec<f64>,
    pub noise_variance: f64,
}

impl KernelParams {
    pub fn new(signal_variance: f64, lengthscales: Vec<f64>, noise_variance: f64) -> Result<Self> {
        if !(signal_variance > 0.0 && signal_variance.is_finite()) {
            return Err(Error::invalid("signal variance must be positive and finite"));
        }
        if lengthscales.is_empty() {
            return Err(Error::invalid("at least one lengthscale is required"));
        }
        // Infinite lengthscales are allowed: they switch a dimension off.
        if lengthscales.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::invalid("lengthscales must be positive"));
        }
        if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
            return Err(Error::invalid("noise variance must be nonnegative and finite"));
        }
        Ok(Self {
            signal_variance,
            lengthscales,
            noise_variance,
        })
    }

    pub fn isotropic(dim: usize, signal_variance: f64, lengthscale: f64, noise_variance: f64) -> Result<Self> {
        Self::new(signal_variance, vec![lengthscale; dim], noise_variance)
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// Log-space coordinates `[ln σf², ln ℓ_1 .. ln ℓ_d, ln σn²]` used by the optimizer.
    pub fn to_log(&self) -> Vec<f64> {
        let mut theta = Vec::with_capacity(self.dim() + 2);
        theta.push(self.signal_variance.ln());
        theta.extend(self.lengthscales.iter().map(|l| l.ln()));
        theta.push(self.noise_variance.ln());
        theta
    }

    fn from_log(theta: &[f64]) -> Self {
        let d = theta.len() - 2;
        Self {
            signal_variance: theta[0].exp(),
            lengthscales: theta[1..=d].iter().map(|t| t.exp()).collect(),
            noise_variance: theta[d + 1].exp(),
        }
    }
}

fn check_dims(x1: &[f64], x2: &[f64], params: &KernelParams) -> Result<()> {
    if x1.len() != params.dim() || x2.len() != params.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} and {} vs {} lengthscales",
            x1.len(),
            x2.len(),
            params.dim()
        )));
    }
    Ok(())
}

#[inline]
fn se(x1: &[f64], x2: &[f64], params: &KernelParams) -> f64 {
    let mut r2 = 0.0;
    for ((a, b), l) in x1.iter().zip(x2).zip(&params.lengthscales) {
        let z = (a - b) / l;
        r2 += z * z;
    }
    params.signal_variance * (-0.5 * r2).exp()
}

/// Squared-exponential ARD kernel `σf² · exp(-½ Σ ((x1_d - x2_d) / ℓ_d)²)`.
pub fn kernel_eval(x1: &[f64], x2: &[f64], params: &KernelParams) -> Result<f64> {
    check_dims(x1, x2, params)?;
    Ok(se(x1, x2, params))
}

/// Rescales every column of `points` to `[0, 1]`; constant columns map to 0.
pub fn normalize_columns(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let Some(first) = points.first() else {
        return Vec::new();
    };
    let d = first.len();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in points {
        for (j, v) in p.iter().enumerate() {
            lo[j] = lo[j].min(*v);
            hi[j] = hi[j].max(*v);
        }
    }
    points
        .iter()
        .map(|p| {
            p.iter()
                .enumerate()
                .map(|(j, v)| {
                    let span = hi[j] - lo[j];
                    if span > 0.0 {
                        (v - lo[j]) / span
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Settings for hyperparameter search by multi-start gradient ascent on the
/// log marginal likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub restarts: usize,
    pub max_iterations: usize,
    pub seed: u64,
    pub lengthscale_bounds: (f64, f64),
    pub noise_bounds: (f64, f64),
    pub signal_bounds: (f64, f64),
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            restarts: 4,
            max_iterations: 100,
            seed: 0,
            lengthscale_bounds: (1e-3, 1e3),
            noise_bounds: (1e-8, 1.0),
            signal_bounds: (1e-2, 1e2),
        }
    }
}

impl FitConfig {
    fn log_bounds(&self, dim: usize) -> Vec<(f64, f64)> {
        let ln = |(a, b): (f64, f64)| (a.ln(), b.ln());
        let mut bounds = Vec::with_capacity(dim + 2);
        bounds.push(ln(self.signal_bounds));
        bounds.extend(std::iter::repeat_n(ln(self.lengthscale_bounds), dim));
        bounds.push(ln(self.noise_bounds));
        bounds
    }
}

/// Posterior mean and standard deviation at one query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub std: f64,
}

/// Target standardization `z = (y - mean) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub scale: f64,
}

impl Standardization {
    pub fn from_targets(targets: &[f64]) -> Self {
        let n = targets.len() as f64;
        let mean = targets.iter().sum::<f64>() / n;
        let var = targets.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
        let scale = if var.sqrt() > 1e-12 * mean.abs().max(1.0) {
            var.sqrt()
        } else {
            1.0
        };
        Self { mean, scale }
    }

    pub fn identity() -> Self {
        Self {
            mean: 0.0,
            scale: 1.0,
        }
    }
}

/// Lower Cholesky factor of `K + (noise + jitter) I`.
struct Factorization {
    factor: DMatrix<f64>,
    jitter: f64,
}

fn gram(inputs: &[Vec<f64>], params: &KernelParams) -> DMatrix<f64> {
    let n = inputs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = params.signal_variance;
        for j in 0..i {
            let v = se(&inputs[i], &inputs[j], params);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Factorizes `K + noise·I`. If that fails or is near singular, diagonal jitter is added,
/// starting at `1e-10·trace/n` and growing tenfold up to `1e-4·trace/n`.
fn factorize(k: &DMatrix<f64>, noise: f64) -> Result<Factorization> {
    let n = k.nrows();
    let mut base = k.clone();
    for i in 0..n {
        base[(i, i)] += noise;
    }
    let mean_diag = base.trace() / n as f64;
    if let Some(chol) = base.clone().cholesky() {
        let factor = chol.unpack();
        let min_pivot = factor.diagonal().iter().fold(f64::INFINITY, |m, d| m.min(d * d));
        // a pivot at round-off level means the matrix is numerically singular
        if min_pivot > 1e-10 * mean_diag {
            return Ok(Factorization { factor, jitter: 0.0 });
        }
    }
    let mut jitter = 1e-10 * mean_diag;
    let max_jitter = 1e-4 * mean_diag;
    loop {
        let mut m = base.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = m.cholesky() {
            return Ok(Factorization {
                factor: chol.unpack(),
                jitter,
            });
        }
        jitter *= 10.0;
        if jitter > max_jitter * (1.0 + 1e-9) {
            return Err(Error::Numeric(format!(
                "covariance not positive definite after jitter {:.3e}",
                jitter / 10.0
            )));
        }
    }
}

/// Log marginal likelihood of `targets` (taken as-is, no standardization)
/// and its gradient with respect to `[ln σf², ln ℓ_d.., ln σn²]`.
pub fn log_marginal_likelihood(
    inputs: &[Vec<f64>],
    targets: &[f64],
    params: &KernelParams,
) -> Result<(f64, Vec<f64>)> {
    validate_training(inputs, targets, params.dim())?;
    let n = inputs.len();
    let k = gram(inputs, params);
    let fact = factorize(&k, params.noise_variance)?;
    let l = &fact.factor;
    let y = DVector::from_column_slice(targets);
    let v = l
        .solve_lower_triangular(&y)
        .ok_or_else(|| Error::Numeric("singular factor".into()))?;
    let alpha = l
        .tr_solve_lower_triangular(&v)
        .ok_or_else(|| Error::Numeric("singular factor".into()))?;
    let log_det_half: f64 = (0..n).map(|i| l[(i, i)].ln()).sum();
    let value = -0.5 * y.dot(&alpha) - log_det_half - 0.5 * n as f64 * LN_2PI;

    // W = ααᵀ − K⁻¹
    let identity = DMatrix::<f64>::identity(n, n);
    let linv = l
        .solve_lower_triangular(&identity)
        .ok_or_else(|| Error::Numeric("singular factor".into()))?;
    let kinv = linv.transpose() * &linv;
    let w = &alpha * alpha.transpose() - kinv;

    let d = params.dim();
    let mut grad = vec![0.0; d + 2];
    for i in 0..n {
        for j in 0..n {
            let kf = if i == j { params.signal_variance } else { k[(i, j)] };
            let wij = w[(i, j)];
            grad[0] += wij * kf;
            if i != j {
                for (dim, ls) in params.lengthscales.iter().enumerate() {
                    let diff = (inputs[i][dim] - inputs[j][dim]) / ls;
                    grad[1 + dim] += wij * kf * diff * diff;
                }
            }
        }
        grad[d + 1] += w[(i, i)] * params.noise_variance;
    }
    for g in &mut grad {
        *g *= 0.5;
    }
    Ok((value, grad))
}

fn validate_training(inputs: &[Vec<f64>], targets: &[f64], dim: usize) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::invalid("at least one training sample is required"));
    }
    if inputs.len() != targets.len() {
        return Err(Error::invalid(format!(
            "{} inputs but {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    for x in inputs {
        if x.len() != dim {
            return Err(Error::invalid(format!("input of dimension {} expected {}", x.len(), dim)));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite training input"));
        }
    }
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite training target"));
    }
    Ok(())
}

fn project(theta: &mut [f64], bounds: &[(f64, f64)]) {
    for (t, (lo, hi)) in theta.iter_mut().zip(bounds) {
        *t = t.clamp(*lo, *hi);
    }
}

fn lml_at(inputs: &[Vec<f64>], targets: &[f64], theta: &[f64]) -> Option<(f64, Vec<f64>)> {
    let params = KernelParams::from_log(theta);
    match log_marginal_likelihood(inputs, targets, &params) {
        Ok((v, g)) if v.is_finite() && g.iter().all(|x| x.is_finite()) => Some((v, g)),
        _ => None,
    }
}

/// Projected gradient ascent with step doubling on success and halving on failure.
fn ascend(
    inputs: &[Vec<f64>],
    targets: &[f64],
    start: Vec<f64>,
    bounds: &[(f64, f64)],
    max_iterations: usize,
) -> Option<(f64, Vec<f64>)> {
    let mut theta = start;
    project(&mut theta, bounds);
    let (mut value, mut grad) = lml_at(inputs, targets, &theta)?;
    let mut step = 0.5;
    for _ in 0..max_iterations {
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm < 1e-8 {
            break;
        }
        let mut improved = false;
        while step > 1e-6 {
            let mut cand: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t + step * g / norm).collect();
            project(&mut cand, bounds);
            if cand == theta {
                break;
            }
            match lml_at(inputs, targets, &cand) {
                Some((v, g)) if v > value => {
                    let gain = v - value;
                    theta = cand;
                    value = v;
                    grad = g;
                    step = (step * 2.0).min(2.0);
                    improved = gain > 1e-10 * value.abs().max(1.0);
                    break;
                }
                _ => step *= 0.5,
            }
        }
        if !improved {
            break;
        }
    }
    Some((value, theta))
}

/// A fitted single-output GP.
#[derive(Debug, Clone, PartialEq)]
pub struct GpModel {
    pub params: KernelParams,
    pub train_inputs: Vec<Vec<f64>>,
    pub train_targets: Vec<f64>,
    pub standardization: Standardization,
    /// Lower-triangular factor of `K + (noise + jitter)·I`.
    pub factor: DMatrix<f64>,
    pub alpha: DVector<f64>,
    pub jitter: f64,
    pub log_marginal_likelihood: f64,
}

impl GpModel {
    /// Fits hyperparameters by maximizing the log marginal likelihood of the
    /// standardized targets.
    pub fn fit(inputs: &[Vec<f64>], targets: &[f64], config: &FitConfig) -> Result<Self> {
        let dim = inputs.first().map(|x| x.len()).unwrap_or(0);
        if dim == 0 {
            return Err(Error::invalid("training inputs must be non-empty vectors"));
        }
        validate_training(inputs, targets, dim)?;
        let standardization = Standardization::from_targets(targets);
        let z: Vec<f64> = targets
            .iter()
            .map(|y| (y - standardization.mean) / standardization.scale)
            .collect();

        let bounds = config.log_bounds(dim);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut starts = Vec::with_capacity(config.restarts.max(1));
        let mut default = vec![0.0; dim + 2];
        default[1..=dim].fill(0.5f64.ln());
        default[dim + 1] = 1e-4f64.ln();
        starts.push(default);
        while starts.len() < config.restarts.max(1) {
            let mut theta = Vec::with_capacity(dim + 2);
            theta.push(rng.random_range(0.25f64.ln()..4.0f64.ln()));
            for _ in 0..dim {
                theta.push(rng.random_range(0.05f64.ln()..5.0f64.ln()));
            }
            theta.push(rng.random_range(1e-6f64.ln()..1e-1f64.ln()));
            starts.push(theta);
        }

        let mut best: Option<(f64, Vec<f64>)> = None;
        for start in starts {
            if let Some((v, theta)) = ascend(inputs, &z, start, &bounds, config.max_iterations) {
                if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                    best = Some((v, theta));
                }
            }
        }
        let (_, theta) = best.ok_or_else(|| {
            Error::Numeric("log marginal likelihood could not be evaluated at any start".into())
        })?;
        Self::with_standardization(inputs, targets, KernelParams::from_log(&theta), standardization)
    }

    /// Conditions a GP with fixed hyperparameters; targets are standardized
    /// from their own mean and spread.
    pub fn with_params(inputs: &[Vec<f64>], targets: &[f64], params: KernelParams) -> Result<Self> {
        validate_training(inputs, targets, params.dim())?;
        let standardization = Standardization::from_targets(targets);
        Self::with_standardization(inputs, targets, params, standardization)
    }

    pub fn with_standardization(
        inputs: &[Vec<f64>],
        targets: &[f64],
        params: KernelParams,
        standardization: Standardization,
    ) -> Result<Self> {
        validate_training(inputs, targets, params.dim())?;
        let z = DVector::from_iterator(
            targets.len(),
            targets
                .iter()
                .map(|y| (y - standardization.mean) / standardization.scale),
        );
        let k = gram(inputs, &params);
        let fact = factorize(&k, params.noise_variance)?;
        let v = fact
            .factor
            .solve_lower_triangular(&z)
            .ok_or_else(|| Error::Numeric("singular factor".into()))?;
        let alpha = fact
            .factor
            .tr_solve_lower_triangular(&v)
            .ok_or_else(|| Error::Numeric("singular factor".into()))?;
        let n = targets.len();
        let log_det_half: f64 = (0..n).map(|i| fact.factor[(i, i)].ln()).sum();
        let lml = -0.5 * z.dot(&alpha) - log_det_half - 0.5 * n as f64 * LN_2PI;
        Ok(Self {
            params,
            train_inputs: inputs.to_vec(),
            train_targets: targets.to_vec(),
            standardization,
            factor: fact.factor,
            alpha,
            jitter: fact.jitter,
            log_marginal_likelihood: lml,
        })
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    /// Noise actually on the diagonal of the factorized matrix.
    pub fn effective_noise(&self) -> f64 {
        self.params.noise_variance + self.jitter
    }

    /// Standardized-scale posterior (mean, variance), variance clamped at 0.
    pub fn predict_latent(&self, query: &[f64]) -> Result<(f64, f64)> {
        if query.len() != self.dim() {
            return Err(Error::invalid(format!(
                "query of dimension {} for a model of dimension {}",
                query.len(),
                self.dim()
            )));
        }
        let n = self.train_inputs.len();
        let k = DVector::from_iterator(n, self.train_inputs.iter().map(|x| se(x, query, &self.params)));
        let mean = k.dot(&self.alpha);
        let v = self
            .factor
            .solve_lower_triangular(&k)
            .ok_or_else(|| Error::Numeric("singular factor".into()))?;
        let var = (self.params.signal_variance - v.norm_squared()).max(0.0);
        Ok((mean, var))
    }

    pub fn predict(&self, query: &[f64]) -> Result<Prediction> {
        let (mean, var) = self.predict_latent(query)?;
        let s = self.standardization;
        Ok(Prediction {
            mean: s.mean + s.scale * mean,
            std: s.scale * var.sqrt(),
        })
    }

    pub fn predict_many(&self, queries: &[Vec<f64>]) -> Result<Vec<Prediction>> {
        queries.iter().map(|q| self.predict(q)).collect()
    }

    /// Prior standard deviation on the target scale.
    pub fn prior_std(&self) -> f64 {
        self.standardization.scale * self.params.signal_variance.sqrt()
    }
}
