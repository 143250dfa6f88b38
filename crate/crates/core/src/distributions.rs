//! Categorical / Dirichlet and Bernoulli / Beta pieces of the generation model.
//!
//! The training path only needs the closed-form posterior means and their
//! partial derivatives. Full log-densities (with the log-Gamma normalizers)
//! are provided for the verification oracles.

use rand::Rng;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

/// Lower bound applied to every Dirichlet / Beta parameter after arithmetic.
pub const PARAM_FLOOR: f64 = 1e-8;
/// Posterior Bernoulli means are kept inside `[Z_CLAMP, 1 - Z_CLAMP]`.
pub const Z_CLAMP: f64 = 1e-9;

const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum DistError {
    #[error("vector is not on the probability simplex (sum {sum}, min {min})")]
    NotSimplex { sum: f64, min: f64 },
    #[error("Bernoulli parameter {value} at index {index} is outside (0, 1)")]
    BernoulliOutOfRange { index: usize, value: f64 },
    #[error("parameter {value} at index {index} is not strictly positive")]
    NonPositive { index: usize, value: f64 },
    #[error("expected a one-hot vector")]
    NotOneHot,
    #[error("expected a binary vector, found {value} at index {index}")]
    NotBinary { index: usize, value: u8 },
    #[error("length mismatch: expected {expected}, found {found}")]
    Length { expected: usize, found: usize },
    #[error("value {0} outside the support")]
    OutOfSupport(f64),
}

fn check_len(expected: usize, found: usize) -> Result<(), DistError> {
    if expected == found {
        Ok(())
    } else {
        Err(DistError::Length { expected, found })
    }
}

fn check_positive(values: &[f64]) -> Result<(), DistError> {
    match values.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
        Some((index, &value)) => Err(DistError::NonPositive { index, value }),
        None => Ok(()),
    }
}

fn check_binary(values: &[u8]) -> Result<(), DistError> {
    match values.iter().enumerate().find(|(_, v)| **v > 1) {
        Some((index, &value)) => Err(DistError::NotBinary { index, value }),
        None => Ok(()),
    }
}

/// Categorical parameters: strictly positive, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Simplex(Vec<f64>);

impl Simplex {
    pub fn new(theta: Vec<f64>) -> Result<Self, DistError> {
        let sum: f64 = theta.iter().sum();
        let min = theta.iter().copied().fold(f64::INFINITY, f64::min);
        if theta.is_empty() || !(min > 0.0) || (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(DistError::NotSimplex { sum, min });
        }
        Ok(Self(theta))
    }

    pub fn uniform(c: usize) -> Self {
        Self(vec![1.0 / c as f64; c])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Lowest index among the maxima.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

/// Multivariate Bernoulli parameters, each strictly inside (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliVec(Vec<f64>);

impl BernoulliVec {
    pub fn new(z: Vec<f64>) -> Result<Self, DistError> {
        if let Some((index, &value)) = z.iter().enumerate().find(|(_, v)| !(**v > 0.0 && **v < 1.0)) {
            return Err(DistError::BernoulliOutOfRange { index, value });
        }
        Ok(Self(z))
    }

    /// Clamp into `[Z_CLAMP, 1 - Z_CLAMP]` first.
    pub fn clamped(z: Vec<f64>) -> Self {
        Self(z.into_iter().map(clamp_z).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirichletParams(Vec<f64>);

impl DirichletParams {
    pub fn new(lambda: Vec<f64>) -> Result<Self, DistError> {
        check_positive(&lambda)?;
        Ok(Self(lambda))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaParams {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl BetaParams {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self, DistError> {
        check_len(alpha.len(), beta.len())?;
        check_positive(&alpha)?;
        check_positive(&beta)?;
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }
}

pub fn clamp_z(z: f64) -> f64 {
    z.clamp(Z_CLAMP, 1.0 - Z_CLAMP)
}

pub fn floor_param(v: f64) -> f64 {
    v.max(PARAM_FLOOR)
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = j;
        }
    }
    best
}

/// `ln θ_y` for the one-hot `l = e_y`.
pub fn categorical_log_density(l: &[u8], theta: &Simplex) -> Result<f64, DistError> {
    check_len(theta.0.len(), l.len())?;
    check_binary(l)?;
    if l.iter().map(|&v| v as usize).sum::<usize>() != 1 {
        return Err(DistError::NotOneHot);
    }
    Ok(l.iter().zip(&theta.0).filter(|(&lj, _)| lj == 1).map(|(_, t)| t.ln()).sum())
}

pub fn bernoulli_vec_log_density(s_bar: &[u8], z: &BernoulliVec) -> Result<f64, DistError> {
    check_len(z.0.len(), s_bar.len())?;
    check_binary(s_bar)?;
    Ok(s_bar
        .iter()
        .zip(&z.0)
        .map(|(&s, &zj)| if s == 1 { zj.ln() } else { (1.0 - zj).ln() })
        .sum())
}

/// Posterior mean of a Dirichlet prior after observing the occurrence counts `o`:
/// `θ̂_j = (o_j + λ_j) / Σ_k (λ_k + o_k)`.
pub fn dirichlet_posterior_mean(lambda: &DirichletParams, o: &[u8]) -> Result<Simplex, DistError> {
    check_len(lambda.0.len(), o.len())?;
    check_binary(o)?;
    let mut theta = vec![0.0; o.len()];
    dirichlet_posterior_mean_into(&lambda.0, o, &mut theta);
    Ok(Simplex(theta))
}

pub(crate) fn dirichlet_posterior_mean_into(lambda: &[f64], o: &[u8], out: &mut [f64]) -> f64 {
    let denom: f64 = lambda.iter().zip(o).map(|(&l, &oj)| l + f64::from(oj)).sum();
    for ((t, &l), &oj) in out.iter_mut().zip(lambda).zip(o) {
        *t = (f64::from(oj) + l) / denom;
    }
    denom
}

/// `ẑ_j = (o_j + α_j) / (α_j + β_j + o_j)`.
pub fn beta_posterior_mean(alpha: f64, beta: f64, o: u8) -> Result<f64, DistError> {
    check_positive(&[alpha, beta])?;
    check_binary(&[o])?;
    Ok(beta_posterior_mean_raw(alpha, beta, o))
}

pub(crate) fn beta_posterior_mean_raw(alpha: f64, beta: f64, o: u8) -> f64 {
    let o = f64::from(o);
    (o + alpha) / (alpha + beta + o)
}

/// Coordinate-wise Beta posterior means, clamped away from {0, 1}.
pub fn beta_posterior_mean_vec(params: &BetaParams, o: &[u8]) -> Result<BernoulliVec, DistError> {
    check_len(params.alpha.len(), o.len())?;
    check_binary(o)?;
    Ok(BernoulliVec(
        params
            .alpha
            .iter()
            .zip(&params.beta)
            .zip(o)
            .map(|((&a, &b), &oj)| clamp_z(beta_posterior_mean_raw(a, b, oj)))
            .collect(),
    ))
}

/// Full Jacobian `∂θ̂_j / ∂λ_k = (δ_jk D − (o_j + λ_j)) / D²`, row-major `[j][k]`.
pub fn dirichlet_posterior_mean_jacobian(lambda: &[f64], o: &[u8]) -> Vec<f64> {
    let c = lambda.len();
    let denom: f64 = lambda.iter().zip(o).map(|(&l, &oj)| l + f64::from(oj)).sum();
    let mut jac = vec![0.0; c * c];
    for j in 0..c {
        let num = f64::from(o[j]) + lambda[j];
        for k in 0..c {
            let delta = if j == k { denom } else { 0.0 };
            jac[j * c + k] = (delta - num) / (denom * denom);
        }
    }
    jac
}

/// Vector-Jacobian product of the Dirichlet posterior mean: given `∂L/∂θ̂`,
/// returns `∂L/∂λ_k = (g_k − Σ_j g_j θ̂_j) / D`.
pub fn dirichlet_posterior_mean_vjp(lambda: &[f64], o: &[u8], grad_theta: &[f64]) -> Vec<f64> {
    let mut theta = vec![0.0; lambda.len()];
    let denom = dirichlet_posterior_mean_into(lambda, o, &mut theta);
    let weighted: f64 = grad_theta.iter().zip(&theta).map(|(g, t)| g * t).sum();
    grad_theta.iter().map(|g| (g - weighted) / denom).collect()
}

/// `(∂ẑ/∂α, ∂ẑ/∂β)` for one coordinate of the Beta posterior mean.
pub fn beta_posterior_mean_partials(alpha: f64, beta: f64, o: u8) -> (f64, f64) {
    let o = f64::from(o);
    let denom = alpha + beta + o;
    let d2 = denom * denom;
    ((denom - (o + alpha)) / d2, -(o + alpha) / d2)
}

/// Log-density of `Dir(θ | λ)` including the normalizer.
pub fn dirichlet_log_density(theta: &Simplex, lambda: &DirichletParams) -> Result<f64, DistError> {
    check_len(lambda.0.len(), theta.0.len())?;
    let sum_lambda: f64 = lambda.0.iter().sum();
    let mut log_p = ln_gamma(sum_lambda);
    for (&t, &l) in theta.0.iter().zip(&lambda.0) {
        log_p += (l - 1.0) * t.ln() - ln_gamma(l);
    }
    Ok(log_p)
}

/// Log-density of `Beta(z | α, β)` including the normalizer.
pub fn beta_log_density(z: f64, alpha: f64, beta: f64) -> Result<f64, DistError> {
    check_positive(&[alpha, beta])?;
    if !(z > 0.0 && z < 1.0) {
        return Err(DistError::OutOfSupport(z));
    }
    Ok(ln_gamma(alpha + beta) - ln_gamma(alpha) - ln_gamma(beta)
        + (alpha - 1.0) * z.ln()
        + (beta - 1.0) * (1.0 - z).ln())
}

/// Inverse-CDF draw of a label index.
pub fn sample_categorical<R: Rng + ?Sized>(theta: &Simplex, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, &t) in theta.0.iter().enumerate() {
        acc += t;
        if u < acc {
            return j;
        }
    }
    // u landed in the rounding gap above the last partial sum
    theta.0.iter().rposition(|&t| t > 0.0).unwrap_or(0)
}

pub fn sample_bernoulli_vec<R: Rng + ?Sized>(z: &BernoulliVec, rng: &mut R) -> Vec<u8> {
    z.0.iter().map(|&p| u8::from(rng.random::<f64>() < p)).collect()
}
