//! Likelihood, prior and MAP losses for one instance, with exact gradients.
//!
//! Losses are expressed in terms of the posterior means `θ̂` (Dirichlet) and
//! `ẑ` (Beta). [`PosteriorParams`] carries the live network parameters
//! `λ, α, β` that produced them and pulls gradients back through the
//! posterior-mean formulas. Prior constants `λ̂, α̂, β̂` never receive
//! gradient.

use thiserror::Error;

use crate::distributions::{
    beta_posterior_mean_partials, beta_posterior_mean_raw, clamp_z, dirichlet_posterior_mean_into, Z_CLAMP,
};
use crate::network::TransformConfig;

#[derive(Debug, Error, PartialEq)]
pub enum ObjectiveError {
    #[error("likelihood underflowed to zero")]
    Underflow,
    #[error("{0}")]
    Domain(String),
}

/// Loss value and its partials w.r.t. `θ̂` and `ẑ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub value: f64,
    pub d_theta: Vec<f64>,
    pub d_z: Vec<f64>,
}

/// Detached prior constants for one instance.
#[derive(Debug, Clone, Copy)]
pub struct PriorValues<'a> {
    pub lambda: &'a [f64],
    pub alpha: &'a [f64],
    pub beta: &'a [f64],
}

#[derive(Debug, Clone, Copy)]
pub struct PerInstanceLossInput<'a> {
    pub theta_hat: &'a [f64],
    pub z_hat: &'a [f64],
    pub prior: PriorValues<'a>,
    pub candidates: &'a [usize],
}

fn check_inputs(theta: &[f64], z: &[f64], candidates: &[usize]) -> Result<(), ObjectiveError> {
    let c = theta.len();
    if z.len() != c {
        return Err(ObjectiveError::Domain(format!("θ̂ has {c} entries but ẑ has {}", z.len())));
    }
    if candidates.is_empty() || candidates.iter().any(|&j| j >= c) {
        return Err(ObjectiveError::Domain("candidate set empty or out of range".into()));
    }
    if theta.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
        return Err(ObjectiveError::Domain("θ̂ entries must lie in (0, 1]".into()));
    }
    if z.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
        return Err(ObjectiveError::Domain("ẑ entries must lie in (0, 1)".into()));
    }
    Ok(())
}

/// `ln` of each likelihood term `θ̂_j Π_{k∈S̄^j} ẑ_k Π_{k∉S̄^j} (1−ẑ_k)`, `j ∈ S`.
fn log_terms(theta: &[f64], z: &[f64], candidates: &[usize]) -> Vec<f64> {
    let c = theta.len();
    let mut in_set = vec![false; c];
    for &j in candidates {
        in_set[j] = true;
    }
    let base: f64 = (0..c).map(|k| if in_set[k] { z[k].ln() } else { (-z[k]).ln_1p() }).sum();
    candidates.iter().map(|&j| theta[j].ln() + base - z[j].ln() + (-z[j]).ln_1p()).collect()
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Negative log-likelihood of the candidate set under the generation model.
pub fn ml_loss(theta_hat: &[f64], z_hat: &[f64], candidates: &[usize]) -> Result<LossGrad, ObjectiveError> {
    check_inputs(theta_hat, z_hat, candidates)?;
    let c = theta_hat.len();
    let terms = log_terms(theta_hat, z_hat, candidates);
    let lse = log_sum_exp(&terms);
    if !lse.is_finite() {
        return Err(ObjectiveError::Underflow);
    }
    // responsibility of each candidate being the correct label
    let resp: Vec<f64> = terms.iter().map(|t| (t - lse).exp()).collect();

    let mut d_theta = vec![0.0; c];
    let mut d_z: Vec<f64> = z_hat.iter().map(|&z| 1.0 / (1.0 - z)).collect();
    for (&j, &r) in candidates.iter().zip(&resp) {
        d_theta[j] = -r / theta_hat[j];
        let z = z_hat[j];
        d_z[j] = -((1.0 - r) / z - r / (1.0 - z));
    }
    Ok(LossGrad { value: -lse, d_theta, d_z })
}

/// Negative log-prior without the log-Gamma normalizers.
pub fn reg_loss(theta_hat: &[f64], z_hat: &[f64], prior: PriorValues<'_>) -> Result<LossGrad, ObjectiveError> {
    let c = theta_hat.len();
    if [z_hat.len(), prior.lambda.len(), prior.alpha.len(), prior.beta.len()].iter().any(|&l| l != c) {
        return Err(ObjectiveError::Domain("prior dimensions do not match".into()));
    }
    if prior.lambda.iter().chain(prior.alpha).chain(prior.beta).any(|&v| !(v > 0.0)) {
        return Err(ObjectiveError::Domain("prior parameters must be positive".into()));
    }
    let mut value = 0.0;
    let mut d_theta = vec![0.0; c];
    let mut d_z = vec![0.0; c];
    for j in 0..c {
        let (t, z) = (theta_hat[j], z_hat[j]);
        let (wl, wa, wb) = (prior.lambda[j] - 1.0, prior.alpha[j] - 1.0, prior.beta[j] - 1.0);
        value -= wl * t.ln() + wa * z.ln() + wb * (-z).ln_1p();
        d_theta[j] = -wl / t;
        d_z[j] = -wa / z + wb / (1.0 - z);
    }
    Ok(LossGrad { value, d_theta, d_z })
}

/// MAP loss split into its parts, with partials w.r.t. `θ̂` and `ẑ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MapLoss {
    pub value: f64,
    pub ml: f64,
    pub reg: f64,
    pub d_theta: Vec<f64>,
    pub d_z: Vec<f64>,
}

/// `ml_loss + reg_loss`; with `ml_only` the prior term is dropped entirely.
pub fn map_loss(input: &PerInstanceLossInput<'_>, ml_only: bool) -> Result<MapLoss, ObjectiveError> {
    let ml = ml_loss(input.theta_hat, input.z_hat, input.candidates)?;
    if ml_only {
        return Ok(MapLoss { value: ml.value, ml: ml.value, reg: 0.0, d_theta: ml.d_theta, d_z: ml.d_z });
    }
    let reg = reg_loss(input.theta_hat, input.z_hat, input.prior)?;
    Ok(MapLoss {
        value: ml.value + reg.value,
        ml: ml.value,
        reg: reg.value,
        d_theta: ml.d_theta.iter().zip(&reg.d_theta).map(|(a, b)| a + b).collect(),
        d_z: ml.d_z.iter().zip(&reg.d_z).map(|(a, b)| a + b).collect(),
    })
}

/// Live Dirichlet/Beta parameters of one instance and the posterior means
/// computed from them.
#[derive(Debug, Clone)]
pub struct PosteriorParams {
    pub lambda: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub o: Vec<u8>,
    pub theta_hat: Vec<f64>,
    pub z_hat: Vec<f64>,
    z_clamped: Vec<bool>,
}

impl PosteriorParams {
    pub fn from_live(lambda: &[f64], alpha: &[f64], beta: &[f64], candidates: &[usize]) -> Self {
        let c = lambda.len();
        let mut o = vec![0u8; c];
        for &j in candidates {
            o[j] = 1;
        }
        let mut theta_hat = vec![0.0; c];
        dirichlet_posterior_mean_into(lambda, &o, &mut theta_hat);
        let mut z_clamped = vec![false; c];
        let z_hat = (0..c)
            .map(|j| {
                let raw = beta_posterior_mean_raw(alpha[j], beta[j], o[j]);
                z_clamped[j] = !(Z_CLAMP..=1.0 - Z_CLAMP).contains(&raw);
                clamp_z(raw)
            })
            .collect();
        Self { lambda: lambda.to_vec(), alpha: alpha.to_vec(), beta: beta.to_vec(), o, theta_hat, z_hat, z_clamped }
    }

    /// Pull `∂L/∂θ̂` and `∂L/∂ẑ` back to `∂L/∂λ`, `∂L/∂α`, `∂L/∂β`.
    pub fn pullback(&self, d_theta: &[f64], d_z: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let denom: f64 = self.lambda.iter().zip(&self.o).map(|(&l, &o)| l + f64::from(o)).sum();
        let weighted: f64 = d_theta.iter().zip(&self.theta_hat).map(|(g, t)| g * t).sum();
        let d_lambda = d_theta.iter().map(|g| (g - weighted) / denom).collect();
        let c = self.alpha.len();
        let mut d_alpha = vec![0.0; c];
        let mut d_beta = vec![0.0; c];
        for j in 0..c {
            if self.z_clamped[j] {
                continue;
            }
            let (pa, pb) = beta_posterior_mean_partials(self.alpha[j], self.beta[j], self.o[j]);
            d_alpha[j] = d_z[j] * pa;
            d_beta[j] = d_z[j] * pb;
        }
        (d_lambda, d_alpha, d_beta)
    }
}

/// MAP loss and its gradient w.r.t. the live parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MapLossLive {
    pub value: f64,
    pub ml: f64,
    pub reg: f64,
    pub d_lambda: Vec<f64>,
    pub d_alpha: Vec<f64>,
    pub d_beta: Vec<f64>,
}

pub fn map_loss_live(
    post: &PosteriorParams,
    prior: PriorValues<'_>,
    candidates: &[usize],
    ml_only: bool,
) -> Result<MapLossLive, ObjectiveError> {
    let input = PerInstanceLossInput { theta_hat: &post.theta_hat, z_hat: &post.z_hat, prior, candidates };
    let loss = map_loss(&input, ml_only)?;
    let (d_lambda, d_alpha, d_beta) = post.pullback(&loss.d_theta, &loss.d_z);
    Ok(MapLossLive { value: loss.value, ml: loss.ml, reg: loss.reg, d_lambda, d_alpha, d_beta })
}

/// Cap applied to the cross-entropy weights of the upper bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConfig {
    pub rho: f64,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self { rho: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    /// `−K_i + Σ_j w_j · (−ln θ̂_j)` with clamped weights.
    pub bound: f64,
    pub k: f64,
    /// Weights after clamping to `[0, ρ]`.
    pub weights: Vec<f64>,
    /// Whether every weight was already inside `[0, ρ]` before clamping.
    pub weights_in_range: bool,
    /// The averaged (AM-GM) replacement of the likelihood term.
    pub ml_part: f64,
}

/// Upper bound on the MAP loss obtained by replacing the log of the
/// likelihood sum with the mean of the logs of its terms.
///
/// `live_lambda` supplies the weights `w_j = λ_j − 1 (+ 1/|S| on S)`; the
/// prior `α̂, β̂` of `input` enter the constant `K_i`.
pub fn map_upper_bound(
    input: &PerInstanceLossInput<'_>,
    cfg: BoundConfig,
    live_lambda: &[f64],
) -> Result<BoundReport, ObjectiveError> {
    check_inputs(input.theta_hat, input.z_hat, input.candidates)?;
    if !(cfg.rho > 0.0) {
        return Err(ObjectiveError::Domain(format!("ρ must be positive, got {}", cfg.rho)));
    }
    let c = input.theta_hat.len();
    if live_lambda.len() != c {
        return Err(ObjectiveError::Domain("λ dimension mismatch".into()));
    }
    let size = input.candidates.len() as f64;
    let terms = log_terms(input.theta_hat, input.z_hat, input.candidates);
    // log of the z-part of each term: ln P_j = term_j − ln θ̂_j
    let mean_log_p: f64 = input
        .candidates
        .iter()
        .zip(&terms)
        .map(|(&j, t)| t - input.theta_hat[j].ln())
        .sum::<f64>()
        / size;
    let mean_log_theta: f64 = input.candidates.iter().map(|&j| input.theta_hat[j].ln()).sum::<f64>() / size;
    let ml_part = -size.ln() - mean_log_theta - mean_log_p;

    let z_prior: f64 = (0..c)
        .map(|j| {
            let z = input.z_hat[j];
            (input.prior.alpha[j] - 1.0) * z.ln() + (input.prior.beta[j] - 1.0) * (-z).ln_1p()
        })
        .sum();
    let k = size.ln() + mean_log_p + z_prior;

    let mut in_set = vec![false; c];
    for &j in input.candidates {
        in_set[j] = true;
    }
    let mut weights_in_range = true;
    let weights: Vec<f64> = (0..c)
        .map(|j| {
            let w = live_lambda[j] - 1.0 + if in_set[j] { 1.0 / size } else { 0.0 };
            if !(0.0..=cfg.rho).contains(&w) {
                weights_in_range = false;
            }
            w.clamp(0.0, cfg.rho)
        })
        .collect();
    let weighted_ce: f64 = weights.iter().zip(input.theta_hat).map(|(w, t)| -w * t.ln()).sum();
    Ok(BoundReport { bound: -k + weighted_ce, k, weights, weights_in_range, ml_part })
}

/// `−ln Σ_{j∈S} θ̂_j`: the likelihood term when every `ẑ_k` equals a constant.
pub fn degenerate_ml_term(theta_hat: &[f64], candidates: &[usize]) -> f64 {
    -candidates.iter().map(|&j| theta_hat[j]).sum::<f64>().ln()
}

/// `−ln[(1−p)^{c+1−|S|} p^{|S|−1}]`, the θ-independent part dropped in the uniform case.
pub fn uniform_flip_constant(c: usize, set_size: usize, p: f64) -> f64 {
    -((c + 1 - set_size) as f64 * (-p).ln_1p() + (set_size - 1) as f64 * p.ln())
}

/// Loss under a constant flip probability `p`: the likelihood collapses to
/// the candidate mass and the Beta prior disappears.
pub fn degenerate_uniform_loss(
    theta_hat: &[f64],
    candidates: &[usize],
    p: f64,
    prior_lambda: &[f64],
) -> Result<f64, ObjectiveError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(ObjectiveError::Domain(format!("flip probability must lie in (0, 1), got {p}")));
    }
    if prior_lambda.len() != theta_hat.len() || candidates.iter().any(|&j| j >= theta_hat.len()) {
        return Err(ObjectiveError::Domain("dimension mismatch".into()));
    }
    let reg: f64 = prior_lambda.iter().zip(theta_hat).map(|(l, t)| (l - 1.0) * t.ln()).sum();
    Ok(degenerate_ml_term(theta_hat, candidates) - reg)
}

/// Extremes of `θ̂` and `ẑ` reachable when scores are clamped to `[-A, A]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    /// Lower bound on every `θ̂_j`.
    pub b: f64,
    /// Lower bound on every `ẑ_j`.
    pub e: f64,
    /// Upper bound on every `ẑ_j`.
    pub f: f64,
}

pub fn bound_constants(cfg: &TransformConfig, clamp: f64, c: usize) -> BoundConstants {
    let lo = cfg.a * (-clamp / cfg.gamma).exp() + cfg.b;
    let hi = cfg.a * (clamp / cfg.gamma).exp() + cfg.b;
    let c = c as f64;
    BoundConstants {
        b: lo / (c * hi + c),
        e: lo / (2.0 * hi + 1.0),
        f: (hi + 1.0) / (hi + lo + 1.0),
    }
}

/// Worst-case MAP loss `M` for a candidate set of the given size.
pub fn loss_cap(cfg: &TransformConfig, clamp: f64, c: usize, set_size: usize) -> f64 {
    let k = bound_constants(cfg, clamp, c);
    let hi = cfg.a * (clamp / cfg.gamma).exp() + cfg.b;
    let s = set_size as f64;
    let ml = -((s).ln()
        + k.b.ln()
        + (c + 1 - set_size) as f64 * (1.0 - k.f).ln()
        + (s - 1.0) * k.e.ln());
    let reg = -(c as f64) * hi * (k.b.ln() + k.e.ln() + (1.0 - k.f).ln());
    ml + reg
}
