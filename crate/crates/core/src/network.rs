//! Dense feed-forward scorer with hand-written backprop, the exponential
//! parameter transform, and SGD with classical momentum.
//!
//! Parameters live in one flat vector: for every layer the weight matrix
//! (`out × in`, row-major) followed by the bias. Gradients use the same
//! layout, which keeps the optimizer and the finite-difference checks
//! layout-agnostic.

use rand::Rng;
use thiserror::Error;

use crate::distributions::{floor_param, BetaParams, DirichletParams, PARAM_FLOOR};

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("input has {found} features, network expects {expected}")]
    InputDim { expected: usize, found: usize },
    #[error("gradient has {found} entries, expected {expected}")]
    GradDim { expected: usize, found: usize },
    #[error("non-finite input at index {0}")]
    NonFiniteInput(usize),
    #[error("non-finite gradient at parameter {0}")]
    NonFiniteGradient(usize),
    #[error("forward cache is stale (parameters changed since the forward pass)")]
    StaleCache,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed model file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
        }
    }

    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Identity => 1,
        }
    }

    fn from_code(code: u8) -> Result<Self, NetError> {
        match code {
            0 => Ok(Activation::Relu),
            1 => Ok(Activation::Identity),
            other => Err(NetError::Format(format!("unknown activation code {other}"))),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relu" => Ok(Activation::Relu),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(format!("unknown activation '{other}'")),
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        })
    }
}

/// Feed-forward network whose outputs are hard-clamped to `[-clamp, clamp]`.
#[derive(Debug, Clone)]
pub struct DenseNet {
    dims: Vec<usize>,
    params: Vec<f64>,
    activation: Activation,
    clamp: f64,
    version: u64,
}

impl PartialEq for DenseNet {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims
            && self.activation == other.activation
            && self.clamp == other.clamp
            && self.params == other.params
    }
}

/// Per-example state recorded by [`DenseNet::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    /// Input to every layer (`inputs[0]` is `x`).
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of every layer.
    pre: Vec<Vec<f64>>,
    /// Clamped outputs.
    pub output: Vec<f64>,
}

impl ForwardCache {
    /// Whether output coordinate `j` was clipped by the clamp.
    pub fn clamped(&self, j: usize, bound: f64) -> bool {
        self.pre.last().is_some_and(|p| p[j].abs() > bound)
    }

    /// Which side of every non-smooth point the pass landed on: the sign of
    /// each hidden pre-activation and whether each output was clamped.
    pub fn kink_signature(&self, bound: f64) -> Vec<bool> {
        let layers = self.pre.len();
        self.pre
            .iter()
            .enumerate()
            .flat_map(|(l, z)| z.iter().map(move |&v| if l + 1 == layers { v.abs() > bound } else { v > 0.0 }))
            .collect()
    }
}

fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl DenseNet {
    /// Uniform init in `[-1/√fan_in, 1/√fan_in]` for weights and biases.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], activation: Activation, clamp: f64, rng: &mut R) -> Self {
        let mut net = Self::zeros(dims, activation, clamp);
        let mut offset = 0;
        for w in dims.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            let len = w[0] * w[1] + w[1];
            for p in &mut net.params[offset..offset + len] {
                *p = rng.random_range(-bound..=bound);
            }
            offset += len;
        }
        net
    }

    pub fn zeros(dims: &[usize], activation: Activation, clamp: f64) -> Self {
        assert!(dims.len() >= 2, "a network needs input and output dimensions");
        assert!(clamp > 0.0, "clamp bound must be positive");
        Self { dims: dims.to_vec(), params: vec![0.0; param_count(dims)], activation, clamp, version: 0 }
    }

    /// `[q, hidden.., out]`; an empty `hidden` gives a linear model.
    pub fn layout(q: usize, hidden: &[usize], out: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(q);
        dims.extend_from_slice(hidden);
        dims.push(out);
        dims
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("non-empty dims")
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn clamp_bound(&self) -> f64 {
        self.clamp
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable parameter access; invalidates outstanding forward caches.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.version += 1;
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardCache, NetError> {
        if x.len() != self.input_dim() {
            return Err(NetError::InputDim { expected: self.input_dim(), found: x.len() });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(NetError::NonFiniteInput(i));
        }
        let layers = self.dims.len() - 1;
        let mut inputs = Vec::with_capacity(layers);
        let mut pre = Vec::with_capacity(layers);
        let mut current = x.to_vec();
        let mut offset = 0;
        for (l, w) in self.dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + fan_in * fan_out];
            let bias = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            let z: Vec<f64> = (0..fan_out)
                .map(|o| {
                    let row = &weights[o * fan_in..(o + 1) * fan_in];
                    row.iter().zip(&current).map(|(a, b)| a * b).sum::<f64>() + bias[o]
                })
                .collect();
            let next = if l + 1 == layers {
                z.iter().map(|v| v.clamp(-self.clamp, self.clamp)).collect()
            } else {
                z.iter().map(|&v| self.activation.apply(v)).collect()
            };
            inputs.push(std::mem::replace(&mut current, next));
            pre.push(z);
            offset += fan_in * fan_out + fan_out;
        }
        Ok(ForwardCache { version: self.version, inputs, pre, output: current })
    }

    /// Clamped scores without keeping a cache.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>, NetError> {
        self.forward(x).map(|c| c.output)
    }

    /// Reverse-mode gradient of `grad_scores · scores` w.r.t. all parameters.
    pub fn backward(&self, cache: &ForwardCache, grad_scores: &[f64]) -> Result<Vec<f64>, NetError> {
        let mut grads = vec![0.0; self.params.len()];
        self.backward_into(cache, grad_scores, &mut grads)?;
        Ok(grads)
    }

    /// As [`Self::backward`], accumulating into `acc`.
    pub fn backward_into(&self, cache: &ForwardCache, grad_scores: &[f64], acc: &mut [f64]) -> Result<(), NetError> {
        if cache.version != self.version {
            return Err(NetError::StaleCache);
        }
        if grad_scores.len() != self.output_dim() {
            return Err(NetError::GradDim { expected: self.output_dim(), found: grad_scores.len() });
        }
        if acc.len() != self.params.len() {
            return Err(NetError::GradDim { expected: self.params.len(), found: acc.len() });
        }
        let layers = self.dims.len() - 1;
        let last_pre = &cache.pre[layers - 1];
        // clamp: zero gradient outside [-A, A]
        let mut delta: Vec<f64> = grad_scores
            .iter()
            .zip(last_pre)
            .map(|(&g, &z)| if z.abs() > self.clamp { 0.0 } else { g })
            .collect();
        let mut offsets = Vec::with_capacity(layers);
        let mut offset = 0;
        for w in self.dims.windows(2) {
            offsets.push(offset);
            offset += w[0] * w[1] + w[1];
        }
        for l in (0..layers).rev() {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let base = offsets[l];
            let input = &cache.inputs[l];
            for o in 0..fan_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &mut acc[base + o * fan_in..base + (o + 1) * fan_in];
                for (g, &x) in row.iter_mut().zip(input) {
                    *g += d * x;
                }
                acc[base + fan_in * fan_out + o] += d;
            }
            if l == 0 {
                break;
            }
            let weights = &self.params[base..base + fan_in * fan_out];
            let prev_pre = &cache.pre[l - 1];
            let mut next = vec![0.0; fan_in];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (n, &w) in next.iter_mut().zip(&weights[o * fan_in..(o + 1) * fan_in]) {
                    *n += d * w;
                }
            }
            for (n, &z) in next.iter_mut().zip(prev_pre) {
                *n *= self.activation.derivative(z);
            }
            delta = next;
        }
        Ok(())
    }

    pub(crate) fn write_to(&self, out: &mut Vec<u8>) {
        out.push(self.activation.code());
        out.extend_from_slice(&self.clamp.to_le_bytes());
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
    }

    pub(crate) fn read_from(reader: &mut ByteReader<'_>) -> Result<Self, NetError> {
        let activation = Activation::from_code(reader.u8()?)?;
        let clamp = reader.f64()?;
        if !(clamp > 0.0) || !clamp.is_finite() {
            return Err(NetError::Format(format!("invalid clamp bound {clamp}")));
        }
        let ndims = reader.u32()? as usize;
        if !(2..=64).contains(&ndims) {
            return Err(NetError::Format(format!("implausible layer count {ndims}")));
        }
        let dims = (0..ndims).map(|_| reader.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        if dims.contains(&0) {
            return Err(NetError::Format("zero-width layer".into()));
        }
        let mut net = Self::zeros(&dims, activation, clamp);
        for p in net.params.iter_mut() {
            *p = reader.f64()?;
            if !p.is_finite() {
                return Err(NetError::Format("non-finite parameter".into()));
            }
        }
        Ok(net)
    }
}

pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], NetError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| NetError::Format("unexpected end of file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8, NetError> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32, NetError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub(crate) fn f64(&mut self) -> Result<f64, NetError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

/// Scale constants of `λ = a·exp(s/γ) + b`, shared by both branches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformConfig {
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
}

impl Default for TransformConfig {
    fn default() -> Self {
        Self { a: 1.0, b: 0.0, gamma: 1.0 }
    }
}

impl TransformConfig {
    /// `a > 0` (not `a ≥ 1`, so that small-`a` sensitivity sweeps are possible),
    /// `b ≥ 0`, `γ > 0`, and `a·exp(A/γ) + b` must stay finite.
    pub fn validate(&self, clamp: f64) -> Result<(), NetError> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(NetError::Config(format!("a must be positive, got {}", self.a)));
        }
        if !(self.b >= 0.0 && self.b.is_finite()) {
            return Err(NetError::Config(format!("b must be non-negative, got {}", self.b)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(NetError::Config(format!("gamma must be positive, got {}", self.gamma)));
        }
        let top = self.a * (clamp / self.gamma).exp() + self.b;
        if !top.is_finite() || top > 1e300 {
            return Err(NetError::Config(format!(
                "a·exp(A/γ) + b overflows for A={clamp}, γ={}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// Floored transform of a single score.
    pub fn apply(&self, s: f64) -> f64 {
        floor_param(self.a * (s / self.gamma).exp() + self.b)
    }

    /// Derivative of [`Self::apply`] w.r.t. the score (zero on the floor).
    pub fn derivative(&self, s: f64) -> f64 {
        let raw = self.a * (s / self.gamma).exp() + self.b;
        if raw < PARAM_FLOOR {
            0.0
        } else {
            self.a / self.gamma * (s / self.gamma).exp()
        }
    }

    /// Smallest and largest parameter reachable with scores in `[-A, A]`.
    pub fn range(&self, clamp: f64) -> (f64, f64) {
        (self.apply(-clamp), self.apply(clamp))
    }
}

/// Dirichlet parameters from main-branch scores.
pub fn lambda_transform(scores: &[f64], cfg: &TransformConfig) -> DirichletParams {
    DirichletParams::new(scores.iter().map(|&s| cfg.apply(s)).collect()).expect("transform output is floored")
}

/// Beta parameters from the `2c` auxiliary scores: first half α, second half β.
pub fn lambda_transform_pair(scores: &[f64], cfg: &TransformConfig) -> BetaParams {
    let c = scores.len() / 2;
    let alpha = scores[..c].iter().map(|&s| cfg.apply(s)).collect();
    let beta = scores[c..].iter().map(|&s| cfg.apply(s)).collect();
    BetaParams::new(alpha, beta).expect("transform output is floored")
}

/// Mini-batch SGD with classical momentum: `v ← μv + g`, `w ← w − ηv`.
#[derive(Debug, Clone)]
pub struct SgdState {
    pub lr: f64,
    pub momentum: f64,
    /// L2 coefficient folded into the gradient before the momentum update.
    pub weight_decay: f64,
    velocity: Vec<f64>,
}

impl SgdState {
    pub fn new(lr: f64, momentum: f64, weight_decay: f64, num_params: usize) -> Result<Self, NetError> {
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(NetError::Config(format!("learning rate must be non-negative, got {lr}")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(NetError::Config(format!("momentum must lie in [0, 1), got {momentum}")));
        }
        if !(weight_decay >= 0.0 && weight_decay.is_finite()) {
            return Err(NetError::Config(format!("weight decay must be non-negative, got {weight_decay}")));
        }
        Ok(Self { lr, momentum, weight_decay, velocity: vec![0.0; num_params] })
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    /// Rejects the whole step if any gradient entry is non-finite.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), NetError> {
        if grads.len() != params.len() || params.len() != self.velocity.len() {
            return Err(NetError::GradDim { expected: self.velocity.len(), found: grads.len() });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(NetError::NonFiniteGradient(i));
        }
        for ((w, v), &g) in params.iter_mut().zip(self.velocity.iter_mut()).zip(grads) {
            let g = g + self.weight_decay * *w;
            *v = self.momentum * *v + g;
            *w -= self.lr * *v;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn zero_net_outputs_zero() {
        let net = DenseNet::zeros(&[3, 5, 4], Activation::Relu, 20.0);
        assert_eq!(net.scores(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn linear_layer_is_affine() {
        let mut net = DenseNet::zeros(&[2, 2], Activation::Identity, 20.0);
        net.params_mut().copy_from_slice(&[1.0, 2.0, 3.0, 4.0, 0.5, -0.5]);
        assert_eq!(net.scores(&[1.0, 1.0]).unwrap(), vec![3.5, 6.5]);
    }

    #[test]
    fn output_is_clamped() {
        let mut net = DenseNet::zeros(&[1, 2], Activation::Identity, 3.0);
        net.params_mut().copy_from_slice(&[6.0, -6.0, 0.0, 0.0]);
        let cache = net.forward(&[1.0]).unwrap();
        assert_eq!(cache.output, vec![3.0, -3.0]);
        assert!(cache.clamped(0, 3.0) && cache.clamped(1, 3.0));
        // clamped coordinates pass no gradient
        let g = net.backward(&cache, &[1.0, 1.0]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_gradient_is_outer_product() {
        let mut r = rng(1);
        let net = DenseNet::new(&[3, 2], Activation::Identity, 20.0, &mut r);
        let x = [0.5, -1.0, 2.0];
        let cache = net.forward(&x).unwrap();
        let g = net.backward(&cache, &[2.0, -3.0]).unwrap();
        let expected = [1.0, -2.0, 4.0, -1.5, 3.0, -6.0, 2.0, -3.0];
        assert_eq!(g, expected);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut r = rng(9);
        for activation in [Activation::Relu, Activation::Identity] {
            let net = DenseNet::new(&[4, 7, 5, 3], activation, 20.0, &mut r);
            let x: Vec<f64> = (0..4).map(|_| r.random_range(-2.0..2.0)).collect();
            let upstream = [0.7, -1.3, 0.4];
            let cache = net.forward(&x).unwrap();
            let analytic = net.backward(&cache, &upstream).unwrap();
            let h = 1e-5;
            for k in 0..net.num_params() {
                let mut up = net.clone();
                up.params_mut()[k] += h;
                let mut dn = net.clone();
                dn.params_mut()[k] -= h;
                let f = |n: &DenseNet| n.scores(&x).unwrap().iter().zip(&upstream).map(|(s, u)| s * u).sum::<f64>();
                let fd = (f(&up) - f(&dn)) / (2.0 * h);
                let denom = analytic[k].abs().max(fd.abs()).max(1e-8);
                assert!((analytic[k] - fd).abs() / denom < 1e-6, "param {k}: {} vs {fd}", analytic[k]);
            }
        }
    }

    #[test]
    fn stale_cache_is_detected() {
        let mut r = rng(2);
        let mut net = DenseNet::new(&[2, 2], Activation::Identity, 20.0, &mut r);
        let cache = net.forward(&[1.0, 1.0]).unwrap();
        net.params_mut()[0] += 1.0;
        assert_eq!(net.backward(&cache, &[1.0, 1.0]), Err(NetError::StaleCache));
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let net = DenseNet::zeros(&[2, 2], Activation::Identity, 20.0);
        assert_eq!(net.forward(&[1.0, f64::NAN]).unwrap_err(), NetError::NonFiniteInput(1));
        assert!(matches!(net.forward(&[1.0]), Err(NetError::InputDim { .. })));
    }

    #[test]
    fn init_is_bounded_by_fan_in() {
        let mut r = rng(3);
        let net = DenseNet::new(&[16, 4], Activation::Relu, 20.0, &mut r);
        assert!(net.params().iter().all(|p| p.abs() <= 0.25));
    }

    #[test]
    fn transform_examples() {
        let cfg = TransformConfig::default();
        assert_eq!(cfg.apply(0.0), 1.0);
        let cfg = TransformConfig { a: 2.0, b: 1.0, gamma: 0.5 };
        assert!((cfg.apply(1.0) - (2.0 * 2f64.exp() + 1.0)).abs() < 1e-12);
        assert!((cfg.apply(1.0) - 15.778_112_197_861_3).abs() < 1e-9);
        let h = 1e-6;
        for s in [-3.0, -0.2, 0.0, 1.7, 4.0] {
            let fd = (cfg.apply(s + h) - cfg.apply(s - h)) / (2.0 * h);
            assert!((cfg.derivative(s) - fd).abs() / fd.abs() < 1e-8);
        }
    }

    #[test]
    fn transform_pair_splits_output() {
        let cfg = TransformConfig::default();
        let p = lambda_transform_pair(&[0.0, 1.0, -1.0, 2.0], &cfg);
        assert_eq!(p.alpha(), &[1.0, 1f64.exp()]);
        assert_eq!(p.beta(), &[(-1f64).exp(), 2f64.exp()]);
        let p = lambda_transform_pair(&[-20.0; 6], &TransformConfig { a: 0.001, b: 0.0, gamma: 0.1 });
        assert!(p.alpha().iter().chain(p.beta()).all(|&v| v > 0.0));
        let single = lambda_transform(&[0.0, 1.0], &cfg);
        assert_eq!(single.as_slice(), &p_alpha_of(&[0.0, 1.0], &cfg));
    }

    fn p_alpha_of(s: &[f64], cfg: &TransformConfig) -> Vec<f64> {
        s.iter().map(|&v| cfg.apply(v)).collect()
    }

    #[test]
    fn transform_validation() {
        assert!(TransformConfig::default().validate(20.0).is_ok());
        assert!(TransformConfig { a: 0.0, ..Default::default() }.validate(20.0).is_err());
        assert!(TransformConfig { b: -1.0, ..Default::default() }.validate(20.0).is_err());
        assert!(TransformConfig { gamma: 0.01, ..Default::default() }.validate(20.0).is_err());
    }

    #[test]
    fn sgd_examples() {
        let mut s = SgdState::new(0.1, 0.0, 0.0, 2).unwrap();
        let mut w = [1.0, 2.0];
        s.step(&mut w, &[1.0, -1.0]).unwrap();
        assert_eq!(w, [0.9, 2.1]);

        let (lr, mu) = (0.1, 0.9);
        let mut s = SgdState::new(lr, mu, 0.0, 1).unwrap();
        let mut w = [0.0];
        s.step(&mut w, &[1.0]).unwrap();
        s.step(&mut w, &[1.0]).unwrap();
        assert!((w[0] - (-lr * (2.0 + mu))).abs() < 1e-15);

        let mut s = SgdState::new(0.0, 0.9, 0.0, 1).unwrap();
        let mut w = [3.0];
        s.step(&mut w, &[5.0]).unwrap();
        assert_eq!(w, [3.0]);

        let mut s = SgdState::new(0.1, 0.9, 0.0, 2).unwrap();
        let mut w = [3.0, 1.0];
        assert_eq!(s.step(&mut w, &[1.0, f64::INFINITY]), Err(NetError::NonFiniteGradient(1)));
        assert_eq!(w, [3.0, 1.0]);
        assert!(SgdState::new(0.1, 1.0, 0.0, 1).is_err());
    }
}
