//! Finite-difference verification of every analytic gradient.
//!
//! Each component is checked on random small instances with central
//! differences of step [`STEP`]. The error of one trial is
//! `‖a − n‖ / (‖a‖ + ‖n‖)` over the whole gradient vector (0 when both
//! vanish). Parameters whose perturbation crosses a ReLU kink, the output
//! clamp, or the transform floor are left out of both vectors.

use std::fmt;

use rand::Rng;

use crate::distributions::{beta_posterior_mean_partials, beta_posterior_mean_raw, dirichlet_posterior_mean_into, dirichlet_posterior_mean_vjp, PARAM_FLOOR};
use crate::network::{Activation, DenseNet, TransformConfig};
use crate::objective::{map_loss_live, ml_loss, reg_loss, PosteriorParams, PriorValues};
use crate::rng;

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    Forward,
    Transform,
    DirichletMean,
    BetaMean,
    Likelihood,
    Prior,
    MapEndToEnd,
}

impl Component {
    pub const ALL: [Component; 7] = [
        Component::Forward,
        Component::Transform,
        Component::DirichletMean,
        Component::BetaMean,
        Component::Likelihood,
        Component::Prior,
        Component::MapEndToEnd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Component::Forward => "forward",
            Component::Transform => "transform",
            Component::DirichletMean => "dirichlet-mean",
            Component::BetaMean => "beta-mean",
            Component::Likelihood => "likelihood",
            Component::Prior => "prior",
            Component::MapEndToEnd => "map-end-to-end",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

#[derive(Debug, Clone)]
pub struct GradcheckOptions {
    pub seed: u64,
    pub trials: usize,
    /// Negate the analytic gradient of one component (fault injection).
    pub sign_flip: Option<Component>,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self { seed: 0, trials: 100, sign_flip: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentResult {
    pub component: Component,
    pub max_rel_error: f64,
    pub trials: usize,
}

impl ComponentResult {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= TOLERANCE
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub results: Vec<ComponentResult>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(ComponentResult::passed)
    }
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.results {
            writeln!(
                f,
                "{:<16} max_rel_error={:.3e} trials={} {}",
                r.component.name(),
                r.max_rel_error,
                r.trials,
                if r.passed() { "PASS" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, n)| a - n));
    let scale = norm(&mut analytic.iter().copied()) + norm(&mut numeric.iter().copied());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn central(mut f: impl FnMut(f64) -> f64, x: f64) -> f64 {
    (f(x + STEP) - f(x - STEP)) / (2.0 * STEP)
}

fn flip(v: &mut [f64], on: bool) {
    if on {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Run every component for `opts.trials` random instances.
pub fn run(opts: &GradcheckOptions) -> GradcheckReport {
    GradcheckReport { results: Component::ALL.iter().map(|&c| check_component(c, opts)).collect() }
}

pub fn check_component(component: Component, opts: &GradcheckOptions) -> ComponentResult {
    let mut g = rng::stream(opts.seed, "gradcheck", component as u64);
    let flipped = opts.sign_flip == Some(component);
    let mut max_rel_error: f64 = 0.0;
    for trial in 0..opts.trials {
        let c = [3, 5, 10][trial % 3];
        let err = match component {
            Component::Forward => trial_forward(&mut g, c, flipped),
            Component::Transform => trial_transform(&mut g, flipped),
            Component::DirichletMean => trial_dirichlet(&mut g, c, flipped),
            Component::BetaMean => trial_beta(&mut g, flipped),
            Component::Likelihood => trial_objective(&mut g, c, false, flipped),
            Component::Prior => trial_objective(&mut g, c, true, flipped),
            Component::MapEndToEnd => trial_map(&mut g, c, flipped),
        };
        max_rel_error = max_rel_error.max(if err.is_nan() { f64::INFINITY } else { err });
    }
    ComponentResult { component, max_rel_error, trials: opts.trials }
}

fn random_transform(g: &mut rng::Rng) -> TransformConfig {
    if g.random_bool(0.5) {
        TransformConfig::default()
    } else {
        TransformConfig { a: g.random_range(0.5..2.0), b: g.random_range(0.0..1.0), gamma: g.random_range(1.0..3.0) }
    }
}

fn random_net(g: &mut rng::Rng, q: usize, hidden: usize, out: usize) -> DenseNet {
    DenseNet::new(&[q, hidden, out], Activation::Relu, 20.0, g)
}

fn random_candidates(g: &mut rng::Rng, c: usize) -> Vec<usize> {
    let size = g.random_range(1..c);
    let mut labels: Vec<usize> = (0..c).collect();
    rand::seq::SliceRandom::shuffle(&mut labels[..], g);
    let mut s = labels[..size].to_vec();
    s.sort_unstable();
    s
}

fn random_simplex(g: &mut rng::Rng, c: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..c).map(|_| g.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v / total).collect()
}

fn trial_forward(g: &mut rng::Rng, c: usize, flipped: bool) -> f64 {
    let q = g.random_range(2..=6);
    let hidden = g.random_range(1..=32);
    let mut net = random_net(g, q, hidden, c);
    let x: Vec<f64> = (0..q).map(|_| g.random_range(-1.5..1.5)).collect();
    let v: Vec<f64> = (0..c).map(|_| g.random_range(-1.0..1.0)).collect();
    let cache = net.forward(&x).expect("valid input");
    let sig = cache.kink_signature(net.clamp_bound());
    let mut analytic = net.backward(&cache, &v).expect("fresh cache");
    flip(&mut analytic, flipped);
    let (mut a, mut n) = (Vec::new(), Vec::new());
    for k in 0..net.num_params() {
        let base = net.params()[k];
        let mut smooth = true;
        let num = central(
            |p| {
                net.params_mut()[k] = p;
                let fc = net.forward(&x).expect("valid input");
                smooth &= fc.kink_signature(net.clamp_bound()) == sig;
                fc.output.iter().zip(&v).map(|(s, w)| s * w).sum()
            },
            base,
        );
        net.params_mut()[k] = base;
        if smooth {
            a.push(analytic[k]);
            n.push(num);
        }
    }
    relative_error(&a, &n)
}

fn trial_transform(g: &mut rng::Rng, flipped: bool) -> f64 {
    let cfg = random_transform(g);
    let s: Vec<f64> = (0..8).map(|_| g.random_range(-4.0..4.0)).collect();
    let mut analytic: Vec<f64> = s.iter().map(|&v| cfg.derivative(v)).collect();
    flip(&mut analytic, flipped);
    let numeric: Vec<f64> = s.iter().map(|&v| central(|x| cfg.apply(x), v)).collect();
    relative_error(&analytic, &numeric)
}

fn trial_dirichlet(g: &mut rng::Rng, c: usize, flipped: bool) -> f64 {
    let mut lambda: Vec<f64> = (0..c).map(|_| g.random_range(0.1..5.0)).collect();
    let o: Vec<u8> = (0..c).map(|_| u8::from(g.random_bool(0.4))).collect();
    let v: Vec<f64> = (0..c).map(|_| g.random_range(-1.0..1.0)).collect();
    let mut analytic = dirichlet_posterior_mean_vjp(&lambda, &o, &v);
    flip(&mut analytic, flipped);
    let mut out = vec![0.0; c];
    let numeric: Vec<f64> = (0..c)
        .map(|k| {
            let base = lambda[k];
            let d = central(
                |x| {
                    lambda[k] = x;
                    dirichlet_posterior_mean_into(&lambda, &o, &mut out);
                    out.iter().zip(&v).map(|(t, w)| t * w).sum()
                },
                base,
            );
            lambda[k] = base;
            d
        })
        .collect();
    relative_error(&analytic, &numeric)
}

fn trial_beta(g: &mut rng::Rng, flipped: bool) -> f64 {
    let (alpha, beta) = (g.random_range(0.1..5.0), g.random_range(0.1..5.0));
    let o = u8::from(g.random_bool(0.5));
    let (pa, pb) = beta_posterior_mean_partials(alpha, beta, o);
    let mut analytic = vec![pa, pb];
    flip(&mut analytic, flipped);
    let numeric = vec![
        central(|x| beta_posterior_mean_raw(x, beta, o), alpha),
        central(|x| beta_posterior_mean_raw(alpha, x, o), beta),
    ];
    relative_error(&analytic, &numeric)
}

fn random_prior(g: &mut rng::Rng, c: usize, s: &[usize]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let lambda = (0..c).map(|j| if s.contains(&j) { g.random_range(0.5..5.0) } else { 1.001 }).collect();
    let alpha = (0..c).map(|_| g.random_range(0.5..5.0)).collect();
    let beta = (0..c).map(|_| g.random_range(0.5..5.0)).collect();
    (lambda, alpha, beta)
}

fn trial_objective(g: &mut rng::Rng, c: usize, prior_term: bool, flipped: bool) -> f64 {
    let s = random_candidates(g, c);
    let mut theta = random_simplex(g, c);
    let mut z: Vec<f64> = (0..c).map(|_| g.random_range(0.05..0.95)).collect();
    let (pl, pa, pb) = random_prior(g, c, &s);
    let prior = PriorValues { lambda: &pl, alpha: &pa, beta: &pb };
    let eval = |theta: &[f64], z: &[f64]| {
        if prior_term {
            reg_loss(theta, z, prior).expect("valid instance")
        } else {
            ml_loss(theta, z, &s).expect("valid instance")
        }
    };
    let base = eval(&theta, &z);
    let mut analytic: Vec<f64> = base.d_theta.iter().chain(&base.d_z).copied().collect();
    flip(&mut analytic, flipped);
    let mut numeric = Vec::with_capacity(2 * c);
    for k in 0..c {
        let b = theta[k];
        numeric.push(central(
            |x| {
                theta[k] = x;
                eval(&theta, &z).value
            },
            b,
        ));
        theta[k] = b;
    }
    for k in 0..c {
        let b = z[k];
        numeric.push(central(
            |x| {
                z[k] = x;
                eval(&theta, &z).value
            },
            b,
        ));
        z[k] = b;
    }
    relative_error(&analytic, &numeric)
}

struct MapCase {
    x: Vec<f64>,
    s: Vec<usize>,
    prior: (Vec<f64>, Vec<f64>, Vec<f64>),
    transform: TransformConfig,
}

impl MapCase {
    fn loss(&self, main: &DenseNet, aux: &DenseNet) -> (f64, Vec<bool>) {
        let fm = main.forward(&self.x).expect("valid input");
        let fa = aux.forward(&self.x).expect("valid input");
        let mut sig = fm.kink_signature(main.clamp_bound());
        sig.extend(fa.kink_signature(aux.clamp_bound()));
        let t = &self.transform;
        sig.extend(fm.output.iter().chain(&fa.output).map(|&v| t.a * (v / t.gamma).exp() + t.b < PARAM_FLOOR));
        let c = fm.output.len();
        let lambda: Vec<f64> = fm.output.iter().map(|&v| t.apply(v)).collect();
        let alpha: Vec<f64> = fa.output[..c].iter().map(|&v| t.apply(v)).collect();
        let beta: Vec<f64> = fa.output[c..].iter().map(|&v| t.apply(v)).collect();
        let post = PosteriorParams::from_live(&lambda, &alpha, &beta, &self.s);
        let prior = PriorValues { lambda: &self.prior.0, alpha: &self.prior.1, beta: &self.prior.2 };
        (map_loss_live(&post, prior, &self.s, false).expect("valid instance").value, sig)
    }

    fn gradient(&self, main: &DenseNet, aux: &DenseNet) -> Vec<f64> {
        let fm = main.forward(&self.x).expect("valid input");
        let fa = aux.forward(&self.x).expect("valid input");
        let t = &self.transform;
        let c = fm.output.len();
        let lambda: Vec<f64> = fm.output.iter().map(|&v| t.apply(v)).collect();
        let alpha: Vec<f64> = fa.output[..c].iter().map(|&v| t.apply(v)).collect();
        let beta: Vec<f64> = fa.output[c..].iter().map(|&v| t.apply(v)).collect();
        let post = PosteriorParams::from_live(&lambda, &alpha, &beta, &self.s);
        let prior = PriorValues { lambda: &self.prior.0, alpha: &self.prior.1, beta: &self.prior.2 };
        let loss = map_loss_live(&post, prior, &self.s, false).expect("valid instance");
        let up_main: Vec<f64> = loss.d_lambda.iter().zip(&fm.output).map(|(d, &v)| d * t.derivative(v)).collect();
        let up_aux: Vec<f64> = (0..2 * c)
            .map(|k| {
                let d = if k < c { loss.d_alpha[k] } else { loss.d_beta[k - c] };
                d * t.derivative(fa.output[k])
            })
            .collect();
        let mut grad = main.backward(&fm, &up_main).expect("fresh cache");
        grad.extend(aux.backward(&fa, &up_aux).expect("fresh cache"));
        grad
    }
}

fn trial_map(g: &mut rng::Rng, c: usize, flipped: bool) -> f64 {
    let q = g.random_range(2..=6);
    let hidden = g.random_range(1..=32);
    let mut main = random_net(g, q, hidden, c);
    let mut aux = random_net(g, q, hidden, 2 * c);
    let s = random_candidates(g, c);
    let case = MapCase {
        x: (0..q).map(|_| g.random_range(-1.5..1.5)).collect(),
        prior: random_prior(g, c, &s),
        s,
        transform: random_transform(g),
    };
    let (_, sig) = case.loss(&main, &aux);
    let mut analytic = case.gradient(&main, &aux);
    flip(&mut analytic, flipped);
    let split = main.num_params();
    let (mut a, mut n) = (Vec::new(), Vec::new());
    for k in 0..split + aux.num_params() {
        let mut smooth = true;
        let mut eval = |x: f64, main: &mut DenseNet, aux: &mut DenseNet| {
            if k < split {
                main.params_mut()[k] = x;
            } else {
                aux.params_mut()[k - split] = x;
            }
            let (v, s2) = case.loss(main, aux);
            smooth &= s2 == sig;
            v
        };
        let base = if k < split { main.params()[k] } else { aux.params()[k - split] };
        let num = (eval(base + STEP, &mut main, &mut aux) - eval(base - STEP, &mut main, &mut aux)) / (2.0 * STEP);
        eval(base, &mut main, &mut aux);
        if smooth {
            a.push(analytic[k]);
            n.push(num);
        }
    }
    relative_error(&a, &n)
}
