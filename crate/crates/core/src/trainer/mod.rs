//! Alternating two-network training.
//!
//! Each mini-batch runs one step of the auxiliary (Beta) network with the
//! main network fixed, followed by one step of the main (Dirichlet) network
//! against a fresh forward pass of the updated auxiliary network. Priors
//! come from a [`PriorCache`] which snapshots live parameters at the end of
//! epochs `r` and `q`.
//!
//! Per-instance work inside a batch may run on a rayon pool; gradients are
//! always summed in instance order, so results do not depend on the thread
//! count.

mod config;
mod model;
mod prior;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, PllDataset};
use crate::distributions::{argmax, Simplex};
use crate::evaluation::accuracy;
use crate::network::{lambda_transform, DenseNet, ForwardCache, NetError, SgdState, TransformConfig};
use crate::objective::{map_loss, map_loss_live, map_upper_bound, ObjectiveError, PerInstanceLossInput, PosteriorParams, PriorValues};
use crate::rng;

pub use config::TrainConfig;
pub use model::TrainedModel;
pub use prior::PriorCache;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}, instance {instance}")]
    NonFiniteLoss { epoch: usize, batch: usize, instance: usize },
    #[error("feature dimension {found} does not match the model's {expected}")]
    Dimension { expected: usize, found: usize },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// One line of the training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-instance objective seen by the auxiliary step.
    pub train_loss: f64,
    pub val_acc: Option<f64>,
    /// Mean of `bound − MAP loss` over the epoch.
    pub bound_gap: f64,
}

/// Prior values used for one instance during one auxiliary step.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorTrace {
    pub epoch: usize,
    pub instance: usize,
    pub live_lambda: Vec<f64>,
    pub lambda_hat: Vec<f64>,
    pub live_alpha: Vec<f64>,
    pub alpha_hat: Vec<f64>,
    pub live_beta: Vec<f64>,
    pub beta_hat: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FitOutput {
    pub model: TrainedModel,
    pub history: Vec<EpochRecord>,
}

struct Live {
    main: ForwardCache,
    aux: ForwardCache,
    lambda: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

struct InstanceGrad {
    loss: f64,
    gap: f64,
    grad: Vec<f64>,
}

/// Stateful trainer over one training set.
pub struct Trainer<'a> {
    config: TrainConfig,
    data: &'a PllDataset,
    main: DenseNet,
    aux: DenseNet,
    main_sgd: SgdState,
    aux_sgd: SgdState,
    cache: PriorCache,
    pool: Option<rayon::ThreadPool>,
    trace: Option<Vec<PriorTrace>>,
    epoch: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(config: TrainConfig, data: &'a PllDataset) -> Result<Self, TrainError> {
        config.validate()?;
        let (q, c) = (data.q(), data.c());
        let mut init = rng::stream(config.seed, rng::INIT, 0);
        let main = DenseNet::new(&DenseNet::layout(q, &config.hidden, c), config.activation, config.clamp, &mut init);
        let aux = DenseNet::new(&DenseNet::layout(q, &config.hidden, 2 * c), config.activation, config.clamp, &mut init);
        let main_sgd = SgdState::new(config.lr, config.momentum, config.weight_decay, main.num_params())?;
        let aux_sgd = SgdState::new(config.aux_lr, config.aux_momentum, config.weight_decay, aux.num_params())?;
        let cache =
            PriorCache::new(data.candidate_sets(), c, config.epsilon, config.m, config.d, config.r, config.q);
        let pool = if config.threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(config.threads)
                    .build()
                    .map_err(|e| TrainError::Config(e.to_string()))?,
            )
        } else {
            None
        };
        Ok(Self { config, data, main, aux, main_sgd, aux_sgd, cache, pool, trace: None, epoch: 0 })
    }

    /// Record the priors used for every instance from now on.
    pub fn record_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn take_trace(&mut self) -> Vec<PriorTrace> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn main_net(&self) -> &DenseNet {
        &self.main
    }

    pub fn aux_net(&self) -> &DenseNet {
        &self.aux
    }

    pub fn cache(&self) -> &PriorCache {
        &self.cache
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    pub fn model(&self) -> TrainedModel {
        TrainedModel {
            main: self.main.clone(),
            aux: self.aux.clone(),
            transform: self.config.transform,
            ml_only: self.config.ml_only,
        }
    }

    fn map_instances<T, F>(&self, items: &[usize], f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match &self.pool {
            Some(pool) => pool.install(|| items.par_iter().map(|&i| f(i)).collect()),
            None => items.iter().map(|&i| f(i)).collect(),
        }
    }

    fn forward_live(&self, i: usize) -> Result<Live, NetError> {
        let x = self.data.row(i);
        let c = self.data.c();
        let t = &self.config.transform;
        let main = self.main.forward(x)?;
        let aux = self.aux.forward(x)?;
        let lambda = main.output.iter().map(|&s| t.apply(s)).collect();
        let alpha = aux.output[..c].iter().map(|&s| t.apply(s)).collect();
        let beta = aux.output[c..].iter().map(|&s| t.apply(s)).collect();
        Ok(Live { main, aux, lambda, alpha, beta })
    }

    fn aux_score_grad(&self, scores: &[f64], d_alpha: &[f64], d_beta: &[f64], scale: f64) -> Vec<f64> {
        let c = d_alpha.len();
        let t = &self.config.transform;
        (0..2 * c)
            .map(|k| {
                let d = if k < c { d_alpha[k] } else { d_beta[k - c] };
                d * t.derivative(scores[k]) * scale
            })
            .collect()
    }

    /// Run one epoch (`t` is the 1-based epoch index). Returns the mean
    /// objective and mean bound gap.
    pub fn train_epoch(&mut self) -> Result<(f64, f64), TrainError> {
        let t = self.epoch + 1;
        let n = self.data.n();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::stream(self.config.seed, rng::SHUFFLE, t as u64));
        let (mut loss_sum, mut gap_sum) = (0.0, 0.0);
        for (b, batch) in order.chunks(self.config.batch_size).enumerate() {
            let (l, g) = self.train_batch(t, b, batch)?;
            loss_sum += l;
            gap_sum += g;
        }
        self.cache.end_epoch(t);
        self.epoch = t;
        let denom = n.max(1) as f64;
        Ok((loss_sum / denom, gap_sum / denom))
    }

    fn train_batch(&mut self, t: usize, b: usize, batch: &[usize]) -> Result<(f64, f64), TrainError> {
        let lives = self.prepare_batch(t, batch)?;
        let sums = self.aux_step(t, b, batch, &lives)?;
        self.main_step(t, b, batch, &lives)?;
        Ok(sums)
    }

    /// Forward both networks and refresh the priors of the batch.
    fn prepare_batch(&mut self, t: usize, batch: &[usize]) -> Result<Vec<Live>, TrainError> {
        let lives: Vec<Live> =
            self.map_instances(batch, |i| self.forward_live(i)).into_iter().collect::<Result<_, _>>()?;

        for (&i, live) in batch.iter().zip(&lives) {
            self.cache.refine_lambda_hat(i, &live.lambda, t);
            self.cache.refine_alpha_beta_hat(i, &live.alpha, &live.beta, t);
            debug_assert!(self.cache.lambda_contract_holds(i, &live.lambda, t));
            debug_assert!(self.cache.alpha_beta_contract_holds(i, &live.alpha, &live.beta, t));
            if let Some(trace) = self.trace.as_mut() {
                trace.push(PriorTrace {
                    epoch: t,
                    instance: i,
                    live_lambda: live.lambda.clone(),
                    lambda_hat: self.cache.lambda_hat_of(i).to_vec(),
                    live_alpha: live.alpha.clone(),
                    alpha_hat: self.cache.alpha_hat_of(i).to_vec(),
                    live_beta: live.beta.clone(),
                    beta_hat: self.cache.beta_hat_of(i).to_vec(),
                });
            }
        }
        Ok(lives)
    }

    /// One step of the auxiliary network with the main network fixed.
    fn aux_step(&mut self, t: usize, b: usize, batch: &[usize], lives: &[Live]) -> Result<(f64, f64), TrainError> {
        let scale = 1.0 / batch.len() as f64;
        let ml_only = self.config.ml_only;
        let rho = self.config.bound;
        let pos: Vec<usize> = (0..batch.len()).collect();
        let aux_grads: Vec<Result<InstanceGrad, TrainError>> = self.map_instances(&pos, |p| {
            let i = batch[p];
            let live = &lives[p];
            let s = self.data.candidates(i);
            let prior = self.prior_of(i);
            let post = PosteriorParams::from_live(&live.lambda, &live.alpha, &live.beta, s);
            let loss = map_loss_live(&post, prior, s, ml_only)?;
            if !loss.value.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch: t, batch: b, instance: i });
            }
            let input = PerInstanceLossInput { theta_hat: &post.theta_hat, z_hat: &post.z_hat, prior, candidates: s };
            let full = if ml_only { map_loss(&input, false)?.value } else { loss.value };
            let bound = map_upper_bound(&input, rho, &live.lambda)?;
            let up = self.aux_score_grad(&live.aux.output, &loss.d_alpha, &loss.d_beta, scale);
            let grad = self.aux.backward(&live.aux, &up)?;
            Ok(InstanceGrad { loss: loss.value, gap: bound.bound - full, grad })
        });
        let mut total = vec![0.0; self.aux.num_params()];
        let (mut loss_sum, mut gap_sum) = (0.0, 0.0);
        for g in aux_grads {
            let g = g?;
            loss_sum += g.loss;
            gap_sum += g.gap;
            total.iter_mut().zip(&g.grad).for_each(|(a, v)| *a += v);
        }
        self.aux_sgd.step(self.aux.params_mut(), &total)?;
        Ok((loss_sum, gap_sum))
    }

    /// One step of the main network against a fresh pass of the auxiliary one.
    fn main_step(&mut self, t: usize, b: usize, batch: &[usize], lives: &[Live]) -> Result<(), TrainError> {
        let scale = 1.0 / batch.len() as f64;
        let ml_only = self.config.ml_only;
        let pos: Vec<usize> = (0..batch.len()).collect();
        let main_grads: Vec<Result<Vec<f64>, TrainError>> = self.map_instances(&pos, |p| {
            let i = batch[p];
            let live = &lives[p];
            let c = self.data.c();
            let g = self.aux.scores(self.data.row(i))?;
            let tr = &self.config.transform;
            let alpha: Vec<f64> = g[..c].iter().map(|&s| tr.apply(s)).collect();
            let beta: Vec<f64> = g[c..].iter().map(|&s| tr.apply(s)).collect();
            let s = self.data.candidates(i);
            let post = PosteriorParams::from_live(&live.lambda, &alpha, &beta, s);
            let loss = map_loss_live(&post, self.prior_of(i), s, ml_only)?;
            if !loss.value.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch: t, batch: b, instance: i });
            }
            let up: Vec<f64> = loss
                .d_lambda
                .iter()
                .zip(&live.main.output)
                .map(|(d, &sc)| d * tr.derivative(sc) * scale)
                .collect();
            Ok(self.main.backward(&live.main, &up)?)
        });
        let mut total = vec![0.0; self.main.num_params()];
        for g in main_grads {
            total.iter_mut().zip(&g?).for_each(|(a, v)| *a += v);
        }
        self.main_sgd.step(self.main.params_mut(), &total)?;
        Ok(())
    }

    fn prior_of(&self, i: usize) -> PriorValues<'_> {
        PriorValues {
            lambda: self.cache.lambda_hat_of(i),
            alpha: self.cache.alpha_hat_of(i),
            beta: self.cache.beta_hat_of(i),
        }
    }
}

/// Train both networks for `config.epochs` epochs.
///
/// With a validation set, its accuracy is recorded after every epoch.
pub fn fit(config: &TrainConfig, train: &PllDataset, val: Option<&PllDataset>) -> Result<FitOutput, TrainError> {
    let mut trainer = Trainer::new(config.clone(), train)?;
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let (train_loss, bound_gap) = trainer.train_epoch()?;
        let val_acc = match val {
            Some(v) => Some(accuracy(&trainer.model(), v)?),
            None => None,
        };
        history.push(EpochRecord { epoch: trainer.epochs_done(), train_loss, val_acc, bound_gap });
    }
    Ok(FitOutput { model: trainer.model(), history })
}

/// Label and posterior mean from raw main-network scores.
///
/// The label is the argmax of the scores (lowest index on ties); the
/// transform is monotone, so this is also the argmax of `θ̂`.
pub fn predict_scores(scores: &[f64], cfg: &TransformConfig) -> (usize, Simplex) {
    let label = argmax(scores);
    let lambda = lambda_transform(scores, cfg).into_inner();
    let total: f64 = lambda.iter().sum();
    let theta = Simplex::new(lambda.iter().map(|l| l / total).collect()).unwrap_or_else(|_| Simplex::uniform(scores.len()));
    (label, theta)
}

pub fn predict(net: &DenseNet, x: &[f64], cfg: &TransformConfig) -> Result<(usize, Simplex), TrainError> {
    Ok(predict_scores(&net.scores(x)?, cfg))
}

/// Try each main learning rate and keep the one with the best final
/// validation accuracy (earliest on ties). Returns the chosen rate and the
/// accuracy of every candidate.
pub fn select_learning_rate(
    config: &TrainConfig,
    train: &PllDataset,
    val: &PllDataset,
    grid: &[f64],
) -> Result<(f64, Vec<(f64, f64)>), TrainError> {
    if grid.is_empty() {
        return Err(TrainError::Config("learning-rate grid is empty".into()));
    }
    let mut scores = Vec::with_capacity(grid.len());
    for &lr in grid {
        let cfg = TrainConfig { lr, aux_lr: lr, ..config.clone() };
        let out = fit(&cfg, train, None)?;
        scores.push((lr, accuracy(&out.model, val)?));
    }
    let best = scores.iter().fold(scores[0], |best, &s| if s.1 > best.1 { s } else { best });
    Ok((best.0, scores))
}

/// History as JSON lines, one [`EpochRecord`] per line.
pub fn history_to_json_lines(history: &[EpochRecord]) -> String {
    history.iter().map(|r| serde_json::to_string(r).expect("record serializes") + "\n").collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::{circle_centers, corrupt_uniform, gaussian_blobs};

    fn toy() -> PllDataset {
        let clean = gaussian_blobs(120, &circle_centers(3, 3.0), 0.5, 4).unwrap();
        corrupt_uniform(&clean, 0.3, 5).unwrap().0
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            epochs: 6,
            batch_size: 32,
            hidden: vec![8],
            r: 2,
            q: 3,
            lr: 0.01,
            aux_lr: 0.01,
            transform: TransformConfig { a: 1.0, b: 1.0, gamma: 4.0 },
            ..Default::default()
        }
    }

    #[test]
    fn zero_epochs_returns_initialised_nets() {
        let ds = toy();
        let cfg = TrainConfig { epochs: 0, ..small_config() };
        let out = fit(&cfg, &ds, None).unwrap();
        assert!(out.history.is_empty());
        let fresh = Trainer::new(cfg, &ds).unwrap();
        assert_eq!(out.model.main.params(), fresh.main_net().params());
    }

    #[test]
    fn training_is_deterministic_and_thread_independent() {
        let ds = toy();
        let a = fit(&small_config(), &ds, Some(&ds)).unwrap();
        let b = fit(&small_config(), &ds, Some(&ds)).unwrap();
        let c = fit(&TrainConfig { threads: 3, ..small_config() }, &ds, Some(&ds)).unwrap();
        assert_eq!(a.model.main.params(), b.model.main.params());
        assert_eq!(a.model.main.params(), c.model.main.params());
        assert_eq!(a.model.aux.params(), c.model.aux.params());
        assert_eq!(a.history, c.history);
    }

    #[test]
    fn fifty_instance_toy_loss_ends_below_start() {
        let clean = gaussian_blobs(50, &circle_centers(3, 3.0), 0.5, 4).unwrap();
        let ds = corrupt_uniform(&clean, 0.3, 5).unwrap().0;
        let cfg = TrainConfig { epochs: 200, batch_size: 16, hidden: vec![8], lr: 0.01, aux_lr: 0.01, ..Default::default() };
        let out = fit(&cfg, &ds, None).unwrap();
        let (first, last) = (out.history[0].train_loss, out.history[199].train_loss);
        assert!(last < first, "{first} -> {last}");
        let ml = fit(&TrainConfig { ml_only: true, ..cfg }, &ds, None).unwrap();
        assert!(ml.history[199].train_loss < ml.history[0].train_loss);
    }

    #[test]
    fn toy_blobs_are_learned() {
        let ds = toy();
        let cfg = TrainConfig { epochs: 30, ..small_config() };
        let out = fit(&cfg, &ds, Some(&ds)).unwrap();
        let last = out.history.last().unwrap();
        assert!(last.val_acc.unwrap() > 0.9, "{:?}", last.val_acc);
        assert!(out.history.iter().all(|r| r.bound_gap.is_finite() && r.train_loss.is_finite()));
    }

    #[test]
    fn each_step_leaves_the_other_network_untouched() {
        let ds = toy();
        let mut tr = Trainer::new(small_config(), &ds).unwrap();
        let batch: Vec<usize> = (0..32).collect();
        let lives = tr.prepare_batch(1, &batch).unwrap();
        let (main0, aux0) = (tr.main_net().clone(), tr.aux_net().clone());
        tr.aux_step(1, 0, &batch, &lives).unwrap();
        assert_eq!(tr.main_net(), &main0);
        assert_ne!(tr.aux_net(), &aux0);
        let aux1 = tr.aux_net().clone();
        tr.main_step(1, 0, &batch, &lives).unwrap();
        assert_eq!(tr.aux_net(), &aux1);
        assert_ne!(tr.main_net(), &main0);
    }

    #[test]
    fn ml_only_has_no_prior_gradient() {
        let ds = toy();
        let cfg = TrainConfig { ml_only: true, ..small_config() };
        let a = fit(&cfg, &ds, None).unwrap();
        let b = fit(&TrainConfig { epsilon: 0.5, m: 0.9, d: 0.1, ..cfg }, &ds, None).unwrap();
        assert_eq!(a.model.main.params(), b.model.main.params());
        assert_eq!(a.model.aux.params(), b.model.aux.params());
    }

    #[test]
    fn traced_priors_follow_their_formulas() {
        let ds = toy();
        let cfg = small_config();
        let mut tr = Trainer::new(cfg.clone(), &ds).unwrap();
        tr.record_trace();
        let mut lambda_snap: Option<Vec<f64>> = None;
        for _ in 0..cfg.epochs {
            tr.train_epoch().unwrap();
            let trace = tr.take_trace();
            for rec in &trace {
                let s = ds.candidates(rec.instance);
                for j in 0..ds.c() {
                    let expected = if !s.contains(&j) {
                        1.0 + cfg.epsilon
                    } else if rec.epoch > cfg.r {
                        let snap = lambda_snap.as_ref().unwrap()[rec.instance * ds.c() + j];
                        (cfg.m * snap + (1.0 - cfg.m) * rec.live_lambda[j]).max(1e-8)
                    } else {
                        rec.live_lambda[j]
                    };
                    assert_eq!(rec.lambda_hat[j].to_bits(), expected.to_bits());
                    if rec.epoch <= cfg.q {
                        assert_eq!(rec.alpha_hat[j].to_bits(), rec.live_alpha[j].to_bits());
                        assert_eq!(rec.beta_hat[j].to_bits(), rec.live_beta[j].to_bits());
                    }
                }
            }
            if tr.epochs_done() == cfg.r {
                lambda_snap = tr.cache().lambda_snapshot().map(<[f64]>::to_vec);
            }
        }
    }

    #[test]
    fn predict_label_is_score_argmax() {
        let cfg = TransformConfig::default();
        let (l, theta) = predict_scores(&[0.5, 2.0, 2.0, -1.0], &cfg);
        assert_eq!(l, 1);
        assert!((theta.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let wide = TransformConfig { a: 3.0, b: 2.0, gamma: 5.0 };
        assert_eq!(predict_scores(&[0.5, 2.0, 2.0, -1.0], &wide).0, 1);
    }

    #[test]
    fn history_serialises_as_json_lines() {
        let h = vec![EpochRecord { epoch: 1, train_loss: 1.5, val_acc: None, bound_gap: 0.25 }];
        let text = history_to_json_lines(&h);
        assert_eq!(text.lines().count(), 1);
        let back: EpochRecord = serde_json::from_str(text.trim()).unwrap();
        assert_eq!(back, h[0]);
    }

    #[test]
    fn dimension_mismatch_surfaces() {
        let ds = toy();
        let net = Trainer::new(small_config(), &ds).unwrap().main_net().clone();
        assert!(predict(&net, &[1.0, 2.0, 3.0], &TransformConfig::default()).is_err());
    }
}
