//! Forward side of the generation model: the candidate-set density, and
//! synthetic corruption of clean datasets into partial-label datasets.
//!
//! Corruption keeps the true label and adds every other label `j`
//! independently with a per-instance probability: `sigmoid(g_j(x))` from a
//! clean scorer in the instance-dependent mode, or a constant `p` in the
//! uniform mode. A draw that would produce the full label set loses one
//! uniformly chosen incorrect candidate. Each instance uses its own random
//! stream derived from `(seed, instance index)`.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::data::{DataError, PllDataset};
use crate::distributions::{BernoulliVec, Simplex};
use crate::network::{Activation, DenseNet, NetError, SgdState};
use crate::rng;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("corruption needs true labels")]
    MissingTrueLabels,
    #[error("non-finite flip score at instance {instance}, label {label}")]
    NonFiniteScore { instance: usize, label: usize },
    #[error("flip probability must lie in (0, 1), got {0}")]
    InvalidProbability(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorruptionMode {
    InstanceDependent,
    Uniform { p: f64 },
}

impl CorruptionMode {
    pub fn name(&self) -> &'static str {
        match self {
            CorruptionMode::InstanceDependent => "instance_dependent",
            CorruptionMode::Uniform { .. } => "uniform",
        }
    }
}

/// Summary of a corruption run, written next to the dataset as a `.meta` sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionReport {
    pub avg_set_size: f64,
    /// For each label `j`: fraction of instances with `y ≠ j` that carry `j` as a candidate.
    pub per_class_ambiguity: Vec<f64>,
    pub seed: u64,
    pub mode: CorruptionMode,
}

impl CorruptionReport {
    fn from_sets(candidates: &[Vec<usize>], labels: &[usize], c: usize, seed: u64, mode: CorruptionMode) -> Self {
        let n = candidates.len();
        let mut hits = vec![0usize; c];
        let mut eligible = vec![0usize; c];
        for (set, &y) in candidates.iter().zip(labels) {
            for j in 0..c {
                if j != y {
                    eligible[j] += 1;
                    if set.binary_search(&j).is_ok() {
                        hits[j] += 1;
                    }
                }
            }
        }
        let total: usize = candidates.iter().map(Vec::len).sum();
        Self {
            avg_set_size: if n == 0 { 0.0 } else { total as f64 / n as f64 },
            per_class_ambiguity: hits
                .iter()
                .zip(&eligible)
                .map(|(&h, &e)| if e == 0 { 0.0 } else { h as f64 / e as f64 })
                .collect(),
            seed,
            mode,
        }
    }

    /// Key/value entries for the sidecar file.
    pub fn sidecar_entries(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("mode".into(), self.mode.name().into());
        m.insert("seed".into(), self.seed.to_string());
        if let CorruptionMode::Uniform { p } = self.mode {
            m.insert("p".into(), format!("{p:?}"));
        }
        m.insert("avg_set_size".into(), format!("{:?}", self.avg_set_size));
        let amb: Vec<String> = self.per_class_ambiguity.iter().map(|v| format!("{v:?}")).collect();
        m.insert("per_class_ambiguity".into(), amb.join(","));
        m
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Density of candidate set `S` given `θ` and `z`:
/// `Σ_{j∈S} θ_j Π_{k∈S∖{j}} z_k Π_{k∉S∖{j}} (1 − z_k)`.
///
/// Any subset of the label space is accepted, including `∅` (density 0).
pub fn candidate_set_density(candidates: &[usize], theta: &Simplex, z: &BernoulliVec) -> Result<f64, GenError> {
    let (theta, z) = (theta.as_slice(), z.as_slice());
    let c = theta.len();
    if z.len() != c {
        return Err(GenError::Dimension(format!("θ has {c} entries, z has {}", z.len())));
    }
    let mut in_set = vec![false; c];
    for &j in candidates {
        if j >= c || in_set[j] {
            return Err(GenError::Dimension(format!("invalid candidate {j}")));
        }
        in_set[j] = true;
    }
    Ok(candidates
        .iter()
        .map(|&j| {
            (0..c).fold(theta[j], |acc, k| {
                let incorrect = in_set[k] && k != j;
                acc * if incorrect { z[k] } else { 1.0 - z[k] }
            })
        })
        .sum())
}

/// Candidate set for true label `y`: label `j ≠ y` joins when `uniforms[j] < probs[j]`.
/// If every label joined, the incorrect candidate at position
/// `⌊drop_u · (c−1)⌋` among the incorrect ones is removed.
pub fn candidate_set_from_uniforms(y: usize, probs: &[f64], uniforms: &[f64], drop_u: f64) -> Vec<usize> {
    let c = probs.len();
    let mut set: Vec<usize> = (0..c).filter(|&j| j == y || uniforms[j] < probs[j]).collect();
    if set.len() == c {
        let incorrect: Vec<usize> = (0..c).filter(|&j| j != y).collect();
        let idx = ((drop_u * incorrect.len() as f64) as usize).min(incorrect.len() - 1);
        set.retain(|&j| j != incorrect[idx]);
    }
    set
}

fn sample_set<R: Rng + ?Sized>(y: usize, probs: &[f64], rng: &mut R) -> Vec<usize> {
    let uniforms: Vec<f64> = (0..probs.len()).map(|_| rng.random()).collect();
    let drop_u: f64 = rng.random();
    candidate_set_from_uniforms(y, probs, &uniforms, drop_u)
}

fn corrupt_with(
    clean: &PllDataset,
    seed: u64,
    mode: CorruptionMode,
    probs_of: impl Fn(usize) -> Vec<f64>,
) -> Result<(PllDataset, CorruptionReport), GenError> {
    let labels = clean.true_labels().ok_or(GenError::MissingTrueLabels)?.to_vec();
    let candidates: Vec<Vec<usize>> = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let mut r = rng::stream(seed, rng::CORRUPT, i as u64);
            sample_set(y, &probs_of(i), &mut r)
        })
        .collect();
    let report = CorruptionReport::from_sets(&candidates, &labels, clean.c(), seed, mode);
    Ok((clean.with_candidates(candidates)?, report))
}

/// Instance-dependent corruption driven by a clean model's raw scores
/// (`n × c`, row-major): `P(j ∈ S_i) = sigmoid(scores[i][j])` for `j ≠ y_i`.
pub fn corrupt_instance_dependent(
    clean: &PllDataset,
    flip_scores: &[f64],
    seed: u64,
) -> Result<(PllDataset, CorruptionReport), GenError> {
    let (n, c) = (clean.n(), clean.c());
    if clean.true_labels().is_none() {
        return Err(GenError::MissingTrueLabels);
    }
    if flip_scores.len() != n * c {
        return Err(GenError::Dimension(format!("expected {}×{} flip scores, got {}", n, c, flip_scores.len())));
    }
    if let Some(k) = flip_scores.iter().position(|s| !s.is_finite()) {
        return Err(GenError::NonFiniteScore { instance: k / c, label: k % c });
    }
    corrupt_with(clean, seed, CorruptionMode::InstanceDependent, |i| {
        flip_scores[i * c..(i + 1) * c].iter().map(|&s| sigmoid(s)).collect()
    })
}

/// Uniform corruption: each incorrect label joins with probability `p`.
pub fn corrupt_uniform(clean: &PllDataset, p: f64, seed: u64) -> Result<(PllDataset, CorruptionReport), GenError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(GenError::InvalidProbability(p));
    }
    let c = clean.c();
    corrupt_with(clean, seed, CorruptionMode::Uniform { p }, |_| vec![p; c])
}

/// Settings of the clean classifier whose scores drive instance-dependent corruption.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanScorerConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub clamp: f64,
    pub seed: u64,
}

impl Default for CleanScorerConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64],
            epochs: 20,
            lr: 0.05,
            momentum: 0.9,
            weight_decay: 0.0,
            batch_size: 64,
            clamp: 20.0,
            seed: 0,
        }
    }
}

/// Fits a dense network with softmax cross-entropy on the true labels and
/// returns it with its raw scores on every instance (`n × c`, row-major).
pub fn train_clean_scorer(clean: &PllDataset, cfg: &CleanScorerConfig) -> Result<(DenseNet, Vec<f64>), GenError> {
    let labels = clean.true_labels().ok_or(GenError::MissingTrueLabels)?;
    let (n, c) = (clean.n(), clean.c());
    let dims = DenseNet::layout(clean.q(), &cfg.hidden, c);
    let mut init_rng = rng::stream(cfg.seed, "clean-init", 0);
    let mut net = DenseNet::new(&dims, Activation::Relu, cfg.clamp, &mut init_rng);
    let mut sgd = SgdState::new(cfg.lr, cfg.momentum, cfg.weight_decay, net.num_params())?;
    let batch = cfg.batch_size.max(1);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        let mut shuffle = rng::stream(cfg.seed, "clean-shuffle", epoch as u64);
        order.shuffle(&mut shuffle);
        for chunk in order.chunks(batch) {
            let mut grads = vec![0.0; net.num_params()];
            for &i in chunk {
                let cache = net.forward(clean.row(i))?;
                let probs = softmax(&cache.output);
                let mut g = probs;
                g[labels[i]] -= 1.0;
                for v in &mut g {
                    *v /= chunk.len() as f64;
                }
                net.backward_into(&cache, &g, &mut grads)?;
            }
            sgd.step(net.params_mut(), &grads)?;
        }
    }
    let mut scores = Vec::with_capacity(n * c);
    for i in 0..n {
        scores.extend(net.scores(clean.row(i))?);
    }
    Ok((net, scores))
}

pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Isotropic Gaussian blobs with `n` points split evenly over `centers`,
/// as a clean dataset (singleton candidate sets).
pub fn gaussian_blobs(n: usize, centers: &[Vec<f64>], std: f64, seed: u64) -> Result<PllDataset, GenError> {
    let c = centers.len();
    let q = centers.first().map_or(0, Vec::len);
    if c < 2 || centers.iter().any(|m| m.len() != q) {
        return Err(GenError::Dimension("need at least two centers of equal dimension".into()));
    }
    let noise = Normal::new(0.0, std).map_err(|e| GenError::Dimension(e.to_string()))?;
    let mut r = rng::stream(seed, rng::DATA, 0);
    let mut features = Vec::with_capacity(n * q);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % c;
        features.extend(centers[y].iter().map(|m| m + noise.sample(&mut r)));
        labels.push(y);
    }
    Ok(PllDataset::from_labels(q, c, features, labels)?)
}

/// `c` centers evenly spaced on a circle of the given radius in 2-D.
pub fn circle_centers(c: usize, radius: f64) -> Vec<Vec<f64>> {
    (0..c)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / c as f64;
            vec![radius * angle.cos(), radius * angle.sin()]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clean_dataset(n: usize, c: usize) -> PllDataset {
        let labels: Vec<usize> = (0..n).map(|i| i % c).collect();
        let features = (0..n).map(|i| i as f64).collect();
        PllDataset::from_labels(1, c, features, labels).unwrap()
    }

    #[test]
    fn density_examples() {
        let theta = Simplex::new(vec![0.7, 0.3]).unwrap();
        let z = BernoulliVec::new(vec![0.2, 0.4]).unwrap();
        let v = candidate_set_density(&[0], &theta, &z).unwrap();
        assert!((v - 0.336).abs() < 1e-15);
        let v = candidate_set_density(&[0, 1], &theta, &z).unwrap();
        assert!((v - 0.26).abs() < 1e-15);
        let total: f64 = [vec![], vec![0], vec![1], vec![0, 1]]
            .iter()
            .map(|s| candidate_set_density(s, &theta, &z).unwrap())
            .sum();
        assert!((total - 0.74).abs() < 1e-15);
    }

    #[test]
    fn flip_probabilities_from_scores() {
        assert!((sigmoid(-1.0) - 0.268_941_421_369_995_1).abs() < 1e-15);
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }

    #[test]
    fn hand_traced_draw() {
        let probs: Vec<f64> = [2.0, -1.0, 0.0].iter().map(|&s| sigmoid(s)).collect();
        let set = candidate_set_from_uniforms(0, &probs, &[0.99, 0.2, 0.6], 0.0);
        assert_eq!(set, vec![0, 1]);
    }

    #[test]
    fn full_set_drops_one_incorrect_label() {
        let probs = vec![1.0; 5];
        for k in 0..4 {
            let drop_u = k as f64 / 4.0 + 0.01;
            let set = candidate_set_from_uniforms(2, &probs, &[0.0; 5], drop_u);
            assert_eq!(set.len(), 4);
            assert!(set.contains(&2));
        }
        let clean = clean_dataset(50, 4);
        let scores = vec![50.0; 50 * 4];
        let (ds, _) = corrupt_instance_dependent(&clean, &scores, 3).unwrap();
        assert!(ds.candidate_sets().iter().all(|s| s.len() == 3));
    }

    #[test]
    fn uniform_limits_and_invariants() {
        let clean = clean_dataset(200, 5);
        let (ds, report) = corrupt_uniform(&clean, 1e-12, 1).unwrap();
        assert!(ds.candidate_sets().iter().all(|s| s.len() == 1));
        assert_eq!(report.avg_set_size, 1.0);
        let (ds, _) = corrupt_uniform(&clean, 0.9, 1).unwrap();
        let y = ds.true_labels().unwrap();
        for i in 0..ds.n() {
            assert!(ds.candidates(i).contains(&y[i]));
            assert!(ds.candidates(i).len() < 5);
        }
        assert!(matches!(corrupt_uniform(&clean, 1.5, 1), Err(GenError::InvalidProbability(_))));
        assert!(matches!(corrupt_uniform(&clean, 0.0, 1), Err(GenError::InvalidProbability(_))));
    }

    #[test]
    fn uniform_mean_set_size_matches_binomial() {
        let clean = clean_dataset(10_000, 10);
        let (ds, report) = corrupt_uniform(&clean, 0.3, 17).unwrap();
        let expected = 1.0 + 9.0 * 0.3;
        // per-instance variance of |S| is 9·p·(1−p); the full-set rule is negligible at p = 0.3
        let sigma = (9.0 * 0.3 * 0.7 / 10_000.0f64).sqrt();
        assert!((ds.mean_candidate_size() - expected).abs() < 3.0 * sigma, "{}", ds.mean_candidate_size());
        assert_eq!(report.avg_set_size, ds.mean_candidate_size());
    }

    #[test]
    fn corruption_is_reproducible_and_order_independent() {
        let clean = clean_dataset(100, 4);
        let (a, _) = corrupt_uniform(&clean, 0.4, 5).unwrap();
        let (b, _) = corrupt_uniform(&clean, 0.4, 5).unwrap();
        assert_eq!(a, b);
        // instance 10 of a subset equals instance 10 of the full run
        let (sub, _) = corrupt_uniform(&clean.subset(&(0..11).collect::<Vec<_>>()), 0.4, 5).unwrap();
        assert_eq!(sub.candidates(10), a.candidates(10));
        let (c, _) = corrupt_uniform(&clean, 0.4, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn corruption_errors() {
        let clean = clean_dataset(4, 3);
        assert!(matches!(
            corrupt_instance_dependent(&clean.without_true_labels(), &[0.0; 12], 0),
            Err(GenError::MissingTrueLabels)
        ));
        let mut scores = vec![0.0; 12];
        scores[7] = f64::NAN;
        assert!(matches!(
            corrupt_instance_dependent(&clean, &scores, 0),
            Err(GenError::NonFiniteScore { instance: 2, label: 1 })
        ));
        assert!(matches!(corrupt_instance_dependent(&clean, &[0.0; 5], 0), Err(GenError::Dimension(_))));
    }

    #[test]
    fn sidecar_entries_describe_run() {
        let clean = clean_dataset(20, 3);
        let (_, report) = corrupt_uniform(&clean, 0.25, 9).unwrap();
        let m = report.sidecar_entries();
        assert_eq!(m["mode"], "uniform");
        assert_eq!(m["seed"], "9");
        assert_eq!(m["p"], "0.25");
        assert_eq!(report.per_class_ambiguity.len(), 3);
    }

    #[test]
    fn clean_scorer_separates_two_blobs() {
        let ds = gaussian_blobs(400, &[vec![-3.0, 0.0], vec![3.0, 0.0]], 0.5, 1).unwrap();
        let (_, scores) = train_clean_scorer(&ds, &CleanScorerConfig::default()).unwrap();
        let y = ds.true_labels().unwrap();
        let correct = (0..ds.n()).filter(|&i| (scores[2 * i + 1] > scores[2 * i]) == (y[i] == 1)).count();
        assert!(correct as f64 / ds.n() as f64 >= 0.99);
    }

    #[test]
    fn clean_scorer_on_constant_features_is_near_uniform() {
        let labels: Vec<usize> = (0..200).map(|i| i % 4).collect();
        let ds = PllDataset::from_labels(2, 4, vec![1.0; 400], labels).unwrap();
        let (_, scores) = train_clean_scorer(&ds, &CleanScorerConfig::default()).unwrap();
        for row in scores.chunks(4) {
            let p = softmax(row);
            assert!(p.iter().all(|&v| (v - 0.25).abs() < 0.05), "{p:?}");
        }
    }

    #[test]
    fn clean_scorer_is_deterministic() {
        let ds = gaussian_blobs(120, &circle_centers(3, 2.0), 1.0, 4).unwrap();
        let cfg = CleanScorerConfig { epochs: 3, ..Default::default() };
        let (_, a) = train_clean_scorer(&ds, &cfg).unwrap();
        let (_, b) = train_clean_scorer(&ds, &cfg).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
