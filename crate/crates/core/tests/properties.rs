use idgp_core::evaluation::split;
use idgp_core::generation::{candidate_set_density, corrupt_instance_dependent, corrupt_uniform};
use idgp_core::network::lambda_transform;
use idgp_core::objective::{map_loss, map_loss_live, ml_loss, reg_loss};
use idgp_core::trainer::{predict_scores, TrainedModel};
use idgp_core::{
    rng, Activation, BernoulliVec, DenseNet, PerInstanceLossInput, PllDataset, PosteriorParams, PriorCache,
    PriorValues, Simplex, SplitSpec, TrainConfig, TransformConfig,
};
use proptest::collection::vec;
use proptest::prelude::*;

/// A valid dataset: `n` rows, `q` features, `c` labels, candidate sets of
/// size `1..c` containing the true label.
fn dataset() -> impl Strategy<Value = PllDataset> {
    (1usize..25, 1usize..5, 2usize..7)
        .prop_flat_map(|(n, q, c)| {
            (
                Just((q, c)),
                vec(-1e3f64..1e3, n * q),
                vec((0..c, vec(any::<bool>(), c)), n),
            )
        })
        .prop_map(|((q, c), features, rows)| {
            let mut labels = Vec::new();
            let mut sets = Vec::new();
            for (y, mask) in rows {
                let mut set: Vec<usize> = (0..c).filter(|&j| j == y || mask[j]).collect();
                if set.len() == c {
                    set.retain(|&j| j != (y + 1) % c);
                }
                labels.push(y);
                sets.push(set);
            }
            PllDataset::new(q, c, features, sets, Some(labels)).unwrap()
        })
}

fn transform() -> impl Strategy<Value = TransformConfig> {
    (1e-3f64..1e3, 0.0f64..5.0, 0.25f64..10.0).prop_map(|(a, b, gamma)| TransformConfig { a, b, gamma })
}

fn assert_pll_invariants(ds: &PllDataset) {
    let labels = ds.true_labels().unwrap();
    for i in 0..ds.n() {
        let s = ds.candidates(i);
        assert!(!s.is_empty() && s.len() < ds.c());
        assert!(s.binary_search(&labels[i]).is_ok());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn text_and_json_roundtrip_is_identity(ds in dataset()) {
        prop_assert_eq!(&PllDataset::from_text(&ds.to_text()).unwrap(), &ds);
        prop_assert_eq!(&PllDataset::from_json_lines(&ds.to_json_lines()).unwrap(), &ds);
    }

    #[test]
    fn loaded_sets_respect_size_limits(ds in dataset()) {
        let back = PllDataset::from_text(&ds.to_text()).unwrap();
        assert_pll_invariants(&back);
    }

    #[test]
    fn corruption_is_valid_and_reproducible(ds in dataset(), p in 0.01f64..0.99, seed in any::<u64>()) {
        let (a, ra) = corrupt_uniform(&ds, p, seed).unwrap();
        let (b, rb) = corrupt_uniform(&ds, p, seed).unwrap();
        assert_pll_invariants(&a);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(ra.sidecar_entries(), rb.sidecar_entries());

        let scores: Vec<f64> = (0..ds.n() * ds.c()).map(|k| ((k * 37 % 11) as f64 - 5.0) * p).collect();
        let (x, _) = corrupt_instance_dependent(&ds, &scores, seed).unwrap();
        let (y, _) = corrupt_instance_dependent(&ds, &scores, seed).unwrap();
        assert_pll_invariants(&x);
        prop_assert_eq!(x, y);
    }

    #[test]
    fn subset_densities_sum_to_incorrect_mass(
        raw in vec(0.01f64..1.0, 2..8),
        z in vec(0.001f64..0.999, 8),
    ) {
        let c = raw.len();
        let total: f64 = raw.iter().sum();
        let theta: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let z = z[..c].to_vec();
        let ts = Simplex::new(theta.clone()).unwrap();
        let zs = BernoulliVec::new(z.clone()).unwrap();
        let sum: f64 = (0u32..1 << c)
            .map(|m| candidate_set_density(&(0..c).filter(|j| m & (1 << j) != 0).collect::<Vec<_>>(), &ts, &zs).unwrap())
            .sum();
        let expected: f64 = theta.iter().zip(&z).map(|(t, z)| t * (1.0 - z)).sum();
        prop_assert!((sum - expected).abs() <= 1e-12);
    }

    #[test]
    fn map_is_ml_plus_prior_exactly(
        c in 2usize..9,
        seed in any::<u64>(),
        size in 1usize..8,
    ) {
        use rand::Rng;
        let mut r = rng::stream(seed, "prop-map", 0);
        let size = size.min(c - 1);
        let set: Vec<usize> = (0..size).collect();
        let lambda: Vec<f64> = (0..c).map(|_| r.random_range(0.1..5.0)).collect();
        let alpha: Vec<f64> = (0..c).map(|_| r.random_range(0.1..5.0)).collect();
        let beta: Vec<f64> = (0..c).map(|_| r.random_range(0.1..5.0)).collect();
        let post = PosteriorParams::from_live(&lambda, &alpha, &beta, &set);
        let prior = PriorValues { lambda: &lambda, alpha: &alpha, beta: &beta };
        let input = PerInstanceLossInput { theta_hat: &post.theta_hat, z_hat: &post.z_hat, prior, candidates: &set };
        let map = map_loss(&input, false).unwrap();
        let ml = ml_loss(&post.theta_hat, &post.z_hat, &set).unwrap();
        let reg = reg_loss(&post.theta_hat, &post.z_hat, prior).unwrap();
        prop_assert_eq!(map.value.to_bits(), (ml.value + reg.value).to_bits());
        prop_assert_eq!(map.ml.to_bits(), ml.value.to_bits());
        prop_assert_eq!(map.reg.to_bits(), reg.value.to_bits());
        prop_assert_eq!(map_loss(&input, true).unwrap().value.to_bits(), ml.value.to_bits());
    }

    #[test]
    fn losses_are_finite_within_clamps(
        tr in transform(),
        scores in vec(-20.0f64..=20.0, 3 * 6),
        prior in vec(1e-8f64..50.0, 3 * 6),
        size in 1usize..6,
    ) {
        let c = 6;
        let set: Vec<usize> = (0..size).collect();
        let lambda = lambda_transform(&scores[..c], &tr).into_inner();
        let alpha: Vec<f64> = scores[c..2 * c].iter().map(|&s| tr.apply(s)).collect();
        let beta: Vec<f64> = scores[2 * c..].iter().map(|&s| tr.apply(s)).collect();
        let post = PosteriorParams::from_live(&lambda, &alpha, &beta, &set);
        let pv = PriorValues { lambda: &prior[..c], alpha: &prior[c..2 * c], beta: &prior[2 * c..] };
        let loss = map_loss_live(&post, pv, &set, false).unwrap();
        prop_assert!(loss.value.is_finite());
        prop_assert!(loss.d_lambda.iter().chain(&loss.d_alpha).chain(&loss.d_beta).all(|g| g.is_finite()));
    }

    #[test]
    fn transform_stays_in_its_range(tr in transform(), s in -20.0f64..=20.0) {
        let (lo, hi) = tr.range(20.0);
        let v = tr.apply(s);
        prop_assert!(v >= lo && v <= hi);
        prop_assert_eq!(lo, (tr.a * (-20.0 / tr.gamma).exp() + tr.b).max(1e-8));
        prop_assert_eq!(hi, tr.a * (20.0 / tr.gamma).exp() + tr.b);
    }

    #[test]
    fn predicted_label_ignores_the_transform(
        scores in vec(-30.0f64..30.0, 2..12),
        t1 in transform(),
        t2 in transform(),
    ) {
        prop_assert_eq!(predict_scores(&scores, &t1).0, predict_scores(&scores, &t2).0);
    }

    #[test]
    fn snapshots_freeze_after_their_epoch(
        r in 1usize..5,
        q in 1usize..5,
        lives in vec(vec(0.01f64..10.0, 3), 8),
    ) {
        let sets = vec![vec![0usize, 2]];
        let mut cache = PriorCache::new(&sets, 3, 0.1, 0.5, 0.5, r, q);
        let mut frozen_lambda: Option<Vec<f64>> = None;
        let mut frozen_alpha: Option<Vec<f64>> = None;
        for (k, live) in lives.iter().enumerate() {
            let t = k + 1;
            cache.refine_lambda_hat(0, live, t);
            cache.refine_alpha_beta_hat(0, live, live, t);
            cache.end_epoch(t);
            if t == r {
                prop_assert_eq!(cache.lambda_snapshot().unwrap(), &live[..]);
                frozen_lambda = cache.lambda_snapshot().map(<[f64]>::to_vec);
            }
            if t == q {
                frozen_alpha = cache.alpha_snapshot().map(<[f64]>::to_vec);
            }
            if t < r {
                prop_assert!(cache.lambda_snapshot().is_none());
            }
            if let Some(f) = &frozen_lambda {
                prop_assert_eq!(cache.lambda_snapshot().unwrap(), &f[..]);
            }
            if let Some(f) = &frozen_alpha {
                prop_assert_eq!(cache.alpha_snapshot().unwrap(), &f[..]);
            }
        }
    }

    #[test]
    fn splits_are_partitions(n in 10usize..200, seed in any::<u64>()) {
        let features: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let ds = PllDataset::from_labels(1, 3, features, labels).unwrap();
        let (a, b, c) = split(&ds, &SplitSpec::default(), seed).unwrap();
        let mut seen: Vec<f64> = [&a, &b, &c].iter().flat_map(|d| d.features().to_vec()).collect();
        seen.sort_by(f64::total_cmp);
        prop_assert_eq!(seen, (0..n).map(|i| i as f64).collect::<Vec<_>>());
        let again = split(&ds, &SplitSpec::default(), seed).unwrap();
        prop_assert_eq!((a, b, c), again);
    }

    #[test]
    fn config_text_roundtrips(
        epochs in 0usize..500,
        lr in 1e-5f64..1.0,
        tr in transform(),
        hidden in vec(1usize..64, 0..3),
        ml_only in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let cfg = TrainConfig { epochs, lr, transform: tr, hidden, ml_only, seed, r: 1, q: 1, ..TrainConfig::default() };
        prop_assert_eq!(TrainConfig::from_kv_str(&cfg.to_kv_string()).unwrap(), cfg);
    }

    #[test]
    fn model_bytes_roundtrip(q in 1usize..6, width in 1usize..16, c in 2usize..6, seed in any::<u64>(), tr in transform()) {
        let mut r = rng::stream(seed, rng::INIT, 0);
        let model = TrainedModel {
            main: DenseNet::new(&DenseNet::layout(q, &[width], c), Activation::Relu, 20.0, &mut r),
            aux: DenseNet::new(&DenseNet::layout(q, &[width], 2 * c), Activation::Relu, 20.0, &mut r),
            transform: tr,
            ml_only: seed % 2 == 0,
        };
        prop_assert_eq!(TrainedModel::from_bytes(&model.to_bytes()).unwrap(), model);
    }
}
