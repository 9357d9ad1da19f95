//! Reference-network training, sweep and depth-study behaviour.

use proptest::prelude::*;
use rand::seq::SliceRandom;
use softood::head::argmax;
use softood::refnet::{
    depth_study, sweep_inputs, train, Activation, DepthStudyConfig, MlpSpec, Model, SyntheticTask,
    TrainConfig,
};
use softood::rng;

fn blobs(seed: u64) -> SyntheticTask {
    SyntheticTask::GaussianBlobs {
        k: 3,
        n_per_class: 200,
        separation: 6.0,
        sigma: 1.0,
        nuisance_dims: 0,
        nuisance_sigma: 0.0,
        seed,
    }
}

fn trained_on_blobs(seed: u64) -> Model {
    let (x, y) = blobs(seed).generate().unwrap();
    let spec = MlpSpec::new(vec![2, 16, 16], Activation::Tanh, 3).unwrap();
    train(
        &x,
        &y.unwrap(),
        &spec,
        &TrainConfig {
            seed,
            ..TrainConfig::default()
        },
    )
    .unwrap()
}

#[test]
fn blob_training_converges() {
    for seed in 0..3 {
        let (x, y) = blobs(seed).generate().unwrap();
        let y = y.unwrap();
        let model = trained_on_blobs(seed);
        assert!(model.accuracy(&x, &y).unwrap() >= 0.99);
        let h = &model.loss_history;
        assert!(h.last().unwrap() * 10.0 < h[0], "{h:?}");
    }
}

/// With a frozen head, each additional epoch changes only body parameters.
#[test]
fn frozen_head_only_body_moves() {
    use softood::structure::{gen_optimal_head, OptimalStructureSpec};
    let (x, y) = blobs(1).generate().unwrap();
    let y = y.unwrap();
    let spec = MlpSpec::new(vec![2, 12, 6], Activation::Tanh, 3).unwrap();
    let head = gen_optimal_head(&OptimalStructureSpec::new(3, 6), 2).unwrap();
    let mut previous: Option<Vec<f64>> = None;
    for epochs in 1..=4 {
        let cfg = TrainConfig {
            epochs,
            frozen_head: Some(head.clone()),
            ..TrainConfig::default()
        };
        let model = train(&x, &y, &spec, &cfg).unwrap();
        let off = model.net.head_offset();
        assert_eq!(model.head(), head);
        if let Some(prev) = &previous {
            assert_ne!(&prev[..off], &model.net.params()[..off]);
            assert_eq!(&prev[off..], &model.net.params()[off..]);
        }
        previous = Some(model.net.params().to_vec());
    }
}

#[test]
fn sweep_keeps_confident_samples_of_their_class() {
    let model = trained_on_blobs(0);
    let sampler = SyntheticTask::UniformHypercubeOod {
        n: 1,
        dim: 2,
        lo: -20.0,
        hi: 20.0,
        seed: 3,
    };
    let result = softood::refnet::confidence_sweep(&model, &sampler, 20_000, 25).unwrap();
    assert!(result.mean_confidence_kept > result.mean_confidence_all);
    for (class, kept) in result.per_class.iter().enumerate() {
        for s in kept {
            assert_eq!(argmax(&model.probabilities(&s.input).unwrap()), class);
        }
    }
}

/// Hamming distance from `x` to the closest row of `rows`.
fn nearest(x: &[f64], rows: &[Vec<f64>]) -> f64 {
    rows.iter()
        .map(|r| r.iter().zip(x).filter(|(a, b)| a != b).count() as f64)
        .fold(f64::INFINITY, f64::min)
}

/// On binary images, the inputs a small network is most confident about
/// resemble its training images more than random images do.
#[test]
fn binary_grid_sweep_finds_training_like_inputs() {
    for seed in 0..5 {
        let task = SyntheticTask::BinaryGrid {
            k: 3,
            side: 9,
            n_per_class: 150,
            flip_prob: 0.1,
            uniform: false,
            prototype_seed: 100 + seed,
            seed,
        };
        let (x, y) = task.generate().unwrap();
        let y = y.unwrap();
        let spec = MlpSpec::new(vec![81, 32, 16], Activation::Tanh, 3).unwrap();
        let model = train(
            &x,
            &y,
            &spec,
            &TrainConfig {
                seed,
                epochs: 30,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        let uniform = SyntheticTask::BinaryGrid {
            k: 3,
            side: 9,
            n_per_class: 1,
            flip_prob: 0.0,
            uniform: true,
            prototype_seed: 100 + seed,
            seed: 1000 + seed,
        };
        let result = softood::refnet::confidence_sweep(&model, &uniform, 20_000, 20).unwrap();
        let (random, _) = uniform
            .with_seed(2000 + seed)
            .with_count(100)
            .generate()
            .unwrap();
        for (class, kept) in result.per_class.iter().enumerate() {
            let train_rows: Vec<Vec<f64>> = (0..x.n())
                .filter(|&i| y.as_slice()[i] == class)
                .map(|i| x.row(i).to_vec())
                .collect();
            if kept.is_empty() {
                continue;
            }
            let kept_mean = kept
                .iter()
                .map(|s| nearest(&s.input, &train_rows))
                .sum::<f64>()
                / kept.len() as f64;
            let random_mean =
                random.rows().map(|r| nearest(r, &train_rows)).sum::<f64>() / random.n() as f64;
            assert!(
                kept_mean < random_mean,
                "seed {seed} class {class}: {kept_mean} vs {random_mean}"
            );
        }
    }
}

#[test]
fn depth_study_is_deterministic_and_accuracy_plateaus() {
    let cfg = DepthStudyConfig {
        depths: vec![1, 4],
        seeds: vec![0],
        ..DepthStudyConfig::default()
    };
    let a = depth_study(&cfg).unwrap();
    let b = depth_study(&cfg).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    assert!((a.rows[1].accuracy_mean - a.rows[0].accuracy_mean).abs() < 0.02);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn features_have_the_last_hidden_width(
        widths in prop::collection::vec(1usize..12, 1..4),
        input in prop::collection::vec(-5.0f64..5.0, 3),
        seed in any::<u64>(),
    ) {
        let mut layers = vec![3];
        layers.extend(&widths);
        let spec = MlpSpec::new(layers, Activation::Relu, 4).unwrap();
        let net = softood::refnet::Mlp::init(spec, seed).unwrap();
        prop_assert_eq!(net.features(&input).unwrap().len(), *widths.last().unwrap());
    }

    /// Keeping the top inputs does not depend on arrival order.
    #[test]
    fn sweep_ignores_arrival_order(shuffle_seed in any::<u64>(), top_m in 1usize..10) {
        let model = trained_on_blobs(0);
        let mut r = rng::seeded(9);
        let inputs: Vec<Vec<f64>> = (0..600)
            .map(|_| {
                use rand::Rng as _;
                vec![r.random_range(-15.0..15.0), r.random_range(-15.0..15.0)]
            })
            .collect();
        let mut shuffled = inputs.clone();
        shuffled.shuffle(&mut rng::seeded(shuffle_seed));
        let a = sweep_inputs(&model, inputs, top_m).unwrap();
        let b = sweep_inputs(&model, shuffled, top_m).unwrap();
        prop_assert_eq!(a.per_class, b.per_class);
        prop_assert!((a.mean_confidence_all - b.mean_confidence_all).abs() < 1e-12);
    }
}
