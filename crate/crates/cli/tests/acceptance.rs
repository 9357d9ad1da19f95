//! Acceptance suite: runs each acceptance criterion, prints one pass/fail
//! line per criterion and exits non-zero if any fails.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use softood::estimators::{
    grad_u_density, grad_u_entropy, grad_u_max, u_density, u_entropy, u_max, u_mental,
};
use softood::geometry::{
    fit_linear_region, mc_region_mass, solve_alpha_exact_k2, GaussianClassModel, Region, Sampler,
};
use softood::gmm::{fit_em_traced, FeatureTransform, InitMethod};
use softood::metrics::{attribute, auroc, auroc_brute_force, average_ranks, spearman};
use softood::refnet::{
    depth_study, run_counterfactual, CounterfactualConfig, DepthStudyConfig, Structure,
};
use softood::rng::{self, Rng};
use softood::structure::{gen_optimal_head, OptimalStructureSpec};
use softood::{decompose, EmConfig, FeatureMatrix, GaussianMixture, LabelVector, SoftmaxHead};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn normal(r: &mut Rng) -> f64 {
    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, r)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_cos(head: &SoftmaxHead, z: &[f64]) -> f64 {
    decompose(head, z).unwrap().max_cos()
}

fn planar_head(k: usize, norm: f64) -> SoftmaxHead {
    let cols: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
            vec![norm * a.cos(), norm * a.sin()]
        })
        .collect();
    SoftmaxHead::from_columns(&cols).unwrap()
}

fn random_head(r: &mut Rng, k: usize, h: usize, bias_sd: f64) -> SoftmaxHead {
    let cols: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..h).map(|_| normal(r)).collect())
        .collect();
    let b: Vec<f64> = (0..k).map(|_| bias_sd * normal(r)).collect();
    SoftmaxHead::from_columns(&cols)
        .unwrap()
        .with_bias(b)
        .unwrap()
}

fn sandwich_counterexample() -> Check {
    let head = SoftmaxHead::from_columns(&[vec![0.0, 1.0], vec![-1.0, 0.0], vec![1.0, 0.0]])
        .map_err(|e| e.to_string())?;
    let (z1, z2) = ([1.0, 0.0], [0.9, -0.44]);
    let (p1, p2) = (-u_max(&head, &z1).unwrap(), -u_max(&head, &z2).unwrap());
    ensure!((p1 - 0.665).abs() < 1e-3, "max prob at z1 is {p1}");
    ensure!((p2 - 0.700).abs() < 1e-3, "max prob at z2 is {p2}");
    let (c1, c2) = (max_cos(&head, &z1), max_cos(&head, &z2));
    ensure!(
        -p1 > -p2 && c1 > c2,
        "no violation: u {} vs {}, cos {c1} vs {c2}",
        -p1,
        -p2
    );
    Ok(format!("max prob {p1:.5} and {p2:.5}; z1 is more uncertain yet better aligned (cos {c1:.3} > {c2:.3})"))
}

/// Rounded reference AUROCs (B, C, D) for ten benchmark datasets.
const TABLE_ROWS: [(&str, f64, f64, f64); 10] = [
    ("mnist", 0.963, 0.963, 0.995),
    ("f.mnist", 0.887, 0.887, 0.985),
    ("svhn", 0.909, 0.909, 0.932),
    ("c10", 0.857, 0.857, 0.893),
    ("c100", 0.806, 0.806, 0.825),
    ("satellite", 0.999, 0.999, 0.999),
    ("cancer", 0.993, 0.998, 1.000),
    ("pets", 1.0, 1.0, 1.0),
    ("flowers", 0.999, 0.999, 1.000),
    ("beans", 0.982, 0.990, 1.000),
];

fn table_arithmetic() -> Check {
    let mnist = attribute(0.963, 0.963, 0.963, 0.995);
    let pct = |v: f64| (v * 1000.0).round() / 10.0;
    ensure!(
        (pct(mnist.cause1), pct(mnist.cause2), pct(mnist.cause3)) == (0.0, 3.2, 0.5),
        "mnist causes {:?}",
        (mnist.cause1, mnist.cause2, mnist.cause3)
    );
    let mut worst = 0.0f64;
    for (name, b, c, d) in TABLE_ROWS {
        let rep = attribute(b, b, c, d);
        let gap = (rep.cause_sum() - (1.0 - b)).abs();
        ensure!(gap <= 1e-12, "{name}: identity off by {gap:e}");
        worst = worst.max(gap);
    }
    Ok(format!(
        "mnist causes (0.0, 3.2, 0.5)%; identity residual <= {worst:.1e} on {} rows",
        TABLE_ROWS.len()
    ))
}

fn optimal_exactness() -> Check {
    let mut worst = 0.0f64;
    for k in [2usize, 3, 5, 10, 50] {
        for h in [k - 1, 2 * k, 512] {
            let head = gen_optimal_head(&OptimalStructureSpec::new(k, h), k as u64 * 31 + h as u64)
                .map_err(|e| e.to_string())?;
            let w = head.weights();
            let norms: Vec<f64> = (0..k).map(|i| head.weight_norm(i)).collect();
            for i in 0..k {
                worst = worst.max((norms[i] - norms[0]).abs());
                for j in i + 1..k {
                    let cos = w.column(i).dot(&w.column(j)) / (norms[i] * norms[j]);
                    worst = worst.max((cos + 1.0 / (k as f64 - 1.0)).abs());
                }
            }
            let sum = w.column_sum();
            worst = worst.max(sum.amax());
            worst = worst.max(head.bias().amax());
        }
    }
    ensure!(worst <= 1e-10, "largest deviation {worst:e}");
    Ok(format!(
        "K in {{2,3,5,10,50}} x H in {{K-1, 2K, 512}}: largest deviation {worst:.1e}"
    ))
}

fn region_oracle() -> Check {
    const N: usize = 1_000_000;
    let epsilon = 0.05;
    let sd2 = 0.04;
    let model = GaussianClassModel::new(
        vec![vec![1.0, 0.0], vec![-1.0, 0.0]],
        vec![DMatrix::identity(2, 2) * sd2; 2],
        vec![0.5, 0.5],
    )
    .map_err(|e| e.to_string())?;
    let head = SoftmaxHead::from_columns(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
    let exact = solve_alpha_exact_k2(&model, &head, epsilon).map_err(|e| e.to_string())?;
    ensure!(exact.separable, "scenario reported as non-separable");
    // Oracle: the ε-quantile of the max probability σ(2|z_0|) over samples,
    // mapped back to the offset where the confidence contour sits.
    let sampler = model.sampler().map_err(|e| e.to_string())?;
    let mut r = rng::seeded(99);
    let mut z = vec![0.0; 2];
    let mut probs: Vec<f64> = (0..N)
        .map(|_| {
            sampler.sample_into(&mut r, &mut z);
            1.0 / (1.0 + (-2.0 * z[0].abs()).exp())
        })
        .collect();
    probs.sort_by(f64::total_cmp);
    let p_star = probs[(epsilon * N as f64).ceil() as usize - 1];
    let alpha_mc = 0.5 * (p_star / (1.0 - p_star)).ln();
    let rel = (exact.alpha - alpha_mc).abs() / alpha_mc;
    ensure!(
        rel <= 1e-2,
        "alpha {} vs oracle {alpha_mc} (rel {rel:e})",
        exact.alpha
    );
    let mass = mc_region_mass(&exact.slab, &sampler, N, 7).map_err(|e| e.to_string())?;
    let sd = (epsilon * (1.0 - epsilon) / N as f64).sqrt();
    ensure!(
        (mass - epsilon).abs() <= 3.0 * sd,
        "slab mass {mass} vs {epsilon} (sd {sd:e})"
    );
    Ok(format!(
        "alpha {:.5} vs oracle {alpha_mc:.5} (rel {rel:.1e}); slab mass {mass:.5} = eps within {:.2} sd",
        exact.alpha,
        (mass - epsilon).abs() / sd
    ))
}

fn subset_property() -> Check {
    let mut r = rng::seeded(2025);
    let mut checked = 0usize;
    let mut heads = 0usize;
    for k in 3..=5 {
        let target = 100_000 * (k - 2) / 3;
        while checked < target {
            let h = r.random_range(2..7);
            let head = random_head(&mut r, k, h, 0.5);
            let rows: Vec<Vec<f64>> = (0..k)
                .flat_map(|c| {
                    let w = head.column(c);
                    (0..200)
                        .map(|_| {
                            let s = r.random_range(1.0..4.0);
                            w.iter().map(|v| s * v + 0.5 * normal(&mut r)).collect()
                        })
                        .collect::<Vec<Vec<f64>>>()
                })
                .collect();
            let train = FeatureMatrix::from_rows(&rows).unwrap();
            let region = fit_linear_region(&head, &train, 0.05).map_err(|e| e.to_string())?;
            let live: Vec<_> = region
                .pairs
                .iter()
                .filter(|p| p.slab.alpha_lo + p.slab.alpha_hi > 0.0)
                .collect();
            if live.is_empty() {
                continue;
            }
            heads += 1;
            let mut accepted = 0;
            let mut attempts = 0;
            while accepted < 5_000 && checked < target && attempts < 1_000_000 {
                attempts += 1;
                let s = &live[r.random_range(0..live.len())].slab;
                let reach = r.random_range(0.0..60.0);
                let x: Vec<f64> = s
                    .anchor
                    .iter()
                    .map(|a| a + reach * normal(&mut r))
                    .collect();
                let diff: Vec<f64> = x.iter().zip(&s.anchor).map(|(a, b)| a - b).collect();
                let t = dot(&s.normal, &diff) / dot(&s.normal, &s.normal);
                let offset = r.random_range(-s.alpha_lo..s.alpha_hi);
                let z: Vec<f64> = x
                    .iter()
                    .zip(&s.normal)
                    .map(|(v, n)| v + (offset - t) * n)
                    .collect();
                if !region.contains(&z) {
                    continue;
                }
                accepted += 1;
                checked += 1;
                let u = u_max(&head, &z).unwrap();
                ensure!(
                    u > region.spec.u_star,
                    "K={k}: u_max {u} <= u* {}",
                    region.spec.u_star
                );
            }
        }
    }
    Ok(format!(
        "{checked} points inside the approximation over {heads} heads, zero violations"
    ))
}

fn central_difference(f: impl Fn(&[f64]) -> f64, z: &[f64]) -> Vec<f64> {
    const STEP: f64 = 1e-6;
    (0..z.len())
        .map(|d| {
            let (mut plus, mut minus) = (z.to_vec(), z.to_vec());
            plus[d] += STEP;
            minus[d] -= STEP;
            (f(&plus) - f(&minus)) / (2.0 * STEP)
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    diff / dot(b, b).sqrt().max(1e-8)
}

fn random_mixture(r: &mut Rng) -> GaussianMixture {
    let (k, h) = (r.random_range(1..4), r.random_range(1..5));
    let w: Vec<f64> = (0..k).map(|_| r.random_range(0.2..1.0)).collect();
    let total: f64 = w.iter().sum();
    let means = (0..k)
        .map(|_| (0..h).map(|_| r.random_range(-2.0..2.0)).collect())
        .collect();
    let covs = (0..k)
        .map(|_| {
            let a = DMatrix::from_fn(h, h, |_, _| r.random_range(-1.0..1.0));
            &a * a.transpose() + DMatrix::identity(h, h) * 0.3
        })
        .collect();
    GaussianMixture::new(
        w.iter().map(|v| v / total).collect(),
        means,
        covs,
        0.0,
        FeatureTransform::Identity,
    )
    .unwrap()
}

fn clustered(r: &mut Rng, clusters: usize, per: usize, h: usize) -> (FeatureMatrix, LabelVector) {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for c in 0..clusters {
        let mean: Vec<f64> = (0..h).map(|_| r.random_range(-6.0..6.0)).collect();
        let scale: Vec<f64> = (0..h).map(|_| r.random_range(0.3..2.0)).collect();
        for _ in 0..per {
            rows.push(
                (0..h)
                    .map(|d| mean[d] + scale[d] * normal(r))
                    .collect::<Vec<f64>>(),
            );
            labels.push(c);
        }
    }
    (
        FeatureMatrix::from_rows(&rows).unwrap(),
        LabelVector::new(labels, clusters).unwrap(),
    )
}

const TRIALS: usize = 1000;

fn property_suites() -> Check {
    let mut r = rng::seeded(6);
    for t in 0..TRIALS {
        let (k, h) = (r.random_range(2..7), r.random_range(1..7));
        let head = random_head(&mut r, k, h, 0.0);
        let z: Vec<f64> = (0..h).map(|_| r.random_range(-2.0..2.0)).collect();
        let s = r.random_range(0.01..0.99);
        let near: Vec<f64> = z.iter().map(|v| v * s).collect();
        ensure!(
            u_max(&head, &near).unwrap() >= u_max(&head, &z).unwrap(),
            "norm monotonicity, trial {t}"
        );
    }
    for (k, arc) in [
        (2usize, std::f64::consts::FRAC_PI_2),
        (3, std::f64::consts::FRAC_PI_3),
    ] {
        for t in 0..TRIALS {
            let head = planar_head(k, r.random_range(0.2..3.0));
            let radius = r.random_range(0.05..20.0);
            let (a, b) = (r.random_range(0.0..arc), r.random_range(0.0..arc));
            let (lo, hi) = (a.min(b), a.max(b));
            let (z_lo, z_hi) = (
                vec![radius * lo.cos(), radius * lo.sin()],
                vec![radius * hi.cos(), radius * hi.sin()],
            );
            ensure!(
                max_cos(&head, &z_lo) >= max_cos(&head, &z_hi) - 1e-15,
                "K={k} cos order, trial {t}"
            );
            ensure!(
                u_max(&head, &z_hi).unwrap() >= u_max(&head, &z_lo).unwrap(),
                "K={k} cos monotonicity, trial {t}"
            );
        }
    }
    for t in 0..TRIALS {
        let (clusters, h) = (r.random_range(1..4), r.random_range(1..4));
        let (x, y) = clustered(&mut r, clusters, 40, h);
        let cfg = if t % 2 == 0 {
            EmConfig {
                init: Some(InitMethod::Labels),
                ..EmConfig::default()
            }
        } else {
            EmConfig {
                k_components: Some(r.random_range(1..5)),
                init: Some(InitMethod::KmeansPp),
                seed: t as u64,
                ..EmConfig::default()
            }
        };
        let fit = fit_em_traced(&x, (t % 2 == 0).then_some(&y), &cfg).map_err(|e| e.to_string())?;
        ensure!(
            fit.log_likelihood.windows(2).all(|p| p[1] >= p[0] - 1e-9),
            "EM log-likelihood fell, trial {t}"
        );
    }
    for t in 0..TRIALS {
        let side = |r: &mut Rng| -> Vec<f64> {
            let n = r.random_range(1..200);
            (0..n)
                .map(|_| {
                    if r.random_bool(0.3) {
                        r.random_range(0..5) as f64
                    } else {
                        r.random_range(-3.0..3.0)
                    }
                })
                .collect()
        };
        let (a, b) = (side(&mut r), side(&mut r));
        let (fast, slow) = (auroc(&a, &b).unwrap(), auroc_brute_force(&a, &b).unwrap());
        ensure!(
            (fast - slow).abs() < 1e-12,
            "AUROC {fast} vs brute force {slow}, trial {t}"
        );
    }
    let mut checked = [0usize; 3];
    while checked[0] < TRIALS {
        let (k, h) = (r.random_range(2..7), r.random_range(1..7));
        let head = random_head(&mut r, k, h, 0.5);
        let z: Vec<f64> = (0..h).map(|_| r.random_range(-1.5..1.5)).collect();
        if let Ok(g) = grad_u_max(&head, &z) {
            let fd = central_difference(|x| u_max(&head, x).unwrap(), &z);
            ensure!(
                rel_err(&g, &fd) < 1e-5,
                "max-probability gradient {g:?} vs {fd:?}"
            );
            checked[0] += 1;
        }
    }
    while checked[1] < TRIALS {
        let (k, h) = (r.random_range(2..7), r.random_range(1..7));
        let head = random_head(&mut r, k, h, 0.5);
        let z: Vec<f64> = (0..h).map(|_| r.random_range(-1.5..1.5)).collect();
        let g = grad_u_entropy(&head, &z).unwrap();
        let fd = central_difference(|x| u_entropy(&head, x).unwrap(), &z);
        ensure!(rel_err(&g, &fd) < 1e-5, "entropy gradient {g:?} vs {fd:?}");
        checked[1] += 1;
    }
    while checked[2] < TRIALS {
        let gmm = random_mixture(&mut r);
        let z: Vec<f64> = (0..gmm.h()).map(|_| r.random_range(-3.0..3.0)).collect();
        let g = grad_u_density(&gmm, &z).unwrap();
        let fd = central_difference(|x| u_density(&gmm, x).unwrap(), &z);
        ensure!(rel_err(&g, &fd) < 1e-5, "density gradient {g:?} vs {fd:?}");
        checked[2] += 1;
    }
    Ok(format!(
        "{TRIALS} trials each of 8 properties, zero violations"
    ))
}

fn counterfactual_direction() -> Check {
    let cfg = CounterfactualConfig::default();
    let report = run_counterfactual(&cfg).map_err(|e| e.to_string())?;
    let row = |s| report.row(s).ok_or(format!("missing row {s}"));
    let (trainable, optimal, sandwich) = (
        row(Structure::Trainable)?,
        row(Structure::Optimal)?,
        row(Structure::Sandwich)?,
    );
    for r in [trainable, optimal] {
        ensure!(
            r.accuracy_mean >= 0.99 && r.accuracy.iter().all(|a| *a >= 0.99),
            "{} accuracy {:?}",
            r.structure,
            r.accuracy
        );
        ensure!(
            r.auroc_mean >= sandwich.auroc_mean + 0.10,
            "{} AUROC {:.3} vs sandwich {:.3}",
            r.structure,
            r.auroc_mean,
            sandwich.auroc_mean
        );
    }
    let opt_xent = optimal
        .cluster_xent_mean
        .ok_or("optimal has no cluster loss")?;
    for s in [Structure::Sandwich, Structure::Stack, Structure::Lopsided] {
        let x = row(s)?
            .cluster_xent_mean
            .ok_or(format!("{s} has no cluster loss"))?;
        ensure!(
            opt_xent < x,
            "regularized loss optimal {opt_xent} >= {s} {x}"
        );
    }
    Ok(format!(
        "{} seeds: AUROC trainable {:.3}, optimal {:.3}, sandwich {:.3}; accuracy {:.3}/{:.3}; optimal has the lowest regularized loss",
        cfg.seeds.len(),
        trainable.auroc_mean,
        optimal.auroc_mean,
        sandwich.auroc_mean,
        trainable.accuracy_mean,
        optimal.accuracy_mean
    ))
}

fn mental_model() -> Check {
    let mut r = rng::seeded(8);
    let (k, h) = (5, 16);
    let head = gen_optimal_head(&OptimalStructureSpec::new(k, h), 8).map_err(|e| e.to_string())?;
    let (mut exact_u, mut exact_m, mut noisy_u, mut noisy_m) = (vec![], vec![], vec![], vec![]);
    for _ in 0..2000 {
        let w = head.column(r.random_range(0..k));
        let norm = r.random_range(0.1..3.0);
        let z: Vec<f64> = w.iter().map(|v| v * norm).collect();
        let d = decompose(&head, &z).unwrap();
        exact_u.push(u_max(&head, &z).unwrap());
        exact_m.push(u_mental(k, d.z_norm, d.max_cos()).unwrap());
        let zn: Vec<f64> = z.iter().map(|v| v + 0.1 * normal(&mut r)).collect();
        let dn = decompose(&head, &zn).unwrap();
        noisy_u.push(u_max(&head, &zn).unwrap());
        noisy_m.push(u_mental(k, dn.z_norm, dn.max_cos()).unwrap());
    }
    ensure!(
        average_ranks(&exact_u) == average_ranks(&exact_m),
        "rank orders differ under the assumptions"
    );
    let rho = spearman(&noisy_u, &noisy_m).map_err(|e| e.to_string())?;
    ensure!(rho >= 0.99, "perturbed Spearman {rho}");
    Ok(format!(
        "identical ranks on 2000 exact features; perturbed Spearman {rho:.4}"
    ))
}

fn depth_trend() -> Check {
    let cfg = DepthStudyConfig {
        depths: vec![1, 4],
        ..DepthStudyConfig::default()
    };
    let table = depth_study(&cfg).map_err(|e| e.to_string())?;
    let (shallow, deep) = (&table.rows[0], &table.rows[1]);
    let wins = shallow
        .auroc
        .iter()
        .zip(&deep.auroc)
        .filter(|(s, d)| d >= s)
        .count();
    let gap = (deep.accuracy_mean - shallow.accuracy_mean).abs();
    ensure!(
        wins >= 4,
        "4 layers won {wins} of {} seeds",
        cfg.seeds.len()
    );
    ensure!(gap < 0.02, "accuracy gap {gap}");
    Ok(format!(
        "4 layers >= 1 layer on {wins}/{} seeds (mean AUROC {:.3} vs {:.3}); accuracy gap {gap:.4}",
        cfg.seeds.len(),
        deep.auroc_mean,
        shallow.auroc_mean
    ))
}

fn write_inputs(dir: &Path) {
    let files = [
        (
            "toy3.json",
            r#"{"task":{"kind":"gaussian_blobs","k":3,"n_per_class":150,"separation":6.0,"sigma":1.0,"seed":0},
                "ood":{"kind":"ring_ood","n":300,"dim":2,"inner":12.0,"outer":18.0,"seed":1},
                "test_per_class":100,"train":{"epochs":10}}"#,
        ),
        (
            "toy2.json",
            r#"{"task":{"kind":"gaussian_blobs","k":2,"n_per_class":150,"separation":6.0,"sigma":1.0,"seed":0},
                "test_per_class":50,"hidden":[8,4],"structure":"optimal","train":{"epochs":10}}"#,
        ),
        (
            "sample_class.json",
            r#"{"region":"slab/region.json","sampler":{"type":"class_model","features":"toy2/train_features.csv"},
                "n":50000,"seed":4,"points":200}"#,
        ),
        (
            "scenarios.json",
            r#"{"rows":[
                {"name":"toy","runs":[{"in_scores":"scores_in/scores.csv","out_scores":"scores_out/scores.csv"}]},
                {"name":"table","runs":[{"a":0.96,"b":0.963,"c":0.963,"d":0.995},{"a":0.95,"b":0.961,"c":0.965,"d":0.99}]}
            ]}"#,
        ),
    ];
    for (name, body) in files {
        std::fs::write(dir.join(name), body).unwrap();
    }
}

/// Every verb, in dependency order, with outputs under relative paths.
const PIPELINE: &[&[&str]] = &[
    &[
        "--out-dir",
        "gen_optimal",
        "gen-head",
        "--kind",
        "optimal",
        "--k",
        "4",
        "--h",
        "6",
        "--seed",
        "3",
    ],
    &[
        "--out-dir",
        "gen_sandwich",
        "gen-head",
        "--kind",
        "sandwich",
        "--k",
        "3",
        "--h",
        "4",
        "--seed",
        "3",
    ],
    &[
        "--out-dir",
        "toy3",
        "--config",
        "toy3.json",
        "train-toy",
        "--seed",
        "2",
    ],
    &["--out-dir", "toy2", "--config", "toy2.json", "train-toy"],
    &[
        "--out-dir",
        "audit",
        "audit-head",
        "--head",
        "gen_optimal/head.csv",
    ],
    &[
        "--out-dir",
        "audit_toy",
        "audit-head",
        "--head",
        "toy3/head.csv",
        "--features",
        "toy3/test_features.csv",
        "--format",
        "json",
    ],
    &[
        "--out-dir",
        "gmm",
        "fit-gmm",
        "--features",
        "toy3/train_features.csv",
        "--use-labels",
        "true",
    ],
    &[
        "--out-dir",
        "gmm_free",
        "fit-gmm",
        "--features",
        "toy3/train_features.csv",
        "--use-labels",
        "false",
        "--components",
        "2",
        "--transform",
        "signed-log",
    ],
    &[
        "--out-dir",
        "scores_in",
        "score",
        "--features",
        "toy3/test_features.csv",
        "--head",
        "toy3/head.csv",
        "--gmm",
        "gmm/gmm.json",
    ],
    &[
        "--out-dir",
        "scores_out",
        "score",
        "--features",
        "toy3/ood_features.csv",
        "--head",
        "toy3/head.csv",
        "--gmm",
        "gmm/gmm.json",
    ],
    &[
        "--out-dir",
        "linear",
        "region",
        "fit",
        "--kind",
        "linear",
        "--head",
        "toy3/head.csv",
        "--features",
        "toy3/train_features.csv",
    ],
    &[
        "--out-dir",
        "density",
        "region",
        "fit",
        "--kind",
        "density",
        "--gmm",
        "gmm/gmm.json",
    ],
    &[
        "--out-dir",
        "slab",
        "region",
        "fit",
        "--kind",
        "slab",
        "--head",
        "toy2/head.csv",
        "--features",
        "toy2/train_features.csv",
    ],
    &[
        "--out-dir",
        "sample_linear",
        "region",
        "sample",
        "--region",
        "linear/region.json",
        "--n",
        "50000",
        "--points",
        "300",
    ],
    &[
        "--out-dir",
        "sample_slab",
        "--config",
        "sample_class.json",
        "region",
        "sample",
    ],
    &[
        "--out-dir",
        "export_linear",
        "region",
        "export",
        "--region",
        "linear/region.json",
    ],
    &[
        "--out-dir",
        "export_density",
        "region",
        "export",
        "--region",
        "density/region.json",
        "--format",
        "json",
    ],
    &[
        "--out-dir",
        "attribution",
        "attribute",
        "--scenarios",
        "scenarios.json",
        "--seed",
        "5",
    ],
    &[
        "--out-dir",
        "attribution_direct",
        "attribute",
        "--a",
        "0.96",
        "--b",
        "0.963",
        "--c",
        "0.963",
        "--d",
        "0.995",
    ],
    &[
        "--out-dir",
        "sweep",
        "sweep",
        "--model",
        "toy3/model.json",
        "--n-samples",
        "20000",
        "--seed",
        "1",
    ],
    &[
        "--out-dir",
        "pca",
        "pca",
        "--features",
        "toy3/test_features.csv",
        "--extra",
        "toy3/ood_features.csv",
    ],
    &[
        "--out-dir",
        "counterfactual",
        "counterfactual",
        "--seeds",
        "1",
        "--epochs",
        "3",
    ],
    &[
        "--out-dir",
        "depth",
        "depth-study",
        "--depths",
        "1,2",
        "--seeds",
        "2",
        "--epochs",
        "3",
        "--format",
        "json",
    ],
    // Rerun from an echoed configuration.
    &[
        "--out-dir",
        "scores_rerun",
        "--config",
        "scores_in/effective_config.json",
        "score",
    ],
];

fn run_pipeline(dir: &Path) -> Result<(), String> {
    write_inputs(dir);
    for args in PIPELINE {
        let out = Command::new(env!("CARGO_BIN_EXE_softood"))
            .args(*args)
            .current_dir(dir)
            .env_remove("SOFTOOD_OUT_DIR")
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(
            out.status.success(),
            "`softood {}` failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        );
    }
    Ok(())
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                files.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn cli_determinism() -> Check {
    let (first, second) = (
        tempfile::tempdir().map_err(|e| e.to_string())?,
        tempfile::tempdir().map_err(|e| e.to_string())?,
    );
    run_pipeline(first.path())?;
    run_pipeline(second.path())?;
    let (a, b) = (tree(first.path()), tree(second.path()));
    ensure!(a.keys().eq(b.keys()), "runs wrote different file sets");
    let differing: Vec<&String> = a
        .iter()
        .filter(|(k, v)| b[*k] != **v)
        .map(|(k, _)| k)
        .collect();
    ensure!(
        differing.is_empty(),
        "files differ between runs: {differing:?}"
    );
    let rerun =
        |name: &str| a.get(&format!("scores_rerun/{name}")) == a.get(&format!("scores_in/{name}"));
    ensure!(
        rerun("scores.csv"),
        "rerun from the echoed configuration changed the scores"
    );
    Ok(format!(
        "{} verb invocations, {} output files byte-identical across two runs",
        PIPELINE.len(),
        a.len()
    ))
}

struct Criterion {
    number: usize,
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Check,
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria = [
        Criterion {
            number: 1,
            name: "sandwich counterexample",
            budget: secs(1),
            run: sandwich_counterexample,
        },
        Criterion {
            number: 2,
            name: "attribution table arithmetic",
            budget: None,
            run: table_arithmetic,
        },
        Criterion {
            number: 3,
            name: "optimal structure exactness",
            budget: secs(1),
            run: optimal_exactness,
        },
        Criterion {
            number: 4,
            name: "exact slab vs Monte-Carlo oracle",
            budget: secs(30),
            run: region_oracle,
        },
        Criterion {
            number: 5,
            name: "linear region subset property",
            budget: secs(60),
            run: subset_property,
        },
        Criterion {
            number: 6,
            name: "property suites",
            budget: None,
            run: property_suites,
        },
        Criterion {
            number: 7,
            name: "frozen-head structure experiment",
            budget: secs(180),
            run: counterfactual_direction,
        },
        Criterion {
            number: 8,
            name: "mental model fidelity",
            budget: secs(5),
            run: mental_model,
        },
        Criterion {
            number: 9,
            name: "depth trend",
            budget: secs(120),
            run: depth_trend,
        },
        Criterion {
            number: 10,
            name: "CLI determinism",
            budget: None,
            run: cli_determinism,
        },
    ];
    let mut failures = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.budget) {
            (Ok(_), Some(budget)) if elapsed > budget => {
                Err(format!("took {elapsed:.2?}, budget {budget:?}"))
            }
            (o, _) => o,
        };
        let (status, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!(
            "criterion {:>2}: {status} | {} | {:.2?} | {detail}",
            c.number, c.name, elapsed
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
