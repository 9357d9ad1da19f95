//! Softmax and angle-decomposition invariants over random heads.

use proptest::prelude::*;
use softood::head::{argmax, softmax_logits};
use softood::{decompose, softmax, SoftmaxHead};

/// `(K, H, weights column-major, bias, z)`.
fn head_and_point() -> impl Strategy<Value = (SoftmaxHead, Vec<f64>)> {
    (2usize..8, 1usize..8).prop_flat_map(|(k, h)| {
        (
            prop::collection::vec(-3.0f64..3.0, k * h),
            prop::collection::vec(-2.0f64..2.0, k),
            prop::collection::vec(-5.0f64..5.0, h),
        )
            .prop_filter_map("zero weight column", move |(w, b, z)| {
                let cols: Vec<Vec<f64>> = w.chunks(h).map(|c| c.to_vec()).collect();
                if cols.iter().any(|c| c.iter().all(|v| v.abs() < 1e-6)) {
                    return None;
                }
                let head = SoftmaxHead::from_columns(&cols).ok()?.with_bias(b).ok()?;
                Some((head, z))
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn softmax_is_a_distribution((head, z) in head_and_point()) {
        let p = softmax(&head, &z).unwrap();
        prop_assert_eq!(p.len(), head.k());
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn softmax_ignores_logit_shift((head, z) in head_and_point(), shift in -50.0f64..50.0) {
        let logits = head.logits(&z).unwrap();
        let shifted: Vec<f64> = logits.iter().map(|l| l + shift).collect();
        let (a, b) = (softmax_logits(&logits), softmax_logits(&shifted));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn decomposition_recomposes_dot_products((head, z) in head_and_point()) {
        let d = decompose(&head, &z).unwrap();
        for i in 0..head.k() {
            let w = head.column(i);
            let dot: f64 = w.iter().zip(&z).map(|(a, b)| a * b).sum();
            let re = d.z_norm * head.weight_norm(i) * d.cos_theta[i];
            prop_assert!((dot - re).abs() <= 1e-10 * dot.abs().max(1e-6), "{} vs {}", dot, re);
        }
    }

    #[test]
    fn argmax_of_probabilities_matches_logits((head, z) in head_and_point()) {
        let logits = head.logits(&z).unwrap();
        let p = softmax(&head, &z).unwrap();
        let top = argmax(&logits);
        // Probabilities can tie in floating point where logits do not; the
        // logit argmax must still attain the largest probability.
        prop_assert_eq!(p[top], p[argmax(&p)]);
    }
}
