//! Property tests for the metric kernels and estimator identities.

use proptest::prelude::*;

use rct_auroc::metrics::{auc, c_index, empirical_cdf, mae, weighted_auc, TiePolicy};
use rct_auroc::theory::{all_data_mixture, bias_params, misselection_condition, PopulationParams};

fn score_vec(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    // A coarse grid keeps ties common enough to exercise both policies.
    prop::collection::vec((0..=40u32).prop_map(|v| v as f64 / 8.0), 1..max_len)
}

proptest! {
    #[test]
    fn auc_complement_identity_under_half(pos in score_vec(60), neg in score_vec(60)) {
        let fwd = auc(&pos, &neg, TiePolicy::Half).unwrap();
        let bwd = auc(&neg, &pos, TiePolicy::Half).unwrap();
        prop_assert!((fwd + bwd - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auc_strict_complement_leaves_tied_mass(pos in score_vec(40), neg in score_vec(40)) {
        let fwd = auc(&pos, &neg, TiePolicy::Strict).unwrap();
        let bwd = auc(&neg, &pos, TiePolicy::Strict).unwrap();
        let mut tied = 0.0;
        for &p in &pos {
            for &n in &neg {
                if p == n {
                    tied += 1.0;
                }
            }
        }
        tied /= (pos.len() * neg.len()) as f64;
        prop_assert!((fwd + bwd - (1.0 - tied)).abs() < 1e-12);
    }

    #[test]
    fn auc_is_invariant_under_increasing_transforms(
        pos in score_vec(50),
        neg in score_vec(50),
        scale in 0.1f64..5.0,
        shift in -3.0f64..3.0,
    ) {
        // x -> scale*x + shift and x -> x^3 (on shifted-positive values)
        // are strictly increasing.
        let f = |v: f64| (scale * v + shift + 10.0).powi(3);
        let tp: Vec<f64> = pos.iter().map(|&v| f(v)).collect();
        let tn: Vec<f64> = neg.iter().map(|&v| f(v)).collect();
        for tie in [TiePolicy::Strict, TiePolicy::Half] {
            let a = auc(&pos, &neg, tie).unwrap();
            let b = auc(&tp, &tn, tie).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_auc_uniform_weights_equal_plain(pos in score_vec(50), neg in score_vec(50)) {
        let pw = vec![1.0; pos.len()];
        let nw = vec![1.0; neg.len()];
        for tie in [TiePolicy::Strict, TiePolicy::Half] {
            let plain = auc(&pos, &neg, tie).unwrap();
            let weighted = weighted_auc(&pos, &pw, &neg, &nw, tie, false).unwrap();
            prop_assert!((plain - weighted).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_auc_scale_invariance(
        scores in score_vec(40),
        raw_w in prop::collection::vec(0.01f64..2.0, 40),
        c in 0.1f64..50.0,
    ) {
        let n = scores.len();
        if n < 2 {
            // Diagonal exclusion leaves no pairs at all.
            return Ok(());
        }
        let pw: Vec<f64> = raw_w.iter().take(n).cloned().collect();
        let nw: Vec<f64> = pw.iter().map(|w| 2.0 - w).collect();
        let scaled: Vec<f64> = pw.iter().map(|w| w * c).collect();
        let base = weighted_auc(&scores, &pw, &scores, &nw, TiePolicy::Half, true).unwrap();
        let again = weighted_auc(&scores, &scaled, &scores, &nw, TiePolicy::Half, true).unwrap();
        prop_assert!((base - again).abs() < 1e-11);
    }

    #[test]
    fn mean_self_cdf_is_half_under_half_ties(v in score_vec(80)) {
        let cdf = empirical_cdf(&v, &v, TiePolicy::Half).unwrap();
        let mean = cdf.iter().sum::<f64>() / cdf.len() as f64;
        prop_assert!((mean - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mae_is_nonnegative_and_shift_covariant(
        a in prop::collection::vec(-5.0f64..5.0, 1..40),
        shift in -2.0f64..2.0,
    ) {
        let b: Vec<f64> = a.iter().map(|v| v + shift).collect();
        let m = mae(&a, &b).unwrap();
        prop_assert!((m - shift.abs()).abs() < 1e-12);
    }

    #[test]
    fn c_index_complement_under_reversal(
        est in prop::collection::vec(-10.0f64..10.0, 2..30),
        truth_seed in prop::collection::vec(-10.0f64..10.0, 2..30),
    ) {
        let n = est.len().min(truth_seed.len());
        let est = &est[..n];
        let truth = &truth_seed[..n];
        if truth.iter().all(|&t| t == truth[0]) {
            return Ok(());
        }
        let rev: Vec<f64> = est.iter().map(|v| -v).collect();
        let a = c_index(est, truth).unwrap();
        let b = c_index(&rev, truth).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bias_coefficients_bounded(
        pi in 0.0f64..=1.0,
        mu0 in 0.01f64..0.99,
        mu1 in 0.01f64..0.99,
    ) {
        let p = PopulationParams::new(pi, mu0, mu1).unwrap();
        let (alpha, beta) = bias_params(&p);
        prop_assert!(alpha < 1.0);
        prop_assert!(beta >= 0.0);
        if pi > 0.0 {
            prop_assert!(beta > 0.0);
        }
    }

    #[test]
    fn misselection_is_invariant_under_common_sigma_shift(
        gap in 0.001f64..0.3,
        beta in 0.1f64..5.0,
        s1 in -0.2f64..0.2,
        s2 in -0.2f64..0.2,
        shift in -10.0f64..10.0,
    ) {
        let base = misselection_condition(0.7 + gap, 0.7, beta, s1, s2).unwrap();
        let moved = misselection_condition(0.7 + gap, 0.7, beta, s1 + shift, s2 + shift).unwrap();
        prop_assert_eq!(base, moved);
    }

    #[test]
    fn mixture_is_convex_for_interior_pi(
        a00 in 0.0f64..=1.0,
        a11 in 0.0f64..=1.0,
        a01 in 0.0f64..=1.0,
        a10 in 0.0f64..=1.0,
        pi in 0.0f64..=1.0,
    ) {
        let m = all_data_mixture(a00, a11, a01, a10, pi);
        let lo = a00.min(a11).min(a01).min(a10);
        let hi = a00.max(a11).max(a01).max(a10);
        prop_assert!(m >= lo - 1e-12 && m <= hi + 1e-12);
    }
}
