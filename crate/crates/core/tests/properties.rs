use cantor_riesz::estimates::{
    band_width, flip_injection_check, flip_subfamilies_check, selection_check, subsequence_check,
    survival_curve, threshold_cube_sets, RANDOM_SUBSETS,
};
use cantor_riesz::measure::{discretize, Mode};
use cantor_riesz::riesz::{riesz_kernel, transform_truncated, Exclusion, TargetSet};
use cantor_riesz::sequence::{regularize, LadderParams, SigmaSequence};
use cantor_riesz::{CantorSet, DiscreteMeasure};
use proptest::prelude::*;

/// Sequences with `σ_{j+1} ≤ σ_j / 2`, built from ratios in `[2, 40)`.
fn sigma_strategy(max_len: usize) -> impl Strategy<Value = SigmaSequence> {
    (0.05f64..1.0, prop::collection::vec(2.0f64..40.0, 0..max_len)).prop_map(|(first, ratios)| {
        let mut v = vec![first];
        for r in ratios {
            let last = *v.last().unwrap();
            v.push(last / r);
        }
        SigmaSequence::new(v).unwrap()
    })
}

fn params_strategy() -> impl Strategy<Value = LadderParams> {
    // α below 1/(2T)
    (0.05f64..0.95, 1.5f64..7.5).prop_map(|(f, t)| LadderParams::new(f / (2.0 * t), t).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ladders_satisfy_their_laws(sigma in sigma_strategy(14), params in params_strategy()) {
        let ladder = regularize(&sigma, params).unwrap();
        prop_assert!(ladder.violations().is_empty(), "{:?}", ladder.violations());
        prop_assert_eq!(ladder.selected()[0], 1);
        let n = ladder.depth();
        for j in 1..n {
            prop_assert!(sigma.get(j) <= ladder.ell_at(j));
        }
        prop_assert!(ladder.ell_at(n) <= sigma.get(n));
        prop_assert_eq!(*ladder.selected().last().unwrap(), n);
    }

    #[test]
    fn ladder_text_round_trips(sigma in sigma_strategy(8), params in params_strategy(), d in 1usize..4) {
        let ladder = regularize(&sigma, params).unwrap();
        let (d2, s2, back) = cantor_riesz::Ladder::from_text(&ladder.to_text(d, 1.0)).unwrap();
        prop_assert_eq!((d2, s2), (d, 1.0));
        prop_assert_eq!(back.ell(), ladder.ell());
        prop_assert_eq!(back.selected(), ladder.selected());
    }

    #[test]
    fn small_sets_are_consistent(sigma in sigma_strategy(4), d in 1usize..3) {
        let set = CantorSet::build(&regularize(&sigma, LadderParams::default()).unwrap(), d).unwrap();
        prop_assert!(set.violations().is_empty(), "{:?}", set.violations());
        for k in 0..set.leaf_count() as u64 {
            let loc = set.locate(set.center(set.depth(), k)).unwrap();
            prop_assert_eq!(loc.leaf(), k);
        }
    }

    #[test]
    fn kernel_is_odd_and_homogeneous(x in prop::collection::vec(-3.0f64..3.0, 2), s in 0.2f64..2.5, lam in 0.1f64..10.0) {
        prop_assume!(x.iter().map(|v| v * v).sum::<f64>() > 1e-6);
        let k = riesz_kernel(&x, s).unwrap();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let scaled: Vec<f64> = x.iter().map(|v| lam * v).collect();
        let kn = riesz_kernel(&neg, s).unwrap();
        let ks = riesz_kernel(&scaled, s).unwrap();
        for i in 0..2 {
            prop_assert_eq!(kn[i], -k[i]);
            prop_assert!((ks[i] - lam.powf(-s) * k[i]).abs() <= 1e-12 * k[i].abs().max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn transform_is_linear_in_mass(w in prop::collection::vec(0.1f64..2.0, 6), tau in 0.1f64..5.0) {
        let pts: Vec<f64> = (0..6).flat_map(|i| [i as f64, (i * i) as f64 * 0.3]).collect();
        let nu = DiscreteMeasure::point_masses(2, pts, w).unwrap();
        let targets = TargetSet::nodes(&nu);
        let a = transform_truncated(&nu, &targets, 0.0, 1.0, Exclusion::OwnNode).unwrap();
        let b = transform_truncated(&nu.scaled(tau).unwrap(), &targets, 0.0, 1.0, Exclusion::OwnNode).unwrap();
        for i in 0..6 {
            for c in 0..2 {
                prop_assert!((b.value(i)[c] - tau * a.value(i)[c]).abs() <= 1e-12 * (1.0 + a.value(i)[c].abs()) * tau);
            }
        }
    }

    #[test]
    fn subsequence_keeps_the_bound(a in prop::collection::vec(0.001f64..100.0, 1..40), delta in 0.1f64..2.0, kappa in 0.5f64..3.0) {
        let v = subsequence_check(&a, delta, kappa).unwrap();
        prop_assert!(v.holds, "{:?}", v);
        prop_assert!(v.picks.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn survival_is_nonincreasing(values in prop::collection::vec(0.0f64..10.0, 1..50), b in prop::collection::vec(0.0f64..5.0, 1..10)) {
        let weights = vec![1.0; values.len()];
        let mut grid = b.clone();
        grid.sort_by(f64::total_cmp);
        let (_, curve) = survival_curve(&values, &weights, &grid);
        prop_assert!(curve.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(curve.iter().all(|c| (0.0..=1.0).contains(c)));
    }

    #[test]
    fn selection_bound_holds(f in prop::collection::vec(0.0f64..5.0, 1..30), delta in 0.01f64..0.99, shrink in 0.5f64..1.0, grow in 1.0f64..2.0) {
        let w = vec![1.0 / f.len() as f64; f.len()];
        let mean: f64 = f.iter().zip(&w).map(|(a, b)| a * b).sum();
        let second: f64 = f.iter().zip(&w).map(|(a, b)| a * a * b).sum();
        prop_assume!(mean > 1e-9);
        let l = mean * shrink;
        if let Ok(v) = selection_check(&f, &w, l, second / (l * l) * grow, delta) {
            prop_assert!(v.holds, "{:?}", v);
        }
    }

    #[test]
    fn flip_matching_agrees_with_subfamilies(l in prop::collection::vec(0.1f64..2.0, 1..5)) {
        let whole = flip_injection_check(&l).unwrap();
        let (_, bad) = flip_subfamilies_check(&l, RANDOM_SUBSETS, 7).unwrap();
        prop_assert!(whole.holds());
        prop_assert_eq!(whole.holds(), bad.is_none());
        prop_assert_eq!(whole.matched, whole.candidates);
    }

    #[test]
    fn band_width_is_scale_free(v in prop::collection::vec(0.01f64..100.0, 1..20), c in 0.1f64..10.0) {
        let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
        let (a, b) = (band_width(&v), band_width(&scaled));
        prop_assert!(a >= 1.0);
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn threshold_counts_fall_with_c0(c in prop::collection::vec(0.0f64..4.0, 2..6)) {
        let sigma = SigmaSequence::geometric(0.25, 4.0, 3).unwrap();
        let set = CantorSet::build(&regularize(&sigma, LadderParams::default()).unwrap(), 2).unwrap();
        let nu = discretize(&set, Mode::Centers).unwrap();
        let mut c = c;
        c.sort_by(f64::total_cmp);
        let counts: Vec<usize> = c
            .iter()
            .map(|c0| threshold_cube_sets(&set, &nu, *c0, 1.0, None).unwrap().count_reduced())
            .collect();
        prop_assert!(counts.windows(2).all(|w| w[1] <= w[0]));
    }
}
