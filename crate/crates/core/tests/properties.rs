use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bqc_core::attacks::{evaluate_attack, evaluate_kraus, partial_measure, random_kraus};
use bqc_core::bounds::{circular_product, prefix_survival_bound, detection_bound, fidelity_bound};
use bqc_core::cli::ConcaveFamily;
use bqc_core::decoys::HonestIsometry;
use bqc_core::qcore::{apply_isometry, random_state, random_unitary};

fn family() -> impl Strategy<Value = ConcaveFamily> {
    prop_oneof![
        (2usize..9).prop_map(|n| ConcaveFamily::Fidelity { n }),
        Just(ConcaveFamily::Quadratic),
        (0.01f64..=1.0).prop_map(|c| ConcaveFamily::ScaledSqrt { c }),
    ]
}

proptest! {
    #[test]
    fn fidelity_bound_is_nonincreasing_and_concave(n in 2usize..12, a in 0.0f64..1.0, b in 0.0f64..1.0, w in 0.0f64..1.0) {
        let lo = 1.0 / n as f64;
        let x = lo + (1.0 - lo) * a.min(b);
        let y = lo + (1.0 - lo) * a.max(b);
        let fx = fidelity_bound(x, n).unwrap();
        let fy = fidelity_bound(y, n).unwrap();
        prop_assert!(fy <= fx + 1e-12);
        let mid = w * x + (1.0 - w) * y;
        prop_assert!(fidelity_bound(mid, n).unwrap() >= w * fx + (1.0 - w) * fy - 1e-9);
        prop_assert!((0.5..=1.0 + 1e-12).contains(&fx));
    }

    #[test]
    fn detection_bound_monotone(n in 2usize..10, a in 0.0f64..1.0, b in 0.0f64..1.0, decoys in 0usize..40) {
        let top = (n as f64).log2();
        let (i, j) = (top * a.min(b), top * a.max(b));
        let d = detection_bound(i, n, decoys).unwrap();
        prop_assert!(detection_bound(j, n, decoys).unwrap() >= d - 1e-12);
        prop_assert!(detection_bound(i, n, decoys + 1).unwrap() >= d - 1e-12);
        prop_assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn prefix_survival_bound_shrinks_with_rounds(n in 2usize..6, gs in prop::collection::vec(0.0f64..1.0, 1..12), p in 0usize..12) {
        let lo = 1.0 / n as f64;
        let gs: Vec<f64> = gs.iter().map(|t| lo + (1.0 - lo) * t).collect();
        let mut prev = 1.0;
        for round in 1..=gs.len() + 1 {
            let v = prefix_survival_bound(&gs, p, round, n).unwrap();
            prop_assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn circular_products_respect_the_mean(f in family(), xs in prop::collection::vec(0.0f64..=1.0, 1..20)) {
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let rhs = f.eval(mean).powi(xs.len() as i32 - 1);
        prop_assert!(circular_product(&xs, |x| f.eval(x)) <= rhs + 1e-12);
    }

    #[test]
    fn merging_two_entries_never_lowers_the_circular_product(
        f in family(),
        xs in prop::collection::vec(0.0f64..=1.0, 2..16),
        i in any::<prop::sample::Index>(),
        j in any::<prop::sample::Index>(),
    ) {
        let (i, j) = (i.index(xs.len()), j.index(xs.len()));
        prop_assume!(i != j);
        let mut merged = xs.clone();
        let mean = (xs[i] + xs[j]) / 2.0;
        merged[i] = mean;
        merged[j] = mean;
        let g = |x: f64| f.eval(x);
        prop_assert!(circular_product(&merged, g) >= circular_product(&xs, g) - 1e-12);
    }

    #[test]
    fn random_kraus_families_stay_below_the_curve(seed in any::<u64>(), n in 2usize..5, ops in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = evaluate_kraus(&random_kraus(n, ops, &mut rng)).unwrap();
        prop_assert!(r.g >= 1.0 / n as f64 - 1e-12 && r.g <= 1.0 + 1e-12);
        prop_assert!(r.f <= fidelity_bound(r.g, n).unwrap() + 1e-9);
    }

    #[test]
    fn partial_measure_traces_the_curve_monotonically(n in 2usize..8, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (s, t) = (a.min(b), a.max(b));
        let weak = evaluate_attack(&partial_measure(s, n).unwrap()).unwrap();
        let strong = evaluate_attack(&partial_measure(t, n).unwrap()).unwrap();
        prop_assert!(strong.g >= weak.g - 1e-12);
        prop_assert!(strong.f <= weak.f + 1e-12);
    }

    #[test]
    fn honest_isometry_preserves_inner_products(seed in any::<u64>(), n in 2usize..7, m in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table: Vec<usize> = (0..n).map(|q| (q * 7 + 3) % m).collect();
        let iso = HonestIsometry::new(table, m).unwrap();
        let (a, b) = (random_state(n, &mut rng), random_state(n, &mut rng));
        let before = a.inner(&b);
        let after = iso.apply(&a, 1).unwrap().inner(&iso.apply(&b, 1).unwrap());
        prop_assert!((before - after).norm() < 1e-12);
    }

    #[test]
    fn unitaries_preserve_inner_products(seed in any::<u64>(), n in 2usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_unitary(n, &mut rng);
        let (a, b) = (random_state(n, &mut rng), random_state(n, &mut rng));
        let ua = apply_isometry(&u, &a).unwrap();
        let ub = apply_isometry(&u, &b).unwrap();
        prop_assert!((a.inner(&b) - ua.inner(&ub)).norm() < 1e-10);
    }
}
