use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wfset_core::{cone_indicator, shrink_margin, verify_conditions, AssociatedFunction, Cone, WeightSequence};

#[test]
fn gevrey_ratio_approaches_root_two() {
    for s in [1.5, 2.0, 3.0] {
        let af = AssociatedFunction::new(WeightSequence::gevrey(s, 3000).unwrap());
        let target = 2f64.powf(1.0 / s);
        for lambda in [1e3, 1e4] {
            let v = af.evaluate(2.0 * lambda).unwrap();
            assert!(!v.truncated);
            let ratio = v.value / af.value(lambda).unwrap();
            assert!(
                ((ratio - target) / target).abs() < 0.1,
                "s={s} λ={lambda}: {ratio} vs {target}"
            );
        }
    }
}

#[test]
fn gevrey_conditions_hold_across_sizes() {
    for s in [1.5, 2.0, 3.0] {
        for pmax in [10, 100, 300] {
            let r = verify_conditions(&WeightSequence::gevrey(s, pmax).unwrap());
            assert!(r.m1_ok && r.m4_ok, "s={s} pmax={pmax}: {r:?}");
            assert!(r.m2.is_some() && r.m3.is_some());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn associated_function_is_monotone_and_convex_in_log(
        s in 1.1f64..4.0,
        lo in -1.0f64..3.0,
        width in 0.5f64..4.0,
    ) {
        let af = AssociatedFunction::new(WeightSequence::gevrey(s, 400).unwrap());
        let n = 41;
        let vals: Vec<f64> = (0..n)
            .map(|j| af.value(10f64.powf(lo + width * j as f64 / (n - 1) as f64)).unwrap())
            .collect();
        for w in vals.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
        // Equal steps in ln λ: second differences are non-negative.
        for w in vals.windows(3) {
            prop_assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-9 * w[1].abs().max(1.0));
        }
    }

    #[test]
    fn cone_indicator_is_conic(
        axis in 0.0f64..2.0 * PI,
        half in 0.05f64..1.5,
        theta in 0.0f64..2.0 * PI,
        r in 1e-3f64..1e3,
        lambda in 1e-3f64..1e3,
    ) {
        let cone = Cone::circular(axis, half).unwrap();
        let xi = [r * theta.cos(), r * theta.sin()];
        let scaled = [lambda * xi[0], lambda * xi[1]];
        prop_assert_eq!(cone_indicator(&cone, &xi), cone_indicator(&cone, &scaled));
    }

    #[test]
    fn shrink_margin_orders_coaxial_families(
        axis in 0.0f64..2.0 * PI,
        a in 0.02f64..0.6,
        da in 0.01f64..0.3,
        b in 0.95f64..1.4,
        db in 0.01f64..0.15,
    ) {
        let outer = Cone::circular(axis, b).unwrap();
        let wider_outer = Cone::circular(axis, b + db).unwrap();
        let inner = Cone::circular(axis, a).unwrap();
        let wider_inner = Cone::circular(axis, a + da).unwrap();
        let base = shrink_margin(&inner, &outer).unwrap();
        prop_assert!(shrink_margin(&wider_inner, &outer).unwrap() <= base);
        prop_assert!(shrink_margin(&inner, &wider_outer).unwrap() >= base);
    }
}

/// Rejection sampling of `η = ξ + c|ξ|u` with `ξ ∈ Γ`, `|u| ≤ 1`.
fn counterexamples(inner: &Cone, outer: &Cone, c: f64, samples: usize, rng: &mut ChaCha8Rng) -> usize {
    let mut found = 0;
    let mut drawn = 0;
    while drawn < samples {
        let theta = rng.random_range(0.0..2.0 * PI);
        let xi = [theta.cos(), theta.sin()];
        if cone_indicator(inner, &xi) == 0 {
            continue;
        }
        drawn += 1;
        let phi = rng.random_range(0.0..2.0 * PI);
        let rho = c * rng.random_range(0.0f64..1.0).sqrt().max(rng.random_range(0.9..1.0));
        let eta = [xi[0] + rho * phi.cos(), xi[1] + rho * phi.sin()];
        found += usize::from(cone_indicator(outer, &eta) == 0);
    }
    found
}

#[test]
fn shrink_margin_agrees_with_sampling_on_tilted_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (ia, ih, oa, oh) in [(0.0, 10.0, 5.0, 30.0), (40.0, 5.0, 30.0, 25.0), (200.0, 20.0, 180.0, 60.0)] {
        let inner = Cone::circular(f64::to_radians(ia), f64::to_radians(ih)).unwrap();
        let outer = Cone::circular(f64::to_radians(oa), f64::to_radians(oh)).unwrap();
        let c = shrink_margin(&inner, &outer).unwrap();
        assert_eq!(counterexamples(&inner, &outer, c - 1e-3, 100_000, &mut rng), 0, "{ia} {ih} {oa} {oh}");
        assert!(counterexamples(&inner, &outer, c + 1e-2, 100_000, &mut rng) > 0, "{ia} {ih} {oa} {oh}");
    }
}
