use frog_core::exact::{
    barrier_profile, block_miss_prob, bound_check, bound_check_site, brute_force_reach,
    extinction_threshold, miss_exponent, non_visit_prob, partial_survival_product, ratio,
    reach_prob, reach_prob_exact, ReachTable, WalkLaw,
};
use frog_core::{PrimitiveForm, SequenceSpec};
use num_traits::ToPrimitive;
use proptest::prelude::*;

const P_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Running-maximum oracle written independently of the library: recursion over
/// (steps left, current position, max so far).
fn recursive_reach(p: f64, steps: u32, d: i64) -> f64 {
    fn go(p: f64, left: u32, pos: i64, d: i64) -> f64 {
        if pos >= d {
            return 1.0;
        }
        if left == 0 {
            return 0.0;
        }
        p * go(p, left - 1, pos + 1, d) + (1.0 - p) * go(p, left - 1, pos - 1, d)
    }
    go(p, steps, 0, d)
}

#[test]
fn dp_matches_enumeration_on_full_grid() {
    for &p in &P_GRID {
        for l in 1..=12 {
            let law = WalkLaw::new(p, l).unwrap();
            for d in 1..=l {
                let dp = reach_prob(&law, d).unwrap();
                let bf = brute_force_reach(&law, d).unwrap();
                assert!((dp - bf).abs() <= 1e-12, "p={p} L={l} d={d}: {dp} vs {bf}");
            }
        }
    }
}

#[test]
fn dp_matches_independent_recursion() {
    for &p in &[0.15, 0.5, 0.85] {
        for l in 1..=10 {
            let law = WalkLaw::new(p, l).unwrap();
            for d in 1..=l + 1 {
                let dp = reach_prob(&law, d).unwrap();
                assert!((dp - recursive_reach(p, l, d as i64)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn dp_matches_rational_arithmetic() {
    for (num, den) in [(1, 3), (1, 2), (7, 10)] {
        let p = ratio(num, den);
        for l in 1..=12 {
            let law = WalkLaw::new(num as f64 / den as f64, l).unwrap();
            for d in 1..=l {
                let exact = reach_prob_exact(&p, l, d).unwrap().to_f64().unwrap();
                assert!((reach_prob(&law, d).unwrap() - exact).abs() < 1e-13);
            }
        }
    }
}

#[test]
fn reach_examples() {
    let law = WalkLaw::new(0.7, 1).unwrap();
    assert!((reach_prob(&law, 1).unwrap() - 0.7).abs() < 1e-15);
    let law = WalkLaw::new(0.6, 3).unwrap();
    assert!((reach_prob(&law, 1).unwrap() - 0.744).abs() < 1e-15);
    for &p in &P_GRID {
        let law = WalkLaw::new(p, 2).unwrap();
        assert!((reach_prob(&law, 1).unwrap() - p).abs() < 1e-15);
        assert!((brute_force_reach(&law, 2).unwrap() - p * p).abs() < 1e-15);
        for l in 1..=9 {
            let law = WalkLaw::new(p, l).unwrap();
            assert_eq!(reach_prob(&law, l + 1).unwrap(), 0.0);
            let top = reach_prob(&law, l).unwrap();
            assert!((top - p.powi(l as i32)).abs() <= 1e-15 * top.max(1e-300) + 1e-300);
        }
    }
}

#[test]
fn enumeration_guard() {
    let law = WalkLaw::new(0.5, 21).unwrap();
    assert!(brute_force_reach(&law, 1).is_err());
    let law = WalkLaw::new(0.5, 20).unwrap();
    assert!(brute_force_reach(&law, 20).is_ok());
}

#[test]
fn threshold_identity_for_all_small_parameters() {
    for n in 1..=10u64 {
        for l in 1..=100u64 {
            let closed = if l % 2 == 1 {
                n * l.div_ceil(2) * l.div_ceil(2)
            } else {
                n * l * (l + 2) / 4
            };
            let sum: u64 = (1..=l as u32)
                .map(|j| miss_exponent(j, l as u32).unwrap() as u64)
                .sum();
            assert_eq!(closed, n * sum);
            assert_eq!(extinction_threshold(n, l), closed);
        }
    }
    assert_eq!(extinction_threshold(1, 1), 1);
    assert_eq!(extinction_threshold(1, 2), 2);
    assert_eq!(extinction_threshold(1, 3), 4);
}

#[test]
fn miss_exponent_values_and_range() {
    assert_eq!(miss_exponent(1, 5).unwrap(), 1);
    assert_eq!(miss_exponent(3, 5).unwrap(), 2);
    assert_eq!(miss_exponent(4, 5).unwrap(), 2);
    assert!(miss_exponent(0, 5).is_err());
    assert!(miss_exponent(6, 5).is_err());
}

#[test]
fn enough_left_jumps_miss_the_target() {
    // From distance L+1-j, taking the first f(j) steps to the left keeps the running
    // maximum below the target whatever the remaining steps do.
    for l in 1..=14u32 {
        for j in 1..=l {
            let f = miss_exponent(j, l).unwrap() as i64;
            let distance = (l + 1 - j) as i64;
            let best_case_max = (-f + (l as i64 - f)).max(0);
            assert!(best_case_max < distance, "L={l} j={j}");
        }
    }
}

#[test]
fn non_visit_examples() {
    assert!((non_visit_prob(0.3, 2, 1, 1).unwrap() - 0.09).abs() < 1e-15);
    assert_eq!(non_visit_prob(0.3, 1, 1, 5).unwrap(), 1.0);
    assert!((non_visit_prob(0.5, 1, 2, 2).unwrap() - 0.75).abs() < 1e-15);
    assert!(non_visit_prob(0.5, 1, 2, 0).is_err());
    // leftward target uses the mirrored walk
    assert!((non_visit_prob(0.3, 1, 1, -1).unwrap() - 0.7).abs() < 1e-15);
}

#[test]
fn block_examples() {
    let half = SequenceSpec::single(PrimitiveForm::constant(0.5)).unwrap();
    assert!((block_miss_prob(&half, 1, 2, 0).unwrap() - 0.375).abs() < 1e-15);
    let spec = SequenceSpec::single(PrimitiveForm::power_with(1.0, 2.0, 1)).unwrap();
    for n in 0..20 {
        let q = spec.eval(n + 1).unwrap();
        assert!((block_miss_prob(&spec, 3, 1, n).unwrap() - q.powi(3)).abs() < 1e-15);
    }
}

#[test]
fn sandwich_holds_on_a_large_grid() {
    let q_grid = [
        0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99,
    ];
    let mut tuples = 0;
    for &q in &q_grid {
        for n in 1..=4 {
            for l in 1..=8 {
                for j in 1..=l {
                    let r = bound_check_site(q, n, l, j).unwrap();
                    assert!(r.lower <= r.value && r.value <= r.upper);
                    tuples += 1;
                }
            }
        }
    }
    assert!(tuples >= 500, "{tuples}");
}

#[test]
fn block_bounds_on_mixed_spec() {
    let spec = SequenceSpec::build(
        vec![PrimitiveForm::power(1.0), PrimitiveForm::log_inverse(2)],
        vec![],
        vec![0.9, 0.8],
    )
    .unwrap();
    for n in 0..200 {
        assert_eq!(bound_check(&spec, 2, 5, n).unwrap().len(), 5);
    }
    let table = ReachTable::build(&spec, 2, 5, 200).unwrap();
    for row in &table.rows {
        assert!(row.lower <= row.a_n * (1.0 + 1e-12) && row.a_n <= row.upper * (1.0 + 1e-12));
    }
}

#[test]
fn telescoping_product_limit() {
    let spec = SequenceSpec::single(PrimitiveForm::power_with(1.0, 2.0, 1)).unwrap();
    for m in [1u64, 10, 100, 2000] {
        let p = partial_survival_product(&spec, 1, 1, m).unwrap();
        let closed = (m as f64 + 2.0) / (2.0 * (m as f64 + 1.0));
        assert!((p - closed).abs() < 1e-12, "M={m}");
    }
    let table = ReachTable::build(&spec, 1, 1, 50).unwrap();
    assert!(table
        .rows
        .windows(2)
        .all(|w| w[1].partial_product <= w[0].partial_product));
}

#[test]
fn table_is_deterministic() {
    let spec = SequenceSpec::single(PrimitiveForm::log_inverse(2)).unwrap();
    let a = ReachTable::build(&spec, 2, 4, 64).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap()
        .install(|| ReachTable::build(&spec, 2, 4, 64).unwrap());
    assert_eq!(a, b);
}

proptest! {
    #[test]
    fn mass_is_conserved(p in 0.01f64..0.99, l in 1u32..40, d in 1u32..45) {
        let law = WalkLaw::new(p, l).unwrap();
        for step in barrier_profile(&law, d).unwrap() {
            prop_assert!((step.retained + step.absorbed - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn reach_is_monotone(p in 0.02f64..0.97, l in 1u32..30, d in 1u32..30) {
        let law = WalkLaw::new(p, l).unwrap();
        let base = reach_prob(&law, d).unwrap();
        let more_p = reach_prob(&WalkLaw::new(p + 0.01, l).unwrap(), d).unwrap();
        let more_l = reach_prob(&WalkLaw::new(p, l + 1).unwrap(), d).unwrap();
        let farther = reach_prob(&law, d + 1).unwrap();
        prop_assert!(more_p >= base - 1e-14);
        prop_assert!(more_l >= base - 1e-14);
        prop_assert!(farther <= base + 1e-14);
        prop_assert_eq!(base == 0.0, d > l);
    }

    #[test]
    fn sandwich_random(q in 0.001f64..0.999, n in 1u32..6, l in 1u32..16, j_frac in 0.0f64..1.0) {
        let j = 1 + ((l as f64 * j_frac) as u32).min(l - 1);
        prop_assert!(bound_check_site(q, n, l, j).is_ok());
    }

    #[test]
    fn block_product_in_unit_interval(alpha in 0.1f64..3.0, n in 1u32..5, l in 1u32..8, start in 0u64..10_000) {
        let spec = SequenceSpec::single(PrimitiveForm::power_with(0.9, alpha, 1)).unwrap();
        let a = block_miss_prob(&spec, n, l, start).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
    }
}
