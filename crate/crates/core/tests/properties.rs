mod common;

use common::*;
use proptest::prelude::*;
use safronov::diagnostics::{
    moment_identity_residual, moment_identity_residual_with, DifferenceForm,
};
use safronov::rhs::{leak_rate, rhs_direct, rhs_fast};
use safronov::state::moment;
use safronov::KernelSpec;

fn kernel() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        Just(KernelSpec::ratio_sum()),
        Just(KernelSpec::sum()),
        Just(KernelSpec::product()),
        (0.0f64..=1.0).prop_map(|a| KernelSpec::power_law(a).unwrap()),
        (0.01f64..10.0).prop_map(|k| KernelSpec::constant(k).unwrap()),
    ]
}

/// Non-negative states with roughly a quarter of the entries zero.
fn state(max_n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 3 => 0.0f64..2.0], 2..=max_n)
}

/// Size of the terms entering `Σ w_i d_i`.
fn scale(d: &[f64], w: &[f64]) -> f64 {
    d.iter()
        .zip(w)
        .map(|(a, b)| (a * b).abs())
        .sum::<f64>()
        .max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn kernels_are_symmetric(k in kernel(), i in 1usize..500, j in 1usize..500) {
        prop_assert_eq!(k.eval(i, j).unwrap(), k.eval(j, i).unwrap());
        prop_assert!(k.eval(i, j).unwrap() >= 0.0);
    }

    #[test]
    fn moments_are_linear_and_ordered(c in state(40), d in state(40), a in 0.0f64..5.0) {
        let m = c.len().min(d.len());
        let (c, d) = (&c[..m], &d[..m]);
        let mixed: Vec<f64> = c.iter().zip(d).map(|(x, y)| a * x + y).collect();
        for r in [0.0, 1.0, 2.0, 0.5] {
            let lhs = moment(&mixed, r);
            let rhs = a * moment(c, r) + moment(d, r);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        }
        prop_assert!(moment(c, 0.0) <= moment(c, 1.0) + 1e-12);
        prop_assert!(moment(c, 1.0) <= moment(c, 2.0) + 1e-12);
    }

    #[test]
    fn mass_rate_equals_minus_leak(k in kernel(), c in state(64)) {
        let d = rhs_direct(&k, &c).unwrap();
        let w: Vec<f64> = (1..=c.len()).map(|i| i as f64).collect();
        let mass_rate: f64 = d.iter().zip(&w).map(|(x, i)| x * i).sum();
        let leak = leak_rate(&k, &c).unwrap();
        prop_assert!(leak >= 0.0);
        prop_assert!((leak - leak_bruteforce(&k, &c)).abs() <= 1e-12 * leak.max(1e-300));
        prop_assert!((mass_rate + leak).abs() <= 1e-12 * scale(&d, &w).max(leak));
    }

    #[test]
    fn number_rate_is_minus_collision_count(k in kernel(), c in state(64)) {
        let n = c.len();
        let d = rhs_direct(&k, &c).unwrap();
        let total: f64 = d.iter().sum();
        let mut expected = 0.0;
        for i in 1..n {
            for j in i..=n {
                expected -= phi(&k, i, j) * c[i - 1] * c[j - 1];
            }
        }
        prop_assert!(expected <= 0.0);
        prop_assert!((total - expected).abs() <= 1e-12 * scale(&d, &vec![1.0; n]).max(expected.abs()));
    }

    #[test]
    fn empty_bins_only_gain(k in kernel(), c in state(64), hole in 0usize..64) {
        let mut c = c;
        let h = hole % c.len();
        c[h] = 0.0;
        let d = rhs_direct(&k, &c).unwrap();
        prop_assert!(d[h] >= 0.0);
    }

    #[test]
    fn rhs_is_quadratic(k in kernel(), c in state(32), a in 0.1f64..10.0) {
        let scaled: Vec<f64> = c.iter().map(|x| a * x).collect();
        let d = rhs_direct(&k, &c).unwrap();
        let ds = rhs_direct(&k, &scaled).unwrap();
        let floor = moment(&c, 1.0).powi(2) * a * a;
        for (x, y) in d.iter().zip(&ds) {
            prop_assert!((a * a * x - y).abs() <= 1e-12 * y.abs().max(floor).max(1e-300));
        }
    }

    #[test]
    fn fast_path_matches_direct_and_oracle(k in kernel(), c in state(200)) {
        let direct = rhs_direct(&k, &c).unwrap();
        let (fast, _) = rhs_fast(&k, &c).unwrap();
        let oracle = rhs_bruteforce(&k, &c);
        let floor = moment(&c, 1.0).powi(2).max(1e-300);
        prop_assert!(rel_diff(&direct, &fast, floor) <= 1e-12);
        prop_assert!(rel_diff(&oracle, &direct, floor) <= 1e-10);
    }

    #[test]
    fn moment_identity_holds(
        k in kernel(),
        c in state(128),
        steps in prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..50.0], 128),
        w0 in -5.0f64..5.0,
    ) {
        let w: Vec<f64> = steps[..c.len()].iter().scan(w0, |acc, s| { *acc += s; Some(*acc) }).collect();
        prop_assert!(moment_identity_residual(&k, &c, &w).unwrap() <= 1e-12);
        let abs = moment_identity_residual_with(&k, &c, &w, DifferenceForm::Absolute).unwrap();
        prop_assert!(abs <= 1e-12);
    }
}

#[test]
fn absolute_form_fails_for_decreasing_weights() {
    let k = KernelSpec::sum();
    let c = [1.0, 1.0, 1.0];
    let w = [3.0, 2.0, 1.0];
    assert!(moment_identity_residual(&k, &c, &w).unwrap() <= 1e-14);
    assert!(moment_identity_residual_with(&k, &c, &w, DifferenceForm::Absolute).unwrap() > 1e-3);
}

#[test]
fn identity_hand_value() {
    // w = i, κ = 1, c = (1, 1): both sides equal −1
    let k = KernelSpec::constant(1.0).unwrap();
    assert_eq!(
        moment_identity_residual(&k, &[1.0, 1.0], &[1.0, 2.0]).unwrap(),
        0.0
    );
}
