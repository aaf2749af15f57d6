mod common;

use common::*;
use safronov::integrator::{sample_times, step};
use safronov::{
    integrate, InitialCondition, IntegratorOptions, KernelSpec, Method, TruncatedState,
};

fn rk4(dt: f64, t_end: f64) -> IntegratorOptions {
    IntegratorOptions {
        method: Method::Rk4Fixed,
        dt_init: dt,
        t_end,
        sample_every: t_end,
        ..IntegratorOptions::default()
    }
}

fn two_species() -> (KernelSpec, TruncatedState) {
    (
        KernelSpec::constant(1.0).unwrap(),
        TruncatedState::new(0.0, vec![1.0, 0.0]).unwrap(),
    )
}

#[test]
fn zero_state_step_is_identity() {
    let k = KernelSpec::sum();
    let s = TruncatedState::new(0.0, vec![0.0, 0.0]).unwrap();
    let out = step(&k, &s, 0.25, &IntegratorOptions::default()).unwrap();
    assert_eq!(out.state.c, vec![0.0, 0.0]);
    assert_eq!(out.dt_next, 0.25);
    assert_eq!(out.state.t, 0.25);
}

#[test]
fn rk4_step_matches_euler_oracle() {
    let (k, s) = two_species();
    let out = step(&k, &s, 0.1, &rk4(0.1, 0.1)).unwrap();
    let oracle = euler_richardson(&k, &s.c, 1e-6, 0.1).unwrap();
    assert!(oracle.error_estimate.unwrap() < 1e-6);
    let gap = max_diff(&out.state.c, oracle.last());
    assert!(
        gap < 1e-4,
        "rk4 {:?} oracle {:?}",
        out.state.c,
        oracle.last()
    );
}

#[test]
fn rk4_observed_order() {
    let (k, s) = two_species();
    let t_end = 1.0;
    let oracle = euler_richardson(&k, &s.c, 4e-6, t_end).unwrap();
    let errors: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&dt| {
            let tr = safronov::integrator::integrate_from(&k, s.clone(), &rk4(dt, t_end)).unwrap();
            max_diff(&tr.last().c, oracle.last())
        })
        .collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 3.5, "errors {errors:?}");
    }
    assert!(
        oracle.error_estimate.unwrap() < errors[2] / 100.0,
        "{errors:?} {:?}",
        oracle.error_estimate
    );
}

#[test]
fn oversized_step_is_halved() {
    let (k, s) = two_species();
    let out = step(&k, &s, 10.0, &rk4(10.0, 10.0)).unwrap();
    assert!(out.rejected_negative >= 1);
    assert!(out.dt_used < 10.0);
    assert!(out.state.c.iter().all(|&x| x >= 0.0));
}

#[test]
fn non_finite_derivative_is_a_numeric_error() {
    let k = KernelSpec::constant(1e300).unwrap();
    let ic = InitialCondition::explicit(vec![1e10, 1e10]).unwrap();
    let err = integrate(&k, &ic, 2, &IntegratorOptions::default()).unwrap_err();
    assert!(err.is_numeric(), "{err}");
}

#[test]
fn t_end_zero_gives_one_sample() {
    let ic = InitialCondition::monodisperse(1.0).unwrap();
    let opts = IntegratorOptions {
        t_end: 0.0,
        ..IntegratorOptions::default()
    };
    let tr = integrate(&KernelSpec::sum(), &ic, 8, &opts).unwrap();
    assert_eq!(tr.samples.len(), 1);
    assert_eq!(tr.samples[0].c, ic.init(8).unwrap().c);
}

#[test]
fn samples_hit_requested_times() {
    assert_eq!(sample_times(0.3, 0.1).len(), 3);
    let ic = InitialCondition::monodisperse(1.0).unwrap();
    let opts = IntegratorOptions {
        t_end: 0.5,
        sample_every: 0.125,
        ..IntegratorOptions::default()
    };
    let tr = integrate(&KernelSpec::sum(), &ic, 16, &opts).unwrap();
    let t: Vec<f64> = tr.samples.iter().map(|s| s.t).collect();
    assert_eq!(t, vec![0.0, 0.125, 0.25, 0.375, 0.5]);
}

#[test]
fn constant_kernel_particle_count_drops() {
    let k = KernelSpec::constant(1.0).unwrap();
    let ic = InitialCondition::monodisperse(1.0).unwrap();
    let tr = integrate(&k, &ic, 64, &IntegratorOptions::default()).unwrap();
    let mu0_end = tr.last().mu0;
    assert!(mu0_end < 1.0);
    let mut c0 = vec![0.0; 64];
    c0[0] = 1.0;
    let oracle = euler_reference(&k, &c0, 1e-5, 1.0, 1.0, 1e-13).unwrap();
    let oracle_mu0: f64 = oracle.last().iter().sum();
    assert!(
        (mu0_end - oracle_mu0).abs() < 1e-4,
        "{mu0_end} vs {oracle_mu0}"
    );
}

#[test]
fn sum_kernel_mass_deficit_matches_oracle_leak() {
    let k = KernelSpec::sum();
    let ic = InitialCondition::monodisperse(1.0).unwrap();
    let n = 32;
    let tr = integrate(&k, &ic, n, &IntegratorOptions::default()).unwrap();
    let last = tr.last();
    assert!(last.mu1 <= 1.0 + 1e-15);
    // trapezoid on the adaptive grid: within the general mass-balance tolerance
    assert!((1.0 - last.mu1 - last.cumulative_leak).abs() <= 1e-6);

    // and within 1e-8 once the grid is fine
    let fine = IntegratorOptions {
        method: Method::Rk4Fixed,
        dt_init: 1e-3,
        ..IntegratorOptions::default()
    };
    let tr_fine = integrate(&k, &ic, n, &fine).unwrap();
    let f = tr_fine.last();
    assert!(
        (1.0 - f.mu1 - f.cumulative_leak).abs() <= 1e-8,
        "{} {}",
        1.0 - f.mu1,
        f.cumulative_leak
    );

    let mut c0 = vec![0.0; n];
    c0[0] = 1.0;
    let dt = 1e-5;
    let oracle = euler_reference(&k, &c0, dt, 1.0, dt, 1e-13).unwrap();
    let mut leak = 0.0;
    for w in oracle.c.windows(2) {
        leak += 0.5 * dt * (leak_bruteforce(&k, &w[0]) + leak_bruteforce(&k, &w[1]));
    }
    let rel = (last.deficit - leak).abs() / leak;
    assert!(rel < 1e-2, "integrator {} oracle {leak}", last.deficit);
}

#[test]
fn adaptive_run_matches_oracle_trajectory() {
    let k = KernelSpec::ratio_sum();
    let ic = InitialCondition::monodisperse(1.0).unwrap();
    let opts = IntegratorOptions {
        t_end: 0.5,
        sample_every: 0.1,
        ..IntegratorOptions::default()
    };
    let tr = integrate(&k, &ic, 12, &opts).unwrap();
    let oracle = euler_richardson(&k, &ic.init(12).unwrap().c, 1e-5, 0.5).unwrap();
    assert!(max_diff(&tr.last().c, oracle.last()) < 1e-6);
}
