use safronov::diagnostics::{
    bv_total, check_trajectory, check_trajectory_with_kernel, gamma_bound_check, q_bound,
    q_constants, Check, GammaBoundOutcome,
};
use safronov::{
    integrate, BoundClass, ConvexWeight, InitialCondition, IntegratorOptions, KernelSpec,
    Trajectory, Verdict,
};

fn monodisperse_run(kernel: &KernelSpec, n: usize) -> Trajectory {
    let ic = InitialCondition::monodisperse(1.0).unwrap();
    integrate(kernel, &ic, n, &IntegratorOptions::default()).unwrap()
}

#[test]
fn zero_state_passes_everything() {
    let ic = InitialCondition::explicit(vec![0.0; 6]).unwrap();
    let k = KernelSpec::sum();
    let tr = integrate(&k, &ic, 6, &IntegratorOptions::default()).unwrap();
    let report = check_trajectory_with_kernel(&tr, &k, &Check::ALL).unwrap();
    assert!(report.all_pass(), "{}", report.to_csv());
    for i in 1..=6 {
        let bv = bv_total(&tr, &k, i).unwrap();
        assert_eq!(bv.value, 0.0);
        assert_eq!(bv.verdict, Verdict::Pass);
    }
    let gamma = ConvexWeight::quadratic().unwrap();
    let out = gamma_bound_check(&tr, &k, &gamma, BoundClass::Sum).unwrap();
    let check = out.checked().unwrap();
    assert_eq!(check.sup_weighted, 0.0);
    assert!(check.passed());
}

#[test]
fn sum_kernel_n32_basic_checks_pass() {
    let tr = monodisperse_run(&KernelSpec::sum(), 32);
    let report = check_trajectory(&tr, &Check::BASIC);
    assert!(report.all_pass(), "{}", report.to_csv());
}

#[test]
fn corrupted_mass_is_caught() {
    let mut tr = monodisperse_run(&KernelSpec::sum(), 32);
    let k = tr.samples.len() / 2;
    tr.samples[k].mu1 *= 1.0 + 1e-6;
    let report = check_trajectory(&tr, &[Check::MonotoneMu1]);
    assert!(!report.all_pass());
    assert_eq!(report.get("monotone_mu1").unwrap().verdict, Verdict::Fail);
}

#[test]
fn corrupted_count_is_caught() {
    let mut tr = monodisperse_run(&KernelSpec::sum(), 16);
    tr.samples[3].mu0 = tr.samples[2].mu0 + 1e-6;
    assert!(!check_trajectory(&tr, &[Check::MonotoneMu0]).all_pass());
}

#[test]
fn variation_bounds_on_component_two() {
    let ratio = monodisperse_run(&KernelSpec::ratio_sum(), 64);
    let bv = bv_total(&ratio, &KernelSpec::ratio_sum(), 2).unwrap();
    assert_eq!(bv.bound, Some(6.0));
    assert!(bv.value <= 6.0 && bv.value > 0.0);

    let sum = monodisperse_run(&KernelSpec::sum(), 64);
    let bv = bv_total(&sum, &KernelSpec::sum(), 2).unwrap();
    assert_eq!(bv.bound, Some(6.0));
    assert!(bv.value <= 6.0 && bv.value > 0.0);
}

#[test]
fn variation_needs_a_valid_index_and_steps() {
    let k = KernelSpec::sum();
    let tr = monodisperse_run(&k, 8);
    assert!(bv_total(&tr, &k, 0).is_err());
    assert!(bv_total(&tr, &k, 9).is_err());
    let ic = InitialCondition::monodisperse(1.0).unwrap();
    let opts = IntegratorOptions {
        record_steps: false,
        ..IntegratorOptions::default()
    };
    let bare = integrate(&k, &ic, 8, &opts).unwrap();
    assert!(bv_total(&bare, &k, 2).is_err());
}

#[test]
fn product_kernel_has_no_variation_bound() {
    let k = KernelSpec::product();
    let tr = monodisperse_run(&k, 16);
    assert_eq!(bv_total(&tr, &k, 2).unwrap().verdict, Verdict::Skipped);
    let g = ConvexWeight::build(&tr.initial().c, 32).unwrap();
    assert_eq!(
        gamma_bound_check(&tr, &k, &g, k.bound_class()).unwrap(),
        GammaBoundOutcome::Skipped
    );
}

#[test]
fn linear_gamma_ratio_constants() {
    let g = ConvexWeight::linear(1.0).unwrap();
    let (q1, q2) = q_constants(BoundClass::Ratio, g.at(1), 1.0, 1.0).unwrap();
    assert_eq!((q1, q2), (8.0, 4.0));
    let expected = 1.0 + 2.0 * (4f64.exp() - 1.0);
    assert!((q_bound(1.0, q1, q2, 1.0) - expected).abs() < 1e-12);

    let k = KernelSpec::ratio_sum();
    let tr = monodisperse_run(&k, 32);
    let out = gamma_bound_check(&tr, &k, &g, BoundClass::Ratio).unwrap();
    let check = out.checked().unwrap();
    assert!((check.q_bound - expected).abs() < 1e-12);
    assert!(check.passed());
}

#[test]
fn built_gamma_bound_for_each_class() {
    for k in [
        KernelSpec::ratio_sum(),
        KernelSpec::sum(),
        KernelSpec::power_law(0.5).unwrap(),
    ] {
        let tr = monodisperse_run(&k, 64);
        let g = ConvexWeight::build(&tr.initial().c, 65).unwrap();
        let out = gamma_bound_check(&tr, &k, &g, k.bound_class()).unwrap();
        let check = out.checked().unwrap();
        assert!(check.sup_weighted <= check.q_bound);
        assert!(check.integrated_dissolution.unwrap() <= check.q_bound);
    }
}
