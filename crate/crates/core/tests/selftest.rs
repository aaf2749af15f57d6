use safronov::experiments::{selftest, selftest_with};
use safronov::rhs::rhs_direct;
use safronov::{KernelSpec, Result};

fn flipped(kernel: &KernelSpec, c: &[f64]) -> Result<Vec<f64>> {
    let mut d = rhs_direct(kernel, c)?;
    // sign error in the loss of the second bin
    if d.len() > 2 {
        let n = c.len();
        let loss: f64 = (2..=n).map(|j| kernel.rate(2, j) * c[1] * c[j - 1]).sum();
        d[1] += 2.0 * loss;
    }
    Ok(d)
}

#[test]
fn verdicts_are_stable_across_seeds() {
    for seed in 0..10 {
        let report = selftest(seed).unwrap();
        let failures: Vec<_> = report.failures().map(|e| e.id.clone()).collect();
        assert!(failures.is_empty(), "seed {seed}: {failures:?}");
    }
}

#[test]
fn same_seed_same_report() {
    assert_eq!(selftest(5).unwrap().to_csv(), selftest(5).unwrap().to_csv());
}

#[test]
fn sign_flip_fails_the_identity_battery() {
    let report = selftest_with(0, flipped).unwrap();
    let failed: Vec<&str> = report.failures().map(|e| e.id.as_str()).collect();
    assert!(failed.contains(&"moment_identity"), "{failed:?}");
    assert!(failed.contains(&"mass_rate_identity"), "{failed:?}");
}
