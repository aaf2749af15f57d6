//! Reference implementations used only by the tests.
//!
//! Nothing here calls into the library's arithmetic: kernel formulas, the right-hand side and
//! the Euler stepper are written out again with plain loops and plain `f64` accumulators.

#![allow(dead_code)]

use safronov::{Family, KernelSpec};

/// Kernel value recomputed from the family parameters.
pub fn phi(kernel: &KernelSpec, i: usize, j: usize) -> f64 {
    let a = i as f64;
    let b = j as f64;
    match kernel.family() {
        Family::Sum => a + b,
        Family::RatioSum => {
            let m = if i < j { a } else { b };
            (a + b) / m
        }
        Family::PowerLaw => (1.0 + a + b).powf(kernel.alpha().unwrap()),
        Family::Product => a * b,
        Family::Constant => kernel.kappa().unwrap(),
        // stored data, not arithmetic
        Family::CustomTable => kernel.rate(i, j),
    }
}

/// Truncated right-hand side from the defining sums, one term at a time.
///
/// `gain(i)` counts monomers stripped onto clusters of size `i-1` by every smaller-or-equal
/// partner; `loss(i)` is clusters of size `i` growing; `strip(i)` is monomers stripped off `i`.
pub fn rhs_bruteforce(kernel: &KernelSpec, c: &[f64]) -> Vec<f64> {
    let n = c.len();
    assert!(n >= 2);
    let mut d = vec![0.0; n];
    for i in 1..=n {
        let mut value = 0.0;
        // gain from size i-1 (not for i = 1)
        if i >= 2 {
            for j in 1..=(i - 1) {
                value += c[i - 2] * (j as f64) * phi(kernel, i - 1, j) * c[j - 1];
            }
        }
        if i < n {
            // growth of size i
            for j in 1..=i {
                value -= c[i - 1] * (j as f64) * phi(kernel, i, j) * c[j - 1];
            }
            // stripping of size i by partners j >= i
            for j in i..=n {
                value -= phi(kernel, i, j) * c[i - 1] * c[j - 1];
            }
        }
        d[i - 1] = value;
    }
    d
}

pub fn leak_bruteforce(kernel: &KernelSpec, c: &[f64]) -> f64 {
    let n = c.len();
    let mut l = 0.0;
    for j in 1..n {
        l += (j as f64) * phi(kernel, n, j) * c[n - 1] * c[j - 1];
    }
    l
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    /// Sample times.
    pub t: Vec<f64>,
    /// State at each sample time.
    pub c: Vec<Vec<f64>>,
    pub dt: f64,
    pub steps: usize,
    /// Richardson estimate of the error of the final state (set by [`euler_richardson`]).
    pub error_estimate: Option<f64>,
}

impl OracleResult {
    pub fn last(&self) -> &[f64] {
        self.c.last().unwrap()
    }
}

/// Forward Euler with a fixed step `dt ≤ 1e-4`, sampled every `sample_every` up to `t_end`.
/// Sample times must be multiples of `dt`.
pub fn euler_reference(
    kernel: &KernelSpec,
    c0: &[f64],
    dt: f64,
    t_end: f64,
    sample_every: f64,
    eps_neg: f64,
) -> Result<OracleResult, String> {
    assert!(dt <= 1e-4, "oracle step must be <= 1e-4");
    let total = (t_end / dt).round() as usize;
    let per_sample = (sample_every / dt).round() as usize;
    assert!(per_sample >= 1);
    let mu0: f64 = c0.iter().sum();
    let floor = -eps_neg * mu0;
    let mut c = c0.to_vec();
    let mut out = OracleResult {
        t: vec![0.0],
        c: vec![c.clone()],
        dt,
        steps: total,
        error_estimate: None,
    };
    for s in 1..=total {
        let d = rhs_bruteforce(kernel, &c);
        for k in 0..c.len() {
            c[k] += dt * d[k];
            if c[k] < floor {
                return Err(format!(
                    "c_{} = {} fell below {} at step {}",
                    k + 1,
                    c[k],
                    floor,
                    s
                ));
            }
        }
        if s % per_sample == 0 || s == total {
            out.t.push(s as f64 * dt);
            out.c.push(c.clone());
        }
    }
    Ok(out)
}

/// Richardson extrapolation of [`euler_reference`] over the grids `dt`, `dt/2`, `dt/4`.
///
/// Returns `2 y(dt/4) − y(dt/2)` (second order) at the sample times `t_end` only. The error
/// estimate is `|R(dt/4) − R(dt/2)| / 3` over the final state, where `R(h) = 2 y(h) − y(2h)`.
pub fn euler_richardson(
    kernel: &KernelSpec,
    c0: &[f64],
    dt: f64,
    t_end: f64,
) -> Result<OracleResult, String> {
    let y1 = euler_reference(kernel, c0, dt, t_end, t_end, 1e-13)?;
    let y2 = euler_reference(kernel, c0, dt / 2.0, t_end, t_end, 1e-13)?;
    let y4 = euler_reference(kernel, c0, dt / 4.0, t_end, t_end, 1e-13)?;
    let a = y1.last();
    let b = y2.last();
    let c = y4.last();
    let mut err: f64 = 0.0;
    let mut extrapolated = vec![0.0; c.len()];
    for k in 0..c.len() {
        let coarse = 2.0 * b[k] - a[k];
        let fine = 2.0 * c[k] - b[k];
        err = err.max((fine - coarse).abs() / 3.0);
        extrapolated[k] = fine;
    }
    Ok(OracleResult {
        t: vec![0.0, t_end],
        c: vec![c0.to_vec(), extrapolated],
        dt: dt / 4.0,
        steps: y4.steps,
        error_estimate: Some(err),
    })
}

/// Max-norm distance.
pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    let mut m: f64 = 0.0;
    for k in 0..a.len() {
        m = m.max((a[k] - b[k]).abs());
    }
    m
}

/// Component-wise relative agreement with denominator `max(|a_i|, floor)`.
pub fn rel_diff(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let mut m: f64 = 0.0;
    for k in 0..a.len() {
        m = m.max((a[k] - b[k]).abs() / a[k].abs().max(floor));
    }
    m
}

/// Kernels with a fast path or a closed form, for parametrized tests.
pub fn builtin_kernels() -> Vec<KernelSpec> {
    vec![
        KernelSpec::ratio_sum(),
        KernelSpec::sum(),
        KernelSpec::power_law(0.0).unwrap(),
        KernelSpec::power_law(0.5).unwrap(),
        KernelSpec::power_law(1.0).unwrap(),
        KernelSpec::product(),
        KernelSpec::constant(1.0).unwrap(),
        KernelSpec::constant(2.5).unwrap(),
    ]
}
