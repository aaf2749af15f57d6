//! Numerical checks of the truncated system's moment identities and a-priori bounds.
//!
//! Identities (exact for every non-negative `c`):
//!
//! ```text
//! d/dt Σ w_i c_i = Σ_{i<n} (w_{i+1} − w_i) Σ_{j≤i} j φ(i,j) c_i c_j − Σ_{i<n} Σ_{j≥i} w_i φ(i,j) c_i c_j
//! d/dt Σ i c_i   = −c_n Σ_{j<n} j φ(n,j) c_j
//! ```
//!
//! Bounds along trajectories on `[0, T]`, with `μ₀ = μ₀(0)` and `‖c₀‖ = μ₁(0)`:
//! total variation `∫|dc_i/dt|` per growth class, and `Σ γ(i) c_i(t) ≤ Q_b(T)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gamma::ConvexWeight;
use crate::integrator::Trajectory;
use crate::kernel::{BoundClass, KernelSpec};
use crate::report::{CheckEntry, DiagnosticsReport, Verdict};
use crate::rhs;
use crate::sum::{self, CompensatedSum};

/// How the weight increments enter the moment identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DifferenceForm {
    /// `w_{i+1} − w_i`; the identity holds for every real `w`.
    Signed,
    /// `|w_{i+1} − w_i|`; agrees with `Signed` only for non-decreasing `w`.
    Absolute,
}

/// Right-hand side of the weighted-moment identity, coded as plain double loops.
pub fn moment_identity_rhs(
    kernel: &KernelSpec,
    c: &[f64],
    w: &[f64],
    form: DifferenceForm,
) -> Result<f64> {
    let n = c.len();
    if n < 2 {
        return Err(Error::Domain(format!("need n >= 2, got {n}")));
    }
    if w.len() < n {
        return Err(Error::Domain(format!(
            "weight sequence has {} entries, state has {n}",
            w.len()
        )));
    }
    let mut acc = CompensatedSum::new();
    for i in 1..n {
        let diff = match form {
            DifferenceForm::Signed => w[i] - w[i - 1],
            DifferenceForm::Absolute => (w[i] - w[i - 1]).abs(),
        };
        for j in 1..=i {
            acc.add(diff * j as f64 * kernel.rate(i, j) * c[i - 1] * c[j - 1]);
        }
        for j in i..=n {
            acc.add(-w[i - 1] * kernel.rate(i, j) * c[i - 1] * c[j - 1]);
        }
    }
    Ok(acc.value())
}

/// `|LHS − RHS| / scale` where `LHS = Σ w_i (dc_i/dt)` from [`rhs::rhs_direct`], `RHS` is the
/// signed-difference form of the identity and `scale = max(Σ |w_i dc_i/dt|, |RHS|)`, the size
/// of the summands (both sides may vanish while the terms do not).
pub fn moment_identity_residual(kernel: &KernelSpec, c: &[f64], w: &[f64]) -> Result<f64> {
    moment_identity_residual_with(kernel, c, w, DifferenceForm::Signed)
}

pub fn moment_identity_residual_with(
    kernel: &KernelSpec,
    c: &[f64],
    w: &[f64],
    form: DifferenceForm,
) -> Result<f64> {
    let rhs_value = moment_identity_rhs(kernel, c, w, form)?;
    let d = rhs::rhs_direct(kernel, c)?;
    Ok(weighted_residual(&d, w, rhs_value))
}

/// Relative residual of `Σ w_i d_i` against `expected`, scaled as in
/// [`moment_identity_residual`].
pub fn weighted_residual(d: &[f64], w: &[f64], expected: f64) -> f64 {
    let lhs = sum::sum(d.iter().zip(w).map(|(di, wi)| wi * di));
    let scale = sum::sum(d.iter().zip(w).map(|(di, wi)| (wi * di).abs()))
        .max(expected.abs())
        .max(f64::MIN_POSITIVE);
    (lhs - expected).abs() / scale
}

/// Trajectory-level checks selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Check {
    MonotoneMu0,
    MonotoneMu1,
    MassBalance,
    Positivity,
    ClampedMass,
    /// Variation bound for every component.
    Bv,
    /// `Σ γ(i) c_i ≤ Q_b(T)` with a weight built from the initial state.
    GammaBound,
}

impl Check {
    pub const ALL: [Check; 7] = [
        Check::MonotoneMu0,
        Check::MonotoneMu1,
        Check::MassBalance,
        Check::Positivity,
        Check::ClampedMass,
        Check::Bv,
        Check::GammaBound,
    ];

    /// Checks that need only the sampled moments.
    pub const BASIC: [Check; 5] = [
        Check::MonotoneMu0,
        Check::MonotoneMu1,
        Check::MassBalance,
        Check::Positivity,
        Check::ClampedMass,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::MonotoneMu0 => "monotone_mu0",
            Check::MonotoneMu1 => "monotone_mu1",
            Check::MassBalance => "mass_balance",
            Check::Positivity => "positivity",
            Check::ClampedMass => "clamped_mass",
            Check::Bv => "bv",
            Check::GammaBound => "gamma_bound",
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Check {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::validation("checks", format!("unknown check {s:?}")))
    }
}

/// Relative slack for sample-to-sample monotonicity of `μ₀` and `μ₁`.
pub const MONOTONE_SLACK: f64 = 1e-10;
/// Clamped mass budget relative to `μ₁(0)`.
pub const CLAMP_BUDGET: f64 = 1e-10;
/// Relative tolerance for the variation and weighted-moment bounds.
pub const BOUND_REL_TOL: f64 = 1e-8;

/// `max(1e-8, 1e-6 μ₁(0))`.
pub fn mass_balance_tolerance(mu1_initial: f64) -> f64 {
    1e-8f64.max(1e-6 * mu1_initial)
}

fn scale(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        1.0
    }
}

fn max_increase(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let next = values.clone().skip(1);
    values.zip(next).map(|(a, b)| b - a).fold(0.0, f64::max)
}

/// Runs the moment-level checks on `trajectory`. `Bv` and `GammaBound` need the kernel and
/// are handled by [`check_trajectory_with_kernel`]; here they are reported as skipped.
pub fn check_trajectory(trajectory: &Trajectory, checks: &[Check]) -> DiagnosticsReport {
    let first = trajectory.initial();
    let mu0_scale = scale(first.mu0);
    let mu1_scale = scale(first.mu1);
    let mut report = DiagnosticsReport::new();
    for &check in checks {
        let entry = match check {
            Check::MonotoneMu0 => {
                let inc = max_increase(trajectory.samples.iter().map(|s| s.mu0));
                CheckEntry::residual(check.name(), inc / mu0_scale, MONOTONE_SLACK)
            }
            Check::MonotoneMu1 => {
                let inc = max_increase(trajectory.samples.iter().map(|s| s.mu1));
                CheckEntry::residual(check.name(), inc / mu1_scale, MONOTONE_SLACK)
            }
            Check::MassBalance => {
                let worst = trajectory
                    .samples
                    .iter()
                    .map(|s| (first.mu1 - s.mu1 - s.cumulative_leak).abs())
                    .fold(0.0, f64::max);
                CheckEntry::residual(check.name(), worst, mass_balance_tolerance(first.mu1))
            }
            Check::Positivity => {
                let sample_min = trajectory
                    .samples
                    .iter()
                    .map(|s| s.min_c)
                    .fold(f64::INFINITY, f64::min);
                let min = sample_min.min(trajectory.stats.min_concentration);
                CheckEntry::residual(
                    check.name(),
                    (-min).max(0.0),
                    trajectory.options.eps_neg * first.mu0,
                )
            }
            Check::ClampedMass => CheckEntry::residual(
                check.name(),
                trajectory.stats.clamped_mass,
                CLAMP_BUDGET * first.mu1,
            ),
            Check::Bv | Check::GammaBound => CheckEntry::skipped(check.name()),
        };
        report.push(entry);
    }
    report
}

/// [`check_trajectory`] plus the kernel-dependent bound checks.
pub fn check_trajectory_with_kernel(
    trajectory: &Trajectory,
    kernel: &KernelSpec,
    checks: &[Check],
) -> Result<DiagnosticsReport> {
    let basic: Vec<Check> = checks
        .iter()
        .copied()
        .filter(|c| !matches!(c, Check::Bv | Check::GammaBound))
        .collect();
    let mut report = check_trajectory(trajectory, &basic);
    if checks.contains(&Check::Bv) {
        let mut worst: Option<(usize, BvCheck)> = None;
        for i in 1..=trajectory.n {
            let bv = bv_total(trajectory, kernel, i)?;
            report_bv_component(&mut worst, i, bv);
        }
        match worst {
            Some((i, bv)) if bv.bound.is_some() => {
                let bound = bv.bound.unwrap();
                report.push(CheckEntry::bounded(
                    format!("bv_worst_i{i}"),
                    bv.value,
                    bound,
                    BOUND_REL_TOL * bound,
                ));
            }
            _ => report.push(CheckEntry::skipped("bv")),
        }
    }
    if checks.contains(&Check::GammaBound) {
        let class = kernel.bound_class();
        let c0 = &trajectory.initial().c;
        let gamma = ConvexWeight::build(c0, trajectory.n + 1)?;
        let res = gamma_bound_check(trajectory, kernel, &gamma, class)?;
        report.extend(res.report());
    }
    Ok(report)
}

// keeps the component whose value/bound ratio is largest
fn report_bv_component(worst: &mut Option<(usize, BvCheck)>, i: usize, bv: BvCheck) {
    let ratio = |b: &BvCheck| match b.bound {
        Some(bound) if bound > 0.0 => b.value / bound,
        Some(_) => {
            if b.value > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        }
        None => f64::NEG_INFINITY,
    };
    let replace = match worst {
        None => true,
        Some((_, w)) => ratio(&bv) > ratio(w),
    };
    if replace {
        *worst = Some((i, bv));
    }
}

/// Total variation of one component against its class bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvCheck {
    /// Trapezoidal `∫₀ᵀ |dc_i/dt| dt` over accepted step points.
    pub value: f64,
    /// `None` when the kernel has no known class.
    pub bound: Option<f64>,
    pub verdict: Verdict,
}

/// Variation bound for component `i` of a trajectory on `[0, T]`:
///
/// ```text
///                 interior                          i = 1                          i = n
/// ratio   6 μ₀‖c₀‖T                           (2‖c₀‖² + μ₀‖c₀‖)T              2‖c₀‖μ₀T
/// sum     (4‖c₀‖² + 2μ₀‖c₀‖)T                 (2‖c₀‖² + μ₀‖c₀‖)T              2‖c₀‖²T
/// power   (4μ₀‖c₀‖ + 4‖c₀‖² + μ₀²)T           (5/2‖c₀‖² + 2‖c₀‖μ₀)T           2‖c₀‖²T
/// ```
pub fn bv_bound(class: BoundClass, i: usize, n: usize, mu0: f64, norm: f64, t: f64) -> Option<f64> {
    let per_time = match (class, i) {
        (BoundClass::Other, _) => return None,
        (BoundClass::Ratio | BoundClass::Sum, 1) => 2.0 * norm * norm + mu0 * norm,
        (BoundClass::Power, 1) => 2.5 * norm * norm + 2.0 * norm * mu0,
        (BoundClass::Ratio, i) if i == n => 2.0 * norm * mu0,
        (BoundClass::Sum | BoundClass::Power, i) if i == n => 2.0 * norm * norm,
        (BoundClass::Ratio, _) => 6.0 * mu0 * norm,
        (BoundClass::Sum, _) => 4.0 * norm * norm + 2.0 * mu0 * norm,
        (BoundClass::Power, _) => 4.0 * mu0 * norm + 4.0 * norm * norm + mu0 * mu0,
    };
    Some(per_time * t)
}

fn require_steps(trajectory: &Trajectory) -> Result<()> {
    if trajectory.steps.is_empty() {
        Err(Error::Domain(
            "trajectory has no step record; integrate with record_steps = true".into(),
        ))
    } else {
        Ok(())
    }
}

/// Trapezoidal `∫₀ᵀ |dc_i/dt| dt` and its class bound.
pub fn bv_total(trajectory: &Trajectory, kernel: &KernelSpec, i: usize) -> Result<BvCheck> {
    if i == 0 || i > trajectory.n {
        return Err(Error::Domain(format!(
            "component index {i} outside 1..={}",
            trajectory.n
        )));
    }
    require_steps(trajectory)?;
    let mut acc = CompensatedSum::new();
    for w in trajectory.steps.windows(2) {
        let h = w[1].t - w[0].t;
        acc.add(0.5 * h * (w[0].dcdt[i - 1].abs() + w[1].dcdt[i - 1].abs()));
    }
    let value = acc.value();
    let first = trajectory.initial();
    let t = trajectory.last().t;
    let bound = bv_bound(
        kernel.bound_class(),
        i,
        trajectory.n,
        first.mu0,
        first.mu1,
        t,
    );
    let verdict = match bound {
        None => Verdict::Skipped,
        Some(b) if value <= b * (1.0 + BOUND_REL_TOL) => Verdict::Pass,
        Some(_) => Verdict::Fail,
    };
    Ok(BvCheck {
        value,
        bound,
        verdict,
    })
}

/// Growth constants `(Q_{b,1}, Q_{b,2})` for the weighted-moment bound.
pub fn q_constants(class: BoundClass, gamma1: f64, mu0: f64, norm: f64) -> Option<(f64, f64)> {
    match class {
        BoundClass::Ratio => Some((2.0 * gamma1 * mu0 * (mu0 + 3.0 * norm), 4.0 * mu0)),
        BoundClass::Sum => Some((2.0 * gamma1 * norm * (mu0 + 3.0 * norm), 4.0 * norm)),
        BoundClass::Power => Some((gamma1 * norm * (9.0 * norm + 2.0 * mu0), 6.0 * norm)),
        BoundClass::Other => None,
    }
}

/// `Q_b(T) = Σ γ(i) c_i⁰ + (Q_{b,1}/Q_{b,2}) (e^{T Q_{b,2}} − 1)`, with the `Q_{b,2} → 0`
/// limit `Q_{b,1} T`.
pub fn q_bound(weighted_initial: f64, q1: f64, q2: f64, t: f64) -> f64 {
    let growth = if q2 == 0.0 {
        q1 * t
    } else {
        q1 / q2 * (t * q2).exp_m1()
    };
    weighted_initial + growth
}

/// Outcome of [`gamma_bound_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct GammaBoundCheck {
    pub class: BoundClass,
    /// `sup_t Σ γ(i) c_i(t)` over accepted step points (samples if steps were not recorded).
    pub sup_weighted: f64,
    /// Trapezoidal `∫₀ᵀ Σ_{i<n} Σ_{j≥i} γ(i) φ(i,j) c_i c_j dt`; `None` without a step record.
    pub integrated_dissolution: Option<f64>,
    pub q1: f64,
    pub q2: f64,
    pub q_bound: f64,
}

impl GammaBoundCheck {
    pub fn report(&self) -> DiagnosticsReport {
        let tol = BOUND_REL_TOL * self.q_bound;
        let mut r = DiagnosticsReport::new();
        r.push(CheckEntry::bounded(
            "gamma_sup_weighted",
            self.sup_weighted,
            self.q_bound,
            tol,
        ));
        match self.integrated_dissolution {
            Some(v) => r.push(CheckEntry::bounded(
                "gamma_integrated_dissolution",
                v,
                self.q_bound,
                tol,
            )),
            None => r.push(CheckEntry::skipped("gamma_integrated_dissolution")),
        }
        r
    }

    pub fn passed(&self) -> bool {
        self.report().all_pass()
    }
}

fn weighted(gamma: &ConvexWeight, c: &[f64]) -> f64 {
    sum::sum(c.iter().enumerate().map(|(k, x)| gamma.at(k + 1) * x))
}

fn weighted_dissolution(kernel: &KernelSpec, gamma: &ConvexWeight, c: &[f64]) -> f64 {
    let n = c.len();
    let mut acc = CompensatedSum::new();
    for i in 1..n {
        let ci = c[i - 1];
        if ci == 0.0 {
            continue;
        }
        let g = gamma.at(i);
        for j in i..=n {
            acc.add(g * kernel.rate(i, j) * ci * c[j - 1]);
        }
    }
    acc.value()
}

/// Evaluates `Σ γ(i) c_i(t) ≤ Q_b(T)` and the time-integrated dissolution bound.
/// Skipped when `class` is [`BoundClass::Other`].
pub fn gamma_bound_check(
    trajectory: &Trajectory,
    kernel: &KernelSpec,
    gamma: &ConvexWeight,
    class: BoundClass,
) -> Result<GammaBoundOutcome> {
    let first = trajectory.initial();
    let Some((q1, q2)) = q_constants(class, gamma.at(1), first.mu0, first.mu1) else {
        return Ok(GammaBoundOutcome::Skipped);
    };
    let t = trajectory.last().t;
    let q = q_bound(weighted(gamma, &first.c), q1, q2, t);
    let (sup_weighted, integrated) = if trajectory.steps.is_empty() {
        let sup = trajectory
            .samples
            .iter()
            .map(|s| weighted(gamma, &s.c))
            .fold(0.0, f64::max);
        (sup, None)
    } else {
        let sup = trajectory
            .steps
            .iter()
            .map(|s| weighted(gamma, &s.c))
            .fold(0.0, f64::max);
        let rates: Vec<f64> = trajectory
            .steps
            .iter()
            .map(|s| weighted_dissolution(kernel, gamma, &s.c))
            .collect();
        let mut acc = CompensatedSum::new();
        for (w, r) in trajectory.steps.windows(2).zip(rates.windows(2)) {
            acc.add(0.5 * (w[1].t - w[0].t) * (r[0] + r[1]));
        }
        (sup, Some(acc.value()))
    };
    Ok(GammaBoundOutcome::Checked(GammaBoundCheck {
        class,
        sup_weighted,
        integrated_dissolution: integrated,
        q1,
        q2,
        q_bound: q,
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub enum GammaBoundOutcome {
    Checked(GammaBoundCheck),
    /// The kernel has no known growth class.
    Skipped,
}

impl GammaBoundOutcome {
    pub fn report(&self) -> DiagnosticsReport {
        match self {
            GammaBoundOutcome::Checked(c) => c.report(),
            GammaBoundOutcome::Skipped => {
                let mut r = DiagnosticsReport::new();
                r.push(CheckEntry::skipped("gamma_sup_weighted"));
                r.push(CheckEntry::skipped("gamma_integrated_dissolution"));
                r
            }
        }
    }

    pub fn checked(&self) -> Option<&GammaBoundCheck> {
        match self {
            GammaBoundOutcome::Checked(c) => Some(c),
            GammaBoundOutcome::Skipped => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_weights_give_number_rate() {
        let k = KernelSpec::sum();
        let c = [0.4, 0.3, 0.2, 0.1];
        let w = [1.0; 4];
        assert!(moment_identity_residual(&k, &c, &w).unwrap() <= 1e-13);
        let rhs = moment_identity_rhs(&k, &c, &w, DifferenceForm::Signed).unwrap();
        let mut direct = 0.0;
        for i in 1..4 {
            for j in i..=4 {
                direct -= k.rate(i, j) * c[i - 1] * c[j - 1];
            }
        }
        assert!((rhs - direct).abs() < 1e-15);
    }

    #[test]
    fn first_moment_hand_values() {
        // LHS = 1·(−3) + 2·1 = −1; RHS = 1·φ11 − (φ11 + φ12) = −1
        let k = KernelSpec::constant(1.0).unwrap();
        let c = [1.0, 1.0];
        let w = [1.0, 2.0];
        let rhs = moment_identity_rhs(&k, &c, &w, DifferenceForm::Signed).unwrap();
        assert_eq!(rhs, -1.0);
        assert_eq!(moment_identity_residual(&k, &c, &w).unwrap(), 0.0);
    }

    #[test]
    fn absolute_form_fails_for_decreasing_weights() {
        let k = KernelSpec::sum();
        let c = [0.5, 0.4, 0.3];
        let w = [3.0, 2.0, 1.0];
        assert!(moment_identity_residual(&k, &c, &w).unwrap() < 1e-14);
        let abs = moment_identity_residual_with(&k, &c, &w, DifferenceForm::Absolute).unwrap();
        assert!(abs > 1e-3);
    }

    #[test]
    fn short_weights_are_rejected() {
        let k = KernelSpec::sum();
        assert!(moment_identity_residual(&k, &[1.0, 1.0, 1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn paper_constant_example() {
        // γ(r) = r, monodisperse unit mass, ratio class, T = 1: Q_{1,1} = 8, Q_{1,2} = 4
        let (q1, q2) = q_constants(BoundClass::Ratio, 1.0, 1.0, 1.0).unwrap();
        assert_eq!((q1, q2), (8.0, 4.0));
        let q = q_bound(1.0, q1, q2, 1.0);
        assert!((q - (1.0 + 2.0 * (4f64.exp() - 1.0))).abs() < 1e-12);
        assert_eq!(q_bound(0.0, 0.0, 0.0, 1.0), 0.0);
        assert!(q_constants(BoundClass::Other, 1.0, 1.0, 1.0).is_none());
    }

    #[test]
    fn bv_bound_table() {
        let b = |class, i| bv_bound(class, i, 64, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(b(BoundClass::Ratio, 2), 6.0);
        assert_eq!(b(BoundClass::Sum, 2), 6.0);
        assert_eq!(b(BoundClass::Power, 2), 9.0);
        assert_eq!(b(BoundClass::Ratio, 1), 3.0);
        assert_eq!(b(BoundClass::Power, 1), 4.5);
        assert_eq!(b(BoundClass::Ratio, 64), 2.0);
        assert_eq!(b(BoundClass::Sum, 64), 2.0);
        assert!(bv_bound(BoundClass::Other, 2, 64, 1.0, 1.0, 1.0).is_none());
        assert_eq!(
            bv_bound(BoundClass::Sum, 5, 64, 1.0, 2.0, 0.5).unwrap(),
            (16.0 + 4.0) * 0.5
        );
    }

    #[test]
    fn check_names_round_trip() {
        for c in Check::ALL {
            assert_eq!(c.name().parse::<Check>().unwrap(), c);
        }
        assert!("nope".parse::<Check>().is_err());
    }
}
