//! Time stepping for the truncated system.
//!
//! Two explicit schemes: classical RK4 with a fixed step, and the Dormand–Prince 5(4)
//! embedded pair with error-per-step control. Both reject steps that push a component
//! below `-eps_neg · μ₀(0)` and retry with half the step; micro-negatives above that floor
//! are clamped to zero after acceptance and the clamped mass is accounted for.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::rhs::{self, RhsPath};
use crate::state::{moment, InitialCondition, TruncatedState};
use crate::sum::CompensatedSum;

/// Consecutive negativity halvings allowed before giving up.
pub const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rk4Fixed,
    Rk45Adaptive,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Rk4Fixed => "rk4-fixed",
            Method::Rk45Adaptive => "rk45-adaptive",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4-fixed" => Ok(Method::Rk4Fixed),
            "rk45-adaptive" => Ok(Method::Rk45Adaptive),
            other => Err(Error::validation(
                "method",
                format!("unknown method {other:?} (expected rk4-fixed or rk45-adaptive)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorOptions {
    pub method: Method,
    pub dt_init: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub eps_neg: f64,
    pub t_end: f64,
    pub sample_every: f64,
    /// Keep the state and derivative at every accepted step. Needed for the
    /// variation and weighted-moment integrals in `diagnostics`.
    pub record_steps: bool,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            method: Method::Rk45Adaptive,
            dt_init: 1e-3,
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            eps_neg: 1e-13,
            t_end: 1.0,
            sample_every: 0.1,
            record_steps: true,
        }
    }
}

impl IntegratorOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::validation(
                    name,
                    format!("{v} must be positive and finite"),
                ))
            }
        };
        positive("dt_init", self.dt_init)?;
        positive("rel_tol", self.rel_tol)?;
        positive("abs_tol", self.abs_tol)?;
        positive("sample_every", self.sample_every)?;
        if !(self.eps_neg.is_finite() && self.eps_neg >= 0.0) {
            return Err(Error::validation(
                "eps_neg",
                format!("{} must be non-negative and finite", self.eps_neg),
            ));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::validation(
                "t_end",
                format!("{} must be non-negative and finite", self.t_end),
            ));
        }
        if self.t_end > 0.0 && self.dt_init > self.t_end {
            return Err(Error::validation(
                "dt_init",
                format!("{} exceeds t_end = {}", self.dt_init, self.t_end),
            ));
        }
        Ok(())
    }
}

/// Result of one accepted step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: TruncatedState,
    /// Derivative at the accepted (clamped) state.
    pub dcdt: Vec<f64>,
    pub dt_used: f64,
    pub dt_next: f64,
    pub rejected_error: usize,
    pub rejected_negative: usize,
    /// Smallest component of the accepted candidate before clamping.
    pub min_before_clamp: f64,
    /// `Σ i |c_i|` over the clamped micro-negative components.
    pub clamped_mass: f64,
    /// Mass removed by the step as the scheme itself sees it: `h Σ_s b_s L(Y_s)` over the
    /// stage values `Y_s`. Runge–Kutta methods preserve linear invariants, so before
    /// clamping this equals `μ₁(y) − μ₁(y_new)` exactly, without the cancellation.
    pub stage_leak: f64,
}

// Dormand–Prince 5(4)
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Reusable stepping workspace bound to one kernel and option set.
pub struct Stepper<'a> {
    kernel: &'a KernelSpec,
    options: &'a IntegratorOptions,
    neg_floor: f64,
    stages: Vec<Vec<f64>>,
    stage_leaks: [f64; 7],
    scratch: Vec<f64>,
    fast_path: bool,
}

impl<'a> Stepper<'a> {
    /// `mu0_reference` scales the negativity floor, normally `μ₀(0)` of the run.
    pub fn new(
        kernel: &'a KernelSpec,
        options: &'a IntegratorOptions,
        n: usize,
        mu0_reference: f64,
    ) -> Self {
        Stepper {
            kernel,
            options,
            neg_floor: options.eps_neg * mu0_reference,
            stages: vec![vec![0.0; n]; 7],
            stage_leaks: [0.0; 7],
            scratch: vec![0.0; n],
            fast_path: rhs::has_fast_path(kernel),
        }
    }

    pub fn rhs_path(&self) -> RhsPath {
        if self.fast_path {
            RhsPath::Fast
        } else {
            RhsPath::Direct
        }
    }

    fn eval(&self, t: f64, c: &[f64], out: &mut [f64]) -> Result<()> {
        rhs::rhs_into(self.kernel, c, out)?;
        if let Some(k) = out.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                component: k + 1,
                t,
            });
        }
        Ok(())
    }

    /// Derivative at `state`, checked for finiteness.
    pub fn derivative(&self, state: &TruncatedState) -> Result<Vec<f64>> {
        let mut out = vec![0.0; state.n()];
        self.eval(state.t, &state.c, &mut out)?;
        Ok(out)
    }

    /// Advances `state` by at most `dt`. `dcdt` is the derivative at `state`.
    pub fn step(&mut self, state: &TruncatedState, dcdt: &[f64], dt: f64) -> Result<StepOutcome> {
        let n = state.n();
        let mut h = dt;
        let mut halvings = 0;
        let mut rejected_error = 0;
        let mut rejected_negative = 0;
        self.stages[0].copy_from_slice(dcdt);
        self.stage_leaks[0] = rhs::leak_rate(self.kernel, &state.c)?;
        loop {
            let (candidate, err, stage_leak) = match self.options.method {
                Method::Rk4Fixed => {
                    let y = self.rk4(state, h)?;
                    let l = &self.stage_leaks;
                    (y, None, h / 6.0 * (l[0] + 2.0 * l[1] + 2.0 * l[2] + l[3]))
                }
                Method::Rk45Adaptive => {
                    let (y, e) = self.dopri(state, h)?;
                    let weighted: f64 = B5.iter().zip(&self.stage_leaks).map(|(b, l)| b * l).sum();
                    (y, Some(e), h * weighted)
                }
            };
            let (worst, min_value) =
                candidate
                    .iter()
                    .enumerate()
                    .fold(
                        (0, f64::INFINITY),
                        |(k, m), (idx, &x)| if x < m { (idx, x) } else { (k, m) },
                    );

            if let Some(err) = err {
                if err > 1.0 {
                    rejected_error += 1;
                    let factor = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                    h *= factor;
                    if h <= 1e-14 * state.t.abs().max(1.0) {
                        return Err(Error::Stiffness {
                            component: worst + 1,
                            halvings,
                            t: state.t,
                        });
                    }
                    continue;
                }
            }

            if min_value < -self.neg_floor {
                rejected_negative += 1;
                halvings += 1;
                if halvings >= MAX_HALVINGS {
                    return Err(Error::Stiffness {
                        component: worst + 1,
                        halvings,
                        t: state.t,
                    });
                }
                h *= 0.5;
                continue;
            }

            let mut c = candidate;
            let mut clamped_mass = 0.0;
            for (k, x) in c.iter_mut().enumerate() {
                if *x < 0.0 {
                    clamped_mass += (k + 1) as f64 * -*x;
                    *x = 0.0;
                }
            }
            let new_state = TruncatedState { t: state.t + h, c };
            let mut new_dcdt = vec![0.0; n];
            self.eval(new_state.t, &new_state.c, &mut new_dcdt)?;

            let dt_next = match err {
                None => h,
                Some(e) if e == 0.0 => h,
                Some(e) => {
                    let growth = if rejected_error > 0 { 1.0 } else { 5.0 };
                    h * (0.9 * e.powf(-0.2)).clamp(0.2, growth)
                }
            };
            return Ok(StepOutcome {
                state: new_state,
                dcdt: new_dcdt,
                dt_used: h,
                dt_next,
                rejected_error,
                rejected_negative,
                min_before_clamp: min_value,
                clamped_mass,
                stage_leak,
            });
        }
    }

    fn stage_point(&mut self, y: &[f64], h: f64, coeffs: &[f64], upto: usize) {
        for (k, out) in self.scratch.iter_mut().enumerate() {
            let mut acc = 0.0;
            for s in 0..upto {
                if coeffs[s] != 0.0 {
                    acc += coeffs[s] * self.stages[s][k];
                }
            }
            *out = y[k] + h * acc;
        }
    }

    fn rk4(&mut self, state: &TruncatedState, h: f64) -> Result<Vec<f64>> {
        let y = &state.c;
        let t = state.t;
        let plan: [(&[f64], f64); 3] = [(&[0.5], 0.5), (&[0.0, 0.5], 0.5), (&[0.0, 0.0, 1.0], 1.0)];
        for (s, (coeffs, frac)) in plan.iter().enumerate() {
            self.stage_point(y, h, coeffs, s + 1);
            self.stage_leaks[s + 1] = rhs::leak_rate(self.kernel, &self.scratch)?;
            let mut out = std::mem::take(&mut self.stages[s + 1]);
            let res = self.eval(t + frac * h, &self.scratch, &mut out);
            self.stages[s + 1] = out;
            res?;
        }
        Ok((0..y.len())
            .map(|k| {
                y[k] + h / 6.0
                    * (self.stages[0][k]
                        + 2.0 * self.stages[1][k]
                        + 2.0 * self.stages[2][k]
                        + self.stages[3][k])
            })
            .collect())
    }

    /// Fifth-order solution and the scaled RMS norm of the embedded error estimate.
    fn dopri(&mut self, state: &TruncatedState, h: f64) -> Result<(Vec<f64>, f64)> {
        let y = &state.c;
        let t = state.t;
        for s in 1..7 {
            self.stage_point(y, h, &A[s], s);
            self.stage_leaks[s] = rhs::leak_rate(self.kernel, &self.scratch)?;
            let mut out = std::mem::take(&mut self.stages[s]);
            let res = self.eval(t + C[s] * h, &self.scratch, &mut out);
            self.stages[s] = out;
            res?;
        }
        // stage 7 is evaluated at the fifth-order solution itself
        let y5 = self.scratch.clone();
        let mut sq = 0.0;
        for k in 0..y.len() {
            let mut e = 0.0;
            for s in 0..7 {
                e += (B5[s] - B4[s]) * self.stages[s][k];
            }
            let scale = self.options.abs_tol + self.options.rel_tol * y[k].abs().max(y5[k].abs());
            let r = h * e / scale;
            sq += r * r;
        }
        Ok((y5, (sq / y.len() as f64).sqrt()))
    }
}

/// One step from `state` with the negativity floor scaled by the state's own `μ₀`.
pub fn step(
    kernel: &KernelSpec,
    state: &TruncatedState,
    dt: f64,
    options: &IntegratorOptions,
) -> Result<StepOutcome> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Domain(format!(
            "step size must be positive, got {dt}"
        )));
    }
    let mut stepper = Stepper::new(kernel, options, state.n(), state.moment(0.0));
    let dcdt = stepper.derivative(state)?;
    stepper.step(state, &dcdt, dt)
}

/// A sampled point of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub c: Vec<f64>,
    pub mu0: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub leak_rate: f64,
    pub cumulative_leak: f64,
    /// Running sum of [`StepOutcome::stage_leak`] minus clamped mass: the scheme's own
    /// `μ₁ⁿ(0) − μ₁ⁿ(t)`, free of cancellation.
    pub deficit: f64,
    pub min_c: f64,
}

/// State and derivative at an accepted step point.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPoint {
    pub t: f64,
    pub c: Vec<f64>,
    pub dcdt: Vec<f64>,
    pub leak_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub steps_accepted: usize,
    pub steps_rejected_error: usize,
    pub steps_rejected_negative: usize,
    /// Smallest component seen in any accepted candidate, before clamping.
    pub min_concentration: f64,
    pub clamped_mass: f64,
    pub rhs_path: RhsPath,
}

impl RunStats {
    pub fn steps_rejected(&self) -> usize {
        self.steps_rejected_error + self.steps_rejected_negative
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub n: usize,
    pub samples: Vec<Sample>,
    /// Accepted step points including `t = 0`; empty unless `record_steps` is set.
    pub steps: Vec<StepPoint>,
    pub stats: RunStats,
    pub options: IntegratorOptions,
}

impl Trajectory {
    pub fn initial(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples
            .last()
            .expect("trajectory has at least one sample")
    }
}

fn sample(
    kernel: &KernelSpec,
    t: f64,
    c: &[f64],
    cumulative_leak: f64,
    deficit: f64,
) -> Result<Sample> {
    Ok(Sample {
        t,
        c: c.to_vec(),
        mu0: moment(c, 0.0),
        mu1: moment(c, 1.0),
        mu2: moment(c, 2.0),
        leak_rate: rhs::leak_rate(kernel, c)?,
        cumulative_leak,
        deficit,
        min_c: c.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

/// Output times `k · sample_every` below `t_end`, then `t_end` itself.
pub fn sample_times(t_end: f64, sample_every: f64) -> Vec<f64> {
    let mut times = Vec::new();
    let mut k = 1u64;
    loop {
        let t = k as f64 * sample_every;
        if t >= t_end * (1.0 - 1e-12) {
            break;
        }
        times.push(t);
        k += 1;
    }
    if t_end > 0.0 {
        times.push(t_end);
    }
    times
}

/// Integrates the truncation of `ic` to `n` bins over `[0, options.t_end]`.
///
/// Steps are clipped so that every sample time is hit exactly. The cumulative leak is
/// the trapezoidal integral of the leak rate over accepted step points.
pub fn integrate(
    kernel: &KernelSpec,
    ic: &InitialCondition,
    n: usize,
    options: &IntegratorOptions,
) -> Result<Trajectory> {
    options.validate()?;
    let initial = ic.init(n)?;
    integrate_from(kernel, initial, options)
}

pub fn integrate_from(
    kernel: &KernelSpec,
    initial: TruncatedState,
    options: &IntegratorOptions,
) -> Result<Trajectory> {
    options.validate()?;
    let n = initial.n();
    let mut stepper = Stepper::new(kernel, options, n, initial.moment(0.0));
    let mut dcdt = stepper.derivative(&initial)?;
    let mut leak = rhs::leak_rate(kernel, &initial.c)?;
    let mut cumulative = 0.0;
    let mut deficit = CompensatedSum::new();
    let mut stats = RunStats {
        steps_accepted: 0,
        steps_rejected_error: 0,
        steps_rejected_negative: 0,
        min_concentration: initial.c.iter().copied().fold(f64::INFINITY, f64::min),
        clamped_mass: 0.0,
        rhs_path: stepper.rhs_path(),
    };
    let mut samples = vec![sample(kernel, initial.t, &initial.c, 0.0, 0.0)?];
    let mut steps = Vec::new();
    if options.record_steps {
        steps.push(StepPoint {
            t: initial.t,
            c: initial.c.clone(),
            dcdt: dcdt.clone(),
            leak_rate: leak,
        });
    }

    let mut state = initial;
    let mut dt = options.dt_init;
    for target in sample_times(options.t_end, options.sample_every) {
        while state.t < target {
            let remaining = target - state.t;
            let clipped = dt >= remaining;
            let h = if clipped { remaining } else { dt };
            let out = stepper.step(&state, &dcdt, h)?;
            stats.steps_accepted += 1;
            stats.steps_rejected_error += out.rejected_error;
            stats.steps_rejected_negative += out.rejected_negative;
            stats.min_concentration = stats.min_concentration.min(out.min_before_clamp);
            stats.clamped_mass += out.clamped_mass;
            deficit.add(out.stage_leak);
            deficit.add(-out.clamped_mass);

            let mut next = out.state;
            if out.dt_used == h && clipped {
                next.t = target;
            }
            let h_actual = next.t - state.t;
            let next_leak = rhs::leak_rate(kernel, &next.c)?;
            cumulative += 0.5 * h_actual * (leak + next_leak);
            leak = next_leak;
            dcdt = out.dcdt;
            if options.record_steps {
                steps.push(StepPoint {
                    t: next.t,
                    c: next.c.clone(),
                    dcdt: dcdt.clone(),
                    leak_rate: leak,
                });
            }
            // a step shortened only to land on a sample time must not shrink dt
            let quiet = out.rejected_error + out.rejected_negative == 0;
            dt = match options.method {
                Method::Rk4Fixed if clipped && quiet => dt,
                Method::Rk45Adaptive if clipped && quiet => out.dt_next.max(dt),
                _ => out.dt_next,
            };
            state = next;
        }
        samples.push(sample(
            kernel,
            state.t,
            &state.c,
            cumulative,
            deficit.value(),
        )?);
    }

    Ok(Trajectory {
        n,
        samples,
        steps,
        stats,
        options: options.clone(),
    })
}
