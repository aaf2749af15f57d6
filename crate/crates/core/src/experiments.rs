//! Config-driven runs, truncation-size sweeps and the randomized self-test.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::diagnostics::{self, DifferenceForm};
use crate::error::{Error, Result};
use crate::gamma::ConvexWeight;
use crate::integrator::{self, IntegratorOptions, Trajectory};
use crate::kernel::KernelSpec;
use crate::report::{fmt_f64 as f, CheckEntry, DiagnosticsReport};
use crate::rhs;
use crate::state::{moment, InitialCondition};
use crate::sum;

pub const TRAJECTORY_HEADER: &str = "t,mu0,mu1,mu2,leak_rate,cumulative_leak,min_c";
pub const DEFICIT_HEADER: &str =
    "n,mu1_initial,mu1_final,deficit,deficit_direct,cumulative_leak,max_component_diff_next,wall_time_s,status";

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn trajectory_csv(trajectory: &Trajectory) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for s in &trajectory.samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            f(s.t),
            f(s.mu0),
            f(s.mu1),
            f(s.mu2),
            f(s.leak_rate),
            f(s.cumulative_leak),
            f(s.min_c)
        );
    }
    out
}

/// Result of [`run`].
#[derive(Debug)]
pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub report: DiagnosticsReport,
    pub trajectory_path: PathBuf,
    pub diagnostics_path: PathBuf,
}

/// Integrates the configured problem, runs the requested checks and writes
/// `trajectory.csv` and `diagnostics.csv` under `out_dir`.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    let trajectory = integrator::integrate(&config.kernel, &config.ic, config.n, &config.options)?;
    let report =
        diagnostics::check_trajectory_with_kernel(&trajectory, &config.kernel, &config.checks)?;
    let trajectory_path = write_file(
        &config.out_dir,
        "trajectory.csv",
        &trajectory_csv(&trajectory),
    )?;
    let diagnostics_path = write_file(&config.out_dir, "diagnostics.csv", &report.to_csv())?;
    Ok(RunOutcome {
        trajectory,
        report,
        trajectory_path,
        diagnostics_path,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeficitRow {
    pub n: usize,
    pub mu1_initial: f64,
    pub mu1_final: f64,
    /// Stage-weighted leak integral minus clamped mass: the scheme's `μ₁ⁿ(0) − μ₁ⁿ(T)`.
    pub deficit: f64,
    /// `μ₁ⁿ(0) − μ₁ⁿ(T)` by subtraction; dominated by rounding once the deficit is tiny.
    pub deficit_direct: f64,
    /// Trapezoidal integral of the leak rate.
    pub cumulative_leak: f64,
    /// `max_t max_{i ≤ n_min/2} |c_i^{n}(t) − c_i^{n'}(t)|` against the next row `n'`.
    pub max_component_diff_next: Option<f64>,
    pub wall_time_s: f64,
    /// `None` on success, otherwise the integration error.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeficitTable {
    pub rows: Vec<DeficitRow>,
}

impl DeficitTable {
    pub fn deficits(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.deficit).collect()
    }

    pub fn all_succeeded(&self) -> bool {
        self.rows.iter().all(|r| r.failure.is_none())
    }

    /// Every successful row has `Δ ≥ 0` and `|Δ − cumulative_leak|` within the
    /// mass-balance tolerance.
    pub fn consistent(&self) -> bool {
        self.rows.iter().filter(|r| r.failure.is_none()).all(|r| {
            r.deficit >= 0.0
                && (r.deficit - r.cumulative_leak).abs()
                    <= diagnostics::mass_balance_tolerance(r.mu1_initial)
        })
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].deficit < w[0].deficit)
    }

    /// CSV including the wall-time column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(DEFICIT_HEADER);
        out.push('\n');
        for r in &self.rows {
            let diff = r.max_component_diff_next.map(f).unwrap_or_default();
            let status = match &r.failure {
                None => "ok".to_string(),
                Some(msg) => format!("failed: {}", msg.replace(',', ";")),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.n,
                f(r.mu1_initial),
                f(r.mu1_final),
                f(r.deficit),
                f(r.deficit_direct),
                f(r.cumulative_leak),
                diff,
                f(r.wall_time_s),
                status
            );
        }
        out
    }
}

/// Runs the configured problem for each truncation size in `n_list`.
///
/// Rows are integrated in parallel and reported in `n_list` order. A failing row is kept
/// with its error message; the remaining rows are unaffected.
pub fn converge(
    kernel: &KernelSpec,
    ic: &InitialCondition,
    options: &IntegratorOptions,
    n_list: &[usize],
) -> Result<DeficitTable> {
    if n_list.is_empty() {
        return Err(Error::validation("n", "empty list of truncation sizes"));
    }
    if let Some(&bad) = n_list.iter().find(|&&n| n < 2) {
        return Err(Error::validation(
            "n",
            format!("truncation size {bad} is below 2"),
        ));
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::validation(
            "n",
            "truncation sizes must be strictly increasing",
        ));
    }
    options.validate()?;
    let options = IntegratorOptions {
        record_steps: false,
        ..options.clone()
    };
    let runs: Vec<(f64, Result<Trajectory>)> = n_list
        .par_iter()
        .map(|&n| {
            let start = Instant::now();
            let tr = integrator::integrate(kernel, ic, n, &options);
            (start.elapsed().as_secs_f64(), tr)
        })
        .collect();

    let half = n_list[0] / 2;
    let mut rows = Vec::with_capacity(n_list.len());
    for (idx, (&n, (wall, result))) in n_list.iter().zip(&runs).enumerate() {
        let row = match result {
            Ok(tr) => {
                let first = tr.initial();
                let last = tr.last();
                let diff = match runs.get(idx + 1) {
                    Some((_, Ok(next))) => Some(component_gap(tr, next, half.max(1))),
                    _ => None,
                };
                DeficitRow {
                    n,
                    mu1_initial: first.mu1,
                    mu1_final: last.mu1,
                    deficit: last.deficit,
                    deficit_direct: first.mu1 - last.mu1,
                    cumulative_leak: last.cumulative_leak,
                    max_component_diff_next: diff,
                    wall_time_s: *wall,
                    failure: None,
                }
            }
            Err(e) => DeficitRow {
                n,
                mu1_initial: f64::NAN,
                mu1_final: f64::NAN,
                deficit: f64::NAN,
                deficit_direct: f64::NAN,
                cumulative_leak: f64::NAN,
                max_component_diff_next: None,
                wall_time_s: *wall,
                failure: Some(e.to_string()),
            },
        };
        rows.push(row);
    }
    Ok(DeficitTable { rows })
}

// samples share the time grid because both runs use the same options
fn component_gap(a: &Trajectory, b: &Trajectory, upto: usize) -> f64 {
    a.samples
        .iter()
        .zip(&b.samples)
        .flat_map(|(sa, sb)| {
            let m = upto.min(sa.c.len()).min(sb.c.len());
            (0..m).map(move |k| (sa.c[k] - sb.c[k]).abs())
        })
        .fold(0.0, f64::max)
}

/// Writes `deficit.csv` under `out_dir`.
pub fn write_deficit(out_dir: &Path, table: &DeficitTable) -> Result<PathBuf> {
    write_file(out_dir, "deficit.csv", &table.to_csv())
}

/// Parses `32,64,128`.
pub fn parse_n_list(list: &str) -> Result<Vec<usize>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>().map_err(|_| {
                Error::validation("n", format!("cannot parse {s:?} as a truncation size"))
            })
        })
        .collect()
}

/// Largest size swept by the γ command's inequality check.
pub const GAMMA_SWEEP: usize = 10_000;

/// Builds γ for the configured initial data (capped at `max(n, GAMMA_SWEEP + 1)`), checks
/// the increment inequality for `i ≤ GAMMA_SWEEP` and writes `gamma.csv`.
pub fn gamma_command(config: &RunConfig) -> Result<(ConvexWeight, DiagnosticsReport, PathBuf)> {
    let cap = config.n.max(GAMMA_SWEEP + 1);
    let c0 = config.ic.init(config.n)?.c;
    let gamma = ConvexWeight::build(&c0, cap)?;
    let mut report = gamma.prop_inequality_check(GAMMA_SWEEP);
    let weighted = sum::sum(c0.iter().enumerate().map(|(k, x)| gamma.at(k + 1) * x));
    let bound = gamma.finiteness_bound().unwrap_or(f64::INFINITY);
    report.push(CheckEntry::bounded(
        "gamma_adaptedness",
        weighted,
        bound,
        0.0,
    ));
    report.push(CheckEntry::bounded(
        "gamma_superlinearity",
        -gamma.superlinearity_margin(),
        0.0,
        0.0,
    ));

    let mut out = String::from("k,knot,derivative,value\n");
    for (k, ((m, d), v)) in gamma
        .knots()
        .iter()
        .zip(gamma.knot_derivatives())
        .zip(gamma.knot_values())
        .enumerate()
    {
        let _ = writeln!(out, "{k},{},{},{}", f(*m), f(*d), f(*v));
    }
    out.push('\n');
    out.push_str(&report.to_csv());
    let path = write_file(&config.out_dir, "gamma.csv", &out)?;
    Ok((gamma, report, path))
}

/// Derivative routine under test in the self-test battery.
pub type RhsFn = fn(&KernelSpec, &[f64]) -> Result<Vec<f64>>;

/// Number of random (kernel, c, w) triples in the identity battery.
pub const IDENTITY_TRIALS: usize = 1000;
/// Random states per fast-path family.
pub const FAST_PATH_TRIALS: usize = 500;
/// Tolerance of the exact polynomial identities.
pub const IDENTITY_TOL: f64 = 1e-12;

/// Kernels drawn by the identity battery.
pub fn battery_kernels() -> Vec<KernelSpec> {
    vec![
        KernelSpec::ratio_sum(),
        KernelSpec::sum(),
        KernelSpec::power_law(0.0).expect("valid alpha"),
        KernelSpec::power_law(0.5).expect("valid alpha"),
        KernelSpec::power_law(1.0).expect("valid alpha"),
        KernelSpec::product(),
        KernelSpec::constant(1.0).expect("valid kappa"),
    ]
}

/// Heavy-tailed non-negative state with `μ₁ = 1`: a quarter of the entries are zero, the
/// rest Pareto-distributed with tail index 1.2.
pub fn random_state(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut c: Vec<f64> = (0..n)
        .map(|_| {
            if rng.gen::<f64>() < 0.25 {
                0.0
            } else {
                let u: f64 = rng.gen_range(f64::EPSILON..1.0);
                u.powf(-1.0 / 1.2) - 1.0
            }
        })
        .collect();
    let mass = moment(&c, 1.0);
    if mass > 0.0 {
        for x in &mut c {
            *x /= mass;
        }
    } else {
        c[0] = 1.0;
    }
    c
}

/// Random non-decreasing real weights starting in `[-1, 1]`.
pub fn random_weights(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(n);
    let mut x: f64 = rng.gen_range(-1.0..1.0);
    for _ in 0..n {
        w.push(x);
        let u: f64 = rng.gen_range(f64::EPSILON..1.0);
        x += if rng.gen::<f64>() < 0.2 {
            0.0
        } else {
            u.powf(-0.5) - 1.0
        };
    }
    w
}

/// Relative component-wise gap with denominator `max(|a_i|, μ₁²)`.
pub fn relative_gap(a: &[f64], b: &[f64], mu1: f64) -> f64 {
    let floor = (mu1 * mu1).max(f64::MIN_POSITIVE);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(floor))
        .fold(0.0, f64::max)
}

/// Randomized battery with the production derivative.
pub fn selftest(seed: u64) -> Result<DiagnosticsReport> {
    selftest_with(seed, rhs::rhs_direct)
}

/// Randomized battery with an injectable derivative routine, so that a corrupted RHS can be
/// shown to fail it.
pub fn selftest_with(seed: u64, derivative: RhsFn) -> Result<DiagnosticsReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kernels = battery_kernels();
    let mut report = DiagnosticsReport::new();

    let mut worst_identity: f64 = 0.0;
    let mut worst_mass_rate: f64 = 0.0;
    let mut worst_number_rate: f64 = 0.0;
    let mut worst_abs_form: f64 = 0.0;
    for _ in 0..IDENTITY_TRIALS {
        let kernel = &kernels[rng.gen_range(0..kernels.len())];
        let n = rng.gen_range(2..=128);
        let c = random_state(&mut rng, n);
        let w = random_weights(&mut rng, n);
        let d = derivative(kernel, &c)?;

        let signed = diagnostics::moment_identity_rhs(kernel, &c, &w, DifferenceForm::Signed)?;
        let absolute = diagnostics::moment_identity_rhs(kernel, &c, &w, DifferenceForm::Absolute)?;
        worst_identity = worst_identity.max(diagnostics::weighted_residual(&d, &w, signed));
        worst_abs_form = worst_abs_form.max(diagnostics::weighted_residual(&d, &w, absolute));

        let mass_rate = sum::sum(d.iter().enumerate().map(|(k, x)| (k + 1) as f64 * x));
        let leak = rhs::leak_rate(kernel, &c)?;
        // relative to the size of the summands: when c_n = 0 both sides vanish exactly
        let scale = sum::sum(d.iter().enumerate().map(|(k, x)| (k + 1) as f64 * x.abs()))
            .max(leak.abs())
            .max(f64::MIN_POSITIVE);
        worst_mass_rate = worst_mass_rate.max((mass_rate + leak).abs() / scale);

        let expected = -sum::sum((1..n).flat_map(|i| {
            let c = &c;
            (i..=n).map(move |j| kernel.rate(i, j) * c[i - 1] * c[j - 1])
        }));
        worst_number_rate =
            worst_number_rate.max(diagnostics::weighted_residual(&d, &vec![1.0; n], expected));
    }
    report.push(CheckEntry::residual(
        "moment_identity",
        worst_identity,
        IDENTITY_TOL,
    ));
    report.push(CheckEntry::residual(
        "moment_identity_absolute_form",
        worst_abs_form,
        IDENTITY_TOL,
    ));
    report.push(CheckEntry::residual(
        "mass_rate_identity",
        worst_mass_rate,
        IDENTITY_TOL,
    ));
    report.push(CheckEntry::residual(
        "number_rate_identity",
        worst_number_rate,
        IDENTITY_TOL,
    ));

    for kernel in kernels.iter().filter(|k| rhs::has_fast_path(k)) {
        let mut worst: f64 = 0.0;
        for _ in 0..FAST_PATH_TRIALS {
            let n = rng.gen_range(2..=256);
            let c = random_state(&mut rng, n);
            let direct = derivative(kernel, &c)?;
            let (fast, _) = rhs::rhs_fast(kernel, &c)?;
            worst = worst.max(relative_gap(&direct, &fast, moment(&c, 1.0)));
        }
        report.push(CheckEntry::residual(
            format!("fast_direct_{}", kernel.family()),
            worst,
            IDENTITY_TOL,
        ));
    }

    let mut worst_lower = f64::NEG_INFINITY;
    let mut worst_upper = f64::NEG_INFINITY;
    let mut worst_margin = f64::INFINITY;
    let mut worst_adapted = f64::NEG_INFINITY;
    for _ in 0..8 {
        let len = rng.gen_range(1..=512);
        let c0 = random_state(&mut rng, len.max(2));
        let gamma = ConvexWeight::build(&c0, GAMMA_SWEEP + 1)?;
        let r = gamma.prop_inequality_check(GAMMA_SWEEP);
        worst_lower = worst_lower.max(
            r.get("prop_increment_nonneg")
                .map_or(f64::INFINITY, |e| e.value),
        );
        worst_upper = worst_upper.max(
            r.get("prop_increment_upper")
                .map_or(f64::INFINITY, |e| e.value),
        );
        worst_margin = worst_margin.min(gamma.superlinearity_margin());
        let weighted = sum::sum(c0.iter().enumerate().map(|(k, x)| gamma.at(k + 1) * x));
        let bound = gamma.finiteness_bound().unwrap_or(f64::NEG_INFINITY);
        worst_adapted = worst_adapted.max(weighted - bound);
    }
    report.push(CheckEntry::bounded(
        "prop_increment_nonneg",
        worst_lower,
        0.0,
        0.0,
    ));
    report.push(CheckEntry::bounded(
        "prop_increment_upper",
        worst_upper,
        1.0,
        IDENTITY_TOL,
    ));
    report.push(CheckEntry::bounded(
        "gamma_superlinearity",
        -worst_margin,
        0.0,
        0.0,
    ));
    report.push(CheckEntry::bounded(
        "gamma_adaptedness",
        worst_adapted,
        0.0,
        0.0,
    ));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n_list_parsing() {
        assert_eq!(parse_n_list("32, 64,128").unwrap(), vec![32, 64, 128]);
        assert!(parse_n_list("32,x").is_err());
    }

    #[test]
    fn random_states_are_normalized_and_non_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [2, 10, 200] {
            let c = random_state(&mut rng, n);
            assert!(c.iter().all(|&x| x >= 0.0 && x.is_finite()));
            assert!((moment(&c, 1.0) - 1.0).abs() < 1e-12);
            let w = random_weights(&mut rng, n);
            assert!(w.windows(2).all(|p| p[1] >= p[0]));
        }
    }

    #[test]
    fn converge_rejects_bad_lists() {
        let ic = InitialCondition::monodisperse(1.0).unwrap();
        let opts = IntegratorOptions::default();
        let k = KernelSpec::sum();
        assert!(converge(&k, &ic, &opts, &[]).is_err());
        assert!(converge(&k, &ic, &opts, &[1, 4]).is_err());
        assert!(converge(&k, &ic, &opts, &[8, 4]).is_err());
    }
}
