//! Pass/fail reports shared by the diagnostics, the γ checks and the self-test.

use std::fmt::{self, Write as _};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// The check does not apply (e.g. no bound is known for the kernel).
    Skipped,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Skipped => "skipped",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One named check. Residual checks pass iff `value ≤ tolerance`; bound checks pass iff
/// `value ≤ bound + tolerance`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckEntry {
    pub id: String,
    pub value: f64,
    pub bound: Option<f64>,
    pub tolerance: f64,
    pub verdict: Verdict,
}

impl CheckEntry {
    pub fn residual(id: impl Into<String>, value: f64, tolerance: f64) -> Self {
        let verdict = if value <= tolerance {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        CheckEntry {
            id: id.into(),
            value,
            bound: None,
            tolerance,
            verdict,
        }
    }

    pub fn bounded(id: impl Into<String>, value: f64, bound: f64, tolerance: f64) -> Self {
        let verdict = if value <= bound + tolerance {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        CheckEntry {
            id: id.into(),
            value,
            bound: Some(bound),
            tolerance,
            verdict,
        }
    }

    pub fn skipped(id: impl Into<String>) -> Self {
        CheckEntry {
            id: id.into(),
            value: f64::NAN,
            bound: None,
            tolerance: f64::NAN,
            verdict: Verdict::Skipped,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticsReport {
    pub entries: Vec<CheckEntry>,
}

impl DiagnosticsReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, entry: CheckEntry) {
        self.entries.push(entry);
    }

    pub fn extend(&mut self, other: DiagnosticsReport) {
        self.entries.extend(other.entries);
    }

    /// No entry failed. Skipped entries do not count as failures.
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(CheckEntry::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckEntry> {
        self.entries.iter().filter(|e| !e.passed())
    }

    pub fn get(&self, id: &str) -> Option<&CheckEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub const CSV_HEADER: &'static str = "check_id,value,bound,tolerance,verdict";

    /// Rows without header. Empty fields stand for "not applicable".
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                e.id,
                fmt_opt(Some(e.value)),
                fmt_opt(e.bound),
                fmt_opt(Some(e.tolerance)),
                e.verdict
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        format!("{}\n{}", Self::CSV_HEADER, self.csv_rows())
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    match x {
        Some(v) if !v.is_nan() => fmt_f64(v),
        _ => String::new(),
    }
}

/// Shortest decimal that parses back to the same `f64`; scientific notation outside
/// `[1e-4, 1e15)`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}
