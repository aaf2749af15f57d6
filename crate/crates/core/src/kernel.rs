//! Coagulation rate families `φ(i, j)`.
//!
//! Built-in families:
//!
//! ```text
//! ratio-sum   φ(i,j) = (i + j) / min(i, j)
//! sum         φ(i,j) = i + j
//! power-law   φ(i,j) = (1 + i + j)^α,   0 ≤ α ≤ 1
//! product     φ(i,j) = i · j
//! constant    φ(i,j) = κ
//! ```
//!
//! plus a finite symmetric custom table that extends by zero beyond its size.
//! The first three saturate the growth classes under which the truncated system
//! has uniform moment and variation bounds; see [`BoundClass`].

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Family tag of a [`KernelSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    RatioSum,
    Sum,
    PowerLaw,
    Product,
    Constant,
    CustomTable,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::RatioSum => "ratio-sum",
            Family::Sum => "sum",
            Family::PowerLaw => "power-law",
            Family::Product => "product",
            Family::Constant => "constant",
            Family::CustomTable => "custom-table",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ratio-sum" => Family::RatioSum,
            "sum" => Family::Sum,
            "power-law" => Family::PowerLaw,
            "product" => Family::Product,
            "constant" => Family::Constant,
            "custom-table" | "custom" => Family::CustomTable,
            other => {
                return Err(Error::validation(
                    "kernel",
                    format!(
                        "unknown family {other:?} (expected ratio-sum, sum, power-law, product, constant or custom-table)"
                    ),
                ))
            }
        })
    }
}

/// Growth class of a kernel.
///
/// `Ratio`: `φ(i,j) ≤ (i+j)/min(i,j)`; `Sum`: `φ(i,j) ≤ i+j`;
/// `Power`: `φ(i,j) ≤ (1+i+j)^α` for some `α ∈ [0,1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundClass {
    Ratio,
    Sum,
    Power,
    Other,
}

impl BoundClass {
    /// Index `b` of the class in the moment-bound constants (1, 2, 3), `None` for `Other`.
    pub fn index(self) -> Option<u8> {
        match self {
            BoundClass::Ratio => Some(1),
            BoundClass::Sum => Some(2),
            BoundClass::Power => Some(3),
            BoundClass::Other => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BoundClass::Ratio => "ratio",
            BoundClass::Sum => "sum",
            BoundClass::Power => "power",
            BoundClass::Other => "other",
        }
    }
}

impl fmt::Display for BoundClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Symmetric table of rates `φ(i,j)` for `1 ≤ i, j ≤ size`; zero outside.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    size: usize,
    rates: Vec<f64>,
}

impl RateTable {
    /// Builds a table from its upper triangle: `rows[k]` holds `φ(k+1, k+1), …, φ(k+1, size)`.
    pub fn from_upper_triangle(rows: &[Vec<f64>]) -> Result<Self> {
        let size = rows.len();
        if size == 0 {
            return Err(Error::validation("table", "empty rate table"));
        }
        let mut rates = vec![0.0; size * size];
        for (k, row) in rows.iter().enumerate() {
            if row.len() != size - k {
                return Err(Error::validation(
                    "table",
                    format!(
                        "row {} has {} entries, expected {} for a {size}x{size} upper triangle",
                        k + 1,
                        row.len(),
                        size - k
                    ),
                ));
            }
            for (offset, &rate) in row.iter().enumerate() {
                if !rate.is_finite() || rate < 0.0 {
                    return Err(Error::validation(
                        "table",
                        format!(
                            "rate ({}, {}) = {rate} is not a finite non-negative number",
                            k + 1,
                            k + 1 + offset
                        ),
                    ));
                }
                let j = k + offset;
                rates[k * size + j] = rate;
                rates[j * size + k] = rate;
            }
        }
        Ok(RateTable { size, rates })
    }

    /// Tabulates `f` on `1 ≤ i ≤ j ≤ size` and symmetrizes.
    pub fn from_fn(size: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let rows: Vec<Vec<f64>> = (1..=size)
            .map(|i| (i..=size).map(|j| f(i, j)).collect())
            .collect();
        Self::from_upper_triangle(&rows)
    }

    /// Parses whitespace-separated rows of an upper-triangular matrix, one row per line.
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|_| {
                        Error::validation(
                            "table",
                            format!("line {}: cannot parse {tok:?} as a number", lineno + 1),
                        )
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_upper_triangle(&rows)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        if i > self.size || j > self.size {
            0.0
        } else {
            self.rates[(i - 1) * self.size + (j - 1)]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Rates {
    RatioSum,
    Sum,
    PowerLaw { alpha: f64 },
    Product,
    Constant { kappa: f64 },
    Table(RateTable),
}

/// A validated, immutable coagulation kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    rates: Rates,
}

impl KernelSpec {
    pub fn ratio_sum() -> Self {
        KernelSpec {
            rates: Rates::RatioSum,
        }
    }

    pub fn sum() -> Self {
        KernelSpec { rates: Rates::Sum }
    }

    pub fn product() -> Self {
        KernelSpec {
            rates: Rates::Product,
        }
    }

    /// `(1 + i + j)^alpha`; `alpha` must lie in `[0, 1]`.
    pub fn power_law(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::validation(
                "alpha",
                format!("{alpha} is outside [0, 1]"),
            ));
        }
        Ok(KernelSpec {
            rates: Rates::PowerLaw { alpha },
        })
    }

    pub fn constant(kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::validation(
                "kappa",
                format!("{kappa} is not a positive finite number"),
            ));
        }
        Ok(KernelSpec {
            rates: Rates::Constant { kappa },
        })
    }

    pub fn table(table: RateTable) -> Self {
        KernelSpec {
            rates: Rates::Table(table),
        }
    }

    pub fn family(&self) -> Family {
        match self.rates {
            Rates::RatioSum => Family::RatioSum,
            Rates::Sum => Family::Sum,
            Rates::PowerLaw { .. } => Family::PowerLaw,
            Rates::Product => Family::Product,
            Rates::Constant { .. } => Family::Constant,
            Rates::Table(_) => Family::CustomTable,
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self.rates {
            Rates::PowerLaw { alpha } => Some(alpha),
            _ => None,
        }
    }

    pub fn kappa(&self) -> Option<f64> {
        match self.rates {
            Rates::Constant { kappa } => Some(kappa),
            _ => None,
        }
    }

    /// `φ(i, j)`. Indices are 1-based; 0 is rejected.
    pub fn eval(&self, i: usize, j: usize) -> Result<f64> {
        if i == 0 || j == 0 {
            return Err(Error::Domain(format!(
                "kernel indices must be >= 1, got ({i}, {j})"
            )));
        }
        Ok(self.rate(i, j))
    }

    /// `φ(i, j)` without the index check. Callers guarantee `i, j ≥ 1`.
    #[inline]
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i >= 1 && j >= 1);
        let (x, y) = (i as f64, j as f64);
        match &self.rates {
            Rates::RatioSum => (x + y) / x.min(y),
            Rates::Sum => x + y,
            Rates::PowerLaw { alpha } => (1.0 + x + y).powf(*alpha),
            Rates::Product => x * y,
            Rates::Constant { kappa } => *kappa,
            Rates::Table(t) => t.get(i, j),
        }
    }

    /// Tightest growth class the kernel satisfies.
    ///
    /// Candidate bounds are tried from pointwise smallest to largest:
    /// `1` (power class with `α = 0`), `(i+j)/min(i,j)`, `i+j`, `1+i+j` (power class with `α = 1`).
    /// Custom tables are checked exhaustively over their stored range.
    pub fn bound_class(&self) -> BoundClass {
        match &self.rates {
            Rates::RatioSum => BoundClass::Ratio,
            Rates::Sum => BoundClass::Sum,
            Rates::PowerLaw { .. } => BoundClass::Power,
            Rates::Product => BoundClass::Other,
            Rates::Constant { kappa } => {
                // at i = j = 1 the candidate bounds are 1, 2, 2, 3
                if *kappa <= 1.0 {
                    BoundClass::Power
                } else if *kappa <= 2.0 {
                    BoundClass::Ratio
                } else if *kappa <= 3.0 {
                    BoundClass::Power
                } else {
                    BoundClass::Other
                }
            }
            Rates::Table(t) => {
                let holds = |bound: &dyn Fn(f64, f64) -> f64| {
                    (1..=t.size)
                        .all(|i| (i..=t.size).all(|j| t.get(i, j) <= bound(i as f64, j as f64)))
                };
                if holds(&|_, _| 1.0) {
                    BoundClass::Power
                } else if holds(&|x, y| (x + y) / x.min(y)) {
                    BoundClass::Ratio
                } else if holds(&|x, y| x + y) {
                    BoundClass::Sum
                } else if holds(&|x, y| 1.0 + x + y) {
                    BoundClass::Power
                } else {
                    BoundClass::Other
                }
            }
        }
    }

    /// Rates `φ(n, j)` along `n_list`, the quantity that must vanish as `n → ∞`
    /// for the truncation's mass deficit to disappear.
    pub fn cross_decay_profile(&self, j: usize, n_list: &[usize]) -> Result<CrossDecayProfile> {
        if j == 0 {
            return Err(Error::Domain("cross-decay index j must be >= 1".into()));
        }
        let mut points = Vec::new();
        let mut skipped = Vec::new();
        for &n in n_list {
            if n <= j {
                skipped.push(n);
            } else {
                points.push((n, self.rate(n, j)));
            }
        }
        Ok(CrossDecayProfile { j, points, skipped })
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.rates {
            Rates::PowerLaw { alpha } => write!(f, "power-law(alpha={alpha})"),
            Rates::Constant { kappa } => write!(f, "constant(kappa={kappa})"),
            Rates::Table(t) => write!(f, "custom-table({0}x{0})", t.size),
            _ => f.write_str(self.family().name()),
        }
    }
}

/// Output of [`KernelSpec::cross_decay_profile`].
#[derive(Debug, Clone, PartialEq)]
pub struct CrossDecayProfile {
    pub j: usize,
    /// `(n, φ(n, j))` for each admissible `n`.
    pub points: Vec<(usize, f64)>,
    /// Entries of the input list with `n ≤ j`, which were dropped.
    pub skipped: Vec<usize>,
}

impl CrossDecayProfile {
    pub fn has_warnings(&self) -> bool {
        !self.skipped.is_empty()
    }

    pub fn rates(&self) -> Vec<f64> {
        self.points.iter().map(|&(_, r)| r).collect()
    }

    /// Non-increasing along the profile and either identically zero at the end
    /// or strictly smaller at the end than at the start.
    pub fn appears_decaying(&self) -> bool {
        let rates = self.rates();
        let (Some(&first), Some(&last)) = (rates.first(), rates.last()) else {
            return false;
        };
        rates.windows(2).all(|w| w[1] <= w[0]) && (last == 0.0 || last < first)
    }
}
