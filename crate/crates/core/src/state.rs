//! Truncated concentration vectors, initial data and moments.

use std::path::Path;

use crate::error::{Error, Result};
use crate::sum;

/// `c_1, …, c_n` at time `t`. Index `i` of the cluster size is `k + 1` for slot `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedState {
    pub t: f64,
    pub c: Vec<f64>,
}

impl TruncatedState {
    /// Validates `n ≥ 2`, finiteness and non-negativity.
    pub fn new(t: f64, c: Vec<f64>) -> Result<Self> {
        if c.len() < 2 {
            return Err(Error::Domain(format!(
                "truncation size must be >= 2, got {}",
                c.len()
            )));
        }
        if let Some(k) = c.iter().position(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::validation(
                "state",
                format!("c_{} = {} is not a finite non-negative number", k + 1, c[k]),
            ));
        }
        Ok(TruncatedState { t, c })
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn moment(&self, r: f64) -> f64 {
        moment(&self.c, r)
    }

    pub fn weighted_moment(&self, w: &[f64]) -> Result<f64> {
        weighted_moment(&self.c, w)
    }

    /// `‖c‖ = Σ i |c_i|`.
    pub fn mass_norm(&self) -> f64 {
        sum::sum(
            self.c
                .iter()
                .enumerate()
                .map(|(k, x)| (k + 1) as f64 * x.abs()),
        )
    }
}

/// `μ_r = Σ_{i=1}^{n} i^r c_i`, compensated.
pub fn moment(c: &[f64], r: f64) -> f64 {
    // integer orders avoid powf rounding
    if r == 0.0 {
        sum::sum(c.iter().copied())
    } else if r == 1.0 {
        sum::sum(c.iter().enumerate().map(|(k, x)| (k + 1) as f64 * x))
    } else if r == 2.0 {
        sum::sum(c.iter().enumerate().map(|(k, x)| {
            let i = (k + 1) as f64;
            i * i * x
        }))
    } else {
        sum::sum(
            c.iter()
                .enumerate()
                .map(|(k, x)| ((k + 1) as f64).powf(r) * x),
        )
    }
}

/// `Σ_{i=1}^{n} w_i c_i`; `w` may be longer than `c`.
pub fn weighted_moment(c: &[f64], w: &[f64]) -> Result<f64> {
    if w.len() < c.len() {
        return Err(Error::Domain(format!(
            "weight sequence has {} entries, state has {}",
            w.len(),
            c.len()
        )));
    }
    Ok(sum::sum(c.iter().zip(w).map(|(x, wi)| wi * x)))
}

/// Initial data `c_i(0)` for the untruncated system.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// `c_1 = total_mass`, all other sizes empty.
    Monodisperse { total_mass: f64 },
    /// `c_i = A · decay^i` with `A` chosen so the infinite series has `Σ i c_i = total_mass`.
    Exponential { total_mass: f64, decay: f64 },
    /// Explicit concentrations `c_1, c_2, …`; sizes past the end are empty.
    Explicit(Vec<f64>),
}

impl InitialCondition {
    pub fn monodisperse(total_mass: f64) -> Result<Self> {
        check_mass(total_mass)?;
        Ok(InitialCondition::Monodisperse { total_mass })
    }

    pub fn exponential(total_mass: f64, decay: f64) -> Result<Self> {
        check_mass(total_mass)?;
        if !(decay > 0.0 && decay < 1.0) {
            return Err(Error::validation(
                "decay",
                format!("{decay} is outside (0, 1)"),
            ));
        }
        Ok(InitialCondition::Exponential { total_mass, decay })
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::validation("ic_file", "no concentrations given"));
        }
        if let Some(k) = values.iter().position(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::validation(
                "ic_file",
                format!(
                    "c_{} = {} is not a finite non-negative number",
                    k + 1,
                    values[k]
                ),
            ));
        }
        Ok(InitialCondition::Explicit(values))
    }

    /// Whitespace-separated concentrations; position gives the size (1-based).
    pub fn parse(text: &str) -> Result<Self> {
        let values = text
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| {
                    Error::validation("ic_file", format!("cannot parse {tok:?} as a number"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::explicit(values)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// `c_i(0)` for a 1-based size index.
    pub fn concentration(&self, i: usize) -> f64 {
        match self {
            InitialCondition::Monodisperse { total_mass } => {
                if i == 1 {
                    *total_mass
                } else {
                    0.0
                }
            }
            InitialCondition::Exponential { total_mass, decay } => {
                let amplitude = total_mass * (1.0 - decay).powi(2) / decay;
                amplitude * decay.powf(i as f64)
            }
            InitialCondition::Explicit(v) => v.get(i.wrapping_sub(1)).copied().unwrap_or(0.0),
        }
    }

    /// `Σ_i i c_i(0)` over all sizes.
    pub fn total_mass(&self) -> f64 {
        match self {
            InitialCondition::Monodisperse { total_mass }
            | InitialCondition::Exponential { total_mass, .. } => *total_mass,
            InitialCondition::Explicit(v) => moment(v, 1.0),
        }
    }

    /// Mass `Σ_{i>n} i c_i(0)` lost by truncating to `n` bins.
    pub fn tail_mass(&self, n: usize) -> f64 {
        match self {
            InitialCondition::Monodisperse { .. } => 0.0,
            InitialCondition::Exponential { total_mass, decay } => {
                // Σ_{i>n} i q^i = q^{n+1} ((n+1) - n q) / (1-q)^2
                let q = *decay;
                let amplitude = total_mass * (1.0 - q).powi(2) / q;
                let nf = n as f64;
                amplitude * q.powf(nf + 1.0) * ((nf + 1.0) - nf * q) / (1.0 - q).powi(2)
            }
            InitialCondition::Explicit(v) => {
                if v.len() <= n {
                    0.0
                } else {
                    sum::sum(
                        v.iter()
                            .enumerate()
                            .skip(n)
                            .map(|(k, x)| (k + 1) as f64 * x),
                    )
                }
            }
        }
    }

    /// State at `t = 0` holding the first `n` sizes. Retained bins are not rescaled.
    pub fn init(&self, n: usize) -> Result<TruncatedState> {
        if n < 2 {
            return Err(Error::Domain(format!(
                "truncation size must be >= 2, got {n}"
            )));
        }
        let c = (1..=n).map(|i| self.concentration(i)).collect();
        TruncatedState::new(0.0, c)
    }
}

fn check_mass(total_mass: f64) -> Result<()> {
    if total_mass.is_finite() && total_mass > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(
            "total_mass",
            format!("{total_mass} is not a positive finite number"),
        ))
    }
}
