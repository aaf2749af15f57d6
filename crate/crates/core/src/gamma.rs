//! Convex weights `γ` with `γ(0) = 0`, `γ'(0) ≥ 0`, `γ'` concave and `γ(r)/r → ∞`,
//! built to keep `Σ γ(i) c_i⁰` finite for a given initial condition.
//!
//! `γ'` is stored as a continuous piecewise-linear function through knots
//! `0 = m_0 < m_1 < …`, extended past the last knot with the last interval's slope.
//! Convexity is `γ'` non-decreasing; concavity of `γ'` is non-increasing slopes of `γ'`.

use crate::error::{Error, Result};
use crate::report::{CheckEntry, DiagnosticsReport};
use crate::sum;

/// `γ'(0)` of built weights. Any value `≥ 3/2` makes `γ(m_k)/m_k ≥ k` hold for every
/// knot when `γ'` rises by one per interval and intervals at least double.
pub const BUILD_BASE_SLOPE: f64 = 2.0;

/// Relative slack allowed when checking the construction invariants.
const REL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexWeight {
    knots: Vec<f64>,
    /// `γ'(m_k)`
    derivs: Vec<f64>,
    /// `γ(m_k)`
    values: Vec<f64>,
    /// `γ''` past the last knot.
    tail_curvature: f64,
    /// `γ(i)` for `i = 0..=cap`.
    cache: Vec<f64>,
    finiteness_bound: Option<f64>,
}

impl ConvexWeight {
    /// Weight whose derivative interpolates `derivs` at `knots` and continues past the
    /// last knot with curvature `tail_curvature`.
    pub fn from_derivative_knots(
        knots: Vec<f64>,
        derivs: Vec<f64>,
        tail_curvature: f64,
    ) -> Result<Self> {
        if knots.is_empty() || knots.len() != derivs.len() {
            return Err(Error::validation(
                "gamma",
                "knots and derivative values must be non-empty and of equal length",
            ));
        }
        if knots[0] != 0.0 {
            return Err(Error::validation("gamma", "first knot must be 0"));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) || knots.iter().any(|m| !m.is_finite()) {
            return Err(Error::validation(
                "gamma",
                "knots must be finite and strictly increasing",
            ));
        }
        if !(derivs[0] >= 0.0) || derivs.iter().any(|d| !d.is_finite()) {
            return Err(Error::validation(
                "gamma",
                "gamma'(0) must be finite and >= 0",
            ));
        }
        if derivs.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::validation(
                "gamma",
                "gamma' must be non-decreasing (convexity)",
            ));
        }
        let mut curvatures: Vec<f64> = knots
            .windows(2)
            .zip(derivs.windows(2))
            .map(|(m, d)| (d[1] - d[0]) / (m[1] - m[0]))
            .collect();
        if !(tail_curvature.is_finite() && tail_curvature >= 0.0) {
            return Err(Error::validation(
                "gamma",
                "tail curvature must be finite and >= 0",
            ));
        }
        curvatures.push(tail_curvature);
        if curvatures.windows(2).any(|w| w[1] > w[0] * (1.0 + REL_EPS)) {
            return Err(Error::validation(
                "gamma",
                "slopes of gamma' must be non-increasing (gamma' concave)",
            ));
        }
        let mut values = vec![0.0];
        for k in 1..knots.len() {
            let len = knots[k] - knots[k - 1];
            values.push(values[k - 1] + 0.5 * (derivs[k - 1] + derivs[k]) * len);
        }
        Ok(ConvexWeight {
            knots,
            derivs,
            values,
            tail_curvature,
            cache: Vec::new(),
            finiteness_bound: None,
        })
    }

    /// `γ(r) = slope · r`. Not superlinear; useful as a boundary case for the inequalities.
    pub fn linear(slope: f64) -> Result<Self> {
        Self::from_derivative_knots(vec![0.0], vec![slope], 0.0)
    }

    /// `γ(r) = r²`.
    pub fn quadratic() -> Result<Self> {
        Self::from_derivative_knots(vec![0.0], vec![0.0], 2.0)
    }

    /// Builds a weight adapted to `c0` (sizes `1..=c0.len()`, truncated at `cap`).
    ///
    /// Knots are chosen so that the mass tail `Σ_{i ≥ m_k} i c_i⁰ ≤ 2^{-k}` and
    /// `m_{k+1} ≥ 2 m_k`; `γ'` starts at [`BUILD_BASE_SLOPE`] and rises by one across each
    /// interval. Since `γ(i) ≤ i γ'(i) ≤ i (γ'(0) + k + 1)` on `[m_k, m_{k+1})`,
    ///
    /// ```text
    /// Σ γ(i) c_i⁰ ≤ Σ_{i < m_1} γ(i) c_i⁰ + Σ_{k ≥ 1} (γ'(0) + k + 1) 2^{-k}
    ///            = Σ_{i < m_1} γ(i) c_i⁰ + γ'(0) + 3,
    /// ```
    ///
    /// which is returned by [`ConvexWeight::finiteness_bound`]. Knots are laid out past
    /// `cap` and `γ(i)` is cached for `i ≤ cap`.
    pub fn build(c0: &[f64], cap: usize) -> Result<Self> {
        if cap == 0 {
            return Err(Error::Domain("gamma cap must be >= 1".into()));
        }
        let support = &c0[..c0.len().min(cap)];
        if let Some(k) = support.iter().position(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::validation(
                "c0",
                format!(
                    "c_{} = {} is not a finite non-negative number",
                    k + 1,
                    support[k]
                ),
            ));
        }
        // tails[m-1] = Σ_{i ≥ m} i c_i, tails[len] = 0
        let len = support.len();
        let mut tails = vec![0.0; len + 1];
        let mut acc = sum::CompensatedSum::new();
        for i in (1..=len).rev() {
            acc.add(i as f64 * support[i - 1]);
            tails[i - 1] = acc.value();
        }
        if !tails[0].is_finite() {
            return Err(Error::validation(
                "c0",
                "first moment is not finite over the cap",
            ));
        }
        let tail = |m: usize| if m > len { 0.0 } else { tails[m - 1] };
        let first_below = |from: usize, level: f64| {
            let mut m = from.max(1);
            while tail(m) > level {
                m += 1;
            }
            m
        };

        let mut knots_idx = vec![0usize];
        let mut k = 1;
        loop {
            let level = 0.5f64.powi(k);
            let prev = *knots_idx.last().unwrap();
            let m = first_below((2 * prev).max(1), level);
            knots_idx.push(m);
            if m > cap {
                break;
            }
            k += 1;
        }

        let knots: Vec<f64> = knots_idx.iter().map(|&m| m as f64).collect();
        let derivs: Vec<f64> = (0..knots.len())
            .map(|k| BUILD_BASE_SLOPE + k as f64)
            .collect();
        let tail_curvature = 1.0 / (knots[knots.len() - 1] - knots[knots.len() - 2]);
        let mut weight = Self::from_derivative_knots(knots, derivs, tail_curvature)?;

        weight.cache = (0..=cap).map(|i| weight.value_at(i as f64)).collect();
        let m1 = knots_idx[1];
        let head = sum::sum((1..m1.min(len + 1)).map(|i| weight.cache[i] * support[i - 1]));
        weight.finiteness_bound = Some(head + BUILD_BASE_SLOPE + 3.0);
        Ok(weight)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// `γ'` at the knots.
    pub fn knot_derivatives(&self) -> &[f64] {
        &self.derivs
    }

    /// `γ` at the knots.
    pub fn knot_values(&self) -> &[f64] {
        &self.values
    }

    /// Slope of `γ'` on each interval, the last entry being the tail.
    pub fn curvatures(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .knots
            .windows(2)
            .zip(self.derivs.windows(2))
            .map(|(m, d)| (d[1] - d[0]) / (m[1] - m[0]))
            .collect();
        out.push(self.tail_curvature);
        out
    }

    /// Bound on `Σ γ(i) c_i⁰` produced by [`ConvexWeight::build`].
    pub fn finiteness_bound(&self) -> Option<f64> {
        self.finiteness_bound
    }

    pub fn is_superlinear(&self) -> bool {
        self.tail_curvature > 0.0
    }

    fn segment(&self, r: f64) -> usize {
        self.knots.partition_point(|&m| m <= r) - 1
    }

    fn value_at(&self, r: f64) -> f64 {
        let k = self.segment(r);
        let x = r - self.knots[k];
        let curv = if k + 1 < self.knots.len() {
            (self.derivs[k + 1] - self.derivs[k]) / (self.knots[k + 1] - self.knots[k])
        } else {
            self.tail_curvature
        };
        self.values[k] + self.derivs[k] * x + 0.5 * curv * x * x
    }

    /// `γ(r)`; negative `r` is a domain error.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::Domain(format!(
                "gamma is defined on r >= 0, got {r}"
            )));
        }
        Ok(self.value_at(r))
    }

    /// `γ(i)` at an integer size, from the cache when available.
    #[inline]
    pub fn at(&self, i: usize) -> f64 {
        match self.cache.get(i) {
            Some(&v) => v,
            None => self.value_at(i as f64),
        }
    }

    /// `γ'(r)` for `r ≥ 0`.
    pub fn derivative(&self, r: f64) -> f64 {
        let k = self.segment(r.max(0.0));
        let x = r.max(0.0) - self.knots[k];
        let curv = if k + 1 < self.knots.len() {
            (self.derivs[k + 1] - self.derivs[k]) / (self.knots[k + 1] - self.knots[k])
        } else {
            self.tail_curvature
        };
        self.derivs[k] + curv * x
    }

    /// Smallest `γ(m_k)/m_k − k` over the knots `k ≥ 1`; non-negative means every
    /// stored knot witnesses superlinear growth at rate `k`.
    pub fn superlinearity_margin(&self) -> f64 {
        (1..self.knots.len())
            .map(|k| self.values[k] / self.knots[k] - k as f64)
            .fold(f64::INFINITY, f64::min)
    }

    /// `0 ≤ γ(i+1) − γ(i) ≤ ((3i+1)γ(1) + 2γ(i))/(i+1)` for `i = 1..=i_max`.
    ///
    /// Entries: `prop_increment_nonneg` with value `max_i −(γ(i+1) − γ(i))` against bound 0,
    /// and `prop_increment_upper` with value `max_i (γ(i+1) − γ(i)) / rhs_i` against bound 1.
    pub fn prop_inequality_check(&self, i_max: usize) -> DiagnosticsReport {
        let g1 = self.at(1);
        let mut worst_lower = f64::NEG_INFINITY;
        let mut worst_ratio = f64::NEG_INFINITY;
        let mut prev = g1;
        for i in 1..=i_max {
            let next = self.at(i + 1);
            let inc = next - prev;
            let x = i as f64;
            let rhs = ((3.0 * x + 1.0) * g1 + 2.0 * prev) / (x + 1.0);
            worst_lower = worst_lower.max(-inc);
            let ratio = if rhs > 0.0 {
                inc / rhs
            } else if inc <= 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst_ratio = worst_ratio.max(ratio);
            prev = next;
        }
        let mut report = DiagnosticsReport::new();
        report.push(CheckEntry::bounded(
            "prop_increment_nonneg",
            worst_lower,
            0.0,
            0.0,
        ));
        report.push(CheckEntry::bounded(
            "prop_increment_upper",
            worst_ratio,
            1.0,
            REL_EPS,
        ));
        report
    }
}
