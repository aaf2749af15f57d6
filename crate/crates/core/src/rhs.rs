//! Right-hand side of the non-conservative truncated system.
//!
//! With `A_k = c_k Σ_{j=1}^{k} j φ(k,j) c_j` (growth of a `k`-mer by one monomer) and
//! `D_i = c_i Σ_{j=i}^{n} φ(i,j) c_j` (dissolution of an `i`-mer into a larger partner):
//!
//! ```text
//! dc_1/dt = -A_1 - D_1
//! dc_i/dt = A_{i-1} - A_i - D_i        2 ≤ i ≤ n-1
//! dc_n/dt = A_{n-1}
//! ```
//!
//! The top bin has no loss term, so `Σ i dc_i/dt = -c_n Σ_{j<n} j φ(n,j) c_j`: mass leaves
//! the truncated system only through bin `n`.

use crate::error::{Error, Result};
use crate::kernel::{Family, KernelSpec};
use crate::sum::CompensatedSum;

/// Which algorithm produced a derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhsPath {
    /// O(n) prefix/suffix-sum evaluation.
    Fast,
    /// O(n²) evaluation, either requested or because the family has no fast form.
    Direct,
}

fn check_len(n: usize) -> Result<()> {
    if n < 2 {
        Err(Error::Domain(format!(
            "truncated system needs n >= 2, got {n}"
        )))
    } else {
        Ok(())
    }
}

/// O(n²) evaluation straight from the definition.
pub fn rhs_direct(kernel: &KernelSpec, c: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; c.len()];
    rhs_direct_into(kernel, c, &mut out)?;
    Ok(out)
}

pub fn rhs_direct_into(kernel: &KernelSpec, c: &[f64], out: &mut [f64]) -> Result<()> {
    let n = c.len();
    check_len(n)?;
    assert_eq!(out.len(), n, "output buffer length");
    let mut growth_prev = 0.0;
    for i in 1..n {
        let ci = c[i - 1];
        let (growth, dissolution) = if ci == 0.0 {
            (0.0, 0.0)
        } else {
            let mut g = CompensatedSum::new();
            for j in 1..=i {
                g.add(j as f64 * kernel.rate(i, j) * c[j - 1]);
            }
            let mut d = CompensatedSum::new();
            for j in i..=n {
                d.add(kernel.rate(i, j) * c[j - 1]);
            }
            (ci * g.value(), ci * d.value())
        };
        out[i - 1] = growth_prev - growth - dissolution;
        growth_prev = growth;
    }
    out[n - 1] = growth_prev;
    Ok(())
}

/// True when [`rhs_fast`] has an O(n) form for the kernel.
pub fn has_fast_path(kernel: &KernelSpec) -> bool {
    matches!(
        kernel.family(),
        Family::RatioSum | Family::Sum | Family::Constant | Family::Product
    )
}

/// O(n) evaluation for separable families; falls back to [`rhs_direct`] otherwise.
pub fn rhs_fast(kernel: &KernelSpec, c: &[f64]) -> Result<(Vec<f64>, RhsPath)> {
    let mut out = vec![0.0; c.len()];
    let path = rhs_fast_into(kernel, c, &mut out)?;
    Ok((out, path))
}

/// Separable families rewrite both inner sums through running sums of `c_j`, `j c_j`
/// and `j² c_j`:
///
/// ```text
///              j φ(k,j), j ≤ k      φ(i,j), j ≥ i
/// sum          k j + j²             i + j
/// ratio-sum    k + j                1 + j / i
/// constant     κ j                  κ
/// product      k j²                 i j
/// ```
///
/// On the diagonal `j = i` the ratio-sum minimum is taken as `i` in both columns.
pub fn rhs_fast_into(kernel: &KernelSpec, c: &[f64], out: &mut [f64]) -> Result<RhsPath> {
    let n = c.len();
    check_len(n)?;
    assert_eq!(out.len(), n, "output buffer length");
    let family = kernel.family();
    let kappa = kernel.kappa().unwrap_or(0.0);
    if !has_fast_path(kernel) {
        rhs_direct_into(kernel, c, out)?;
        return Ok(RhsPath::Direct);
    }

    // backward pass: dissolution D_i into out[i-1] for i < n
    let mut s0 = CompensatedSum::new();
    let mut s1 = CompensatedSum::new();
    s0.add(c[n - 1]);
    s1.add(n as f64 * c[n - 1]);
    for i in (1..n).rev() {
        let ci = c[i - 1];
        let x = i as f64;
        s0.add(ci);
        s1.add(x * ci);
        let (suffix0, suffix1) = (s0.value(), s1.value());
        let inner = match family {
            Family::Sum => x * suffix0 + suffix1,
            Family::RatioSum => suffix0 + suffix1 / x,
            Family::Constant => kappa * suffix0,
            Family::Product => x * suffix1,
            _ => unreachable!(),
        };
        out[i - 1] = ci * inner;
    }

    // forward pass: growth A_k and assembly
    let mut p0 = CompensatedSum::new();
    let mut p1 = CompensatedSum::new();
    let mut p2 = CompensatedSum::new();
    let mut growth_prev = 0.0;
    for k in 1..n {
        let ck = c[k - 1];
        let x = k as f64;
        p0.add(ck);
        p1.add(x * ck);
        p2.add(x * x * ck);
        let inner = match family {
            Family::Sum => x * p1.value() + p2.value(),
            Family::RatioSum => x * p0.value() + p1.value(),
            Family::Constant => kappa * p1.value(),
            Family::Product => x * p2.value(),
            _ => unreachable!(),
        };
        let growth = ck * inner;
        out[k - 1] = growth_prev - growth - out[k - 1];
        growth_prev = growth;
    }
    out[n - 1] = growth_prev;
    Ok(RhsPath::Fast)
}

/// Fast path when available, direct otherwise.
pub fn rhs_into(kernel: &KernelSpec, c: &[f64], out: &mut [f64]) -> Result<RhsPath> {
    rhs_fast_into(kernel, c, out)
}

/// Mass outflow through the top bin, `c_n Σ_{j=1}^{n-1} j φ(n,j) c_j ≥ 0`.
/// Satisfies `Σ i dc_i/dt = -leak_rate`.
pub fn leak_rate(kernel: &KernelSpec, c: &[f64]) -> Result<f64> {
    let n = c.len();
    check_len(n)?;
    let cn = c[n - 1];
    if cn == 0.0 {
        return Ok(0.0);
    }
    let mut acc = CompensatedSum::new();
    for j in 1..n {
        acc.add(j as f64 * kernel.rate(n, j) * c[j - 1]);
    }
    Ok(cn * acc.value())
}
