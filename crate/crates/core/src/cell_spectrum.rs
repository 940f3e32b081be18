//! Exact spectrum of a single cell: an interval of length `d` with Neumann
//! ends and a δ′-interaction of strength `q` at its midpoint.
//!
//! The interaction sits at the centre, so eigenfunctions split into
//! symmetric and antisymmetric modes. Symmetric modes do not see the jump
//! and give `(2nπ/d)²`, `n ≥ 0`. Antisymmetric modes `u = cos(kx)` on the
//! left half turn the jump condition `u′(y) = (u(y+) − u(y−))/q` into the
//! secular equation
//!
//! ```text
//! q·k·sin(kd/2) − 2·cos(kd/2) = 0,     k = √λ,
//! ```
//!
//! which has exactly one root with `kd/2 ∈ (nπ, nπ + π/2)` for each `n ≥ 0`
//! when `0 < q < ∞`. `q = ∞` pins those roots to `kd/2 = nπ` (two Neumann
//! halves), `q = 0` to `kd/2 = nπ + π/2` (the plain Neumann cell).

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::chain::{Chain, Strength};

/// Relative tolerance on `|λ₂(q) − s| / s` accepted by [`tune_q`].
pub const TUNE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CellError {
    #[error("cell length must be positive and finite, got {0}")]
    InvalidLength(f64),
    #[error("target {s} outside (0, (π/d)²) = (0, {limit}) for d = {d}")]
    TargetOutOfRange { d: f64, s: f64, limit: f64 },
    #[error("root isolation failed for branch {branch} (d = {d}, q = {q})")]
    BracketFailure { d: f64, q: f64, branch: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub d: f64,
    pub q: Strength,
}

impl CellSpec {
    pub fn new(d: f64, q: Strength) -> Result<CellSpec, CellError> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(CellError::InvalidLength(d));
        }
        Ok(CellSpec { d, q })
    }

    /// Two half-cells joined by the midpoint interaction.
    pub fn chain(&self) -> Chain {
        Chain::new(vec![0.5 * self.d, 0.5 * self.d], vec![self.q])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ModeParity {
    /// Symmetric about the midpoint; independent of `q`.
    Even,
    /// Antisymmetric; moves with `q`.
    Odd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEigenvalues {
    pub values: Vec<f64>,
    pub branch_tags: Vec<ModeParity>,
}

/// Antisymmetric-mode secular function `q·k·sin(kd/2) − 2·cos(kd/2)` at `k = √λ`.
///
/// It is entire in `λ` (value `−2` at `λ = 0`), so no special handling is
/// needed near `k = 0`.
pub fn secular_residual(d: f64, q: f64, lambda: f64) -> f64 {
    let k = lambda.max(0.0).sqrt();
    let half = 0.5 * k * d;
    q * k * half.sin() - 2.0 * half.cos()
}

/// `n`-th antisymmetric eigenvalue (`n ≥ 0`).
pub fn odd_eigenvalue(d: f64, q: Strength, n: usize) -> Result<f64, CellError> {
    let base = n as f64 * PI;
    let offset = match q {
        Strength::Infinite => 0.0,
        Strength::Finite(q) if q == 0.0 => FRAC_PI_2,
        Strength::Finite(q) => {
            // On x ∈ (0, π/2) with θ = nπ + x the equation, times (−1)^n, reads
            // (q/d)·θ·sin x − cos x = 0; the left side increases from −1 to (q/d)·θ.
            let ratio = q / d;
            let g = |x: f64| ratio * (base + x) * x.sin() - x.cos();
            let (mut lo, mut hi) = (0.0_f64, FRAC_PI_2);
            if !(g(lo) < 0.0 && g(hi) > 0.0) {
                return Err(CellError::BracketFailure { d, q, branch: n });
            }
            for _ in 0..2000 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let v = g(mid);
                if v == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if v < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        }
    };
    let k = 2.0 * (base + offset) / d;
    Ok(k * k)
}

/// First `count` eigenvalues of the cell, with multiplicity, ascending.
pub fn eigenvalues(cell: &CellSpec, count: usize) -> Result<CellEigenvalues, CellError> {
    let d = cell.d;
    let mut values = Vec::with_capacity(count);
    let mut branch_tags = Vec::with_capacity(count);
    if cell.q.is_zero() {
        for j in 0..count {
            let k = j as f64 * PI / d;
            values.push(k * k);
            branch_tags.push(if j % 2 == 0 {
                ModeParity::Even
            } else {
                ModeParity::Odd
            });
        }
        return Ok(CellEigenvalues {
            values,
            branch_tags,
        });
    }
    // Even (2nπ/d)² and odd roots interlace: even_n ≤ odd_n < even_{n+1}.
    let mut n = 0;
    while values.len() < count {
        let k = 2.0 * n as f64 * PI / d;
        values.push(k * k);
        branch_tags.push(ModeParity::Even);
        if values.len() < count {
            values.push(odd_eigenvalue(d, cell.q, n)?);
            branch_tags.push(ModeParity::Odd);
        }
        n += 1;
    }
    Ok(CellEigenvalues {
        values,
        branch_tags,
    })
}

/// `λ₂` of the cell, the lowest antisymmetric eigenvalue.
pub fn second_eigenvalue(d: f64, q: Strength) -> Result<f64, CellError> {
    odd_eigenvalue(d, q, 0)
}

/// Finds `q > 0` with `λ₂(q) = s`, for `0 < s < (π/d)²`.
///
/// The candidate `q = 2 / (k·tan(kd/2))`, `k = √s`, solves the secular
/// equation for the lowest antisymmetric branch; it is re-checked through
/// [`second_eigenvalue`] and, if the residual exceeds [`TUNE_TOL`], refined by
/// bisection on `ln q` using the monotone decrease of `λ₂` in `q`.
pub fn tune_q(d: f64, s: f64) -> Result<f64, CellError> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(CellError::InvalidLength(d));
    }
    let limit = (PI / d).powi(2);
    if !(s > 0.0 && s < limit) {
        return Err(CellError::TargetOutOfRange { d, s, limit });
    }
    let lambda2 = |q: f64| second_eigenvalue(d, Strength::Finite(q));
    let rel = |q: f64| -> Result<f64, CellError> { Ok((lambda2(q)? - s) / s) };

    let k = s.sqrt();
    let seed = 2.0 / (k * (0.5 * k * d).tan());
    if seed.is_finite() && seed > 0.0 && rel(seed)?.abs() <= TUNE_TOL {
        return Ok(seed);
    }

    // λ₂ decreases in q: find lo with λ₂ > s and hi with λ₂ < s.
    let start = if seed.is_finite() && seed > 0.0 {
        seed
    } else {
        1.0
    };
    let (mut lo, mut hi) = (start, start);
    while rel(lo)? <= 0.0 {
        lo *= 0.5;
        if lo < f64::MIN_POSITIVE {
            return Err(CellError::BracketFailure {
                d,
                q: lo,
                branch: 0,
            });
        }
    }
    while rel(hi)? >= 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(CellError::BracketFailure {
                d,
                q: hi,
                branch: 0,
            });
        }
    }
    let mut best = (f64::INFINITY, start);
    for _ in 0..300 {
        let mid = (0.5 * (lo.ln() + hi.ln())).exp();
        if mid <= lo || mid >= hi {
            break;
        }
        let r = rel(mid)?;
        if r.abs() < best.0 {
            best = (r.abs(), mid);
        }
        if r.abs() <= TUNE_TOL {
            break;
        }
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best.1)
}

/// Certified bound `max{d, 8/d}·|1/q̂ − 1/q|` on the operator-norm distance
/// between the resolvents `(A_q + I)^{-1}` and `(A_q̂ + I)^{-1}` of the cell.
pub fn resolvent_diff_bound(d: f64, q: f64, q_hat: f64) -> f64 {
    let c = d.max(8.0 / d);
    c * (1.0 / q_hat - 1.0 / q).abs()
}
