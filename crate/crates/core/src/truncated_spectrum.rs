//! Spectrum below a cutoff of the coupled operator restricted to its first
//! `N` cells, with Neumann conditions at `a` and `x_N`.
//!
//! Eigenvalues are isolated with an exact Prüfer-angle counting function,
//! refined by bisection on the shooting function `D(λ)`, and the count is
//! cross-checked against the finite-difference Sturm counter when the grid
//! is affordable and well conditioned.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::Chain;
use crate::fd_oracle;
use crate::operator_assembly::Schedule;

pub type Mat2 = [[f64; 2]; 2];

/// Below this `k·t` the sine terms use their Taylor series.
const SERIES_CUTOFF: f64 = 1e-4;
/// The shooting state is renormalized once its norm passes this value.
const RESCALE_AT: f64 = 1e100;
/// Lower end of the isolation window, as a fraction of `−Λ`. Chosen so that
/// no bisection midpoint lands exactly on `λ = 0`.
const LOWER_FRACTION: f64 = 0.381_966_011_250_105;
/// Relative width at which refinement stops.
const REFINE_TOL: f64 = 1e-14;
/// FD cross-check skipped above this many grid nodes.
const FD_NODE_LIMIT: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectrumError {
    #[error("truncation N = {n} is outside 1..={available}")]
    InvalidTruncation { n: usize, available: usize },
    #[error("cutoff must be finite and nonnegative, got {0}")]
    InvalidCutoff(f64),
    #[error("count mismatch below {probe}: shooting {shooting}, finite differences {fd}")]
    CountMismatch {
        probe: f64,
        shooting: usize,
        fd: usize,
    },
}

/// The first `n` cells of a schedule; `decoupled` replaces every `p_k` by `∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedOperator {
    pub schedule: Schedule,
    pub n: usize,
    pub decoupled: bool,
}

impl TruncatedOperator {
    pub fn new(schedule: Schedule, n: usize) -> Result<TruncatedOperator, SpectrumError> {
        let available = schedule.cells.len();
        if n == 0 || n > available {
            return Err(SpectrumError::InvalidTruncation { n, available });
        }
        Ok(TruncatedOperator {
            schedule,
            n,
            decoupled: false,
        })
    }

    pub fn decoupled(&self) -> TruncatedOperator {
        TruncatedOperator {
            decoupled: true,
            ..self.clone()
        }
    }

    pub fn chain(&self) -> Chain {
        self.schedule.chain(self.n, self.decoupled)
    }
}

/// Propagator of `(u, u′)` for `−u″ = λu` across a free segment of length `t`.
pub fn transfer_state(lambda: f64, t: f64) -> Mat2 {
    let k = lambda.max(0.0).sqrt();
    let x = k * t;
    let (c, s_over_k, k_s) = if x < SERIES_CUTOFF {
        let x2 = x * x;
        (
            1.0 - 0.5 * x2 * (1.0 - x2 / 12.0),
            t * (1.0 - x2 / 6.0 * (1.0 - x2 / 20.0)),
            lambda.max(0.0) * t * (1.0 - x2 / 6.0 * (1.0 - x2 / 20.0)),
        )
    } else {
        let (s, c) = x.sin_cos();
        (c, s / k, k * s)
    };
    [[c, s_over_k], [-k_s, c]]
}

/// Interface condition `u₊ = u₋ + β·u′`, `u′₊ = u′₋`.
pub fn jump_matrix(beta: f64) -> Mat2 {
    [[1.0, beta], [0.0, 1.0]]
}

fn apply(m: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

/// `D(λ) = value·exp(log_scale)`; the positive factor never moves zeros.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingValue {
    pub value: f64,
    pub log_scale: f64,
}

impl ShootingValue {
    pub fn sign(&self) -> f64 {
        if self.value == 0.0 {
            0.0
        } else {
            self.value.signum()
        }
    }
}

fn block_shooting(block: &Chain, lambda: f64) -> ShootingValue {
    let mut state = [1.0, 0.0];
    let mut log_scale = 0.0;
    for (i, &t) in block.segments.iter().enumerate() {
        state = apply(&transfer_state(lambda, t), state);
        if let Some(beta) = block.interfaces.get(i) {
            state = apply(&jump_matrix(beta.as_f64()), state);
        }
        let norm = state[0].abs().max(state[1].abs());
        if norm > RESCALE_AT {
            state = [state[0] / norm, state[1] / norm];
            log_scale += norm.ln();
        }
    }
    ShootingValue {
        value: state[1],
        log_scale,
    }
}

/// `u′` at the right end for the Neumann seed `(1, 0)` at the left end.
///
/// Infinite interfaces split the chain into independent blocks; the result
/// is the product of the blocks' shooting functions, so its zeros are the
/// union of their eigenvalues.
pub fn shooting_function(op: &TruncatedOperator, lambda: f64) -> ShootingValue {
    chain_shooting(&op.chain(), lambda)
}

pub fn chain_shooting(chain: &Chain, lambda: f64) -> ShootingValue {
    chain
        .blocks()
        .iter()
        .map(|b| block_shooting(b, lambda))
        .fold(
            ShootingValue {
                value: 1.0,
                log_scale: 0.0,
            },
            |acc, v| ShootingValue {
                value: acc.value * v.value,
                log_scale: acc.log_scale + v.log_scale,
            },
        )
}

/// Number of eigenvalues strictly below `lambda` for a block without
/// infinite interfaces.
///
/// Prüfer angle `ψ` with `(u, u′/k) = r·(cos ψ, −sin ψ)`, started at `ψ = 0`:
/// free segments add `k·t`, a jump maps `cot ψ ↦ cot ψ − kβ` inside the
/// same half-turn, and the count is `#{j ≥ 0 : jπ < ψ_end}`.
fn block_count(block: &Chain, lambda: f64) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    let k = lambda.sqrt();
    let below_pi = PI * (1.0 - f64::EPSILON);
    let mut turns: u64 = 0;
    let mut phi = 0.0_f64;
    for (i, &t) in block.segments.iter().enumerate() {
        phi += k * t;
        if phi >= PI {
            let r = (phi / PI).floor();
            turns += r as u64;
            phi -= r * PI;
            if phi < 0.0 {
                phi += PI;
                turns -= 1;
            } else if phi >= PI {
                phi -= PI;
                turns += 1;
            }
        }
        if let Some(beta) = block.interfaces.get(i) {
            if phi > 0.0 {
                let (s, c) = phi.sin_cos();
                phi = s.atan2(c - k * beta.as_f64() * s).min(below_pi);
            }
        }
    }
    turns as usize + usize::from(phi > 0.0)
}

/// Number of eigenvalues of the chain strictly below `lambda`.
pub fn chain_count(chain: &Chain, lambda: f64) -> usize {
    chain.blocks().iter().map(|b| block_count(b, lambda)).sum()
}

pub fn counting_function(op: &TruncatedOperator, lambda: f64) -> usize {
    chain_count(&op.chain(), lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Method {
    Shooting,
    FdOracle,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Shooting => "SHOOTING",
            Method::FdOracle => "FD_ORACLE",
        }
    }
}

/// Eigenvalues below `cutoff`, ascending, each with its isolating bracket.
///
/// Brackets are disjoint within a block; an eigenvalue shared by several
/// decoupled blocks appears once per block.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub cutoff: f64,
    pub eigenvalues: Vec<f64>,
    pub brackets: Vec<(f64, f64)>,
    pub method: Method,
    /// Counting function at `cutoff`.
    pub count: usize,
    /// Finite-difference count used for the cross-check, if it ran.
    pub fd_count: Option<usize>,
}

impl Spectrum {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        self.write_rows(&mut out);
        out
    }

    pub fn write_rows(&self, out: &mut String) {
        for (i, (lambda, (lo, hi))) in self.eigenvalues.iter().zip(&self.brackets).enumerate() {
            writeln!(
                out,
                "{i},{lambda:.16e},{lo:.16e},{hi:.16e},{}",
                self.method.label()
            )
            .unwrap();
        }
    }
}

pub const CSV_HEADER: &str = "index,lambda,bracket_lo,bracket_hi,method";

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub index: usize,
    pub lambda: f64,
    pub bracket: (f64, f64),
    pub method: Method,
}

/// Reads rows written by [`Spectrum::to_csv`]; `#` lines are skipped.
pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>, String> {
    let mut lines = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => return Err(format!("unexpected header {other:?}")),
    }
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(format!("expected 5 fields in {line:?}"));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
            let method = match f[4].trim() {
                "SHOOTING" => Method::Shooting,
                "FD_ORACLE" => Method::FdOracle,
                m => return Err(format!("unknown method {m:?}")),
            };
            Ok(CsvRow {
                index: f[0]
                    .trim()
                    .parse()
                    .map_err(|e| format!("{:?}: {e}", f[0]))?,
                lambda: num(f[1])?,
                bracket: (num(f[2])?, num(f[3])?),
                method,
            })
        })
        .collect()
}

/// Splits `[lo, hi)` into brackets holding one eigenvalue each; returns
/// `(lo, hi, index of first eigenvalue inside, multiplicity)`.
fn isolate(block: &Chain, lo: f64, hi: f64) -> Vec<(f64, f64, usize, usize)> {
    let mut out = Vec::new();
    let mut stack = vec![(lo, hi, block_count(block, lo), block_count(block, hi))];
    while let Some((lo, hi, nlo, nhi)) = stack.pop() {
        if nhi == nlo {
            continue;
        }
        let mid = lo + 0.5 * (hi - lo);
        if nhi - nlo == 1 || mid <= lo || mid >= hi {
            out.push((lo, hi, nlo, nhi - nlo));
            continue;
        }
        let nmid = block_count(block, mid);
        stack.push((mid, hi, nmid, nhi));
        stack.push((lo, mid, nlo, nmid));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Narrows a one-eigenvalue bracket by bisection on the sign of `D`,
/// falling back to the counting function if the signs do not straddle.
fn refine(block: &Chain, mut lo: f64, mut hi: f64, index: usize) -> (f64, f64, f64) {
    if index == 0 {
        // Constants are always the ground state.
        return (0.0, lo.min(-hi), hi);
    }
    let sign = |x: f64| block_shooting(block, x).sign();
    let mut slo = sign(lo);
    let shi = sign(hi);
    let by_sign = slo * shi < 0.0;
    for _ in 0..400 {
        if hi - lo <= REFINE_TOL * hi.abs().max(1.0) {
            break;
        }
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if by_sign {
            let s = sign(mid);
            if s == 0.0 {
                return (mid, lo, hi);
            }
            if s == slo {
                lo = mid;
                slo = s;
            } else {
                hi = mid;
            }
        } else if block_count(block, mid) > index {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo + 0.5 * (hi - lo), lo, hi)
}

/// Shooting spectrum without the FD cross-check.
pub fn chain_spectrum(chain: &Chain, cutoff: f64) -> Result<Spectrum, SpectrumError> {
    if !(cutoff.is_finite() && cutoff >= 0.0) {
        return Err(SpectrumError::InvalidCutoff(cutoff));
    }
    let blocks = chain.blocks();
    let lower = -LOWER_FRACTION * cutoff.max(f64::MIN_POSITIVE);
    let jobs: Vec<(usize, f64, f64, usize, usize)> = blocks
        .iter()
        .enumerate()
        .flat_map(|(b, block)| {
            isolate(block, lower, cutoff)
                .into_iter()
                .map(move |(lo, hi, first, mult)| (b, lo, hi, first, mult))
        })
        .collect();
    let mut found: Vec<(f64, f64, f64)> = jobs
        .par_iter()
        .flat_map_iter(|&(b, lo, hi, first, mult)| {
            let refined = refine(&blocks[b], lo, hi, first);
            std::iter::repeat_n(refined, mult)
        })
        .collect();
    found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    Ok(Spectrum {
        cutoff,
        count: found.len(),
        eigenvalues: found.iter().map(|f| f.0).collect(),
        brackets: found.iter().map(|f| (f.1, f.2)).collect(),
        method: Method::Shooting,
        fd_count: None,
    })
}

/// Whether the FD grid for `chain` at step `h` is small enough and its
/// matrix entries tame enough for an exact count near `cutoff`.
fn fd_feasible(chain: &Chain, h: f64, cutoff: f64) -> Option<fd_oracle::Discretization> {
    let merged = chain.merged();
    let nodes: usize = merged
        .segments
        .iter()
        .map(|&t| fd_oracle::elements_for(t, h) + 1)
        .sum();
    if nodes > FD_NODE_LIMIT {
        return None;
    }
    let disc = fd_oracle::assemble(chain, h);
    let scale = disc.matrix.diag.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    (scale * 64.0 * f64::EPSILON <= 1e-6 * cutoff.max(1.0)).then_some(disc)
}

/// A probe point in `[Λ/2, Λ]` with no eigenvalue within a relative `1e-4`.
fn probe_point(chain: &Chain, cutoff: f64) -> Option<f64> {
    (0..50)
        .map(|j| cutoff * (1.0 - 0.01 * j as f64))
        .find(|&c| chain_count(chain, c * (1.0 - 1e-4)) == chain_count(chain, c * (1.0 + 1e-4)))
}

/// Shooting spectrum below `cutoff`, with the FD count cross-check when
/// affordable (one automatic grid refinement before reporting a mismatch).
pub fn eigenvalues_below(op: &TruncatedOperator, cutoff: f64) -> Result<Spectrum, SpectrumError> {
    let chain = op.chain();
    let mut spectrum = chain_spectrum(&chain, cutoff)?;
    if cutoff > 0.0 {
        spectrum.fd_count = fd_cross_check(&chain, cutoff)?;
    }
    Ok(spectrum)
}

fn fd_cross_check(chain: &Chain, cutoff: f64) -> Result<Option<usize>, SpectrumError> {
    let Some(probe) = probe_point(chain, cutoff) else {
        return Ok(None);
    };
    let shooting = chain_count(chain, probe);
    let mut h = fd_oracle::step_for_cutoff(cutoff, 0.01);
    let mut fd = None;
    for _ in 0..2 {
        let Some(disc) = fd_feasible(chain, h, cutoff) else {
            return Ok(fd);
        };
        let count = disc.matrix.sturm_count(probe);
        if count == shooting {
            return Ok(Some(count));
        }
        fd = Some(count);
        h *= 0.5;
    }
    Err(SpectrumError::CountMismatch {
        probe,
        shooting,
        fd: fd.unwrap_or(0),
    })
}

/// Richardson-extrapolated FD eigenvalues below `cutoff` at step `h`.
pub fn fd_spectrum(chain: &Chain, cutoff: f64, h: f64) -> Spectrum {
    let merged = chain.merged();
    let coarse: Vec<usize> = merged
        .segments
        .iter()
        .map(|&t| fd_oracle::elements_for(t, h))
        .collect();
    let fine: Vec<usize> = coarse.iter().map(|n| 2 * n).collect();
    let a = fd_oracle::assemble_with(&merged, &coarse).matrix;
    let b = fd_oracle::assemble_with(&merged, &fine).matrix;
    let count = b.sturm_count(cutoff);
    let mut eigenvalues = Vec::with_capacity(count);
    let mut brackets = Vec::with_capacity(count);
    for j in 0..count {
        let (lh, ..) = a.eigenvalue(j);
        let (lh2, lo, hi) = b.eigenvalue(j);
        let ext = (4.0 * lh2 - lh) / 3.0;
        let pad = 1e-15 * ext.abs().max(1.0);
        eigenvalues.push(ext);
        brackets.push((lo.min(ext - pad), hi.max(ext + pad)));
    }
    Spectrum {
        cutoff,
        eigenvalues,
        brackets,
        method: Method::FdOracle,
        count,
        fd_count: Some(count),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub index: usize,
    pub coupled: f64,
    pub decoupled: f64,
    pub shift: f64,
}

/// Eigenvalue shifts caused by the couplings, next to the decay of `κ_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingScan {
    pub n: usize,
    pub cutoff: f64,
    pub rows: Vec<ScanRow>,
    /// `κ_1, …, κ_N`.
    pub kappa: Vec<f64>,
    /// `κ_{N+1}`.
    pub tail_kappa: f64,
    /// `4κ_{N+1}(b − a)² + 8κ_{N+1}`.
    pub tail_constant: f64,
    pub max_shift: f64,
    /// `max_shift / κ_1` (zero when `κ_1 = 0`).
    pub fitted_constant: f64,
}

pub fn coupling_perturbation_scan(
    schedule: &Schedule,
    n: usize,
    cutoff: f64,
) -> Result<CouplingScan, SpectrumError> {
    let op = TruncatedOperator::new(schedule.clone(), n)?;
    let coupled = chain_spectrum(&op.chain(), cutoff)?;
    // Coupling only raises eigenvalues, so the decoupled list below the same
    // cutoff is at least as long.
    let decoupled = chain_spectrum(&op.decoupled().chain(), cutoff)?;
    let rows: Vec<ScanRow> = coupled
        .eigenvalues
        .iter()
        .zip(&decoupled.eigenvalues)
        .enumerate()
        .map(|(index, (&c, &d))| ScanRow {
            index,
            coupled: c,
            decoupled: d,
            shift: (c - d).abs(),
        })
        .collect();
    let kappa: Vec<f64> = (1..=n).map(|j| schedule.kappa(j)).collect();
    let tail_kappa = schedule.kappa(n + 1);
    let width = schedule.b - schedule.a;
    let max_shift = rows.iter().map(|r| r.shift).fold(0.0, f64::max);
    let kappa1 = kappa.first().copied().unwrap_or(0.0);
    Ok(CouplingScan {
        n,
        cutoff,
        rows,
        kappa,
        tail_kappa,
        tail_constant: 4.0 * tail_kappa * width * width + 8.0 * tail_kappa,
        max_shift,
        fitted_constant: if kappa1 > 0.0 {
            max_shift / kappa1
        } else {
            0.0
        },
    })
}
