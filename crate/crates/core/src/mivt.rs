//! Multidimensional intermediate value solver for monotone maps on a box,
//! and its use to pin the middle eigenvalues of a coupled cell chain.

use std::f64::consts::PI;

use crate::cell_spectrum::{self, CellError};
use crate::chain::Strength;
use crate::operator_assembly::{AssemblyError, Schedule, ScheduleMeta};
use crate::truncated_spectrum::{self, SpectrumError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MivtError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("coordinate {k}: empty box [{lo}, {hi}]")]
    EmptyBox { k: usize, lo: f64, hi: f64 },
    #[error("sign matrix is not of the form τ_k·σ_j")]
    InvalidSigns,
    #[error("component {k}: corner values not ordered ({minus} ≥ {plus})")]
    CornerOrder { k: usize, minus: f64, plus: f64 },
    #[error("component {k}: target {target} outside [{minus}, {plus}]")]
    TargetOutside {
        k: usize,
        target: f64,
        minus: f64,
        plus: f64,
    },
    #[error("component {component} decreases along coordinate {coordinate}")]
    NotMonotone { component: usize, coordinate: usize },
    #[error("no convergence after {sweeps} sweeps; best residual {residual:e}")]
    NonConvergence {
        best: Vec<f64>,
        residual: f64,
        sweeps: usize,
    },
    #[error("coupling too strong: component {k} needs {minus} < {target} < {plus}")]
    CouplingTooStrong {
        k: usize,
        target: f64,
        minus: f64,
        plus: f64,
    },
    #[error("invalid chain tuning request: {0}")]
    InvalidSpec(String),
    #[error("eigenvalue {position} = {value} violates the window ({bound})")]
    WindowViolation {
        position: usize,
        value: f64,
        bound: f64,
    },
    #[error(transparent)]
    Cell(#[from] CellError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

/// `f: ∏[a_k, b_k] → ℝ^m` with a known monotonicity pattern and a target `F`.
///
/// Internally the problem is reflected into the normal form where every
/// component is nondecreasing in every coordinate: `x_j = σ_j y_j`,
/// `f̃_k = τ_k f_k`. Corner values refer to that normal form.
pub struct MonotoneBoxProblem<F> {
    lower: Vec<f64>,
    upper: Vec<f64>,
    coordinate_sign: Vec<f64>,
    component_sign: Vec<f64>,
    target: Vec<f64>,
    f: F,
    corner_minus: Vec<f64>,
    corner_plus: Vec<f64>,
}

/// Result of [`solve_box`], in the caller's coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSolution {
    pub x: Vec<f64>,
    pub residual: f64,
    pub sweeps: usize,
    /// Residual after each sweep.
    pub history: Vec<f64>,
    pub restarted: bool,
}

impl<F: Fn(&[f64]) -> Vec<f64>> MonotoneBoxProblem<F> {
    /// `signs[k][j]` is `+1` if `f_k` is nondecreasing in `x_j`, `−1` if
    /// nonincreasing. The pattern must factor as `τ_k·σ_j`.
    pub fn new(
        lower: Vec<f64>,
        upper: Vec<f64>,
        signs: &[Vec<f64>],
        target: Vec<f64>,
        f: F,
    ) -> Result<Self, MivtError> {
        let m = lower.len();
        if m == 0 || upper.len() != m || target.len() != m || signs.len() != m {
            return Err(MivtError::Dimension(format!(
                "{} lower, {} upper, {} targets, {} sign rows",
                m,
                upper.len(),
                target.len(),
                signs.len()
            )));
        }
        for k in 0..m {
            if !(lower[k] < upper[k]) {
                return Err(MivtError::EmptyBox {
                    k,
                    lo: lower[k],
                    hi: upper[k],
                });
            }
        }
        if let Some(k) = signs.iter().position(|row| row.len() != m) {
            return Err(MivtError::Dimension(format!(
                "sign row {k} has {} entries",
                signs[k].len()
            )));
        }
        let coordinate_sign: Vec<f64> = signs[0].iter().map(|s| s * signs[0][0]).collect();
        let component_sign: Vec<f64> = signs
            .iter()
            .map(|row| row[0] * coordinate_sign[0])
            .collect();
        for (k, row) in signs.iter().enumerate() {
            for (j, &s) in row.iter().enumerate() {
                if s.abs() != 1.0 || s != component_sign[k] * coordinate_sign[j] {
                    return Err(MivtError::InvalidSigns);
                }
            }
        }
        let mut problem = MonotoneBoxProblem {
            lower,
            upper,
            coordinate_sign,
            component_sign,
            target,
            f,
            corner_minus: Vec::new(),
            corner_plus: Vec::new(),
        };
        let (lo, hi) = problem.normal_box();
        for k in 0..m {
            let mut minus: Vec<f64> = hi.clone();
            minus[k] = lo[k];
            let mut plus: Vec<f64> = lo.clone();
            plus[k] = hi[k];
            problem.corner_minus.push(problem.eval_normal(&minus)[k]);
            problem.corner_plus.push(problem.eval_normal(&plus)[k]);
        }
        for k in 0..m {
            let (minus, plus) = (problem.corner_minus[k], problem.corner_plus[k]);
            if !(minus < plus) {
                return Err(MivtError::CornerOrder { k, minus, plus });
            }
            let target = problem.normal_target(k);
            if !(minus <= target && target <= plus) {
                return Err(MivtError::TargetOutside {
                    k,
                    target,
                    minus,
                    plus,
                });
            }
        }
        Ok(problem)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// `F_k^−` and `F_k^+` in normal form.
    pub fn corners(&self) -> (&[f64], &[f64]) {
        (&self.corner_minus, &self.corner_plus)
    }

    /// Target component `k` in normal form.
    pub fn normal_target(&self, k: usize) -> f64 {
        self.component_sign[k] * self.target[k]
    }

    fn normal_box(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.dim();
        let mut lo = Vec::with_capacity(m);
        let mut hi = Vec::with_capacity(m);
        for j in 0..m {
            if self.coordinate_sign[j] > 0.0 {
                lo.push(self.lower[j]);
                hi.push(self.upper[j]);
            } else {
                lo.push(-self.upper[j]);
                hi.push(-self.lower[j]);
            }
        }
        (lo, hi)
    }

    fn to_original(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(&self.coordinate_sign)
            .map(|(v, s)| v * s)
            .collect()
    }

    fn eval_normal(&self, y: &[f64]) -> Vec<f64> {
        let fx = (self.f)(&self.to_original(y));
        fx.iter()
            .zip(&self.component_sign)
            .map(|(v, s)| v * s)
            .collect()
    }

    fn residual_normal(&self, y: &[f64]) -> f64 {
        self.eval_normal(y)
            .iter()
            .enumerate()
            .map(|(k, v)| (v - self.normal_target(k)).abs())
            .fold(0.0, f64::max)
    }

    /// Samples each coordinate at three points (others at the box centre)
    /// and checks that no component decreases, up to `slack`.
    pub fn monotonicity_audit(&self, slack: f64) -> Result<(), MivtError> {
        let (lo, hi) = self.normal_box();
        let centre: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
        for j in 0..self.dim() {
            let values: Vec<Vec<f64>> = [lo[j], centre[j], hi[j]]
                .iter()
                .map(|&t| {
                    let mut y = centre.clone();
                    y[j] = t;
                    self.eval_normal(&y)
                })
                .collect();
            for k in 0..self.dim() {
                if values[1][k] < values[0][k] - slack || values[2][k] < values[1][k] - slack {
                    return Err(MivtError::NotMonotone {
                        component: k,
                        coordinate: j,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Solves `f_k(…, t, …) = F_k` for coordinate `k` with the others fixed.
/// Clamps to the nearer end when the target is not bracketed.
fn scalar_solve<F: Fn(&[f64]) -> Vec<f64>>(
    problem: &MonotoneBoxProblem<F>,
    y: &mut [f64],
    k: usize,
    lo: f64,
    hi: f64,
) {
    let target = problem.normal_target(k);
    let mut g = |t: f64| {
        y[k] = t;
        problem.eval_normal(y)[k] - target
    };
    if g(lo) >= 0.0 {
        y[k] = lo;
        return;
    }
    if g(hi) <= 0.0 {
        y[k] = hi;
        return;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let mid = a + 0.5 * (b - a);
        if mid <= a || mid >= b {
            break;
        }
        let v = g(mid);
        if v == 0.0 {
            a = mid;
            b = mid;
            break;
        }
        if v < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    y[k] = a + 0.5 * (b - a);
}

/// Cyclic coordinate bisection in the natural order; see [`solve_box_ordered`].
pub fn solve_box<F: Fn(&[f64]) -> Vec<f64>>(
    problem: &MonotoneBoxProblem<F>,
    tol: f64,
    max_sweeps: usize,
) -> Result<BoxSolution, MivtError> {
    let order: Vec<usize> = (0..problem.dim()).collect();
    solve_box_ordered(problem, tol, max_sweeps, &order)
}

/// Gauss–Seidel sweeps of scalar bisections, visiting coordinates in
/// `order`, until `‖f(x) − F‖_∞ ≤ tol`.
///
/// Starts at the box centre. If the residual drops by less than 10% over
/// three sweeps, restarts once from the point that interpolates each target
/// linearly between its corner values.
pub fn solve_box_ordered<F: Fn(&[f64]) -> Vec<f64>>(
    problem: &MonotoneBoxProblem<F>,
    tol: f64,
    max_sweeps: usize,
    order: &[usize],
) -> Result<BoxSolution, MivtError> {
    let m = problem.dim();
    if order.len() != m || (0..m).any(|k| !order.contains(&k)) {
        return Err(MivtError::Dimension(
            "sweep order must be a permutation".into(),
        ));
    }
    let (lo, hi) = problem.normal_box();
    let mut y: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut history = Vec::new();
    let mut restarted = false;
    let mut best = (f64::INFINITY, y.clone());
    let mut since_restart = 0;

    for sweep in 1..=max_sweeps {
        for &k in order {
            scalar_solve(problem, &mut y, k, lo[k], hi[k]);
        }
        let residual = problem.residual_normal(&y);
        history.push(residual);
        since_restart += 1;
        if residual < best.0 {
            best = (residual, y.clone());
        }
        if residual <= tol {
            return Ok(BoxSolution {
                x: problem.to_original(&y),
                residual,
                sweeps: sweep,
                history,
                restarted,
            });
        }
        let n = history.len();
        if !restarted && since_restart > 3 && history[n - 1] > 0.9 * history[n - 4] {
            restarted = true;
            since_restart = 0;
            y = (0..m)
                .map(|k| {
                    let (minus, plus) = (problem.corner_minus[k], problem.corner_plus[k]);
                    let w = (problem.normal_target(k) - minus) / (plus - minus);
                    lo[k] + w.clamp(0.0, 1.0) * (hi[k] - lo[k])
                })
                .collect();
        }
    }
    Err(MivtError::NonConvergence {
        best: problem.to_original(&best.1),
        residual: best.0,
        sweeps: max_sweeps,
    })
}

/// Request to place eigenvalues `m+1, …, 2m` of an `m`-cell chain at `targets`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTuneSpec {
    pub targets: Vec<f64>,
    pub lengths: Vec<f64>,
    pub coupling: f64,
    /// Open window `I` containing the targets; defaults to
    /// `(ν_1/2, (ν_m + min_k (2π/d_k)²)/2)`.
    pub window: Option<(f64, f64)>,
}

impl ChainTuneSpec {
    /// Uniform lengths `d = min(1, 0.99·π/√(2ν_m))`.
    pub fn with_default_lengths(targets: Vec<f64>, coupling: f64) -> ChainTuneSpec {
        let top = targets
            .last()
            .copied()
            .unwrap_or(1.0)
            .max(f64::MIN_POSITIVE);
        let d = (0.99 * PI / (2.0 * top).sqrt()).min(1.0);
        ChainTuneSpec {
            lengths: vec![d; targets.len()],
            targets,
            coupling,
            window: None,
        }
    }

    fn third_mode_floor(&self) -> f64 {
        self.lengths
            .iter()
            .map(|d| (2.0 * PI / d).powi(2))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn resolved_window(&self) -> (f64, f64) {
        self.window.unwrap_or_else(|| {
            let first = self.targets[0];
            let last = *self.targets.last().unwrap();
            (0.5 * first, 0.5 * (last + self.third_mode_floor()))
        })
    }

    fn validate(&self) -> Result<(), MivtError> {
        let bad = |m: String| Err(MivtError::InvalidSpec(m));
        let m = self.targets.len();
        if m == 0 || self.lengths.len() != m {
            return bad(format!("{m} targets, {} lengths", self.lengths.len()));
        }
        if !(self.coupling > 0.0 && self.coupling.is_finite()) {
            return bad(format!("coupling {}", self.coupling));
        }
        if self.targets[0] <= 0.0 || self.targets.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("targets must be positive and strictly increasing".into());
        }
        for &d in &self.lengths {
            if !(d > 0.0 && d.is_finite()) {
                return bad(format!("length {d}"));
            }
            let top = *self.targets.last().unwrap();
            if !(top < (PI / d).powi(2)) {
                return bad(format!("ν_m = {top} is not below (π/d)² for d = {d}"));
            }
        }
        let (inf, sup) = self.resolved_window();
        if !(0.0 < inf && inf < self.targets[0] && *self.targets.last().unwrap() < sup) {
            return bad(format!("window ({inf}, {sup}) must contain the targets"));
        }
        if !(sup < self.third_mode_floor()) {
            return bad(format!("window top {sup} reaches the third cell modes"));
        }
        Ok(())
    }
}

/// Outcome of [`tune_chain`].
#[derive(Debug, Clone, PartialEq)]
pub struct TunedChain {
    pub schedule: Schedule,
    /// Sorted eigenvalues `λ_1, …, λ_{2m+1}`.
    pub eigenvalues: Vec<f64>,
    pub solution: BoxSolution,
    pub window: (f64, f64),
}

fn chain_schedule(spec: &ChainTuneSpec, q: &[f64]) -> Result<Schedule, MivtError> {
    let strengths: Vec<Strength> = q.iter().map(|&v| Strength::Finite(v)).collect();
    let couplings = vec![Strength::Finite(spec.coupling); spec.targets.len() - 1];
    Ok(Schedule::from_parts(
        &spec.lengths,
        &strengths,
        &couplings,
        ScheduleMeta {
            source_set: None,
            k: spec.targets.len(),
        },
    )?)
}

/// The lowest `count` eigenvalues of the chain with strengths `q`.
fn lowest_eigenvalues(
    spec: &ChainTuneSpec,
    q: &[f64],
    count: usize,
) -> Result<Vec<f64>, MivtError> {
    let schedule = chain_schedule(spec, q)?;
    let chain = schedule.chain(spec.targets.len(), false);
    let mut cutoff = 2.0 * spec.resolved_window().1;
    loop {
        let spectrum = truncated_spectrum::chain_spectrum(&chain, cutoff)?;
        if spectrum.count >= count {
            return Ok(spectrum.eigenvalues[..count].to_vec());
        }
        cutoff *= 2.0;
    }
}

/// Solves for `q_1, …, q_m` with `λ_{m+k} = ν_k`.
///
/// Coordinates are `x_k = ln q_k`; every `λ_j` is nonincreasing in each of
/// them. The box for `q_k` is where the isolated cell `k` would place its
/// `λ₂` within `γ` of `ν_k`, with `γ` a third of the smallest gap.
pub fn tune_chain(spec: &ChainTuneSpec, tol: f64) -> Result<TunedChain, MivtError> {
    spec.validate()?;
    let m = spec.targets.len();
    let window = spec.resolved_window();
    let mut gamma = f64::INFINITY;
    for w in spec.targets.windows(2) {
        gamma = gamma.min((w[1] - w[0]) / 3.0);
    }
    gamma = gamma
        .min((spec.targets[0] - window.0) / 2.0)
        .min((window.1 - spec.targets[m - 1]) / 2.0);
    let mut lower = Vec::with_capacity(m);
    let mut upper = Vec::with_capacity(m);
    for (&d, &nu) in spec.lengths.iter().zip(&spec.targets) {
        let top = (nu + gamma).min(0.5 * (nu + (PI / d).powi(2)));
        lower.push(cell_spectrum::tune_q(d, top)?.ln());
        upper.push(cell_spectrum::tune_q(d, nu - gamma)?.ln());
    }

    let f = |x: &[f64]| -> Vec<f64> {
        let q: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        lowest_eigenvalues(spec, &q, 2 * m)
            .map(|v| v[m..].to_vec())
            .unwrap_or_else(|_| vec![f64::NAN; m])
    };
    let signs = vec![vec![-1.0; m]; m];
    // Corners are reported back on the eigenvalue scale.
    let too_strong = |k: usize, minus: f64, plus: f64| MivtError::CouplingTooStrong {
        k,
        target: spec.targets[k],
        minus: -plus,
        plus: -minus,
    };
    let problem = match MonotoneBoxProblem::new(lower, upper, &signs, spec.targets.clone(), f) {
        Ok(p) => p,
        Err(MivtError::CornerOrder { k, minus, plus })
        | Err(MivtError::TargetOutside { k, minus, plus, .. }) => {
            return Err(too_strong(k, minus, plus))
        }
        Err(e) => return Err(e),
    };
    // The chain corners must straddle the targets strictly.
    let (minus, plus) = problem.corners();
    for k in 0..m {
        let target = problem.normal_target(k);
        if !(minus[k] < target && target < plus[k]) {
            return Err(too_strong(k, minus[k], plus[k]));
        }
    }
    problem.monotonicity_audit(1e-10 * spec.targets[m - 1])?;

    let solution = solve_box(&problem, tol, 200)?;
    let q: Vec<f64> = solution.x.iter().map(|v| v.exp()).collect();
    let eigenvalues = lowest_eigenvalues(spec, &q, 2 * m + 1)?;
    for (j, &v) in eigenvalues[..m].iter().enumerate() {
        if !(v < window.0) {
            return Err(MivtError::WindowViolation {
                position: j + 1,
                value: v,
                bound: window.0,
            });
        }
    }
    if !(eigenvalues[2 * m] > window.1) {
        return Err(MivtError::WindowViolation {
            position: 2 * m + 1,
            value: eigenvalues[2 * m],
            bound: window.1,
        });
    }
    Ok(TunedChain {
        schedule: chain_schedule(spec, &q)?,
        eigenvalues,
        solution,
        window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Gaussian elimination for the linear oracle.
    fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for c in 0..n {
            let p = (c..n)
                .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
                .unwrap();
            a.swap(c, p);
            b.swap(c, p);
            for r in c + 1..n {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
            x[r] = (b[r] - s) / a[r][r];
        }
        x
    }

    fn linear_problem(m: usize) -> MonotoneBoxProblem<impl Fn(&[f64]) -> Vec<f64>> {
        let f = move |x: &[f64]| {
            let mean = x.iter().sum::<f64>() / m as f64;
            x.iter().map(|v| v + 0.1 * mean).collect()
        };
        MonotoneBoxProblem::new(
            vec![0.0; m],
            vec![1.0; m],
            &vec![vec![1.0; m]; m],
            vec![0.5; m],
            f,
        )
        .unwrap()
    }

    #[test]
    fn identity_in_one_sweep() {
        let p = MonotoneBoxProblem::new(
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            &[vec![1.0, 1.0], vec![1.0, 1.0]],
            vec![0.3, 0.7],
            |x: &[f64]| x.to_vec(),
        )
        .unwrap();
        let s = solve_box(&p, 1e-14, 10).unwrap();
        assert_eq!(s.sweeps, 1);
        assert!((s.x[0] - 0.3).abs() < 1e-14 && (s.x[1] - 0.7).abs() < 1e-14);
    }

    #[test]
    fn linear_coupled_matches_direct_solve() {
        let m = 3;
        let p = linear_problem(m);
        let s = solve_box(&p, 1e-12, 100).unwrap();
        let a: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| if i == j { 1.0 + 0.1 / 3.0 } else { 0.1 / 3.0 })
                    .collect()
            })
            .collect();
        let oracle = solve_linear(a, vec![0.5; m]);
        for (x, o) in s.x.iter().zip(&oracle) {
            assert!((x - o).abs() <= 1e-12, "{x} vs {o}");
        }
        assert!(s.residual <= 1e-12);
    }

    #[test]
    fn sweep_order_does_not_matter() {
        let p = linear_problem(3);
        let a = solve_box_ordered(&p, 1e-13, 100, &[0, 1, 2]).unwrap();
        let b = solve_box_ordered(&p, 1e-13, 100, &[2, 0, 1]).unwrap();
        for (x, y) in a.x.iter().zip(&b.x) {
            assert!((x - y).abs() <= 10.0 * 1e-13);
        }
    }

    #[test]
    fn reflected_coordinates() {
        // f_k = −x_k: nonincreasing in own coordinate.
        let p = MonotoneBoxProblem::new(
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            &[vec![-1.0, -1.0], vec![-1.0, -1.0]],
            vec![-0.25, -0.5],
            |x: &[f64]| vec![-x[0] - 0.01 * x[1], -x[1] - 0.01 * x[0]],
        )
        .unwrap();
        let s = solve_box(&p, 1e-13, 50).unwrap();
        assert!((-s.x[0] - 0.01 * s.x[1] + 0.25).abs() <= 1e-13);
    }

    #[test]
    fn target_outside_corners_rejected() {
        let r = MonotoneBoxProblem::new(
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            &[vec![1.0, 1.0], vec![1.0, 1.0]],
            vec![1.5, 0.5],
            |x: &[f64]| x.to_vec(),
        );
        assert!(matches!(r, Err(MivtError::TargetOutside { k: 0, .. })));
    }

    #[test]
    fn mixed_signs_must_factor() {
        let r = MonotoneBoxProblem::new(
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            &[vec![1.0, -1.0], vec![1.0, 1.0]],
            vec![0.5, 0.5],
            |x: &[f64]| x.to_vec(),
        );
        assert_eq!(r.err(), Some(MivtError::InvalidSigns));
    }

    #[test]
    fn single_cell_chain() {
        let spec = ChainTuneSpec {
            targets: vec![1.0],
            lengths: vec![1.0],
            coupling: 1e3,
            window: None,
        };
        let tuned = tune_chain(&spec, 1e-10).unwrap();
        assert!((tuned.eigenvalues[1] - 1.0).abs() <= 1e-10);
        assert!((tuned.eigenvalues[0]).abs() == 0.0);
    }

    #[test]
    fn three_cell_chain_hits_targets() {
        let spec = ChainTuneSpec::with_default_lengths(vec![1.0, 2.0, 3.0], 1e3);
        let tuned = tune_chain(&spec, 1e-9).unwrap();
        for (v, nu) in tuned.eigenvalues[3..6].iter().zip([1.0, 2.0, 3.0]) {
            assert!((v - nu).abs() <= 1e-8, "{v} vs {nu}");
        }
        assert!(tuned.eigenvalues[..3].iter().all(|&v| v < tuned.window.0));
        assert!(tuned.eigenvalues[6] > tuned.window.1);
    }

    #[test]
    fn strong_coupling_rejected() {
        let spec = ChainTuneSpec::with_default_lengths(vec![1.0, 2.0], 1e-3);
        let r = tune_chain(&spec, 1e-8);
        assert!(
            matches!(r, Err(MivtError::CouplingTooStrong { .. })),
            "{r:?}"
        );
    }
}
