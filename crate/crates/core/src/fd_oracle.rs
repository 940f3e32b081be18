//! Finite-difference reference eigensolver for δ′ chains.
//!
//! Each free segment gets a uniform grid; the 3-point Laplacian with
//! ghost-point Neumann ends is written in its symmetric (lumped-mass) form,
//! and a δ′ interface of strength `β` becomes a link of weight `1/β` between
//! the two one-sided nodes, discretizing `u′ = (u₊ − u₋)/β`. After the
//! `M^{-1/2} K M^{-1/2}` scaling the whole operator is a symmetric
//! tridiagonal matrix, so eigenvalues come from Sturm-sequence bisection.
//!
//! The scheme is second order in `h`; [`extrapolated_eigenvalues`] applies
//! one Richardson step over `h, h/2`.

use crate::chain::{Chain, Strength};

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl Tridiagonal {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Number of eigenvalues strictly below `lambda` (LDLᵀ inertia).
    pub fn sturm_count(&self, lambda: f64) -> usize {
        let n = self.diag.len();
        if n == 0 {
            return 0;
        }
        let tiny = f64::MIN_POSITIVE / f64::EPSILON;
        let mut count = 0;
        let mut q = self.diag[0] - lambda;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..n {
            let prev = if q == 0.0 { -tiny } else { q };
            q = self.diag[i] - lambda - self.off[i - 1] * self.off[i - 1] / prev;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The `index`-th eigenvalue (0-based, ascending) together with the final
    /// bisection bracket `[lo, hi]`.
    pub fn eigenvalue(&self, index: usize) -> (f64, f64, f64) {
        assert!(index < self.dim(), "eigenvalue index out of range");
        let (mut lo, mut hi) = self.gershgorin();
        let pad = 1e-12 * (lo.abs().max(hi.abs())).max(1.0);
        lo -= pad;
        hi += pad;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.sturm_count(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (0.5 * (lo + hi), lo, hi)
    }

    /// `(self + shift·I) x = rhs` by the Thomas algorithm (no pivoting; fine
    /// for the diagonally dominant shifted Laplacians used here).
    pub fn solve_shifted(&self, shift: f64, rhs: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut denom = self.diag[0] + shift;
        c[0] = if n > 1 { self.off[0] / denom } else { 0.0 };
        d[0] = rhs[0] / denom;
        for i in 1..n {
            denom = self.diag[i] + shift - self.off[i - 1] * c[i - 1];
            if i + 1 < n {
                c[i] = self.off[i] / denom;
            }
            d[i] = (rhs[i] - self.off[i - 1] * d[i - 1]) / denom;
        }
        let mut x = d;
        for i in (0..n.saturating_sub(1)).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        x
    }
}

/// Grid layout of a discretized chain.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub matrix: Tridiagonal,
    /// Lumped nodal masses (quadrature weights).
    pub masses: Vec<f64>,
    /// Node index ranges per segment.
    pub segment_nodes: Vec<std::ops::Range<usize>>,
}

/// Elements per segment for a target step `h` (at least one).
pub fn elements_for(length: f64, h: f64) -> usize {
    ((length / h).ceil() as usize).max(1)
}

/// Assembles the scaled tridiagonal matrix for `chain` with `elements[i]`
/// elements on segment `i`. `β = 0` interfaces must be merged beforehand.
pub fn assemble_with(chain: &Chain, elements: &[usize]) -> Discretization {
    assert_eq!(elements.len(), chain.segments.len());
    let total: usize = elements.iter().map(|n| n + 1).sum();
    let mut masses = vec![0.0; total];
    let mut stiff_diag = vec![0.0; total];
    let mut stiff_off = vec![0.0; total.saturating_sub(1)];
    let mut segment_nodes = Vec::with_capacity(elements.len());

    let mut start = 0;
    for (seg, (&t, &n)) in chain.segments.iter().zip(elements).enumerate() {
        let h = t / n as f64;
        let w = 1.0 / h;
        for e in 0..n {
            let i = start + e;
            masses[i] += 0.5 * h;
            masses[i + 1] += 0.5 * h;
            stiff_diag[i] += w;
            stiff_diag[i + 1] += w;
            stiff_off[i] -= w;
        }
        segment_nodes.push(start..start + n + 1);
        let end = start + n;
        if seg + 1 < chain.segments.len() {
            let link = match chain.interfaces[seg] {
                Strength::Infinite => 0.0,
                Strength::Finite(b) => {
                    assert!(
                        b > 0.0,
                        "zero-strength interfaces must be merged before assembly"
                    );
                    1.0 / b
                }
            };
            stiff_diag[end] += link;
            stiff_diag[end + 1] += link;
            stiff_off[end] -= link;
        }
        start = end + 1;
    }

    let diag = stiff_diag.iter().zip(&masses).map(|(k, m)| k / m).collect();
    let off = stiff_off
        .iter()
        .enumerate()
        .map(|(i, k)| k / (masses[i] * masses[i + 1]).sqrt())
        .collect();
    Discretization {
        matrix: Tridiagonal { diag, off },
        masses,
        segment_nodes,
    }
}

/// Assembles with step `h` on every segment (rounded up per segment).
pub fn assemble(chain: &Chain, h: f64) -> Discretization {
    let chain = chain.merged();
    let elements: Vec<usize> = chain.segments.iter().map(|&t| elements_for(t, h)).collect();
    assemble_with(&chain, &elements)
}

/// Number of discrete eigenvalues below `lambda` at step `h`.
pub fn count_below(chain: &Chain, h: f64, lambda: f64) -> usize {
    assemble(chain, h).matrix.sturm_count(lambda)
}

/// First `count` eigenvalues at steps `h` and `h/2`, Richardson-combined
/// (`(4λ_{h/2} − λ_h)/3`). Element counts are exactly doubled so the error
/// expansion is shared between the two levels.
pub fn extrapolated_eigenvalues(chain: &Chain, h: f64, count: usize) -> Vec<f64> {
    let chain = chain.merged();
    let coarse: Vec<usize> = chain.segments.iter().map(|&t| elements_for(t, h)).collect();
    let fine: Vec<usize> = coarse.iter().map(|n| 2 * n).collect();
    let a = assemble_with(&chain, &coarse).matrix;
    let b = assemble_with(&chain, &fine).matrix;
    assert!(count <= a.dim(), "grid too coarse for {count} eigenvalues");
    (0..count)
        .map(|j| {
            let lh = a.eigenvalue(j).0;
            let lh2 = b.eigenvalue(j).0;
            (4.0 * lh2 - lh) / 3.0
        })
        .collect()
}

/// Step satisfying `h·√Λ ≤ 0.01`, capped at `cap` so short chains still get a few nodes.
pub fn step_for_cutoff(cutoff: f64, cap: f64) -> f64 {
    let h = 0.01 / cutoff.max(1e-300).sqrt();
    h.min(cap)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assembly_is_scaled_stiffness() {
        // Dense reference: K and M built entry by entry, then M^{-1/2} K M^{-1/2}.
        let chain = Chain::new(
            vec![0.3, 0.5, 0.2],
            vec![Strength::Finite(0.7), Strength::Infinite],
        );
        let elements = [3usize, 4, 2];
        let disc = assemble_with(&chain, &elements);
        let n = disc.matrix.dim();
        let mut k = vec![vec![0.0; n]; n];
        let mut m = vec![0.0; n];
        let mut offset = 0;
        for (s, (&t, &ne)) in chain.segments.iter().zip(&elements).enumerate() {
            let h = t / ne as f64;
            for e in 0..ne {
                let (i, j) = (offset + e, offset + e + 1);
                k[i][i] += 1.0 / h;
                k[j][j] += 1.0 / h;
                k[i][j] -= 1.0 / h;
                k[j][i] -= 1.0 / h;
                m[i] += h / 2.0;
                m[j] += h / 2.0;
            }
            if s == 0 {
                let (i, j) = (offset + ne, offset + ne + 1);
                k[i][i] += 1.0 / 0.7;
                k[j][j] += 1.0 / 0.7;
                k[i][j] -= 1.0 / 0.7;
                k[j][i] -= 1.0 / 0.7;
            }
            offset += ne + 1;
        }
        let mut defect: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let scaled = k[i][j] / (m[i] * m[j]).sqrt();
                let ours = if i == j {
                    disc.matrix.diag[i]
                } else if j == i + 1 {
                    disc.matrix.off[i]
                } else if i == j + 1 {
                    disc.matrix.off[j]
                } else {
                    0.0
                };
                defect = defect.max((scaled - ours).abs() / scaled.abs().max(1.0));
                // Symmetry of the scaled dense form.
                let mirror = k[j][i] / (m[j] * m[i]).sqrt();
                assert!((scaled - mirror).abs() <= 1e-14 * scaled.abs().max(1.0));
            }
        }
        assert!(defect <= 1e-14, "assembly defect {defect}");
    }

    #[test]
    fn neumann_interval_converges() {
        let chain = Chain::new(vec![1.0], vec![]);
        let ev = extrapolated_eigenvalues(&chain, 1e-3, 3);
        let pi2 = std::f64::consts::PI.powi(2);
        assert!(ev[0].abs() < 1e-9);
        assert!((ev[1] - pi2).abs() < 1e-8, "{}", ev[1] - pi2);
        assert!((ev[2] - 4.0 * pi2).abs() < 1e-7, "{}", ev[2] - 4.0 * pi2);
    }

    #[test]
    fn thomas_solve_matches_product() {
        let t = Tridiagonal {
            diag: vec![2.0, 3.0, 4.0, 5.0],
            off: vec![-1.0, 0.5, -0.25],
        };
        let x = t.solve_shifted(1.0, &[1.0, 2.0, 3.0, 4.0]);
        let ax = [
            3.0 * x[0] - x[1],
            -x[0] + 4.0 * x[1] + 0.5 * x[2],
            0.5 * x[1] + 5.0 * x[2] - 0.25 * x[3],
            -0.25 * x[2] + 6.0 * x[3],
        ];
        for (i, v) in ax.iter().enumerate() {
            assert!((v - (i as f64 + 1.0)).abs() < 1e-14);
        }
    }
}
