//! Rooms joined by thin passages: the sequence constraints, exact norms of
//! the piecewise-linear test functions `u_k`, and the ratio
//! `‖u_k‖² / ‖u_k‖²_{H¹}` whose positive limit shows the embedding
//! `H¹(Ω) ↪ L²(Ω)` is not compact.
//!
//! Sequences are kept as exact rationals so the constraints can be checked
//! without rounding; norms are evaluated in `f64`.

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub type Q = Ratio<i128>;

/// Largest truncation for which `(2k)^{-2(α+1)}` fits the rational type at `α = 3`.
pub const MAX_K: usize = 4096;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RpError {
    #[error("index {k} outside 2..={max}")]
    IndexOutOfRange { k: usize, max: usize },
    #[error("constraint {constraint} fails at k = {k}")]
    Constraint { constraint: &'static str, k: usize },
    #[error("truncation {0} outside 2..={MAX_K}")]
    InvalidLength(usize),
}

/// `d_k`, `d̂_k`, `β_k` for `k = 1..=K`, stored 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct RPSequences {
    pub d: Vec<Q>,
    pub dhat: Vec<Q>,
    pub beta: Vec<Q>,
    pub c1: Q,
    pub c2: Q,
    pub alpha: u32,
    /// Right ends of the rooms, `x_k = Σ_{j≤k}(d_j + d̂_j) − d̂_k`.
    pub x: Vec<f64>,
}

fn to_f64(q: &Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

fn pow(q: &Q, e: u32) -> Q {
    (0..e).fold(Q::from_integer(1), |acc, _| acc * q)
}

/// `(1/C1)·(max d̂)^{1−α}`.
pub fn c2_bound(dhat: &[Q], c1: &Q, alpha: u32) -> Q {
    let max = dhat
        .iter()
        .max()
        .cloned()
        .unwrap_or_else(|| Q::from_integer(1));
    pow(&max.recip(), alpha - 1) / c1
}

impl RPSequences {
    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// Checks every sequence constraint exactly.
    pub fn check(&self) -> Result<(), RpError> {
        let fail = |constraint, k| Err(RpError::Constraint { constraint, k });
        let k_max = self.len();
        if self.alpha < 3 {
            return fail("alpha >= 3", 0);
        }
        if self.c2 > c2_bound(&self.dhat, &self.c1, self.alpha) {
            return fail("C2 bound", 0);
        }
        for k in 0..k_max {
            let zero = Q::from_integer(0);
            if self.d[k] <= zero || self.dhat[k] <= zero || self.beta[k] <= zero {
                return fail("positivity", k + 1);
            }
            if self.beta[k] > self.c2 * pow(&self.dhat[k], self.alpha) {
                return fail("passage width", k + 1);
            }
            if k + 1 < k_max {
                let narrow = self.d[k].min(self.d[k + 1]);
                if self.dhat[k] > self.c1 * narrow {
                    return fail("passage length", k + 1);
                }
                if self.beta[k] > narrow {
                    return fail("passage thinner than rooms", k + 1);
                }
            }
        }
        Ok(())
    }
}

fn positions(d: &[Q], dhat: &[Q]) -> Vec<f64> {
    let mut total = 0.0;
    d.iter()
        .zip(dhat)
        .map(|(a, b)| {
            total += to_f64(a) + to_f64(b);
            total - to_f64(b)
        })
        .collect()
}

/// `d_k = (2k−1)^{-2}`, `d̂_k = (2k)^{-2}`, `C1 = 9/4`, `α = 3`,
/// `C2 = (1/C1)(max d̂)^{1−α} = 64/9` and `β_k = C2·d̂_k^{α+1}`.
///
/// The passage width sits a factor `d̂_k` below its cap `C2·d̂_k^α`; at the
/// cap `‖∇u_k‖²` tends to `2·C2` instead of zero.
pub fn default_sequences(k_max: usize) -> Result<RPSequences, RpError> {
    if !(2..=MAX_K).contains(&k_max) {
        return Err(RpError::InvalidLength(k_max));
    }
    let alpha = 3;
    let c1 = Q::new(9, 4);
    let d: Vec<Q> = (1..=k_max as i128)
        .map(|k| Q::new(1, (2 * k - 1) * (2 * k - 1)))
        .collect();
    let dhat: Vec<Q> = (1..=k_max as i128).map(|k| Q::new(1, 4 * k * k)).collect();
    let c2 = c2_bound(&dhat, &c1, alpha);
    let beta = dhat.iter().map(|h| c2 * pow(h, alpha + 1)).collect();
    let seq = RPSequences {
        x: positions(&d, &dhat),
        d,
        dhat,
        beta,
        c1,
        c2,
        alpha,
    };
    seq.check()?;
    Ok(seq)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionNorms {
    pub k: usize,
    pub l2_sq: f64,
    pub grad_sq: f64,
    pub ratio: f64,
}

/// Closed-form norms of `u_k` (1-based `k`, `2 ≤ k ≤ K − 1`).
pub fn test_function_norms(seq: &RPSequences, k: usize) -> Result<TestFunctionNorms, RpError> {
    let max = seq.len().saturating_sub(1);
    if !(2..=max).contains(&k) {
        return Err(RpError::IndexOutOfRange { k, max });
    }
    let (i, prev) = (k - 1, k - 2);
    let dk = to_f64(&seq.d[i]);
    let inv_d2 = 1.0 / (dk * dk);
    let (b0, h0) = (to_f64(&seq.beta[prev]), to_f64(&seq.dhat[prev]));
    let (b1, h1) = (to_f64(&seq.beta[i]), to_f64(&seq.dhat[i]));
    let l2_sq = 1.0 + inv_d2 / 3.0 * (b0 * h0 + b1 * h1);
    let grad_sq = inv_d2 * (b0 / h0 + b1 / h1);
    Ok(TestFunctionNorms {
        k,
        l2_sq,
        grad_sq,
        ratio: l2_sq / (l2_sq + grad_sq),
    })
}

/// Ratios for `k = 2..=K−1`, and the first `k` from which they never decrease.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaScan {
    pub rows: Vec<TestFunctionNorms>,
    pub monotone_from: usize,
}

pub fn gamma_lower_bound_scan(seq: &RPSequences) -> Result<GammaScan, RpError> {
    if seq.len() < 4 {
        return Err(RpError::InvalidLength(seq.len()));
    }
    let rows = (2..seq.len())
        .into_par_iter()
        .map(|k| test_function_norms(seq, k))
        .collect::<Result<Vec<_>, _>>()?;
    let mut start = rows.len() - 1;
    while start > 0 && rows[start - 1].ratio <= rows[start].ratio {
        start -= 1;
    }
    Ok(GammaScan {
        monotone_from: rows[start].k,
        rows,
    })
}

/// CSV with columns `k,l2_sq,grad_sq,ratio`.
pub fn scan_csv(scan: &GammaScan) -> String {
    let mut out = String::from("k,l2_sq,grad_sq,ratio\n");
    for r in &scan.rows {
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e}\n",
            r.k, r.l2_sq, r.grad_sq, r.ratio
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Midpoint rule over the room and both passages, evaluating `u_k` from
    /// its piecewise definition; one Richardson step removes the `h²` term.
    fn quadrature(seq: &RPSequences, k: usize, nx: usize) -> (f64, f64) {
        let f = |q: &Q| to_f64(q);
        let (i, prev) = (k - 1, k - 2);
        let (dk, xk) = (f(&seq.d[i]), seq.x[i]);
        let (h0, b0, x0) = (f(&seq.dhat[prev]), f(&seq.beta[prev]), seq.x[prev]);
        let (h1, b1) = (f(&seq.dhat[i]), f(&seq.beta[i]));
        // (x range, height, u(x), ∂u/∂x)
        type Piece<'a> = (f64, f64, f64, Box<dyn Fn(f64) -> (f64, f64) + 'a>);
        let pieces: Vec<Piece> = vec![
            (xk - dk, xk, dk, Box::new(move |_| (1.0 / dk, 0.0))),
            (
                xk,
                xk + h1,
                b1,
                Box::new(move |x| ((xk + h1 - x) / (dk * h1), -1.0 / (dk * h1))),
            ),
            (
                x0,
                x0 + h0,
                b0,
                Box::new(move |x| {
                    (
                        (x0 - x) / (dk * (x0 - xk + dk)),
                        -1.0 / (dk * (x0 - xk + dk)),
                    )
                }),
            ),
        ];
        let ny = 4;
        let (mut l2, mut grad) = (0.0, 0.0);
        for (a, b, height, u) in &pieces {
            let hx = (b - a) / nx as f64;
            let hy = height / ny as f64;
            for ix in 0..nx {
                let x = a + (ix as f64 + 0.5) * hx;
                let (v, dv) = u(x);
                for _ in 0..ny {
                    l2 += v * v * hx * hy;
                    grad += dv * dv * hx * hy;
                }
            }
        }
        (l2, grad)
    }

    fn oracle(seq: &RPSequences, k: usize) -> (f64, f64) {
        let mut nx = 8;
        let mut prev = quadrature(seq, k, nx);
        loop {
            nx *= 2;
            let next = quadrature(seq, k, nx);
            let ext = ((4.0 * next.0 - prev.0) / 3.0, (4.0 * next.1 - prev.1) / 3.0);
            if (next.0 - prev.0).abs() <= 1e-9 * next.0 || nx > 1 << 16 {
                return ext;
            }
            prev = next;
        }
    }

    #[test]
    fn default_values() {
        let s = default_sequences(3).unwrap();
        assert_eq!(s.d, vec![Q::new(1, 1), Q::new(1, 9), Q::new(1, 25)]);
        assert_eq!(s.dhat, vec![Q::new(1, 4), Q::new(1, 16), Q::new(1, 36)]);
        assert_eq!(s.c2, Q::new(64, 9));
        assert_eq!(s.dhat[0], s.c1 * s.d[0].min(s.d[1]));
        assert!((s.x[0] - 1.0).abs() < 1e-15);
        assert!((s.x[1] - (1.0 + 0.25 + 1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn default_constraints_hold_exactly() {
        default_sequences(MAX_K).unwrap().check().unwrap();
    }

    #[test]
    fn constraint_violation_reported() {
        let mut s = default_sequences(5).unwrap();
        s.beta[2] = s.c2 * pow(&s.dhat[2], 3) * Q::from_integer(2);
        assert_eq!(
            s.check(),
            Err(RpError::Constraint {
                constraint: "passage width",
                k: 3
            })
        );
    }

    #[test]
    fn zero_width_collapses() {
        let mut s = default_sequences(6).unwrap();
        s.beta.iter_mut().for_each(|b| *b = Q::from_integer(0));
        let n = test_function_norms(&s, 3).unwrap();
        assert_eq!((n.l2_sq, n.grad_sq, n.ratio), (1.0, 0.0, 1.0));
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let s = default_sequences(12).unwrap();
        for k in 2..=10 {
            let n = test_function_norms(&s, k).unwrap();
            let (l2, grad) = oracle(&s, k);
            assert!(
                (n.l2_sq - l2).abs() <= 1e-8 * l2,
                "k={k}: {} vs {l2}",
                n.l2_sq
            );
            assert!((n.grad_sq - grad).abs() <= 1e-8 * grad.max(1e-300), "k={k}");
        }
    }

    #[test]
    fn gradient_bound_holds() {
        let s = default_sequences(300).unwrap();
        let bound = 2.0 * to_f64(&s.c1) * to_f64(&s.c2);
        for k in 2..s.len() {
            let n = test_function_norms(&s, k).unwrap();
            let dk = to_f64(&s.d[k - 1]);
            assert!(n.grad_sq <= bound * dk.powi(s.alpha as i32 - 3));
        }
    }

    #[test]
    fn ratios_approach_one() {
        let s = default_sequences(250).unwrap();
        let scan = gamma_lower_bound_scan(&s).unwrap();
        let ratio = |k: usize| scan.rows[k - 2].ratio;
        assert!(ratio(50) >= 0.99);
        assert!(ratio(200) >= 0.999);
        for k in 20..=(s.len() - 11) {
            assert!(ratio(k + 10) >= ratio(k) - 1e-12);
        }
        assert!(scan.monotone_from <= 20);
    }

    #[test]
    fn index_bounds() {
        let s = default_sequences(5).unwrap();
        assert!(test_function_norms(&s, 1).is_err());
        assert!(test_function_norms(&s, 5).is_err());
        assert!(test_function_norms(&s, 4).is_ok());
    }
}
