//! Matrix model of a self-adjoint extension whose resolvent differs from a
//! reference resolvent by the resolvent of a boundary parameter `Ξ`:
//!
//! `(A − μ)^{-1} = (A₀ − μ)^{-1} + P*(Ξ − μ)^{-1}P`,
//!
//! with `P` the projection onto the first `m` coordinates. Finite matrices
//! have no essential spectrum; the clustering experiment only shows
//! eigenvalues of `A` gathering where those of `Ξ` accumulate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{jacobi_eigen, Lu, Matrix};
use crate::target_set::cover_distance;

/// Minimum distance of `μ` from both spectra.
pub const SEPARATION: f64 = 1e-8;
/// `R_μ` is rejected when its smallest eigenvalue modulus falls below this
/// fraction of the largest.
pub const SINGULAR_RATIO: f64 = 1e-12;
/// Step used when re-picking `μ`.
pub const GOLDEN_STEP: f64 = 0.618_033_988_749_894_9;
pub const MAX_REPICKS: usize = 20;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExtensionError {
    #[error("{0} is not symmetric")]
    NotSymmetric(&'static str),
    #[error("boundary block of size {m} does not fit in dimension {n}")]
    Dimension { n: usize, m: usize },
    #[error("μ = {mu} is within {distance:e} of the spectrum of {which}")]
    NotSeparated {
        which: &'static str,
        mu: f64,
        distance: f64,
    },
    #[error("R_μ is numerically singular (|r|_min/|r|_max = {ratio:e})")]
    SingularRmu { ratio: f64 },
    #[error("no admissible μ after {0} attempts")]
    NoAdmissibleMu(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionModel {
    pub a0: Matrix,
    pub xi: Matrix,
    pub mu: f64,
}

impl ExtensionModel {
    pub fn new(a0: Matrix, xi: Matrix, mu: f64) -> Result<ExtensionModel, ExtensionError> {
        let (n, m) = (a0.dim(), xi.dim());
        if m > n {
            return Err(ExtensionError::Dimension { n, m });
        }
        if a0.asymmetry() > 1e-13 * a0.max_abs().max(1.0) {
            return Err(ExtensionError::NotSymmetric("A0"));
        }
        if xi.asymmetry() > 1e-13 * xi.max_abs().max(1.0) {
            return Err(ExtensionError::NotSymmetric("Xi"));
        }
        for (which, mat) in [("A0", &a0), ("Xi", &xi)] {
            if mat.dim() == 0 {
                continue;
            }
            let distance = jacobi_eigen(mat)
                .values
                .iter()
                .map(|v| (v - mu).abs())
                .fold(f64::INFINITY, f64::min);
            if !(distance > SEPARATION) {
                return Err(ExtensionError::NotSeparated {
                    which,
                    mu,
                    distance,
                });
            }
        }
        Ok(ExtensionModel { a0, xi, mu })
    }

    pub fn n(&self) -> usize {
        self.a0.dim()
    }

    pub fn m(&self) -> usize {
        self.xi.dim()
    }

    /// `(A₀ − μ)^{-1}`.
    pub fn reference_resolvent(&self) -> Matrix {
        invert(&self.a0.shifted(-self.mu))
    }

    /// `P*(Ξ − μ)^{-1}P` as an `n × n` matrix.
    pub fn boundary_resolvent(&self) -> Matrix {
        if self.m() == 0 {
            return Matrix::zeros(self.n());
        }
        Matrix::embedded(&invert(&self.xi.shifted(-self.mu)), self.n())
    }
}

fn invert(m: &Matrix) -> Matrix {
    Lu::factor(m)
        .expect("separated shift is invertible")
        .inverse()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionResult {
    pub a: Matrix,
    pub r_mu: Matrix,
    /// `‖A − Aᵀ‖_max / max(‖A‖_max, 1)`.
    pub symmetry_defect: f64,
    /// `‖R_μ − R_μᵀ‖_max / max(‖R_μ‖_max, 1)` before symmetrization.
    pub resolvent_symmetry_defect: f64,
}

/// `A = R_μ^{-1} + μ`, inverted through the eigen-decomposition of `R_μ`.
pub fn build_extension(model: &ExtensionModel) -> Result<ExtensionResult, ExtensionError> {
    let r0 = model.reference_resolvent();
    if model.m() == 0 {
        return Ok(ExtensionResult {
            a: model.a0.clone(),
            resolvent_symmetry_defect: r0.asymmetry() / r0.max_abs().max(1.0),
            r_mu: r0,
            symmetry_defect: model.a0.asymmetry() / model.a0.max_abs().max(1.0),
        });
    }
    let raw = r0.add(&model.boundary_resolvent());
    let resolvent_symmetry_defect = raw.asymmetry() / raw.max_abs().max(1.0);
    let r_mu = raw.symmetrized();
    let eig = jacobi_eigen(&r_mu);
    let largest = eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let smallest = eig.values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(smallest >= SINGULAR_RATIO * largest) || largest == 0.0 {
        return Err(ExtensionError::SingularRmu {
            ratio: smallest / largest,
        });
    }
    let inverse_values: Vec<f64> = eig.values.iter().map(|r| 1.0 / r).collect();
    let a = Matrix::congruence(&eig.vectors, &inverse_values).shifted(model.mu);
    Ok(ExtensionResult {
        symmetry_defect: a.asymmetry() / a.max_abs().max(1.0),
        a,
        r_mu,
        resolvent_symmetry_defect,
    })
}

/// `‖(A − μ)^{-1} − P*(Ξ − μ)^{-1}P − (A₀ − μ)^{-1}‖_max`, with the first
/// resolvent recomputed by LU from `A`.
pub fn weyl_identity_check(model: &ExtensionModel, result: &ExtensionResult) -> f64 {
    let resolvent = invert(&result.a.shifted(-model.mu));
    resolvent
        .sub(&model.boundary_resolvent())
        .sub(&model.reference_resolvent())
        .max_abs()
}

/// Largest relative defect over `trials` random `h` of the boundary
/// condition `(Ξ − μ)f_μ = P(A₀ − μ)f₀` and of `f₀ + f_μ = (A − μ)^{-1}h`,
/// where `f₀ = (A₀ − μ)^{-1}h` and `f_μ = (Ξ − μ)^{-1}Ph`.
pub fn boundary_condition_check(
    model: &ExtensionModel,
    result: &ExtensionResult,
    trials: usize,
    seed: u64,
) -> f64 {
    let (n, m) = (model.n(), model.m());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a0_shift = model.a0.shifted(-model.mu);
    let a0_lu = Lu::factor(&a0_shift).expect("separated shift is invertible");
    let xi_shift = model.xi.shifted(-model.mu);
    let xi_lu = (m > 0).then(|| Lu::factor(&xi_shift).expect("separated shift is invertible"));
    let a_lu = Lu::factor(&result.a.shifted(-model.mu)).expect("μ is not an eigenvalue of A");
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let h: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let f0 = a0_lu.solve(&h);
        let mut f_mu = vec![0.0; n];
        if let Some(lu) = &xi_lu {
            let head = lu.solve(&h[..m]);
            f_mu[..m].copy_from_slice(&head);
            let lhs = xi_shift.matvec(&head);
            let rhs = a0_shift.matvec(&f0);
            for k in 0..m {
                worst = worst.max((lhs[k] - rhs[k]).abs() / norm);
            }
        }
        let g = a_lu.solve(&h);
        for k in 0..n {
            worst = worst.max((f0[k] + f_mu[k] - g[k]).abs() / norm);
        }
    }
    worst
}

/// Random admissible model: `A₀ = Q diag(1, …, n) Qᵀ`, `Ξ` uniform
/// symmetric, `μ` one unit below both spectra.
pub fn random_model(n: usize, m: usize, seed: u64) -> ExtensionModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = Matrix::random_orthogonal(n, &mut rng);
    let spread: Vec<f64> = (1..=n)
        .map(|j| j as f64 + rng.gen_range(-0.25..0.25))
        .collect();
    let a0 = Matrix::congruence(&q, &spread).symmetrized();
    let xi = Matrix::random_symmetric(m, &mut rng);
    let low_a0 = spread.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let low_xi = if m > 0 {
        jacobi_eigen(&xi).values[0]
    } else {
        f64::INFINITY
    };
    let mu = low_a0.min(low_xi) - 1.0;
    ExtensionModel::new(a0, xi, mu).expect("random model is admissible")
}

/// Spread of the reference eigenvalues `A₀ = diag(j·γ)`.
pub const DEFAULT_SPREAD: f64 = 7.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRow {
    pub n: usize,
    pub m: usize,
    pub mu: f64,
    /// `max_c min_λ |λ − c|` over the cluster points `c`.
    pub distance: f64,
    /// Eigenvalues of `A` inside the window.
    pub window_eigenvalues: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterTable {
    pub note: String,
    pub clusters: Vec<f64>,
    pub window: (f64, f64),
    pub rows: Vec<ClusterRow>,
}

/// `Ξ = Q diag(ξ) Qᵀ` where the `ξ_j` run through `c + 1/t` round-robin
/// over the clusters `c`.
pub fn clustered_xi(clusters: &[f64], m: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let values: Vec<f64> = (0..m)
        .map(|j| {
            let c = clusters[j % clusters.len()];
            let t = (j / clusters.len() + 1) as f64;
            c + 1.0 / t
        })
        .collect();
    let q = Matrix::random_orthogonal(m, rng);
    Matrix::congruence(&q, &values).symmetrized()
}

/// Builds `A` for each size and measures how closely its eigenvalues in the
/// window approach every cluster point.
pub fn clustering_experiment(
    clusters: &[f64],
    sizes: &[(usize, usize)],
    mu: f64,
    seed: u64,
) -> Result<ClusterTable, ExtensionError> {
    assert!(!clusters.is_empty(), "at least one cluster point");
    let top = clusters.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let window = (
        clusters.iter().fold(f64::INFINITY, |a, &b| a.min(b)) - 1.0,
        top + 1.0,
    );
    let rows = sizes
        .par_iter()
        .enumerate()
        .map(|(i, &(n, m))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let a0 = Matrix::diagonal(
                &(1..=n)
                    .map(|j| j as f64 * DEFAULT_SPREAD)
                    .collect::<Vec<_>>(),
            );
            let xi = clustered_xi(clusters, m, &mut rng);
            let mut candidate = mu;
            for _ in 0..MAX_REPICKS {
                let attempt = ExtensionModel::new(a0.clone(), xi.clone(), candidate)
                    .and_then(|model| build_extension(&model).map(|r| (model, r)));
                match attempt {
                    Ok((model, result)) => {
                        let values: Vec<f64> = jacobi_eigen(&result.a)
                            .values
                            .into_iter()
                            .filter(|v| (window.0..=window.1).contains(v))
                            .collect();
                        let distance = if values.is_empty() {
                            f64::INFINITY
                        } else {
                            cover_distance(clusters, &[], &values)
                        };
                        return Ok(ClusterRow {
                            n,
                            m,
                            mu: model.mu,
                            distance,
                            window_eigenvalues: values.len(),
                        });
                    }
                    Err(
                        ExtensionError::SingularRmu { .. } | ExtensionError::NotSeparated { .. },
                    ) => {
                        candidate += GOLDEN_STEP;
                    }
                    Err(e) => return Err(e),
                }
            }
            Err(ExtensionError::NoAdmissibleMu(MAX_REPICKS))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ClusterTable {
        note: "finite matrices have no essential spectrum; distances measure how closely \
               eigenvalues of A gather at the accumulation points of Xi"
            .into(),
        clusters: clusters.to_vec(),
        window,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hand_model() -> ExtensionModel {
        ExtensionModel::new(
            Matrix::diagonal(&[1.0, 2.0]),
            Matrix::from_rows(&[vec![5.0]]),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn hand_example() {
        let model = hand_model();
        let r = build_extension(&model).unwrap();
        assert!((r.r_mu[(0, 0)] - 1.2).abs() < 1e-15 && (r.r_mu[(1, 1)] - 0.5).abs() < 1e-15);
        let expected = Matrix::diagonal(&[5.0 / 6.0, 2.0]);
        assert!(r.a.sub(&expected).max_abs() <= 1e-14);
        assert!(weyl_identity_check(&model, &r) <= 1e-14);
    }

    #[test]
    fn hand_boundary_condition_on_unit_vector() {
        let model = hand_model();
        // f₀ = (1, 0), f_μ = (1/5, 0); both sides of the condition equal 1.
        let h = [1.0, 0.0];
        let f0 = Lu::factor(&model.a0).unwrap().solve(&h);
        let f_mu = 1.0 / 5.0 * h[0];
        assert_eq!(5.0 * f_mu, model.a0.matvec(&f0)[0]);
        let r = build_extension(&model).unwrap();
        assert!(boundary_condition_check(&model, &r, 100, 1) <= 1e-15);
    }

    #[test]
    fn large_xi_gives_back_a0() {
        let a0 = Matrix::diagonal(&[1.0, 3.0, 4.0]);
        let xi = Matrix::diagonal(&[1e14, 2e14]);
        let model = ExtensionModel::new(a0.clone(), xi, 0.5).unwrap();
        let r = build_extension(&model).unwrap();
        assert!(r.a.sub(&a0).max_abs() < 1e-10);
    }

    #[test]
    fn empty_boundary_space_is_identity() {
        let a0 = Matrix::diagonal(&[1.0, 3.0]);
        let model = ExtensionModel::new(a0.clone(), Matrix::zeros(0), 0.0).unwrap();
        assert_eq!(build_extension(&model).unwrap().a, a0);
    }

    #[test]
    fn mu_on_spectrum_rejected() {
        let r = ExtensionModel::new(Matrix::diagonal(&[1.0, 2.0]), Matrix::diagonal(&[5.0]), 2.0);
        assert!(matches!(
            r,
            Err(ExtensionError::NotSeparated { which: "A0", .. })
        ));
    }

    #[test]
    fn singular_resolvent_detected() {
        // R_μ = diag(1, 1) + (−1) on the first coordinate = diag(0, 1).
        let model = ExtensionModel::new(
            Matrix::diagonal(&[1.0, 1.0]),
            Matrix::diagonal(&[-1.0]),
            0.0,
        )
        .unwrap();
        assert!(matches!(
            build_extension(&model),
            Err(ExtensionError::SingularRmu { .. })
        ));
    }

    #[test]
    fn random_models_satisfy_identities() {
        for seed in 0..10 {
            let n = 5 + (seed as usize * 3) % 30;
            let m = 1 + (seed as usize * 7) % n;
            let model = random_model(n, m, seed);
            let r = build_extension(&model).unwrap();
            assert!(r.symmetry_defect <= 1e-11);
            assert!(r.resolvent_symmetry_defect <= 1e-11);
            let scale = model.a0.max_abs().max(model.xi.max_abs()).max(1.0);
            assert!(weyl_identity_check(&model, &r) <= 1e-11 * scale);
            assert!(boundary_condition_check(&model, &r, 20, seed) <= 1e-12);
            // Identity at a second admissible shift.
            let shifted =
                ExtensionModel::new(model.a0.clone(), model.xi.clone(), model.mu - 0.37).unwrap();
            let r2 = build_extension(&shifted).unwrap();
            assert!(weyl_identity_check(&shifted, &r2) <= 1e-11 * scale);
        }
    }

    #[test]
    fn small_clustering_run_tracks_cluster() {
        let table = clustering_experiment(&[1.0], &[(20, 10), (40, 20)], 0.5, 5).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert!(table.rows[1].distance < table.rows[0].distance);
    }
}
