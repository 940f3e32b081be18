//! From a target set to a full operator schedule: cell lengths, midpoint
//! strengths tuned so each cell's second eigenvalue hits its sample, and
//! junction couplings whose relative weakness `ρ_k` tends to zero.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell_spectrum::{self, CellError, CellSpec};
use crate::chain::{Chain, Strength};
use crate::target_set::{self, SamplingSequence, TargetSet, TargetSetError};

/// Geometric envelope `D·r^k` for the cell lengths.
pub const LENGTH_SCALE: f64 = 1.0;
pub const LENGTH_RATIO: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AssemblyError {
    #[error(transparent)]
    TargetSet(#[from] TargetSetError),
    #[error("cell {k}: {source}")]
    Cell { k: usize, source: CellError },
    #[error("cell count must be at least 1")]
    EmptyDesign,
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub x_left: f64,
    pub y: f64,
    pub x_right: f64,
    pub d: f64,
    pub q: Strength,
}

impl Cell {
    pub fn spec(&self) -> CellSpec {
        CellSpec {
            d: self.d,
            q: self.q,
        }
    }
}

/// Interaction at the junction `x_k` between cells `k` and `k + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coupling {
    pub x: f64,
    pub p: Strength,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleMeta {
    pub source_set: Option<TargetSet>,
    #[serde(rename = "K")]
    pub k: usize,
}

/// Operator data on `(a, b)`: cells `I_k = (x_{k−1}, x_k)` with midpoints
/// `y_k` and strengths `q_k`, and couplings `p_k` at the interior junctions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub a: f64,
    pub b: f64,
    pub cells: Vec<Cell>,
    pub couplings: Vec<Coupling>,
    pub meta: ScheduleMeta,
}

impl Schedule {
    /// Lays out cells left to right from `a = 0`.
    pub fn from_parts(
        lengths: &[f64],
        strengths: &[Strength],
        couplings: &[Strength],
        meta: ScheduleMeta,
    ) -> Result<Schedule, AssemblyError> {
        if lengths.is_empty() {
            return Err(AssemblyError::EmptyDesign);
        }
        if strengths.len() != lengths.len() || couplings.len() + 1 != lengths.len() {
            return Err(AssemblyError::InvalidSchedule(format!(
                "{} lengths, {} strengths, {} couplings",
                lengths.len(),
                strengths.len(),
                couplings.len()
            )));
        }
        let mut x = 0.0;
        let mut cells = Vec::with_capacity(lengths.len());
        for (&d, &q) in lengths.iter().zip(strengths) {
            if !(d > 0.0 && d.is_finite()) {
                return Err(AssemblyError::InvalidSchedule(format!("cell length {d}")));
            }
            let x_right = x + d;
            cells.push(Cell {
                x_left: x,
                y: 0.5 * (x + x_right),
                x_right,
                d,
                q,
            });
            x = x_right;
        }
        let couplings = couplings
            .iter()
            .zip(&cells)
            .map(|(&p, cell)| Coupling { x: cell.x_right, p })
            .collect();
        Ok(Schedule {
            a: 0.0,
            b: x,
            cells,
            couplings,
            meta,
        })
    }

    /// Checks structural consistency, e.g. after deserialization.
    pub fn validate(&self) -> Result<(), AssemblyError> {
        let bad = |msg: String| Err(AssemblyError::InvalidSchedule(msg));
        if self.cells.is_empty() {
            return Err(AssemblyError::EmptyDesign);
        }
        if self.couplings.len() + 1 != self.cells.len() {
            return bad(format!(
                "{} cells need {} couplings, found {}",
                self.cells.len(),
                self.cells.len() - 1,
                self.couplings.len()
            ));
        }
        let scale = self.b.abs().max(self.a.abs()).max(1.0);
        let tol = 1e-14 * scale * self.cells.len() as f64;
        let mut x = self.a;
        for (k, cell) in self.cells.iter().enumerate() {
            if !(cell.d > 0.0 && cell.d.is_finite()) {
                return bad(format!("cell {} has length {}", k + 1, cell.d));
            }
            if (cell.x_left - x).abs() > tol
                || (cell.x_right - (cell.x_left + cell.d)).abs() > tol
                || (cell.y - 0.5 * (cell.x_left + cell.x_right)).abs() > tol
            {
                return bad(format!("cell {} positions are inconsistent", k + 1));
            }
            x = cell.x_right;
        }
        if (x - self.b).abs() > tol {
            return bad(format!("b = {} but cells end at {x}", self.b));
        }
        for (k, (coupling, cell)) in self.couplings.iter().zip(&self.cells).enumerate() {
            if (coupling.x - cell.x_right).abs() > tol {
                return bad(format!("coupling {} is not at the junction", k + 1));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Schedule, AssemblyError> {
        let schedule: Schedule = serde_json::from_str(text)
            .map_err(|e| AssemblyError::InvalidSchedule(e.to_string()))?;
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.d).collect()
    }

    /// `ρ_k = max{1/(p_k d_k), 1/(p_k d_{k+1})}` per junction (`0` for `p = ∞`).
    pub fn rho(&self) -> Vec<f64> {
        self.couplings
            .iter()
            .enumerate()
            .map(|(k, c)| match c.p.inverse() {
                Some(inv) => inv * (1.0 / self.cells[k].d).max(1.0 / self.cells[k + 1].d),
                None => f64::INFINITY,
            })
            .collect()
    }

    /// `κ_n = sup_{k ≥ n} ρ_k` (1-based) over the junctions present; `0` past the end.
    pub fn kappa(&self, n: usize) -> f64 {
        assert!(n >= 1, "κ_n is 1-based");
        self.rho().iter().skip(n - 1).copied().fold(0.0, f64::max)
    }

    /// Flattened chain of the first `n` cells with Neumann ends at `a` and `x_n`.
    pub fn chain(&self, n: usize, decouple: bool) -> Chain {
        let mut segments = Vec::with_capacity(2 * n);
        let mut interfaces = Vec::with_capacity(2 * n);
        for (k, cell) in self.cells.iter().take(n).enumerate() {
            segments.push(0.5 * cell.d);
            interfaces.push(cell.q);
            segments.push(0.5 * cell.d);
            if k + 1 < n {
                interfaces.push(if decouple {
                    Strength::Infinite
                } else {
                    self.couplings[k].p
                });
            }
        }
        Chain::new(segments, interfaces)
    }
}

/// `d_k = min(π/√(2 s_k), D·r^k)` with `D = 1`, `r = 1/2`.
///
/// Guarantees `s_k d_k² < π²/2` and `Σ d_k ≤ D·r/(1 − r)`.
pub fn choose_lengths(samples: &SamplingSequence) -> Vec<f64> {
    samples
        .values
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let envelope = LENGTH_SCALE * LENGTH_RATIO.powi(i as i32 + 1);
            (PI / (2.0 * s).sqrt()).min(envelope)
        })
        .collect()
}

/// `p_k = √k / min{d_k, d_{k+1}}`, so that `ρ_k = 1/√k`. Empty for a single cell.
pub fn choose_couplings(lengths: &[f64]) -> Vec<f64> {
    lengths
        .windows(2)
        .enumerate()
        .map(|(i, pair)| ((i + 1) as f64).sqrt() / pair[0].min(pair[1]))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub k: usize,
    pub s: f64,
    pub d: f64,
    pub q: f64,
    pub achieved: f64,
    /// `|λ₂ − s| / s`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub cells: Vec<CellRecord>,
    pub sum_d: f64,
    pub max_rho: f64,
}

/// Samples `S`, sizes and tunes every cell, then couples neighbours.
pub fn design(set: &TargetSet, count: usize) -> Result<(Schedule, DesignReport), AssemblyError> {
    if count == 0 {
        return Err(AssemblyError::EmptyDesign);
    }
    let samples = target_set::sample_sequence(set, count);
    let lengths = choose_lengths(&samples);

    let records: Vec<CellRecord> = samples
        .values
        .par_iter()
        .zip(lengths.par_iter())
        .enumerate()
        .map(|(i, (&s, &d))| {
            let k = i + 1;
            let wrap = |source| AssemblyError::Cell { k, source };
            let q = cell_spectrum::tune_q(d, s).map_err(wrap)?;
            let achieved =
                cell_spectrum::second_eigenvalue(d, Strength::Finite(q)).map_err(wrap)?;
            Ok(CellRecord {
                k,
                s,
                d,
                q,
                achieved,
                residual: (achieved - s).abs() / s,
            })
        })
        .collect::<Result<_, AssemblyError>>()?;

    let strengths: Vec<Strength> = records.iter().map(|r| Strength::Finite(r.q)).collect();
    let couplings: Vec<Strength> = choose_couplings(&lengths)
        .into_iter()
        .map(Strength::Finite)
        .collect();
    let schedule = Schedule::from_parts(
        &lengths,
        &strengths,
        &couplings,
        ScheduleMeta {
            source_set: Some(set.clone()),
            k: count,
        },
    )?;
    let report = DesignReport {
        sum_d: schedule.b - schedule.a,
        max_rho: schedule.rho().into_iter().fold(0.0, f64::max),
        cells: records,
    };
    Ok((schedule, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::target_set::{validate, RawTargetSet};

    fn set(points: &[f64], intervals: &[[f64; 2]]) -> TargetSet {
        validate(&RawTargetSet {
            includes_zero: true,
            points: points.to_vec(),
            intervals: intervals.to_vec(),
            lambda_max: 10.0,
        })
        .unwrap()
    }

    fn seq(values: &[f64]) -> SamplingSequence {
        SamplingSequence {
            values: values.to_vec(),
            diverges: false,
            eps_cover: 0.0,
        }
    }

    #[test]
    fn lengths_follow_envelope_or_margin() {
        assert_eq!(
            choose_lengths(&seq(&[1.0, 1.0, 1.0])),
            vec![0.5, 0.25, 0.125]
        );
        let d = choose_lengths(&seq(&[1e6]));
        assert!((d[0] - PI / (2e6f64).sqrt()).abs() < 1e-18);
        assert!((d[0] - 2.221e-3).abs() < 1e-6);
        let samples = seq(&[0.1, 3.0, 50.0, 1e4, 2.0, 7.5]);
        for (s, d) in samples.values.iter().zip(choose_lengths(&samples)) {
            assert!(s * d * d < PI * PI / 2.0);
        }
    }

    #[test]
    fn couplings_give_inverse_sqrt_rho() {
        let p = choose_couplings(&[0.5, 0.25]);
        assert_eq!(p, vec![4.0]);
        let lengths = [0.5, 0.3, 0.01, 0.2, 0.02];
        let p = choose_couplings(&lengths);
        let strengths = vec![Strength::Finite(1.0); lengths.len()];
        let couplings: Vec<Strength> = p.iter().map(|&v| Strength::Finite(v)).collect();
        let schedule = Schedule::from_parts(
            &lengths,
            &strengths,
            &couplings,
            ScheduleMeta {
                source_set: None,
                k: 5,
            },
        )
        .unwrap();
        let rho = schedule.rho();
        assert!((rho[0] - 1.0).abs() < 1e-15);
        for (k, r) in rho.iter().enumerate() {
            assert!((r * ((k + 1) as f64).sqrt() - 1.0).abs() < 1e-14);
        }
        for n in 1..=4 {
            assert!((schedule.kappa(n) - 1.0 / (n as f64).sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn design_single_point_tunes_every_cell() {
        let (schedule, report) = design(&set(&[1.0], &[]), 3).unwrap();
        assert_eq!(schedule.cells.len(), 3);
        for (cell, record) in schedule.cells.iter().zip(&report.cells) {
            let lambda2 = cell_spectrum::second_eigenvalue(cell.d, cell.q).unwrap();
            assert!((lambda2 - 1.0).abs() <= 1e-10);
            assert!(record.residual <= cell_spectrum::TUNE_TOL);
        }
        schedule.validate().unwrap();
    }

    #[test]
    fn design_zero_only_uses_divergent_samples() {
        let (_, report) = design(&set(&[], &[]), 2).unwrap();
        let s: Vec<f64> = report.cells.iter().map(|r| r.s).collect();
        assert_eq!(s, vec![1.0, 2.0]);
    }

    #[test]
    fn design_interval_lands_in_interval() {
        let (schedule, report) = design(&set(&[], &[[1.0, 2.0]]), 16).unwrap();
        for cell in &schedule.cells {
            let lambda2 = cell_spectrum::eigenvalues(&cell.spec(), 2).unwrap().values[1];
            assert!((1.0 - 1e-10..=2.0 + 1e-10).contains(&lambda2));
        }
        assert!(report.sum_d < LENGTH_SCALE * LENGTH_RATIO / (1.0 - LENGTH_RATIO));
    }

    #[test]
    fn design_rejects_zero_cells() {
        assert_eq!(
            design(&set(&[1.0], &[]), 0).unwrap_err(),
            AssemblyError::EmptyDesign
        );
    }

    #[test]
    fn schedule_json_roundtrip_is_lossless() {
        let (schedule, _) = design(&set(&[1.0], &[[2.0, 3.0]]), 7).unwrap();
        let back = Schedule::from_json(&schedule.to_json()).unwrap();
        assert_eq!(back, schedule);
    }

    #[test]
    fn schedule_validation_catches_moved_cells() {
        let (mut schedule, _) = design(&set(&[1.0], &[]), 3).unwrap();
        schedule.cells[1].x_left += 1e-3;
        assert!(schedule.validate().is_err());
    }
}
