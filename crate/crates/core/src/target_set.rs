//! Prescribed closed sets `S ⊂ [0, Λ_max]` and the positive sampling
//! sequences whose accumulation set realizes them.
//!
//! A set is a finite union of isolated points and closed intervals, always
//! containing `0`. [`sample_sequence`] walks the components round-robin so
//! that the infinite sequence accumulates exactly on `S \ {0}` (or on `S`
//! when `0` is not isolated).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TargetSetError {
    #[error("the target set must contain 0")]
    ZeroNotIncluded,
    #[error("malformed target set: {0}")]
    MalformedSet(String),
    #[error("empty input")]
    EmptyInput,
}

/// Wire form of a target set. Field names are fixed, unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTargetSet {
    pub includes_zero: bool,
    #[serde(default)]
    pub points: Vec<f64>,
    #[serde(default)]
    pub intervals: Vec<[f64; 2]>,
    pub lambda_max: f64,
}

/// Canonical closed set: `{0} ∪ points ∪ intervals`.
///
/// Points are sorted, distinct and lie outside every interval; intervals are
/// sorted, pairwise disjoint and of positive length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTargetSet", into = "RawTargetSet")]
pub struct TargetSet {
    points: Vec<f64>,
    intervals: Vec<(f64, f64)>,
    lambda_max: f64,
}

impl TryFrom<RawTargetSet> for TargetSet {
    type Error = TargetSetError;

    fn try_from(raw: RawTargetSet) -> Result<Self, Self::Error> {
        validate(&raw)
    }
}

impl From<TargetSet> for RawTargetSet {
    fn from(set: TargetSet) -> Self {
        RawTargetSet {
            includes_zero: true,
            points: set.points,
            intervals: set.intervals.iter().map(|&(lo, hi)| [lo, hi]).collect(),
            lambda_max: set.lambda_max,
        }
    }
}

fn malformed(msg: impl Into<String>) -> TargetSetError {
    TargetSetError::MalformedSet(msg.into())
}

/// Validates and canonicalizes a raw description.
///
/// Overlapping or touching intervals are merged, duplicate points removed,
/// points inside intervals absorbed and degenerate intervals `[c, c]`
/// collapsed to points. A point equal to `0` is redundant and dropped.
pub fn validate(raw: &RawTargetSet) -> Result<TargetSet, TargetSetError> {
    if !raw.includes_zero {
        return Err(TargetSetError::ZeroNotIncluded);
    }
    let lambda_max = raw.lambda_max;
    if !lambda_max.is_finite() || lambda_max <= 0.0 {
        return Err(malformed(format!(
            "lambda_max must be positive and finite, got {lambda_max}"
        )));
    }
    let check = |v: f64, what: &str| -> Result<(), TargetSetError> {
        if !v.is_finite() {
            return Err(malformed(format!("{what} is not finite: {v}")));
        }
        if v < 0.0 {
            return Err(malformed(format!("{what} is negative: {v}")));
        }
        if v > lambda_max {
            return Err(malformed(format!(
                "{what} {v} exceeds lambda_max {lambda_max}"
            )));
        }
        Ok(())
    };

    let mut points = Vec::with_capacity(raw.points.len());
    for &p in &raw.points {
        check(p, "point")?;
        if p > 0.0 {
            points.push(p);
        }
    }
    let mut intervals = Vec::with_capacity(raw.intervals.len());
    for &[lo, hi] in &raw.intervals {
        check(lo, "interval endpoint")?;
        check(hi, "interval endpoint")?;
        if lo > hi {
            return Err(malformed(format!("interval [{lo}, {hi}] is reversed")));
        }
        if lo == hi {
            if lo > 0.0 {
                points.push(lo);
            }
        } else {
            intervals.push((lo, hi));
        }
    }

    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
    for (lo, hi) in intervals {
        match merged.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => merged.push((lo, hi)),
        }
    }

    points.sort_by(f64::total_cmp);
    points.dedup();
    points.retain(|&p| !merged.iter().any(|&(lo, hi)| lo <= p && p <= hi));

    Ok(TargetSet {
        points,
        intervals: merged,
        lambda_max,
    })
}

impl TargetSet {
    pub fn from_json(text: &str) -> Result<Self, TargetSetError> {
        let raw: RawTargetSet = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
        validate(&raw)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&RawTargetSet::from(self.clone())).expect("target set serializes")
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// `S = {0}`.
    pub fn is_zero_only(&self) -> bool {
        self.points.is_empty() && self.intervals.is_empty()
    }

    /// True when `0` is an accumulation point of `S`, i.e. some interval starts at `0`.
    pub fn zero_is_accumulation_point(&self) -> bool {
        self.intervals.first().is_some_and(|&(lo, _)| lo == 0.0)
    }

    pub fn contains(&self, x: f64) -> bool {
        x == 0.0
            || self.points.contains(&x)
            || self.intervals.iter().any(|&(lo, hi)| lo <= x && x <= hi)
    }

    /// Euclidean distance from `x` to `S`.
    pub fn distance(&self, x: f64) -> f64 {
        let mut best = x.abs();
        for &p in &self.points {
            best = best.min((x - p).abs());
        }
        for &(lo, hi) in &self.intervals {
            let d = if x < lo {
                lo - x
            } else if x > hi {
                x - hi
            } else {
                0.0
            };
            best = best.min(d);
        }
        best
    }
}

/// Positive sampling sequence `s_1, …, s_K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingSequence {
    pub values: Vec<f64>,
    /// Set when `S = {0}`: the sequence is `s_k = k` and has no accumulation point.
    pub diverges: bool,
    /// Every value lies within this distance of `S \ {0}` unless `diverges`.
    pub eps_cover: f64,
}

impl SamplingSequence {
    /// Checks the covering invariant against the set the sequence was drawn from.
    pub fn within_cover(&self, set: &TargetSet) -> bool {
        if self.diverges {
            return self.values.iter().all(|&v| v > 0.0);
        }
        self.values
            .iter()
            .all(|&v| v > 0.0 && nonzero_distance(set, v) <= self.eps_cover)
    }

    /// Returns a copy with each value moved by a uniform offset in `[-eps, eps]`,
    /// kept strictly positive, and `eps_cover` raised accordingly.
    pub fn perturbed(&self, eps: f64, seed: u64) -> SamplingSequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = self
            .values
            .iter()
            .map(|&v| {
                let shifted = v + rng.gen_range(-eps..=eps);
                if shifted > 0.0 {
                    shifted
                } else {
                    v
                }
            })
            .collect();
        SamplingSequence {
            values,
            diverges: self.diverges,
            eps_cover: self.eps_cover + eps,
        }
    }
}

fn nonzero_distance(set: &TargetSet, x: f64) -> f64 {
    let mut best = f64::INFINITY;
    for &p in &set.points {
        best = best.min((x - p).abs());
    }
    for &(lo, hi) in &set.intervals {
        let d = if x < lo {
            lo - x
        } else if x > hi {
            x - hi
        } else {
            0.0
        };
        best = best.min(d);
    }
    best
}

/// One source of samples in the round-robin.
enum Component {
    Point(f64),
    /// Dyadic sweep of `[lo, hi]`: level `j` emits the `2^(j-1)` midpoints
    /// `lo + (2i - 1)(hi - lo) / 2^j` in increasing order.
    Sweep {
        lo: f64,
        width: f64,
        level: u32,
        index: u64,
    },
    /// `width / (j + 1)`, `j = 1, 2, …`: a subsequence tending to `0` from above.
    ZeroApproach {
        width: f64,
        j: u64,
    },
}

impl Component {
    fn next_value(&mut self) -> f64 {
        match self {
            Component::Point(p) => *p,
            Component::Sweep {
                lo,
                width,
                level,
                index,
            } => {
                let count = 1u64 << (*level - 1);
                let denom = (1u64 << *level) as f64;
                let v = *lo + *width * ((2 * *index + 1) as f64) / denom;
                *index += 1;
                if *index == count {
                    *index = 0;
                    // 2^62 midpoints per interval is far beyond any practical K.
                    *level = (*level + 1).min(62);
                }
                v
            }
            Component::ZeroApproach { width, j } => {
                *j += 1;
                *width / (*j + 1) as f64
            }
        }
    }
}

/// Emits `K` positive samples whose accumulation set (as `K → ∞`) is
/// `S \ {0}` when `0` is isolated in `S`, and `S` otherwise.
///
/// For `S = {0}` the sequence is `1, 2, …, K` and `diverges` is set.
pub fn sample_sequence(set: &TargetSet, count: usize) -> SamplingSequence {
    if set.is_zero_only() {
        return SamplingSequence {
            values: (1..=count).map(|k| k as f64).collect(),
            diverges: true,
            eps_cover: 0.0,
        };
    }

    let mut components: Vec<Component> = set.points.iter().map(|&p| Component::Point(p)).collect();
    for &(lo, hi) in &set.intervals {
        components.push(Component::Sweep {
            lo,
            width: hi - lo,
            level: 1,
            index: 0,
        });
    }
    if set.zero_is_accumulation_point() {
        let (_, hi) = set.intervals[0];
        components.push(Component::ZeroApproach { width: hi, j: 0 });
    }

    let mut values = Vec::with_capacity(count);
    let mut slot = 0;
    while values.len() < count {
        let v = components[slot].next_value();
        values.push(v);
        slot = (slot + 1) % components.len();
    }
    SamplingSequence {
        values,
        diverges: false,
        eps_cover: 0.0,
    }
}

/// Coverage diagnostics between `S ∩ [0, cutoff]` and a finite list of values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccumulationDistance {
    /// `sup_{x ∈ S ∩ [0, cutoff]} dist(x, values)`.
    pub cover: f64,
    /// `max_{v ∈ values, v ≤ cutoff} dist(v, S)`.
    pub excess: f64,
}

/// One-sided Hausdorff-type scores between `S` and `values`, both restricted
/// to `[0, cutoff]`. The supremum over the intervals of `S` is computed
/// exactly from the sorted values (the distance function is piecewise linear).
pub fn accumulation_distance(
    set: &TargetSet,
    values: &[f64],
    cutoff: f64,
) -> Result<AccumulationDistance, TargetSetError> {
    if values.is_empty() {
        return Err(TargetSetError::EmptyInput);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(malformed("values must be finite"));
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);

    let mut points = vec![0.0];
    points.extend(set.points.iter().copied().filter(|&p| p <= cutoff));
    let intervals: Vec<(f64, f64)> = set
        .intervals
        .iter()
        .filter(|&&(lo, _)| lo <= cutoff)
        .map(|&(lo, hi)| (lo, hi.min(cutoff)))
        .collect();
    let cover = cover_distance(&points, &intervals, &sorted);

    let excess = sorted
        .iter()
        .filter(|&&v| v <= cutoff)
        .map(|&v| set.distance(v))
        .fold(0.0, f64::max);

    Ok(AccumulationDistance { cover, excess })
}

/// `sup` over the given points and intervals of the distance to the nearest
/// entry of `sorted` (which must be sorted and nonempty).
pub(crate) fn cover_distance(points: &[f64], intervals: &[(f64, f64)], sorted: &[f64]) -> f64 {
    let nearest = |x: f64| -> f64 {
        let idx = sorted.partition_point(|&v| v < x);
        let mut best = f64::INFINITY;
        if idx < sorted.len() {
            best = best.min(sorted[idx] - x);
        }
        if idx > 0 {
            best = best.min(x - sorted[idx - 1]);
        }
        best
    };
    let mut worst = points.iter().map(|&p| nearest(p)).fold(0.0, f64::max);
    for &(lo, hi) in intervals {
        worst = worst.max(nearest(lo)).max(nearest(hi));
        // Interior maxima sit at midpoints of consecutive values straddling them.
        for pair in sorted.windows(2) {
            let mid = 0.5 * (pair[0] + pair[1]);
            if lo < mid && mid < hi {
                worst = worst.max(0.5 * (pair[1] - pair[0]));
            }
        }
    }
    worst
}
