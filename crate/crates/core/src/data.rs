//! Event paths, observation grids and interval counts.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered events on `(0, horizon]`. Types are 0-based in memory and
/// 1-based in every file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSequence {
    times: Vec<f64>,
    types: Vec<usize>,
    horizon: f64,
}

impl EventSequence {
    pub fn new(times: Vec<f64>, types: Vec<usize>, horizon: f64, dimension: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
        }
        if times.len() != types.len() {
            return Err(Error::InvalidInput("times and types differ in length".into()));
        }
        if let Some(k) = times.iter().position(|&t| !(t > 0.0 && t <= horizon)) {
            return Err(Error::InvalidInput(format!(
                "event {} at {} lies outside (0, {horizon}]",
                k + 1,
                times[k]
            )));
        }
        if let Some(k) = times.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!(
                "event times must be strictly increasing (event {})",
                k + 2
            )));
        }
        if let Some(k) = types.iter().position(|&z| z >= dimension) {
            return Err(Error::InvalidInput(format!(
                "event {} has type {} but the model has {dimension} types",
                k + 1,
                types[k] + 1
            )));
        }
        Ok(EventSequence {
            times,
            types,
            horizon,
        })
    }

    pub fn empty(horizon: f64) -> Self {
        EventSequence {
            times: Vec::new(),
            types: Vec::new(),
            horizon,
        }
    }

    /// Skips validation; callers guarantee the invariants.
    pub(crate) fn from_parts_unchecked(times: Vec<f64>, types: Vec<usize>, horizon: f64) -> Self {
        EventSequence {
            times,
            types,
            horizon,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn types(&self) -> &[usize] {
        &self.types
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn count_by_type(&self, dimension: usize) -> Vec<u64> {
        let mut out = vec![0; dimension];
        for &z in &self.types {
            out[z] += 1;
        }
        out
    }

    /// The events strictly before `t`, as a new sequence with horizon `t`.
    pub fn truncated(&self, t: f64) -> EventSequence {
        let k = self.times.partition_point(|&x| x < t);
        EventSequence {
            times: self.times[..k].to_vec(),
            types: self.types[..k].to_vec(),
            horizon: t,
        }
    }
}

/// Observation boundaries `0 = t_0 < t_1 < … < t_I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationGrid {
    boundaries: Vec<f64>,
}

impl AggregationGrid {
    pub fn new(boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::InvalidInput("a grid needs at least one interval".into()));
        }
        if boundaries[0] != 0.0 {
            return Err(Error::InvalidInput("grid must start at 0".into()));
        }
        if boundaries.iter().any(|b| !b.is_finite()) || boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("grid boundaries must be strictly increasing".into()));
        }
        Ok(AggregationGrid { boundaries })
    }

    /// Equal-width windows of `width` covering `(0, horizon]`; the last
    /// window is shortened when `width` does not divide `horizon`.
    pub fn uniform(horizon: f64, width: f64) -> Result<Self> {
        if !(width > 0.0 && horizon > 0.0) {
            return Err(Error::InvalidInput("grid width and horizon must be positive".into()));
        }
        let n = (horizon / width - 1e-9).ceil().max(1.0) as usize;
        let mut boundaries: Vec<f64> = (0..n).map(|i| i as f64 * width).collect();
        boundaries.push(horizon);
        Self::new(boundaries)
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn intervals(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.boundaries.last().unwrap()
    }
}

/// Per-interval, per-type event counts `n_{i,m}` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalCounts {
    grid: AggregationGrid,
    counts: Vec<Vec<u64>>,
    /// Calendar date of `t = 0` for data read from daily files.
    origin: Option<NaiveDate>,
}

impl IntervalCounts {
    pub fn new(grid: AggregationGrid, counts: Vec<Vec<u64>>) -> Result<Self> {
        if counts.len() != grid.intervals() {
            return Err(Error::InvalidInput(format!(
                "{} count rows for {} intervals",
                counts.len(),
                grid.intervals()
            )));
        }
        let dim = counts.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::InvalidInput("counts need at least one type".into()));
        }
        if let Some(row) = counts.iter().position(|r| r.len() != dim) {
            return Err(Error::RaggedRow {
                row: row + 1,
                found: counts[row].len(),
                expected: dim,
            });
        }
        Ok(IntervalCounts {
            grid,
            counts,
            origin: None,
        })
    }

    pub fn with_origin(mut self, origin: NaiveDate) -> Self {
        self.origin = Some(origin);
        self
    }

    pub fn origin(&self) -> Option<NaiveDate> {
        self.origin
    }

    pub fn grid(&self) -> &AggregationGrid {
        &self.grid
    }

    pub fn boundaries(&self) -> &[f64] {
        self.grid.boundaries()
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn intervals(&self) -> usize {
        self.counts.len()
    }

    pub fn dimension(&self) -> usize {
        self.counts[0].len()
    }

    pub fn horizon(&self) -> f64 {
        self.grid.horizon()
    }

    pub fn totals_by_type(&self) -> Vec<u64> {
        let mut out = vec![0; self.dimension()];
        for row in &self.counts {
            for (o, &c) in out.iter_mut().zip(row) {
                *o += c;
            }
        }
        out
    }
}

/// Counts events per window: `n_{i,m} = #{k : t_{i-1} < τ_k ≤ t_i, z_k = m}`.
pub fn aggregate(path: &EventSequence, grid: &AggregationGrid, dimension: usize) -> Result<IntervalCounts> {
    let end = grid.horizon();
    if (end - path.horizon()).abs() > 1e-9 * end.max(1.0) {
        return Err(Error::GridHorizonMismatch {
            grid_end: end,
            horizon: path.horizon(),
        });
    }
    let b = grid.boundaries();
    let mut counts = vec![vec![0u64; dimension]; grid.intervals()];
    let mut i = 0;
    for (&t, &z) in path.times().iter().zip(path.types()) {
        // half-open (t_{i-1}, t_i]
        while i + 1 < grid.intervals() && t > b[i + 1] {
            i += 1;
        }
        counts[i][z] += 1;
    }
    IntervalCounts::new(grid.clone(), counts)
}
