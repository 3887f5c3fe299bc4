use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Event times of a `K`-dimensional point process observed on `[start, T]`.
///
/// Inference uses the window `[0, T]`; events in `[start, 0)` (typically
/// `start = -A`) only act as the initial condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventData {
    horizon: f64,
    start: f64,
    times: Vec<Vec<f64>>,
}

impl EventData {
    pub fn new(times: Vec<Vec<f64>>, horizon: f64, start: f64) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidInput(
                "at least one dimension is required".into(),
            ));
        }
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "horizon must be nonnegative, got {horizon}"
            )));
        }
        if !(start.is_finite() && start <= 0.0) {
            return Err(Error::InvalidInput(format!(
                "start must be nonpositive, got {start}"
            )));
        }
        for (k, ts) in times.iter().enumerate() {
            for &t in ts {
                if !t.is_finite() || t < start || t > horizon {
                    return Err(Error::InvalidInput(format!(
                        "event {t} of dimension {k} outside [{start}, {horizon}]"
                    )));
                }
            }
            if let Some(w) = ts.windows(2).find(|w| w[1] <= w[0]) {
                return Err(Error::InvalidInput(format!(
                    "events of dimension {k} not strictly increasing at {}",
                    w[1]
                )));
            }
        }
        let data = Self {
            horizon,
            start,
            times,
        };
        let merged = data.merged();
        if let Some(w) = merged.windows(2).find(|w| w[1].0 == w[0].0) {
            return Err(Error::InvalidInput(format!(
                "simultaneous events in dimensions {} and {} at {}",
                w[0].1, w[1].1, w[0].0
            )));
        }
        Ok(data)
    }

    pub fn empty(dims: usize, horizon: f64, start: f64) -> Result<Self> {
        Self::new(vec![Vec::new(); dims], horizon, start)
    }

    pub fn dims(&self) -> usize {
        self.times.len()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    /// All events of dimension `k`, including the initial condition.
    pub fn dim(&self, k: usize) -> &[f64] {
        &self.times[k]
    }

    pub fn all(&self) -> &[Vec<f64>] {
        &self.times
    }

    /// Events of dimension `k` in the inference window `[0, T]`.
    pub fn observed(&self, k: usize) -> &[f64] {
        let ts = &self.times[k];
        let first = ts.partition_point(|&t| t < 0.0);
        &ts[first..]
    }

    /// Events of dimension `l` at lags `t - s` in `(0, memory]`.
    #[inline]
    pub fn window(&self, l: usize, t: f64, memory: f64) -> &[f64] {
        let ts = &self.times[l];
        // compare lags rather than `s >= t - memory` so the window agrees
        // with the bin lookup under rounding
        let lo = ts.partition_point(|&s| t - s > memory);
        let hi = ts.partition_point(|&s| s < t);
        &ts[lo..hi]
    }

    /// Number of events in `[0, T]` per dimension.
    pub fn counts(&self) -> Vec<usize> {
        (0..self.dims()).map(|k| self.observed(k).len()).collect()
    }

    pub fn total_observed(&self) -> usize {
        self.counts().iter().sum()
    }

    /// All events as `(time, dim)` pairs sorted by time.
    pub fn merged(&self) -> Vec<(f64, usize)> {
        let mut all: Vec<(f64, usize)> = self
            .times
            .iter()
            .enumerate()
            .flat_map(|(k, ts)| ts.iter().map(move |&t| (t, k)))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all
    }
}
