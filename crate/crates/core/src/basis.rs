use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regular histogram dictionary on `(0, A]` with `J` pieces.
///
/// Piece `j` (0-based) is `e_j(x) = (J/A) * 1{x in (jA/J, (j+1)A/J]}`, so each
/// basis function has unit L1 norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBasis {
    memory: f64,
    bins: usize,
}

impl HistogramBasis {
    pub fn new(memory: f64, bins: usize) -> Result<Self> {
        if !(memory.is_finite() && memory > 0.0) {
            return Err(Error::InvalidInput(format!(
                "memory must be positive, got {memory}"
            )));
        }
        if bins == 0 {
            return Err(Error::InvalidInput(
                "a histogram needs at least one bin".into(),
            ));
        }
        Ok(Self { memory, bins })
    }

    /// Basis with `2^depth` bins.
    pub fn with_depth(memory: f64, depth: u32) -> Result<Self> {
        Self::new(memory, 1usize << depth)
    }

    pub fn memory(&self) -> f64 {
        self.memory
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// Height of each basis function on its support, `J/A`.
    #[inline]
    pub fn height(&self) -> f64 {
        self.bins as f64 / self.memory
    }

    pub fn bin_width(&self) -> f64 {
        self.memory / self.bins as f64
    }

    /// Index of the piece containing `lag`, or `None` outside `(0, A]`.
    #[inline]
    pub fn bin_of(&self, lag: f64) -> Option<usize> {
        bin_index(lag, self.memory, self.bins)
    }

    pub fn eval(&self, j: usize, x: f64) -> f64 {
        match self.bin_of(x) {
            Some(b) if b == j => self.height(),
            _ => 0.0,
        }
    }

    /// Evaluates `sum_j w_j e_j(x)`.
    pub fn function_value(&self, weights: &[f64], x: f64) -> f64 {
        match self.bin_of(x) {
            Some(b) => weights.get(b).copied().unwrap_or(0.0) * self.height(),
            None => 0.0,
        }
    }
}

/// Piece index of `lag` in a histogram of `bins` pieces on `(0, memory]`.
#[inline]
pub(crate) fn bin_index(lag: f64, memory: f64, bins: usize) -> Option<usize> {
    if !(lag > 0.0 && lag <= memory) {
        return None;
    }
    let j = (lag * bins as f64 / memory).ceil() as usize;
    Some(j.clamp(1, bins) - 1)
}
