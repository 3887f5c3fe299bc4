use serde::{Deserialize, Serialize};

use crate::basis::HistogramBasis;
use crate::error::{Error, Result};

/// Parameter `f = (nu, h)` of a histogram Hawkes model.
///
/// `weights[l][k]` holds the coefficients of the interaction function
/// `h_lk` (effect of dimension `l` on dimension `k`) in the basis of the
/// receiving dimension `k`. An empty vector encodes `h_lk = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HawkesParams {
    nu: Vec<f64>,
    weights: Vec<Vec<Vec<f64>>>,
    bases: Vec<HistogramBasis>,
}

impl HawkesParams {
    pub fn new(
        nu: Vec<f64>,
        weights: Vec<Vec<Vec<f64>>>,
        bases: Vec<HistogramBasis>,
    ) -> Result<Self> {
        let k = nu.len();
        if k == 0 {
            return Err(Error::InvalidInput(
                "at least one dimension is required".into(),
            ));
        }
        if weights.len() != k || weights.iter().any(|row| row.len() != k) {
            return Err(Error::ShapeMismatch(format!("weights must be {k}x{k}")));
        }
        if bases.len() != k {
            return Err(Error::ShapeMismatch(format!(
                "expected {k} bases, got {}",
                bases.len()
            )));
        }
        let memory = bases[0].memory();
        if bases.iter().any(|b| b.memory() != memory) {
            return Err(Error::InvalidInput(
                "all bases must share the memory A".into(),
            ));
        }
        if nu.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "background rates must be finite".into(),
            ));
        }
        for (l, row) in weights.iter().enumerate() {
            for (kk, w) in row.iter().enumerate() {
                if !w.is_empty() && w.len() != bases[kk].bins() {
                    return Err(Error::ShapeMismatch(format!(
                        "h_{l}{kk} has {} weights but the basis of dimension {kk} has {} bins",
                        w.len(),
                        bases[kk].bins()
                    )));
                }
                if w.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "h_{l}{kk} has non-finite weights"
                    )));
                }
            }
        }
        Ok(Self { nu, weights, bases })
    }

    /// Builds parameters where the basis size of each receiving dimension is
    /// read off its nonempty weight vectors (one bin when the column is empty).
    pub fn from_weights(nu: Vec<f64>, weights: Vec<Vec<Vec<f64>>>, memory: f64) -> Result<Self> {
        let k = nu.len();
        if weights.len() != k || weights.iter().any(|row| row.len() != k) {
            return Err(Error::ShapeMismatch(format!("weights must be {k}x{k}")));
        }
        let bases = (0..k)
            .map(|kk| {
                let bins = weights
                    .iter()
                    .map(|row| row[kk].len())
                    .find(|&n| n > 0)
                    .unwrap_or(1);
                HistogramBasis::new(memory, bins)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(nu, weights, bases)
    }

    /// Parameters without interactions: a homogeneous process per dimension.
    pub fn background_only(nu: Vec<f64>, memory: f64) -> Result<Self> {
        let k = nu.len();
        Self::from_weights(nu, vec![vec![Vec::new(); k]; k], memory)
    }

    pub fn dims(&self) -> usize {
        self.nu.len()
    }

    pub fn memory(&self) -> f64 {
        self.bases[0].memory()
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn basis(&self, k: usize) -> &HistogramBasis {
        &self.bases[k]
    }

    pub fn bases(&self) -> &[HistogramBasis] {
        &self.bases
    }

    /// Coefficients of `h_lk`; empty when the interaction is absent.
    pub fn weights(&self, l: usize, k: usize) -> &[f64] {
        &self.weights[l][k]
    }

    pub fn all_weights(&self) -> &[Vec<Vec<f64>>] {
        &self.weights
    }

    /// `h_lk(x)`.
    #[inline]
    pub fn kernel(&self, l: usize, k: usize, x: f64) -> f64 {
        let w = &self.weights[l][k];
        if w.is_empty() {
            0.0
        } else {
            self.bases[k].function_value(w, x)
        }
    }

    /// Largest positive value taken by `h_lk`, zero if it is nowhere positive.
    pub fn kernel_positive_max(&self, l: usize, k: usize) -> f64 {
        let h = self.bases[k].height();
        self.weights[l][k].iter().fold(0.0f64, |m, &w| m.max(w * h))
    }

    /// `||h_lk||_1 = sum_j |w_j|` since the pieces have disjoint supports.
    pub fn l1_norm(&self, l: usize, k: usize) -> f64 {
        self.weights[l][k].iter().map(|w| w.abs()).sum()
    }

    /// Implied connectivity graph, `graph[l][k]`.
    pub fn graph(&self) -> Vec<Vec<bool>> {
        self.weights
            .iter()
            .map(|row| row.iter().map(|w| w.iter().any(|&v| v != 0.0)).collect())
            .collect()
    }
}
