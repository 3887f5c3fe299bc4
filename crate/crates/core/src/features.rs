//! Sparse design rows `x(t) = (1, H^{l_1}(t), ..., H^{l_p}(t))` of a sub-model.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::basis::bin_index;
use crate::events::EventData;
use crate::model::SubModel;

/// For each query time, the sources and lags of all events in its memory
/// window. Shared by every sub-model of a dimension.
#[derive(Debug, Clone, Default)]
pub struct LagTable {
    offsets: Vec<usize>,
    sources: Vec<u32>,
    lags: Vec<f64>,
}

impl LagTable {
    pub fn build(events: &EventData, times: &[f64], memory: f64) -> Self {
        let mut table = Self {
            offsets: Vec::with_capacity(times.len() + 1),
            ..Self::default()
        };
        table.offsets.push(0);
        for &t in times {
            for l in 0..events.dims() {
                for &s in events.window(l, t, memory) {
                    table.sources.push(l as u32);
                    table.lags.push(t - s);
                }
            }
            table.offsets.push(table.sources.len());
        }
        table
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        (&self.sources[a..b], &self.lags[a..b])
    }
}

/// Weighted sparse design matrix, one row per distinct feature vector.
///
/// Rows sharing the same features are merged and their weights summed, which
/// is exact for every sum of the form `sum_i w_i F(x_i)`.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    ncols: usize,
    offsets: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    weights: Vec<f64>,
}

impl DesignMatrix {
    /// Builds the rows of `sub` at the table's query times, with row weights
    /// `weights` (`None` for unit weights).
    pub fn build(table: &LagTable, weights: Option<&[f64]>, sub: &SubModel, memory: f64) -> Self {
        let bins = sub.bins();
        let height = bins as f64 / memory;
        let mut counts: Vec<(u32, u32)> = Vec::new();
        let mut index: HashMap<Vec<(u32, u32)>, usize> = HashMap::new();
        let mut out = Self {
            ncols: sub.num_params(),
            offsets: vec![0],
            cols: Vec::new(),
            vals: Vec::new(),
            weights: Vec::new(),
        };
        for i in 0..table.len() {
            let w = weights.map_or(1.0, |ws| ws[i]);
            if w == 0.0 {
                continue;
            }
            counts.clear();
            let (sources, lags) = table.row(i);
            for (&l, &lag) in sources.iter().zip(lags) {
                let (Some(p), Some(j)) = (
                    sub.parent_position(l as usize),
                    bin_index(lag, memory, bins),
                ) else {
                    continue;
                };
                counts.push(((1 + p * bins + j) as u32, 1));
            }
            counts.sort_unstable();
            counts.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            if let Some(&r) = index.get(&counts) {
                out.weights[r] += w;
                continue;
            }
            index.insert(counts.clone(), out.weights.len());
            out.cols.push(0);
            out.vals.push(1.0);
            for &(c, n) in &counts {
                out.cols.push(c);
                out.vals.push(n as f64 * height);
            }
            out.offsets.push(out.cols.len());
            out.weights.push(w);
        }
        out
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nrows(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    #[inline]
    pub fn dot(&self, i: usize, v: &DVector<f64>) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter()
            .zip(vals)
            .map(|(&c, &x)| x * v[c as usize])
            .sum()
    }

    /// `x_i^T M x_i` for symmetric `M`.
    #[inline]
    pub fn quad_form(&self, i: usize, m: &DMatrix<f64>) -> f64 {
        let (cols, vals) = self.row(i);
        let mut total = 0.0;
        for (a, (&ca, &xa)) in cols.iter().zip(vals).enumerate() {
            let ca = ca as usize;
            total += xa * xa * m[(ca, ca)];
            for (&cb, &xb) in cols[a + 1..].iter().zip(&vals[a + 1..]) {
                total += 2.0 * xa * xb * m[(ca, cb as usize)];
            }
        }
        total
    }

    /// Adds `scale * x_i x_i^T` to the upper triangle of `m`.
    #[inline]
    pub fn add_outer_upper(&self, i: usize, scale: f64, m: &mut DMatrix<f64>) {
        let (cols, vals) = self.row(i);
        for (a, (&ca, &xa)) in cols.iter().zip(vals).enumerate() {
            for (&cb, &xb) in cols[a..].iter().zip(&vals[a..]) {
                m[(ca as usize, cb as usize)] += scale * xa * xb;
            }
        }
    }

    /// Adds `scale * x_i` to `v`.
    #[inline]
    pub fn add_scaled(&self, i: usize, scale: f64, v: &mut DVector<f64>) {
        let (cols, vals) = self.row(i);
        for (&c, &x) in cols.iter().zip(vals) {
            v[c as usize] += scale * x;
        }
    }

    /// Dense copy of row `i`.
    pub fn dense_row(&self, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(self.ncols);
        self.add_scaled(i, 1.0, &mut v);
        v
    }
}
