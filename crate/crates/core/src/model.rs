use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::basis::HistogramBasis;
use crate::error::{Error, Result};
use crate::params::HawkesParams;

/// Model of one receiving dimension `k`: its parents `{l : delta_lk = 1}` and
/// histogram depth `D_k` (`J_k = 2^D_k`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubModel {
    parents: Vec<usize>,
    depth: u32,
}

impl SubModel {
    /// Parents are sorted and deduplicated. Without parents the depth is
    /// irrelevant and normalised to zero.
    pub fn new(mut parents: Vec<usize>, depth: u32) -> Self {
        parents.sort_unstable();
        parents.dedup();
        let depth = if parents.is_empty() { 0 } else { depth };
        Self { parents, depth }
    }

    pub fn empty() -> Self {
        Self {
            parents: Vec::new(),
            depth: 0,
        }
    }

    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn bins(&self) -> usize {
        1usize << self.depth
    }

    /// Number of parameters: one background rate plus `J` weights per parent.
    pub fn num_params(&self) -> usize {
        1 + self.parents.len() * self.bins()
    }

    /// Position of `l` among the parents.
    pub fn parent_position(&self, l: usize) -> Option<usize> {
        self.parents.binary_search(&l).ok()
    }

    /// Column `delta_{.k}` as a boolean vector over `dims` sources.
    pub fn column(&self, dims: usize) -> Vec<bool> {
        let mut col = vec![false; dims];
        for &l in &self.parents {
            col[l] = true;
        }
        col
    }
}

/// Model `m = (delta, J)` for all dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Model {
    dims: Vec<SubModel>,
}

impl Model {
    pub fn new(dims: Vec<SubModel>) -> Result<Self> {
        let k = dims.len();
        if k == 0 {
            return Err(Error::InvalidInput(
                "a model needs at least one dimension".into(),
            ));
        }
        if let Some(bad) = dims
            .iter()
            .flat_map(|m| m.parents.iter())
            .find(|&&l| l >= k)
        {
            return Err(Error::ShapeMismatch(format!(
                "parent {bad} out of range for {k} dimensions"
            )));
        }
        Ok(Self { dims })
    }

    /// Model with graph `graph[l][k]` and depth `depths[k]`.
    pub fn from_graph(graph: &[Vec<bool>], depths: &[u32]) -> Result<Self> {
        let k = graph.len();
        if graph.iter().any(|row| row.len() != k) || depths.len() != k {
            return Err(Error::ShapeMismatch(format!(
                "graph must be {k}x{k} with {k} depths"
            )));
        }
        let dims = (0..k)
            .map(|kk| SubModel::new((0..k).filter(|&l| graph[l][kk]).collect(), depths[kk]))
            .collect();
        Self::new(dims)
    }

    /// Complete graph with a common depth.
    pub fn complete(dims: usize, depth: u32) -> Result<Self> {
        Self::from_graph(&vec![vec![true; dims]; dims], &vec![depth; dims])
    }

    pub fn num_dims(&self) -> usize {
        self.dims.len()
    }

    pub fn dim(&self, k: usize) -> &SubModel {
        &self.dims[k]
    }

    pub fn submodels(&self) -> &[SubModel] {
        &self.dims
    }

    pub fn graph(&self) -> Vec<Vec<bool>> {
        let k = self.dims.len();
        let mut g = vec![vec![false; k]; k];
        for (kk, m) in self.dims.iter().enumerate() {
            for &l in &m.parents {
                g[l][kk] = true;
            }
        }
        g
    }

    pub fn depths(&self) -> Vec<u32> {
        self.dims.iter().map(|m| m.depth).collect()
    }

    pub fn max_bins(&self) -> usize {
        self.dims.iter().map(SubModel::bins).max().unwrap_or(1)
    }

    /// Hawkes parameters from one coefficient vector per dimension, laid out
    /// as `(nu, h_{l_1 k}, ..., h_{l_p k})`.
    pub fn to_params(&self, coefs: &[&DVector<f64>], memory: f64) -> Result<HawkesParams> {
        let k = self.num_dims();
        if coefs.len() != k {
            return Err(Error::ShapeMismatch(format!(
                "expected {k} coefficient vectors, got {}",
                coefs.len()
            )));
        }
        let mut nu = Vec::with_capacity(k);
        let mut weights = vec![vec![Vec::new(); k]; k];
        let mut bases = Vec::with_capacity(k);
        for (kk, (sub, c)) in self.dims.iter().zip(coefs).enumerate() {
            if c.len() != sub.num_params() {
                return Err(Error::ShapeMismatch(format!(
                    "dimension {kk} has {} parameters but {} coefficients",
                    sub.num_params(),
                    c.len()
                )));
            }
            let j = sub.bins();
            nu.push(c[0]);
            for (p, &l) in sub.parents.iter().enumerate() {
                weights[l][kk] = c.rows(1 + p * j, j).iter().copied().collect();
            }
            bases.push(HistogramBasis::new(memory, j)?);
        }
        HawkesParams::new(nu, weights, bases)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_round_trip() {
        let g = vec![
            vec![true, false, true],
            vec![false, false, true],
            vec![false, true, false],
        ];
        let m = Model::from_graph(&g, &[1, 2, 0]).unwrap();
        assert_eq!(m.graph(), g);
        assert_eq!(m.dim(2).parents(), &[0, 1]);
        assert_eq!(m.dim(2).num_params(), 3);
        assert_eq!(m.dim(0).num_params(), 3);
        assert_eq!(m.dim(1).parent_position(2), Some(0));
    }

    #[test]
    fn empty_column_ignores_depth() {
        assert_eq!(SubModel::new(vec![], 3), SubModel::empty());
        assert_eq!(SubModel::empty().num_params(), 1);
    }

    #[test]
    fn rejects_out_of_range_parent() {
        assert!(Model::new(vec![SubModel::new(vec![1], 0)]).is_err());
    }
}
