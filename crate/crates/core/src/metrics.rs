//! Estimation metrics: L1 risk of a Gaussian posterior and graph/depth accuracy.

use serde::{Deserialize, Serialize};

use crate::adaptive::folded_normal_mean;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::params::HawkesParams;
use crate::vi::GaussianPosterior;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub risk_l1: f64,
    pub acc_graph: f64,
    pub acc_dim: f64,
    /// `E|nu_k - nu0_k|` per dimension.
    pub nu_errors: Vec<f64>,
    /// `E||h_lk - h0_lk||_1`.
    pub edge_errors: Vec<Vec<f64>>,
}

/// `E||h - h0||_1` where `h` has Gaussian weights on `bins` pieces (or is
/// identically zero when `weights` is `None`) and `h0` has `truth` weights.
fn kernel_error(weights: Option<(&[f64], &[f64])>, bins: usize, truth: &[f64]) -> f64 {
    let truth_bins = truth.len().max(1);
    let fine = lcm(bins, truth_bins);
    let (Some((mean, sd)), true) = (weights, bins > 0) else {
        return truth.iter().map(|w| w.abs()).sum();
    };
    let mut total = 0.0;
    for i in 0..fine {
        let j = i * bins / fine;
        let j0 = i * truth_bins / fine;
        let w0 = truth.get(j0).copied().unwrap_or(0.0);
        // heights J w / A and J0 w0 / A, integrated over a piece of width A / fine
        let shift = truth_bins as f64 / bins as f64 * w0;
        total += bins as f64 / fine as f64 * folded_normal_mean(mean[j] - shift, sd[j]);
    }
    total
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

fn check_truth(
    model: &Model,
    posteriors: &[&GaussianPosterior],
    truth: &HawkesParams,
) -> Result<()> {
    let k = truth.dims();
    if model.num_dims() != k || posteriors.len() != k {
        return Err(Error::ShapeMismatch(format!(
            "expected a model and posteriors for {k} dimensions"
        )));
    }
    for (kk, post) in posteriors.iter().enumerate() {
        let p = model.dim(kk).num_params();
        if post.mean.len() != p || post.cov.nrows() != p {
            return Err(Error::ShapeMismatch(format!(
                "posterior of dimension {kk} does not match its model"
            )));
        }
    }
    Ok(())
}

/// Per-coordinate errors behind the L1 risk.
pub fn l1_errors(
    model: &Model,
    posteriors: &[&GaussianPosterior],
    truth: &HawkesParams,
    memory: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    check_truth(model, posteriors, truth)?;
    if (memory - truth.memory()).abs() > 1e-12 * memory.abs().max(1.0) {
        return Err(Error::InvalidInput(format!(
            "memory {memory} differs from the truth's {}",
            truth.memory()
        )));
    }
    let k = truth.dims();
    let mut nu = vec![0.0; k];
    let mut edges = vec![vec![0.0; k]; k];
    for (kk, post) in posteriors.iter().enumerate() {
        let sub = model.dim(kk);
        let sd: Vec<f64> = (0..post.mean.len())
            .map(|i| post.cov[(i, i)].max(0.0).sqrt())
            .collect();
        nu[kk] = folded_normal_mean(post.mean[0] - truth.nu()[kk], sd[0]);
        let bins = sub.bins();
        for l in 0..k {
            let w0 = truth.weights(l, kk);
            edges[l][kk] = match sub.parent_position(l) {
                Some(p) => {
                    let start = 1 + p * bins;
                    let mean = &post.mean.as_slice()[start..start + bins];
                    kernel_error(Some((mean, &sd[start..start + bins])), bins, w0)
                }
                None => kernel_error(None, bins, w0),
            };
        }
    }
    Ok((nu, edges))
}

/// `E_Q ||nu - nu0||_1 + sum_{l,k} E_Q ||h_lk - h0_lk||_1`.
pub fn l1_risk(
    model: &Model,
    posteriors: &[&GaussianPosterior],
    truth: &HawkesParams,
    memory: f64,
) -> Result<f64> {
    let (nu, edges) = l1_errors(model, posteriors, truth, memory)?;
    Ok(nu.iter().sum::<f64>() + edges.iter().flatten().sum::<f64>())
}

/// Fraction of matching entries of two graphs.
pub fn graph_accuracy(delta_hat: &[Vec<bool>], delta_true: &[Vec<bool>]) -> Result<f64> {
    let k = delta_true.len();
    if k == 0 || delta_hat.len() != k || delta_hat.iter().chain(delta_true).any(|r| r.len() != k) {
        return Err(Error::ShapeMismatch(
            "graphs must be square and of equal size".into(),
        ));
    }
    let hits = delta_hat
        .iter()
        .flatten()
        .zip(delta_true.iter().flatten())
        .filter(|(a, b)| a == b)
        .count();
    Ok(hits as f64 / (k * k) as f64)
}

/// Fraction of dimensions whose histogram depth is recovered.
pub fn dim_accuracy(depth_hat: &[u32], depth_true: &[u32]) -> Result<f64> {
    if depth_hat.is_empty() || depth_hat.len() != depth_true.len() {
        return Err(Error::ShapeMismatch(
            "depth vectors must be nonempty and of equal length".into(),
        ));
    }
    let hits = depth_hat
        .iter()
        .zip(depth_true)
        .filter(|(a, b)| a == b)
        .count();
    Ok(hits as f64 / depth_hat.len() as f64)
}

/// Depth `D_k` of each dimension of the truth (`J_k = 2^D_k`).
pub fn true_depths(truth: &HawkesParams) -> Result<Vec<u32>> {
    truth
        .bases()
        .iter()
        .map(|b| {
            if b.bins().is_power_of_two() {
                Ok(b.bins().trailing_zeros())
            } else {
                Err(Error::InvalidInput(format!(
                    "{} bins is not a power of two",
                    b.bins()
                )))
            }
        })
        .collect()
}

/// Risk and accuracies of a fitted model against the truth.
pub fn evaluate(
    model: &Model,
    posteriors: &[&GaussianPosterior],
    truth: &HawkesParams,
    memory: f64,
) -> Result<EvalReport> {
    let (nu_errors, edge_errors) = l1_errors(model, posteriors, truth, memory)?;
    let risk_l1 = nu_errors.iter().sum::<f64>() + edge_errors.iter().flatten().sum::<f64>();
    Ok(EvalReport {
        risk_l1,
        acc_graph: graph_accuracy(&model.graph(), &truth.graph())?,
        acc_dim: dim_accuracy(&model.depths(), &true_depths(truth)?)?,
        nu_errors,
        edge_errors,
    })
}
