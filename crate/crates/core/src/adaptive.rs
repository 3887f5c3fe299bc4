//! Adaptive variational inference: model enumeration, model selection and
//! averaging, and the two-step graph-thresholding procedure.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::events::EventData;
use crate::exec::Execution;
use crate::link::LinkFunction;
use crate::model::{Model, SubModel};
use crate::vi::{cavi_dim, FitData, GaussianPosterior, PriorSpec, ViConfig};

/// Prior mass over the sub-models of one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ModelPrior {
    /// Same mass on every enumerated sub-model.
    #[default]
    Uniform,
    /// Independent Bernoulli(p) edges, uniform depth given a nonempty column.
    Bernoulli { p: f64 },
}

impl ModelPrior {
    /// Log prior mass of `sub`, up to a constant shared by all sub-models.
    pub fn log_mass(&self, sub: &SubModel, dims: usize, d_max: u32) -> f64 {
        match *self {
            ModelPrior::Uniform => 0.0,
            ModelPrior::Bernoulli { p } => {
                let edges = sub.parents().len() as f64;
                let graph = edges * p.ln() + (dims as f64 - edges) * (1.0 - p).ln();
                if sub.parents().is_empty() {
                    graph
                } else {
                    graph - (d_max as f64 + 1.0).ln()
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ModelPrior::Bernoulli { p } if !(p > 0.0 && p < 1.0) => Err(Error::InvalidInput(
                format!("edge probability must be in (0, 1), got {p}"),
            )),
            _ => Ok(()),
        }
    }
}

/// Whether the adaptive posterior keeps the best sub-model or the weighted mixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AveragingMode {
    #[default]
    Select,
    Average,
}

/// Candidate sub-models for each dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSet {
    per_dim: Vec<Vec<SubModel>>,
    d_max: u32,
}

impl ModelSet {
    pub fn new(per_dim: Vec<Vec<SubModel>>, d_max: u32) -> Result<Self> {
        let dims = per_dim.len();
        if dims == 0 {
            return Err(Error::InvalidInput(
                "a model set needs at least one dimension".into(),
            ));
        }
        for (k, subs) in per_dim.iter().enumerate() {
            if subs.is_empty() {
                return Err(Error::EmptyModelSet(k));
            }
            if subs.iter().any(|s| s.parents().iter().any(|&l| l >= dims)) {
                return Err(Error::ShapeMismatch(format!(
                    "sub-model of dimension {k} has an out-of-range parent"
                )));
            }
        }
        Ok(Self { per_dim, d_max })
    }

    /// Every graph column and depth `0..=d_max`; the empty column appears once.
    pub fn all(dims: usize, d_max: u32) -> Result<Self> {
        if dims >= usize::BITS as usize - 1 {
            return Err(Error::InvalidInput(format!(
                "too many dimensions ({dims}) to enumerate graphs"
            )));
        }
        let mut subs = vec![SubModel::empty()];
        for mask in 1usize..(1 << dims) {
            let parents: Vec<usize> = (0..dims).filter(|l| mask >> l & 1 == 1).collect();
            for d in 0..=d_max {
                subs.push(SubModel::new(parents.clone(), d));
            }
        }
        Self::new(vec![subs; dims], d_max)
    }

    /// Complete graph, depth `0..=d_max`.
    pub fn complete_graph(dims: usize, d_max: u32) -> Result<Self> {
        Self::fixed_graph(&vec![vec![true; dims]; dims], d_max)
    }

    /// Graph `graph[l][k]` fixed, depth `0..=d_max` free per dimension.
    pub fn fixed_graph(graph: &[Vec<bool>], d_max: u32) -> Result<Self> {
        let dims = graph.len();
        if graph.iter().any(|row| row.len() != dims) {
            return Err(Error::ShapeMismatch(format!("graph must be {dims}x{dims}")));
        }
        let per_dim = (0..dims)
            .map(|k| {
                let parents: Vec<usize> = (0..dims).filter(|&l| graph[l][k]).collect();
                if parents.is_empty() {
                    vec![SubModel::empty()]
                } else {
                    (0..=d_max)
                        .map(|d| SubModel::new(parents.clone(), d))
                        .collect()
                }
            })
            .collect();
        Self::new(per_dim, d_max)
    }

    /// A single model.
    pub fn single(model: &Model) -> Result<Self> {
        let d_max = model.depths().into_iter().max().unwrap_or(0);
        Self::new(
            model.submodels().iter().map(|s| vec![s.clone()]).collect(),
            d_max,
        )
    }

    pub fn dims(&self) -> usize {
        self.per_dim.len()
    }

    pub fn d_max(&self) -> u32 {
        self.d_max
    }

    pub fn candidates(&self, k: usize) -> &[SubModel] {
        &self.per_dim[k]
    }

    pub fn max_bins(&self) -> usize {
        self.per_dim
            .iter()
            .flatten()
            .map(SubModel::bins)
            .max()
            .unwrap_or(1)
    }
}

/// Fit of one sub-model.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub submodel: SubModel,
    pub posterior: GaussianPosterior,
    pub log_prior: f64,
    /// Normalised weight `gamma` within its dimension.
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct DimResult {
    pub candidates: Vec<Candidate>,
    /// Index of the selected candidate.
    pub selected: usize,
}

impl DimResult {
    pub fn best(&self) -> &Candidate {
        &self.candidates[self.selected]
    }
}

#[derive(Debug, Clone)]
pub struct AdaptiveResult {
    pub dims: Vec<DimResult>,
    pub mode: AveragingMode,
}

impl AdaptiveResult {
    pub fn selected_model(&self) -> Model {
        Model::new(
            self.dims
                .iter()
                .map(|d| d.best().submodel.clone())
                .collect(),
        )
        .expect("selected sub-models come from a valid model set")
    }

    pub fn selected_posteriors(&self) -> Vec<&GaussianPosterior> {
        self.dims.iter().map(|d| &d.best().posterior).collect()
    }

    /// `E_Q ||h_lk||_1` under the selected posterior, or the model-weighted
    /// average in averaging mode.
    pub fn expected_norms(&self) -> Result<Vec<Vec<f64>>> {
        let k = self.dims.len();
        let mut s = vec![vec![0.0; k]; k];
        for (kk, dim) in self.dims.iter().enumerate() {
            let picks: Vec<(f64, &Candidate)> = match self.mode {
                AveragingMode::Select => vec![(1.0, dim.best())],
                AveragingMode::Average => dim.candidates.iter().map(|c| (c.weight, c)).collect(),
            };
            for (w, cand) in picks {
                if w == 0.0 {
                    continue;
                }
                for (l, norm) in block_norms(&cand.submodel, &cand.posterior)? {
                    s[l][kk] += w * norm;
                }
            }
        }
        Ok(s)
    }
}

/// `(l, E||h_lk||_1)` for each parent `l` of a fitted sub-model.
fn block_norms(sub: &SubModel, post: &GaussianPosterior) -> Result<Vec<(usize, f64)>> {
    let bins = sub.bins();
    sub.parents()
        .iter()
        .enumerate()
        .map(|(p, &l)| {
            let start = 1 + p * bins;
            let mean = post.mean.rows(start, bins).into_owned();
            let cov = post.cov.view((start, start), (bins, bins)).into_owned();
            Ok((l, expected_l1_norm(&mean, &cov)?))
        })
        .collect()
}

/// Standard normal CDF.
pub(crate) fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `E|X|` for `X ~ N(mu, sd^2)`; `sd = 0` gives `|mu|`.
pub(crate) fn folded_normal_mean(mu: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        return mu.abs();
    }
    sd * (2.0 / std::f64::consts::PI).sqrt() * (-mu * mu / (2.0 * sd * sd)).exp()
        + mu * (1.0 - 2.0 * norm_cdf(-mu / sd))
}

/// `sum_j E|w_j|` under a Gaussian with the given mean and covariance; only
/// the diagonal of the covariance matters.
pub fn expected_l1_norm(mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
        return Err(Error::ShapeMismatch(
            "covariance does not match the mean".into(),
        ));
    }
    let mut total = 0.0;
    for (j, &mu) in mean.iter().enumerate() {
        let var = cov[(j, j)];
        if !(var > 0.0) {
            return Err(Error::Domain(format!(
                "variance {var} at position {j} is not positive"
            )));
        }
        total += folded_normal_mean(mu, var.sqrt());
    }
    Ok(total)
}

/// Threshold in the largest gap between consecutive sorted values, or
/// `override_value` when given.
pub fn detect_gap_threshold(values: &[f64], override_value: Option<f64>) -> Result<f64> {
    if let Some(t) = override_value {
        return Ok(t);
    }
    if values.len() < 2 {
        return Err(Error::InvalidInput(
            "at least two values are needed to find a gap".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("norm estimates must be finite".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = 0;
    let mut width = 0.0;
    for i in 0..sorted.len() - 1 {
        let gap = sorted[i + 1] - sorted[i];
        if gap > width {
            width = gap;
            best = i;
        }
    }
    if width == 0.0 {
        return Err(Error::NoGap);
    }
    Ok(0.5 * (sorted[best] + sorted[best + 1]))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Threshold {
    #[default]
    Auto,
    Fixed(f64),
}

impl Threshold {
    fn value(self) -> Option<f64> {
        match self {
            Threshold::Auto => None,
            Threshold::Fixed(v) => Some(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEstimate {
    /// `s_hat[l][k] = E_Q ||h_lk||_1`.
    pub s_hat: Vec<Vec<f64>>,
    pub threshold: f64,
    pub delta_hat: Vec<Vec<bool>>,
}

impl GraphEstimate {
    pub fn from_norms(s_hat: Vec<Vec<f64>>, threshold: Threshold) -> Result<Self> {
        let flat: Vec<f64> = s_hat.iter().flatten().copied().collect();
        let threshold = detect_gap_threshold(&flat, threshold.value())?;
        let delta_hat = s_hat
            .iter()
            .map(|row| row.iter().map(|&s| s > threshold).collect())
            .collect();
        Ok(Self {
            s_hat,
            threshold,
            delta_hat,
        })
    }
}

/// Settings shared by the adaptive procedures.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitOptions {
    pub prior: PriorSpec,
    pub vi: ViConfig,
    pub model_prior: ModelPrior,
    pub mode: AveragingMode,
    pub exec: Execution,
}

/// Orders candidates by weight, then fewer parameters, then lexicographic graph column.
fn compare_candidates(a: &Candidate, b: &Candidate, dims: usize) -> Ordering {
    let score = |c: &Candidate| c.posterior.elbo + c.log_prior;
    score(a)
        .total_cmp(&score(b))
        .then_with(|| b.submodel.num_params().cmp(&a.submodel.num_params()))
        .then_with(|| b.submodel.column(dims).cmp(&a.submodel.column(dims)))
        .then_with(|| b.submodel.depth().cmp(&a.submodel.depth()))
}

/// Posterior model weights `exp(s_m) / sum exp(s_m')` from log scores.
pub fn model_weights(scores: &[f64]) -> Vec<f64> {
    let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let norm: f64 = scores.iter().map(|s| (s - top).exp()).sum();
    scores.iter().map(|s| (s - top).exp() / norm).collect()
}

/// Fits every candidate of every dimension on prepared data.
pub fn fully_adaptive_with_data(
    data: &FitData,
    model_set: &ModelSet,
    links: &[LinkFunction],
    options: &FitOptions,
) -> Result<AdaptiveResult> {
    let dims = model_set.dims();
    if data.dims() != dims || links.len() != dims {
        return Err(Error::ShapeMismatch(format!(
            "expected data and links for {dims} dimensions"
        )));
    }
    options.model_prior.validate()?;
    let tasks: Vec<(usize, &SubModel)> = (0..dims)
        .flat_map(|k| model_set.candidates(k).iter().map(move |s| (k, s)))
        .collect();
    let fits = options
        .exec
        .map(&tasks, |&(k, sub)| -> Result<GaussianPosterior> {
            let prior = options.prior.prior_for(sub)?;
            cavi_dim(&data.design(k, sub), &links[k], &prior, &options.vi)
        });
    let mut fits = fits.into_iter();
    let mut out = Vec::with_capacity(dims);
    for k in 0..dims {
        let mut candidates = Vec::new();
        for sub in model_set.candidates(k) {
            let posterior = fits.next().expect("one fit per task")?;
            let log_prior = options.model_prior.log_mass(sub, dims, model_set.d_max());
            candidates.push(Candidate {
                submodel: sub.clone(),
                posterior,
                log_prior,
                weight: 0.0,
            });
        }
        let scores: Vec<f64> = candidates
            .iter()
            .map(|c| c.posterior.elbo + c.log_prior)
            .collect();
        for (c, w) in candidates.iter_mut().zip(model_weights(&scores)) {
            c.weight = w;
        }
        let selected = (0..candidates.len())
            .max_by(|&a, &b| compare_candidates(&candidates[a], &candidates[b], dims))
            .expect("model sets are nonempty");
        out.push(DimResult {
            candidates,
            selected,
        });
    }
    Ok(AdaptiveResult {
        dims: out,
        mode: options.mode,
    })
}

/// Fully-adaptive variational posterior over `model_set`.
pub fn fully_adaptive(
    events: &EventData,
    model_set: &ModelSet,
    links: &[LinkFunction],
    memory: f64,
    options: &FitOptions,
) -> Result<AdaptiveResult> {
    let data = FitData::new(events, memory, model_set.max_bins(), options.vi.quadrature)?;
    fully_adaptive_with_data(&data, model_set, links, options)
}

#[derive(Debug, Clone)]
pub struct TwoStepResult {
    /// Complete-graph fit used to estimate the norms.
    pub step1: AdaptiveResult,
    pub graph: GraphEstimate,
    /// Fit restricted to the estimated graph.
    pub step2: AdaptiveResult,
}

/// Complete-graph adaptive fit, norm thresholding, then adaptive fit on the
/// estimated graph.
pub fn two_step(
    events: &EventData,
    links: &[LinkFunction],
    memory: f64,
    d_max: u32,
    threshold: Threshold,
    options: &FitOptions,
) -> Result<TwoStepResult> {
    let dims = events.dims();
    let data = FitData::new(events, memory, 1 << d_max, options.vi.quadrature)?;
    let select = FitOptions {
        mode: AveragingMode::Select,
        ..*options
    };
    let step1 = fully_adaptive_with_data(
        &data,
        &ModelSet::complete_graph(dims, d_max)?,
        links,
        &select,
    )?;
    let graph = GraphEstimate::from_norms(step1.expected_norms()?, threshold)?;
    let step2 = fully_adaptive_with_data(
        &data,
        &ModelSet::fixed_graph(&graph.delta_hat, d_max)?,
        links,
        options,
    )?;
    Ok(TwoStepResult {
        step1,
        graph,
        step2,
    })
}
