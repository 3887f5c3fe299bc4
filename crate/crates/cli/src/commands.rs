//! The `simulate`, `fit` and `eval` commands.

use std::path::Path;
use std::time::Instant;

use hawkes_vb::adaptive::{expected_l1_norm, AdaptiveResult};
use hawkes_vb::metrics::evaluate;
use hawkes_vb::{
    cavi_fixed_model, excursion_stats, fully_adaptive, gibbs_sample, simulate, two_step,
    EvalReport, EventData, Execution, FitOptions, GaussianPosterior, GibbsConfig, Model, ModelSet,
    SimConfig, SubModel,
};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::config::{ExperimentConfig, FitMode};
use crate::error::{CliError, Result};
use crate::io;

/// Keeps the sampler's random stream apart from the simulator's.
const GIBBS_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationStats {
    pub seed: u64,
    pub horizon: f64,
    pub memory: f64,
    pub num_events: Vec<usize>,
    pub num_global_excursions: usize,
    pub num_local_excursions: Vec<usize>,
}

fn simulate_truth(config: &ExperimentConfig) -> Result<EventData> {
    let truth = config.require_truth()?;
    let links = config.link_functions(truth.dims())?;
    let mut sim = SimConfig::new(truth, links, config.horizon()?, config.seed);
    sim.burn_in = config.burn_in;
    if let Some(cap) = config.event_cap {
        sim.event_cap = cap;
    }
    // work with exactly what the events file holds
    io::round_events(&simulate(&sim)?)
}

/// Simulates the configured truth; writes `events.csv` and `stats.json`.
pub fn cmd_simulate(config: &ExperimentConfig, out: &Path) -> Result<EventData> {
    let events = simulate_truth(config)?;
    let st = excursion_stats(&events, config.memory);
    let stats = SimulationStats {
        seed: config.seed,
        horizon: events.horizon(),
        memory: config.memory,
        num_events: st.num_events,
        num_global_excursions: st.num_global_excursions,
        num_local_excursions: st.num_local_excursions,
    };
    io::write_events(&out.join("events.csv"), &events)?;
    io::write_json(&out.join("stats.json"), &stats)?;
    log::info!("simulated {} events", events.total_observed());
    Ok(events)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateSummary {
    pub parents: Vec<usize>,
    pub depth: u32,
    pub elbo: f64,
    pub log_prior: f64,
    pub weight: f64,
}

/// Posterior of one dimension's coefficients `(nu_k, w_lk ...)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimFit {
    pub parents: Vec<usize>,
    pub depth: u32,
    pub mean: Vec<f64>,
    /// Row-major `p x p` covariance.
    pub cov: Vec<f64>,
    /// Absent for Gibbs fits.
    pub elbo: Option<f64>,
    pub elbo_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub candidates: Vec<CandidateSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitResult {
    pub mode: FitMode,
    pub seed: u64,
    pub memory: f64,
    pub horizon: f64,
    pub dims: Vec<DimFit>,
    /// `s_hat[l][k] = E ||h_lk||_1` under the posterior.
    pub s_hat: Vec<Vec<f64>>,
    pub threshold: Option<f64>,
    pub delta_hat: Vec<Vec<bool>>,
    pub gibbs_samples: Option<usize>,
}

impl FitResult {
    pub fn model(&self) -> Result<Model> {
        let subs = self
            .dims
            .iter()
            .map(|d| SubModel::new(d.parents.clone(), d.depth))
            .collect();
        Model::new(subs).map_err(|e| CliError::data(format!("result: {e}")))
    }

    pub fn posteriors(&self) -> Result<Vec<GaussianPosterior>> {
        self.dims
            .iter()
            .enumerate()
            .map(|(k, d)| {
                let p = SubModel::new(d.parents.clone(), d.depth).num_params();
                if d.mean.len() != p || d.cov.len() != p * p {
                    return Err(CliError::data(format!(
                        "result: dimension {k} has the wrong number of coefficients"
                    )));
                }
                Ok(GaussianPosterior {
                    mean: DVector::from_column_slice(&d.mean),
                    cov: DMatrix::from_row_slice(p, p, &d.cov),
                    elbo: d.elbo.unwrap_or(f64::NAN),
                    elbo_trace: d.elbo_trace.clone(),
                    iterations: d.iterations,
                    converged: d.converged,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub fit_seconds: f64,
    pub total_seconds: f64,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn dim_fit(sub: &SubModel, post: &GaussianPosterior, candidates: Vec<CandidateSummary>) -> DimFit {
    DimFit {
        parents: sub.parents().to_vec(),
        depth: sub.depth(),
        mean: post.mean.as_slice().to_vec(),
        cov: row_major(&post.cov),
        elbo: Some(post.elbo),
        elbo_trace: post.elbo_trace.clone(),
        iterations: post.iterations,
        converged: post.converged,
        candidates,
    }
}

fn adaptive_dims(res: &AdaptiveResult) -> Vec<DimFit> {
    res.dims
        .iter()
        .map(|d| {
            let best = d.best();
            let cands = d
                .candidates
                .iter()
                .map(|c| CandidateSummary {
                    parents: c.submodel.parents().to_vec(),
                    depth: c.submodel.depth(),
                    elbo: c.posterior.elbo,
                    log_prior: c.log_prior,
                    weight: c.weight,
                })
                .collect();
            dim_fit(&best.submodel, &best.posterior, cands)
        })
        .collect()
}

/// `E ||h_lk||_1` of every edge of a fitted model, zero for absent edges.
fn edge_norms(model: &Model, posteriors: &[GaussianPosterior]) -> Result<Vec<Vec<f64>>> {
    let k = model.num_dims();
    let mut s = vec![vec![0.0; k]; k];
    for (kk, post) in posteriors.iter().enumerate() {
        let sub = model.dim(kk);
        let bins = sub.bins();
        for (p, &l) in sub.parents().iter().enumerate() {
            let start = 1 + p * bins;
            let mean = post.mean.rows(start, bins).into_owned();
            let cov = post.cov.view((start, start), (bins, bins)).into_owned();
            s[l][kk] = expected_l1_norm(&mean, &cov)?;
        }
    }
    Ok(s)
}

/// Loads the configured events file, or simulates the truth and writes `events.csv`.
fn fit_data(config: &ExperimentConfig, out: &Path) -> Result<EventData> {
    match &config.events {
        Some(path) => io::read_events(path, config.num_dims()?, config.horizon()?, -config.memory),
        None => {
            let events = simulate_truth(config)?;
            io::write_events(&out.join("events.csv"), &events)?;
            Ok(events)
        }
    }
}

/// Runs the configured fit; writes `result.json`, `timing.json` and `interactions.csv`.
pub fn cmd_fit(config: &ExperimentConfig, out: &Path) -> Result<FitResult> {
    let started = Instant::now();
    let events = fit_data(config, out)?;
    let dims = events.dims();
    let links = config.link_functions(dims)?;
    let memory = config.memory;
    let options = FitOptions {
        prior: config.prior,
        vi: config.vi,
        model_prior: config.adaptive.model_prior,
        mode: config.adaptive.averaging,
        exec: Execution::Parallel,
    };
    let fit_started = Instant::now();
    let (fits, s_hat, threshold, delta_hat, gibbs_samples) = match config.mode {
        FitMode::Fixed => {
            let model = config.fixed_model(dims)?;
            let priors = config.prior.priors_for(&model)?;
            let posts = cavi_fixed_model(
                &events,
                &model,
                &links,
                &priors,
                memory,
                &config.vi,
                options.exec,
            )?;
            let fits = model
                .submodels()
                .iter()
                .zip(&posts)
                .map(|(s, p)| dim_fit(s, p, Vec::new()))
                .collect();
            (fits, edge_norms(&model, &posts)?, None, model.graph(), None)
        }
        FitMode::Adaptive => {
            let set = ModelSet::all(dims, config.adaptive.d_max)?;
            let res = fully_adaptive(&events, &set, &links, memory, &options)?;
            (
                adaptive_dims(&res),
                res.expected_norms()?,
                None,
                res.selected_model().graph(),
                None,
            )
        }
        FitMode::TwoStep => {
            let res = two_step(
                &events,
                &links,
                memory,
                config.adaptive.d_max,
                config.adaptive.threshold.into(),
                &options,
            )?;
            (
                adaptive_dims(&res.step2),
                res.graph.s_hat,
                Some(res.graph.threshold),
                res.graph.delta_hat,
                None,
            )
        }
        FitMode::Gibbs => {
            let model = config.fixed_model(dims)?;
            let priors = config.prior.priors_for(&model)?;
            let gibbs = GibbsConfig {
                seed: config.seed ^ GIBBS_SEED_OFFSET,
                ..config.gibbs
            };
            let chain = gibbs_sample(
                &events,
                &model,
                &links,
                &priors,
                memory,
                &gibbs,
                options.exec,
            )?;
            let posts: Vec<GaussianPosterior> = (0..dims)
                .map(|k| GaussianPosterior {
                    mean: chain.mean(k),
                    cov: chain.cov(k),
                    elbo: f64::NAN,
                    elbo_trace: Vec::new(),
                    iterations: gibbs.n_iter,
                    converged: true,
                })
                .collect();
            let fits = model
                .submodels()
                .iter()
                .zip(&posts)
                .map(|(s, p)| DimFit {
                    elbo: None,
                    ..dim_fit(s, p, Vec::new())
                })
                .collect();
            (
                fits,
                edge_norms(&model, &posts)?,
                None,
                model.graph(),
                Some(chain.len()),
            )
        }
    };
    let fit_seconds = fit_started.elapsed().as_secs_f64();
    let result = FitResult {
        mode: config.mode,
        seed: config.seed,
        memory,
        horizon: events.horizon(),
        dims: fits,
        s_hat,
        threshold,
        delta_hat,
        gibbs_samples,
    };
    io::write_json(&out.join("result.json"), &result)?;
    io::write_text(
        &out.join("interactions.csv"),
        &interaction_grid(&result, config.grid_points)?,
    )?;
    let timing = Timing {
        fit_seconds,
        total_seconds: started.elapsed().as_secs_f64(),
    };
    io::write_json(&out.join("timing.json"), &timing)?;
    log::info!("fit finished in {fit_seconds:.3} s");
    Ok(result)
}

/// Posterior mean and pointwise 95% Gaussian band of every fitted `h_lk` on
/// `points` grid points in `(0, A]`.
pub fn interaction_grid(result: &FitResult, points: usize) -> Result<String> {
    let z = Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(0.975);
    let model = result.model()?;
    let posts = result.posteriors()?;
    let a = result.memory;
    let mut out = String::from("source,target,x,mean,lower,upper\n");
    for (k, post) in posts.iter().enumerate() {
        let sub = model.dim(k);
        let bins = sub.bins();
        let height = bins as f64 / a;
        for (p, &l) in sub.parents().iter().enumerate() {
            for i in 1..=points {
                let x = a * i as f64 / points as f64;
                let j = ((x / a * bins as f64).ceil() as usize).clamp(1, bins) - 1;
                let idx = 1 + p * bins + j;
                let mean = height * post.mean[idx];
                let sd = height * post.cov[(idx, idx)].max(0.0).sqrt();
                out.push_str(&format!(
                    "{l},{k},{x},{mean},{},{}\n",
                    mean - z * sd,
                    mean + z * sd
                ));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    #[serde(flatten)]
    pub report: EvalReport,
    /// Accuracy of the thresholded graph estimate.
    pub acc_delta_hat: f64,
}

/// Scores a `result.json` against the configured truth; writes `metrics.json`.
pub fn cmd_eval(config: &ExperimentConfig, result_path: &Path, out: &Path) -> Result<EvalOutput> {
    let truth = config.require_truth()?;
    let result: FitResult = io::read_json(result_path)?;
    let model = result.model()?;
    let posts = result.posteriors()?;
    let refs: Vec<&GaussianPosterior> = posts.iter().collect();
    let report = evaluate(&model, &refs, &truth, result.memory)
        .map_err(|e| CliError::data(format!("result: {e}")))?;
    let acc_delta_hat = hawkes_vb::graph_accuracy(&result.delta_hat, &truth.graph())
        .map_err(|e| CliError::data(format!("result: {e}")))?;
    let output = EvalOutput {
        report,
        acc_delta_hat,
    };
    io::write_json(&out.join("metrics.json"), &output)?;
    Ok(output)
}
