//! Experiment configuration files.

use std::path::{Path, PathBuf};

use hawkes_vb::adaptive::{AveragingMode, ModelPrior, Threshold};
use hawkes_vb::scenarios::{self, Effect, Scenario};
use hawkes_vb::{GibbsConfig, HawkesParams, LinkFunction, Model, PriorSpec, ViConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// One model: the graph in `basis.graph` (complete by default) at depth `basis.depth`.
    Fixed,
    Adaptive,
    #[default]
    TwoStep,
    Gibbs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSpec {
    pub nu: Vec<f64>,
    /// `weights[l][k]` are the histogram weights of `h_lk`; every kernel of a
    /// target `k` has the same number of pieces, empty meaning no edge.
    pub weights: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    Univariate,
    UnivariateTwoBins,
    SparseChain,
}

/// One of the built-in synthetic truths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: ScenarioName,
    pub effect: Effect,
    /// Number of dimensions of the sparse chain.
    #[serde(default = "default_chain_dims")]
    pub dims: usize,
}

fn default_chain_dims() -> usize {
    2
}

impl ScenarioSpec {
    pub fn build(&self) -> Scenario {
        match self.name {
            ScenarioName::Univariate => scenarios::univariate(self.effect),
            ScenarioName::UnivariateTwoBins => scenarios::univariate_two_bins(self.effect),
            ScenarioName::SparseChain => scenarios::sparse_chain(self.dims, self.effect),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct BasisSpec {
    /// `J = 2^depth` pieces for fixed and Gibbs fits.
    pub depth: u32,
    /// `graph[l][k]`; complete when absent.
    pub graph: Option<Vec<Vec<bool>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThresholdSpec {
    Keyword(ThresholdKeyword),
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdKeyword {
    Auto,
}

impl Default for ThresholdSpec {
    fn default() -> Self {
        ThresholdSpec::Keyword(ThresholdKeyword::Auto)
    }
}

impl From<ThresholdSpec> for Threshold {
    fn from(t: ThresholdSpec) -> Self {
        match t {
            ThresholdSpec::Keyword(ThresholdKeyword::Auto) => Threshold::Auto,
            ThresholdSpec::Value(v) => Threshold::Fixed(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptiveSpec {
    pub d_max: u32,
    pub threshold: ThresholdSpec,
    pub averaging: AveragingMode,
    pub model_prior: ModelPrior,
}

impl Default for AdaptiveSpec {
    fn default() -> Self {
        Self {
            d_max: 3,
            threshold: ThresholdSpec::default(),
            averaging: AveragingMode::Select,
            model_prior: ModelPrior::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub mode: FitMode,
    /// Link shared by every dimension; `links` gives one per dimension instead.
    #[serde(default)]
    pub link: Option<LinkFunction>,
    #[serde(default)]
    pub links: Option<Vec<LinkFunction>>,
    #[serde(default = "default_memory")]
    pub memory: f64,
    /// Number of dimensions, when neither a truth nor a scenario fixes it.
    #[serde(default)]
    pub dims: Option<usize>,
    #[serde(default)]
    pub truth: Option<TruthSpec>,
    #[serde(default)]
    pub scenario: Option<ScenarioSpec>,
    /// Events file to fit instead of a simulated realisation. Relative paths
    /// are resolved against the config file.
    #[serde(default)]
    pub events: Option<PathBuf>,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub burn_in: Option<f64>,
    #[serde(default)]
    pub event_cap: Option<usize>,
    #[serde(default)]
    pub basis: BasisSpec,
    #[serde(default)]
    pub prior: PriorSpec,
    #[serde(default)]
    pub vi: ViConfig,
    #[serde(default)]
    pub adaptive: AdaptiveSpec,
    #[serde(default)]
    pub gibbs: GibbsConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Grid points per interaction function in `interactions.csv`.
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

fn default_memory() -> f64 {
    scenarios::MEMORY
}

fn default_grid_points() -> usize {
    100
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::config(format!("invalid config: {e}")))
    }

    /// Reads a config file and resolves a relative events path against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut config = Self::from_json(&io::read_text(path)?)?;
        if let Some(events) = &config.events {
            if events.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                config.events = Some(base.join(events));
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.memory.is_finite() && self.memory > 0.0) {
            return Err(CliError::config(format!(
                "memory must be positive, got {}",
                self.memory
            )));
        }
        if self.truth.is_some() && self.scenario.is_some() {
            return Err(CliError::config(
                "give either `truth` or `scenario`, not both",
            ));
        }
        if self.link.is_some() && self.links.is_some() {
            return Err(CliError::config("give either `link` or `links`, not both"));
        }
        if let Some(s) = &self.scenario {
            if s.dims == 0 {
                return Err(CliError::config("scenario needs at least one dimension"));
            }
            if (self.memory - scenarios::MEMORY).abs() > 0.0 {
                return Err(CliError::config(format!(
                    "built-in scenarios use memory {}",
                    scenarios::MEMORY
                )));
            }
        }
        if self.adaptive.d_max > 10 || self.basis.depth > 10 {
            return Err(CliError::config(
                "histogram depth above 10 is not supported",
            ));
        }
        if self.grid_points == 0 {
            return Err(CliError::config("grid_points must be positive"));
        }
        self.gibbs
            .validate()
            .map_err(|e| CliError::config(e.to_string()))?;
        if let Some(h) = self.horizon {
            if !(h.is_finite() && h >= 0.0) {
                return Err(CliError::config(format!(
                    "horizon must be nonnegative, got {h}"
                )));
            }
        }
        Ok(())
    }

    /// Ground truth from `truth` or `scenario`, if any.
    pub fn truth_params(&self) -> Result<Option<HawkesParams>> {
        if let Some(s) = &self.scenario {
            return Ok(Some(s.build().truth));
        }
        match &self.truth {
            Some(t) => HawkesParams::from_weights(t.nu.clone(), t.weights.clone(), self.memory)
                .map(Some)
                .map_err(|e| CliError::config(format!("truth: {e}"))),
            None => Ok(None),
        }
    }

    pub fn require_truth(&self) -> Result<HawkesParams> {
        self.truth_params()?
            .ok_or_else(|| CliError::config("a `truth` or `scenario` is required"))
    }

    /// Dimension count from the truth, `dims`, or the events file.
    pub fn num_dims(&self) -> Result<usize> {
        if let Some(t) = self.truth_params()? {
            return Ok(t.dims());
        }
        if let Some(k) = self.dims {
            return Ok(k);
        }
        match &self.events {
            Some(path) => io::count_dims(path),
            None => Err(CliError::config(
                "cannot tell the number of dimensions; set `dims`",
            )),
        }
    }

    pub fn horizon(&self) -> Result<f64> {
        if let Some(h) = self.horizon {
            return Ok(h);
        }
        match &self.scenario {
            Some(s) => Ok(s.build().horizon),
            None => Err(CliError::config("`horizon` is required")),
        }
    }

    pub fn link_functions(&self, dims: usize) -> Result<Vec<LinkFunction>> {
        let links = match (&self.links, &self.link, &self.scenario) {
            (Some(ls), _, _) => ls.clone(),
            (None, Some(l), _) => vec![*l; dims],
            (None, None, Some(s)) => s.build().links,
            (None, None, None) => vec![LinkFunction::default(); dims],
        };
        if links.len() != dims {
            return Err(CliError::config(format!(
                "{} links given for {dims} dimensions",
                links.len()
            )));
        }
        for l in &links {
            l.validate().map_err(|e| CliError::config(e.to_string()))?;
        }
        Ok(links)
    }

    /// Model of a fixed or Gibbs fit.
    pub fn fixed_model(&self, dims: usize) -> Result<Model> {
        let graph = self
            .basis
            .graph
            .clone()
            .unwrap_or_else(|| vec![vec![true; dims]; dims]);
        Model::from_graph(&graph, &vec![self.basis.depth; dims])
            .map_err(|e| CliError::config(format!("basis: {e}")))
    }
}
