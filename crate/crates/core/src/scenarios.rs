//! Ground-truth fixtures for the standard synthetic experiments.
//!
//! Background rates and kernel weights were tuned by simulation so that event
//! and excursion counts land close to commonly reported benchmark values.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::events::EventData;
use crate::link::LinkFunction;
use crate::params::HawkesParams;
use crate::simulate::{simulate, SimConfig};

pub const MEMORY: f64 = 0.1;

/// Sign pattern of the true interaction functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    /// All kernels nonnegative.
    Excitation,
    /// Signed self-excitation kernel.
    Mixed,
    /// Nonpositive self-interaction.
    Inhibition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub truth: HawkesParams,
    pub links: Vec<LinkFunction>,
    pub horizon: f64,
}

impl Scenario {
    pub fn dims(&self) -> usize {
        self.truth.dims()
    }

    pub fn memory(&self) -> f64 {
        self.truth.memory()
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn sim_config(&self, seed: u64) -> SimConfig {
        SimConfig::new(self.truth.clone(), self.links.clone(), self.horizon, seed)
    }

    pub fn simulate(&self, seed: u64) -> Result<EventData> {
        simulate(&self.sim_config(seed))
    }
}

/// Steeper sigmoid `20 sigmoid(0.2 (x - 10))` used by the univariate
/// parametric scenarios.
pub fn steep_sigmoid() -> LinkFunction {
    LinkFunction::sigmoid(20.0, 0.2, 10.0)
}

/// Univariate process with a 4-piece self-interaction on the steep sigmoid,
/// observed on `[0, 500]`.
pub fn univariate(effect: Effect) -> Scenario {
    let (nu, w) = match effect {
        Effect::Excitation => (7.5, vec![0.12, 0.10, 0.06, 0.04]),
        Effect::Mixed => (8.0, vec![-0.15, 0.10, -0.05, 0.05]),
        Effect::Inhibition => (7.5, vec![-0.10, -0.05, -0.05, -0.05]),
    };
    Scenario {
        truth: HawkesParams::from_weights(vec![nu], vec![vec![w]], MEMORY).expect("valid fixture"),
        links: vec![steep_sigmoid()],
        horizon: 500.0,
    }
}

/// Univariate process with a 2-piece self-interaction on the default
/// sigmoid, for model selection over the histogram depth.
pub fn univariate_two_bins(effect: Effect) -> Scenario {
    let (nu, w, horizon) = match effect {
        Effect::Excitation => (-2.5, vec![0.30, 0.05], 2000.0),
        Effect::Mixed => (-2.5, vec![-0.30, 0.20], 2000.0),
        Effect::Inhibition => (-2.5, vec![-0.40, -0.05], 3000.0),
    };
    Scenario {
        truth: HawkesParams::from_weights(vec![nu], vec![vec![w]], MEMORY).expect("valid fixture"),
        links: vec![LinkFunction::default()],
        horizon,
    }
}

/// Sparse chain graph with `2K - 1` edges: every dimension excites or
/// inhibits itself and excites its successor. Kernels have 2 pieces.
///
/// Excitation is observed on `[0, 500]`, inhibition on `[0, 700]`.
pub fn sparse_chain(dims: usize, effect: Effect) -> Scenario {
    let (nu, self_w, horizon) = match effect {
        Effect::Excitation => (-2.5, vec![0.25, 0.05], 500.0),
        Effect::Mixed => (-4.0, vec![-0.25, 0.05], 600.0),
        Effect::Inhibition => (-5.5, vec![-0.40, -0.05], 700.0),
    };
    let next_w = vec![0.10, 0.30];
    let mut weights = vec![vec![Vec::new(); dims]; dims];
    for k in 0..dims {
        weights[k][k] = self_w.clone();
        if k + 1 < dims {
            weights[k][k + 1] = next_w.clone();
        }
    }
    Scenario {
        truth: HawkesParams::from_weights(vec![nu; dims], weights, MEMORY).expect("valid fixture"),
        links: vec![LinkFunction::default(); dims],
        horizon,
    }
}
