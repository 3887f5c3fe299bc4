//! Exact simulation of nonlinear Hawkes processes by thinning.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::EventData;
use crate::link::LinkFunction;
use crate::params::HawkesParams;

pub const DEFAULT_EVENT_CAP: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub params: HawkesParams,
    /// One link per dimension.
    pub links: Vec<LinkFunction>,
    pub horizon: f64,
    /// Length of the pre-window simulated from an empty history; `None` means `A`.
    pub burn_in: Option<f64>,
    pub seed: u64,
    pub event_cap: usize,
}

impl SimConfig {
    pub fn new(params: HawkesParams, links: Vec<LinkFunction>, horizon: f64, seed: u64) -> Self {
        Self {
            params,
            links,
            horizon,
            burn_in: None,
            seed,
            event_cap: DEFAULT_EVENT_CAP,
        }
    }

    fn validate(&self) -> Result<f64> {
        if self.links.len() != self.params.dims() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} links, got {}",
                self.params.dims(),
                self.links.len()
            )));
        }
        for link in &self.links {
            link.validate()?;
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidInput(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        let burn_in = self.burn_in.unwrap_or(self.params.memory());
        if !(burn_in.is_finite() && burn_in >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "burn-in must be nonnegative, got {burn_in}"
            )));
        }
        Ok(burn_in)
    }
}

/// Drive of dimension `k` at `t` given the events simulated so far.
fn drive(params: &HawkesParams, times: &[Vec<f64>], k: usize, t: f64) -> f64 {
    let memory = params.memory();
    let mut x = params.nu()[k];
    for (l, ts) in times.iter().enumerate() {
        if params.weights(l, k).is_empty() {
            continue;
        }
        let lo = ts.partition_point(|&s| t - s > memory);
        for &s in &ts[lo..] {
            x += params.kernel(l, k, t - s);
        }
    }
    x
}

/// Upper bound on the intensity of dimension `k` from `t` until the next event.
fn local_bound(
    params: &HawkesParams,
    link: &LinkFunction,
    times: &[Vec<f64>],
    k: usize,
    t: f64,
) -> f64 {
    if let Some(b) = link.upper_bound() {
        return b;
    }
    let memory = params.memory();
    let mut x = params.nu()[k];
    for (l, ts) in times.iter().enumerate() {
        let h = params.kernel_positive_max(l, k);
        if h > 0.0 {
            let lo = ts.partition_point(|&s| t - s > memory);
            x += h * (ts.len() - lo) as f64;
        }
    }
    link.eval(x)
}

/// Simulates on `[-burn_in, T]` from an empty history and keeps `[-A, T]`.
pub fn simulate(config: &SimConfig) -> Result<EventData> {
    let burn_in = config.validate()?;
    let params = &config.params;
    let dims = params.dims();
    let memory = params.memory();
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut times: Vec<Vec<f64>> = vec![Vec::new(); dims];
    let mut rates = vec![0.0; dims];
    let mut accepted = 0usize;
    let mut t = -burn_in;
    loop {
        let bound: f64 = (0..dims)
            .map(|k| local_bound(params, &config.links[k], &times, k, t))
            .sum();
        if !bound.is_finite() {
            return Err(Error::SimulationDiverged {
                cap: config.event_cap,
            });
        }
        if bound <= 0.0 {
            break;
        }
        let gap: f64 = Exp1.sample(&mut rng);
        t += gap / bound;
        if t > config.horizon {
            break;
        }
        for k in 0..dims {
            rates[k] = config.links[k].eval(drive(params, &times, k, t));
        }
        let u = rng.random::<f64>() * bound;
        let mut acc = 0.0;
        for k in 0..dims {
            acc += rates[k];
            if u < acc {
                times[k].push(t);
                accepted += 1;
                if accepted > config.event_cap {
                    return Err(Error::SimulationDiverged {
                        cap: config.event_cap,
                    });
                }
                break;
            }
        }
    }
    let start = -memory;
    for ts in &mut times {
        let first = ts.partition_point(|&s| s < start);
        ts.drain(..first);
    }
    EventData::new(times, config.horizon, start)
}

/// Event and excursion counts of a realisation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcursionStats {
    /// Events in `[0, T]` per dimension.
    pub num_events: Vec<usize>,
    pub num_global_excursions: usize,
    pub num_local_excursions: Vec<usize>,
}

/// Renewal times `tau in (0, T]` of a sorted event sequence: `tau = s + A`
/// for an event `s` followed by no event in `(s, s + A]`.
fn renewals(times: &[f64], memory: f64, horizon: f64) -> usize {
    times
        .iter()
        .enumerate()
        .filter(|&(i, &s)| {
            let tau = s + memory;
            tau > 0.0 && tau <= horizon && times.get(i + 1).is_none_or(|&next| next - s > memory)
        })
        .count()
}

pub fn excursion_stats(events: &EventData, memory: f64) -> ExcursionStats {
    let horizon = events.horizon();
    let pooled: Vec<f64> = events.merged().into_iter().map(|(t, _)| t).collect();
    ExcursionStats {
        num_events: events.counts(),
        num_global_excursions: renewals(&pooled, memory, horizon),
        num_local_excursions: (0..events.dims())
            .map(|k| renewals(events.dim(k), memory, horizon))
            .collect(),
    }
}
