//! Quadrature rules for integrals over the observation window `[0, T]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::EventData;
use crate::intensity::drive_breakpoints;

/// Order of each Gauss-Legendre panel in the composite rule.
const PANEL_ORDER: usize = 8;

/// How the latent-process integrals of the variational updates are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum QuadratureRule {
    /// One node per interval on which the features are constant. Exact.
    #[default]
    Breakpoints,
    /// Composite Gauss-Legendre with `points` nodes (default `max(100, 5T/A)`).
    GaussLegendre { points: Option<usize> },
}

/// Nodes `p_q` and weights `v_q` on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

impl QuadratureGrid {
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::ShapeMismatch(
                "quadrature points and weights differ in length".into(),
            ));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) || points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput(
                "quadrature weights must be nonnegative".into(),
            ));
        }
        Ok(Self { points, weights })
    }

    pub fn empty() -> Self {
        Self {
            points: Vec::new(),
            weights: Vec::new(),
        }
    }

    /// Default size `max(100, ceil(5 T / A))`.
    pub fn default_size(horizon: f64, memory: f64) -> usize {
        100usize.max((5.0 * horizon / memory).ceil() as usize)
    }

    /// Composite Gauss-Legendre rule with at least `n` nodes on `[0, T]`, made
    /// of equal panels of order 8.
    pub fn gauss_legendre(horizon: f64, n: usize) -> Result<Self> {
        if !(horizon >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "horizon must be nonnegative, got {horizon}"
            )));
        }
        if horizon == 0.0 {
            return Ok(Self::empty());
        }
        let panels = n.div_ceil(PANEL_ORDER).max(1);
        let (x, w) = gauss_legendre_nodes(PANEL_ORDER);
        let width = horizon / panels as f64;
        let mut points = Vec::with_capacity(panels * PANEL_ORDER);
        let mut weights = Vec::with_capacity(panels * PANEL_ORDER);
        for p in 0..panels {
            let a = p as f64 * width;
            for (xi, wi) in x.iter().zip(&w) {
                points.push(a + 0.5 * width * (xi + 1.0));
                weights.push(0.5 * width * wi);
            }
        }
        Ok(Self { points, weights })
    }

    /// Midpoints and lengths of the intervals of `[0, T]` on which every
    /// histogram feature with at most `max_bins` bins is constant.
    pub fn breakpoints(events: &EventData, memory: f64, max_bins: usize) -> Self {
        let sources: Vec<usize> = (0..events.dims()).collect();
        let edges = drive_breakpoints(events, &sources, memory, max_bins, events.horizon());
        let mut points = Vec::with_capacity(edges.len());
        let mut weights = Vec::with_capacity(edges.len());
        for w in edges.windows(2) {
            let len = w[1] - w[0];
            if len > 0.0 {
                points.push(0.5 * (w[0] + w[1]));
                weights.push(len);
            }
        }
        Self { points, weights }
    }

    pub fn for_rule(
        rule: QuadratureRule,
        events: &EventData,
        memory: f64,
        max_bins: usize,
    ) -> Result<Self> {
        match rule {
            QuadratureRule::Breakpoints => Ok(Self::breakpoints(events, memory, max_bins)),
            QuadratureRule::GaussLegendre { points } => {
                let n = points.unwrap_or_else(|| Self::default_size(events.horizon(), memory));
                Self::gauss_legendre(events.horizon(), n)
            }
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }
}
