//! Gibbs sampler for the Pólya-Gamma augmented posterior of a sigmoid model,
//! used as an MCMC reference for the variational fits.
//!
//! The drive is constant between consecutive breakpoints (events and events
//! shifted by the bin edges), so thinning a rate-`theta` Poisson process with
//! acceptance `sigma(-drive)` amounts to an independent Poisson count on each
//! constant piece. Pieces and events sharing a feature vector are merged, and
//! the Pólya-Gamma marks of a merged group only enter through their sum.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::EventData;
use crate::exec::Execution;
use crate::features::DesignMatrix;
use crate::link::{sigmoid, LinkFunction};
use crate::model::Model;
use crate::params::HawkesParams;
use crate::pg::pg_sample;
use crate::quadrature::QuadratureGrid;
use crate::vi::{DimDesign, FitData, GaussianPrior};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GibbsConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            n_iter: 3000,
            burn_in: 500,
            thin: 1,
            seed: 0,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iter <= self.burn_in {
            return Err(Error::InvalidInput(format!(
                "n_iter ({}) must exceed burn_in ({})",
                self.n_iter, self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidInput("thin must be at least 1".into()));
        }
        Ok(())
    }
}

/// Retained draws, one chain per dimension.
#[derive(Debug, Clone)]
pub struct GibbsChain {
    pub model: Model,
    pub memory: f64,
    /// `samples[k][s]` is the `s`-th retained coefficient vector of dimension `k`.
    pub samples: Vec<Vec<DVector<f64>>>,
}

impl GibbsChain {
    pub fn len(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mean(&self, k: usize) -> DVector<f64> {
        let s = &self.samples[k];
        let mut m = DVector::zeros(self.model.dim(k).num_params());
        for x in s {
            m += x;
        }
        m / s.len() as f64
    }

    /// Sample covariance (divisor `n - 1`).
    pub fn cov(&self, k: usize) -> DMatrix<f64> {
        let s = &self.samples[k];
        let m = self.mean(k);
        let p = m.len();
        let mut c = DMatrix::zeros(p, p);
        for x in s {
            let d = x - &m;
            c += &d * d.transpose();
        }
        c / (s.len().max(2) - 1) as f64
    }

    pub fn sd(&self, k: usize) -> DVector<f64> {
        self.cov(k).diagonal().map(f64::sqrt)
    }

    /// The `s`-th retained draw as Hawkes parameters.
    pub fn params(&self, s: usize) -> Result<HawkesParams> {
        let coefs: Vec<&DVector<f64>> = self.samples.iter().map(|c| &c[s]).collect();
        self.model.to_params(&coefs, self.memory)
    }
}

/// Mean and Cholesky factor of the precision of the Gaussian conditional of
/// one dimension's coefficients given the augmentation variables.
///
/// `event_omega[i]` is the summed Pólya-Gamma mark of the events in row `i`
/// of `design.events` (which carries their count as weight);
/// `latent_counts[q]` and `latent_omega[q]` are the number and summed marks of
/// the latent points in row `q` of `design.latent`.
pub fn conjugate_gaussian(
    design: &DimDesign,
    event_omega: &[f64],
    latent_counts: &[f64],
    latent_omega: &[f64],
    link: &LinkFunction,
    prior: &GaussianPrior,
) -> Result<(DVector<f64>, Cholesky<f64, Dyn>)> {
    let (ev, lat) = (&design.events, &design.latent);
    if event_omega.len() != ev.nrows()
        || latent_counts.len() != lat.nrows()
        || latent_omega.len() != lat.nrows()
    {
        return Err(Error::ShapeMismatch(
            "augmentation variables do not match the design rows".into(),
        ));
    }
    let p = prior.dim();
    let (alpha, eta) = (link.alpha, link.eta);
    let mut precision = DMatrix::zeros(p, p);
    let mut linear = prior.precision() * prior.mean();
    accumulate(
        ev,
        ev.weights(),
        event_omega,
        0.5,
        alpha,
        eta,
        &mut precision,
        &mut linear,
    );
    accumulate(
        lat,
        latent_counts,
        latent_omega,
        -0.5,
        alpha,
        eta,
        &mut precision,
        &mut linear,
    );
    for j in 0..p {
        for i in 0..=j {
            precision[(i, j)] += prior.precision()[(i, j)];
        }
    }
    precision.fill_lower_triangle_with_upper_triangle();
    let chol = Cholesky::new(precision)
        .ok_or_else(|| Error::Numerical("conditional precision is not positive definite".into()))?;
    let mean = chol.solve(&linear);
    Ok((mean, chol))
}

#[allow(clippy::too_many_arguments)]
fn accumulate(
    rows: &DesignMatrix,
    counts: &[f64],
    omega: &[f64],
    half: f64,
    alpha: f64,
    eta: f64,
    precision: &mut DMatrix<f64>,
    linear: &mut DVector<f64>,
) {
    for (i, (&n, &w)) in counts.iter().zip(omega).enumerate() {
        if n == 0.0 {
            continue;
        }
        rows.add_outer_upper(i, alpha * alpha * w, precision);
        rows.add_scaled(i, alpha * half * n + alpha * alpha * eta * w, linear);
    }
}

/// Sum of `n` independent `PG(1, c)` draws.
fn pg_sum<R: Rng + ?Sized>(n: u64, c: f64, rng: &mut R) -> f64 {
    (0..n).map(|_| pg_sample(c, rng)).sum()
}

fn draw_gaussian<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    precision: &Cholesky<f64, Dyn>,
    rng: &mut R,
) -> DVector<f64> {
    let z = DVector::from_fn(mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    // x = mean + L^{-T} z has covariance (L L^T)^{-1}
    let shift = precision
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .expect("Cholesky factor is invertible");
    mean + shift
}

fn sample_dim(
    design: &DimDesign,
    link: &LinkFunction,
    prior: &GaussianPrior,
    config: &GibbsConfig,
    stream: u64,
) -> Result<Vec<DVector<f64>>> {
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);
    let (ev, lat) = (&design.events, &design.latent);
    let (alpha, eta, theta) = (link.alpha, link.eta, link.theta);
    let mut f = prior.mean().clone();
    let mut event_omega = vec![0.0; ev.nrows()];
    let mut latent_counts = vec![0.0; lat.nrows()];
    let mut latent_omega = vec![0.0; lat.nrows()];
    let mut kept = Vec::with_capacity((config.n_iter - config.burn_in).div_ceil(config.thin));
    for it in 0..config.n_iter {
        for (i, (om, &n)) in event_omega.iter_mut().zip(ev.weights()).enumerate() {
            let drive = alpha * (ev.dot(i, &f) - eta);
            *om = pg_sum(n as u64, drive.abs(), &mut rng);
        }
        for q in 0..lat.nrows() {
            let drive = alpha * (lat.dot(q, &f) - eta);
            let rate = theta * lat.weights()[q] * sigmoid(-drive);
            let n = if rate > 0.0 {
                Poisson::new(rate)
                    .map_err(|e| Error::Numerical(e.to_string()))?
                    .sample(&mut rng) as u64
            } else {
                0
            };
            latent_counts[q] = n as f64;
            latent_omega[q] = pg_sum(n, drive.abs(), &mut rng);
        }
        let (mean, chol) = conjugate_gaussian(
            design,
            &event_omega,
            &latent_counts,
            &latent_omega,
            link,
            prior,
        )?;
        f = draw_gaussian(&mean, &chol, &mut rng);
        if it >= config.burn_in && (it - config.burn_in).is_multiple_of(config.thin) {
            kept.push(f.clone());
        }
    }
    Ok(kept)
}

/// Runs one Gibbs chain per dimension of `model`. Chain `k` draws from the
/// ChaCha stream `k` of `config.seed`, so results do not depend on `exec`.
pub fn gibbs_sample(
    events: &EventData,
    model: &Model,
    links: &[LinkFunction],
    priors: &[GaussianPrior],
    memory: f64,
    config: &GibbsConfig,
    exec: Execution,
) -> Result<GibbsChain> {
    config.validate()?;
    let k = events.dims();
    if model.num_dims() != k || links.len() != k || priors.len() != k {
        return Err(Error::ShapeMismatch(format!(
            "events have {k} dimensions; model, links and priors must match"
        )));
    }
    for (kk, (link, prior)) in links.iter().zip(priors).enumerate() {
        if !link.is_sigmoid() || link.theta_base != 0.0 {
            return Err(Error::UnsupportedLink(format!(
                "the Gibbs sampler needs a sigmoid link without floor, got {:?}",
                link.kind
            )));
        }
        link.validate()?;
        if prior.dim() != model.dim(kk).num_params() {
            return Err(Error::ShapeMismatch(format!(
                "prior of dimension {kk} has the wrong size"
            )));
        }
    }
    let grid = QuadratureGrid::breakpoints(events, memory, model.max_bins());
    let data = FitData::with_grid(events, memory, grid);
    let samples = exec.map_range(k, |kk| {
        let design = data.design(kk, model.dim(kk));
        sample_dim(&design, &links[kk], &priors[kk], config, kk as u64)
    });
    let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(GibbsChain {
        model: model.clone(),
        memory,
        samples,
    })
}
