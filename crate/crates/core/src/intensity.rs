//! Intensity and log-likelihood of a nonlinear Hawkes process.
//!
//! The drive `nu_k + sum_l sum_i h_lk(t - T_i^l)` only sees events strictly
//! before `t`, so it is piecewise constant and left-continuous in `t`, with
//! jumps at `T_i^l + j A / J_k`. The compensator is integrated exactly over
//! those pieces.

use crate::basis::HistogramBasis;
use crate::error::{Error, Result};
use crate::events::EventData;
use crate::link::LinkFunction;
use crate::params::HawkesParams;

fn check_shapes(params: &HawkesParams, events: &EventData) -> Result<()> {
    if params.dims() != events.dims() {
        return Err(Error::ShapeMismatch(format!(
            "parameters have {} dimensions, events have {}",
            params.dims(),
            events.dims()
        )));
    }
    Ok(())
}

fn check_time(events: &EventData, t: f64) -> Result<()> {
    if !(t >= 0.0 && t <= events.horizon()) {
        return Err(Error::Domain(format!(
            "time {t} outside [0, {}]",
            events.horizon()
        )));
    }
    Ok(())
}

/// Drive without range checks; `t` may be anywhere after the start of the data.
pub(crate) fn drive_unchecked(params: &HawkesParams, events: &EventData, k: usize, t: f64) -> f64 {
    let memory = params.memory();
    let mut x = params.nu()[k];
    for l in 0..params.dims() {
        if params.weights(l, k).is_empty() {
            continue;
        }
        for &s in events.window(l, t, memory) {
            x += params.kernel(l, k, t - s);
        }
    }
    x
}

/// Linear drive `nu_k + sum_l int h_lk(t - s) dN^l_s` of dimension `k` at `t`.
pub fn linear_drive(params: &HawkesParams, events: &EventData, k: usize, t: f64) -> Result<f64> {
    check_shapes(params, events)?;
    if k >= params.dims() {
        return Err(Error::Domain(format!("dimension {k} out of range")));
    }
    check_time(events, t)?;
    Ok(drive_unchecked(params, events, k, t))
}

/// Conditional intensity `phi_k(linear_drive)`.
pub fn intensity(
    params: &HawkesParams,
    events: &EventData,
    link: &LinkFunction,
    k: usize,
    t: f64,
) -> Result<f64> {
    Ok(link.eval(linear_drive(params, events, k, t)?))
}

/// Histogram features `H_j^l(t) = (J/A) #{events of l at lag in bin j}`.
pub fn basis_features(
    events: &EventData,
    basis: &HistogramBasis,
    l: usize,
    t: f64,
) -> Result<Vec<f64>> {
    if l >= events.dims() {
        return Err(Error::Domain(format!("dimension {l} out of range")));
    }
    check_time(events, t)?;
    let mut h = vec![0.0; basis.bins()];
    for &s in events.window(l, t, basis.memory()) {
        if let Some(j) = basis.bin_of(t - s) {
            h[j] += basis.height();
        }
    }
    Ok(h)
}

/// Sorted boundaries of the intervals of `[0, T]` on which the drive of
/// dimension `k` is constant, for kernels on a histogram with `bins` pieces.
pub fn drive_breakpoints(
    events: &EventData,
    sources: &[usize],
    memory: f64,
    bins: usize,
    horizon: f64,
) -> Vec<f64> {
    let width = memory / bins as f64;
    let mut points = vec![0.0, horizon];
    for &l in sources {
        for &s in events.dim(l) {
            for j in 0..=bins {
                let b = s + j as f64 * width;
                if b > 0.0 && b < horizon {
                    points.push(b);
                }
            }
        }
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    points
}

/// Exact compensator `int_0^T phi_k(drive_k(t)) dt`.
pub fn compensator(
    params: &HawkesParams,
    events: &EventData,
    link: &LinkFunction,
    k: usize,
) -> Result<f64> {
    check_shapes(params, events)?;
    let sources: Vec<usize> = (0..params.dims())
        .filter(|&l| !params.weights(l, k).is_empty())
        .collect();
    let points = drive_breakpoints(
        events,
        &sources,
        params.memory(),
        params.basis(k).bins(),
        events.horizon(),
    );
    let mut total = 0.0;
    for w in points.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        total += len * link.eval(drive_unchecked(params, events, k, mid));
    }
    Ok(total)
}

/// Log-likelihood `sum_k [sum_i log lambda^k(T_i^k) - int_0^T lambda^k]` on `[0, T]`.
///
/// `links` holds one link per dimension.
pub fn log_likelihood(
    params: &HawkesParams,
    events: &EventData,
    links: &[LinkFunction],
) -> Result<f64> {
    check_shapes(params, events)?;
    if links.len() != params.dims() {
        return Err(Error::ShapeMismatch(format!(
            "expected {} links, got {}",
            params.dims(),
            links.len()
        )));
    }
    let mut total = 0.0;
    for (k, link) in links.iter().enumerate() {
        for &t in events.observed(k) {
            let v = link.log_eval(drive_unchecked(params, events, k, t));
            if !(v > f64::NEG_INFINITY) {
                return Err(Error::ZeroIntensity { dim: k, time: t });
            }
            total += v;
        }
        total -= compensator(params, events, link, k)?;
    }
    Ok(total)
}
