//! Polya-Gamma `PG(1, c)` distribution: tilted mean and exact sampling.

use std::f64::consts::{LN_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Truncation point of the alternating-series sampler.
const TRUNC: f64 = 0.64;

/// `E[omega]` for `omega ~ PG(1, c)`, i.e. `tanh(c/2) / (2c)`.
pub fn pg_mean(c: f64) -> Result<f64> {
    if !(c >= 0.0) {
        return Err(Error::Domain(format!(
            "Polya-Gamma tilt must be nonnegative, got {c}"
        )));
    }
    Ok(tilted_mean(c))
}

/// `pg_mean` on `|c|`, for inner loops.
#[inline]
pub(crate) fn tilted_mean(c: f64) -> f64 {
    let c = c.abs();
    if c < 1e-4 {
        0.25 - c * c / 48.0
    } else {
        (0.5 * c).tanh() / (2.0 * c)
    }
}

/// `g(omega, x) = -omega x^2 / 2 + x / 2 - log 2`, so that
/// `sigmoid(x) = E[exp(g(omega, x))]` under `omega ~ PG(1, 0)`.
#[inline]
pub fn log_g(omega: f64, x: f64) -> f64 {
    -0.5 * omega * x * x + 0.5 * x - LN_2
}

/// `log cosh(x)` without overflow.
#[inline]
pub(crate) fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - LN_2
}

/// Exact draw from `PG(1, c)` by the alternating-series rejection method.
///
/// `PG(1, c)` only depends on `|c|`.
pub fn pg_sample<R: Rng + ?Sized>(c: f64, rng: &mut R) -> f64 {
    let z = 0.5 * c.abs();
    let fz = 0.125 * PI * PI + 0.5 * z * z;
    let p_left = mass_texpon(z);
    loop {
        let x = if rng.random::<f64>() < p_left {
            let e: f64 = Exp1.sample(rng);
            TRUNC + e / fz
        } else {
            rtigauss(z, rng)
        };
        let mut s = series_term(0, x);
        let y = rng.random::<f64>() * s;
        let mut n = 0;
        loop {
            n += 1;
            if n % 2 == 1 {
                s -= series_term(n, x);
                if y <= s {
                    return 0.25 * x;
                }
            } else {
                s += series_term(n, x);
                if y > s {
                    break;
                }
            }
        }
    }
}

/// n-th coefficient of the alternating series for the Jacobi density.
fn series_term(n: u32, x: f64) -> f64 {
    let k = (n as f64 + 0.5) * PI;
    if x > TRUNC {
        k * (-0.5 * k * k * x).exp()
    } else if x > 0.0 {
        let h = n as f64 + 0.5;
        (-1.5 * ((0.5 * PI).ln() + x.ln()) + k.ln() - 2.0 * h * h / x).exp()
    } else {
        0.0
    }
}

/// `log Phi(x)`, accurate in the far left tail.
fn log_norm_cdf(x: f64) -> f64 {
    if x > -30.0 {
        (0.5 * erfc(-x / std::f64::consts::SQRT_2)).ln()
    } else {
        let x2 = x * x;
        -0.5 * x2 - (-x).ln() - 0.5 * (2.0 * PI).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

/// Probability of drawing from the exponential piece (right of `TRUNC`).
fn mass_texpon(z: f64) -> f64 {
    let t = TRUNC;
    let fz = 0.125 * PI * PI + 0.5 * z * z;
    let b = (1.0 / t).sqrt() * (t * z - 1.0);
    let a = -(1.0 / t).sqrt() * (t * z + 1.0);
    let x0 = fz.ln() + fz * t;
    let xb = x0 - z + log_norm_cdf(b);
    let xa = x0 + z + log_norm_cdf(a);
    let qdivp = 4.0 / PI * (xb.exp() + xa.exp());
    1.0 / (1.0 + qdivp)
}

/// Inverse Gaussian `IG(1/z, 1)` truncated to `(0, TRUNC)`.
fn rtigauss<R: Rng + ?Sized>(z: f64, rng: &mut R) -> f64 {
    let t = TRUNC;
    let mut x = t + 1.0;
    if 1.0 / t > z {
        let mut accept = 0.0;
        while rng.random::<f64>() > accept {
            let (mut e1, mut e2): (f64, f64) = (Exp1.sample(rng), Exp1.sample(rng));
            while e1 * e1 > 2.0 * e2 / t {
                e1 = Exp1.sample(rng);
                e2 = Exp1.sample(rng);
            }
            x = 1.0 + e1 * t;
            x = t / (x * x);
            accept = (-0.5 * z * z * x).exp();
        }
    } else {
        let mu = 1.0 / z;
        while x > t {
            let n: f64 = StandardNormal.sample(rng);
            let y = n * n;
            let mu_y = mu * y;
            x = mu + 0.5 * mu * mu_y - 0.5 * mu * (4.0 * mu_y + mu_y * mu_y).sqrt();
            if rng.random::<f64>() > mu / (mu + x) {
                x = mu * mu / x;
            }
        }
    }
    x
}
