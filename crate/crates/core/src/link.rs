//! Nonlinear link functions mapping the linear drive to an intensity.
//!
//! Every kind is written as `phi(x) = theta_base + theta * psi(alpha * (x - eta))`
//! with `psi` the logistic, rectifier or softplus function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Sigmoid,
    Relu,
    Softplus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkFunction {
    pub kind: LinkKind,
    /// Scale of the nonlinearity (theta for the sigmoid, Lambda otherwise).
    pub theta: f64,
    pub alpha: f64,
    pub eta: f64,
    #[serde(default)]
    pub theta_base: f64,
}

impl Default for LinkFunction {
    fn default() -> Self {
        Self::sigmoid(20.0, 0.1, 10.0)
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(sigmoid(x))` without underflow for large negative `x`.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl LinkFunction {
    pub fn sigmoid(theta: f64, alpha: f64, eta: f64) -> Self {
        Self {
            kind: LinkKind::Sigmoid,
            theta,
            alpha,
            eta,
            theta_base: 0.0,
        }
    }

    pub fn relu(theta_base: f64, scale: f64, alpha: f64, eta: f64) -> Self {
        Self {
            kind: LinkKind::Relu,
            theta: scale,
            alpha,
            eta,
            theta_base,
        }
    }

    /// ReLU link `0.001 + max(x, 0)`.
    pub fn relu_default() -> Self {
        Self::relu(0.001, 1.0, 1.0, 0.0)
    }

    pub fn softplus(scale: f64, alpha: f64, eta: f64) -> Self {
        Self {
            kind: LinkKind::Softplus,
            theta: scale,
            alpha,
            eta,
            theta_base: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.theta.is_finite()
            && self.theta > 0.0
            && self.alpha.is_finite()
            && self.alpha > 0.0
            && self.eta.is_finite()
            && self.theta_base.is_finite()
            && self.theta_base >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "invalid link parameters {self:?}"
            )))
        }
    }

    pub fn is_sigmoid(&self) -> bool {
        self.kind == LinkKind::Sigmoid
    }

    /// Argument passed to the inner nonlinearity, `alpha * (x - eta)`.
    #[inline]
    pub fn recentre(&self, x: f64) -> f64 {
        self.alpha * (x - self.eta)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let z = self.recentre(x);
        let psi = match self.kind {
            LinkKind::Sigmoid => sigmoid(z),
            LinkKind::Relu => z.max(0.0),
            LinkKind::Softplus => softplus(z),
        };
        self.theta_base + self.theta * psi
    }

    /// `log(phi(x))`, computed in log space for the sigmoid.
    pub fn log_eval(&self, x: f64) -> f64 {
        match self.kind {
            LinkKind::Sigmoid if self.theta_base == 0.0 => {
                self.theta.ln() + log_sigmoid(self.recentre(x))
            }
            _ => self.eval(x).ln(),
        }
    }

    /// Global upper bound on `phi`, when one exists.
    pub fn upper_bound(&self) -> Option<f64> {
        match self.kind {
            LinkKind::Sigmoid => Some(self.theta_base + self.theta),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_midpoint() {
        let link = LinkFunction::sigmoid(20.0, 0.1, 10.0);
        assert_eq!(link.eval(10.0), 10.0);
        let expected = 20.0 / (1.0 + 0.9f64.exp());
        assert!((link.eval(1.0) - expected).abs() < 1e-13);
    }

    #[test]
    fn relu_linear_region() {
        let link = LinkFunction::relu_default();
        assert!((link.eval(0.5) - 0.501).abs() < 1e-15);
        assert_eq!(link.eval(-3.0), 0.001);
    }

    #[test]
    fn log_eval_matches_eval() {
        let link = LinkFunction::sigmoid(20.0, 0.1, 10.0);
        for x in [-500.0, -20.0, 0.0, 10.0, 35.0] {
            let direct = link.eval(x).ln();
            assert!((link.log_eval(x) - direct).abs() < 1e-12 * direct.abs().max(1.0));
        }
        // far tail stays finite in log space
        assert!(link.log_eval(-1e5).is_finite());
    }

    #[test]
    fn links_are_monotone_and_nonnegative() {
        let links = [
            LinkFunction::sigmoid(20.0, 0.2, 10.0),
            LinkFunction::relu_default(),
            LinkFunction::softplus(40.0, 0.1, 20.0),
        ];
        for link in links {
            let mut prev = link.eval(-100.0);
            assert!(prev >= 0.0);
            for i in -999..1000 {
                let v = link.eval(i as f64 * 0.1);
                assert!(v >= prev - 1e-12, "{link:?} not monotone at {i}");
                prev = v;
            }
        }
    }
}
