//! Spike-and-slab prior with a Beta hyperprior on the inclusion weight, and the
//! closed-form expectations that the coordinate updates need.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{erf, SQRT_2_OVER_PI};

/// Continuous component of the prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum Slab {
    /// Density `lambda/2 * exp(-lambda |x - nu|)`.
    Laplace { nu: f64, lambda: f64 },
    /// Centered normal with standard deviation `sigma0`.
    Gaussian { sigma0: f64 },
}

impl Slab {
    pub fn laplace(lambda: f64) -> Self {
        Slab::Laplace { nu: 0.0, lambda }
    }

    pub fn gaussian(sigma0: f64) -> Self {
        Slab::Gaussian { sigma0 }
    }

    /// `(mu, sigma)` minimizing `KL(N(mu, sigma^2) || slab)`.
    pub fn kl_minimizer(&self) -> (f64, f64) {
        match *self {
            Slab::Laplace { nu, lambda } => (nu, 1.0 / (lambda * SQRT_2_OVER_PI)),
            Slab::Gaussian { sigma0 } => (0.0, sigma0),
        }
    }
}

/// Prior `theta_j | z_j ~ (1 - z_j) delta_0 + z_j slab`, `z_j ~ Bernoulli(w)`, `w ~ Beta(a0, b0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub slab: Slab,
    pub a0: f64,
    pub b0: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec {
            slab: Slab::laplace(1.0),
            a0: 1.0,
            b0: 1.0,
        }
    }
}

impl PriorSpec {
    pub fn laplace(lambda: f64) -> Self {
        PriorSpec {
            slab: Slab::laplace(lambda),
            ..Default::default()
        }
    }

    pub fn gaussian(sigma0: f64) -> Self {
        PriorSpec {
            slab: Slab::gaussian(sigma0),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        match self.slab {
            Slab::Laplace { nu, lambda } => {
                positive("lambda", lambda)?;
                if !nu.is_finite() {
                    return Err(Error::InvalidParameter(format!("nu must be finite, got {nu}")));
                }
            }
            Slab::Gaussian { sigma0 } => positive("sigma0", sigma0)?,
        }
        positive("a0", self.a0)?;
        positive("b0", self.b0)
    }

    /// Prior mean inclusion weight `a0 / (a0 + b0)`.
    pub fn mean_weight(&self) -> f64 {
        self.a0 / (self.a0 + self.b0)
    }

    /// `log(b0 / a0)`, the prior log-odds against inclusion.
    pub fn log_odds_exclusion(&self) -> f64 {
        (self.b0 / self.a0).ln()
    }
}

/// `lambda * E|theta - nu|` for `theta ~ N(mu, sigma^2)` (folded normal mean).
pub fn folded_abs_moment(mu: f64, sigma: f64, nu: f64, lambda: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    Ok(folded_unchecked(mu - nu, sigma, lambda))
}

pub(crate) fn folded_unchecked(d: f64, sigma: f64, lambda: f64) -> f64 {
    let z = d / sigma;
    lambda * sigma * SQRT_2_OVER_PI * (-0.5 * z * z).exp() + lambda * d * erf(d / (SQRT_2 * sigma))
}

/// `KL(N(mu, sigma^2) || slab)`, including every constant.
///
/// Both families carry their full normalizers, so the inclusion update sees the
/// same offset whichever slab is configured.
pub fn slab_kl_term(mu: f64, sigma: f64, prior: &PriorSpec) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    Ok(slab_kl_unchecked(mu, sigma, &prior.slab))
}

pub(crate) fn slab_kl_unchecked(mu: f64, sigma: f64, slab: &Slab) -> f64 {
    match *slab {
        Slab::Laplace { nu, lambda } => {
            // log(2 / sqrt(2 pi)) = log sqrt(2 / pi) is the Laplace-vs-normal normalizer offset
            -(lambda * sigma).ln() + folded_unchecked(mu - nu, sigma, lambda) - 0.5 + SQRT_2_OVER_PI.ln()
        }
        Slab::Gaussian { sigma0 } => (sigma0 / sigma).ln() + (mu * mu + sigma * sigma) / (2.0 * sigma0 * sigma0) - 0.5,
    }
}
