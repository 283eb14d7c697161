//! Decisions and summaries derived from a fitted variational state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cavi::VariationalState;
use crate::error::{check_len, Error, Result};
use crate::special::{normal_cdf, normal_quantile, sigmoid};

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// `gamma_j mu_j`
    pub posterior_mean: Vec<f64>,
    /// Zero-based indices with `gamma_j > threshold`.
    pub selected: Vec<usize>,
    pub threshold: f64,
    pub intervals: Vec<Interval>,
    pub level: f64,
}

impl Summary {
    pub fn new(state: &VariationalState, threshold: f64, level: f64) -> Result<Self> {
        check_open_unit("threshold", threshold)?;
        check_open_unit("level", level)?;
        let intervals = (0..state.p())
            .map(|j| credible_interval(state, j, level))
            .collect::<Result<Vec<_>>>()?;
        Ok(Summary {
            posterior_mean: posterior_mean(state),
            selected: select(state, threshold),
            threshold,
            intervals,
            level,
        })
    }
}

fn check_open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in (0, 1), got {v}")))
    }
}

pub fn posterior_mean(state: &VariationalState) -> Vec<f64> {
    state.gamma.iter().zip(&state.mu).map(|(g, m)| g * m).collect()
}

/// Indices whose inclusion probability strictly exceeds `threshold`.
pub fn select(state: &VariationalState, threshold: f64) -> Vec<usize> {
    state
        .gamma
        .iter()
        .enumerate()
        .filter(|(_, &g)| g > threshold)
        .map(|(j, _)| j)
        .collect()
}

/// Monte Carlo estimate of `E_Q sigmoid(x^T theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveMean {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

/// Averages `sigmoid(x^T theta)` over `n_samples` draws `theta ~ Q`, each
/// coordinate drawn as `Bernoulli(gamma_j) * N(mu_j, sigma_j^2)`.
pub fn predictive_mean(state: &VariationalState, x: &[f64], n_samples: usize, seed: u64) -> Result<PredictiveMean> {
    check_len("feature vector", state.p(), x.len())?;
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
    }
    let active: Vec<usize> = (0..state.p())
        .filter(|&j| state.gamma[j] > 0.0 && x[j] != 0.0)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n_samples {
        let mut t = 0.0;
        for &j in &active {
            let include = rng.random::<f64>() < state.gamma[j];
            let z: f64 = rng.sample(StandardNormal);
            if include {
                t += x[j] * (state.mu[j] + state.sigma[j] * z);
            }
        }
        let v = sigmoid(t);
        sum += v;
        sum_sq += v * v;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = if n_samples > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(PredictiveMean {
        mean,
        std_error: (var / n).sqrt(),
        n_samples,
    })
}

/// Mass that `gamma N(mu, sigma^2) + (1 - gamma) delta_0` puts on `interval`.
pub fn marginal_mass(gamma: f64, mu: f64, sigma: f64, interval: Interval) -> f64 {
    let slab = normal_cdf((interval.hi - mu) / sigma) - normal_cdf((interval.lo - mu) / sigma);
    let spike = if interval.contains(0.0) { 1.0 - gamma } else { 0.0 };
    gamma * slab.max(0.0) + spike
}

/// Shortest interval `[lo, hi]` with Gaussian mass `q` that contains zero.
fn shortest_containing_zero(mu: f64, sigma: f64, q: f64) -> Interval {
    if q <= 0.0 {
        return Interval::point(0.0);
    }
    let half = sigma * normal_quantile(0.5 + 0.5 * q);
    if (mu - half) <= 0.0 && 0.0 <= (mu + half) {
        return Interval {
            lo: mu - half,
            hi: mu + half,
        };
    }
    // The central interval misses zero, so the optimum has an endpoint at zero.
    // Work with mu > 0 and mirror afterwards.
    let m = mu.abs();
    let lower_tail = normal_cdf(-m / sigma);
    let hi = m + sigma * normal_quantile((q + lower_tail).min(1.0));
    if mu > 0.0 {
        Interval { lo: 0.0, hi }
    } else {
        Interval { lo: -hi, hi: 0.0 }
    }
}

/// Shortest interval `I` with `Q(theta_j in I) >= level` under the marginal
/// spike-and-slab distribution of coordinate `j`.
pub fn credible_interval(state: &VariationalState, j: usize, level: f64) -> Result<Interval> {
    check_open_unit("level", level)?;
    if j >= state.p() {
        return Err(Error::InvalidParameter(format!("coordinate {j} out of range")));
    }
    Ok(spike_slab_interval(state.gamma[j], state.mu[j], state.sigma[j], level))
}

pub(crate) fn spike_slab_interval(gamma: f64, mu: f64, sigma: f64, level: f64) -> Interval {
    if 1.0 - gamma >= level {
        return Interval::point(0.0);
    }
    let with_zero = shortest_containing_zero(mu, sigma, (level - (1.0 - gamma)) / gamma);
    let slab_only = level / gamma;
    if slab_only < 1.0 {
        let half = sigma * normal_quantile(0.5 + 0.5 * slab_only);
        let central = Interval {
            lo: mu - half,
            hi: mu + half,
        };
        if !central.contains(0.0) && central.len() < with_zero.len() {
            return central;
        }
    }
    with_zero
}
