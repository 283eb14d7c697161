//! Scalar special functions shared by the model, prior and summary code.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// sqrt(2 / pi)
pub const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF, accurate in both tails.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal quantile.
pub fn normal_quantile(prob: f64) -> f64 {
    if prob <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if prob >= 1.0 {
        return f64::INFINITY;
    }
    let z = -std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * prob);
    // one Newton step against the accurate CDF
    let pdf = normal_pdf(z);
    if pdf > 0.0 {
        z - (normal_cdf(z) - prob) / pdf
    } else {
        z
    }
}

/// Logistic function in branch form so that neither branch overflows.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^t)
pub fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// log sigmoid(t) = -softplus(-t)
pub fn log_sigmoid(t: f64) -> f64 {
    -softplus(-t)
}

/// Curvature coefficient of the quadratic logistic bound, tanh(eta/2) / (4 eta).
///
/// Even in eta; near zero the series 1/8 - eta^2/96 + eta^4/960 is used.
pub fn jj_coefficient(eta: f64) -> f64 {
    let a = eta.abs();
    if a < 1e-4 {
        let e2 = a * a;
        0.125 - e2 / 96.0 + e2 * e2 / 960.0
    } else {
        (0.5 * a).tanh() / (4.0 * a)
    }
}
