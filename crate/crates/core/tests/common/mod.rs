//! Independent oracles shared by the integration and acceptance tests.
//!
//! Nothing here calls the routine it is used to check: expectations are
//! recomputed from literal sums, brute-force searches or Monte Carlo.

#![allow(dead_code, clippy::needless_range_loop)]

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use sparsevb::cavi::{mu_sigma_objective, surrogate_objective, update_eta, update_gamma};
use sparsevb::optim::{minimize, OptSettings};
use sparsevb::{BoundParams, Dataset, PriorSpec, Slab, VariationalState};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Dataset {
    let cols: Vec<f64> = (0..n * p).map(|_| normal(rng)).collect();
    let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
    Dataset::from_column_major(n, p, cols, labels).unwrap()
}

/// Random state with `eta` set to the moment-matching value.
pub fn random_state(rng: &mut ChaCha8Rng, data: &Dataset) -> VariationalState {
    let p = data.p();
    let mut state = VariationalState {
        mu: (0..p).map(|_| 1.5 * normal(rng)).collect(),
        sigma: (0..p).map(|_| rng.random_range(0.1..2.0)).collect(),
        gamma: (0..p)
            .map(|_| match rng.random_range(0..10) {
                0 => 0.0,
                1 => 1.0,
                _ => rng.random::<f64>(),
            })
            .collect(),
        eta: BoundParams(vec![0.0; data.n()]),
    };
    state.eta = update_eta(data, &state).unwrap();
    state
}

pub fn random_prior(rng: &mut ChaCha8Rng) -> PriorSpec {
    let slab = if rng.random::<bool>() {
        Slab::Laplace {
            nu: if rng.random::<bool>() { 0.0 } else { normal(rng) },
            lambda: rng.random_range(0.1..5.0),
        }
    } else {
        Slab::Gaussian {
            sigma0: rng.random_range(0.3..3.0),
        }
    };
    PriorSpec {
        slab,
        a0: rng.random_range(0.2..5.0),
        b0: rng.random_range(0.2..50.0),
    }
}

/// Largest relative error of the analytic `(mu, log sigma)` gradient of the
/// block objective against central differences.
pub fn fd_gradient_error(rng: &mut ChaCha8Rng) -> f64 {
    let n = rng.random_range(3..15);
    let p = rng.random_range(1..6);
    let data = random_dataset(rng, n, p);
    let state = random_state(rng, &data);
    let prior = random_prior(rng);
    let j = rng.random_range(0..p);
    let mu = 2.0 * normal(rng);
    let tau: f64 = rng.random_range(-2.0..1.0);
    let f = |m: f64, t: f64| mu_sigma_objective(j, m, t.exp(), &data, &state, &prior).unwrap().0;
    let (_, g) = mu_sigma_objective(j, mu, tau.exp(), &data, &state, &prior).unwrap();
    let h = 1e-5;
    let fd = [
        (f(mu + h, tau) - f(mu - h, tau)) / (2.0 * h),
        (f(mu, tau + h) - f(mu, tau - h)) / (2.0 * h),
    ];
    (0..2)
        .map(|k| (g[k] - fd[k]).abs() / fd[k].abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Golden-section minimizer of a unimodal function on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// `|update_gamma - argmin_gamma surrogate|`, with the argmin found by a 1-D
/// convex search. The surrogate is affine in `gamma_j` apart from the two
/// entropy terms, so its slope `c` is read off the endpoints `gamma_j = 0, 1`.
pub fn gamma_oracle_error(rng: &mut ChaCha8Rng) -> f64 {
    let n = rng.random_range(3..15);
    let p = rng.random_range(1..6);
    let data = random_dataset(rng, n, p);
    let mut state = random_state(rng, &data);
    let prior = random_prior(rng);
    let j = rng.random_range(0..p);
    let wbar = prior.a0 / (prior.a0 + prior.b0);
    let mut at = |g: f64| {
        state.gamma[j] = g;
        surrogate_objective(&data, &state, &prior).unwrap()
    };
    let (s0, s1) = (at(0.0), at(1.0));
    let c = s1 - s0 - ((1.0 / wbar).ln() - (1.0 / (1.0 - wbar)).ln());
    let xlx = |x: f64, y: f64| if x == 0.0 { 0.0 } else { x * (x / y).ln() };
    let h = |g: f64| g * c + xlx(g, wbar) + xlx(1.0 - g, 1.0 - wbar);
    let oracle = golden_section(h, 0.0, 1.0, 1e-13);
    state.gamma[j] = rng.random::<f64>();
    let got = update_gamma(j, &data, &state, &prior).unwrap();
    (got - oracle).abs()
}

/// `E_Q (x_i^T theta)^2` from the literal double sum.
pub fn eta_literal(data: &Dataset, state: &VariationalState) -> Vec<f64> {
    let p = data.p();
    (0..data.n())
        .map(|i| {
            let mut s = 0.0;
            for k in 0..p {
                let x = data.get(i, k);
                s += state.gamma[k] * x * x * (state.mu[k].powi(2) + state.sigma[k].powi(2));
                for l in 0..p {
                    if l != k {
                        s += state.gamma[k] * x * state.mu[k] * state.gamma[l] * data.get(i, l) * state.mu[l];
                    }
                }
            }
            s.sqrt()
        })
        .collect()
}

pub fn eta_literal_error(rng: &mut ChaCha8Rng) -> f64 {
    let n = rng.random_range(1..20);
    let p = rng.random_range(1..8);
    let data = random_dataset(rng, n, p);
    let state = random_state(rng, &data);
    let got = update_eta(&data, &state).unwrap();
    eta_literal(&data, &state)
        .iter()
        .zip(&got.0)
        .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Per-observation expected bound as a function of `eta_i`, given `E(x_i^T theta)^2 = q`
/// and `E x_i^T theta = m`.
pub fn expected_bound_term(eta: f64, y: f64, m: f64, q: f64) -> f64 {
    let log_sig = -(1.0 + (-eta).exp()).ln();
    let a = if eta.abs() < 1e-8 {
        0.125
    } else {
        (eta / 2.0).tanh() / (4.0 * eta)
    };
    log_sig - eta / 2.0 + (y - 0.5) * m - a * (q - eta * eta)
}

/// True when `update_eta` beats every point of a grid over `[0, 3 eta* + 5]`.
pub fn eta_grid_dominates(rng: &mut ChaCha8Rng) -> bool {
    let n = rng.random_range(1..10);
    let p = rng.random_range(1..6);
    let data = random_dataset(rng, n, p);
    let state = random_state(rng, &data);
    let eta = update_eta(&data, &state).unwrap();
    let q = eta_literal(&data, &state);
    (0..n).all(|i| {
        let m: f64 = (0..p).map(|k| state.gamma[k] * state.mu[k] * data.get(i, k)).sum();
        let y = f64::from(data.labels()[i]);
        let q2 = q[i] * q[i];
        let best = expected_bound_term(eta.0[i], y, m, q2);
        let top = 3.0 * eta.0[i] + 5.0;
        (0..=2000).all(|k| expected_bound_term(top * k as f64 / 2000.0, y, m, q2) <= best + 1e-12)
    })
}

/// Monte Carlo estimate of `E|theta - nu|` under `N(mu, sigma^2)` with its standard error.
pub fn folded_mc(rng: &mut ChaCha8Rng, mu: f64, sigma: f64, nu: f64, draws: usize) -> (f64, f64) {
    let d = Normal::new(mu, sigma).unwrap();
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..draws {
        let v = (d.sample(rng) - nu).abs();
        s += v;
        s2 += v * v;
    }
    let m = s / draws as f64;
    (m, ((s2 / draws as f64 - m * m) / draws as f64).sqrt())
}

/// Largest relative per-sweep increase of the sequential surrogate trace on a
/// random small instance.
pub fn sequential_trace_worst_increase(rng: &mut ChaCha8Rng) -> f64 {
    use sparsevb::{fit, FitConfig};
    let n = rng.random_range(5..=50);
    let p = rng.random_range(1..=20);
    let data = random_dataset(rng, n, p);
    let config = FitConfig {
        prior: random_prior(rng),
        max_iter: 60,
        tol: 1e-12,
        seed: rng.random(),
        shuffle: rng.random(),
        ..FitConfig::default()
    };
    let res = fit(&data, &config).unwrap();
    res.objective_trace
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0].abs().max(1.0))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Exhaustive restricted constants over every subset of size `1..=s`,
/// using a cyclic Jacobi eigenvalue solver.
pub fn exhaustive_kappas(x: &DMatrix<f64>, w: &[f64], s: usize) -> (f64, f64) {
    let p = x.ncols();
    let norm2 = (0..p).map(|j| x.column(j).norm_squared()).fold(0.0, f64::max);
    let (mut kbar, mut kmin) = (f64::NEG_INFINITY, f64::INFINITY);
    for mask in 1u32..(1 << p) {
        let sub: Vec<usize> = (0..p).filter(|&j| mask >> j & 1 == 1).collect();
        if sub.len() > s {
            continue;
        }
        let k = sub.len();
        let mut g = vec![vec![0.0; k]; k];
        let mut gw = vec![vec![0.0; k]; k];
        for a in 0..k {
            for b in 0..k {
                for i in 0..x.nrows() {
                    let v = x[(i, sub[a])] * x[(i, sub[b])];
                    g[a][b] += v;
                    gw[a][b] += w[i] * v;
                }
            }
        }
        let e = jacobi_eigenvalues(g);
        let ew = jacobi_eigenvalues(gw);
        kbar = kbar.max(e.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        kmin = kmin.min(ew.iter().cloned().fold(f64::INFINITY, f64::min));
    }
    (kbar / norm2, kmin / norm2)
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// Dense symmetric eigenvalues through nalgebra, used to cross-check Jacobi.
pub fn dense_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    SymmetricEigen::new(a.clone()).eigenvalues.iter().cloned().collect()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| normal(rng))
}

/// Shortest interval with spike-and-slab mass at least `level`. The lower
/// endpoint is scanned on a grid of width `step` (plus 0); for each one the
/// smallest feasible upper endpoint is found by bisection, and the best grid
/// point is polished by golden section on `[a - step, a + step]`.
pub fn interval_grid_oracle(gamma: f64, mu: f64, sigma: f64, level: f64, step: f64) -> (f64, f64) {
    if 1.0 - gamma >= level {
        return (0.0, 0.0);
    }
    let cdf = |x: f64| {
        let z = (x - mu) / (sigma * std::f64::consts::SQRT_2);
        if z < 0.0 {
            0.5 * series_erfc(-z)
        } else {
            1.0 - 0.5 * series_erfc(z)
        }
    };
    let mass = |a: f64, b: f64| {
        let spike = if a <= 0.0 && 0.0 <= b { 1.0 - gamma } else { 0.0 };
        gamma * (cdf(b) - cdf(a)) + spike
    };
    let far = (mu.abs() + 12.0 * sigma) * 2.0;
    let upper = |a: f64| -> Option<f64> {
        if mass(a, far) < level {
            return None;
        }
        let (mut lo, mut hi) = (a, far);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mass(a, mid) >= level {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-14 {
                break;
            }
        }
        Some(hi)
    };
    let len = |a: f64| upper(a).map_or(f64::INFINITY, |b| b - a);
    let start = (mu - 12.0 * sigma).min(0.0) - step;
    let end = (mu + 12.0 * sigma).max(0.0);
    let mut best = (f64::INFINITY, 0.0);
    let mut a = start;
    while a <= end {
        let l = len(a);
        if l < best.0 {
            best = (l, a);
        }
        a += step;
    }
    if len(0.0) < best.0 {
        best = (len(0.0), 0.0);
    }
    let a = golden_section(len, best.1 - step, best.1 + step, 1e-12);
    let a = if len(a) <= best.0 { a } else { best.1 };
    (a, upper(a).unwrap())
}

/// `erfc(x)` for `x >= 0`: Maclaurin series of `erf` below 2.5, Laplace
/// continued fraction above. Independent of the library's special functions.
pub fn series_erfc(x: f64) -> f64 {
    if x < 2.5 {
        let mut term = x;
        let mut sum = x;
        for n in 1..200 {
            term *= -x * x / n as f64;
            let add = term / (2 * n + 1) as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        1.0 - 2.0 / std::f64::consts::PI.sqrt() * sum
    } else {
        let mut f = x;
        for k in (1..300).rev() {
            f = x + (k as f64 / 2.0) / f;
        }
        (-x * x).exp() / std::f64::consts::PI.sqrt() / f
    }
}

/// Minimizes the block objective with the library's L-BFGS directly (no
/// closed form), for cross-checking the Gaussian-slab shortcut.
pub fn block_minimum_lbfgs(j: usize, data: &Dataset, state: &VariationalState, prior: &PriorSpec) -> (f64, f64) {
    let settings = OptSettings {
        grad_tol: 1e-12,
        max_evals: 2000,
        ..OptSettings::default()
    };
    let m = minimize(
        |x, g| {
            let (v, grad) = mu_sigma_objective(j, x[0], x[1].exp(), data, state, prior).unwrap();
            g.copy_from_slice(&grad);
            v
        },
        &[0.0, 0.0],
        &settings,
    )
    .unwrap();
    (m.x[0], m.x[1].exp())
}

/// Largest endpoint discrepancy between the library credible interval and
/// [`interval_grid_oracle`] on a random spike-and-slab marginal.
pub fn interval_oracle_error(rng: &mut ChaCha8Rng) -> f64 {
    let gamma = rng.random_range(0.02..1.0);
    let mu = rng.random_range(-3.0..3.0);
    let sigma = rng.random_range(0.1..2.0);
    let level = [0.8, 0.9, 0.95, 0.99][rng.random_range(0..4)];
    let state = VariationalState {
        mu: vec![mu],
        sigma: vec![sigma],
        gamma: vec![gamma],
        eta: BoundParams(vec![]),
    };
    let got = sparsevb::summary::credible_interval(&state, 0, level).unwrap();
    let (lo, hi) = interval_grid_oracle(gamma, mu, sigma, level, 1e-3);
    (got.lo - lo).abs().max((got.hi - hi).abs())
}

/// Library folded moment against a 200 000-draw Monte Carlo mean, in
/// standard errors.
pub fn folded_oracle_z(rng: &mut ChaCha8Rng) -> f64 {
    let mu = rng.random_range(-3.0..3.0);
    let sigma = rng.random_range(0.05..2.5);
    let nu = rng.random_range(-1.0..1.0);
    let lambda = rng.random_range(0.1..5.0);
    let got = sparsevb::prior::folded_abs_moment(mu, sigma, nu, lambda).unwrap() / lambda;
    let (m, se) = folded_mc(rng, mu, sigma, nu, 200_000);
    (got - m).abs() / se
}

/// Literal log-likelihood `sum_i [y_i t_i - ln(1 + e^{t_i})]`.
pub fn log_likelihood_literal(data: &Dataset, theta: &[f64]) -> f64 {
    (0..data.n())
        .map(|i| {
            let t: f64 = (0..data.p()).map(|j| data.get(i, j) * theta[j]).sum();
            let log1pexp = if t > 0.0 {
                t + (-t).exp().ln_1p()
            } else {
                t.exp().ln_1p()
            };
            data.labels()[i] as f64 * t - log1pexp
        })
        .sum()
}

/// On a random instance returns `(bound - loglik, |bound_at_tangent - loglik|)`:
/// the first must be nonpositive, the second zero up to rounding.
pub fn jj_bound_case(rng: &mut ChaCha8Rng) -> (f64, f64) {
    use sparsevb::model::jj_lower_bound;
    use sparsevb::Coefficients;
    let n = rng.random_range(1..=30);
    let p = rng.random_range(1..=8);
    let data = random_dataset(rng, n, p);
    let theta: Vec<f64> = (0..p).map(|_| 3.0 * normal(rng)).collect();
    let eta: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
    let ll = log_likelihood_literal(&data, &theta);
    let coef = Coefficients(theta.clone());
    let gap = jj_lower_bound(&data, &coef, &BoundParams(eta)).unwrap() - ll;
    let tangent: Vec<f64> = (0..n)
        .map(|i| (0..p).map(|j| data.get(i, j) * theta[j]).sum::<f64>().abs())
        .collect();
    let tight = jj_lower_bound(&data, &coef, &BoundParams(tangent)).unwrap() - ll;
    (gap, tight.abs() / ll.abs().max(1.0))
}
