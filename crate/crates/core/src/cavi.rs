//! Coordinate-ascent fitting of the spike-and-slab mean-field approximation.
//!
//! Each sweep refreshes the bound parameters `eta`, then visits every
//! coordinate `j`, minimizing the surrogate objective over `(mu_j, sigma_j)`
//! with L-BFGS (closed form for Gaussian slabs) and then over `gamma_j` in
//! closed form.
//!
//! The surrogate is `KL(Q || prior) - E_Q f(theta, eta)` where `f` is the
//! quadratic likelihood bound from [`crate::model::jj_lower_bound`]. Only the
//! scalars `S_j = sum_i A(eta_i) x_ij^2` and
//! `b_j = 2 sum_i A(eta_i) x_ij r_ij - sum_i (y_i - 1/2) x_ij` enter a
//! coordinate update, where `r_ij = sum_{k != j} gamma_k x_ik mu_k`.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::model::{score, BoundParams, Coefficients, Dataset};
use crate::optim::{minimize, OptSettings, Status};
use crate::prior::{folded_unchecked, slab_kl_unchecked, PriorSpec, Slab};
use crate::special::{erf, jj_coefficient, log_sigmoid, sigmoid, SQRT_2_OVER_PI};

/// Parameters of `Q = prod_j [gamma_j N(mu_j, sigma_j^2) + (1 - gamma_j) delta_0]`
/// together with the bound parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalState {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub gamma: Vec<f64>,
    pub eta: BoundParams,
}

impl VariationalState {
    /// `mu = 0`, `sigma = 1`, `gamma = a0 / (a0 + b0)`, `eta` refreshed from that state.
    pub fn initial(data: &Dataset, prior: &PriorSpec) -> Self {
        Self::from_means(data, prior, vec![0.0; data.p()])
    }

    fn from_means(data: &Dataset, prior: &PriorSpec, mu: Vec<f64>) -> Self {
        let p = data.p();
        let mut state = VariationalState {
            mu,
            sigma: vec![1.0; p],
            gamma: vec![prior.mean_weight(); p],
            eta: BoundParams(vec![0.0; data.n()]),
        };
        state.eta = eta_unchecked(data, &state);
        state
    }

    pub fn p(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self, data: &Dataset) -> Result<()> {
        check_len("mu", data.p(), self.mu.len())?;
        check_len("sigma", data.p(), self.sigma.len())?;
        check_len("gamma", data.p(), self.gamma.len())?;
        check_len("eta", data.n(), self.eta.0.len())?;
        if let Some(j) = self.sigma.iter().position(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "sigma[{j}] = {} must be positive",
                self.sigma[j]
            )));
        }
        if let Some(j) = self.gamma.iter().position(|g| !(0.0..=1.0).contains(g)) {
            return Err(Error::InvalidParameter(format!(
                "gamma[{j}] = {} outside [0, 1]",
                self.gamma[j]
            )));
        }
        if let Some(j) = self.mu.iter().position(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter(format!("mu[{j}] is not finite")));
        }
        self.eta.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UpdateOrder {
    /// Coordinates updated in place one after another.
    #[default]
    Sequential,
    /// Every coordinate computed from the sweep-start state; results merged at sweep end.
    ParallelSnapshot,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Init {
    #[default]
    Default,
    /// `mu` from gradient ascent on the ridge-penalized log-likelihood.
    RidgeWarmStart { steps: usize, penalty: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub prior: PriorSpec,
    pub max_iter: usize,
    /// Threshold on both `max_j |delta gamma_j|` and the relative objective change.
    pub tol: f64,
    pub update_order: UpdateOrder,
    /// Visit coordinates in a fresh seeded random order every sweep.
    pub shuffle: bool,
    pub init: Init,
    pub optimizer: OptSettings,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            prior: PriorSpec::default(),
            max_iter: 500,
            tol: 1e-5,
            update_order: UpdateOrder::Sequential,
            shuffle: false,
            init: Init::Default,
            optimizer: OptSettings::default(),
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        self.optimizer.validate()?;
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        if let Init::RidgeWarmStart { penalty, .. } = self.init {
            if !(penalty >= 0.0 && penalty.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "ridge penalty must be >= 0, got {penalty}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub state: VariationalState,
    /// Surrogate objective after each sweep.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_seconds: f64,
    /// Coordinate updates where the inner optimizer did not reach its tolerance.
    pub optimizer_warnings: usize,
}

/// Data-dependent scalars of the coordinate-`j` subproblem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateStats {
    /// `sum_i A(eta_i) x_ij^2`
    pub quad: f64,
    /// `2 sum_i A(eta_i) x_ij r_ij - sum_i (y_i - 1/2) x_ij`
    pub linear: f64,
}

/// Objective of the `(mu_j, sigma_j)` block, up to constants.
#[derive(Debug, Clone, Copy)]
struct BlockObjective {
    stats: CoordinateStats,
    slab: Slab,
}

impl BlockObjective {
    /// Value and gradient with respect to `(mu, log sigma)`.
    fn eval(&self, mu: f64, sigma: f64) -> (f64, [f64; 2]) {
        let CoordinateStats { quad, linear } = self.stats;
        let data_val = (mu * mu + sigma * sigma) * quad + mu * linear;
        let (slab_val, slab_dmu, slab_dsigma) = match self.slab {
            Slab::Laplace { nu, lambda } => {
                let d = mu - nu;
                let z = d / sigma;
                (
                    folded_unchecked(d, sigma, lambda) - sigma.ln(),
                    lambda * erf(z * std::f64::consts::FRAC_1_SQRT_2),
                    lambda * SQRT_2_OVER_PI * (-0.5 * z * z).exp() - 1.0 / sigma,
                )
            }
            Slab::Gaussian { sigma0 } => {
                let v0 = sigma0 * sigma0;
                (
                    (mu * mu + sigma * sigma) / (2.0 * v0) - sigma.ln(),
                    mu / v0,
                    sigma / v0 - 1.0 / sigma,
                )
            }
        };
        let dmu = slab_dmu + 2.0 * mu * quad + linear;
        let dsigma = slab_dsigma + 2.0 * sigma * quad;
        (slab_val + data_val, [dmu, dsigma * sigma])
    }

    fn value(&self, mu: f64, sigma: f64) -> f64 {
        self.eval(mu, sigma).0
    }
}

/// Outcome of one `(mu_j, sigma_j)` block solve.
struct BlockSolution {
    mu: f64,
    sigma: f64,
    warned: bool,
}

fn solve_block(obj: &BlockObjective, mu0: f64, sigma0: f64, opt: &OptSettings) -> BlockSolution {
    if let Slab::Gaussian { sigma0: s0 } = obj.slab {
        let precision = 2.0 * obj.stats.quad + 1.0 / (s0 * s0);
        return BlockSolution {
            mu: -obj.stats.linear / precision,
            sigma: precision.recip().sqrt(),
            warned: false,
        };
    }
    let f0 = obj.value(mu0, sigma0);
    let run = |x0: [f64; 2]| {
        minimize(
            |x, g| {
                let (v, grad) = obj.eval(x[0], x[1].exp());
                g.copy_from_slice(&grad);
                v
            },
            &x0,
            opt,
        )
    };
    let mut best = (mu0, sigma0, f0);
    let mut warned = false;
    match run([mu0, sigma0.ln()]) {
        Ok(m) => {
            let mut m = m;
            if m.status != Status::Converged {
                // restart once with fresh curvature memory
                if let Ok(again) = run([m.x[0], m.x[1]]) {
                    if again.value <= m.value {
                        m = again;
                    }
                }
                warned = m.status != Status::Converged;
            }
            let sigma = m.x[1].exp();
            if m.value <= f0 && sigma > 0.0 && sigma.is_finite() {
                best = (m.x[0], sigma, m.value);
            }
        }
        Err(_) => warned = true,
    }
    BlockSolution {
        mu: best.0,
        sigma: best.1,
        warned,
    }
}

/// Log-odds `R` with `gamma_j = 1 / (1 + e^R)`.
fn gamma_log_odds(stats: &CoordinateStats, mu: f64, sigma: f64, prior: &PriorSpec) -> f64 {
    prior.log_odds_exclusion()
        + slab_kl_unchecked(mu, sigma, &prior.slab)
        + (mu * mu + sigma * sigma) * stats.quad
        + mu * stats.linear
}

fn gamma_from_log_odds(r: f64) -> f64 {
    sigmoid(-r.clamp(-700.0, 700.0))
}

/// Working quantities held fixed during a sweep.
struct Sweep<'a> {
    data: &'a Dataset,
    /// `A(eta_i)`
    curvature: Vec<f64>,
    /// `sum_i (y_i - 1/2) x_ij`
    centered: &'a [f64],
}

impl Sweep<'_> {
    fn stats(&self, j: usize, m: &[f64], gamma_j: f64, mu_j: f64) -> CoordinateStats {
        let col = self.data.column(j);
        let (mut quad, mut cross) = (0.0, 0.0);
        for ((&x, &a), &mi) in col.iter().zip(&self.curvature).zip(m) {
            let ax = a * x;
            quad += ax * x;
            cross += ax * mi;
        }
        CoordinateStats {
            quad,
            linear: 2.0 * (cross - gamma_j * mu_j * quad) - self.centered[j],
        }
    }
}

fn centered_responses(data: &Dataset) -> Vec<f64> {
    let yc: Vec<f64> = data.labels().iter().map(|&y| f64::from(y) - 0.5).collect();
    (0..data.p())
        .map(|j| data.column(j).iter().zip(&yc).map(|(x, y)| x * y).sum())
        .collect()
}

/// `m_i = sum_k gamma_k x_ik mu_k = E_Q[x_i^T theta]`
fn mean_predictor(data: &Dataset, state: &VariationalState) -> Vec<f64> {
    let w: Vec<f64> = state.gamma.iter().zip(&state.mu).map(|(g, m)| g * m).collect();
    data.linear_predictor(&w).expect("state dimension checked")
}

fn check_coordinate(data: &Dataset, j: usize) -> Result<()> {
    if j < data.p() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "coordinate {j} out of range (p = {})",
            data.p()
        )))
    }
}

fn stats_from_state(j: usize, data: &Dataset, state: &VariationalState) -> CoordinateStats {
    let curvature: Vec<f64> = state.eta.0.iter().map(|&e| jj_coefficient(e)).collect();
    let centered = centered_responses(data);
    let m = mean_predictor(data, state);
    let sweep = Sweep {
        data,
        curvature,
        centered: &centered,
    };
    sweep.stats(j, &m, state.gamma[j], state.mu[j])
}

/// Per-observation `(Var_Q(x_i^T theta), E_Q x_i^T theta)`.
fn predictor_moments(data: &Dataset, state: &VariationalState) -> (Vec<f64>, Vec<f64>) {
    let n = data.n();
    let mut var = vec![0.0; n];
    let mut mean = vec![0.0; n];
    for j in 0..data.p() {
        let (g, m, s) = (state.gamma[j], state.mu[j], state.sigma[j]);
        if g == 0.0 {
            continue;
        }
        let gm = g * m;
        let var_j = g * (m * m + s * s) - gm * gm;
        for ((v, me), &x) in var.iter_mut().zip(mean.iter_mut()).zip(data.column(j)) {
            *v += var_j * x * x;
            *me += gm * x;
        }
    }
    (var, mean)
}

fn eta_unchecked(data: &Dataset, state: &VariationalState) -> BoundParams {
    let (var, mean) = predictor_moments(data, state);
    BoundParams(
        var.iter()
            .zip(&mean)
            .map(|(v, m)| (v + m * m).max(0.0).sqrt())
            .collect(),
    )
}

/// `eta_i = sqrt(E_Q (x_i^T theta)^2)`, the exact maximizer of `E_Q f(theta, eta)`.
pub fn update_eta(data: &Dataset, state: &VariationalState) -> Result<BoundParams> {
    check_len("mu", data.p(), state.mu.len())?;
    check_len("sigma", data.p(), state.sigma.len())?;
    check_len("gamma", data.p(), state.gamma.len())?;
    Ok(eta_unchecked(data, state))
}

/// Scalars `(S_j, b_j)` of the coordinate-`j` subproblem for the given state.
pub fn coordinate_stats(j: usize, data: &Dataset, state: &VariationalState) -> Result<CoordinateStats> {
    state.validate(data)?;
    check_coordinate(data, j)?;
    Ok(stats_from_state(j, data, state))
}

/// Objective of the `(mu_j, sigma_j)` block with all other parameters fixed,
/// and its gradient with respect to `(mu_j, log sigma_j)`.
///
/// For a Laplace slab this is
/// `lambda E|theta_j - nu| - log sigma_j + (mu_j^2 + sigma_j^2) S_j + mu_j b_j`;
/// a Gaussian slab replaces the folded moment by `(mu_j^2 + sigma_j^2) / (2 sigma0^2)`.
/// The prior is not validated so that degenerate slabs (`lambda = 0`) can be probed.
pub fn mu_sigma_objective(
    j: usize,
    mu_j: f64,
    sigma_j: f64,
    data: &Dataset,
    state: &VariationalState,
    prior: &PriorSpec,
) -> Result<(f64, [f64; 2])> {
    if !(sigma_j > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma_j must be positive, got {sigma_j}"
        )));
    }
    let stats = coordinate_stats(j, data, state)?;
    Ok(BlockObjective {
        stats,
        slab: prior.slab,
    }
    .eval(mu_j, sigma_j))
}

/// Minimizes [`mu_sigma_objective`] starting from the state's current values.
///
/// Never returns a point with a larger objective than the incoming one.
pub fn update_mu_sigma(
    j: usize,
    data: &Dataset,
    state: &VariationalState,
    prior: &PriorSpec,
    opt: &OptSettings,
) -> Result<(f64, f64)> {
    let stats = coordinate_stats(j, data, state)?;
    let obj = BlockObjective {
        stats,
        slab: prior.slab,
    };
    let sol = if stats.quad == 0.0 {
        let (mu, sigma) = prior.slab.kl_minimizer();
        BlockSolution {
            mu,
            sigma,
            warned: false,
        }
    } else {
        solve_block(&obj, state.mu[j], state.sigma[j], opt)
    };
    Ok((sol.mu, sol.sigma))
}

/// Closed-form minimizer over `gamma_j` of the surrogate, using the state's
/// current `(mu_j, sigma_j)`.
pub fn update_gamma(j: usize, data: &Dataset, state: &VariationalState, prior: &PriorSpec) -> Result<f64> {
    let stats = coordinate_stats(j, data, state)?;
    Ok(gamma_from_log_odds(gamma_log_odds(
        &stats,
        state.mu[j],
        state.sigma[j],
        prior,
    )))
}

fn xlogy_ratio(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).ln()
    }
}

/// `KL(Q || prior) - E_Q f(theta, eta)`, with the prior taken coordinatewise as
/// `(1 - wbar) delta_0 + wbar slab`, `wbar = a0 / (a0 + b0)`.
pub fn surrogate_objective(data: &Dataset, state: &VariationalState, prior: &PriorSpec) -> Result<f64> {
    state.validate(data)?;
    Ok(surrogate_unchecked(data, state, prior))
}

fn surrogate_unchecked(data: &Dataset, state: &VariationalState, prior: &PriorSpec) -> f64 {
    let wbar = prior.mean_weight();
    let kl: f64 = (0..state.p())
        .map(|j| {
            let g = state.gamma[j];
            let slab = if g > 0.0 {
                g * slab_kl_unchecked(state.mu[j], state.sigma[j], &prior.slab)
            } else {
                0.0
            };
            slab + xlogy_ratio(g, wbar) + xlogy_ratio(1.0 - g, 1.0 - wbar)
        })
        .sum();

    let (var, mean) = predictor_moments(data, state);
    let expected_bound: f64 = (0..data.n())
        .map(|i| {
            let e = state.eta.0[i];
            let y = f64::from(data.labels()[i]);
            let sq = var[i] + mean[i] * mean[i];
            log_sigmoid(e) - 0.5 * e + (y - 0.5) * mean[i] - jj_coefficient(e) * (sq - e * e)
        })
        .sum();
    kl - expected_bound
}

fn initial_state(data: &Dataset, config: &FitConfig) -> Result<VariationalState> {
    match config.init {
        Init::Default => Ok(VariationalState::initial(data, &config.prior)),
        Init::RidgeWarmStart { steps, penalty } => {
            // 1/L with L = ||X||_F^2 / 4 + penalty bounds the Hessian of the penalized loss
            let frob: f64 = (0..data.p())
                .map(|j| data.column(j).iter().map(|x| x * x).sum::<f64>())
                .sum();
            let step = 1.0 / (0.25 * frob + penalty);
            let mut theta = Coefficients::zeros(data.p());
            for _ in 0..steps {
                let g = score(data, &theta)?;
                for (t, gj) in theta.0.iter_mut().zip(g) {
                    *t += step * (gj - penalty * *t);
                }
            }
            Ok(VariationalState::from_means(data, &config.prior, theta.0))
        }
    }
}

/// Runs coordinate ascent until both convergence criteria hold or `max_iter` sweeps.
pub fn fit(data: &Dataset, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let start = Instant::now();
    let state = initial_state(data, config)?;
    run(data, config, state, start)
}

/// [`fit`] started from a given state instead of `config.init`; `eta` is
/// refreshed before the first sweep.
pub fn fit_from_state(data: &Dataset, config: &FitConfig, initial: VariationalState) -> Result<FitResult> {
    config.validate()?;
    initial.validate(data)?;
    run(data, config, initial, Instant::now())
}

fn run(data: &Dataset, config: &FitConfig, mut state: VariationalState, start: Instant) -> Result<FitResult> {
    let prior = &config.prior;
    let p = data.p();
    let centered = centered_responses(data);
    let zero_column: Vec<bool> = (0..p).map(|j| data.column(j).iter().all(|&x| x == 0.0)).collect();

    state.eta = eta_unchecked(data, &state);
    let mut prev = surrogate_unchecked(data, &state, prior);
    if !prev.is_finite() {
        return Err(Error::NonFinite {
            iteration: 0,
            state: Box::new(state),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..p).collect();
    let mut trace = Vec::new();
    let mut warnings = 0;
    let mut converged = false;

    for iteration in 1..=config.max_iter {
        state.eta = eta_unchecked(data, &state);
        let sweep = Sweep {
            data,
            curvature: state.eta.0.iter().map(|&e| jj_coefficient(e)).collect(),
            centered: &centered,
        };
        let gamma_before = state.gamma.clone();

        let update = |j: usize, m: &[f64], st: &VariationalState| -> (f64, f64, f64, bool) {
            let stats = sweep.stats(j, m, st.gamma[j], st.mu[j]);
            let sol = if zero_column[j] {
                let (mu, sigma) = prior.slab.kl_minimizer();
                BlockSolution {
                    mu,
                    sigma,
                    warned: false,
                }
            } else {
                let obj = BlockObjective {
                    stats,
                    slab: prior.slab,
                };
                solve_block(&obj, st.mu[j], st.sigma[j], &config.optimizer)
            };
            let gamma = gamma_from_log_odds(gamma_log_odds(&stats, sol.mu, sol.sigma, prior));
            (sol.mu, sol.sigma, gamma, sol.warned)
        };

        match config.update_order {
            UpdateOrder::Sequential => {
                if config.shuffle {
                    order.shuffle(&mut rng);
                }
                let mut m = mean_predictor(data, &state);
                for &j in &order {
                    let (mu, sigma, gamma, warned) = update(j, &m, &state);
                    warnings += usize::from(warned);
                    let delta = gamma * mu - state.gamma[j] * state.mu[j];
                    if delta != 0.0 {
                        for (mi, &x) in m.iter_mut().zip(data.column(j)) {
                            *mi += delta * x;
                        }
                    }
                    state.mu[j] = mu;
                    state.sigma[j] = sigma;
                    state.gamma[j] = gamma;
                }
            }
            UpdateOrder::ParallelSnapshot => {
                let m = mean_predictor(data, &state);
                let snapshot = &state;
                let updates: Vec<(f64, f64, f64, bool)> =
                    (0..p).into_par_iter().map(|j| update(j, &m, snapshot)).collect();
                for (j, (mu, sigma, gamma, warned)) in updates.into_iter().enumerate() {
                    warnings += usize::from(warned);
                    state.mu[j] = mu;
                    state.sigma[j] = sigma;
                    state.gamma[j] = gamma;
                }
            }
        }

        let objective = surrogate_unchecked(data, &state, prior);
        if !objective.is_finite() {
            return Err(Error::NonFinite {
                iteration,
                state: Box::new(state),
            });
        }
        trace.push(objective);
        let max_dgamma = state
            .gamma
            .iter()
            .zip(&gamma_before)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        let rel_change = (objective - prev).abs() / prev.abs().max(f64::MIN_POSITIVE);
        prev = objective;
        if max_dgamma < config.tol && rel_change < config.tol {
            converged = true;
            break;
        }
    }

    Ok(FitResult {
        iterations: trace.len(),
        objective_trace: trace,
        converged,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        optimizer_warnings: warnings,
        state,
    })
}
