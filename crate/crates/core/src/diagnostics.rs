//! Design-matrix constants: column scale, coherence, restricted eigenvalue
//! type constants and the sufficient design condition built from them.
//!
//! Matrices are `nalgebra::DMatrix<f64>` with observations in rows. `‖X‖`
//! always means the largest column ℓ2 norm.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::special::sigmoid;

/// Whether a constant is exact or a one-sided bound from sampled subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    LowerBound,
    UpperBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constant {
    pub value: f64,
    pub provenance: Provenance,
    pub subsets_evaluated: u64,
}

/// How subsets are visited when computing the restricted constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubsetSearch {
    /// Largest number of subsets enumerated exhaustively.
    pub budget: u64,
    /// Fall back to random subsets above the budget instead of failing.
    pub allow_sampling: bool,
    pub samples: usize,
    pub seed: u64,
}

impl Default for SubsetSearch {
    fn default() -> Self {
        SubsetSearch {
            budget: 200_000,
            allow_sampling: true,
            samples: 50_000,
            seed: 0,
        }
    }
}

/// `W_ii = psi(x_i^T theta0) (1 - psi(x_i^T theta0))`
pub fn w_matrix(x: &DMatrix<f64>, theta0: &[f64]) -> Result<Vec<f64>> {
    check_len("theta0", x.ncols(), theta0.len())?;
    let t = x * nalgebra::DVector::from_column_slice(theta0);
    Ok(t.iter()
        .map(|&v| {
            let s = sigmoid(v);
            s * (1.0 - s)
        })
        .collect())
}

fn column_norms(x: &DMatrix<f64>) -> Vec<f64> {
    x.column_iter().map(|c| c.norm()).collect()
}

/// Largest column ℓ2 norm.
pub fn x_norm(x: &DMatrix<f64>) -> f64 {
    column_norms(x).into_iter().fold(0.0, f64::max)
}

/// Largest absolute entry.
pub fn x_inf(x: &DMatrix<f64>) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Largest absolute correlation between two distinct columns.
pub fn mutual_coherence(x: &DMatrix<f64>) -> Result<f64> {
    let norms = column_norms(x);
    if let Some(j) = norms.iter().position(|&v| v == 0.0) {
        return Err(Error::ZeroColumn(j));
    }
    let p = x.ncols();
    let mut mc: f64 = 0.0;
    for a in 0..p {
        for b in a + 1..p {
            let c = x.column(a).dot(&x.column(b)).abs() / (norms[a] * norms[b]);
            mc = mc.max(c);
        }
    }
    // rounding can push a duplicated column a hair above one
    Ok(mc.min(1.0))
}

/// `C(p, s)`, saturating at `u128::MAX`.
pub fn binomial(p: usize, s: usize) -> u128 {
    if s > p {
        return 0;
    }
    let k = s.min(p - s);
    let mut c: u128 = 1;
    for i in 0..k {
        c = match c.checked_mul((p - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    c
}

/// Lexicographic successor of a `k`-subset of `0..p`, in place.
fn next_combination(idx: &mut [usize], p: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < p - k + i {
            idx[i] += 1;
            for t in i + 1..k {
                idx[t] = idx[t - 1] + 1;
            }
            return true;
        }
    }
    false
}

enum Extreme {
    Max,
    Min,
}

/// `X_S^T diag(w) X_S`
fn gram(x: &DMatrix<f64>, w: Option<&[f64]>, subset: &[usize]) -> DMatrix<f64> {
    let k = subset.len();
    let mut g = DMatrix::zeros(k, k);
    for a in 0..k {
        let ca = x.column(subset[a]);
        for b in a..k {
            let cb = x.column(subset[b]);
            let v = match w {
                Some(w) => ca.iter().zip(cb.iter()).zip(w).map(|((u, v), w)| u * v * w).sum(),
                None => ca.dot(&cb),
            };
            g[(a, b)] = v;
            g[(b, a)] = v;
        }
    }
    g
}

fn extreme_eigenvalue(g: DMatrix<f64>, which: &Extreme) -> f64 {
    if g.nrows() == 1 {
        return g[(0, 0)];
    }
    let ev = SymmetricEigen::new(g).eigenvalues;
    match which {
        Extreme::Max => ev.max(),
        Extreme::Min => ev.min(),
    }
}

fn restricted_constant(
    x: &DMatrix<f64>,
    w: Option<&[f64]>,
    s: usize,
    which: Extreme,
    search: &SubsetSearch,
) -> Result<Constant> {
    let p = x.ncols();
    if s == 0 || s > p {
        return Err(Error::InvalidParameter(format!(
            "subset size must lie in 1..={p}, got {s}"
        )));
    }
    let scale = x_norm(x).powi(2);
    if scale == 0.0 {
        return Err(Error::InvalidData("design matrix is identically zero".into()));
    }
    // Eigenvalue interlacing: the max eigenvalue grows and the min shrinks
    // when a subset is enlarged, so only subsets of size exactly s matter.
    let count = binomial(p, s);
    let subsets: Vec<Vec<usize>>;
    let provenance;
    if count <= search.budget as u128 {
        let mut all = Vec::with_capacity(count as usize);
        let mut idx: Vec<usize> = (0..s).collect();
        loop {
            all.push(idx.clone());
            if !next_combination(&mut idx, p) {
                break;
            }
        }
        subsets = all;
        provenance = Provenance::Exact;
    } else if search.allow_sampling {
        if search.samples == 0 {
            return Err(Error::InvalidParameter("sampling needs at least one subset".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
        subsets = (0..search.samples)
            .map(|_| {
                let mut v = index::sample(&mut rng, p, s).into_vec();
                v.sort_unstable();
                v
            })
            .collect();
        provenance = match which {
            Extreme::Max => Provenance::LowerBound,
            Extreme::Min => Provenance::UpperBound,
        };
    } else {
        return Err(Error::EnumerationBudget {
            subsets: count,
            budget: search.budget as u128,
        });
    }
    let values = subsets
        .par_iter()
        .map(|sub| extreme_eigenvalue(gram(x, w, sub), &which));
    let best = match which {
        Extreme::Max => values.reduce(|| f64::NEG_INFINITY, f64::max),
        Extreme::Min => values.reduce(|| f64::INFINITY, f64::min),
    };
    Ok(Constant {
        value: best / scale,
        provenance,
        subsets_evaluated: subsets.len() as u64,
    })
}

/// `max_{|S| <= s} lambda_max(X_S^T X_S) / ‖X‖²`
pub fn kappa_bar(x: &DMatrix<f64>, s: usize, search: &SubsetSearch) -> Result<Constant> {
    restricted_constant(x, None, s, Extreme::Max, search)
}

/// `min_{|S| <= s} lambda_min(X_S^T W X_S) / ‖X‖²`
pub fn kappa_s(x: &DMatrix<f64>, w: &[f64], s: usize, search: &SubsetSearch) -> Result<Constant> {
    check_len("weights", x.nrows(), w.len())?;
    restricted_constant(x, Some(w), s, Extreme::Min, search)
}

/// Rayleigh-type ratio `‖W^{1/2} X theta‖² / (‖X‖² ‖theta‖²)`.
pub fn cone_ratio(x: &DMatrix<f64>, w: &[f64], theta: &[f64]) -> Result<f64> {
    check_len("weights", x.nrows(), w.len())?;
    check_len("theta", x.ncols(), theta.len())?;
    let t = x * nalgebra::DVector::from_column_slice(theta);
    let num: f64 = t.iter().zip(w).map(|(v, w)| w * v * v).sum();
    let den = x_norm(x).powi(2) * theta.iter().map(|v| v * v).sum::<f64>();
    Ok(num / den)
}

/// Whether `theta` lies in the cone `‖theta_{S^c}‖₁ <= 7 ‖theta_S‖₁`.
pub fn in_cone(theta: &[f64], support: &[usize]) -> bool {
    let on: f64 = support.iter().map(|&j| theta[j].abs()).sum();
    let total: f64 = theta.iter().map(|v| v.abs()).sum();
    total - on <= 7.0 * on * (1.0 + 1e-12)
}

const CONE_CHUNK: usize = 4096;
const CONE_EIGEN_STARTS: usize = 8;

/// Upper bound on the compatibility constant: the smallest [`cone_ratio`]
/// over `samples` random points of the cone around `support`, improved by a
/// monotone local descent started from the best sample and from the eight
/// lowest eigenvectors of `X^T W X` pulled into the cone. Every point visited
/// lies in the cone, so the result never undercuts the true infimum.
pub fn kappa_cone_estimate(x: &DMatrix<f64>, w: &[f64], support: &[usize], samples: usize, seed: u64) -> Result<f64> {
    let p = x.ncols();
    check_len("weights", x.nrows(), w.len())?;
    if support.is_empty() {
        return Err(Error::InvalidParameter("cone support must be nonempty".into()));
    }
    if let Some(&j) = support.iter().find(|&&j| j >= p) {
        return Err(Error::InvalidParameter(format!("support index {j} out of range")));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be at least 1".into()));
    }
    let scale = x_norm(x).powi(2);
    if scale == 0.0 {
        return Err(Error::InvalidData("design matrix is identically zero".into()));
    }
    let mut on = vec![false; p];
    for &j in support {
        on[j] = true;
    }
    let off: Vec<usize> = (0..p).filter(|&j| !on[j]).collect();
    let chunks = samples.div_ceil(CONE_CHUNK);
    let (best, best_theta) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let mut theta = vec![0.0; p];
            let mut best = (f64::INFINITY, Vec::new());
            for _ in 0..CONE_CHUNK.min(samples - c * CONE_CHUNK) {
                sample_cone_point(&mut rng, support, &off, &mut theta);
                let r = cone_ratio(x, w, &theta).expect("shapes checked above");
                if r < best.0 {
                    best = (r, theta.clone());
                }
            }
            best
        })
        .reduce(|| (f64::INFINITY, Vec::new()), |a, b| if b.0 < a.0 { b } else { a });

    let mut a = DMatrix::zeros(p, p);
    for j in 0..p {
        let xj = x.column(j);
        for k in j..p {
            let v: f64 = xj
                .iter()
                .zip(x.column(k).iter())
                .zip(w)
                .map(|((u, v), w)| u * v * w)
                .sum::<f64>()
                / scale;
            a[(j, k)] = v;
            a[(k, j)] = v;
        }
    }
    let mut starts = vec![best_theta];
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    starts.extend(
        order
            .iter()
            .take(CONE_EIGEN_STARTS)
            .map(|&i| eig.eigenvectors.column(i).iter().cloned().collect::<Vec<f64>>()),
    );
    let polished = starts
        .into_par_iter()
        .filter_map(|t| retract(t, &on))
        .map(|t| descend(&a, &on, t))
        .reduce(|| f64::INFINITY, f64::min);
    Ok(best.min(polished))
}

/// Shrinks the off-support part onto the cone boundary when it lies outside.
fn retract(mut theta: Vec<f64>, on: &[bool]) -> Option<Vec<f64>> {
    let (mut l_on, mut l_off) = (0.0, 0.0);
    for (t, &o) in theta.iter().zip(on) {
        if o {
            l_on += t.abs();
        } else {
            l_off += t.abs();
        }
    }
    if !(l_on > 0.0) {
        return None;
    }
    if l_off > 7.0 * l_on {
        let f = 7.0 * l_on / l_off;
        for (t, &o) in theta.iter_mut().zip(on) {
            if !o {
                *t *= f;
            }
        }
    }
    Some(theta)
}

fn rayleigh(a: &DMatrix<f64>, theta: &[f64]) -> (f64, Vec<f64>) {
    let t = nalgebra::DVector::from_column_slice(theta);
    let at = a * &t;
    let nn = t.norm_squared();
    let r = t.dot(&at) / nn;
    let g = (at - &t * r) * (2.0 / nn);
    (r, g.iter().cloned().collect())
}

/// Backtracking descent on the Rayleigh quotient, retracting into the cone
/// after each step and accepting only improvements.
fn descend(a: &DMatrix<f64>, on: &[bool], mut theta: Vec<f64>) -> f64 {
    let (mut r, mut g) = rayleigh(a, &theta);
    let mut step = 1.0;
    for _ in 0..2000 {
        if step < 1e-14 {
            break;
        }
        let cand: Vec<f64> = theta.iter().zip(&g).map(|(t, g)| t - step * g).collect();
        match retract(cand, on) {
            Some(c) => {
                let (rc, gc) = rayleigh(a, &c);
                if rc < r {
                    // rescale to unit length to keep the step size meaningful
                    let n = c.iter().map(|v| v * v).sum::<f64>().sqrt();
                    theta = c.iter().map(|v| v / n).collect();
                    r = rc;
                    g = gc.iter().map(|v| v * n).collect();
                    step *= 1.5;
                } else {
                    step *= 0.5;
                }
            }
            None => step *= 0.5,
        }
    }
    r
}

fn sample_cone_point(rng: &mut ChaCha8Rng, support: &[usize], off: &[usize], theta: &mut [f64]) {
    theta.iter_mut().for_each(|t| *t = 0.0);
    let mut l1_on = 0.0;
    for &j in support {
        let v: f64 = rng.sample(StandardNormal);
        theta[j] = v;
        l1_on += v.abs();
    }
    if off.is_empty() || rng.random::<f64>() < 0.1 {
        return;
    }
    // Off-support mass: dense Gaussian or concentrated on a few coordinates,
    // put on the cone boundary a quarter of the time.
    let k = if rng.random::<bool>() {
        off.len()
    } else {
        rng.random_range(1..=off.len().min(3))
    };
    let chosen = index::sample(rng, off.len(), k);
    let mut l1_off = 0.0;
    for i in chosen.iter() {
        let v: f64 = rng.sample(StandardNormal);
        theta[off[i]] = v;
        l1_off += v.abs();
    }
    let frac = if rng.random::<f64>() < 0.25 {
        1.0
    } else {
        rng.random::<f64>()
    };
    let scale = frac * 7.0 * l1_on / l1_off;
    for i in chosen.iter() {
        theta[off[i]] *= scale;
    }
}

/// Input constant for the design condition, with where it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionInput {
    pub value: f64,
    pub provenance: Provenance,
}

/// Both sides of `‖X‖ >= alpha max(50 (L+2) ‖X‖_∞ / kappa((L+1) s0), 64 / (3 kappa)) s0 sqrt(log p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignCondition {
    pub lhs: f64,
    pub rhs: f64,
    pub restricted_term: f64,
    pub cone_term: f64,
    /// `ceil((L + 1) s0)`, capped at p.
    pub restricted_size: usize,
    pub kappa_restricted: ConditionInput,
    pub kappa_cone: ConditionInput,
    pub rhs_infinite: bool,
    pub holds: bool,
}

/// Size at which the restricted constant enters the design condition.
pub fn restricted_size(s0: usize, l: f64, p: usize) -> usize {
    (((l + 1.0) * s0 as f64).ceil() as usize).clamp(1, p)
}

#[allow(clippy::too_many_arguments)]
pub fn check_design_condition(
    x_norm: f64,
    x_inf: f64,
    p: usize,
    s0: usize,
    alpha: f64,
    l: f64,
    kappa_restricted: ConditionInput,
    kappa_cone: ConditionInput,
) -> Result<DesignCondition> {
    if !(alpha > 0.0) || !(l >= 0.0) || s0 == 0 || p == 0 {
        return Err(Error::InvalidParameter(format!(
            "design condition needs alpha > 0, L >= 0, s0 >= 1 and p >= 1 (got {alpha}, {l}, {s0}, {p})"
        )));
    }
    let restricted_term = 50.0 * (l + 2.0) * x_inf / kappa_restricted.value;
    let cone_term = 64.0 / (3.0 * kappa_cone.value);
    let factor = alpha * s0 as f64 * (p as f64).ln().sqrt();
    let restricted_term = if kappa_restricted.value > 0.0 {
        restricted_term
    } else {
        f64::INFINITY
    };
    let cone_term = if kappa_cone.value > 0.0 {
        cone_term
    } else {
        f64::INFINITY
    };
    let max = restricted_term.max(cone_term);
    let rhs = if max.is_infinite() { f64::INFINITY } else { factor * max };
    Ok(DesignCondition {
        lhs: x_norm,
        rhs,
        restricted_term,
        cone_term,
        restricted_size: restricted_size(s0, l, p),
        kappa_restricted,
        kappa_cone,
        rhs_infinite: rhs.is_infinite(),
        holds: rhs.is_finite() && x_norm >= rhs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseOptions {
    /// Restricted constants are reported for s = 1..=s_max (capped at p).
    pub s_max: usize,
    /// True sparsity used by the cone constant and the design condition.
    pub s0: usize,
    /// Cone support; defaults to the first `s0` coordinates.
    pub support: Option<Vec<usize>>,
    pub alpha: f64,
    pub l: f64,
    pub cone_samples: usize,
    pub seed: u64,
    pub search: SubsetSearch,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        DiagnoseOptions {
            s_max: 3,
            s0: 1,
            support: None,
            alpha: 1.0,
            l: 1.0,
            cone_samples: 100_000,
            seed: 0,
            search: SubsetSearch::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeEstimate {
    pub value: f64,
    /// Always `upper_bound`: the infimum runs over an infinite cone.
    pub provenance: Provenance,
    pub support: Vec<usize>,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignDiagnostics {
    pub n: usize,
    pub p: usize,
    pub x_norm: f64,
    pub x_inf: f64,
    pub mc: f64,
    pub kappa_bar: BTreeMap<usize, Constant>,
    pub kappa_s: BTreeMap<usize, Constant>,
    pub kappa_cone_estimate: ConeEstimate,
    pub condition: DesignCondition,
}

/// Computes every diagnostic for `x`, with `W` built from `theta0` (zero when absent).
pub fn diagnose(x: &DMatrix<f64>, theta0: Option<&[f64]>, opts: &DiagnoseOptions) -> Result<DesignDiagnostics> {
    let (n, p) = x.shape();
    if n == 0 || p == 0 {
        return Err(Error::InvalidData(format!("empty design ({n} x {p})")));
    }
    let zeros = vec![0.0; p];
    let w = w_matrix(x, theta0.unwrap_or(&zeros))?;
    let mc = mutual_coherence(x)?;
    let s_max = opts.s_max.clamp(1, p);
    let mut kb = BTreeMap::new();
    let mut ks = BTreeMap::new();
    for s in 1..=s_max {
        kb.insert(s, kappa_bar(x, s, &opts.search)?);
        ks.insert(s, kappa_s(x, &w, s, &opts.search)?);
    }
    let rs = restricted_size(opts.s0.max(1), opts.l, p);
    let k_restricted = match ks.get(&rs) {
        Some(c) => *c,
        None => kappa_s(x, &w, rs, &opts.search)?,
    };
    let support = opts.support.clone().unwrap_or_else(|| (0..opts.s0.min(p)).collect());
    let cone = kappa_cone_estimate(x, &w, &support, opts.cone_samples, opts.seed)?;
    let condition = check_design_condition(
        x_norm(x),
        x_inf(x),
        p,
        opts.s0,
        opts.alpha,
        opts.l,
        ConditionInput {
            value: k_restricted.value,
            provenance: k_restricted.provenance,
        },
        ConditionInput {
            value: cone,
            provenance: Provenance::UpperBound,
        },
    )?;
    Ok(DesignDiagnostics {
        n,
        p,
        x_norm: x_norm(x),
        x_inf: x_inf(x),
        mc,
        kappa_bar: kb,
        kappa_s: ks,
        kappa_cone_estimate: ConeEstimate {
            value: cone,
            provenance: Provenance::UpperBound,
            support,
            samples: opts.cone_samples,
        },
        condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact() -> SubsetSearch {
        SubsetSearch {
            allow_sampling: false,
            ..SubsetSearch::default()
        }
    }

    #[test]
    fn w_at_zero_is_quarter() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -3.0, 0.5]);
        assert_eq!(w_matrix(&x, &[0.0, 0.0]).unwrap(), vec![0.25, 0.25]);
        let w = w_matrix(&x, &[400.0, 0.0]).unwrap();
        assert!(w.iter().all(|&v| v < 1e-100));
    }

    #[test]
    fn coherence_extremes() {
        let id = DMatrix::<f64>::identity(4, 4);
        assert_eq!(mutual_coherence(&id).unwrap(), 0.0);
        let dup = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, -1.0, -1.0]);
        assert!((mutual_coherence(&dup).unwrap() - 1.0).abs() < 1e-15);
        let zc = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        assert!(matches!(mutual_coherence(&zc), Err(Error::ZeroColumn(1))));
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(8, 3), 56);
        assert_eq!(binomial(500, 2), 124_750);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(binomial(10_000, 5_000), u128::MAX);
    }

    #[test]
    fn combinations_are_exhaustive() {
        let mut idx = vec![0, 1];
        let mut n = 1;
        while next_combination(&mut idx, 5) {
            n += 1;
        }
        assert_eq!(n, 10);
        assert_eq!(idx, vec![3, 4]);
    }

    #[test]
    fn kappa_bar_one_is_one() {
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.1, -0.3, 0.4, 3.0, 2.0, -1.0, 0.0]);
        let k = kappa_bar(&x, 1, &exact()).unwrap();
        assert!((k.value - 1.0).abs() < 1e-15);
        assert_eq!(k.provenance, Provenance::Exact);
    }

    #[test]
    fn orthogonal_design() {
        let x = DMatrix::<f64>::identity(4, 4) * 3.0;
        for s in 1..=4 {
            assert!((kappa_bar(&x, s, &exact()).unwrap().value - 1.0).abs() < 1e-14);
            let k = kappa_s(&x, &[0.25; 4], s, &exact()).unwrap();
            assert!((k.value - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn budget_guard() {
        let x = DMatrix::<f64>::identity(30, 30);
        let tight = SubsetSearch {
            budget: 100,
            allow_sampling: false,
            ..SubsetSearch::default()
        };
        assert!(matches!(
            kappa_bar(&x, 3, &tight),
            Err(Error::EnumerationBudget { subsets: 4060, .. })
        ));
        let sampled = SubsetSearch {
            budget: 100,
            samples: 500,
            ..SubsetSearch::default()
        };
        let k = kappa_bar(&x, 3, &sampled).unwrap();
        assert_eq!(k.provenance, Provenance::LowerBound);
        assert_eq!(k.subsets_evaluated, 500);
        assert_eq!(
            kappa_s(&x, &[0.25; 30], 3, &sampled).unwrap().provenance,
            Provenance::UpperBound
        );
    }

    #[test]
    fn cone_estimate_diagonal_case() {
        let x = DMatrix::<f64>::identity(4, 4);
        let est = kappa_cone_estimate(&x, &[0.25; 4], &[0], 1000, 1).unwrap();
        assert!((est - 0.25).abs() < 1e-14);
    }

    #[test]
    fn cone_estimate_below_explicit_point() {
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, 0.0, 0.2, 0.4, 1.0, -0.5, 0.3, 0.2]);
        let w = w_matrix(&x, &[0.5, -1.0, 0.0]).unwrap();
        let est = kappa_cone_estimate(&x, &w, &[0], 20_000, 7).unwrap();
        for theta in [[1.0, 0.0, 0.0], [1.0, -7.0, 0.0], [1.0, -3.5, 3.5], [-2.0, 1.0, 0.3]] {
            assert!(in_cone(&theta, &[0]));
            assert!(est <= cone_ratio(&x, &w, &theta).unwrap());
        }
    }

    #[test]
    fn condition_with_zero_kappa() {
        let zero = ConditionInput {
            value: 0.0,
            provenance: Provenance::Exact,
        };
        let c = check_design_condition(10.0, 1.0, 4, 1, 1.0, 1.0, zero, zero).unwrap();
        assert!(c.rhs_infinite);
        assert!(!c.holds);
    }

    #[test]
    fn restricted_size_rounds_up() {
        assert_eq!(restricted_size(2, 0.5, 100), 3);
        assert_eq!(restricted_size(2, 1.0, 100), 4);
        assert_eq!(restricted_size(5, 3.0, 10), 10);
    }
}
