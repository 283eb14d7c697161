//! Logistic regression primitives and the quadratic lower bound on the
//! log-likelihood used by the variational updates.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::special::{jj_coefficient, log_sigmoid, softplus};

pub use crate::special::sigmoid;

/// Design matrix and binary labels.
///
/// `X` is stored column-major: every coordinate update walks one column, so
/// column access is a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    p: usize,
    columns: Vec<f64>,
    labels: Vec<u8>,
}

impl Dataset {
    /// Builds a dataset from column-major storage (`columns[j * n + i] = x_ij`).
    pub fn from_column_major(n: usize, p: usize, columns: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::InvalidData(format!("empty design ({n} x {p})")));
        }
        check_len("design storage", n * p, columns.len())?;
        check_len("labels", n, labels.len())?;
        if let Some(pos) = columns.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite design entry at row {}, column {}",
                pos % n,
                pos / n
            )));
        }
        if let Some(i) = labels.iter().position(|&y| y > 1) {
            return Err(Error::InvalidData(format!(
                "label at row {i} is {}, expected 0 or 1",
                labels[i]
            )));
        }
        Ok(Dataset { n, p, columns, labels })
    }

    /// Builds a dataset from a slice of equally long rows.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        let mut columns = vec![0.0; n * p];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::InvalidData(format!(
                    "row {i} has {} entries, expected {p}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                columns[j * n + i] = v;
            }
        }
        Self::from_column_major(n, p, columns, labels)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j * self.n..(j + 1) * self.n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.columns[j * self.n + i]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.p).map(|j| self.get(i, j)).collect()
    }

    /// Returns a copy with every entry multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Dataset {
            columns: self.columns.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }

    /// `X theta`, accumulated column by column.
    pub fn linear_predictor(&self, theta: &[f64]) -> Result<Vec<f64>> {
        check_len("coefficients", self.p, theta.len())?;
        let mut out = vec![0.0; self.n];
        for (j, &t) in theta.iter().enumerate() {
            if t != 0.0 {
                for (o, &x) in out.iter_mut().zip(self.column(j)) {
                    *o += x * t;
                }
            }
        }
        Ok(out)
    }

    /// `X^T v`
    pub fn transpose_times(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("observation vector", self.n, v.len())?;
        Ok((0..self.p).map(|j| dot(self.column(j), v)).collect())
    }
}

/// Regression coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Coefficients(pub Vec<f64>);

impl Coefficients {
    pub fn zeros(p: usize) -> Self {
        Coefficients(vec![0.0; p])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Indices of the nonzero coefficients.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(j, _)| j)
            .collect()
    }
}

impl AsRef<[f64]> for Coefficients {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Per-observation parameters of the quadratic likelihood bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BoundParams(pub Vec<f64>);

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        match self.0.iter().position(|&e| !(e >= 0.0) || !e.is_finite()) {
            Some(i) => Err(Error::InvalidParameter(format!(
                "bound parameter eta[{i}] = {} must be finite and nonnegative",
                self.0[i]
            ))),
            None => Ok(()),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Bernoulli-logit log-likelihood `sum_i y_i t_i - log(1 + e^{t_i})`, `t = X theta`,
/// evaluated per observation as `log sigmoid(+-t_i)` to avoid cancellation.
pub fn log_likelihood(data: &Dataset, theta: &Coefficients) -> Result<f64> {
    let t = data.linear_predictor(&theta.0)?;
    Ok(t.iter()
        .zip(data.labels())
        .map(|(&t, &y)| if y == 1 { -softplus(-t) } else { -softplus(t) })
        .sum())
}

/// Gradient of the log-likelihood, `X^T (y - sigmoid(X theta))`.
pub fn score(data: &Dataset, theta: &Coefficients) -> Result<Vec<f64>> {
    let t = data.linear_predictor(&theta.0)?;
    let resid: Vec<f64> = t
        .iter()
        .zip(data.labels())
        .map(|(&t, &y)| f64::from(y) - sigmoid(t))
        .collect();
    data.transpose_times(&resid)
}

/// Quadratic lower bound `f(theta, eta)` on the log-likelihood.
///
/// Tight when `eta_i = |x_i^T theta|` for every observation.
pub fn jj_lower_bound(data: &Dataset, theta: &Coefficients, eta: &BoundParams) -> Result<f64> {
    check_len("bound parameters", data.n(), eta.0.len())?;
    eta.validate()?;
    let t = data.linear_predictor(&theta.0)?;
    Ok(t.iter()
        .zip(data.labels())
        .zip(&eta.0)
        .map(|((&t, &y), &e)| log_sigmoid(e) - 0.5 * e + (f64::from(y) - 0.5) * t - jj_coefficient(e) * (t * t - e * e))
        .sum())
}

/// `P(Y = 1 | x) = sigmoid(x^T theta)`
pub fn predict_proba(x: &[f64], theta: &Coefficients) -> Result<f64> {
    check_len("feature vector", theta.len(), x.len())?;
    Ok(sigmoid(dot(x, &theta.0)))
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy() -> Dataset {
        Dataset::from_rows(
            &[
                vec![0.3, -1.2, 0.5],
                vec![1.1, 0.4, -0.7],
                vec![-0.9, 0.8, 0.2],
                vec![0.05, -0.3, 1.4],
                vec![2.0, 0.1, -0.6],
            ],
            vec![1, 0, 0, 1, 1],
        )
        .unwrap()
    }

    #[test]
    fn zero_coefficients_give_minus_n_log_two() {
        let d = toy();
        let ll = log_likelihood(&d, &Coefficients::zeros(3)).unwrap();
        assert!((ll + 5.0 * std::f64::consts::LN_2).abs() < 1e-14);
    }

    #[test]
    fn saturating_likelihood_approaches_zero() {
        let d = Dataset::from_rows(&[vec![1.0]], vec![1]).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for &t in &[1.0, 5.0, 20.0, 50.0] {
            let ll = log_likelihood(&d, &Coefficients(vec![t])).unwrap();
            assert!(ll < 0.0 && ll > prev);
            prev = ll;
        }
        assert!(prev > -1e-20);
    }

    #[test]
    fn log_likelihood_matches_naive_double_loop() {
        let d = toy();
        let theta = Coefficients(vec![0.7, -1.3, 0.25]);
        let mut naive = 0.0;
        for i in 0..5 {
            let mut t = 0.0;
            for j in 0..3 {
                t += d.row(i)[j] * theta.0[j];
            }
            let y = f64::from(d.labels()[i]);
            naive += y * t - (1.0 + t.exp()).ln();
        }
        assert!((log_likelihood(&d, &theta).unwrap() - naive).abs() < 1e-12);
    }

    #[test]
    fn score_at_zero_is_centered_labels() {
        let d = toy();
        let s = score(&d, &Coefficients::zeros(3)).unwrap();
        for j in 0..3 {
            let expect: f64 = (0..5).map(|i| d.get(i, j) * (f64::from(d.labels()[i]) - 0.5)).sum();
            assert!((s[j] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn score_vanishes_at_exact_fit() {
        // One observation per label with probabilities matching sigmoid exactly is impossible
        // with binary y, so use a symmetric pair: x and -x with opposite labels at theta = 0.
        let d = Dataset::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]], vec![1, 0]).unwrap();
        let s = score(&d, &Coefficients::zeros(2)).unwrap();
        assert!(s.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn score_matches_central_differences() {
        let d = toy();
        let theta = Coefficients(vec![0.4, 1.1, -0.8]);
        let s = score(&d, &theta).unwrap();
        let h = 1e-5;
        for j in 0..3 {
            let mut up = theta.clone();
            let mut down = theta.clone();
            up.0[j] += h;
            down.0[j] -= h;
            let fd = (log_likelihood(&d, &up).unwrap() - log_likelihood(&d, &down).unwrap()) / (2.0 * h);
            assert!((fd - s[j]).abs() / s[j].abs().max(1e-8) < 1e-6, "coordinate {j}");
        }
    }

    #[test]
    fn bound_is_tight_at_absolute_linear_predictor() {
        let d = toy();
        let theta = Coefficients(vec![1.5, -0.2, 0.9]);
        let eta = BoundParams(d.linear_predictor(&theta.0).unwrap().iter().map(|t| t.abs()).collect());
        let lb = jj_lower_bound(&d, &theta, &eta).unwrap();
        let ll = log_likelihood(&d, &theta).unwrap();
        assert!((lb - ll).abs() < 1e-10);
    }

    #[test]
    fn bound_at_zero_uses_limit_coefficient() {
        let d = toy();
        let lb = jj_lower_bound(&d, &Coefficients::zeros(3), &BoundParams(vec![0.0; 5])).unwrap();
        assert!((lb + 5.0 * std::f64::consts::LN_2).abs() < 1e-14);
    }

    #[test]
    fn bound_rejects_negative_eta() {
        let d = toy();
        let err = jj_lower_bound(
            &d,
            &Coefficients::zeros(3),
            &BoundParams(vec![0.0, 0.0, -1.0, 0.0, 0.0]),
        );
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn dimension_errors() {
        let d = toy();
        assert!(matches!(
            log_likelihood(&d, &Coefficients::zeros(2)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(predict_proba(&[1.0], &Coefficients::zeros(3)).is_err());
        assert!(Dataset::from_rows(&[vec![1.0]], vec![2]).is_err());
        assert!(Dataset::from_rows(&[vec![f64::NAN]], vec![1]).is_err());
    }

    #[test]
    fn predict_proba_cases() {
        assert_eq!(predict_proba(&[1.0, -2.0], &Coefficients::zeros(2)).unwrap(), 0.5);
        assert_eq!(
            predict_proba(&[1.0, 0.0, 0.0], &Coefficients(vec![2.0, 0.0, 0.0])).unwrap(),
            sigmoid(2.0)
        );
        let x = [0.3, -0.4, 1.7];
        let th = Coefficients(vec![-1.0, 0.5, 0.25]);
        let naive = 1.0 / (1.0 + (-(-0.3 - 0.4 * 0.5 + 1.7 * 0.25f64)).exp());
        assert!((predict_proba(&x, &th).unwrap() - naive).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn bound_never_exceeds_likelihood(
            rows in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 3), 1..8),
            theta in proptest::collection::vec(-4.0f64..4.0, 3),
            eta_seed in proptest::collection::vec(0.0f64..20.0, 8),
            labels in proptest::collection::vec(0u8..2, 8),
        ) {
            let n = rows.len();
            let d = Dataset::from_rows(&rows, labels[..n].to_vec()).unwrap();
            let theta = Coefficients(theta);
            let ll = log_likelihood(&d, &theta).unwrap();
            let lb = jj_lower_bound(&d, &theta, &BoundParams(eta_seed[..n].to_vec())).unwrap();
            prop_assert!(lb <= ll + 1e-9 * ll.abs().max(1.0));
        }
    }
}
