//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! Sized for the small smooth subproblems of the coordinate updates, but works
//! in any dimension.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptSettings {
    /// Stop once the sup-norm of the gradient is at most this.
    pub grad_tol: f64,
    pub max_evals: usize,
    /// Number of curvature pairs kept.
    pub history: usize,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
}

impl Default for OptSettings {
    fn default() -> Self {
        OptSettings {
            grad_tol: 1e-7,
            max_evals: 200,
            history: 6,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
        }
    }
}

impl OptSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.grad_tol > 0.0
            && self.max_evals >= 1
            && self.history >= 1
            && 0.0 < self.wolfe_c1
            && self.wolfe_c1 < self.wolfe_c2
            && self.wolfe_c2 < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid optimizer settings {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxEvalsReached,
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad: Vec<f64>,
    pub status: Status,
    pub evals: usize,
}

struct Point {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

struct Evaluator<F> {
    f: F,
    evals: usize,
    max_evals: usize,
    best: Option<Point>,
}

impl<F: FnMut(&[f64], &mut [f64]) -> f64> Evaluator<F> {
    fn exhausted(&self) -> bool {
        self.evals >= self.max_evals
    }

    fn eval(&mut self, x: Vec<f64>) -> Point {
        let mut g = vec![0.0; x.len()];
        let f = (self.f)(&x, &mut g);
        self.evals += 1;
        let finite = f.is_finite() && g.iter().all(|v| v.is_finite());
        let f = if finite { f } else { f64::INFINITY };
        if finite && self.best.as_ref().is_none_or(|b| f < b.f) {
            self.best = Some(Point {
                x: x.clone(),
                f,
                g: g.clone(),
            });
        }
        Point { x, f, g }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn step(x: &[f64], d: &[f64], alpha: f64) -> Vec<f64> {
    x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect()
}

/// Minimizer of the cubic interpolating two (alpha, phi, phi') triples, if it
/// lies strictly inside the bracket.
fn cubic_min(a0: f64, f0: f64, d0: f64, a1: f64, f1: f64, d1: f64) -> Option<f64> {
    let t1 = d0 + d1 - 3.0 * (f0 - f1) / (a0 - a1);
    let disc = t1 * t1 - d0 * d1;
    if !(disc >= 0.0) {
        return None;
    }
    let t2 = (a1 - a0).signum() * disc.sqrt();
    let denom = d1 - d0 + 2.0 * t2;
    if denom == 0.0 {
        return None;
    }
    let a = a1 - (a1 - a0) * (d1 + t2 - t1) / denom;
    a.is_finite().then_some(a)
}

struct LineSearch<'a> {
    x: &'a [f64],
    d: &'a [f64],
    f0: f64,
    dg0: f64,
    c1: f64,
    c2: f64,
}

impl LineSearch<'_> {
    fn armijo(&self, alpha: f64, f: f64) -> bool {
        f <= self.f0 + self.c1 * alpha * self.dg0
    }

    fn curvature(&self, dg: f64) -> bool {
        dg.abs() <= -self.c2 * self.dg0
    }

    /// Strong-Wolfe search (bracketing phase followed by zoom).
    fn wolfe<F: FnMut(&[f64], &mut [f64]) -> f64>(&self, ev: &mut Evaluator<F>, alpha0: f64) -> Option<Point> {
        let (mut a_prev, mut f_prev, mut dg_prev) = (0.0, self.f0, self.dg0);
        let mut alpha = alpha0;
        for i in 0..40 {
            if ev.exhausted() {
                return None;
            }
            let pt = ev.eval(step(self.x, self.d, alpha));
            let dg = dot(&pt.g, self.d);
            if !pt.f.is_finite() {
                // overshoot into a non-finite region: treat as a bracket with unknown slope
                return self.zoom(ev, (a_prev, f_prev, dg_prev), (alpha, f64::INFINITY, f64::NAN));
            }
            if !self.armijo(alpha, pt.f) || (i > 0 && pt.f >= f_prev) {
                return self.zoom(ev, (a_prev, f_prev, dg_prev), (alpha, pt.f, dg));
            }
            if self.curvature(dg) {
                return Some(pt);
            }
            if dg >= 0.0 {
                return self.zoom(ev, (alpha, pt.f, dg), (a_prev, f_prev, dg_prev));
            }
            a_prev = alpha;
            f_prev = pt.f;
            dg_prev = dg;
            alpha *= 2.0;
        }
        None
    }

    fn zoom<F: FnMut(&[f64], &mut [f64]) -> f64>(
        &self,
        ev: &mut Evaluator<F>,
        mut lo: (f64, f64, f64),
        mut hi: (f64, f64, f64),
    ) -> Option<Point> {
        for _ in 0..40 {
            if ev.exhausted() {
                return None;
            }
            let (a_lo, a_hi) = (lo.0, hi.0);
            let width = (a_hi - a_lo).abs();
            if width <= 1e-16 * a_lo.abs().max(a_hi.abs()).max(1e-300) {
                return None;
            }
            let (left, right) = if a_lo < a_hi { (a_lo, a_hi) } else { (a_hi, a_lo) };
            let guard = 0.1 * width;
            let alpha = if hi.1.is_finite() && hi.2.is_finite() {
                cubic_min(lo.0, lo.1, lo.2, hi.0, hi.1, hi.2)
                    .filter(|a| *a > left + guard && *a < right - guard)
                    .unwrap_or(0.5 * (a_lo + a_hi))
            } else {
                0.5 * (a_lo + a_hi)
            };
            let pt = ev.eval(step(self.x, self.d, alpha));
            let dg = dot(&pt.g, self.d);
            if !pt.f.is_finite() || !self.armijo(alpha, pt.f) || pt.f >= lo.1 {
                hi = (alpha, pt.f, dg);
            } else {
                if self.curvature(dg) {
                    return Some(pt);
                }
                if dg * (hi.0 - lo.0) >= 0.0 {
                    hi = lo;
                }
                lo = (alpha, pt.f, dg);
            }
        }
        None
    }

    /// Plain backtracking on the Armijo condition.
    fn backtrack<F: FnMut(&[f64], &mut [f64]) -> f64>(&self, ev: &mut Evaluator<F>, alpha0: f64) -> Option<Point> {
        let mut alpha = alpha0;
        for _ in 0..60 {
            if ev.exhausted() {
                return None;
            }
            let pt = ev.eval(step(self.x, self.d, alpha));
            if pt.f.is_finite() && self.armijo(alpha, pt.f) {
                return Some(pt);
            }
            alpha *= 0.5;
        }
        None
    }
}

/// Minimizes a smooth function given as `f(x, grad) -> value`, writing the
/// gradient into `grad`.
///
/// The returned value never exceeds `f(x0)`; when the run stops early the best
/// point evaluated is returned with the corresponding status.
pub fn minimize<F>(f: F, x0: &[f64], settings: &OptSettings) -> Result<Minimum>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    settings.validate()?;
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite starting point".into()));
    }
    let mut ev = Evaluator {
        f,
        evals: 0,
        max_evals: settings.max_evals.max(1),
        best: None,
    };
    let mut cur = ev.eval(x0.to_vec());
    if !cur.f.is_finite() {
        return Err(Error::InvalidParameter(
            "objective or gradient is not finite at the starting point".into(),
        ));
    }
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(settings.history);

    let finish = |ev: Evaluator<F>, cur: Point, status: Status| {
        let evals = ev.evals;
        let best = match ev.best {
            Some(b) if b.f < cur.f => b,
            _ => cur,
        };
        Ok(Minimum {
            x: best.x,
            value: best.f,
            grad: best.g,
            status,
            evals,
        })
    };

    loop {
        if sup_norm(&cur.g) <= settings.grad_tol {
            return finish(ev, cur, Status::Converged);
        }
        if ev.exhausted() {
            return finish(ev, cur, Status::MaxEvalsReached);
        }

        // two-loop recursion
        let mut q = cur.g.clone();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = pairs.back() {
            let scale = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|qi| *qi *= scale);
        }
        for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut dg0 = dot(&d, &cur.g);
        if !(dg0 < 0.0) {
            pairs.clear();
            d = cur.g.iter().map(|v| -v).collect();
            dg0 = dot(&d, &cur.g);
        }
        let alpha0 = if pairs.is_empty() {
            (1.0 / dot(&cur.g, &cur.g).sqrt()).min(1.0)
        } else {
            1.0
        };

        let ls = LineSearch {
            x: &cur.x,
            d: &d,
            f0: cur.f,
            dg0,
            c1: settings.wolfe_c1,
            c2: settings.wolfe_c2,
        };
        let next = match ls.wolfe(&mut ev, alpha0) {
            Some(p) => p,
            None => match ls.backtrack(&mut ev, alpha0) {
                Some(p) => p,
                None => {
                    let status = if ev.exhausted() {
                        Status::MaxEvalsReached
                    } else {
                        Status::LineSearchFailed
                    };
                    return finish(ev, cur, status);
                }
            },
        };

        let s: Vec<f64> = next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.g.iter().zip(&cur.g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if pairs.len() == settings.history {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        let stalled = next.f >= cur.f;
        cur = next;
        if stalled && sup_norm(&cur.g) > settings.grad_tol {
            return finish(ev, cur, Status::LineSearchFailed);
        }
    }
}
