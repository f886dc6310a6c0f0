//! K-concavity checks on sampled functions and (S, s) threshold extraction.
//!
//! A function `beta` is K-concave when for all `x < y` and `b > 0`
//!
//! ```text
//! beta(x) - beta(y) - (x - y) * (beta(y + b) - beta(y)) / b <= K
//! ```
//!
//! On a grid the check runs over every node triple `x < y < y + b`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EconModel, Grid};

/// Function values on strictly ascending nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() != values.len() {
            return Err(Error::invalid("values", "length differs from nodes"));
        }
        if nodes.is_empty() {
            return Err(Error::invalid("nodes", "empty"));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("nodes", "must be strictly ascending"));
        }
        if values.iter().chain(&nodes).any(|v| !v.is_finite()) {
            return Err(Error::invalid("values", "must be finite"));
        }
        Ok(SampledFunction { nodes, values })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Every `stride`-th sample, always keeping the last one.
    pub fn subsample(&self, stride: usize) -> Self {
        let stride = stride.max(1);
        let mut idx: Vec<usize> = (0..self.len()).step_by(stride).collect();
        if *idx.last().unwrap() != self.len() - 1 {
            idx.push(self.len() - 1);
        }
        SampledFunction {
            nodes: idx.iter().map(|&i| self.nodes[i]).collect(),
            values: idx.iter().map(|&i| self.values[i]).collect(),
        }
    }
}

/// Result of a K-concavity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityReport {
    pub is_k_concave: bool,
    /// Largest left side of the defining inequality minus K over all triples.
    pub worst_slack: f64,
    /// `(x, y, b)` attaining the worst slack when the check fails.
    pub witness: Option<(f64, f64, f64)>,
}

/// Default absolute slack tolerance, `1e-6 * max(1, |K|)`.
pub fn default_tolerance(k: f64) -> f64 {
    1e-6 * k.abs().max(1.0)
}

fn check_inputs(f: &SampledFunction, k: f64) -> Result<()> {
    if f.len() < 3 {
        return Err(Error::Domain("K-concavity check needs at least 3 nodes".into()));
    }
    if !(k >= 0.0) {
        return Err(Error::Domain(format!("K must be nonnegative, got {k}")));
    }
    Ok(())
}

fn report(worst: f64, at: Option<(usize, usize, usize)>, f: &SampledFunction, tol: f64) -> ConcavityReport {
    let is_k_concave = worst <= tol;
    let witness = match (is_k_concave, at) {
        (false, Some((i, j, l))) => {
            let n = &f.nodes;
            Some((n[i], n[j], n[l] - n[j]))
        }
        _ => None,
    };
    ConcavityReport {
        is_k_concave,
        worst_slack: worst,
        witness,
    }
}

/// Exhaustive check over all node triples, `O(n^3)`.
pub fn check_k_concave(f: &SampledFunction, k: f64, tol: f64) -> Result<ConcavityReport> {
    check_inputs(f, k)?;
    let (x, v) = (&f.nodes, &f.values);
    let n = x.len();
    let mut worst = f64::NEG_INFINITY;
    let mut at = None;
    for i in 0..n {
        for j in i + 1..n - 1 {
            for l in j + 1..n {
                let secant = (v[l] - v[j]) / (x[l] - x[j]);
                let slack = v[i] - v[j] - (x[i] - x[j]) * secant - k;
                if slack > worst {
                    worst = slack;
                    at = Some((i, j, l));
                }
            }
        }
    }
    Ok(report(worst, at, f, tol))
}

/// Same verdict as [`check_k_concave`] in `O(n^2)`.
///
/// For fixed `y` the term maximized over `b` does not depend on `x` because
/// `y - x > 0`, so only the steepest right secant at each `y` matters.
pub fn check_k_concave_fast(f: &SampledFunction, k: f64, tol: f64) -> Result<ConcavityReport> {
    check_inputs(f, k)?;
    let (x, v) = (&f.nodes, &f.values);
    let n = x.len();
    let mut worst = f64::NEG_INFINITY;
    let mut at = None;
    for j in 1..n - 1 {
        let mut best_slope = f64::NEG_INFINITY;
        let mut best_l = j + 1;
        for l in j + 1..n {
            let s = (v[l] - v[j]) / (x[l] - x[j]);
            if s > best_slope {
                best_slope = s;
                best_l = l;
            }
        }
        for i in 0..j {
            let slack = v[i] - v[j] - (x[i] - x[j]) * best_slope - k;
            if slack > worst {
                worst = slack;
                at = Some((i, j, best_l));
            }
        }
    }
    Ok(report(worst, at, f, tol))
}

/// Harvest-down-to level `target` (S) and trigger level `trigger` (s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    #[serde(rename = "S")]
    pub target: f64,
    #[serde(rename = "s")]
    pub trigger: f64,
}

impl Thresholds {
    /// Harvest prescribed at stock `x`: nothing up to the trigger, down to
    /// the target above it.
    pub fn harvest(&self, x: f64) -> f64 {
        if x > self.trigger {
            x - self.target
        } else {
            0.0
        }
    }
}

/// Reads (S, s) off a sampled function: S is the largest maximizer, s the
/// largest node whose value is at least `P(S) - K`.
pub fn extract_thresholds(p: &SampledFunction, k: f64) -> Thresholds {
    let (si, ti) = threshold_indices(&p.values, k);
    Thresholds {
        target: p.nodes[si],
        trigger: p.nodes[ti],
    }
}

pub(crate) fn argmax_largest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v >= values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn threshold_indices(values: &[f64], k: f64) -> (usize, usize) {
    let s_big = argmax_largest(values);
    let floor = values[s_big] - k;
    let trigger = (0..values.len())
        .rev()
        .find(|&i| values[i] >= floor)
        .unwrap_or(s_big);
    (s_big, trigger)
}

/// Anchored `tau` and the admissible interval for the contraction constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostConditionReport {
    pub tau: f64,
    /// Lower end of the integral defining `tau`.
    pub anchor: f64,
    /// `K (1 - alpha) / alpha`.
    pub bound: f64,
    pub holds: bool,
    /// Open interval `((K + tau) alpha, K)`, present iff the condition holds.
    pub k_interval: Option<(f64, f64)>,
}

/// `tau = integral_{x_ref}^{x_max} (g(y) - g(x_max)) dy` for a nonincreasing
/// marginal cost `g` with antiderivative increment `cost_integral(a, b)`.
///
/// This is `G(x_max) - x_max g(x_max)` with `G` integrated from `x_ref`
/// instead of zero, plus the correction `x_ref * g(x_max)`. With `x_ref = 0`
/// it reduces to the unanchored quantity.
pub fn tau_with<G, I>(g: G, cost_integral: I, x_ref: f64, x_max: f64) -> f64
where
    G: Fn(f64) -> f64,
    I: Fn(f64, f64) -> f64,
{
    let g_top = g(x_max);
    cost_integral(x_ref, x_max) - x_max * g_top + x_ref * g_top
}

/// Anchored `tau` for the model's marginal cost, in $.
pub fn tau(econ: &EconModel, grid: &Grid) -> f64 {
    let c = econ.effort_cost;
    tau_with(
        |y| c / (econ.catchability * y.powf(econ.elasticity)),
        |a, b| c * econ.effort_between(a, b),
        grid.x_ref,
        grid.x_max,
    )
}

pub fn cost_condition_from_tau(tau: f64, fixed_cost: f64, alpha: f64, anchor: f64) -> CostConditionReport {
    let bound = fixed_cost * (1.0 - alpha) / alpha;
    let holds = tau < bound;
    let lo = (fixed_cost + tau) * alpha;
    CostConditionReport {
        tau,
        anchor,
        bound,
        holds,
        k_interval: if lo < fixed_cost { Some((lo, fixed_cost)) } else { None },
    }
}

pub fn cost_condition(econ: &EconModel, grid: &Grid) -> CostConditionReport {
    cost_condition_from_tau(tau(econ, grid), econ.fixed_cost, econ.discount_factor(), grid.x_ref)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, step: f64, f: impl Fn(f64) -> f64) -> SampledFunction {
        let nodes: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
        let values = nodes.iter().map(|&x| f(x)).collect();
        SampledFunction::new(nodes, values).unwrap()
    }

    #[test]
    fn concave_is_zero_concave() {
        let f = sample(25, 0.3, |x| -x * x);
        let r = check_k_concave(&f, 0.0, 1e-9).unwrap();
        assert!(r.is_k_concave);
        assert!(r.witness.is_none());
    }

    #[test]
    fn step_drop_oracle() {
        // drop of J after node 4 on a 10-node grid; worst triple is x before
        // the drop, y after it, secant flat, giving a slack of exactly J - K.
        let k = 2.0;
        for (jump, expect) in [(k / 2.0, true), (2.0 * k, false)] {
            let f = sample(10, 1.0, |x| if x <= 4.0 { jump } else { 0.0 });
            let r = check_k_concave(&f, k, 1e-12).unwrap();
            assert_eq!(r.is_k_concave, expect);
            assert!((r.worst_slack - (jump - k)).abs() < 1e-12);
            if !expect {
                let (x, y, _) = r.witness.unwrap();
                assert!(x <= 4.0 && y > 4.0);
            }
        }
    }

    #[test]
    fn too_few_nodes() {
        let f = sample(2, 1.0, |x| x);
        assert!(check_k_concave(&f, 1.0, 0.0).is_err());
        assert!(check_k_concave_fast(&f, 1.0, 0.0).is_err());
    }

    #[test]
    fn sampled_function_validation() {
        assert!(SampledFunction::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(SampledFunction::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(SampledFunction::new(vec![0.0, 1.0], vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn thresholds_concave_interior() {
        let k = 3.0;
        let f = sample(201, 0.1, |x| -(x - 7.3).powi(2));
        let t = extract_thresholds(&f, k);
        // brute-force scan
        let (mut best, mut bi) = (f64::NEG_INFINITY, 0);
        for (i, &v) in f.values().iter().enumerate() {
            if v >= best {
                best = v;
                bi = i;
            }
        }
        assert_eq!(t.target, f.nodes()[bi]);
        let exact_trigger = 7.3 + k.sqrt();
        assert!((t.trigger - exact_trigger).abs() <= 0.1 + 1e-12);
        assert!(t.target <= t.trigger);
        for (i, &x) in f.nodes().iter().enumerate() {
            if x > t.trigger {
                assert!(best - k > f.values()[i]);
            }
        }
    }

    #[test]
    fn thresholds_monotone_and_zero_k() {
        let f = sample(30, 1.0, |x| x.sqrt());
        let t = extract_thresholds(&f, 5.0);
        assert_eq!(t.target, 29.0);
        assert_eq!(t.trigger, 29.0);
        let g = sample(50, 0.5, |x| -(x - 11.0).powi(2));
        let t = extract_thresholds(&g, 0.0);
        assert_eq!(t.target, 11.0);
        assert_eq!(t.trigger, 11.0);
    }

    #[test]
    fn tau_constant_cost_is_zero() {
        let g0 = 7.0;
        let t = tau_with(|_| g0, |a, b| g0 * (b - a), 0.0, 100.0);
        assert_eq!(t, 0.0);
        let t = tau_with(|_| g0, |a, b| g0 * (b - a), 2.5, 100.0);
        assert!(t.abs() < 1e-12);
    }

    #[test]
    fn tau_linear_cost_matches_quadrature() {
        let (xr, xm) = (0.5, 40.0);
        let g = |y: f64| 100.0 - 2.0 * y;
        let big_g = |a: f64, b: f64| 100.0 * (b - a) - (b * b - a * a);
        let t = tau_with(g, big_g, xr, xm);
        // trapezoid oracle of g - g(x_max); the integrand is linear so this
        // is exact up to rounding
        let n = 10_000;
        let h = (xm - xr) / n as f64;
        let mut quad = 0.5 * ((g(xr) - g(xm)) + 0.0);
        for i in 1..n {
            quad += g(xr + i as f64 * h) - g(xm);
        }
        quad *= h;
        assert!((t - quad).abs() < 1e-8 * quad.abs().max(1.0), "{t} vs {quad}");
        assert!((t - 0.5 * (g(xr) - g(xm)) * (xm - xr)).abs() < 1e-9);
    }

    #[test]
    fn tau_table1_is_finite_positive() {
        let econ = EconModel::table1();
        let grid = Grid::new(557.75, 0.25).unwrap();
        let t = tau(&econ, &grid);
        assert!(t.is_finite() && t > 0.0);
        let r = cost_condition(&econ, &grid);
        assert_eq!(r.anchor, 0.25);
        // the anchored tau is of order 1e12 $, far above K (1 - alpha)/alpha
        assert!(!r.holds);
        assert!(r.k_interval.is_none());
        assert!((r.bound - 2.5e5).abs() < 1e-6);
    }

    #[test]
    fn cost_condition_boundaries() {
        let alpha = 1.0 / 1.05;
        let r = cost_condition_from_tau(0.0, 5.0, alpha, 0.0);
        assert!(r.holds);
        let (lo, hi) = r.k_interval.unwrap();
        assert!(lo < hi);
        let r = cost_condition_from_tau(1.0 * (1.0 - 0.5) / 0.5, 1.0, 0.5, 0.0);
        assert!(!r.holds);
        assert!(r.k_interval.is_none());
    }
}
