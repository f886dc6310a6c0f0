//! Policy simulation and worst-case evaluation.
//!
//! Year `t` of a plan (1-based) is discounted by `alpha^(t-1)`, the same
//! convention the solvers use, so evaluating the solved policy recovers the
//! optimal value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kconcave::Thresholds;
use crate::model::{harvest_utility, Horizon, Reproduction};
use crate::solver::{interpolate, is_nondecreasing, monotone_tolerance, HarvestProblem, ThresholdSchedule};

/// Admissible harvest rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    /// Non-stationary (S, s) rule indexed by periods remaining.
    Threshold(ThresholdSchedule),
    /// Harvest a fixed fraction of the current stock every year.
    Proportional { rate: f64 },
    /// Harvest fraction per year, in calendar order.
    Sequence { fractions: Vec<f64> },
    /// First action of a `lookahead`-period plan re-solved every year. The
    /// plan does not depend on the state, so its first-year thresholds are
    /// solved once at construction.
    RollingHorizon {
        lookahead: usize,
        thresholds: Thresholds,
    },
}

impl Policy {
    pub fn never_harvest() -> Self {
        Policy::Proportional { rate: 0.0 }
    }

    pub fn rolling_horizon<F: Reproduction>(problem: &HarvestProblem<'_, F>, lookahead: Horizon) -> Result<Self> {
        let sol = problem.solve_fast(lookahead)?;
        Ok(Policy::RollingHorizon {
            lookahead: lookahead.periods(),
            thresholds: sol.schedule.for_year(1).expect("nonempty schedule"),
        })
    }
}

/// Harvest prescribed by `policy` at stock `x` in year `year` of a
/// `total_years` plan.
pub fn apply_policy(policy: &Policy, x: f64, year: usize, total_years: usize) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("stock must be nonnegative, got {x}")));
    }
    if year == 0 || year > total_years {
        return Err(Error::Domain(format!("year {year} outside 1..={total_years}")));
    }
    let h = match policy {
        Policy::Threshold(schedule) => {
            let remaining = total_years - year + 1;
            let t = schedule.remaining(remaining).ok_or_else(|| {
                Error::Domain(format!(
                    "year {year}: schedule covers {} periods, {remaining} needed",
                    schedule.horizon()
                ))
            })?;
            t.harvest(x)
        }
        Policy::Proportional { rate } => rate * x,
        Policy::Sequence { fractions } => {
            let f = fractions
                .get(year - 1)
                .ok_or_else(|| Error::Domain(format!("year {year} beyond harvest sequence")))?;
            f * x
        }
        Policy::RollingHorizon { thresholds, .. } => thresholds.harvest(x),
    };
    if !(h >= 0.0 && h <= x) {
        return Err(Error::Domain(format!(
            "year {year}: harvest {h} not admissible for stock {x}"
        )));
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ShockRule {
    Constant(f64),
    /// Lowest shock of the support every year.
    WorstGreedy,
    Given(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YearRecord {
    pub year: usize,
    pub stock: f64,
    pub harvest: f64,
    pub shock: f64,
    pub stock_after: f64,
    pub utility: f64,
    pub discounted_utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub years: Vec<YearRecord>,
    pub total: f64,
}

impl Trajectory {
    pub fn recomputed_total(&self) -> f64 {
        self.years.iter().map(|y| y.discounted_utility).sum()
    }

    pub fn harvests(&self) -> Vec<f64> {
        self.years.iter().map(|y| y.harvest).collect()
    }
}

/// Rolls the dynamics forward from `x1` applying `policy` each year.
pub fn simulate<F: Reproduction>(
    policy: &Policy,
    x1: f64,
    years: Horizon,
    shocks: &ShockRule,
    problem: &HarvestProblem<'_, F>,
) -> Result<Trajectory> {
    let grid = problem.grid();
    let econ = problem.econ();
    let dynamics = problem.dynamics();
    let (lo, hi) = dynamics.shock_support();
    if !(0.0..=grid.x_max).contains(&x1) {
        return Err(Error::Domain(format!("x1 = {x1} outside [0, {}]", grid.x_max)));
    }
    let n = years.periods();
    if let ShockRule::Given(seq) = shocks {
        if seq.len() < n {
            return Err(Error::Domain(format!(
                "shock sequence has {} entries, {n} needed",
                seq.len()
            )));
        }
    }
    let alpha = econ.discount_factor();
    let mut x = x1;
    let mut weight = 1.0;
    let mut records = Vec::with_capacity(n);
    let mut total = 0.0;
    for t in 1..=n {
        let h = apply_policy(policy, x, t, n)?;
        let w = match shocks {
            ShockRule::Constant(w) => *w,
            ShockRule::WorstGreedy => lo,
            ShockRule::Given(seq) => seq[t - 1],
        };
        if !(w >= lo && w <= hi) {
            return Err(Error::Domain(format!("year {t}: shock {w} outside [{lo}, {hi}]")));
        }
        let utility = harvest_utility(x, h, grid, econ)?;
        let after = dynamics.next_stock(x - h, w);
        let discounted = weight * utility;
        total += discounted;
        records.push(YearRecord {
            year: t,
            stock: x,
            harvest: h,
            shock: w,
            stock_after: after,
            utility,
            discounted_utility: discounted,
        });
        x = after;
        weight *= alpha;
    }
    Ok(Trajectory {
        years: records,
        total,
    })
}

/// Guaranteed discounted revenue of a fixed policy: backward induction over
/// the grid with nature minimizing over the discretized shocks. The first
/// year is evaluated exactly at `x1`, later years by interpolation.
pub fn worst_case_value<F: Reproduction>(
    policy: &Policy,
    x1: f64,
    years: Horizon,
    problem: &HarvestProblem<'_, F>,
) -> Result<f64> {
    let grid = problem.grid();
    if !(0.0..=grid.x_max).contains(&x1) {
        return Err(Error::Domain(format!("x1 = {x1} outside [0, {}]", grid.x_max)));
    }
    let n = years.periods();
    let nodes = grid.nodes();
    let mut v = vec![0.0; nodes.len()];
    for remaining in 1..n {
        let year = n - remaining + 1;
        let shocks = candidate_shocks(&v, problem);
        let next: Result<Vec<f64>> = nodes
            .iter()
            .map(|&x| stage_value(policy, x, year, n, &v, shocks, problem))
            .collect();
        v = next?;
    }
    stage_value(policy, x1, 1, n, &v, candidate_shocks(&v, problem), problem)
}

/// Shocks nature has to try against `continuation`: only the lowest one
/// when the continuation is nondecreasing and the shortcut is enabled.
fn candidate_shocks<'p, F: Reproduction>(continuation: &[f64], problem: &'p HarvestProblem<'_, F>) -> &'p [f64] {
    let shocks = problem.shocks();
    if problem.config().monotone_shortcut && is_nondecreasing(continuation, monotone_tolerance(continuation)) {
        &shocks[..1]
    } else {
        shocks
    }
}

fn stage_value<F: Reproduction>(
    policy: &Policy,
    x: f64,
    year: usize,
    total: usize,
    continuation: &[f64],
    shocks: &[f64],
    problem: &HarvestProblem<'_, F>,
) -> Result<f64> {
    let grid = problem.grid();
    let econ = problem.econ();
    let h = apply_policy(policy, x, year, total)?;
    let u = harvest_utility(x, h, grid, econ)?;
    if year == total {
        return Ok(u);
    }
    let z = x - h;
    let worst = shocks
        .iter()
        .map(|&w| {
            let y = problem.dynamics().next_stock(z, w).min(grid.x_max);
            interpolate(continuation, grid.step, y)
        })
        .fold(f64::INFINITY, f64::min);
    Ok(u + econ.discount_factor() * worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub policy: String,
    /// Exact adversarial value of the policy.
    pub worst_case_revenue: f64,
    /// Value along the constant lowest-shock path.
    pub worst_greedy_revenue: f64,
    /// Shortfall against the best row.
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub x1: f64,
    pub years: usize,
    pub rows: Vec<ComparisonRow>,
}

/// Evaluates each named policy from `x1`; losses are measured against the
/// best worst-case revenue.
pub fn compare<F: Reproduction>(
    policies: &[(String, Policy)],
    x1: f64,
    years: Horizon,
    problem: &HarvestProblem<'_, F>,
) -> Result<Comparison> {
    let mut rows = Vec::with_capacity(policies.len());
    for (name, policy) in policies {
        let worst = worst_case_value(policy, x1, years, problem)?;
        let greedy = simulate(policy, x1, years, &ShockRule::WorstGreedy, problem)?.total;
        rows.push(ComparisonRow {
            policy: name.clone(),
            worst_case_revenue: worst,
            worst_greedy_revenue: greedy,
            loss: 0.0,
        });
    }
    let best = rows
        .iter()
        .map(|r| r.worst_case_revenue)
        .fold(f64::NEG_INFINITY, f64::max);
    for r in &mut rows {
        r.loss = best - r.worst_case_revenue;
    }
    Ok(Comparison {
        x1,
        years: years.periods(),
        rows,
    })
}

/// Optimal (S-s), constant proportional and rolling-horizon policies.
pub fn standard_policies<F: Reproduction>(
    problem: &HarvestProblem<'_, F>,
    years: Horizon,
    cpp_rate: f64,
) -> Result<Vec<(String, Policy)>> {
    let optimal = problem.solve_fast(years)?;
    Ok(vec![
        ("optimal_s_s".to_string(), Policy::Threshold(optimal.schedule)),
        (
            format!("cpp_{cpp_rate}"),
            Policy::Proportional { rate: cpp_rate },
        ),
        (
            format!("rolling_horizon_{}", years.periods()),
            Policy::rolling_horizon(problem, years)?,
        ),
    ])
}
