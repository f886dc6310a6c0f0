//! Minimax dynamic programming on a stock grid.
//!
//! With `n` periods remaining the recursion is
//!
//! ```text
//! P_n(z) = -R(z) + alpha * min_w C_{n-1}(f(z, w))
//! C_n(x) = R(x) + max( P_n(x), max_{z < x} P_n(z) - K )
//! ```
//!
//! so the current season's utility is undiscounted and season `t` of the
//! plan carries `alpha^(t-1)`. `C_{n-1}` is read off the grid by linear
//! interpolation; recruitment above the top node is clamped.
//!
//! [`HarvestProblem::solve_dense`] maximizes over every admissible target at
//! every node. [`HarvestProblem::solve_fast`] uses the (S, s) structure: one
//! argmax for S, a bisection for s and a closed-form reconstruction of
//! `C_n`. Both share the same arithmetic, so on a K-concave problem they
//! agree bit for bit.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kconcave::{argmax_largest, SampledFunction, Thresholds};
use crate::model::{revenue_unchecked, EconModel, Grid, Horizon, Reproduction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Shock values strictly between the support endpoints.
    pub interior_shocks: usize,
    /// Evaluate only the lowest shock when the continuation value has been
    /// checked to be nondecreasing. Exact under that check because the
    /// reproduction map is nondecreasing in the shock.
    pub monotone_shortcut: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            interior_shocks: 3,
            monotone_shortcut: true,
        }
    }
}

impl SolverConfig {
    pub fn shock_values(&self, lo: f64, hi: f64) -> Vec<f64> {
        if hi == lo {
            return vec![lo];
        }
        let pieces = self.interior_shocks + 1;
        (0..=pieces)
            .map(|i| {
                if i == pieces {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / pieces as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interpolation {
    Linear,
}

/// Value functions `C_0 .. C_N` on the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    stages: Vec<Vec<f64>>,
    grid: Grid,
    pub interpolation: Interpolation,
}

impl ValueTable {
    fn new(grid: Grid) -> Self {
        ValueTable {
            stages: vec![vec![0.0; grid.len()]],
            grid,
            interpolation: Interpolation::Linear,
        }
    }

    /// Values with `n` periods remaining.
    pub fn stage(&self, n: usize) -> &[f64] {
        &self.stages[n]
    }

    /// Highest stage index, i.e. the horizon.
    pub fn horizon(&self) -> usize {
        self.stages.len() - 1
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Linear interpolation of `C_n`, clamped to `[0, x_max]`.
    pub fn interpolate(&self, n: usize, x: f64) -> f64 {
        interpolate(&self.stages[n], self.grid.step, x)
    }
}

#[inline]
pub(crate) fn interpolate(values: &[f64], step: f64, x: f64) -> f64 {
    let last = values.len() - 1;
    let pos = (x / step).clamp(0.0, last as f64);
    let i = (pos.floor() as usize).min(last - 1);
    let t = pos - i as f64;
    if t == 0.0 {
        values[i]
    } else {
        values[i] + t * (values[i + 1] - values[i])
    }
}

/// Thresholds for every number of periods remaining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSchedule {
    by_remaining: Vec<Thresholds>,
}

impl ThresholdSchedule {
    pub fn from_remaining(by_remaining: Vec<Thresholds>) -> Self {
        ThresholdSchedule { by_remaining }
    }

    pub fn horizon(&self) -> usize {
        self.by_remaining.len()
    }

    /// Pair used with `n` periods remaining, `1 <= n <= horizon`.
    pub fn remaining(&self, n: usize) -> Option<Thresholds> {
        n.checked_sub(1).and_then(|i| self.by_remaining.get(i)).copied()
    }

    /// Pair used in decision year `t` (1 = first year of the plan).
    pub fn for_year(&self, t: usize) -> Option<Thresholds> {
        if t == 0 || t > self.horizon() {
            return None;
        }
        self.remaining(self.horizon() - t + 1)
    }

    /// `(year, thresholds)` in calendar order.
    pub fn by_year(&self) -> impl Iterator<Item = (usize, Thresholds)> + '_ {
        (1..=self.horizon()).map(move |t| (t, self.for_year(t).unwrap()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub p_evaluations: u64,
    pub interpolations: u64,
    /// Fresh `P_n` evaluations made while bisecting for `s_n`.
    pub bisection_probes: u64,
    pub bisection_interpolations: u64,
    /// Set when the bisection predicate was not monotone and the stage was
    /// solved by a linear scan instead.
    pub fallback: bool,
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    /// Indexed by periods remaining minus one.
    pub stages: Vec<StageStats>,
}

impl SolverStats {
    pub fn total_seconds(&self) -> f64 {
        self.stages.iter().map(|s| s.seconds).sum()
    }
}

/// Optimal escapement node per stage and node, `targets[n-1][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    targets: Vec<Vec<usize>>,
}

impl PolicyTable {
    pub fn target(&self, n: usize, node: usize) -> usize {
        self.targets[n - 1][node]
    }

    pub fn stage(&self, n: usize) -> &[usize] {
        &self.targets[n - 1]
    }
}

#[derive(Debug, Clone)]
pub struct DenseSolution {
    pub values: ValueTable,
    pub schedule: ThresholdSchedule,
    pub policy: PolicyTable,
    /// `P_n` on the grid, `NEG_INFINITY` where no escapement is admissible.
    pub p_values: Vec<Vec<f64>>,
    pub stats: SolverStats,
}

#[derive(Debug, Clone)]
pub struct FastSolution {
    pub values: ValueTable,
    pub schedule: ThresholdSchedule,
    pub stats: SolverStats,
    /// Stages (periods remaining) solved by the linear-scan fallback.
    pub flagged_stages: Vec<usize>,
}

/// A grid-discretized harvesting problem.
pub struct HarvestProblem<'a, F: Reproduction> {
    dynamics: &'a F,
    econ: &'a EconModel,
    grid: Grid,
    config: SolverConfig,
    shocks: Vec<f64>,
    revenue: Vec<f64>,
    /// First node admissible as an escapement target.
    first: usize,
    alpha: f64,
}

impl<'a, F: Reproduction> HarvestProblem<'a, F> {
    pub fn new(dynamics: &'a F, econ: &'a EconModel, grid: &Grid, config: SolverConfig) -> Result<Self> {
        econ.validate()?;
        grid.validate()?;
        let (lo, hi) = dynamics.shock_support();
        let first = usize::from(econ.cost_diverges_at_zero());
        let revenue = (0..grid.len())
            .map(|i| {
                if i < first {
                    f64::INFINITY
                } else {
                    revenue_unchecked(grid.node(i), grid.x_ref, econ)
                }
            })
            .collect();
        Ok(HarvestProblem {
            dynamics,
            econ,
            grid: *grid,
            config,
            shocks: config.shock_values(lo, hi),
            revenue,
            first,
            alpha: econ.discount_factor(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn econ(&self) -> &EconModel {
        self.econ
    }

    pub fn dynamics(&self) -> &F {
        self.dynamics
    }

    pub fn shocks(&self) -> &[f64] {
        &self.shocks
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Index of the lowest node that can be harvested down to.
    pub fn first_target(&self) -> usize {
        self.first
    }

    /// `R` relative to `x_ref` at each node (`+inf` where undefined).
    pub fn revenue_nodes(&self) -> &[f64] {
        &self.revenue
    }

    fn use_shortcut(&self, prev: &[f64]) -> bool {
        self.config.monotone_shortcut && is_nondecreasing(prev, monotone_tolerance(prev))
    }

    /// `min_w C_{n-1}(f(z, w))`, interpolated.
    #[inline]
    fn worst_continuation(&self, prev: &[f64], z: f64, shortcut: bool, count: &mut u64) -> f64 {
        let top = self.grid.x_max;
        let step = self.grid.step;
        if shortcut {
            *count += 1;
            return interpolate(prev, step, self.dynamics.next_stock(z, self.shocks[0]).min(top));
        }
        let mut worst = f64::INFINITY;
        for &w in &self.shocks {
            *count += 1;
            let v = interpolate(prev, step, self.dynamics.next_stock(z, w).min(top));
            if v < worst {
                worst = v;
            }
        }
        worst
    }

    #[inline]
    fn p_node(&self, i: usize, prev: &[f64], shortcut: bool, count: &mut u64) -> f64 {
        if i < self.first {
            return f64::NEG_INFINITY;
        }
        let cont = self.worst_continuation(prev, self.grid.node(i), shortcut, count);
        -self.revenue[i] + self.alpha * cont
    }

    /// `P_n(z)` for any stock in `[0, x_max]` given `C_{n-1}` in `values`.
    pub fn p_fn(&self, n: usize, z: f64, values: &ValueTable) -> Result<f64> {
        if n == 0 || n > values.horizon() + 1 {
            return Err(Error::Domain(format!("stage {n} has no predecessor in the table")));
        }
        if !(0.0..=self.grid.x_max).contains(&z) {
            return Err(Error::Domain(format!(
                "stock {z} outside [0, {}]",
                self.grid.x_max
            )));
        }
        if z == 0.0 && self.econ.cost_diverges_at_zero() {
            return Ok(f64::NEG_INFINITY);
        }
        let prev = values.stage(n - 1);
        let shortcut = self.use_shortcut(prev);
        let mut count = 0;
        let cont = self.worst_continuation(prev, z, shortcut, &mut count);
        Ok(-revenue_unchecked(z, self.grid.x_ref, self.econ) + self.alpha * cont)
    }

    fn p_stage(&self, n: usize, prev: &[f64], shortcut: bool, stats: &mut StageStats) -> Result<Vec<f64>> {
        let mut p = Vec::with_capacity(self.grid.len());
        for i in 0..self.grid.len() {
            let v = self.p_node(i, prev, shortcut, &mut stats.interpolations);
            if i >= self.first {
                stats.p_evaluations += 1;
                if !v.is_finite() {
                    return Err(Error::Numerical {
                        stage: n,
                        node: i,
                        detail: format!("P_n = {v}"),
                    });
                }
            }
            p.push(v);
        }
        Ok(p)
    }

    /// Value at a node that cannot harvest at all (zero stock with
    /// divergent cost).
    fn stranded_value(&self, prev: &[f64], shortcut: bool, stats: &mut StageStats) -> f64 {
        self.alpha * self.worst_continuation(prev, 0.0, shortcut, &mut stats.interpolations)
    }

    /// Reference solver: explicit maximization over every target `z <= x`.
    pub fn solve_dense(&self, horizon: Horizon) -> Result<DenseSolution> {
        let n_nodes = self.grid.len();
        let k = self.econ.fixed_cost;
        let mut values = ValueTable::new(self.grid);
        let mut schedule = Vec::with_capacity(horizon.periods());
        let mut targets = Vec::with_capacity(horizon.periods());
        let mut p_values = Vec::with_capacity(horizon.periods());
        let mut stats = SolverStats::default();

        for n in 1..=horizon.periods() {
            let started = Instant::now();
            let mut st = StageStats::default();
            let prev = values.stages[n - 1].clone();
            let shortcut = self.use_shortcut(&prev);
            let p = self.p_stage(n, &prev, shortcut, &mut st)?;

            let mut c = vec![0.0; n_nodes];
            let mut target = vec![0usize; n_nodes];
            for i in 0..n_nodes {
                if i < self.first {
                    c[i] = self.stranded_value(&prev, shortcut, &mut st);
                    target[i] = i;
                    continue;
                }
                let mut best = p[i];
                let mut best_z = i;
                for z in (self.first..i).rev() {
                    let cand = p[z] - k;
                    if cand > best {
                        best = cand;
                        best_z = z;
                    }
                }
                c[i] = self.revenue[i] + best;
                target[i] = best_z;
                if !c[i].is_finite() {
                    return Err(Error::Numerical {
                        stage: n,
                        node: i,
                        detail: format!("C_n = {}", c[i]),
                    });
                }
            }

            schedule.push(self.read_thresholds(&target, &p));
            st.seconds = started.elapsed().as_secs_f64();
            stats.stages.push(st);
            values.stages.push(c);
            targets.push(target);
            p_values.push(p);
        }

        Ok(DenseSolution {
            values,
            schedule: ThresholdSchedule::from_remaining(schedule),
            policy: PolicyTable { targets },
            p_values,
            stats,
        })
    }

    /// s = largest node that does not harvest, S = target of the largest
    /// harvesting node (or the argmax of `P_n` when nothing harvests).
    fn read_thresholds(&self, target: &[usize], p: &[f64]) -> Thresholds {
        let trigger = (0..target.len()).rev().find(|&i| target[i] == i).unwrap_or(0);
        let s_big = match (0..target.len()).rev().find(|&i| target[i] != i) {
            Some(i) => target[i],
            None => self.first + argmax_largest(&p[self.first..]),
        };
        Thresholds {
            target: self.grid.node(s_big),
            trigger: self.grid.node(trigger),
        }
    }

    /// Structure-exploiting solver.
    pub fn solve_fast(&self, horizon: Horizon) -> Result<FastSolution> {
        let n_nodes = self.grid.len();
        let top = n_nodes - 1;
        let k = self.econ.fixed_cost;
        let mut values = ValueTable::new(self.grid);
        let mut schedule = Vec::with_capacity(horizon.periods());
        let mut stats = SolverStats::default();
        let mut flagged = Vec::new();

        for n in 1..=horizon.periods() {
            let started = Instant::now();
            let mut st = StageStats::default();
            let prev = values.stages[n - 1].clone();
            let shortcut = self.use_shortcut(&prev);
            let p = self.p_stage(n, &prev, shortcut, &mut st)?;

            let s_big = self.first + argmax_largest(&p[self.first..]);
            let p_best = p[s_big];
            let probe = |i: usize, st: &mut StageStats| {
                st.bisection_probes += 1;
                let v = self.p_node(i, &prev, shortcut, &mut st.bisection_interpolations);
                p_best - k > v
            };

            // harvest predicate is false at S; find the last false node
            let trigger = if !probe(top, &mut st) {
                top
            } else {
                let (mut lo, mut hi) = (s_big, top);
                while hi - lo > 1 {
                    let mid = lo + (hi - lo) / 2;
                    if probe(mid, &mut st) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                lo
            };

            let fallback = if self.is_threshold_form(&p, s_big, trigger) {
                None
            } else {
                Some(self.scan_targets(&p))
            };
            let (s_big, trigger) = match &fallback {
                None => (s_big, trigger),
                Some(target) => {
                    st.fallback = true;
                    flagged.push(n);
                    let t = self.read_thresholds(target, &p);
                    let to_idx = |x: f64| (x / self.grid.step).round() as usize;
                    (to_idx(t.target), to_idx(t.trigger))
                }
            };

            let harvested = p_best - k;
            let mut c = vec![0.0; n_nodes];
            for i in 0..n_nodes {
                c[i] = if i < self.first {
                    self.stranded_value(&prev, shortcut, &mut st)
                } else {
                    match &fallback {
                        Some(target) if target[i] != i => self.revenue[i] + (p[target[i]] - k),
                        Some(_) => self.revenue[i] + p[i],
                        None if i <= trigger => self.revenue[i] + p[i],
                        None => self.revenue[i] + harvested,
                    }
                };
            }
            if let Some(i) = c.iter().position(|v| !v.is_finite()) {
                return Err(Error::Numerical {
                    stage: n,
                    node: i,
                    detail: format!("C_n = {}", c[i]),
                });
            }

            schedule.push(Thresholds {
                target: self.grid.node(s_big),
                trigger: self.grid.node(trigger),
            });
            st.seconds = started.elapsed().as_secs_f64();
            stats.stages.push(st);
            values.stages.push(c);
        }

        Ok(FastSolution {
            values,
            schedule: ThresholdSchedule::from_remaining(schedule),
            stats,
            flagged_stages: flagged,
        })
    }

    /// Checks on cached values that the optimal rule at this stage is
    /// "no harvest up to `trigger`, harvest down to `s_big` above it".
    fn is_threshold_form(&self, p: &[f64], s_big: usize, trigger: usize) -> bool {
        let k = self.econ.fixed_cost;
        let p_best = p[s_big];
        let mut running = f64::NEG_INFINITY;
        for (i, &pi) in p.iter().enumerate().skip(self.first) {
            let harvest = if i <= s_big {
                running - k > pi
            } else {
                p_best - k > pi
            };
            if harvest != (i > trigger) {
                return false;
            }
            running = running.max(pi);
        }
        true
    }

    /// Optimal target per node via a running maximum (ties to the largest).
    fn scan_targets(&self, p: &[f64]) -> Vec<usize> {
        let k = self.econ.fixed_cost;
        let mut target: Vec<usize> = (0..p.len()).collect();
        let mut best_z: Option<usize> = None;
        for i in self.first..p.len() {
            if let Some(z) = best_z {
                if p[z] - k > p[i] {
                    target[i] = z;
                }
            }
            match best_z {
                Some(z) if p[z] > p[i] => {}
                _ => best_z = Some(i),
            }
        }
        target
    }

    /// Harvest at stock `x` under a freshly solved `lookahead`-period
    /// problem: the first action of that plan.
    pub fn rolling_horizon_action(&self, x: f64, lookahead: Horizon) -> Result<f64> {
        if !(0.0..=self.grid.x_max).contains(&x) {
            return Err(Error::Domain(format!(
                "stock {x} outside [0, {}]",
                self.grid.x_max
            )));
        }
        let sol = self.solve_fast(lookahead)?;
        let first_year = sol.schedule.for_year(1).expect("horizon >= 1");
        Ok(first_year.harvest(x))
    }
}

impl DenseSolution {
    /// `P_n` restricted to nodes where it is finite.
    pub fn p_function(&self, n: usize) -> SampledFunction {
        let grid = self.values.grid();
        let p = &self.p_values[n - 1];
        let (nodes, values): (Vec<f64>, Vec<f64>) = p
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(i, &v)| (grid.node(i), v))
            .unzip();
        SampledFunction::new(nodes, values).expect("finite P_n on ascending nodes")
    }

    /// Number of nodes whose action disagrees with the stage's (S, s) rule.
    pub fn threshold_violations(&self, n: usize) -> usize {
        let grid = self.values.grid();
        let t = self.schedule.remaining(n).unwrap();
        let s_big = (t.target / grid.step).round() as usize;
        let targets = self.policy.stage(n);
        targets
            .iter()
            .enumerate()
            .filter(|&(i, &z)| {
                let expect = if grid.node(i) > t.trigger { s_big } else { i };
                z != expect
            })
            .count()
    }
}

pub(crate) fn monotone_tolerance(values: &[f64]) -> f64 {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    1e-12 * scale.max(1.0)
}

pub(crate) fn is_nondecreasing(values: &[f64], tol: f64) -> bool {
    values.windows(2).all(|w| w[1] >= w[0] - tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kconcave::check_k_concave_fast;
    use crate::model::{BioModel, EconModel};

    fn small_problem() -> (BioModel, EconModel, Grid) {
        let bio = BioModel::table1();
        let econ = EconModel::table1();
        let grid = Grid::for_model(&bio, 2.0).unwrap();
        (bio, econ, grid)
    }

    #[test]
    fn interpolation_hits_nodes_and_clamps() {
        let v = [0.0, 1.0, 4.0, 9.0];
        assert_eq!(interpolate(&v, 0.5, 1.0), 4.0);
        assert_eq!(interpolate(&v, 0.5, 0.25), 0.5);
        assert_eq!(interpolate(&v, 0.5, 7.0), 9.0);
        assert_eq!(interpolate(&v, 0.5, 1.5), 9.0);
    }

    #[test]
    fn shock_values_layout() {
        let c = SolverConfig::default();
        let w = c.shock_values(0.89, 1.06);
        assert_eq!(w.len(), 5);
        assert_eq!(w[0], 0.89);
        assert_eq!(w[4], 1.06);
        assert_eq!(c.shock_values(1.0, 1.0), vec![1.0]);
    }

    #[test]
    fn stage_one_p_is_minus_revenue() {
        let (bio, econ, grid) = small_problem();
        let prob = HarvestProblem::new(&bio, &econ, &grid, SolverConfig::default()).unwrap();
        let sol = prob.solve_dense(Horizon::new(1).unwrap()).unwrap();
        for z in [2.0, 50.0, 123.0, 300.5] {
            let p = prob.p_fn(1, z, &sol.values).unwrap();
            let r = crate::model::revenue_rel(z, &grid, &econ).unwrap();
            assert!((p + r).abs() <= 1e-9 * r.abs());
        }
        assert!(prob.p_fn(1, -1.0, &sol.values).is_err());
        assert!(prob.p_fn(1, grid.x_max + 1.0, &sol.values).is_err());
    }

    #[test]
    fn worst_shock_is_lowest() {
        let (bio, econ, grid) = small_problem();
        let full = SolverConfig {
            interior_shocks: 3,
            monotone_shortcut: false,
        };
        let a = HarvestProblem::new(&bio, &econ, &grid, full).unwrap();
        let b = HarvestProblem::new(&bio, &econ, &grid, SolverConfig::default()).unwrap();
        let h = Horizon::new(4).unwrap();
        let sa = a.solve_dense(h).unwrap();
        let sb = b.solve_dense(h).unwrap();
        assert_eq!(sa.schedule, sb.schedule);
        for n in 0..=4 {
            assert_eq!(sa.values.stage(n), sb.values.stage(n));
        }
    }

    #[test]
    fn prohibitive_fixed_cost_never_harvests() {
        let (bio, mut econ, grid) = small_problem();
        econ.fixed_cost = 1e15;
        let prob = HarvestProblem::new(&bio, &econ, &grid, SolverConfig::default()).unwrap();
        let sol = prob.solve_dense(Horizon::new(1).unwrap()).unwrap();
        assert!(sol.values.stage(1).iter().all(|&v| v == 0.0));
        assert_eq!(sol.schedule.remaining(1).unwrap().trigger, grid.top());
        assert_eq!(sol.threshold_violations(1), 0);
    }

    #[test]
    fn dense_and_fast_agree_on_coarse_grid() {
        let (bio, econ, grid) = small_problem();
        let prob = HarvestProblem::new(&bio, &econ, &grid, SolverConfig::default()).unwrap();
        let h = Horizon::new(12).unwrap();
        let d = prob.solve_dense(h).unwrap();
        let f = prob.solve_fast(h).unwrap();
        assert_eq!(d.schedule, f.schedule);
        assert!(f.flagged_stages.is_empty());
        for n in 0..=12 {
            assert_eq!(d.values.stage(n), f.values.stage(n));
        }
    }

    #[test]
    fn dense_policy_properties_on_coarse_grid() {
        let (bio, econ, grid) = small_problem();
        let prob = HarvestProblem::new(&bio, &econ, &grid, SolverConfig::default()).unwrap();
        let d = prob.solve_dense(Horizon::new(10).unwrap()).unwrap();
        let k = econ.fixed_cost;
        let x0 = crate::model::zero_profit_level(&econ);
        for n in 1..=10 {
            assert_eq!(d.threshold_violations(n), 0, "stage {n}");
            let c = d.values.stage(n);
            assert!(is_nondecreasing(c, monotone_tolerance(c)));
            let r = check_k_concave_fast(&d.p_function(n), k, 1e-6 * k).unwrap();
            assert!(r.is_k_concave, "stage {n}: {r:?}");
            let t = d.schedule.remaining(n).unwrap();
            assert!(t.target <= t.trigger);
            assert!(t.target >= x0 - grid.step);
        }
    }

    #[test]
    fn piecewise_value_identity() {
        let (bio, econ, grid) = small_problem();
        let prob = HarvestProblem::new(&bio, &econ, &grid, SolverConfig::default()).unwrap();
        let d = prob.solve_dense(Horizon::new(6).unwrap()).unwrap();
        let r = prob.revenue_nodes();
        let k = econ.fixed_cost;
        for n in 1..=6 {
            let t = d.schedule.remaining(n).unwrap();
            let p = &d.p_values[n - 1];
            let ps = p[(t.target / grid.step).round() as usize];
            for i in prob.first_target()..grid.len() {
                let expect = if grid.node(i) <= t.trigger {
                    p[i] + r[i]
                } else {
                    ps + r[i] - k
                };
                let got = d.values.stage(n)[i];
                assert!((got - expect).abs() <= 1e-9 * expect.abs().max(1e6));
            }
        }
    }

    #[test]
    fn rolling_action_below_trigger_is_zero() {
        let (bio, econ, grid) = small_problem();
        let prob = HarvestProblem::new(&bio, &econ, &grid, SolverConfig::default()).unwrap();
        assert_eq!(prob.rolling_horizon_action(10.0, Horizon::new(5).unwrap()).unwrap(), 0.0);
        assert!(prob.rolling_horizon_action(-1.0, Horizon::new(5).unwrap()).is_err());
        let f = prob.solve_fast(Horizon::new(5).unwrap()).unwrap();
        let t = f.schedule.for_year(1).unwrap();
        let x = grid.top();
        let h = prob.rolling_horizon_action(x, Horizon::new(5).unwrap()).unwrap();
        assert_eq!(h, x - t.target);
    }

    #[test]
    fn schedule_indexing() {
        let a = Thresholds { target: 1.0, trigger: 2.0 };
        let b = Thresholds { target: 3.0, trigger: 4.0 };
        let s = ThresholdSchedule::from_remaining(vec![a, b]);
        assert_eq!(s.remaining(1), Some(a));
        assert_eq!(s.for_year(1), Some(b));
        assert_eq!(s.for_year(2), Some(a));
        assert_eq!(s.for_year(3), None);
        assert_eq!(s.remaining(0), None);
    }
}
