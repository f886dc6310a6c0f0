//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any criterion fails.
//!
//! Run with `cargo test -p ssharvest --test acceptance`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ssharvest::calibrate::{
    estimate_shock_support, fit_effort, fit_recruitment, synthetic_series, FitBounds, ShockDraw,
    SyntheticSpec,
};
use ssharvest::evaluate::{simulate, worst_case_value, Policy, ShockRule};
use ssharvest::kconcave::{check_k_concave, check_k_concave_fast};
use ssharvest::model::{harvest_utility, BioModel, EconModel, Grid, Horizon, Reproduction};
use ssharvest::solver::{DenseSolution, HarvestProblem, SolverConfig};

const X1: f64 = 90.989;
const N: usize = 33;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

struct Table1 {
    bio: BioModel,
    econ: EconModel,
    grid: Grid,
    dense: DenseSolution,
}

impl Table1 {
    fn solve() -> Self {
        let bio = BioModel::table1();
        let econ = EconModel::table1();
        let grid = Grid::for_model(&bio, 0.25).unwrap();
        let problem = HarvestProblem::new(&bio, &econ, &grid, SolverConfig::default()).unwrap();
        let dense = problem.solve_dense(Horizon::new(N).unwrap()).unwrap();
        Table1 {
            bio,
            econ,
            grid,
            dense,
        }
    }

    fn problem(&self) -> HarvestProblem<'_, BioModel> {
        HarvestProblem::new(&self.bio, &self.econ, &self.grid, SolverConfig::default()).unwrap()
    }
}

fn criterion_1(t1: &Table1) -> Outcome {
    let started = Instant::now();
    let fast = t1.problem().solve_fast(Horizon::new(N).unwrap()).unwrap();
    let fast_secs = started.elapsed().as_secs_f64();
    let d = t1.dense.schedule.for_year(1).unwrap();
    let f = fast.schedule.for_year(1).unwrap();
    let ok = |t: ssharvest::Thresholds| (t.target - 133.0).abs() <= 1.0 && (t.trigger - 176.75).abs() <= 0.25;
    outcome(
        ok(d) && ok(f),
        format!(
            "first-year S = {} s = {} (dense, {:.2}s), S = {} s = {} (fast, {:.2}s); want 133 +/- 1, 176.75 +/- 0.25",
            d.target,
            d.trigger,
            t1.dense.stats.total_seconds(),
            f.target,
            f.trigger,
            fast_secs
        ),
    )
}

fn criterion_2(t1: &Table1) -> Outcome {
    let problem = t1.problem();
    let years = Horizon::new(N).unwrap();
    let optimal = Policy::Threshold(t1.dense.schedule.clone());
    let cpp = Policy::Proportional { rate: 0.1277 };
    let rolling = Policy::rolling_horizon(&problem, years).unwrap();
    let rows = [
        ("optimal S-s", optimal, 9.05141e8),
        ("CPP a=0.1277", cpp, 6.51849e8),
        ("rolling horizon", rolling, 8.73605e8),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, policy, reference) in rows {
        let v = worst_case_value(&policy, X1, years, &problem).unwrap();
        let greedy = simulate(&policy, X1, years, &ShockRule::WorstGreedy, &problem)
            .unwrap()
            .total;
        let err = (v - reference) / reference;
        let ok = err.abs() <= 0.01;
        pass &= ok;
        parts.push(format!(
            "{name}: {v:.6e} (lowest-shock path {greedy:.6e}) vs {reference:.6e}, {:+.2}% {}",
            100.0 * err,
            if ok { "ok" } else { "OUT" }
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_3(t1: &Table1) -> Outcome {
    let k = t1.econ.fixed_cost;
    let tol = 1e-6 * k;
    let mut failures = Vec::new();
    let mut worst_full = f64::NEG_INFINITY;
    let mut worst_sub = f64::NEG_INFINITY;
    for n in 1..=N {
        let p = t1.dense.p_function(n);
        let full = check_k_concave_fast(&p, k, tol).unwrap();
        let sub = check_k_concave(&p.subsample(4), k, tol).unwrap();
        worst_full = worst_full.max(full.worst_slack);
        worst_sub = worst_sub.max(sub.worst_slack);
        if !full.is_k_concave || !sub.is_k_concave {
            failures.push(format!("P_{n} not K-concave"));
        }
        let c = t1.dense.values.stage(n);
        if c.windows(2).any(|w| w[1] < w[0]) {
            failures.push(format!("C_{n} decreasing"));
        }
        let v = t1.dense.threshold_violations(n);
        if v > 0 {
            failures.push(format!("stage {n}: {v} nodes off the (S, s) rule"));
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{N} stages; worst slack {worst_full:.3e} (all nodes, O(n^2)), {worst_sub:.3e} (every 4th node, exhaustive); {}",
            if failures.is_empty() { "no violations".to_string() } else { failures.join(", ") }
        ),
    )
}

fn compare_solvers(bio: &BioModel, econ: &EconModel, grid: &Grid) -> Result<f64, String> {
    let problem = HarvestProblem::new(bio, econ, grid, SolverConfig::default()).unwrap();
    let h = Horizon::new(N).unwrap();
    let d = problem.solve_dense(h).map_err(|e| e.to_string())?;
    let f = problem.solve_fast(h).map_err(|e| e.to_string())?;
    if d.schedule != f.schedule {
        return Err("threshold schedules differ".into());
    }
    let mut worst: f64 = 0.0;
    for n in 0..=N {
        for (a, b) in d.values.stage(n).iter().zip(f.values.stage(n)) {
            let r = (a - b).abs() / a.abs().max(b.abs()).max(1.0);
            worst = worst.max(r);
        }
    }
    if worst > 1e-8 {
        return Err(format!("values differ by {worst:.3e}"));
    }
    Ok(worst)
}

fn random_model(rng: &mut ChaCha8Rng) -> (BioModel, EconModel) {
    let base_bio = BioModel::table1();
    let base_econ = EconModel::table1();
    loop {
        let mut j = |v: f64| v * rng.gen_range(0.7..1.3);
        let bio = BioModel {
            mortality: j(base_bio.mortality),
            r0: j(base_bio.r0),
            half_saturation: j(base_bio.half_saturation),
            shock_lo: j(base_bio.shock_lo),
            shock_hi: j(base_bio.shock_hi),
        };
        let econ = EconModel {
            price: j(base_econ.price),
            fixed_cost: j(base_econ.fixed_cost),
            effort_cost: j(base_econ.effort_cost),
            catchability: j(base_econ.catchability),
            elasticity: j(base_econ.elasticity),
            discount_rate: j(base_econ.discount_rate),
        };
        if bio.validate().is_ok() && econ.validate().is_ok() {
            return (bio, econ);
        }
    }
}

fn criterion_4(t1: &Table1) -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    match compare_solvers(&t1.bio, &t1.econ, &t1.grid) {
        Ok(w) => parts.push(format!("table 1: identical schedules, max rel diff {w:.1e}")),
        Err(e) => {
            pass = false;
            parts.push(format!("table 1: {e}"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_404);
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for i in 0..20 {
        let (bio, econ) = random_model(&mut rng);
        let grid = Grid::for_model(&bio, 0.5).unwrap();
        match compare_solvers(&bio, &econ, &grid) {
            Ok(w) => worst = worst.max(w),
            Err(e) => bad.push(format!("model {i}: {e}")),
        }
    }
    pass &= bad.is_empty();
    parts.push(if bad.is_empty() {
        format!("20 random models: identical schedules, max rel diff {worst:.1e}")
    } else {
        bad.join(", ")
    });
    outcome(pass, parts.join("; "))
}

/// Toy dynamics on nodes 0..=4: escapement plus the shock, capped at 4.
struct Toy;

impl Reproduction for Toy {
    fn next_stock(&self, escapement: f64, shock: f64) -> f64 {
        (escapement + shock).min(4.0)
    }
    fn shock_support(&self) -> (f64, f64) {
        (1.0, 2.0)
    }
}

fn toy_econ() -> EconModel {
    EconModel::new(10.0, 3.0, 1.0, 1.0, 0.5, 0.1).unwrap()
}

/// Exhaustive game tree: manager picks any node target, nature any shock.
fn brute_force(x: f64, periods: usize, grid: &Grid, econ: &EconModel) -> (f64, f64) {
    if periods == 0 {
        return (0.0, x);
    }
    let alpha = econ.discount_factor();
    let mut best = (f64::NEG_INFINITY, x);
    for i in 0..grid.len() {
        let z = grid.node(i);
        if z > x {
            break;
        }
        let u = harvest_utility(x, x - z, grid, econ).unwrap();
        let worst = [1.0, 2.0]
            .iter()
            .map(|&w| brute_force(Toy.next_stock(z, w), periods - 1, grid, econ).0)
            .fold(f64::INFINITY, f64::min);
        let v = u + alpha * worst;
        if v >= best.0 {
            best = (v, z);
        }
    }
    best
}

fn criterion_5() -> Outcome {
    let econ = toy_econ();
    let grid = Grid::new(4.0, 1.0).unwrap();
    let config = SolverConfig {
        interior_shocks: 0,
        monotone_shortcut: false,
    };
    let problem = HarvestProblem::new(&Toy, &econ, &grid, config).unwrap();
    let sol = problem.solve_dense(Horizon::new(2).unwrap()).unwrap();
    let fast = problem.solve_fast(Horizon::new(2).unwrap()).unwrap();
    let mut worst: f64 = 0.0;
    let mut policy_ok = true;
    for n in 1..=2 {
        for i in 0..grid.len() {
            let x = grid.node(i);
            let (v, z) = brute_force(x, n, &grid, &econ);
            let got = sol.values.stage(n)[i];
            worst = worst.max((got - v).abs() / v.abs().max(1.0));
            worst = worst.max((fast.values.stage(n)[i] - v).abs() / v.abs().max(1.0));
            policy_ok &= grid.node(sol.policy.target(n, i)) == z;
        }
    }
    outcome(
        policy_ok && worst <= 1e-12,
        format!("5 nodes x 2 periods x 2 shocks: policy {}, max rel value diff {worst:.1e}",
            if policy_ok { "identical" } else { "DIFFERS" }),
    )
}

fn criterion_6(t1: &Table1) -> Outcome {
    let problem = t1.problem();
    let policy = Policy::Threshold(t1.dense.schedule.clone());
    let tr = simulate(&policy, X1, Horizon::new(N).unwrap(), &ShockRule::WorstGreedy, &problem).unwrap();
    let h = tr.harvests();
    let mut pulse = false;
    let mut run = 0;
    for &v in &h {
        if v == 0.0 {
            run += 1;
        } else {
            if run >= 2 {
                pulse = true;
            }
            run = 0;
        }
    }
    let last = tr.years.last().unwrap().discounted_utility;
    let share = last / tr.total;
    let pattern: String = h.iter().map(|&v| if v > 0.0 { 'H' } else { '.' }).collect();
    outcome(
        pulse && share < 0.10,
        format!("harvest pattern {pattern}; final-year share {:.2}%", 100.0 * share),
    )
}

fn criterion_7() -> Outcome {
    let bio = BioModel::table1();
    let econ = EconModel::table1();
    let clean = synthetic_series(&bio, &econ, &SyntheticSpec::default());
    let rec = fit_recruitment(&clean, bio.mortality, &FitBounds::default()).unwrap();
    let eff = fit_effort(&clean, &FitBounds::default()).unwrap();
    let r0_err = rel(rec.params.r0, bio.r0);
    let m_err = rel(rec.params.half_saturation, bio.half_saturation);
    let q_err = rel(eff.params.catchability, econ.catchability);
    let b_err = rel(eff.params.elasticity, econ.elasticity);
    let two_point = synthetic_series(
        &bio,
        &econ,
        &SyntheticSpec {
            shocks: ShockDraw::Endpoints,
            ..SyntheticSpec::default()
        },
    );
    let support = estimate_shock_support(&two_point, &bio).unwrap();
    let support_ok = (support.lo - 0.89).abs() <= 1e-12 && (support.hi - 1.06).abs() <= 1e-12;
    outcome(
        r0_err <= 1e-6 && m_err <= 1e-6 && q_err <= 1e-4 && b_err <= 1e-4 && support_ok,
        format!(
            "r0 {r0_err:.1e}, M {m_err:.1e}, q {q_err:.1e}, b {b_err:.1e}; support [{}, {}]",
            support.lo, support.hi
        ),
    )
}

fn fit_through_origin(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let c = xs.iter().zip(ys).map(|(x, y)| x * y).sum::<f64>() / xs.iter().map(|x| x * x).sum::<f64>();
    let worst = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - c * x).abs() / y)
        .fold(0.0, f64::max);
    (c, worst)
}

fn criterion_8() -> Outcome {
    let bio = BioModel::table1();
    let econ = EconModel::table1();
    let mut log_nodes = Vec::new();
    let mut nodes = Vec::new();
    let mut bisection = Vec::new();
    let mut dense_work = Vec::new();
    for step in [1.0, 0.5, 0.25, 0.125] {
        let grid = Grid::for_model(&bio, step).unwrap();
        let problem = HarvestProblem::new(&bio, &econ, &grid, SolverConfig::default()).unwrap();
        let h = Horizon::new(N).unwrap();
        let fast = problem.solve_fast(h).unwrap();
        let dense = problem.solve_dense(h).unwrap();
        let mean = |v: Vec<u64>| v.iter().sum::<u64>() as f64 / v.len() as f64;
        bisection.push(mean(fast.stats.stages.iter().map(|s| s.bisection_interpolations).collect()));
        dense_work.push(mean(dense.stats.stages.iter().map(|s| s.interpolations).collect()));
        nodes.push(grid.len() as f64);
        log_nodes.push((grid.len() as f64).ln());
    }
    let (_, log_resid) = fit_through_origin(&log_nodes, &bisection);
    let (_, lin_resid) = fit_through_origin(&nodes, &dense_work);
    outcome(
        log_resid < 0.2 && lin_resid < 0.2,
        format!(
            "|X| {:?}; bisection interpolations/stage {:?} (c log|X| residual {:.1}%); dense interpolations/stage {:?} (c |X| residual {:.1}%)",
            nodes,
            bisection,
            100.0 * log_resid,
            dense_work,
            100.0 * lin_resid
        ),
    )
}

fn criterion_9() -> Outcome {
    let bio = BioModel::table1();
    let econ = EconModel::table1();
    let probes: Vec<f64> = (0..20).map(|i| 10.0 + 540.0 * i as f64 / 19.0).collect();
    let mut curves = Vec::new();
    for step in [1.0, 0.5, 0.25] {
        let grid = Grid::for_model(&bio, step).unwrap();
        let problem = HarvestProblem::new(&bio, &econ, &grid, SolverConfig::default()).unwrap();
        let sol = problem.solve_fast(Horizon::new(N).unwrap()).unwrap();
        curves.push(probes.iter().map(|&x| sol.values.interpolate(N, x)).collect::<Vec<_>>());
    }
    let dev = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let d1 = dev(&curves[0], &curves[1]);
    let d2 = dev(&curves[1], &curves[2]);
    outcome(
        d2 < d1,
        format!("max |C_N| deviation 1.0->0.5: {d1:.4e}, 0.5->0.25: {d2:.4e}"),
    )
}

fn main() {
    let started = Instant::now();
    let t1 = Table1::solve();
    type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("1 threshold reproduction", Box::new(|| criterion_1(&t1))),
        ("2 policy comparison", Box::new(|| criterion_2(&t1))),
        ("3 K-concavity / monotonicity / (S, s) structure", Box::new(|| criterion_3(&t1))),
        ("4 dense = fast", Box::new(|| criterion_4(&t1))),
        ("5 brute-force oracle", Box::new(criterion_5)),
        ("6 pulsing and final-year share", Box::new(|| criterion_6(&t1))),
        ("7 calibration round trips", Box::new(criterion_7)),
        ("8 fast-solver scaling", Box::new(criterion_8)),
        ("9 consistency under refinement", Box::new(criterion_9)),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        let t = Instant::now();
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "[{}] criterion {name} ({:.1}s): {}",
            if o.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed ({:.1}s)",
        criteria.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
