use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ssharvest::calibrate::{
    estimate_shock_support, fit_effort, fit_recruitment, load_series, FitBounds,
};
use ssharvest::config::ModelConfig;
use ssharvest::evaluate::{compare, simulate, standard_policies, Policy, ShockRule};
use ssharvest::kconcave::{
    check_k_concave, check_k_concave_fast, cost_condition, default_tolerance, SampledFunction,
};
use ssharvest::model::{zero_profit_level, BioModel, Horizon};
use ssharvest::solver::{HarvestProblem, SolverStats, ThresholdSchedule, ValueTable};

mod output;
mod spec;

use output::OutDir;
use spec::{parse_policy, parse_shocks, PolicySpec, ShockSpec};

/// Worst-case optimal (S, s) harvesting for a stochastic fishery.
#[derive(Debug, Parser)]
#[command(name = "ssharvest", version)]
struct Cli {
    /// Directory for output files.
    #[arg(long, global = true, env = "SSHARVEST_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Calibrate recruitment and effort parameters from a time series.
    Fit(FitArgs),
    /// Solve for the optimal threshold schedule.
    Solve(SolveArgs),
    /// Simulate one policy under a shock rule.
    Simulate(SimulateArgs),
    /// Compare the optimal, proportional and rolling-horizon policies.
    Compare(CompareArgs),
    /// Test sampled values for K-concavity.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    Table1,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Model configuration JSON.
    model: Option<PathBuf>,
    /// Use a built-in parameter set instead of a model file.
    #[arg(long, value_enum, conflicts_with = "model")]
    params: Option<Preset>,
    /// Grid spacing override (10^6 lb).
    #[arg(long)]
    grid_step: Option<f64>,
    /// Grid upper bound override (10^6 lb).
    #[arg(long)]
    x_max: Option<f64>,
    /// Planning horizon override (years).
    #[arg(long)]
    horizon: Option<usize>,
}

impl ModelArgs {
    fn load(&self) -> Result<ModelConfig> {
        let mut cfg = match (&self.model, self.params) {
            (Some(path), _) => ModelConfig::load(path)
                .with_context(|| format!("loading model {}", path.display()))?,
            (None, Some(Preset::Table1)) => ModelConfig::table1(),
            (None, None) => bail!("no model given: pass a model JSON file or --params table1"),
        };
        if let Some(step) = self.grid_step {
            cfg.grid.step = step;
        }
        if self.x_max.is_some() {
            cfg.grid.x_max = self.x_max;
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct FitArgs {
    /// CSV with columns year,biomass,harvest,effort.
    series: PathBuf,
    /// Natural mortality, held fixed during the fit.
    #[arg(short = 'm', long)]
    mortality: f64,
    /// Model whose remaining fields (prices, costs, shocks, grid) are kept.
    #[arg(long)]
    base: Option<PathBuf>,
    /// Replace the shock support with the range of implied shocks.
    #[arg(long)]
    estimate_shocks: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
enum SolverChoice {
    Dense,
    Fast,
    Both,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value = "fast")]
    solver: SolverChoice,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// optimal | cpp:A | rolling:N | zero | sequence:F1,F2,...
    #[arg(long, default_value = "optimal")]
    policy: String,
    /// Initial stock; defaults to the model's x1.
    #[arg(long)]
    x1: Option<f64>,
    /// worst | constant:W | sequence:W1,W2,...
    #[arg(long, default_value = "worst")]
    shocks: String,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    x1: Option<f64>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    /// CSV with columns x,value on an increasing grid.
    samples: PathBuf,
    #[arg(long)]
    k: f64,
    /// Slack allowed before a triple counts as a violation.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Enumerate every triple instead of the quadratic exact check.
    #[arg(long)]
    exhaustive: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for numerical failures, 1 for everything caused by the inputs.
fn exit_code(e: &anyhow::Error) -> u8 {
    let numerical = e
        .chain()
        .filter_map(|c| c.downcast_ref::<ssharvest::Error>())
        .any(|c| c.is_numerical());
    if numerical {
        2
    } else {
        1
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut out = OutDir::create(&cli.out_dir)?;
    match cli.command {
        Command::Fit(a) => fit(a, &mut out)?,
        Command::Solve(a) => solve(a, &mut out)?,
        Command::Simulate(a) => run_simulation(a, &mut out)?,
        Command::Compare(a) => run_comparison(a, &mut out)?,
        Command::Check(a) => check(a, &mut out)?,
    }
    for path in out.written() {
        println!("wrote {}", path.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct ResidualRow {
    equation: &'static str,
    index: usize,
    residual: f64,
}

#[derive(Serialize)]
struct FitReport<'a> {
    series: String,
    records: usize,
    mortality: f64,
    recruitment: &'a ssharvest::calibrate::FitResult<ssharvest::calibrate::RecruitmentParams>,
    effort: &'a ssharvest::calibrate::FitResult<ssharvest::calibrate::EffortParams>,
    shock_support: &'a ssharvest::calibrate::ShockSupport,
    shocks_replaced: bool,
}

fn fit(a: FitArgs, out: &mut OutDir) -> Result<()> {
    let series = load_series(&a.series).with_context(|| format!("reading {}", a.series.display()))?;
    let mut cfg = match &a.base {
        Some(p) => ModelConfig::load(p).with_context(|| format!("loading base model {}", p.display()))?,
        None => ModelConfig::table1(),
    };
    let bounds = FitBounds::default();
    let rec = fit_recruitment(&series, a.mortality, &bounds)?;
    let eff = fit_effort(&series, &bounds)?;
    cfg.bio = BioModel {
        mortality: a.mortality,
        r0: rec.params.r0,
        half_saturation: rec.params.half_saturation,
        ..cfg.bio
    };
    cfg.econ.catchability = eff.params.catchability;
    cfg.econ.elasticity = eff.params.elasticity;
    let support = estimate_shock_support(&series, &cfg.bio)?;
    if a.estimate_shocks {
        cfg.bio.shock_lo = support.lo;
        cfg.bio.shock_hi = support.hi;
    }
    cfg.validate().context("fitted model is not admissible")?;

    out.json("fitted_model.json", &cfg)?;
    out.json(
        "fit_report.json",
        &FitReport {
            series: a.series.display().to_string(),
            records: series.len(),
            mortality: a.mortality,
            recruitment: &rec,
            effort: &eff,
            shock_support: &support,
            shocks_replaced: a.estimate_shocks,
        },
    )?;
    let rows = rec
        .residuals
        .iter()
        .enumerate()
        .map(|(i, &r)| ResidualRow { equation: "recruitment", index: i, residual: r })
        .chain(
            eff.residuals
                .iter()
                .enumerate()
                .map(|(i, &r)| ResidualRow { equation: "effort", index: i, residual: r }),
        );
    out.csv("fit_residuals.csv", rows)?;
    println!(
        "r0 = {}, M = {}, q = {}, b = {} (rmse {} / {})",
        rec.params.r0, rec.params.half_saturation, eff.params.catchability, eff.params.elasticity, rec.rmse, eff.rmse
    );
    Ok(())
}

#[derive(Serialize)]
struct ThresholdRow {
    stage: usize,
    #[serde(rename = "S")]
    target: f64,
    s: f64,
}

#[derive(Serialize)]
struct ValueRow {
    periods_remaining: usize,
    x: f64,
    value: f64,
}

#[derive(Serialize)]
struct SolverReport {
    stats: SolverStats,
    /// Periods remaining of stages solved by linear scan.
    #[serde(skip_serializing_if = "Option::is_none")]
    flagged_stages: Option<Vec<usize>>,
}

#[derive(Serialize)]
struct SolveReport {
    solver: String,
    horizon: usize,
    grid: ssharvest::Grid,
    nodes: usize,
    shocks: Vec<f64>,
    zero_profit_stock: f64,
    cost_condition: ssharvest::kconcave::CostConditionReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    dense: Option<SolverReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fast: Option<SolverReport>,
}

fn threshold_rows(schedule: &ThresholdSchedule) -> Vec<ThresholdRow> {
    schedule
        .by_year()
        .map(|(t, th)| ThresholdRow { stage: t, target: th.target, s: th.trigger })
        .collect()
}

fn value_rows(values: &ValueTable) -> Vec<ValueRow> {
    let grid = values.grid();
    (0..=values.horizon())
        .flat_map(|n| {
            values.stage(n).iter().enumerate().map(move |(i, &v)| ValueRow {
                periods_remaining: n,
                x: grid.node(i),
                value: v,
            })
        })
        .collect()
}

/// First stage and node where two value tables differ.
fn first_mismatch(a: &ValueTable, b: &ValueTable) -> Option<(usize, usize, f64, f64)> {
    for n in 0..=a.horizon() {
        for (i, (x, y)) in a.stage(n).iter().zip(b.stage(n)).enumerate() {
            if (x - y).abs() > 1e-8 * x.abs().max(y.abs()).max(1.0) {
                return Some((n, i, *x, *y));
            }
        }
    }
    None
}

fn solve(a: SolveArgs, out: &mut OutDir) -> Result<()> {
    let cfg = a.model.load()?;
    let grid = cfg.grid()?;
    let horizon = cfg.horizon()?;
    let problem = HarvestProblem::new(&cfg.bio, &cfg.econ, &grid, cfg.solver)?;

    let dense = match a.solver {
        SolverChoice::Dense | SolverChoice::Both => Some(problem.solve_dense(horizon)?),
        SolverChoice::Fast => None,
    };
    let fast = match a.solver {
        SolverChoice::Fast | SolverChoice::Both => Some(problem.solve_fast(horizon)?),
        SolverChoice::Dense => None,
    };
    if let (Some(d), Some(f)) = (&dense, &fast) {
        if let Some((n, i, x, y)) = first_mismatch(&d.values, &f.values) {
            return Err(ssharvest::Error::Numerical {
                stage: n,
                node: i,
                detail: format!("dense and fast solvers disagree ({x} vs {y})"),
            }
            .into());
        }
        if d.schedule != f.schedule {
            bail!(ssharvest::Error::Numerical {
                stage: 0,
                node: 0,
                detail: "dense and fast solvers produced different thresholds".into(),
            });
        }
    }
    let (schedule, values) = match (&dense, &fast) {
        (Some(d), _) => (&d.schedule, &d.values),
        (None, Some(f)) => (&f.schedule, &f.values),
        (None, None) => unreachable!("at least one solver runs"),
    };

    out.csv("thresholds.csv", threshold_rows(schedule))?;
    out.csv("values.csv", value_rows(values))?;
    let report = SolveReport {
        solver: format!("{:?}", a.solver).to_lowercase(),
        horizon: horizon.periods(),
        grid,
        nodes: grid.len(),
        shocks: problem.shocks().to_vec(),
        zero_profit_stock: zero_profit_level(&cfg.econ),
        cost_condition: cost_condition(&cfg.econ, &grid),
        dense: dense.as_ref().map(|d| SolverReport { stats: d.stats.clone(), flagged_stages: None }),
        fast: fast.as_ref().map(|f| SolverReport {
            stats: f.stats.clone(),
            flagged_stages: Some(f.flagged_stages.clone()),
        }),
    };
    out.json("solve_stats.json", &report)?;
    let first = schedule.for_year(1).expect("nonempty schedule");
    println!("year 1: S = {}, s = {}", first.target, first.trigger);
    Ok(())
}

fn build_policy<F: ssharvest::Reproduction>(
    spec: &PolicySpec,
    problem: &HarvestProblem<'_, F>,
    horizon: Horizon,
) -> Result<Policy> {
    Ok(match spec {
        PolicySpec::Optimal => Policy::Threshold(problem.solve_fast(horizon)?.schedule),
        PolicySpec::Cpp(rate) => Policy::Proportional { rate: *rate },
        PolicySpec::Rolling(n) => Policy::rolling_horizon(problem, Horizon::new(*n)?)?,
        PolicySpec::Zero => Policy::never_harvest(),
        PolicySpec::Sequence(f) => Policy::Sequence { fractions: f.clone() },
    })
}

fn run_simulation(a: SimulateArgs, out: &mut OutDir) -> Result<()> {
    let policy_spec = parse_policy(&a.policy)?;
    let shock_spec = parse_shocks(&a.shocks)?;
    let cfg = a.model.load()?;
    let grid = cfg.grid()?;
    let horizon = cfg.horizon()?;
    let problem = HarvestProblem::new(&cfg.bio, &cfg.econ, &grid, cfg.solver)?;
    let policy = build_policy(&policy_spec, &problem, horizon)?;
    let rule = match shock_spec {
        ShockSpec::Worst => ShockRule::WorstGreedy,
        ShockSpec::Constant(w) => ShockRule::Constant(w),
        ShockSpec::Sequence(s) => ShockRule::Given(s),
    };
    let x1 = a.x1.unwrap_or(cfg.x1);
    let tr = simulate(&policy, x1, horizon, &rule, &problem)?;
    out.csv("trajectory.csv", &tr.years)?;
    println!("discounted revenue {}", tr.total);
    Ok(())
}

#[derive(Serialize)]
struct ComparisonReport<'a> {
    #[serde(flatten)]
    comparison: &'a ssharvest::evaluate::Comparison,
    note: &'static str,
}

fn run_comparison(a: CompareArgs, out: &mut OutDir) -> Result<()> {
    let cfg = a.model.load()?;
    let grid = cfg.grid()?;
    let horizon = cfg.horizon()?;
    let problem = HarvestProblem::new(&cfg.bio, &cfg.econ, &grid, cfg.solver)?;
    let policies = standard_policies(&problem, horizon, cfg.cpp_rate)?;
    let x1 = a.x1.unwrap_or(cfg.x1);
    let cmp = compare(&policies, x1, horizon, &problem)?;
    out.csv("comparison.csv", &cmp.rows)?;
    out.json(
        "comparison.json",
        &ComparisonReport {
            comparison: &cmp,
            note: "worst_case_revenue is the exact adversarial value over the discretized shock \
                   support; worst_greedy_revenue applies the lowest shock every year. The rolling \
                   horizon policy re-solves a fixed-lookahead problem each year and applies its \
                   first action.",
        },
    )?;
    for r in &cmp.rows {
        println!("{:<24} {:>16.6e} {:>16.6e} {:>14.6e}", r.policy, r.worst_case_revenue, r.worst_greedy_revenue, r.loss);
    }
    Ok(())
}

#[derive(serde::Deserialize)]
struct Sample {
    x: f64,
    value: f64,
}

fn check(a: CheckArgs, out: &mut OutDir) -> Result<()> {
    let mut reader = csv::Reader::from_path(&a.samples)
        .with_context(|| format!("reading {}", a.samples.display()))?;
    let mut nodes = Vec::new();
    let mut values = Vec::new();
    for (i, row) in reader.deserialize::<Sample>().enumerate() {
        let row = row.with_context(|| format!("{}: row {}", a.samples.display(), i + 1))?;
        nodes.push(row.x);
        values.push(row.value);
    }
    let f = SampledFunction::new(nodes, values)?;
    let tol = a.tolerance.unwrap_or_else(|| default_tolerance(a.k));
    let report = if a.exhaustive {
        check_k_concave(&f, a.k, tol)?
    } else {
        check_k_concave_fast(&f, a.k, tol)?
    };
    let path = out.json("concavity.json", &report)?;
    println!("{}", std::fs::read_to_string(path)?.trim_end());
    Ok(())
}
