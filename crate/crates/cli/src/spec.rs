//! Parsing of `--policy` and `--shocks` arguments.

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    Optimal,
    Cpp(f64),
    Rolling(usize),
    Zero,
    Sequence(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ShockSpec {
    Worst,
    Constant(f64),
    Sequence(Vec<f64>),
}

fn numbers(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("not a number: {t:?}"))
        })
        .collect()
}

pub fn parse_policy(text: &str) -> Result<PolicySpec> {
    let (kind, arg) = match text.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (text, None),
    };
    let need = || arg.ok_or_else(|| anyhow!("policy {kind:?} needs an argument, e.g. {kind}:..."));
    Ok(match kind {
        "optimal" => PolicySpec::Optimal,
        "zero" => PolicySpec::Zero,
        "cpp" => PolicySpec::Cpp(need()?.parse().context("cpp rate")?),
        "rolling" => PolicySpec::Rolling(need()?.parse().context("rolling lookahead")?),
        "sequence" => PolicySpec::Sequence(numbers(need()?)?),
        other => bail!("unknown policy {other:?} (expected optimal, cpp:A, rolling:N, zero or sequence:F1,F2,...)"),
    })
}

pub fn parse_shocks(text: &str) -> Result<ShockSpec> {
    let (kind, arg) = match text.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (text, None),
    };
    let need = || arg.ok_or_else(|| anyhow!("shock rule {kind:?} needs an argument"));
    Ok(match kind {
        "worst" => ShockSpec::Worst,
        "constant" => ShockSpec::Constant(need()?.parse().context("constant shock")?),
        "sequence" => ShockSpec::Sequence(numbers(need()?)?),
        other => bail!("unknown shock rule {other:?} (expected worst, constant:W or sequence:W1,W2,...)"),
    })
}
