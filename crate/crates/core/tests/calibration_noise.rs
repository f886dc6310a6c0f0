//! Monte-Carlo round trips of the calibration routines on noisy synthetic
//! data.
//!
//! The series start from a depleted stock so the 33 years span a rebuilding
//! phase. Near equilibrium the escapements barely move and `q` trades off
//! almost one for one against `b` (relative error in `q` is roughly
//! `ln(x) * error in b`), so a flat series says little about either.

use ssharvest::calibrate::{
    estimate_shock_support, fit_effort, fit_recruitment, synthetic_series, FitBounds, SyntheticSpec,
};
use ssharvest::model::{BioModel, EconModel, Reproduction};

const SEEDS: u64 = 100;
const DEPLETED_X1: f64 = 50.0;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn noisy(seed: u64, transition_noise: f64, effort_noise: f64) -> Vec<ssharvest::calibrate::FisheryRecord> {
    let spec = SyntheticSpec {
        transition_noise,
        effort_noise,
        x1: DEPLETED_X1,
        seed,
        ..SyntheticSpec::default()
    };
    synthetic_series(&BioModel::table1(), &EconModel::table1(), &spec)
}

#[test]
fn recruitment_recovered_under_five_percent_noise() {
    let bio = BioModel::table1();
    let mut r0_err = Vec::new();
    let mut m_err = Vec::new();
    let mut scaled_rmse = Vec::new();
    for seed in 0..SEEDS {
        let series = noisy(seed, 0.05, 0.0);
        let fit = fit_recruitment(&series, bio.mortality, &FitBounds::default()).unwrap();
        r0_err.push(rel(fit.params.r0, bio.r0));
        m_err.push(rel(fit.params.half_saturation, bio.half_saturation));
        // Noise multiplies recruitment, so compare against mean recruitment.
        let recruits: f64 = series
            .windows(2)
            .map(|w| w[1].biomass - (1.0 - bio.mortality) * w[0].escapement())
            .sum::<f64>()
            / (series.len() - 1) as f64;
        scaled_rmse.push(fit.rmse / recruits);
    }
    let (r0, m, noise) = (median(r0_err), median(m_err), median(scaled_rmse));
    assert!(r0 <= 0.10, "median r0 error {r0}");
    assert!(m <= 0.10, "median M error {m}");
    // Residual scale tracks the 5% noise level.
    assert!((0.025..=0.075).contains(&noise), "median rmse / mean recruitment {noise}");
}

#[test]
fn effort_recovered_under_five_percent_noise() {
    let econ = EconModel::table1();
    let mut q_err = Vec::new();
    let mut b_err = Vec::new();
    for seed in 0..SEEDS {
        let series = noisy(seed, 0.0, 0.05);
        let fit = fit_effort(&series, &FitBounds::default()).unwrap();
        q_err.push(rel(fit.params.catchability, econ.catchability));
        b_err.push(rel(fit.params.elasticity, econ.elasticity));
    }
    let (q, b) = (median(q_err), median(b_err));
    assert!(q <= 0.15, "median q error {q}");
    assert!(b <= 0.05, "median b error {b}");
}

#[test]
fn implied_shocks_of_converged_fit_bracket_one() {
    let bio = BioModel::table1();
    for seed in 0..SEEDS {
        let series = noisy(seed, 0.05, 0.0);
        let fit = fit_recruitment(&series, bio.mortality, &FitBounds::default()).unwrap();
        if !fit.converged {
            continue;
        }
        let fitted = BioModel {
            r0: fit.params.r0,
            half_saturation: fit.params.half_saturation,
            ..bio
        };
        let support = estimate_shock_support(&series, &fitted).unwrap();
        assert!(support.lo <= 1.0 && support.hi >= 1.0, "seed {seed}: [{}, {}]", support.lo, support.hi);
    }
}

#[test]
fn regenerated_one_step_predictions_match_fit_rmse() {
    let bio = BioModel::table1();
    for seed in [3, 17, 42] {
        let series = noisy(seed, 0.05, 0.0);
        let fit = fit_recruitment(&series, bio.mortality, &FitBounds::default()).unwrap();
        let fitted = BioModel {
            r0: fit.params.r0,
            half_saturation: fit.params.half_saturation,
            ..bio
        };
        let sq: Vec<f64> = series
            .windows(2)
            .map(|w| (w[1].biomass - fitted.next_stock(w[0].escapement(), 1.0)).powi(2))
            .collect();
        let rmse = (sq.iter().sum::<f64>() / sq.len() as f64).sqrt();
        assert!(rmse <= fit.rmse + 1e-9, "seed {seed}: {rmse} > {}", fit.rmse);
        assert!(fit.history.windows(2).all(|h| h[1] <= h[0]));
    }
}
