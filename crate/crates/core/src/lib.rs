//! Worst-case optimal (S-s) harvest policies for renewable resources.
//!
//! The crate models a harvested population as a game against nature: the
//! manager picks a harvest each season, nature picks a recruitment shock
//! from a bounded support, and the manager maximizes the discounted net
//! revenue guaranteed under the worst shock sequence.
//!
//! - [`model`]: Beverton-Holt dynamics, harvest costs, grid and horizon.
//! - [`kconcave`]: K-concavity checks and (S, s) threshold extraction.
//! - [`solver`]: dense and structure-exploiting minimax DP solvers.
//! - [`calibrate`]: least-squares fits of the biological and effort models.
//! - [`evaluate`]: policy simulation, worst-case evaluation and comparison.
//! - [`config`]: JSON model configuration.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod kconcave;
pub mod model;
pub mod solver;

pub use error::{Error, Result};
pub use kconcave::{ConcavityReport, SampledFunction, Thresholds};
pub use model::{BioModel, EconModel, Grid, Horizon, Reproduction};
pub use solver::{HarvestProblem, SolverConfig, ThresholdSchedule, ValueTable};
