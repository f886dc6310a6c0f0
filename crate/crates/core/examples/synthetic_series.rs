//! Writes the demo series shipped in `data/`.
//!
//! The series is synthetic: it is generated from the Table 1 model and is not
//! observed fishery data. Usage:
//!
//! ```text
//! cargo run -p ssharvest --example synthetic_series -- data/synthetic_series.csv
//! ```

use ssharvest::calibrate::{synthetic_series, write_series, ShockDraw, SyntheticSpec};
use ssharvest::model::{BioModel, EconModel};

fn main() -> ssharvest::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "synthetic_series.csv".to_string());
    let spec = SyntheticSpec {
        x1: 50.0,
        shocks: ShockDraw::Uniform,
        effort_noise: 0.05,
        seed: 1975,
        ..SyntheticSpec::default()
    };
    let series = synthetic_series(&BioModel::table1(), &EconModel::table1(), &spec);
    write_series(&path, &series)?;
    println!("wrote {} years to {path}", series.len());
    Ok(())
}
