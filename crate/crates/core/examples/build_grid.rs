//! Regenerates `data/scenarios.csv` and `data/interactions.csv`.

use std::fs::File;

use riskbench::scenario::grid::{
    build_interaction_grid, build_risk_grid, DEFAULT_CALIBRATION_SEED, DEFAULT_CALIBRATION_SIZE,
};
use riskbench::scenario::write_scenarios;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let risk = build_risk_grid(DEFAULT_CALIBRATION_SIZE, DEFAULT_CALIBRATION_SEED)?;
    write_scenarios(File::create(dir.join("scenarios.csv"))?, &risk)?;
    let inter = build_interaction_grid(DEFAULT_CALIBRATION_SIZE, DEFAULT_CALIBRATION_SEED)?;
    write_scenarios(File::create(dir.join("interactions.csv"))?, &inter)?;
    Ok(())
}
