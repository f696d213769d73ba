//! Per-phase timing and sizes as the number of participants grows, as CSV.
//!
//! cargo run --release --example sweep > sweep.csv

use sepentra::harness::{sweep, write_csv, ScenarioConfig, SweepAxis};

fn main() -> sepentra::Result<()> {
    let config = ScenarioConfig {
        timing_repeats: 3,
        mr_rounds: 64,
        ..ScenarioConfig::default()
    };
    let rows = sweep(&config, SweepAxis::NTas, &[20, 40, 60, 80, 100], false)?;
    write_csv(&rows, std::io::stdout().lock()).expect("stdout");
    Ok(())
}
