//! One settlement slot end to end with 100 participants, printing per-phase
//! time, traffic and storage.
//!
//! cargo run --release --example full_slot [worst]

use sepentra::harness::{run_scenario, ScenarioConfig};

fn main() -> sepentra::Result<()> {
    let worst = std::env::args().any(|a| a == "worst");
    let config = ScenarioConfig {
        worst_case: worst,
        timing_repeats: 1,
        ..ScenarioConfig::default()
    };
    let report = run_scenario(&config)?;
    print!("{}", report.summary());
    Ok(())
}
