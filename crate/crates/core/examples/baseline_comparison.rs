//! Cost of the security layer: the same slot with and without sharing and
//! commitments.

use sepentra::harness::{compare_baseline, ScenarioConfig};

fn main() -> sepentra::Result<()> {
    let config = ScenarioConfig {
        worst_case: true,
        timing_repeats: 1,
        ..ScenarioConfig::default()
    };
    let cmp = compare_baseline(&config, None)?;
    print!("{}", cmp.table());
    Ok(())
}
