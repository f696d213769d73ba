//! Detection of participants whose delivery departs from their commitment.
//!
//! cargo run --release --example detection [runs]

use sepentra::harness::{detection_experiment, ScenarioConfig};

fn main() -> sepentra::Result<()> {
    let runs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(30);
    let config = ScenarioConfig {
        mr_rounds: 64,
        ..ScenarioConfig::detection()
    };
    let summary = detection_experiment(&config, 15, (0.05, 0.10), runs)?;
    for (field, s) in &summary.per_field {
        println!(
            "{field}: runs={} flagged correctly={} wrong list={} missed={} honest flagged={}",
            s.runs, s.true_positives, s.wrong_list, s.missed, s.false_positives
        );
    }
    println!("accuracy {:.2}%", 100.0 * summary.accuracy());

    let honest = detection_experiment(&config, 0, (0.05, 0.10), 3)?;
    println!("honest runs triggered: {}", honest.total.triggered);
    Ok(())
}
