//! Scenario configuration, end-to-end runs, size accounting and the
//! experiment drivers.

mod config;
mod experiments;
mod run;

pub use config::ScenarioConfig;
pub use experiments::{
    compare_baseline, detection_experiment, detection_experiment_with, report_rows, sweep, write_csv,
    BaselineComparison, CsvRow, DetectionSummary, FieldStats, SweepAxis, CSV_HEADER,
};
pub use run::{
    generate_scenario_key, kb, measure_sizes, run_scenario, run_scenario_with_key, run_slot, scenario_profiles, Role,
    RunReport, SizeTable, SlotOutcome, Usage,
};
