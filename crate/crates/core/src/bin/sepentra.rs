use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use sepentra::harness::{
    compare_baseline, detection_experiment_with, generate_scenario_key, report_rows, run_scenario_with_key, sweep,
    write_csv, ScenarioConfig, SweepAxis,
};
use sepentra::numtheory::GroupParams;
use sepentra::protocol::TargetField;
use sepentra::{Error, Result};

#[derive(Parser)]
#[command(name = "sepentra", version, about = "Secure energy-trading settlement simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one slot and print per-phase time, traffic and storage.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// One run per value of an axis; writes CSV.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// n_tas | bits_q | bits_p
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<u64>,
        #[arg(long)]
        parallel: bool,
    },
    /// Detection accuracy over seeded adversarial runs.
    Detect {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 15)]
        targets: usize,
        /// Relative perturbation range lo..hi.
        #[arg(long, default_value = "0.05..0.10")]
        range: String,
        #[arg(long, default_value_t = 500)]
        runs: usize,
        /// Comma-separated subset of e_n, E_n, r_n.
        #[arg(long, value_delimiter = ',', default_value = "e_n,E_n,r_n")]
        fields: Vec<String>,
    },
    /// Secure pipeline against the plain baseline.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Generate a commitment key and write it as a text record.
    Keygen {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
}

/// Flags mirror scenario-file keys; flags override the file.
#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    n_tas: Option<String>,
    #[arg(long)]
    bits_p: Option<String>,
    #[arg(long)]
    bits_b: Option<String>,
    #[arg(long)]
    scale: Option<String>,
    #[arg(long)]
    zeta: Option<String>,
    #[arg(long)]
    price_step: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    varsigma: Option<String>,
    #[arg(long)]
    gamma_init: Option<String>,
    /// A number in kWh or `half_sigma_sum`.
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    sigma_fraction: Option<String>,
    #[arg(long)]
    sigma_floor: Option<String>,
    /// secure | plain
    #[arg(long)]
    mode: Option<String>,
    /// faithful | fast
    #[arg(long)]
    keygen_mode: Option<String>,
    #[arg(long)]
    faithful_keygen: bool,
    #[arg(long)]
    mr_rounds: Option<String>,
    #[arg(long)]
    seed_profiles: Option<String>,
    #[arg(long)]
    seed_crypto: Option<String>,
    #[arg(long)]
    seed_adversary: Option<String>,
    #[arg(long)]
    worst_case: bool,
    #[arg(long)]
    timing_repeats: Option<String>,
    /// Reuse a key written by `keygen`.
    #[arg(long)]
    key: Option<PathBuf>,
    /// Output file (CSV for run/sweep, key record for keygen).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ScenarioArgs {
    fn config(&self) -> Result<ScenarioConfig> {
        self.config_or(ScenarioConfig::default())
    }

    /// `base` applies when no scenario file is given.
    fn config_or(&self, base: ScenarioConfig) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::parse(&read(path)?)?,
            None => base,
        };
        let flags = [
            ("n_tas", &self.n_tas),
            ("bits_p", &self.bits_p),
            ("bits_b", &self.bits_b),
            ("scale", &self.scale),
            ("zeta", &self.zeta),
            ("price_step", &self.price_step),
            ("epsilon", &self.epsilon),
            ("varsigma", &self.varsigma),
            ("gamma_init", &self.gamma_init),
            ("beta", &self.beta),
            ("sigma_fraction", &self.sigma_fraction),
            ("sigma_floor", &self.sigma_floor),
            ("mode", &self.mode),
            ("keygen_mode", &self.keygen_mode),
            ("mr_rounds", &self.mr_rounds),
            ("seed_profiles", &self.seed_profiles),
            ("seed_crypto", &self.seed_crypto),
            ("seed_adversary", &self.seed_adversary),
            ("timing_repeats", &self.timing_repeats),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        if self.faithful_keygen {
            cfg.set("keygen_mode", "faithful")?;
        }
        if self.worst_case {
            cfg.worst_case = true;
        }
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("--set expects key=value, got '{o}'")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    fn key(&self) -> Result<Option<Arc<GroupParams>>> {
        self.key
            .as_ref()
            .map(|path| Ok(Arc::new(GroupParams::from_record(&read(path)?)?)))
            .transpose()
    }
}

fn read(path: &PathBuf) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn write(path: &PathBuf, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn csv_bytes(rows: &[sepentra::harness::CsvRow]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    buf
}

fn parse_range(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::InvalidConfig(format!("range expects lo..hi, got '{s}'"));
    let (lo, hi) = s.split_once("..").ok_or_else(bad)?;
    Ok((lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?))
}

/// Returns whether every check passed.
fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Run { scenario } => {
            let cfg = scenario.config()?;
            let report = run_scenario_with_key(&cfg, scenario.key()?)?;
            print!("{}", report.summary());
            if let Some(out) = &scenario.out {
                write(out, &csv_bytes(&report_rows(cfg.n_tas as u64, &report)))?;
            }
            Ok(true)
        }
        Command::Sweep {
            scenario,
            axis,
            values,
            parallel,
        } => {
            let rows = sweep(&scenario.config()?, axis, &values, parallel)?;
            let csv = csv_bytes(&rows);
            match &scenario.out {
                Some(out) => write(out, &csv)?,
                None => print!("{}", String::from_utf8_lossy(&csv)),
            }
            Ok(true)
        }
        Command::Detect {
            scenario,
            targets,
            range,
            runs,
            fields,
        } => {
            let cfg = scenario.config_or(ScenarioConfig::detection())?;
            let fields = fields
                .iter()
                .map(|f| f.parse::<TargetField>())
                .collect::<Result<Vec<_>>>()?;
            let summary =
                detection_experiment_with(&cfg, targets, parse_range(&range)?, runs, &fields, scenario.key()?)?;
            for (field, s) in &summary.per_field {
                println!(
                    "{field}: runs={} tp={} wrong_list={} missed={} fp={} t_m={} t_f={}",
                    s.runs, s.true_positives, s.wrong_list, s.missed, s.false_positives, s.in_t_m, s.in_t_f
                );
            }
            let t = &summary.total;
            println!(
                "total: accuracy={:.4} tp={}/{} false_positives={} rejected_runs={} skipped_scenarios={}",
                summary.accuracy(),
                t.true_positives,
                summary.expected_flags(),
                t.false_positives,
                summary.rejected_runs,
                summary.skipped_scenarios
            );
            Ok(t.true_positives == summary.expected_flags()
                && t.false_positives == 0
                && t.exclusivity_violations == 0)
        }
        Command::Compare { scenario } => {
            let cmp = compare_baseline(&scenario.config()?, scenario.key()?)?;
            print!("{}", cmp.table());
            Ok(cmp.prices_equal)
        }
        Command::Keygen { scenario } => {
            let cfg = scenario.config()?;
            let start = std::time::Instant::now();
            let key = generate_scenario_key(&cfg)?;
            eprintln!(
                "generated {}-bit q ({} mode) in {:.3} s",
                key.bits_q(),
                cfg.keygen_mode,
                start.elapsed().as_secs_f64()
            );
            let record = key.to_record();
            match &scenario.out {
                Some(out) => write(out, record.as_bytes())?,
                None => print!("{record}"),
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("check failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
