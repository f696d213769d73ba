use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::sync::Arc;

use super::config::ScenarioConfig;
use super::run::{generate_scenario_key, kb, run_scenario_with_key, scenario_profiles, run_slot, Role, RunReport};
use crate::error::{Error, Result};
use crate::numtheory::GroupParams;
use crate::protocol::{AdversaryScenario, Bus, Mode, Phase, TargetField};

/// Counts for one reveal strategy across the detection runs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FieldStats {
    pub runs: u64,
    /// Perturbed TAs flagged in the expected list.
    pub true_positives: u64,
    /// Perturbed TAs flagged, but in the other list.
    pub wrong_list: u64,
    /// Perturbed TAs not flagged at all.
    pub missed: u64,
    /// Honest TAs flagged.
    pub false_positives: u64,
    pub in_t_m: u64,
    pub in_t_f: u64,
    pub triggered: u64,
    /// Runs where some TA appeared in both lists.
    pub exclusivity_violations: u64,
}

impl FieldStats {
    fn absorb(&mut self, other: &FieldStats) {
        self.runs += other.runs;
        self.true_positives += other.true_positives;
        self.wrong_list += other.wrong_list;
        self.missed += other.missed;
        self.false_positives += other.false_positives;
        self.in_t_m += other.in_t_m;
        self.in_t_f += other.in_t_f;
        self.triggered += other.triggered;
        self.exclusivity_violations += other.exclusivity_violations;
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionSummary {
    pub n_targets: usize,
    pub per_field: BTreeMap<String, FieldStats>,
    pub total: FieldStats,
    /// Runs whose commitment check rejected (none expected).
    pub rejected_runs: u64,
    /// Seeds skipped because too few TAs traded to pick the targets from.
    pub skipped_scenarios: u64,
}

impl DetectionSummary {
    pub fn expected_flags(&self) -> u64 {
        self.total.runs * self.n_targets as u64
    }

    /// True-positive rate over all perturbed TAs; 1 when there are none.
    pub fn accuracy(&self) -> f64 {
        let expected = self.expected_flags();
        if expected == 0 {
            1.0
        } else {
            self.total.true_positives as f64 / expected as f64
        }
    }
}

/// Runs `n_runs` seeded slots, cycling the reveal strategy over
/// `e_n`, `E_n`, `r_n`. Each run draws `n_targets` TAs (among those trading
/// at least 1 kWh) and a perturbation in `range`. Seeds whose market leaves
/// fewer eligible TAs are skipped and counted. One key is shared by all runs.
pub fn detection_experiment(
    base: &ScenarioConfig,
    n_targets: usize,
    range: (f64, f64),
    n_runs: usize,
) -> Result<DetectionSummary> {
    detection_experiment_with(base, n_targets, range, n_runs, &[TargetField::Actual, TargetField::Forecast, TargetField::Randomness], None)
}

pub fn detection_experiment_with(
    base: &ScenarioConfig,
    n_targets: usize,
    range: (f64, f64),
    n_runs: usize,
    fields: &[TargetField],
    key: Option<Arc<GroupParams>>,
) -> Result<DetectionSummary> {
    if n_targets > base.n_tas {
        return Err(Error::InvalidConfig(format!(
            "{n_targets} targets exceed n_tas = {}",
            base.n_tas
        )));
    }
    if fields.is_empty() {
        return Err(Error::InvalidConfig("no target fields given".into()));
    }
    let mut cfg = base.clone();
    cfg.mode = Mode::Secure;
    cfg.timing_repeats = 1;
    cfg.validate()?;
    let key = match key {
        Some(k) => k,
        None => Arc::new(generate_scenario_key(&cfg)?),
    };

    let mut summary = DetectionSummary {
        n_targets,
        ..Default::default()
    };
    let mut run = 0;
    let mut attempt = 0u64;
    while run < n_runs {
        let field = fields[run % fields.len()];
        let run_seed = attempt;
        attempt += 1;
        cfg.seed_profiles = base.seed_profiles.wrapping_add(run_seed);
        cfg.seed_crypto = base.seed_crypto.wrapping_add(run_seed);
        cfg.seed_adversary = base.seed_adversary.wrapping_add(run_seed);
        let template = base.adversary.clone().unwrap_or_else(AdversaryScenario::honest);
        cfg.adversary = Some(AdversaryScenario {
            field,
            perturbation: range,
            targets: BTreeSet::new(),
            ..template
        });
        cfg.adversary_random_targets = Some(n_targets);

        let profiles = scenario_profiles(&cfg)?;
        let outcome = match run_slot(&cfg, &profiles, Some(key.clone()), Bus::new(cfg.n_tas)) {
            Err(Error::TooFewTraders { .. }) if attempt < 100 * n_runs as u64 + 100 => {
                summary.skipped_scenarios += 1;
                continue;
            }
            other => other?,
        };
        run += 1;
        let mut stats = FieldStats {
            runs: 1,
            ..Default::default()
        };
        let Some(report) = outcome.detection else {
            summary.rejected_runs += 1;
            summary.per_field.entry(field.to_string()).or_default().absorb(&stats);
            summary.total.absorb(&stats);
            continue;
        };

        let mut scenario = cfg.adversary.clone().expect("set above");
        scenario.targets = outcome.targets.iter().map(|&(t, _)| t).collect();
        let (want_m, want_f) = scenario.expected_lists();
        stats.triggered = report.triggered as u64;
        stats.in_t_m = report.t_m_list.len() as u64;
        stats.in_t_f = report.t_f_list.len() as u64;
        if report.t_m_list.intersection(&report.t_f_list).next().is_some() {
            stats.exclusivity_violations = 1;
        }
        for &t in &scenario.targets {
            let expected_hit = (want_m.contains(&t) && report.t_m_list.contains(&t))
                || (want_f.contains(&t) && report.t_f_list.contains(&t));
            if expected_hit {
                stats.true_positives += 1;
            } else if report.t_m_list.contains(&t) || report.t_f_list.contains(&t) {
                stats.wrong_list += 1;
            } else {
                stats.missed += 1;
            }
        }
        stats.false_positives = report
            .flagged()
            .iter()
            .filter(|i| !scenario.targets.contains(i))
            .count() as u64;
        summary.per_field.entry(field.to_string()).or_default().absorb(&stats);
        summary.total.absorb(&stats);
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineComparison {
    pub secure: RunReport,
    pub plain: RunReport,
    pub prices_equal: bool,
}

impl BaselineComparison {
    pub fn table(&self) -> String {
        let row = |name: &str, r: &RunReport| {
            format!(
                "{:<10}{:>12.4}{:>14.4}{:>14.4}{:>14.4}\n",
                name,
                r.total_seconds(),
                kb(r.sizes.total_traffic_bits(Role::Ta)),
                kb(r.sizes.total_traffic_bits(Role::To)),
                kb(r.sizes.total_storage_bits(Role::To)),
            )
        };
        let mut out = format!(
            "{:<10}{:>12}{:>14}{:>14}{:>14}\n",
            "mode", "seconds", "TA KB", "TO KB", "TO store KB"
        );
        out += &row("secure", &self.secure);
        out += &row("plain", &self.plain);
        out += &format!(
            "clearing price secure={} plain={} equal={}\n",
            self.secure.clearing_price, self.plain.clearing_price, self.prices_equal
        );
        out
    }
}

/// Runs the same scenario with and without the security layer.
pub fn compare_baseline(config: &ScenarioConfig, key: Option<Arc<GroupParams>>) -> Result<BaselineComparison> {
    let secure = run_scenario_with_key(
        &ScenarioConfig {
            mode: Mode::Secure,
            ..config.clone()
        },
        key,
    )?;
    let plain = run_scenario_with_key(
        &ScenarioConfig {
            mode: Mode::Plain,
            ..config.clone()
        },
        None,
    )?;
    let prices_equal = secure.clearing_price.to_bits() == plain.clearing_price.to_bits();
    Ok(BaselineComparison {
        secure,
        plain,
        prices_equal,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    NTas,
    /// Varies `bits_b` so that `bits_p + bits_b` takes each value.
    BitsQ,
    BitsP,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n_tas" => Ok(SweepAxis::NTas),
            "bits_q" => Ok(SweepAxis::BitsQ),
            "bits_p" => Ok(SweepAxis::BitsP),
            other => Err(Error::InvalidConfig(format!("unknown sweep axis '{other}'"))),
        }
    }
}

impl SweepAxis {
    pub fn apply(self, base: &ScenarioConfig, value: u64) -> Result<ScenarioConfig> {
        let mut cfg = base.clone();
        match self {
            SweepAxis::NTas => cfg.n_tas = value as usize,
            SweepAxis::BitsP => cfg.bits_p = value,
            SweepAxis::BitsQ => {
                if value <= cfg.bits_p {
                    return Err(Error::InvalidConfig(format!(
                        "bits_q = {value} must exceed bits_p = {}",
                        cfg.bits_p
                    )));
                }
                cfg.bits_b = value - cfg.bits_p;
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub axis_value: u64,
    pub phase: Phase,
    pub role: Role,
    pub seconds: f64,
    pub traffic_kb: f64,
    pub storage_kb: f64,
}

pub const CSV_HEADER: &str = "axis_value,phase,entity,seconds,traffic_kb,storage_kb";

pub fn report_rows(axis_value: u64, report: &RunReport) -> Vec<CsvRow> {
    let mut rows = Vec::new();
    for phase in Phase::ALL {
        let Some(&seconds) = report.seconds.get(&phase) else { continue };
        for role in [Role::Ta, Role::To] {
            let usage = report.sizes.role(phase, role);
            rows.push(CsvRow {
                axis_value,
                phase,
                role,
                seconds,
                traffic_kb: usage.traffic_kb(),
                storage_kb: usage.storage_kb(),
            });
        }
    }
    rows
}

/// One run per value. With `parallel`, runs execute on separate threads.
pub fn sweep(config: &ScenarioConfig, axis: SweepAxis, values: &[u64], parallel: bool) -> Result<Vec<CsvRow>> {
    if values.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one value".into()));
    }
    let configs = values
        .iter()
        .map(|&v| axis.apply(config, v))
        .collect::<Result<Vec<_>>>()?;
    let reports: Vec<Result<RunReport>> = if parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = configs
                .iter()
                .map(|c| s.spawn(move || run_scenario_with_key(c, None)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("sweep worker panicked"))
                .collect()
        })
    } else {
        configs.iter().map(|c| run_scenario_with_key(c, None)).collect()
    };
    let mut rows = Vec::new();
    for (&v, report) in values.iter().zip(reports) {
        rows.extend(report_rows(v, &report?));
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[CsvRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6}",
            r.axis_value,
            r.phase.name(),
            r.role.name(),
            r.seconds,
            r.traffic_kb,
            r.storage_kb
        )?;
    }
    Ok(())
}
