use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::market::{sample_profiles, Convergence, TaProfile};
use crate::numtheory::{generate_key, GroupParams, KeygenOptions, PrimeSearch};
use crate::protocol::{
    apply_adversary, choose_targets, derive_rng, run_commitment, run_commitment_check, run_keygen, run_negotiation,
    run_online, Bus, CheckOutcome, DetectionReport, Entity, Mode, OnlineParams, Phase, TaState, ToState, Transcript,
};
use crate::sharing::{Fp, FixedPointCodec};

/// Bits to kilobytes of 1024 bytes.
pub fn kb(bits: u64) -> f64 {
    bits as f64 / 8.0 / 1024.0
}

/// Whether an entity row stands for every TA or for the operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Ta,
    To,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Ta => "TA",
            Role::To => "TO",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Usage {
    pub traffic_bits: u64,
    pub storage_bits: u64,
}

impl Usage {
    pub fn traffic_kb(&self) -> f64 {
        kb(self.traffic_bits)
    }

    pub fn storage_kb(&self) -> f64 {
        kb(self.storage_bits)
    }
}

/// Per-entity, per-phase traffic and storage derived from a transcript.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SizeTable {
    pub entries: BTreeMap<(Phase, Entity), Usage>,
}

impl SizeTable {
    pub fn get(&self, phase: Phase, entity: Entity) -> Usage {
        self.entries.get(&(phase, entity)).copied().unwrap_or_default()
    }

    /// For TAs the largest per-TA figure, since they can differ when one
    /// refuses to reveal.
    pub fn role(&self, phase: Phase, role: Role) -> Usage {
        let mut out = Usage::default();
        for (&(ph, entity), usage) in &self.entries {
            let matches = matches!((role, entity), (Role::Ta, Entity::Ta(_)) | (Role::To, Entity::To));
            if ph == phase && matches {
                out.traffic_bits = out.traffic_bits.max(usage.traffic_bits);
                out.storage_bits = out.storage_bits.max(usage.storage_bits);
            }
        }
        out
    }

    /// Traffic summed over all phases, maximised over entities of the role.
    pub fn total_traffic_bits(&self, role: Role) -> u64 {
        let mut per_entity: BTreeMap<Entity, u64> = BTreeMap::new();
        for (&(_, entity), usage) in &self.entries {
            let keep = match role {
                Role::Ta => matches!(entity, Entity::Ta(_)),
                Role::To => entity == Entity::To,
            };
            if keep {
                *per_entity.entry(entity).or_default() += usage.traffic_bits;
            }
        }
        per_entity.values().copied().max().unwrap_or(0)
    }

    pub fn total_storage_bits(&self, role: Role) -> u64 {
        let mut per_entity: BTreeMap<Entity, u64> = BTreeMap::new();
        for (&(_, entity), usage) in &self.entries {
            let keep = match role {
                Role::Ta => matches!(entity, Entity::Ta(_)),
                Role::To => entity == Entity::To,
            };
            if keep {
                *per_entity.entry(entity).or_default() += usage.storage_bits;
            }
        }
        per_entity.values().copied().max().unwrap_or(0)
    }
}

pub fn measure_sizes(transcript: &Transcript) -> SizeTable {
    let mut table = SizeTable::default();
    for m in &transcript.messages {
        table.entries.entry((m.phase, m.sender)).or_default().traffic_bits += m.bits;
    }
    for s in &transcript.storage {
        table.entries.entry((s.phase, s.entity)).or_default().storage_bits += s.bits;
    }
    table
}

/// Everything one slot produces.
#[derive(Debug, Clone)]
pub struct SlotOutcome {
    pub transcript: Transcript,
    /// Seconds per phase that ran. Key generation is timed by the caller.
    pub seconds: BTreeMap<Phase, f64>,
    pub clearing_price: f64,
    pub gammas: Vec<f64>,
    pub iterations: u32,
    pub convergence: Convergence,
    pub check: Option<CheckOutcome>,
    pub detection: Option<DetectionReport>,
    /// Final per-TA contributions in kWh (signed net demand).
    pub forecasts_kwh: Vec<f64>,
    pub targets: Vec<(usize, f64)>,
    pub beta: f64,
}

fn keygen_options(config: &ScenarioConfig) -> KeygenOptions {
    KeygenOptions {
        mode: config.keygen_mode,
        search: PrimeSearch::with_rounds(config.mr_rounds),
        ..KeygenOptions::default()
    }
}

/// Generates the commitment key from the operator's random stream.
pub fn generate_scenario_key(config: &ScenarioConfig) -> Result<GroupParams> {
    let mut rng = derive_rng(config.seed_crypto, 0);
    generate_key(config.bits_p, config.bits_b, &keygen_options(config), &mut rng)
}

pub fn scenario_profiles(config: &ScenarioConfig) -> Result<Vec<TaProfile>> {
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed_profiles);
    sample_profiles(config.n_tas, &mut rng)
}

/// Runs the phases after key generation for one slot on `bus`. `key` is
/// required in secure mode.
pub fn run_slot(
    config: &ScenarioConfig,
    profiles: &[TaProfile],
    key: Option<Arc<GroupParams>>,
    bus: Bus,
) -> Result<SlotOutcome> {
    let n = profiles.len();
    let wire = FixedPointCodec::new(config.scale, Fp::new(config.wire_modulus)?)?;
    let mut tas: Vec<TaState> = profiles
        .iter()
        .cloned()
        .map(|p| TaState::new(p, config.seed_crypto))
        .collect();
    let mut to = ToState::new();
    let mut seconds = BTreeMap::new();

    let commit_codec = match (config.mode, &key) {
        (Mode::Secure, Some(ck)) => {
            let t = Instant::now();
            run_keygen(&mut tas, &mut to, ck.clone(), &bus)?;
            seconds.insert(Phase::KeyGen, t.elapsed().as_secs_f64());
            Some(FixedPointCodec::new(config.scale, Fp::from_big(ck.p())?)?)
        }
        (Mode::Secure, None) => {
            return Err(Error::InvalidConfig("secure mode needs a commitment key".into()));
        }
        (Mode::Plain, _) => None,
    };

    let t = Instant::now();
    let negotiation = run_negotiation(&mut tas, &mut to, &config.market(), &wire, config.mode, &bus)?;
    seconds.insert(Phase::Negotiation, t.elapsed().as_secs_f64());

    let forecasts_kwh: Vec<f64> = tas
        .iter()
        .map(|ta| wire.units_to_kwh(ta.forecast_units().unwrap_or(0)))
        .collect();

    let mut targets = Vec::new();
    if let Some(adv) = &config.adversary {
        let mut scenario = adv.clone();
        scenario.seed = config.seed_adversary;
        if let Some(k) = config.adversary_random_targets {
            let mut rng = derive_rng(config.seed_adversary, 1);
            scenario.targets = choose_targets(&forecasts_kwh, k, 1.0, &mut rng)?;
        }
        targets = apply_adversary(&scenario, &mut tas)?;
    }

    let mut check = None;
    if let Some(codec) = &commit_codec {
        let t = Instant::now();
        run_commitment(&mut tas, codec, &bus)?;
        seconds.insert(Phase::Commitment, t.elapsed().as_secs_f64());

        let t = Instant::now();
        let outcome = run_commitment_check(&mut to, n, codec, &bus)?;
        seconds.insert(Phase::CommitmentCheck, t.elapsed().as_secs_f64());
        check = Some(outcome);
    }

    let beta = config.beta.resolve(&config.sigma, &forecasts_kwh);
    let mut detection = None;
    if check != Some(CheckOutcome::Rejected) {
        let params = OnlineParams {
            beta,
            sigma: config.sigma,
            force_reveal: config.worst_case,
        };
        let codec = commit_codec.as_ref().unwrap_or(&wire);
        let t = Instant::now();
        let report = run_online(&mut tas, &mut to, &wire, codec, &params, config.mode, &bus)?;
        seconds.insert(Phase::Online, t.elapsed().as_secs_f64());
        detection = Some(report);
    }

    Ok(SlotOutcome {
        transcript: bus.into_transcript(),
        seconds,
        clearing_price: negotiation.clearing_price,
        gammas: negotiation.gammas,
        iterations: negotiation.iterations,
        convergence: negotiation.status,
        check,
        detection,
        forecasts_kwh,
        targets,
        beta,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub config: ScenarioConfig,
    pub warnings: Vec<String>,
    /// Median wall time per phase in seconds. Key generation includes
    /// producing the key unless it was supplied.
    pub seconds: BTreeMap<Phase, f64>,
    pub sizes: SizeTable,
    pub clearing_price: f64,
    pub iterations: u32,
    pub convergence: Convergence,
    pub check: Option<CheckOutcome>,
    pub detection: Option<DetectionReport>,
    pub key_bits_q: Option<u64>,
    pub beta: f64,
    pub targets: Vec<(usize, f64)>,
}

impl RunReport {
    /// The report with all wall times zeroed, for reproducibility checks.
    pub fn without_timings(&self) -> Self {
        let mut out = self.clone();
        for v in out.seconds.values_mut() {
            *v = 0.0;
        }
        out
    }

    /// Seconds for every phase except key generation.
    pub fn slot_seconds(&self) -> f64 {
        self.seconds
            .iter()
            .filter(|(p, _)| **p != Phase::KeyGen)
            .map(|(_, s)| s)
            .sum()
    }

    pub fn total_seconds(&self) -> f64 {
        self.seconds.values().sum()
    }

    pub fn summary(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "mode={} n_tas={} clearing_price={:.6} iterations={} convergence={:?}",
            self.config.mode, self.config.n_tas, self.clearing_price, self.iterations, self.convergence
        );
        if let Some(bits) = self.key_bits_q {
            let _ = writeln!(out, "key bits_q={bits}");
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        let _ = writeln!(
            out,
            "{:<18}{:>12}{:>14}{:>14}{:>14}{:>14}",
            "phase", "seconds", "TA traffic", "TA storage", "TO traffic", "TO storage"
        );
        for phase in Phase::ALL {
            let Some(secs) = self.seconds.get(&phase) else { continue };
            let ta = self.sizes.role(phase, Role::Ta);
            let to = self.sizes.role(phase, Role::To);
            let _ = writeln!(
                out,
                "{:<18}{:>12.4}{:>11.4} KB{:>11.4} KB{:>11.4} KB{:>11.4} KB",
                phase.name(),
                secs,
                ta.traffic_kb(),
                ta.storage_kb(),
                to.traffic_kb(),
                to.storage_kb()
            );
        }
        let _ = writeln!(
            out,
            "total TA traffic {:.4} KB, TO traffic {:.4} KB",
            kb(self.sizes.total_traffic_bits(Role::Ta)),
            kb(self.sizes.total_traffic_bits(Role::To))
        );
        if let Some(check) = self.check {
            let _ = writeln!(out, "commitment check: {check:?}");
        }
        if let Some(d) = &self.detection {
            let _ = writeln!(
                out,
                "online: E={:.4} kWh e={:.4} kWh beta={:.4} triggered={} comparisons={} t_m={:?} t_f={:?}",
                d.forecast_total, d.e_total, self.beta, d.triggered, d.comparisons, d.t_m_list, d.t_f_list
            );
        }
        out
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<RunReport> {
    run_scenario_with_key(config, None)
}

/// Like [`run_scenario`], reusing `key` instead of generating one.
pub fn run_scenario_with_key(config: &ScenarioConfig, key: Option<Arc<GroupParams>>) -> Result<RunReport> {
    let warnings = config.validate()?;
    let profiles = scenario_profiles(config)?;

    let mut keygen_seconds = 0.0;
    let key = match (config.mode, key) {
        (Mode::Plain, _) => None,
        (Mode::Secure, Some(k)) => Some(k),
        (Mode::Secure, None) => {
            let t = Instant::now();
            let k = generate_scenario_key(config)?;
            keygen_seconds = t.elapsed().as_secs_f64();
            Some(Arc::new(k))
        }
    };

    let mut times: BTreeMap<Phase, Vec<f64>> = BTreeMap::new();
    let mut last = None;
    for _ in 0..config.timing_repeats {
        let outcome = run_slot(config, &profiles, key.clone(), Bus::new(config.n_tas))?;
        for (&phase, &s) in &outcome.seconds {
            times.entry(phase).or_default().push(s);
        }
        last = Some(outcome);
    }
    let outcome = last.expect("timing_repeats >= 1");
    let mut seconds: BTreeMap<Phase, f64> = times.into_iter().map(|(p, v)| (p, median(v))).collect();
    if let Some(s) = seconds.get_mut(&Phase::KeyGen) {
        *s += keygen_seconds;
    }

    Ok(RunReport {
        config: config.clone(),
        warnings,
        seconds,
        sizes: measure_sizes(&outcome.transcript),
        clearing_price: outcome.clearing_price,
        iterations: outcome.iterations,
        convergence: outcome.convergence,
        check: outcome.check,
        detection: outcome.detection,
        key_bits_q: key.as_ref().map(|k| k.bits_q()),
        beta: outcome.beta,
        targets: outcome.targets,
    })
}
