use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::market::{ranges, MarketConfig};
use crate::numtheory::{KeygenMode, DEFAULT_MR_ROUNDS};
use crate::protocol::{AdversaryScenario, BetaPolicy, Mode, SigmaPolicy, TargetField};
use crate::sharing::{DEFAULT_SCALE, WIRE_MODULUS};

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_tas: usize,
    pub bits_p: u64,
    pub bits_b: u64,
    pub scale: u64,
    pub zeta: f64,
    pub price_step: f64,
    pub epsilon: f64,
    pub varsigma: u32,
    pub gamma_init: f64,
    pub beta: BetaPolicy,
    pub sigma: SigmaPolicy,
    pub mode: Mode,
    pub keygen_mode: KeygenMode,
    pub mr_rounds: u32,
    pub seed_profiles: u64,
    pub seed_crypto: u64,
    pub seed_adversary: u64,
    pub adversary: Option<AdversaryScenario>,
    /// Pick this many adversarial TAs at random after negotiation,
    /// replacing `adversary.targets`.
    pub adversary_random_targets: Option<usize>,
    /// Run negotiation to `varsigma` and always request reveals.
    pub worst_case: bool,
    /// Slot phases are repeated this many times; reported times are medians.
    pub timing_repeats: usize,
    pub wire_modulus: u64,
    /// Accept a `Z_p` too small for a single TA's full volume.
    pub balance_constrained: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let market = MarketConfig::default();
        Self {
            n_tas: 100,
            bits_p: 20,
            bits_b: 1000,
            scale: DEFAULT_SCALE,
            zeta: market.zeta,
            price_step: market.price_step,
            epsilon: market.epsilon,
            varsigma: market.varsigma,
            gamma_init: market.gamma_init,
            beta: BetaPolicy::default(),
            sigma: SigmaPolicy::default(),
            mode: Mode::Secure,
            keygen_mode: KeygenMode::Fast,
            mr_rounds: DEFAULT_MR_ROUNDS,
            seed_profiles: 1,
            seed_crypto: 2,
            seed_adversary: 3,
            adversary: None,
            adversary_random_targets: None,
            worst_case: false,
            timing_repeats: 5,
            wire_modulus: WIRE_MODULUS,
            balance_constrained: false,
        }
    }
}

impl ScenarioConfig {
    /// Settings for the detection experiment: tolerances tighter than the
    /// injected deviations.
    pub fn detection() -> Self {
        Self {
            sigma: SigmaPolicy::Relative {
                fraction: 0.025,
                floor: 0.0,
            },
            beta: BetaPolicy::Fixed(0.01),
            timing_repeats: 1,
            ..Self::default()
        }
    }

    pub fn market(&self) -> MarketConfig {
        MarketConfig {
            zeta: self.zeta,
            price_step: self.price_step,
            epsilon: self.epsilon,
            varsigma: self.varsigma,
            gamma_init: self.gamma_init,
            run_to_cap: self.worst_case,
        }
    }

    pub fn bits_q(&self) -> u64 {
        self.bits_p + self.bits_b
    }

    /// Checks the configuration; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_tas < 2 || !self.n_tas.is_multiple_of(2) {
            return bad(format!("n_tas must be even and at least 2, got {}", self.n_tas));
        }
        self.market().validate()?;
        if self.scale == 0 {
            return bad("scale must be positive".into());
        }
        if self.timing_repeats == 0 {
            return bad("timing_repeats must be at least 1".into());
        }
        if self.wire_modulus >= 1 << 32 {
            return bad("wire_modulus must fit in 32 bits".into());
        }
        let max_kwh = ranges::E_TOT.1;
        let single = self.scale as f64 * max_kwh;
        let aggregate = single * self.n_tas as f64;
        if 2.0 * aggregate >= self.wire_modulus as f64 {
            return bad(format!(
                "wire field {} too small for {} TAs at scale {}",
                self.wire_modulus, self.n_tas, self.scale
            ));
        }
        match self.sigma {
            SigmaPolicy::Relative { fraction, floor } if fraction < 0.0 || floor < 0.0 => {
                return bad("sigma fraction and floor must be non-negative".into())
            }
            SigmaPolicy::Fixed(s) if s < 0.0 => return bad("sigma must be non-negative".into()),
            _ => {}
        }
        if let BetaPolicy::Fixed(b) = self.beta {
            if b < 0.0 {
                return bad("beta must be non-negative".into());
            }
        }

        if self.mode == Mode::Secure {
            if self.bits_p < 2 || self.bits_b < 1 {
                return bad("bits_p must be at least 2 and bits_b at least 1".into());
            }
            if self.bits_p > 62 {
                return bad("bits_p must stay below 63".into());
            }
            // Smallest prime with `bits_p` bits is above 2^(bits_p-1).
            let p_min = (1u64 << (self.bits_p - 1)) as f64;
            if 2.0 * single >= p_min {
                if self.balance_constrained {
                    warnings.push(format!(
                        "Z_p (>= 2^{}) cannot hold {max_kwh} kWh at scale {}; relying on balance",
                        self.bits_p - 1,
                        self.scale
                    ));
                } else {
                    return bad(format!(
                        "scale * {max_kwh} kWh = {single} must stay below p/2 >= {} (raise bits_p or set balance_constrained)",
                        p_min / 2.0
                    ));
                }
            }
            if 2.0 * aggregate >= p_min {
                warnings.push(format!(
                    "aggregate of {} TAs can exceed p/2 in Z_p; the committed total relies on market balance",
                    self.n_tas
                ));
            }
        }
        if let Some(adv) = &self.adversary {
            adv.validate(self.n_tas)?;
        }
        if let Some(k) = self.adversary_random_targets {
            if self.adversary.is_none() {
                return bad("adversary_random_targets needs an adversary".into());
            }
            if k > self.n_tas {
                return bad(format!("{k} adversarial targets exceed n_tas = {}", self.n_tas));
            }
        }
        Ok(warnings)
    }

    /// Parses a line-oriented `key = value` scenario file. Blank lines and
    /// lines starting with `#` are ignored; unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: idx + 1,
                reason: "expected key = value".into(),
            })?;
            cfg.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                line: idx + 1,
                reason: match e {
                    Error::InvalidConfig(s) => s,
                    other => other.to_string(),
                },
            })?;
        }
        Ok(cfg)
    }

    /// Sets one field by name, as in the scenario file.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::InvalidConfig(format!("bad value '{v}' for {key}")))
        }
        fn flag(key: &str, v: &str) -> Result<bool> {
            match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(Error::InvalidConfig(format!("bad value '{v}' for {key}"))),
            }
        }
        match key {
            "n_tas" => self.n_tas = num(key, value)?,
            "bits_p" => self.bits_p = num(key, value)?,
            "bits_b" => self.bits_b = num(key, value)?,
            "scale" => self.scale = num(key, value)?,
            "zeta" => self.zeta = num(key, value)?,
            "price_step" => self.price_step = num(key, value)?,
            "epsilon" => self.epsilon = num(key, value)?,
            "varsigma" => self.varsigma = num(key, value)?,
            "gamma_init" => self.gamma_init = num(key, value)?,
            "beta" => {
                self.beta = match value {
                    "half_sigma_sum" => BetaPolicy::HalfSigmaSum,
                    v => BetaPolicy::Fixed(num(key, v)?),
                }
            }
            "sigma_fraction" | "sigma_floor" => {
                let x: f64 = num(key, value)?;
                let (mut fraction, mut floor) = match self.sigma {
                    SigmaPolicy::Relative { fraction, floor } => (fraction, floor),
                    SigmaPolicy::Fixed(_) => (0.05, 0.1),
                };
                if key == "sigma_fraction" {
                    fraction = x;
                } else {
                    floor = x;
                }
                self.sigma = SigmaPolicy::Relative { fraction, floor };
            }
            "sigma" => self.sigma = SigmaPolicy::Fixed(num(key, value)?),
            "mode" => self.mode = value.parse()?,
            "keygen_mode" => self.keygen_mode = value.parse()?,
            "mr_rounds" => self.mr_rounds = num(key, value)?,
            "seed_profiles" => self.seed_profiles = num(key, value)?,
            "seed_crypto" => self.seed_crypto = num(key, value)?,
            "seed_adversary" => {
                self.seed_adversary = num(key, value)?;
                if let Some(adv) = &mut self.adversary {
                    adv.seed = self.seed_adversary;
                }
            }
            "worst_case" => self.worst_case = flag(key, value)?,
            "timing_repeats" => self.timing_repeats = num(key, value)?,
            "wire_modulus" => self.wire_modulus = num(key, value)?,
            "balance_constrained" => self.balance_constrained = flag(key, value)?,
            "adversary_targets" => {
                let targets = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| num::<usize>(key, s))
                    .collect::<Result<BTreeSet<_>>>()?;
                self.adversary_mut().targets = targets;
            }
            "adversary_random_targets" => {
                self.adversary_mut();
                self.adversary_random_targets = Some(num(key, value)?);
            }
            "adversary_field" => self.adversary_mut().field = value.parse::<TargetField>()?,
            "adversary_perturbation" => {
                let (lo, hi) = value
                    .split_once("..")
                    .ok_or_else(|| Error::InvalidConfig("adversary_perturbation expects lo..hi".into()))?;
                self.adversary_mut().perturbation = (num(key, lo.trim())?, num(key, hi.trim())?);
            }
            "adversary_commit_false" => {
                let v = flag(key, value)?;
                self.adversary_mut().commit_false = v;
            }
            "adversary_refuse" => {
                let v = flag(key, value)?;
                self.adversary_mut().refuse_reveal = v;
            }
            other => return Err(Error::InvalidConfig(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    fn adversary_mut(&mut self) -> &mut AdversaryScenario {
        let seed = self.seed_adversary;
        self.adversary.get_or_insert_with(|| AdversaryScenario {
            seed,
            ..AdversaryScenario::honest()
        })
    }

    /// Renders the configuration in the scenario file format.
    pub fn to_file(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("n_tas", self.n_tas.to_string());
        kv("bits_p", self.bits_p.to_string());
        kv("bits_b", self.bits_b.to_string());
        kv("scale", self.scale.to_string());
        kv("zeta", self.zeta.to_string());
        kv("price_step", self.price_step.to_string());
        kv("epsilon", self.epsilon.to_string());
        kv("varsigma", self.varsigma.to_string());
        kv("gamma_init", self.gamma_init.to_string());
        kv(
            "beta",
            match self.beta {
                BetaPolicy::HalfSigmaSum => "half_sigma_sum".into(),
                BetaPolicy::Fixed(b) => b.to_string(),
            },
        );
        match self.sigma {
            SigmaPolicy::Relative { fraction, floor } => {
                kv("sigma_fraction", fraction.to_string());
                kv("sigma_floor", floor.to_string());
            }
            SigmaPolicy::Fixed(s) => kv("sigma", s.to_string()),
        }
        kv("mode", self.mode.to_string());
        kv("keygen_mode", self.keygen_mode.to_string());
        kv("mr_rounds", self.mr_rounds.to_string());
        kv("seed_profiles", self.seed_profiles.to_string());
        kv("seed_crypto", self.seed_crypto.to_string());
        kv("seed_adversary", self.seed_adversary.to_string());
        kv("worst_case", self.worst_case.to_string());
        kv("timing_repeats", self.timing_repeats.to_string());
        kv("wire_modulus", self.wire_modulus.to_string());
        kv("balance_constrained", self.balance_constrained.to_string());
        if let Some(adv) = &self.adversary {
            let targets: Vec<String> = adv.targets.iter().map(|t| t.to_string()).collect();
            kv("adversary_targets", targets.join(","));
            if let Some(k) = self.adversary_random_targets {
                kv("adversary_random_targets", k.to_string());
            }
            kv("adversary_field", adv.field.to_string());
            kv(
                "adversary_perturbation",
                format!("{}..{}", adv.perturbation.0, adv.perturbation.1),
            );
            kv("adversary_commit_false", adv.commit_false.to_string());
            kv("adversary_refuse", adv.refuse_reveal.to_string());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let warnings = ScenarioConfig::default().validate().unwrap();
        assert_eq!(warnings.len(), 1, "{warnings:?}");
    }

    #[test]
    fn small_p_rejected_unless_balance_constrained() {
        let mut cfg = ScenarioConfig {
            bits_p: 16,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        cfg.balance_constrained = true;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn odd_party_count_rejected() {
        let cfg = ScenarioConfig {
            n_tas: 3,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn file_round_trip() {
        let mut cfg = ScenarioConfig::detection();
        cfg.set("adversary_field", "r_n").unwrap();
        cfg.set("adversary_perturbation", "0.05..0.1").unwrap();
        cfg.set("adversary_targets", "1, 4").unwrap();
        cfg.n_tas = 10;
        let back = ScenarioConfig::parse(&cfg.to_file()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let err = ScenarioConfig::parse("n_tas = 4\n\n# c\nfoo = 1\n").unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                line: 4,
                reason: "unknown key 'foo'".into()
            }
        );
        assert!(ScenarioConfig::parse("n_tas 4").is_err());
        assert!(ScenarioConfig::parse("n_tas = four").is_err());
    }
}
