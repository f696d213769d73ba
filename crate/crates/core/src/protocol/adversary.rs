use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;

use super::participants::{derive_rng, Misbehaviour, TaState};
use crate::error::{Error, Result};

/// The value a deviating TA lies about when asked to open its commitment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TargetField {
    /// Reveals honestly; only the meter reading deviates.
    Actual,
    /// Reveals a forecast equal to its meter reading.
    Forecast,
    /// Reveals altered commitment randomness.
    Randomness,
}

impl fmt::Display for TargetField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TargetField::Actual => "e_n",
            TargetField::Forecast => "E_n",
            TargetField::Randomness => "r_n",
        })
    }
}

impl FromStr for TargetField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "e_n" | "actual" => Ok(TargetField::Actual),
            "E_n" | "forecast" => Ok(TargetField::Forecast),
            "r_n" | "randomness" => Ok(TargetField::Randomness),
            other => Err(Error::InvalidConfig(format!("unknown target field '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryScenario {
    pub targets: BTreeSet<usize>,
    pub field: TargetField,
    /// Relative perturbation `δ`, drawn uniformly per target.
    pub perturbation: (f64, f64),
    pub seed: u64,
    /// With the `E_n` field: commit to a perturbed forecast and deliver the
    /// negotiated energy.
    pub commit_false: bool,
    pub refuse_reveal: bool,
}

impl AdversaryScenario {
    pub fn honest() -> Self {
        Self {
            targets: BTreeSet::new(),
            field: TargetField::Actual,
            perturbation: (0.0, 0.0),
            seed: 0,
            commit_false: false,
            refuse_reveal: false,
        }
    }

    pub fn validate(&self, n_tas: usize) -> Result<()> {
        let (lo, hi) = self.perturbation;
        if !(0.0..1.0).contains(&lo) || !(lo..1.0).contains(&hi) {
            return Err(Error::InvalidConfig(format!(
                "perturbation range [{lo}, {hi}] must satisfy 0 <= lo <= hi < 1"
            )));
        }
        if let Some(&t) = self.targets.iter().find(|&&t| t >= n_tas) {
            return Err(Error::InvalidConfig(format!("target {t} out of range for {n_tas} TAs")));
        }
        Ok(())
    }

    /// Which list each target is expected to land in: `(t_m, t_f)`.
    pub fn expected_lists(&self) -> (BTreeSet<usize>, BTreeSet<usize>) {
        let to_f = self.refuse_reveal
            || match self.field {
                TargetField::Actual => false,
                TargetField::Forecast => !self.commit_false,
                TargetField::Randomness => true,
            };
        if to_f {
            (BTreeSet::new(), self.targets.clone())
        } else {
            (self.targets.clone(), BTreeSet::new())
        }
    }
}

/// Assigns each target its misbehaviour. Returns the factor per target.
/// All targets push the net energy the same way (a buyer scales by `1 + δ`
/// when a seller scales by `1 - δ`), so their deviations add up in the
/// aggregate instead of cancelling. With a zero range every TA stays honest.
pub fn apply_adversary(scenario: &AdversaryScenario, tas: &mut [TaState]) -> Result<Vec<(usize, f64)>> {
    scenario.validate(tas.len())?;
    let mut rng = derive_rng(scenario.seed, u64::MAX);
    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    let (lo, hi) = scenario.perturbation;
    let mut applied = Vec::with_capacity(scenario.targets.len());
    for &t in &scenario.targets {
        let delta = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        let direction = if tas[t].forecast_units().unwrap_or(0) < 0 { -sign } else { sign };
        let factor = 1.0 + direction * delta;
        let mut m = Misbehaviour {
            refuse_reveal: scenario.refuse_reveal,
            ..Misbehaviour::default()
        };
        if delta > 0.0 {
            match scenario.field {
                TargetField::Actual => m.meter_factor = factor,
                // Committing to the lie while delivering it too would leave
                // nothing to detect, so a false commitment goes with honest
                // delivery.
                TargetField::Forecast if scenario.commit_false => m.commit_factor = factor,
                TargetField::Forecast => {
                    m.meter_factor = factor;
                    m.reveal_forecast_factor = factor;
                }
                TargetField::Randomness => {
                    m.meter_factor = factor;
                    m.reveal_randomness_factor = factor;
                }
            }
        }
        tas[t].misbehaviour = m;
        applied.push((t, factor));
    }
    Ok(applied)
}

/// Draws `count` distinct TAs whose forecast magnitude is at least
/// `min_kwh`. Forecasts are given in kWh, indexed by TA.
pub fn choose_targets<R: Rng + ?Sized>(
    forecasts_kwh: &[f64],
    count: usize,
    min_kwh: f64,
    rng: &mut R,
) -> Result<BTreeSet<usize>> {
    let eligible: Vec<usize> = (0..forecasts_kwh.len())
        .filter(|&i| forecasts_kwh[i].abs() >= min_kwh)
        .collect();
    if eligible.len() < count {
        return Err(Error::TooFewTraders {
            requested: count,
            eligible: eligible.len(),
            min_kwh,
        });
    }
    Ok(sample(rng, eligible.len(), count)
        .into_iter()
        .map(|k| eligible[k])
        .collect())
}
