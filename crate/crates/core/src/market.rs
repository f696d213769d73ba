//! Distributed pricing: per-participant dual and energy updates, the
//! operator's price update and the stopping rule.
//!
//! Every participant keeps its traded energy `E ≥ 0` as a magnitude. Buyers
//! respond to the price through their marginal utility `ψ − χE`, sellers
//! through their marginal cost `ψ + χE`. What the operator aggregates is the
//! net demand `Σ buyers E − Σ sellers E`, so a positive sum pushes the price
//! up and a negative one pushes it down.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::sharing::FixedPointCodec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Seller,
    Buyer,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Seller => "seller",
            Role::Buyer => "buyer",
        })
    }
}

/// A participant's market parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TaProfile {
    pub index: usize,
    /// Forecast surplus (> 0) or deficit (< 0) in kWh.
    pub e_tot: f64,
    pub v_lo_init: f64,
    pub v_hi_init: f64,
    /// ¢/kWh
    pub psi: f64,
    /// ¢/kWh²
    pub chi: f64,
    pub role: Role,
}

impl TaProfile {
    /// Signed net-demand contribution of a traded magnitude.
    pub fn contribution(&self, energy: f64) -> f64 {
        match self.role {
            Role::Buyer => energy,
            Role::Seller => -energy,
        }
    }

    /// Volume cap used by the upper dual.
    pub fn capacity(&self) -> f64 {
        self.e_tot.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketConfig {
    /// Step for the participant-side updates (duals and energy).
    pub zeta: f64,
    /// Step for the operator's price update.
    pub price_step: f64,
    /// ¢/kWh
    pub epsilon: f64,
    pub varsigma: u32,
    /// ¢/kWh
    pub gamma_init: f64,
    /// Ignore `epsilon` and run exactly `varsigma` iterations.
    pub run_to_cap: bool,
}

impl Default for MarketConfig {
    fn default() -> Self {
        Self {
            zeta: 0.2,
            price_step: 0.005,
            epsilon: 0.001,
            varsigma: 100,
            gamma_init: 10.0,
            run_to_cap: false,
        }
    }
}

impl MarketConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive, got {x}")))
            }
        };
        positive("zeta", self.zeta)?;
        positive("price_step", self.price_step)?;
        positive("epsilon", self.epsilon)?;
        if self.varsigma < 1 {
            return Err(Error::InvalidConfig("varsigma must be at least 1".into()));
        }
        if !(self.gamma_init >= 0.0 && self.gamma_init.is_finite()) {
            return Err(Error::InvalidConfig("gamma_init must be non-negative".into()));
        }
        Ok(())
    }
}

/// Lower and upper dual after one step:
/// `v̲' = [v̲ − ζE]⁺`, `v̄' = [v̄ + ζ(E − |E_tot|)]⁺`.
pub fn update_duals(v_lo: f64, v_hi: f64, energy: f64, zeta: f64, e_tot: f64) -> (f64, f64) {
    let lo = (v_lo - zeta * energy).max(0.0);
    let hi = (v_hi + zeta * (energy - e_tot.abs())).max(0.0);
    (lo, hi)
}

/// `E' = [E + ζ((drive + v̲' − v̄')/χ − E)]⁺` where the drive is `ψ − γ` for
/// buyers and `γ − ψ` for sellers.
#[allow(clippy::too_many_arguments)]
pub fn update_energy(
    energy: f64,
    gamma: f64,
    zeta: f64,
    psi: f64,
    chi: f64,
    v_lo: f64,
    v_hi: f64,
    role: Role,
) -> Result<f64> {
    if chi == 0.0 || !chi.is_finite() {
        return Err(Error::DegeneratePreference);
    }
    let drive = match role {
        Role::Buyer => psi - gamma,
        Role::Seller => gamma - psi,
    };
    Ok((energy + zeta * ((drive + v_lo - v_hi) / chi - energy)).max(0.0))
}

/// `γ' = [γ + step · ΣE]⁺` with `ΣE` the signed net demand.
pub fn update_price(gamma: f64, step: f64, net_demand: f64) -> f64 {
    (gamma + step * net_demand).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convergence {
    Continue,
    Converged,
    IterationCap,
}

impl fmt::Display for Convergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Convergence::Continue => "continue",
            Convergence::Converged => "converged",
            Convergence::IterationCap => "iteration_cap",
        })
    }
}

/// `k` is the index of the next iteration, i.e. the count already run plus one.
pub fn check_convergence(gamma_new: f64, gamma_old: f64, k: u32, config: &MarketConfig) -> Convergence {
    if !config.run_to_cap && (gamma_new - gamma_old).abs() < config.epsilon {
        Convergence::Converged
    } else if k > config.varsigma {
        Convergence::IterationCap
    } else {
        Convergence::Continue
    }
}

/// Iterate held by one participant between price signals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaMarketState {
    pub v_lo: f64,
    pub v_hi: f64,
    pub energy: f64,
}

impl TaMarketState {
    pub fn new(profile: &TaProfile) -> Self {
        Self {
            v_lo: profile.v_lo_init,
            v_hi: profile.v_hi_init,
            energy: 0.0,
        }
    }

    /// One participant-side iteration against price `gamma`; returns `E^{k+1}`.
    pub fn step(&mut self, profile: &TaProfile, gamma: f64, zeta: f64) -> Result<f64> {
        let (lo, hi) = update_duals(self.v_lo, self.v_hi, self.energy, zeta, profile.e_tot);
        let energy = update_energy(self.energy, gamma, zeta, profile.psi, profile.chi, lo, hi, profile.role)?;
        *self = Self { v_lo: lo, v_hi: hi, energy };
        Ok(energy)
    }
}

/// Ranges the scenario sampler draws from.
pub mod ranges {
    pub const V_LO: (f64, f64) = (0.0, 5.0);
    pub const V_HI: (f64, f64) = (3.0, 20.0);
    pub const CHI: (f64, f64) = (0.09, 0.1);
    pub const PSI: (f64, f64) = (24.0, 38.0);
    pub const E_TOT: (f64, f64) = (0.0, 20.0);
}

/// Half sellers (indices `0..n/2`) and half buyers, every parameter uniform in
/// its range.
pub fn sample_profiles<R: Rng + ?Sized>(n_tas: usize, rng: &mut R) -> Result<Vec<TaProfile>> {
    if n_tas < 2 || !n_tas.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "n_tas must be even and at least 2, got {n_tas}"
        )));
    }
    let mut draw = |(lo, hi): (f64, f64)| rng.gen_range(lo..=hi);
    Ok((0..n_tas)
        .map(|index| {
            let role = if index < n_tas / 2 { Role::Seller } else { Role::Buyer };
            let v_lo_init = draw(ranges::V_LO);
            let v_hi_init = draw(ranges::V_HI);
            let chi = draw(ranges::CHI);
            let psi = draw(ranges::PSI);
            let magnitude = draw(ranges::E_TOT);
            let e_tot = match role {
                Role::Seller => magnitude,
                Role::Buyer => -magnitude,
            };
            TaProfile {
                index,
                e_tot,
                v_lo_init,
                v_hi_init,
                psi,
                chi,
                role,
            }
        })
        .collect())
}

/// Result of a centrally computed negotiation.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceOutcome {
    /// `γ_1, γ_2, ...` including the final price.
    pub gammas: Vec<f64>,
    pub energies: Vec<f64>,
    pub iterations: u32,
    pub status: Convergence,
}

impl ReferenceOutcome {
    pub fn clearing_price(&self) -> f64 {
        *self.gammas.last().expect("at least gamma_init")
    }
}

/// The pricing loop without any sharing. Each contribution is quantized with
/// `codec` before summation, as the secure pipeline does.
pub fn run_reference(
    profiles: &[TaProfile],
    config: &MarketConfig,
    codec: &FixedPointCodec,
) -> Result<ReferenceOutcome> {
    config.validate()?;
    let mut states: Vec<TaMarketState> = profiles.iter().map(TaMarketState::new).collect();
    let mut gamma = config.gamma_init;
    let mut gammas = vec![gamma];
    let mut k = 1u32;
    let status = loop {
        let mut units = 0i64;
        for (state, profile) in states.iter_mut().zip(profiles) {
            let e = state.step(profile, gamma, config.zeta)?;
            units += codec.quantize(profile.contribution(e))?;
        }
        let next = update_price(gamma, config.price_step, codec.units_to_kwh(units));
        k += 1;
        let status = check_convergence(next, gamma, k, config);
        gamma = next;
        gammas.push(gamma);
        if status != Convergence::Continue {
            break status;
        }
    };
    Ok(ReferenceOutcome {
        gammas,
        energies: states.iter().map(|s| s.energy).collect(),
        iterations: k - 1,
        status,
    })
}
