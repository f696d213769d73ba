use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::market::{TaMarketState, TaProfile};
use crate::numtheory::GroupParams;
use crate::pedersen::Commitment;
use crate::sharing::FieldValue;

/// Per-entity random source: one ChaCha stream per participant under a
/// shared seed. Stream 0 belongs to the operator.
pub fn derive_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Lifecycle {
    Idle,
    Negotiated,
    Committed,
    Settled,
}

/// How a participant departs from the protocol. The default is honest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Misbehaviour {
    /// Multiplies the metered energy.
    pub meter_factor: f64,
    /// Multiplies the forecast before it is committed.
    pub commit_factor: f64,
    /// Multiplies the forecast disclosed at reveal time.
    pub reveal_forecast_factor: f64,
    /// Multiplies the randomness disclosed at reveal time.
    pub reveal_randomness_factor: f64,
    pub refuse_reveal: bool,
}

impl Default for Misbehaviour {
    fn default() -> Self {
        Self {
            meter_factor: 1.0,
            commit_factor: 1.0,
            reveal_forecast_factor: 1.0,
            reveal_randomness_factor: 1.0,
            refuse_reveal: false,
        }
    }
}

impl Misbehaviour {
    pub fn is_honest(&self) -> bool {
        *self == Self::default()
    }
}

/// A participant (TA).
#[derive(Debug, Clone)]
pub struct TaState {
    pub index: usize,
    pub profile: TaProfile,
    pub market: TaMarketState,
    pub(crate) rng: ChaCha20Rng,
    pub ck: Option<Arc<GroupParams>>,
    /// Final traded energy, fixed-point units, signed net demand.
    forecast: Option<i64>,
    /// Forecast as committed, in `Z_p`.
    committed: Option<FieldValue>,
    randomness: Option<FieldValue>,
    /// Metered energy, fixed-point units.
    actual: Option<i64>,
    pub phase: Lifecycle,
    pub misbehaviour: Misbehaviour,
}

impl TaState {
    pub fn new(profile: TaProfile, crypto_seed: u64) -> Self {
        let index = profile.index;
        Self {
            index,
            market: TaMarketState::new(&profile),
            profile,
            rng: derive_rng(crypto_seed, index as u64 + 1),
            ck: None,
            forecast: None,
            committed: None,
            randomness: None,
            actual: None,
            phase: Lifecycle::Idle,
            misbehaviour: Misbehaviour::default(),
        }
    }

    pub fn forecast_units(&self) -> Option<i64> {
        self.forecast
    }

    pub fn committed(&self) -> Option<FieldValue> {
        self.committed
    }

    pub fn randomness(&self) -> Option<FieldValue> {
        self.randomness
    }

    pub fn actual_units(&self) -> Option<i64> {
        self.actual
    }

    pub(crate) fn store_forecast(&mut self, units: i64) -> Result<()> {
        if self.forecast.is_some() {
            return Err(self.lifecycle("forecast already stored"));
        }
        self.forecast = Some(units);
        self.phase = Lifecycle::Negotiated;
        Ok(())
    }

    pub(crate) fn store_commitment_secret(&mut self, committed: FieldValue, r: FieldValue) -> Result<()> {
        if self.randomness.is_some() {
            return Err(self.lifecycle("randomness already drawn for this slot"));
        }
        self.committed = Some(committed);
        self.randomness = Some(r);
        self.phase = Lifecycle::Committed;
        Ok(())
    }

    pub(crate) fn store_actual(&mut self, units: i64) {
        self.actual = Some(units);
    }

    /// Ends the slot: the randomness is discarded.
    pub(crate) fn settle(&mut self) {
        self.randomness = None;
        self.phase = Lifecycle::Settled;
    }

    pub(crate) fn lifecycle(&self, reason: &str) -> Error {
        Error::Lifecycle {
            ta: self.index,
            reason: reason.to_string(),
        }
    }
}

/// The operator (TO).
#[derive(Debug, Clone, Default)]
pub struct ToState {
    pub ck: Option<Arc<GroupParams>>,
    stored_commitments: Vec<Commitment>,
    /// Aggregate forecast in `Z_p`, kept only after an accepted check.
    forecast_total: Option<FieldValue>,
    /// Final per-TA contributions; used by the plain pipeline only.
    pub(crate) plain_forecasts: Vec<i64>,
}

impl ToState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stored_commitments(&self) -> &[Commitment] {
        &self.stored_commitments
    }

    pub fn forecast_total(&self) -> Option<FieldValue> {
        self.forecast_total
    }

    pub(crate) fn store_check(&mut self, commitments: Vec<Commitment>, total: FieldValue) {
        self.stored_commitments = commitments;
        self.forecast_total = Some(total);
    }
}
