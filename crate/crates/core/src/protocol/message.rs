use std::fmt;
use std::sync::Arc;

use crate::numtheory::GroupParams;
use crate::pedersen::Commitment;
use crate::sharing::FieldValue;

/// Wire size of every scalar: shares, aggregates, prices and revealed values.
pub const SCALAR_BITS: u64 = 32;

/// Protocol phase, named as in the CSV output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    Negotiation,
    KeyGen,
    Commitment,
    CommitmentCheck,
    Online,
}

impl Phase {
    pub const ALL: [Phase; 5] = [
        Phase::Negotiation,
        Phase::KeyGen,
        Phase::Commitment,
        Phase::CommitmentCheck,
        Phase::Online,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Negotiation => "negotiation",
            Phase::KeyGen => "keygen",
            Phase::Commitment => "commitment",
            Phase::CommitmentCheck => "commitment_check",
            Phase::Online => "online",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A protocol endpoint. `AllTas` is the broadcast address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Entity {
    Ta(u32),
    To,
    AllTas,
}

impl Entity {
    pub fn ta(index: usize) -> Self {
        Entity::Ta(index as u32)
    }
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entity::Ta(n) => write!(f, "TA{}", n + 1),
            Entity::To => f.write_str("TO"),
            Entity::AllTas => f.write_str("TA*"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MessageKind {
    PriceSignal,
    ShareTransfer,
    AggregateSubmit,
    CommitmentSubmit,
    KeyBroadcast,
    AcceptNotify,
    RejectNotify,
    RevealRequest,
    Reveal,
    FlagNotify,
}

/// Which secret a share or aggregate belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantity {
    /// Per-iteration traded energy during negotiation.
    TradedEnergy,
    /// Stored forecast `E_n`, shared in `Z_p`.
    Forecast,
    /// Commitment randomness `r_n`, shared in `Z_p`.
    Randomness,
    /// Metered energy `e_n`.
    Actual,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Empty,
    Price(f64),
    Share { of: Quantity, value: FieldValue },
    Aggregate { of: Quantity, value: FieldValue },
    Key(Arc<GroupParams>),
    Commitment {
        commitment: Commitment,
        forecast_agg: FieldValue,
        randomness_agg: FieldValue,
    },
    Reveal {
        forecast: FieldValue,
        randomness: FieldValue,
        actual: FieldValue,
    },
}

impl Payload {
    /// Size under the accounting model.
    pub fn bits(&self) -> u64 {
        match self {
            Payload::Empty => 0,
            Payload::Price(_) | Payload::Share { .. } | Payload::Aggregate { .. } => SCALAR_BITS,
            Payload::Key(ck) => ck.wire_bits(),
            Payload::Commitment { commitment, .. } => commitment.bits() + 2 * SCALAR_BITS,
            Payload::Reveal { .. } => 3 * SCALAR_BITS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub phase: Phase,
    pub kind: MessageKind,
    pub sender: Entity,
    pub receiver: Entity,
    pub payload: Payload,
    pub bits: u64,
}

impl Message {
    pub fn new(phase: Phase, kind: MessageKind, sender: Entity, receiver: Entity, payload: Payload) -> Self {
        let bits = payload.bits();
        Self {
            phase,
            kind,
            sender,
            receiver,
            payload,
            bits,
        }
    }
}
