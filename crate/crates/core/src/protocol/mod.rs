//! The settlement protocol between trading agents (TAs) and the operator (TO).

mod adversary;
mod commitment;
mod message;
mod negotiation;
mod online;
mod participants;
mod transport;

pub use adversary::{apply_adversary, choose_targets, AdversaryScenario, TargetField};
pub use commitment::{run_commitment, run_commitment_check, run_keygen, CheckOutcome};
pub use message::{Entity, Message, MessageKind, Payload, Phase, Quantity, SCALAR_BITS};
pub use negotiation::{run_negotiation, NegotiationOutcome};
pub use online::{run_online, BetaPolicy, DetectionReport, OnlineParams, SigmaPolicy};
pub use participants::{derive_rng, Lifecycle, Misbehaviour, TaState, ToState};
pub use transport::{Bus, Fault, StorageEntry, Tamper, Transcript, TranscriptEntry};

/// Whether values are secret-shared among TAs or sent to the operator in
/// the clear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Secure,
    Plain,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Secure => "secure",
            Mode::Plain => "plain",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s {
            "secure" => Ok(Mode::Secure),
            "plain" => Ok(Mode::Plain),
            other => Err(crate::error::Error::InvalidConfig(format!("unknown mode '{other}'"))),
        }
    }
}
