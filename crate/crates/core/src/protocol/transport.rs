//! In-memory, loss-free, per-sender ordered message bus. Every send is logged
//! to a [`Transcript`] with its accounted size.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Mutex;

use super::message::{Entity, Message, MessageKind, Phase};
use crate::error::{Error, Result};

/// One logged send. Broadcasts appear once.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub phase: Phase,
    pub kind: MessageKind,
    pub sender: Entity,
    pub receiver: Entity,
    pub bits: u64,
}

/// Something an entity keeps after a phase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StorageEntry {
    pub phase: Phase,
    pub entity: Entity,
    pub item: &'static str,
    pub bits: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    pub messages: Vec<TranscriptEntry>,
    pub storage: Vec<StorageEntry>,
}

impl Transcript {
    /// Bits sent by `entity` during `phase`.
    pub fn sent_bits(&self, phase: Phase, entity: Entity) -> u64 {
        self.messages
            .iter()
            .filter(|m| m.phase == phase && m.sender == entity)
            .map(|m| m.bits)
            .sum()
    }

    /// Bits sent during `phase`, keyed by sender.
    pub fn sent_bits_by_entity(&self, phase: Phase) -> BTreeMap<Entity, u64> {
        let mut out = BTreeMap::new();
        for m in self.messages.iter().filter(|m| m.phase == phase) {
            *out.entry(m.sender).or_insert(0) += m.bits;
        }
        out
    }

    pub fn stored_bits(&self, phase: Phase, entity: Entity) -> u64 {
        self.storage
            .iter()
            .filter(|s| s.phase == phase && s.entity == entity)
            .map(|s| s.bits)
            .sum()
    }

    pub fn stored_bits_by_entity(&self, phase: Phase) -> BTreeMap<Entity, u64> {
        let mut out = BTreeMap::new();
        for s in self.storage.iter().filter(|s| s.phase == phase) {
            *out.entry(s.entity).or_insert(0) += s.bits;
        }
        out
    }

    pub fn count(&self, phase: Phase, kind: MessageKind) -> usize {
        self.messages
            .iter()
            .filter(|m| m.phase == phase && m.kind == kind)
            .count()
    }
}

/// Injected link failure: the `after`-th send (0-based, counted across all
/// phases) fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fault {
    pub after: u64,
}

/// Rewrites a message in flight (link-level false data injection).
pub type Tamper = Box<dyn Fn(&mut Message) + Send + Sync>;

struct BusState {
    inboxes: Vec<VecDeque<Message>>,
    transcript: Transcript,
    sent: u64,
}

pub struct Bus {
    n_tas: usize,
    state: Mutex<BusState>,
    fault: Option<Fault>,
    tamper: Option<Tamper>,
}

impl std::fmt::Debug for Bus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Bus")
            .field("n_tas", &self.n_tas)
            .field("fault", &self.fault)
            .field("tamper", &self.tamper.is_some())
            .finish()
    }
}

impl Bus {
    pub fn new(n_tas: usize) -> Self {
        Self {
            n_tas,
            state: Mutex::new(BusState {
                inboxes: (0..=n_tas).map(|_| VecDeque::new()).collect(),
                transcript: Transcript::default(),
                sent: 0,
            }),
            fault: None,
            tamper: None,
        }
    }

    pub fn with_fault(mut self, fault: Fault) -> Self {
        self.fault = Some(fault);
        self
    }

    pub fn with_tamper(mut self, tamper: Tamper) -> Self {
        self.tamper = Some(tamper);
        self
    }

    pub fn n_tas(&self) -> usize {
        self.n_tas
    }

    fn slot(&self, entity: Entity) -> usize {
        match entity {
            Entity::Ta(n) => n as usize,
            Entity::To => self.n_tas,
            Entity::AllTas => unreachable!("broadcast address has no inbox"),
        }
    }

    pub fn send(&self, mut msg: Message) -> Result<()> {
        let mut state = self.state.lock().expect("bus lock poisoned");
        if let Some(fault) = self.fault {
            if state.sent >= fault.after {
                return Err(Error::Transport {
                    phase: msg.phase,
                    sent: state.sent,
                });
            }
        }
        if let Some(tamper) = &self.tamper {
            tamper(&mut msg);
            msg.bits = msg.payload.bits();
        }
        state.sent += 1;
        state.transcript.messages.push(TranscriptEntry {
            phase: msg.phase,
            kind: msg.kind,
            sender: msg.sender,
            receiver: msg.receiver,
            bits: msg.bits,
        });
        match msg.receiver {
            Entity::AllTas => {
                for inbox in state.inboxes.iter_mut().take(self.n_tas) {
                    inbox.push_back(msg.clone());
                }
            }
            other => {
                let slot = self.slot(other);
                state.inboxes[slot].push_back(msg);
            }
        }
        Ok(())
    }

    /// Drains everything queued for `entity`, in arrival order.
    pub fn drain(&self, entity: Entity) -> Vec<Message> {
        let slot = self.slot(entity);
        let mut state = self.state.lock().expect("bus lock poisoned");
        state.inboxes[slot].drain(..).collect()
    }

    pub fn record_storage(&self, phase: Phase, entity: Entity, item: &'static str, bits: u64) {
        let mut state = self.state.lock().expect("bus lock poisoned");
        state.transcript.storage.push(StorageEntry {
            phase,
            entity,
            item,
            bits,
        });
    }

    pub fn transcript(&self) -> Transcript {
        self.state.lock().expect("bus lock poisoned").transcript.clone()
    }

    pub fn into_transcript(self) -> Transcript {
        self.state
            .into_inner()
            .expect("bus lock poisoned")
            .transcript
    }
}
