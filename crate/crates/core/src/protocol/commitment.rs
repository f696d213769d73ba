use std::sync::Arc;

use super::message::{Entity, Message, MessageKind, Payload, Phase, Quantity, SCALAR_BITS};
use super::participants::{TaState, ToState};
use super::transport::Bus;
use crate::error::{Error, Result};
use crate::numtheory::GroupParams;
use crate::pedersen::{commit, product, Commitment};
use crate::sharing::{aggregate_received, split, FieldValue, FixedPointCodec};

/// The operator publishes the commitment key; every TA keeps a copy.
pub fn run_keygen(tas: &mut [TaState], to: &mut ToState, ck: Arc<GroupParams>, bus: &Bus) -> Result<()> {
    let bits = ck.wire_bits();
    to.ck = Some(ck.clone());
    bus.record_storage(Phase::KeyGen, Entity::To, "ck", bits);
    bus.send(Message::new(
        Phase::KeyGen,
        MessageKind::KeyBroadcast,
        Entity::To,
        Entity::AllTas,
        Payload::Key(ck),
    ))?;
    for (i, ta) in tas.iter_mut().enumerate() {
        let key = bus
            .drain(Entity::ta(i))
            .into_iter()
            .find_map(|m| match m.payload {
                Payload::Key(k) => Some(k),
                _ => None,
            })
            .ok_or_else(|| ta.lifecycle("no commitment key received"))?;
        ta.ck = Some(key);
        bus.record_storage(Phase::KeyGen, Entity::ta(i), "ck", bits);
    }
    Ok(())
}

/// Builds `E_n` in `Z_p` for one TA, applying its commit-time misbehaviour.
fn committed_value(ta: &TaState, codec: &FixedPointCodec) -> Result<FieldValue> {
    let units = ta
        .forecast_units()
        .ok_or_else(|| ta.lifecycle("commitment before negotiation finished"))?;
    let factor = ta.misbehaviour.commit_factor;
    let units = if factor == 1.0 {
        units
    } else {
        (units as f64 * factor).round() as i64
    };
    if 2 * (units.unsigned_abs() as u128) >= codec.field().modulus() as u128 {
        return Err(Error::EncodingRange {
            value: codec.units_to_kwh(units),
        });
    }
    Ok(codec.encode_units(units))
}

/// Every TA commits to its forecast, shares `E_n` and `r_n` in `Z_p` and
/// submits its commitment with the two share sums.
pub fn run_commitment(tas: &mut [TaState], codec: &FixedPointCodec, bus: &Bus) -> Result<()> {
    let n = tas.len();
    let field = *codec.field();
    let phase = Phase::Commitment;
    let mut own = Vec::with_capacity(n);
    let mut commitments = Vec::with_capacity(n);

    for (i, ta) in tas.iter_mut().enumerate() {
        let ck = ta.ck.clone().ok_or_else(|| ta.lifecycle("no commitment key"))?;
        let e = committed_value(ta, codec)?;
        let r = field.random(&mut ta.rng);
        commitments.push(commit(&ck, e, r));
        ta.store_commitment_secret(e, r)?;
        bus.record_storage(phase, Entity::ta(i), "r_n", SCALAR_BITS);

        let e_shares = split(&field, e, n, i, &mut ta.rng)?;
        let r_shares = split(&field, r, n, i, &mut ta.rng)?;
        own.push((e_shares.share(i), r_shares.share(i)));
        for j in (0..n).filter(|&j| j != i) {
            for (of, value) in [
                (Quantity::Forecast, e_shares.share(j)),
                (Quantity::Randomness, r_shares.share(j)),
            ] {
                bus.send(Message::new(
                    phase,
                    MessageKind::ShareTransfer,
                    Entity::ta(i),
                    Entity::ta(j),
                    Payload::Share { of, value },
                ))?;
            }
        }
    }

    for (i, commitment) in commitments.into_iter().enumerate() {
        let inbox = bus.drain(Entity::ta(i));
        let pick = |want: Quantity| -> Vec<FieldValue> {
            inbox
                .iter()
                .filter_map(|m| match m.payload {
                    Payload::Share { of, value } if of == want => Some(value),
                    _ => None,
                })
                .collect()
        };
        let mut e_recv = pick(Quantity::Forecast);
        let mut r_recv = pick(Quantity::Randomness);
        e_recv.push(own[i].0);
        r_recv.push(own[i].1);
        let forecast_agg = aggregate_received(&field, &e_recv, n)?;
        let randomness_agg = aggregate_received(&field, &r_recv, n)?;
        bus.send(Message::new(
            phase,
            MessageKind::CommitmentSubmit,
            Entity::ta(i),
            Entity::To,
            Payload::Commitment {
                commitment,
                forecast_agg,
                randomness_agg,
            },
        ))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckOutcome {
    Accepted,
    Rejected,
}

/// The operator checks that the product of the individual commitments opens
/// to the aggregated forecast and randomness.
pub fn run_commitment_check(to: &mut ToState, n: usize, codec: &FixedPointCodec, bus: &Bus) -> Result<CheckOutcome> {
    let phase = Phase::CommitmentCheck;
    let ck = to
        .ck
        .clone()
        .ok_or_else(|| Error::ProtocolAbort("operator holds no commitment key".into()))?;
    let field = *codec.field();

    let mut submissions: Vec<(u32, Commitment, FieldValue, FieldValue)> = bus
        .drain(Entity::To)
        .into_iter()
        .filter_map(|m| match (m.sender, m.payload) {
            (
                Entity::Ta(s),
                Payload::Commitment {
                    commitment,
                    forecast_agg,
                    randomness_agg,
                },
            ) => Some((s, commitment, forecast_agg, randomness_agg)),
            _ => None,
        })
        .collect();
    submissions.sort_by_key(|s| s.0);
    if submissions.len() != n {
        return Err(Error::IncompleteShares {
            expected: n,
            got: submissions.len(),
        });
    }

    let c_ta = product(submissions.iter().map(|s| &s.1), &ck)?;
    let e_total = field.sum(submissions.iter().map(|s| s.2));
    let r_total = field.sum(submissions.iter().map(|s| s.3));
    let c_to = commit(&ck, e_total, r_total);

    let outcome = if c_ta.value() == c_to.value() {
        to.store_check(submissions.into_iter().map(|s| s.1).collect(), e_total);
        bus.record_storage(phase, Entity::To, "C_1..C_N", n as u64 * ck.bits_q());
        bus.record_storage(phase, Entity::To, "E", SCALAR_BITS);
        CheckOutcome::Accepted
    } else {
        CheckOutcome::Rejected
    };
    let kind = match outcome {
        CheckOutcome::Accepted => MessageKind::AcceptNotify,
        CheckOutcome::Rejected => MessageKind::RejectNotify,
    };
    bus.send(Message::new(phase, kind, Entity::To, Entity::AllTas, Payload::Empty))?;
    for i in 0..n {
        bus.drain(Entity::ta(i));
    }
    Ok(outcome)
}
