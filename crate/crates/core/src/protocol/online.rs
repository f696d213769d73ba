use std::collections::{BTreeMap, BTreeSet};

use super::message::{Entity, Message, MessageKind, Payload, Phase, Quantity, SCALAR_BITS};
use super::negotiation::{collect_aggregates, collect_shares};
use super::participants::{TaState, ToState};
use super::transport::Bus;
use super::Mode;
use crate::error::{Error, Result};
use crate::pedersen::verify_open;
use crate::sharing::{aggregate_received, split, FieldValue, FixedPointCodec};

/// Per-TA tolerance `σ_n` between forecast and metered energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaPolicy {
    /// `max(fraction · |E_n|, floor)` kWh.
    Relative { fraction: f64, floor: f64 },
    Fixed(f64),
}

impl Default for SigmaPolicy {
    fn default() -> Self {
        SigmaPolicy::Relative {
            fraction: 0.05,
            floor: 0.1,
        }
    }
}

impl SigmaPolicy {
    pub fn threshold(&self, forecast_kwh: f64) -> f64 {
        match *self {
            SigmaPolicy::Relative { fraction, floor } => (fraction * forecast_kwh.abs()).max(floor),
            SigmaPolicy::Fixed(s) => s,
        }
    }
}

/// Aggregate tolerance `β`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum BetaPolicy {
    /// Half the sum of all `σ_n`.
    #[default]
    HalfSigmaSum,
    Fixed(f64),
}

impl BetaPolicy {
    pub fn resolve(&self, sigma: &SigmaPolicy, forecasts_kwh: &[f64]) -> f64 {
        match *self {
            BetaPolicy::HalfSigmaSum => 0.5 * forecasts_kwh.iter().map(|&e| sigma.threshold(e)).sum::<f64>(),
            BetaPolicy::Fixed(b) => b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnlineParams {
    pub beta: f64,
    pub sigma: SigmaPolicy,
    /// Run the individual checks even when the aggregate is within `β`.
    pub force_reveal: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionReport {
    /// Opened correctly but metered energy strays from the forecast.
    pub t_m_list: BTreeSet<usize>,
    /// Failed to open its commitment (or refused to).
    pub t_f_list: BTreeSet<usize>,
    /// Aggregate metered energy, kWh.
    pub e_total: f64,
    /// Aggregate committed forecast, kWh.
    pub forecast_total: f64,
    pub triggered: bool,
    pub comparisons: u64,
}

impl DetectionReport {
    pub fn flagged(&self) -> BTreeSet<usize> {
        self.t_m_list.union(&self.t_f_list).copied().collect()
    }
}

/// Applies the meter to every TA's true forecast.
fn meter_all(tas: &mut [TaState], bus: &Bus) -> Result<Vec<i64>> {
    let mut out = Vec::with_capacity(tas.len());
    for (i, ta) in tas.iter_mut().enumerate() {
        let forecast = ta
            .forecast_units()
            .ok_or_else(|| ta.lifecycle("online phase before negotiation finished"))?;
        let f = ta.misbehaviour.meter_factor;
        let units = if f == 1.0 {
            forecast
        } else {
            (forecast as f64 * f).round() as i64
        };
        ta.store_actual(units);
        bus.record_storage(Phase::Online, Entity::ta(i), "e_n", SCALAR_BITS);
        out.push(units);
    }
    Ok(out)
}

fn scale_field_value(codec: &FixedPointCodec, v: FieldValue, factor: f64, centered: bool) -> FieldValue {
    if factor == 1.0 {
        return v;
    }
    let field = codec.field();
    if centered {
        let units = field.centered(v);
        field.from_signed((units as f64 * factor).round() as i128)
    } else {
        let scaled = field.element((v.value() as f64 * factor).round() as u64);
        if scaled == v {
            field.add(v, field.element(1))
        } else {
            scaled
        }
    }
}

/// Online settlement. `wire` carries metered values, `commit_codec` decodes
/// committed forecasts in `Z_p`.
pub fn run_online(
    tas: &mut [TaState],
    to: &mut ToState,
    wire: &FixedPointCodec,
    commit_codec: &FixedPointCodec,
    params: &OnlineParams,
    mode: Mode,
    bus: &Bus,
) -> Result<DetectionReport> {
    match mode {
        Mode::Secure => run_online_secure(tas, to, wire, commit_codec, params, bus),
        Mode::Plain => run_online_plain(tas, to, wire, params, bus),
    }
}

fn run_online_secure(
    tas: &mut [TaState],
    to: &mut ToState,
    wire: &FixedPointCodec,
    commit_codec: &FixedPointCodec,
    params: &OnlineParams,
    bus: &Bus,
) -> Result<DetectionReport> {
    let n = tas.len();
    let phase = Phase::Online;
    let field = *wire.field();
    let ck = to
        .ck
        .clone()
        .ok_or_else(|| Error::ProtocolAbort("operator holds no commitment key".into()))?;
    let forecast_total = to
        .forecast_total()
        .ok_or_else(|| Error::ProtocolAbort("no accepted commitment for this slot".into()))?;
    if to.stored_commitments().len() != n {
        return Err(Error::ProtocolAbort("commitment count does not match TA count".into()));
    }

    let actual = meter_all(tas, bus)?;
    let mut own = Vec::with_capacity(n);
    for (i, ta) in tas.iter_mut().enumerate() {
        let shares = split(&field, wire.encode_units(actual[i]), n, i, &mut ta.rng)?;
        own.push(shares.share(i));
        for j in (0..n).filter(|&j| j != i) {
            bus.send(Message::new(
                phase,
                MessageKind::ShareTransfer,
                Entity::ta(i),
                Entity::ta(j),
                Payload::Share {
                    of: Quantity::Actual,
                    value: shares.share(j),
                },
            ))?;
        }
    }
    for (i, own_share) in own.into_iter().enumerate() {
        let mut received = collect_shares(bus, i, Quantity::Actual);
        received.push(own_share);
        let agg = aggregate_received(&field, &received, n)?;
        bus.send(Message::new(
            phase,
            MessageKind::AggregateSubmit,
            Entity::ta(i),
            Entity::To,
            Payload::Aggregate {
                of: Quantity::Actual,
                value: agg,
            },
        ))?;
    }

    let e_total = wire.decode(aggregate_received(&field, &collect_aggregates(bus, Quantity::Actual), n)?);
    let mut report = DetectionReport {
        e_total,
        forecast_total: commit_codec.decode(forecast_total),
        comparisons: 1,
        ..Default::default()
    };
    report.triggered = (report.forecast_total - e_total).abs() > params.beta;

    if report.triggered || params.force_reveal {
        bus.send(Message::new(
            phase,
            MessageKind::RevealRequest,
            Entity::To,
            Entity::AllTas,
            Payload::Empty,
        ))?;
        for (i, ta) in tas.iter_mut().enumerate() {
            bus.drain(Entity::ta(i));
            if ta.misbehaviour.refuse_reveal {
                continue;
            }
            let (committed, r) = match (ta.committed(), ta.randomness()) {
                (Some(c), Some(r)) => (c, r),
                _ => return Err(ta.lifecycle("reveal requested before commitment")),
            };
            let m = ta.misbehaviour;
            bus.send(Message::new(
                phase,
                MessageKind::Reveal,
                Entity::ta(i),
                Entity::To,
                Payload::Reveal {
                    forecast: scale_field_value(commit_codec, committed, m.reveal_forecast_factor, true),
                    randomness: scale_field_value(commit_codec, r, m.reveal_randomness_factor, false),
                    actual: wire.encode_units(actual[i]),
                },
            ))?;
        }

        let reveals: BTreeMap<usize, (FieldValue, FieldValue, FieldValue)> = bus
            .drain(Entity::To)
            .into_iter()
            .filter_map(|msg| match (msg.sender, msg.payload) {
                (
                    Entity::Ta(s),
                    Payload::Reveal {
                        forecast,
                        randomness,
                        actual,
                    },
                ) => Some((s as usize, (forecast, randomness, actual))),
                _ => None,
            })
            .collect();

        for (i, c) in to.stored_commitments().iter().enumerate() {
            let Some(&(forecast, randomness, actual)) = reveals.get(&i) else {
                report.t_f_list.insert(i);
                continue;
            };
            report.comparisons += 1;
            if !verify_open(&ck, c, forecast, randomness) {
                report.t_f_list.insert(i);
                continue;
            }
            let e_n = commit_codec.decode(forecast);
            report.comparisons += 1;
            if (e_n - wire.decode(actual)).abs() > params.sigma.threshold(e_n) {
                report.t_m_list.insert(i);
            }
        }
        for i in report.flagged() {
            bus.send(Message::new(
                phase,
                MessageKind::FlagNotify,
                Entity::To,
                Entity::ta(i),
                Payload::Empty,
            ))?;
            bus.drain(Entity::ta(i));
        }
    }

    for ta in tas.iter_mut() {
        ta.settle();
    }
    Ok(report)
}

fn run_online_plain(
    tas: &mut [TaState],
    to: &mut ToState,
    wire: &FixedPointCodec,
    params: &OnlineParams,
    bus: &Bus,
) -> Result<DetectionReport> {
    let n = tas.len();
    let phase = Phase::Online;
    if to.plain_forecasts.len() != n {
        return Err(Error::ProtocolAbort("no stored forecasts for this slot".into()));
    }
    let actual = meter_all(tas, bus)?;
    for (i, &units) in actual.iter().enumerate() {
        bus.send(Message::new(
            phase,
            MessageKind::AggregateSubmit,
            Entity::ta(i),
            Entity::To,
            Payload::Aggregate {
                of: Quantity::Actual,
                value: wire.encode_units(units),
            },
        ))?;
    }
    let mut received: Vec<(usize, FieldValue)> = bus
        .drain(Entity::To)
        .into_iter()
        .filter_map(|m| match (m.sender, m.payload) {
            (Entity::Ta(s), Payload::Aggregate { of: Quantity::Actual, value }) => Some((s as usize, value)),
            _ => None,
        })
        .collect();
    received.sort_by_key(|r| r.0);
    if received.len() != n {
        return Err(Error::IncompleteShares {
            expected: n,
            got: received.len(),
        });
    }

    let forecasts: Vec<f64> = to.plain_forecasts.iter().map(|&u| wire.units_to_kwh(u)).collect();
    let mut report = DetectionReport {
        forecast_total: forecasts.iter().sum(),
        ..Default::default()
    };
    for (i, value) in received {
        let e_n = wire.decode(value);
        report.e_total += e_n;
        report.comparisons += 1;
        if (forecasts[i] - e_n).abs() > params.sigma.threshold(forecasts[i]) {
            report.t_m_list.insert(i);
        }
    }
    report.triggered = (report.forecast_total - report.e_total).abs() > params.beta;
    for ta in tas.iter_mut() {
        ta.settle();
    }
    Ok(report)
}
