use super::message::{Entity, Message, MessageKind, Payload, Phase, Quantity, SCALAR_BITS};
use super::participants::{TaState, ToState};
use super::transport::Bus;
use super::Mode;
use crate::error::{Error, Result};
use crate::market::{check_convergence, update_price, Convergence, MarketConfig};
use crate::sharing::{aggregate_received, split, FieldValue, FixedPointCodec};

#[derive(Debug, Clone, PartialEq)]
pub struct NegotiationOutcome {
    pub clearing_price: f64,
    /// Price broadcast at each iteration followed by the final price.
    pub gammas: Vec<f64>,
    pub iterations: u32,
    pub status: Convergence,
}

/// Iterative price negotiation. In secure mode every participant splits its
/// quantized net demand into `N` shares, keeps one and hands out the rest; the
/// operator only ever sees per-participant sums of shares. In plain mode the
/// quantized values go to the operator directly.
pub fn run_negotiation(
    tas: &mut [TaState],
    to: &mut ToState,
    config: &MarketConfig,
    codec: &FixedPointCodec,
    mode: Mode,
    bus: &Bus,
) -> Result<NegotiationOutcome> {
    let n = tas.len();
    if n < 2 {
        return Err(Error::InvalidPartyCount(n));
    }
    config.validate()?;
    let field = *codec.field();
    let phase = Phase::Negotiation;

    let mut gamma = config.gamma_init;
    let mut gammas = vec![gamma];
    let mut last_units = vec![0i64; n];
    let mut own_share = vec![FieldValue::default(); n];
    let mut k = 1u32;

    let status = loop {
        bus.send(Message::new(
            phase,
            MessageKind::PriceSignal,
            Entity::To,
            Entity::AllTas,
            Payload::Price(gamma),
        ))?;

        // Every TA takes delivery of the price before anyone sends shares.
        let mut prices = Vec::with_capacity(n);
        for (i, ta) in tas.iter().enumerate() {
            let price = bus
                .drain(Entity::ta(i))
                .into_iter()
                .find_map(|m| match m.payload {
                    Payload::Price(p) => Some(p),
                    _ => None,
                })
                .ok_or_else(|| ta.lifecycle("no price signal received"))?;
            prices.push(price);
        }

        for (i, ta) in tas.iter_mut().enumerate() {
            let price = prices[i];
            let energy = ta.market.step(&ta.profile, price, config.zeta)?;
            let units = codec.quantize(ta.profile.contribution(energy))?;
            last_units[i] = units;
            let secret = codec.encode_units(units);

            match mode {
                Mode::Plain => bus.send(Message::new(
                    phase,
                    MessageKind::AggregateSubmit,
                    Entity::ta(i),
                    Entity::To,
                    Payload::Aggregate {
                        of: Quantity::TradedEnergy,
                        value: secret,
                    },
                ))?,
                Mode::Secure => {
                    let shares = split(&field, secret, n, i, &mut ta.rng)?;
                    own_share[i] = shares.share(i);
                    for j in (0..n).filter(|&j| j != i) {
                        bus.send(Message::new(
                            phase,
                            MessageKind::ShareTransfer,
                            Entity::ta(i),
                            Entity::ta(j),
                            Payload::Share {
                                of: Quantity::TradedEnergy,
                                value: shares.share(j),
                            },
                        ))?;
                    }
                }
            }
        }

        if mode == Mode::Secure {
            for i in 0..n {
                let mut received = collect_shares(bus, i, Quantity::TradedEnergy);
                received.push(own_share[i]);
                let agg = aggregate_received(&field, &received, n)?;
                bus.send(Message::new(
                    phase,
                    MessageKind::AggregateSubmit,
                    Entity::ta(i),
                    Entity::To,
                    Payload::Aggregate {
                        of: Quantity::TradedEnergy,
                        value: agg,
                    },
                ))?;
            }
        }

        let submitted = collect_aggregates(bus, Quantity::TradedEnergy);
        let total = aggregate_received(&field, &submitted, n)?;
        let net_demand = codec.units_to_kwh(codec.decode_units(total));
        let next = update_price(gamma, config.price_step, net_demand);

        k += 1;
        let status = check_convergence(next, gamma, k, config);
        gamma = next;
        gammas.push(gamma);
        if status != Convergence::Continue {
            break status;
        }
    };

    bus.send(Message::new(
        phase,
        MessageKind::AcceptNotify,
        Entity::To,
        Entity::AllTas,
        Payload::Empty,
    ))?;
    for (i, ta) in tas.iter_mut().enumerate() {
        bus.drain(Entity::ta(i));
        ta.store_forecast(last_units[i])?;
        bus.record_storage(phase, Entity::ta(i), "E_n", SCALAR_BITS);
    }
    if mode == Mode::Plain {
        to.plain_forecasts = last_units;
        bus.record_storage(phase, Entity::To, "E_1..E_N", SCALAR_BITS * n as u64);
    }

    Ok(NegotiationOutcome {
        clearing_price: gamma,
        gammas,
        iterations: k - 1,
        status,
    })
}

/// Shares of `of` waiting in TA `i`'s inbox, one per sender.
pub(crate) fn collect_shares(bus: &Bus, i: usize, of: Quantity) -> Vec<FieldValue> {
    bus.drain(Entity::ta(i))
        .into_iter()
        .filter_map(|m| match m.payload {
            Payload::Share { of: q, value } if q == of => Some(value),
            _ => None,
        })
        .collect()
}

pub(crate) fn collect_aggregates(bus: &Bus, of: Quantity) -> Vec<FieldValue> {
    bus.drain(Entity::To)
        .into_iter()
        .filter_map(|m| match m.payload {
            Payload::Aggregate { of: q, value } if q == of => Some(value),
            _ => None,
        })
        .collect()
}
