//! Distributed price negotiation over secret shares, compared with the same
//! loop computed centrally.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sepentra::market::{run_reference, sample_profiles, MarketConfig};
use sepentra::protocol::{run_negotiation, Bus, Mode, Phase, TaState, ToState};
use sepentra::sharing::{FixedPointCodec, Fp, DEFAULT_SCALE, WIRE_MODULUS};

fn main() -> sepentra::Result<()> {
    let n = 20;
    let profiles = sample_profiles(n, &mut ChaCha20Rng::seed_from_u64(5))?;
    let config = MarketConfig::default();
    let codec = FixedPointCodec::new(DEFAULT_SCALE, Fp::new(WIRE_MODULUS)?)?;

    let mut tas: Vec<_> = profiles.iter().cloned().map(|p| TaState::new(p, 9)).collect();
    let mut to = ToState::new();
    let bus = Bus::new(n);
    let outcome = run_negotiation(&mut tas, &mut to, &config, &codec, Mode::Secure, &bus)?;
    let reference = run_reference(&profiles, &config, &codec)?;

    for (k, g) in outcome.gammas.iter().enumerate().step_by(5) {
        println!("k={k:>3} price {g:.4} c/kWh");
    }
    println!(
        "{:?} after {} iterations at {:.6} c/kWh (central: {:.6})",
        outcome.status,
        outcome.iterations,
        outcome.clearing_price,
        reference.clearing_price()
    );
    for ta in &tas {
        println!(
            "{:?} {:>2}: {:>8.4} kWh",
            ta.profile.role,
            ta.index,
            codec.units_to_kwh(ta.forecast_units().unwrap_or(0))
        );
    }
    let t = bus.transcript();
    println!(
        "traffic per TA {} bits, operator {} bits",
        t.sent_bits(Phase::Negotiation, sepentra::protocol::Entity::ta(0)),
        t.sent_bits(Phase::Negotiation, sepentra::protocol::Entity::To)
    );
    Ok(())
}
