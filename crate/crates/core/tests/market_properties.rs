use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sepentra::market::{
    check_convergence, run_reference, sample_profiles, update_duals, update_energy, update_price, Convergence,
    MarketConfig, Role, TaMarketState, TaProfile,
};
use sepentra::sharing::{FixedPointCodec, Fp, DEFAULT_SCALE, WIRE_MODULUS};

fn codec() -> FixedPointCodec {
    FixedPointCodec::new(DEFAULT_SCALE, Fp::new(WIRE_MODULUS).unwrap()).unwrap()
}

#[test]
fn iterates_stay_non_negative() {
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let profiles = sample_profiles(50, &mut rng).unwrap();
    let mut states: Vec<TaMarketState> = profiles.iter().map(TaMarketState::new).collect();
    let mut gamma = 10.0;
    for step in 0..100_000usize {
        let i = step % profiles.len();
        let zeta = rng.gen_range(0.001..1.0);
        // Prices anywhere from zero to far above every preference.
        let offered = rng.gen_range(0.0..80.0);
        let e = states[i].step(&profiles[i], offered, zeta).unwrap();
        let s = states[i];
        assert!(e >= 0.0 && s.v_lo >= 0.0 && s.v_hi >= 0.0, "step {step}: {s:?}");
        gamma = update_price(gamma, rng.gen_range(0.0..0.1), rng.gen_range(-500.0..500.0));
        assert!(gamma >= 0.0);
    }
}

proptest! {
    #[test]
    fn single_updates_non_negative(
        v_lo in 0.0f64..50.0, v_hi in 0.0f64..50.0, energy in 0.0f64..100.0,
        zeta in 0.0f64..2.0, e_tot in -20.0f64..20.0, gamma in 0.0f64..100.0,
        psi in 24.0f64..38.0, chi in 0.09f64..0.1, buyer: bool,
        step in 0.0f64..1.0, demand in -1e4f64..1e4,
    ) {
        let (lo, hi) = update_duals(v_lo, v_hi, energy, zeta, e_tot);
        prop_assert!(lo >= 0.0 && hi >= 0.0);
        let role = if buyer { Role::Buyer } else { Role::Seller };
        prop_assert!(update_energy(energy, gamma, zeta, psi, chi, lo, hi, role).unwrap() >= 0.0);
        prop_assert!(update_price(gamma, step, demand) >= 0.0);
    }
}

#[test]
fn interior_fixed_point_is_stationary() {
    // Seller with psi = 24, chi = 0.1 at price 25 wants (25 - 24) / 0.1 = 10 kWh,
    // exactly its capacity, so neither dual moves.
    let seller = TaProfile {
        index: 0,
        e_tot: 10.0,
        v_lo_init: 0.0,
        v_hi_init: 0.0,
        psi: 24.0,
        chi: 0.1,
        role: Role::Seller,
    };
    let mut state = TaMarketState {
        v_lo: 0.0,
        v_hi: 0.0,
        energy: 10.0,
    };
    for _ in 0..50 {
        let before = state;
        state.step(&seller, 25.0, 0.2).unwrap();
        assert!((state.energy - before.energy).abs() < 1e-12);
        assert_eq!((state.v_lo, state.v_hi), (0.0, 0.0));
    }
    assert_eq!(update_price(25.0, 0.005, 0.0), 25.0);
}

#[test]
fn degenerate_preference_rejected() {
    assert!(update_energy(1.0, 10.0, 0.1, 30.0, 0.0, 0.0, 0.0, Role::Buyer).is_err());
}

#[test]
fn stopping_rule_examples() {
    let cfg = MarketConfig::default();
    assert_eq!(check_convergence(10.0005, 10.0, 5, &cfg), Convergence::Converged);
    assert_eq!(check_convergence(11.0, 10.0, 101, &cfg), Convergence::IterationCap);
    assert_eq!(check_convergence(11.0, 10.0, 100, &cfg), Convergence::Continue);
    let capped = MarketConfig {
        run_to_cap: true,
        ..cfg
    };
    assert_eq!(check_convergence(10.0, 10.0, 5, &capped), Convergence::Continue);
}

#[test]
fn balanced_scenarios_converge_before_cap() {
    let cfg = MarketConfig::default();
    let codec = codec();
    let mut stuck = Vec::new();
    for seed in 0..100u64 {
        let profiles = sample_profiles(100, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
        let out = run_reference(&profiles, &cfg, &codec).unwrap();
        if out.status != Convergence::Converged {
            stuck.push(seed);
        }
        let p = out.clearing_price();
        assert!((24.0..=38.0).contains(&p), "seed {seed}: price {p}");
    }
    assert!(stuck.len() <= 5, "non-convergent seeds: {stuck:?}");
}
