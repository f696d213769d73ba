//! Pedersen commitments: opening, binding and the product rule the operator
//! uses to check an aggregate.

use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sepentra::numtheory::{generate_key, KeygenOptions, PrimeSearch};
use sepentra::pedersen::{commit, product, verify_open};
use sepentra::sharing::Fp;

fn main() -> sepentra::Result<()> {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let opts = KeygenOptions {
        search: PrimeSearch::with_rounds(64),
        ..KeygenOptions::default()
    };
    let ck = generate_key(20, 300, &opts, &mut rng)?;
    let zp = Fp::from_big(ck.p())?;
    println!("p = {}, q has {} bits", ck.p(), ck.bits_q());

    let messages = [42_500u64, 10_001, 7];
    let openings: Vec<_> = messages
        .iter()
        .map(|&m| (zp.element(m), zp.random(&mut rng)))
        .collect();
    let commitments: Vec<_> = openings.iter().map(|&(m, r)| commit(&ck, m, r)).collect();

    for ((m, r), c) in openings.iter().zip(&commitments) {
        let tampered = zp.add(*r, zp.element(1));
        println!(
            "m={m}: opens={} opens with r+1={}",
            verify_open(&ck, c, *m, *r),
            verify_open(&ck, c, *m, tampered)
        );
    }

    let m_sum = zp.sum(openings.iter().map(|o| o.0));
    let r_sum = zp.sum(openings.iter().map(|o| o.1));
    let prod = product(&commitments, &ck)?;
    println!(
        "product opens to the sums: {}",
        prod.value() == commit(&ck, BigUint::from(m_sum), BigUint::from(r_sum)).value()
    );
    Ok(())
}
