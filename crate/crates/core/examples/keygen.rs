//! Commitment key generation in both modes.
//!
//! cargo run --release --example keygen [bits_p] [bits_b]

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sepentra::numtheory::{generate_key, KeygenMode, KeygenOptions, PrimeSearch};

fn main() -> sepentra::Result<()> {
    let mut args = std::env::args().skip(1);
    let bits_p: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(12);
    let bits_b: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(200);

    for mode in [KeygenMode::Fast, KeygenMode::Faithful] {
        let opts = KeygenOptions {
            mode,
            search: PrimeSearch::with_rounds(64),
            ..KeygenOptions::default()
        };
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let start = std::time::Instant::now();
        let ck = generate_key(bits_p, bits_b, &opts, &mut rng)?;
        println!(
            "{mode}: bits_q={} bits_p={} wire size {} bits ({:.4} KB) in {:.3} s",
            ck.bits_q(),
            ck.bits_p(),
            ck.wire_bits(),
            ck.wire_bits() as f64 / 8192.0,
            start.elapsed().as_secs_f64()
        );
    }

    // The smallest textbook group: p = 5, q = 11, squares mod 11.
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let toy = generate_key(3, 2, &KeygenOptions {
        mode: KeygenMode::Faithful,
        search: PrimeSearch::with_rounds(16),
        ..KeygenOptions::default()
    }, &mut rng)?;
    print!("small key:\n{}", toy.to_record());
    Ok(())
}
