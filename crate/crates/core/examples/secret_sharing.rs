//! Additive sharing of fixed-point energy values and the two-layer sum: each
//! party adds the shares it received, the operator adds those sums.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sepentra::sharing::{aggregate_received, reconstruct, split, FixedPointCodec, Fp, DEFAULT_SCALE, WIRE_MODULUS};

fn main() -> sepentra::Result<()> {
    let field = Fp::new(WIRE_MODULUS)?;
    let codec = FixedPointCodec::new(DEFAULT_SCALE, field)?;
    let mut rng = ChaCha20Rng::seed_from_u64(3);

    let values = [4.25, -3.5, 7.0001, -7.75];
    let n = values.len();
    let mut all = Vec::new();
    for (owner, &kwh) in values.iter().enumerate() {
        let shares = split(&field, codec.encode(kwh)?, n, owner, &mut rng)?;
        let back = codec.decode(reconstruct(&field, &shares, n)?);
        println!("party {owner}: {kwh:>8} kWh -> shares {:?} -> {back}", shares.shares());
        all.push(shares);
    }

    let per_party: Vec<_> = (0..n)
        .map(|i| {
            let received: Vec<_> = all.iter().map(|s| s.share(i)).collect();
            aggregate_received(&field, &received, n)
        })
        .collect::<Result<_, _>>()?;
    let total = aggregate_received(&field, &per_party, n)?;
    println!("operator sees only {per_party:?}");
    println!("net total {} kWh (plain sum {})", codec.decode(total), values.iter().sum::<f64>());
    Ok(())
}
