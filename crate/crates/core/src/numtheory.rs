//! Modular arithmetic, Miller–Rabin testing and construction of the
//! prime-order subgroup that hosts the commitment scheme.
//!
//! The commitment group is the order-`p` subgroup of `Z_q*` for primes
//! `q = b·p + 1`. Its elements are exactly the `b`-th powers `i^b mod q`,
//! so any non-identity element generates it.

use std::collections::HashSet;
use std::fmt;

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};

/// Arbitrary-precision non-negative integer.
pub type BigNat = BigUint;

/// Round count used by the key generator unless overridden.
pub const DEFAULT_MR_ROUNDS: u32 = 5_000;

const SMALL_PRIMES: [u32; 54] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191,
    193, 197, 199, 211, 223, 227, 229, 233, 239, 241, 251,
];

/// `base^exponent mod modulus`, canonical representative in `[0, modulus)`.
pub fn mod_pow(base: &BigNat, exponent: &BigNat, modulus: &BigNat) -> Result<BigNat> {
    if *modulus < BigNat::from(2u8) {
        return Err(Error::InvalidModulus);
    }
    Ok(base.modpow(exponent, modulus))
}

/// Miller–Rabin with `rounds` random witnesses drawn from `rng`.
///
/// `false` is a proof of compositeness; `true` is wrong with probability at
/// most `4^-rounds`. Values below 2 are not prime.
pub fn is_probable_prime<R: Rng + ?Sized>(n: &BigNat, rounds: u32, rng: &mut R) -> bool {
    let two = BigNat::from(2u8);
    if *n < two {
        return false;
    }
    for &sp in SMALL_PRIMES.iter() {
        let sp = BigNat::from(sp);
        if *n == sp {
            return true;
        }
        if (n % &sp).is_zero() {
            return false;
        }
    }

    let one = BigNat::one();
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    // n > 251 here, so [2, n-2] is non-empty.
    let upper = n - &one;

    'witness: for _ in 0..rounds.max(1) {
        let a = rng.gen_biguint_range(&two, &upper);
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == n_minus_1 {
                continue 'witness;
            }
            if x.is_one() {
                return false;
            }
        }
        return false;
    }
    true
}

/// Limits for [`gen_prime_pair`].
#[derive(Debug, Clone, Copy)]
pub struct PrimeSearch {
    pub rounds: u32,
    /// Cofactor draws per candidate `p` before `p` is resampled.
    /// `None` means `10 * bits_b`.
    pub b_attempts_per_p: Option<u64>,
    /// Total number of `q` candidates examined before giving up.
    pub max_attempts: u64,
}

impl Default for PrimeSearch {
    fn default() -> Self {
        Self {
            rounds: DEFAULT_MR_ROUNDS,
            b_attempts_per_p: None,
            max_attempts: 2_000_000,
        }
    }
}

impl PrimeSearch {
    pub fn with_rounds(rounds: u32) -> Self {
        Self {
            rounds,
            ..Self::default()
        }
    }
}

/// Output of [`gen_prime_pair`]: primes `p`, `q` with `q = b·p + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimePair {
    pub p: BigNat,
    pub q: BigNat,
    pub b: BigNat,
}

fn random_with_bits<R: Rng + ?Sized>(bits: u64, rng: &mut R) -> BigNat {
    let mut x = rng.gen_biguint(bits);
    x.set_bit(bits - 1, true);
    x
}

/// Draws a prime `p` of exactly `bits_p` bits, then even cofactors `b` of
/// exactly `bits_b` bits until `q = b·p + 1` is prime. `p` is redrawn after
/// the per-`p` budget is exhausted.
pub fn gen_prime_pair<R: Rng + ?Sized>(
    bits_p: u64,
    bits_b: u64,
    search: &PrimeSearch,
    rng: &mut R,
) -> Result<PrimePair> {
    if bits_p < 2 || bits_b < 2 {
        return Err(Error::InvalidInput(format!(
            "prime search needs bits_p >= 2 and bits_b >= 2, got ({bits_p}, {bits_b})"
        )));
    }
    let per_p = search.b_attempts_per_p.unwrap_or(10 * bits_b).max(1);
    let mut attempts = 0u64;

    loop {
        let p = loop {
            let mut cand = random_with_bits(bits_p, rng);
            if bits_p > 2 {
                cand.set_bit(0, true);
            }
            if is_probable_prime(&cand, search.rounds, rng) {
                break cand;
            }
            attempts += 1;
            if attempts >= search.max_attempts {
                return Err(Error::GenerationFailure { attempts });
            }
        };

        for _ in 0..per_p {
            attempts += 1;
            if attempts > search.max_attempts {
                return Err(Error::GenerationFailure { attempts });
            }
            let mut b = random_with_bits(bits_b, rng);
            // q must be odd, so b·p must be even; p is odd unless p = 2.
            if p != BigNat::from(2u8) {
                b.set_bit(0, false);
            }
            let q = &b * &p + 1u32;
            if is_probable_prime(&q, search.rounds, rng) {
                return Ok(PrimePair { p, q, b });
            }
        }
    }
}

/// How the subgroup is made available to the generator picker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KeygenMode {
    /// Materialise every element by enumerating `i^b mod q`.
    Faithful,
    /// Draw random `i` and return `i^b mod q`.
    #[default]
    Fast,
}

impl fmt::Display for KeygenMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeygenMode::Faithful => f.write_str("faithful"),
            KeygenMode::Fast => f.write_str("fast"),
        }
    }
}

impl std::str::FromStr for KeygenMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "faithful" => Ok(KeygenMode::Faithful),
            "fast" => Ok(KeygenMode::Fast),
            other => Err(Error::InvalidInput(format!("unknown keygen mode `{other}`"))),
        }
    }
}

/// The order-`p` subgroup `G` of `Z_q*`.
#[derive(Debug, Clone)]
pub enum Group {
    Enumerated {
        q: BigNat,
        p: BigNat,
        b: BigNat,
        /// Sorted ascending.
        elements: Vec<BigNat>,
        /// Exponentiations spent on the enumeration.
        iterations: u64,
    },
    Sampler {
        q: BigNat,
        p: BigNat,
        b: BigNat,
    },
}

impl Group {
    pub fn modulus(&self) -> &BigNat {
        match self {
            Group::Enumerated { q, .. } | Group::Sampler { q, .. } => q,
        }
    }

    pub fn order(&self) -> &BigNat {
        match self {
            Group::Enumerated { p, .. } | Group::Sampler { p, .. } => p,
        }
    }

    pub fn cofactor(&self) -> &BigNat {
        match self {
            Group::Enumerated { b, .. } | Group::Sampler { b, .. } => b,
        }
    }

    /// Membership by the order test `x^p ≡ 1 (mod q)`.
    pub fn contains(&self, x: &BigNat) -> bool {
        let q = self.modulus();
        !x.is_zero() && x < q && x.modpow(self.order(), q).is_one()
    }

    /// Uniform element of `G`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BigNat {
        match self {
            Group::Enumerated { elements, .. } => {
                elements[rng.gen_range(0..elements.len())].clone()
            }
            Group::Sampler { q, b, .. } => {
                let i = rng.gen_biguint_range(&BigNat::one(), q);
                i.modpow(b, q)
            }
        }
    }
}

/// Default ceiling on faithful-mode exponentiations, as a multiple of `p`.
pub const FAITHFUL_BUDGET_FACTOR: u64 = 64;

/// Builds `G = { i^b mod q : i ∈ Z_q \ {0} }`.
///
/// Faithful mode walks `i = 1, 2, ...` until `p` distinct elements are found.
/// Because `i ↦ i^b` is `b`-to-one the walk usually needs more than `p`
/// steps; it stops with an error at `q - 1` or at `budget_factor · p` steps.
pub fn build_group(
    p: &BigNat,
    q: &BigNat,
    b: &BigNat,
    mode: KeygenMode,
    budget_factor: u64,
) -> Result<Group> {
    if &(b * p + 1u32) != q {
        return Err(Error::InvalidParameters("q != b*p + 1".into()));
    }
    if *p < BigNat::from(2u8) {
        return Err(Error::InvalidParameters("p must be at least 2".into()));
    }
    match mode {
        KeygenMode::Fast => Ok(Group::Sampler {
            q: q.clone(),
            p: p.clone(),
            b: b.clone(),
        }),
        KeygenMode::Faithful => {
            let order = p.to_u64().ok_or_else(|| {
                Error::InvalidParameters("faithful enumeration needs p < 2^64".into())
            })?;
            let q_minus_1 = q - 1u32;
            let limit = q_minus_1
                .to_u64()
                .unwrap_or(u64::MAX)
                .min(order.saturating_mul(budget_factor.max(1)));
            let mut seen: HashSet<BigNat> = HashSet::with_capacity(order as usize);
            let mut iterations = 0u64;
            let mut i = 1u64;
            while (seen.len() as u64) < order && i <= limit {
                let x = BigNat::from(i).modpow(b, q);
                iterations += 1;
                if !x.modpow(p, q).is_one() {
                    return Err(Error::InvalidParameters(format!(
                        "{i}^b mod q has order other than p; q or p is not prime"
                    )));
                }
                seen.insert(x);
                i += 1;
            }
            if seen.len() as u64 != order {
                return Err(Error::InvalidParameters(format!(
                    "enumeration found {} elements after {iterations} steps, expected |G| = {order}",
                    seen.len()
                )));
            }
            let mut elements: Vec<BigNat> = seen.into_iter().collect();
            elements.sort();
            Ok(Group::Enumerated {
                q: q.clone(),
                p: p.clone(),
                b: b.clone(),
                elements,
                iterations,
            })
        }
    }
}

/// Two distinct non-identity elements of `G`; both generate `G` because
/// its order is prime.
pub fn pick_generators<R: Rng + ?Sized>(group: &Group, rng: &mut R) -> Result<(BigNat, BigNat)> {
    if *group.order() < BigNat::from(3u8) {
        return Err(Error::InvalidParameters(
            "p < 3 leaves fewer than two non-identity elements".into(),
        ));
    }
    let draw = |rng: &mut R, avoid: Option<&BigNat>| loop {
        let x = group.sample(rng);
        if !x.is_one() && Some(&x) != avoid {
            break x;
        }
    };
    let g = draw(rng, None);
    let h = draw(rng, Some(&g));
    Ok((g, h))
}

/// Commitment key `ck = (G, q, p, g, h)`; `G` is implied by `(q, p, b)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupParams {
    q: BigNat,
    p: BigNat,
    b: BigNat,
    g: BigNat,
    h: BigNat,
}

impl GroupParams {
    /// Checks the structural invariants: `q = b·p + 1`, `g, h ∉ {0, 1}`,
    /// `g ≠ h`, and `g^p ≡ h^p ≡ 1 (mod q)`. Primality is not re-tested here;
    /// see [`GroupParams::check_primes`].
    pub fn new(q: BigNat, p: BigNat, b: BigNat, g: BigNat, h: BigNat) -> Result<Self> {
        if &b * &p + 1u32 != q {
            return Err(Error::InvalidKey("q != b*p + 1".into()));
        }
        for (name, x) in [("g", &g), ("h", &h)] {
            if x.is_zero() || x.is_one() || *x >= q {
                return Err(Error::InvalidKey(format!("{name} must lie in [2, q)")));
            }
            if !x.modpow(&p, &q).is_one() {
                return Err(Error::InvalidKey(format!("{name}^p mod q != 1")));
            }
        }
        if g == h {
            return Err(Error::InvalidKey("g == h".into()));
        }
        Ok(Self { q, p, b, g, h })
    }

    pub fn check_primes<R: Rng + ?Sized>(&self, rounds: u32, rng: &mut R) -> bool {
        is_probable_prime(&self.p, rounds, rng) && is_probable_prime(&self.q, rounds, rng)
    }

    pub fn q(&self) -> &BigNat {
        &self.q
    }
    pub fn p(&self) -> &BigNat {
        &self.p
    }
    pub fn b(&self) -> &BigNat {
        &self.b
    }
    pub fn g(&self) -> &BigNat {
        &self.g
    }
    pub fn h(&self) -> &BigNat {
        &self.h
    }

    pub fn bits_q(&self) -> u64 {
        self.q.bits()
    }

    pub fn bits_p(&self) -> u64 {
        self.p.bits()
    }

    /// Group order as a machine word, if it fits.
    pub fn order_u64(&self) -> Option<u64> {
        self.p.to_u64()
    }

    /// Size of `ck` on the wire: `q`, `g`, `h` at `bits_q` each plus `p`.
    pub fn wire_bits(&self) -> u64 {
        3 * self.bits_q() + self.bits_p()
    }

    /// Line-oriented `key = value` record with decimal values.
    pub fn to_record(&self) -> String {
        format!(
            "q = {}\np = {}\nb = {}\ng = {}\nh = {}\n",
            self.q, self.p, self.b, self.g, self.h
        )
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let mut fields: [Option<BigNat>; 5] = Default::default();
        const KEYS: [&str; 5] = ["q", "p", "b", "g", "h"];
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |reason: String| Error::Parse {
                line: idx + 1,
                reason,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err("expected `key = value`".into()))?;
            let key = key.trim();
            let slot = KEYS
                .iter()
                .position(|k| *k == key)
                .ok_or_else(|| parse_err(format!("unknown key `{key}`")))?;
            let value = value
                .trim()
                .parse::<BigNat>()
                .map_err(|e| parse_err(format!("bad decimal for `{key}`: {e}")))?;
            fields[slot] = Some(value);
        }
        let mut it = fields.into_iter().zip(KEYS);
        let mut take = || {
            let (v, k) = it.next().expect("five keys");
            v.ok_or_else(|| Error::Parse {
                line: 0,
                reason: format!("missing key `{k}`"),
            })
        };
        let (q, p, b, g, h) = (take()?, take()?, take()?, take()?, take()?);
        Self::new(q, p, b, g, h)
    }
}

/// Knobs for [`generate_key`].
#[derive(Debug, Clone, Copy)]
pub struct KeygenOptions {
    pub mode: KeygenMode,
    pub search: PrimeSearch,
    pub faithful_budget_factor: u64,
}

impl Default for KeygenOptions {
    fn default() -> Self {
        Self {
            mode: KeygenMode::Fast,
            search: PrimeSearch::default(),
            faithful_budget_factor: FAITHFUL_BUDGET_FACTOR,
        }
    }
}

/// Prime pair, subgroup and generators in one call.
pub fn generate_key<R: Rng + ?Sized>(
    bits_p: u64,
    bits_b: u64,
    opts: &KeygenOptions,
    rng: &mut R,
) -> Result<GroupParams> {
    let PrimePair { p, q, b } = gen_prime_pair(bits_p, bits_b, &opts.search, rng)?;
    let group = build_group(&p, &q, &b, opts.mode, opts.faithful_budget_factor)?;
    let (g, h) = pick_generators(&group, rng)?;
    GroupParams::new(q, p, b, g, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn n(x: u64) -> BigNat {
        BigNat::from(x)
    }

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    fn trial_division(x: u64) -> bool {
        if x < 2 {
            return false;
        }
        let mut d = 2u64;
        while d * d <= x {
            if x.is_multiple_of(d) {
                return false;
            }
            d += 1;
        }
        true
    }

    #[test]
    fn mod_pow_examples() {
        assert_eq!(mod_pow(&n(3), &n(2), &n(11)).unwrap(), n(9));
        assert_eq!(mod_pow(&n(12345), &n(0), &n(97)).unwrap(), n(1));
        let a = mod_pow(&n(3), &n(3), &n(11)).unwrap();
        let b = mod_pow(&n(4), &n(4), &n(11)).unwrap();
        assert_eq!((a * b) % n(11), n(4));
    }

    #[test]
    fn mod_pow_rejects_small_modulus() {
        assert_eq!(mod_pow(&n(3), &n(2), &n(1)), Err(Error::InvalidModulus));
        assert_eq!(mod_pow(&n(3), &n(2), &n(0)), Err(Error::InvalidModulus));
    }

    #[test]
    fn primality_examples() {
        let mut r = rng(1);
        assert!(is_probable_prime(&n(11), 5000, &mut r));
        assert!(!is_probable_prime(&n(12), 5000, &mut r));
        assert!(is_probable_prime(&n((1 << 31) - 1), 5000, &mut r));
        assert!(trial_division((1 << 31) - 1));
        assert!(!is_probable_prime(&n(0), 4, &mut r));
        assert!(!is_probable_prime(&n(1), 4, &mut r));
        // Carmichael numbers.
        for c in [561u64, 1105, 1729, 2465, 2821, 6601, 8911, 41041, 825265] {
            assert!(!is_probable_prime(&n(c), 16, &mut r), "{c}");
        }
    }

    #[test]
    fn toy_prime_pair() {
        // The only 3-bit p with an even 2-bit cofactor giving a prime q is 5.
        let pair = gen_prime_pair(3, 2, &PrimeSearch::with_rounds(32), &mut rng(7)).unwrap();
        assert_eq!((pair.p, pair.b, pair.q), (n(5), n(2), n(11)));
    }

    #[test]
    fn prime_pair_deterministic_and_sized() {
        let s = PrimeSearch::with_rounds(16);
        let a = gen_prime_pair(20, 200, &s, &mut rng(3)).unwrap();
        let b = gen_prime_pair(20, 200, &s, &mut rng(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.p.bits(), 20);
        assert_eq!(a.b.bits(), 200);
        assert_eq!(&a.b * &a.p + 1u32, a.q);
        assert!((219..=221).contains(&a.q.bits()));
    }

    #[test]
    fn prime_pair_budget_exhaustion() {
        let s = PrimeSearch {
            rounds: 8,
            b_attempts_per_p: Some(1),
            max_attempts: 1,
        };
        let err = gen_prime_pair(64, 512, &s, &mut rng(0)).unwrap_err();
        assert!(matches!(err, Error::GenerationFailure { .. }));
    }

    #[test]
    fn faithful_group_mod_11() {
        let g = build_group(&n(5), &n(11), &n(2), KeygenMode::Faithful, 64).unwrap();
        match &g {
            Group::Enumerated { elements, .. } => {
                assert_eq!(elements, &vec![n(1), n(3), n(4), n(5), n(9)]);
            }
            _ => unreachable!(),
        }
        for x in [1u64, 3, 4, 5, 9] {
            assert_eq!(n(x).modpow(&n(5), &n(11)), n(1));
            assert!(g.contains(&n(x)));
        }
        assert!(!g.contains(&n(2)));
    }

    #[test]
    fn faithful_group_rejects_bad_parameters() {
        assert!(matches!(
            build_group(&n(5), &n(12), &n(2), KeygenMode::Faithful, 64),
            Err(Error::InvalidParameters(_))
        ));
        // q = 2*7 + 1 = 15 is composite.
        assert!(matches!(
            build_group(&n(7), &n(15), &n(2), KeygenMode::Faithful, 64),
            Err(Error::InvalidParameters(_))
        ));
    }

    #[test]
    fn generators_mod_11() {
        let g = build_group(&n(5), &n(11), &n(2), KeygenMode::Faithful, 64).unwrap();
        let (a, b) = pick_generators(&g, &mut rng(11)).unwrap();
        assert_ne!(a, b);
        for x in [&a, &b] {
            assert_ne!(*x, n(1));
            assert_eq!(x.modpow(&n(5), &n(11)), n(1));
        }
        assert_eq!(
            pick_generators(&g, &mut rng(11)).unwrap(),
            (a.clone(), b.clone())
        );
        // (3, 4) is one admissible pick; both have order 5 mod 11.
        GroupParams::new(n(11), n(5), n(2), n(3), n(4)).unwrap();
    }

    #[test]
    fn generators_need_p_at_least_3() {
        let g = build_group(&n(2), &n(5), &n(2), KeygenMode::Fast, 64).unwrap();
        assert!(matches!(
            pick_generators(&g, &mut rng(0)),
            Err(Error::InvalidParameters(_))
        ));
    }

    #[test]
    fn fast_samples_have_order_p() {
        let mut r = rng(5);
        let pair = gen_prime_pair(20, 64, &PrimeSearch::with_rounds(16), &mut r).unwrap();
        let g = build_group(&pair.p, &pair.q, &pair.b, KeygenMode::Fast, 64).unwrap();
        for _ in 0..1000 {
            let x = g.sample(&mut r);
            assert!(x.modpow(&pair.p, &pair.q).is_one());
        }
    }

    #[test]
    fn params_validation() {
        assert!(GroupParams::new(n(11), n(5), n(2), n(1), n(4)).is_err());
        assert!(GroupParams::new(n(11), n(5), n(2), n(3), n(3)).is_err());
        assert!(GroupParams::new(n(11), n(5), n(2), n(2), n(4)).is_err());
        assert!(GroupParams::new(n(13), n(5), n(2), n(3), n(4)).is_err());
    }

    #[test]
    fn record_round_trip() {
        let ck = GroupParams::new(n(11), n(5), n(2), n(3), n(4)).unwrap();
        let text = ck.to_record();
        assert_eq!(text, "q = 11\np = 5\nb = 2\ng = 3\nh = 4\n");
        assert_eq!(GroupParams::from_record(&text).unwrap(), ck);
        assert!(GroupParams::from_record("q = 11\np = 5\nb = 2\ng = 3\n").is_err());
        assert!(GroupParams::from_record("q = 11\nz = 1\n").is_err());
    }
}
