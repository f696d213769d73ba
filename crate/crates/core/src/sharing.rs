//! (N, N) additive secret sharing over `Z_m` and the fixed-point codec that
//! maps signed kWh quantities into the field.

use num_traits::ToPrimitive;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numtheory::BigNat;

/// Largest prime below 2^32; default modulus for scalars shared during
/// negotiation and the online phase.
pub const WIRE_MODULUS: u64 = 4_294_967_291;

/// Fixed-point scale for kWh values.
pub const DEFAULT_SCALE: u64 = 10_000;

const MAX_MODULUS: u64 = 1 << 62;

/// Arithmetic context for `Z_m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fp {
    modulus: u64,
}

/// An element of `Z_m` in canonical form. Carries no modulus; arithmetic goes
/// through the owning [`Fp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct FieldValue(u64);

impl FieldValue {
    pub fn value(self) -> u64 {
        self.0
    }

    pub fn to_big(self) -> BigNat {
        BigNat::from(self.0)
    }
}

impl std::fmt::Display for FieldValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Fp {
    pub fn new(modulus: u64) -> Result<Self> {
        if modulus < 2 {
            return Err(Error::InvalidModulus);
        }
        if modulus >= MAX_MODULUS {
            return Err(Error::InvalidInput(format!(
                "sharing modulus {modulus} exceeds 2^62"
            )));
        }
        Ok(Self { modulus })
    }

    /// Field over the commitment group order.
    pub fn from_big(modulus: &BigNat) -> Result<Self> {
        let m = modulus.to_u64().ok_or_else(|| {
            Error::InvalidInput("sharing modulus does not fit in 64 bits".into())
        })?;
        Self::new(m)
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn element(&self, x: u64) -> FieldValue {
        FieldValue(x % self.modulus)
    }

    /// Reduces a signed integer into `[0, m)`.
    pub fn from_signed(&self, x: i128) -> FieldValue {
        FieldValue(x.rem_euclid(self.modulus as i128) as u64)
    }

    /// Centered representative in `(-m/2, m/2]`.
    pub fn centered(&self, v: FieldValue) -> i64 {
        let half = self.modulus / 2;
        if v.0 > half {
            v.0 as i64 - self.modulus as i64
        } else {
            v.0 as i64
        }
    }

    pub fn add(&self, a: FieldValue, b: FieldValue) -> FieldValue {
        // Both operands are below 2^62, so the sum cannot overflow.
        FieldValue((a.0 + b.0) % self.modulus)
    }

    pub fn sub(&self, a: FieldValue, b: FieldValue) -> FieldValue {
        FieldValue((a.0 + self.modulus - b.0) % self.modulus)
    }

    pub fn neg(&self, a: FieldValue) -> FieldValue {
        self.sub(FieldValue(0), a)
    }

    pub fn sum<I: IntoIterator<Item = FieldValue>>(&self, values: I) -> FieldValue {
        values
            .into_iter()
            .fold(FieldValue(0), |acc, v| self.add(acc, v))
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldValue {
        FieldValue(rng.gen_range(0..self.modulus))
    }
}

/// A length-N additive sharing of one participant's secret.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShareVector {
    shares: Vec<FieldValue>,
    owner: usize,
}

impl ShareVector {
    pub fn new(shares: Vec<FieldValue>, owner: usize) -> Self {
        Self { shares, owner }
    }

    pub fn owner(&self) -> usize {
        self.owner
    }

    pub fn len(&self) -> usize {
        self.shares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shares.is_empty()
    }

    /// Share destined for party `i` (0-based).
    pub fn share(&self, i: usize) -> FieldValue {
        self.shares[i]
    }

    pub fn shares(&self) -> &[FieldValue] {
        &self.shares
    }
}

/// Splits `secret` into `n_parties` shares: the first `N-1` uniform, the last
/// completing the sum.
pub fn split<R: Rng + ?Sized>(
    field: &Fp,
    secret: FieldValue,
    n_parties: usize,
    owner: usize,
    rng: &mut R,
) -> Result<ShareVector> {
    if n_parties < 2 {
        return Err(Error::InvalidPartyCount(n_parties));
    }
    let random: Vec<FieldValue> = (0..n_parties - 1).map(|_| field.random(rng)).collect();
    split_with(field, secret, &random, owner)
}

/// Deterministic variant of [`split`] with caller-supplied first `N-1` shares.
pub fn split_with(
    field: &Fp,
    secret: FieldValue,
    random_shares: &[FieldValue],
    owner: usize,
) -> Result<ShareVector> {
    let n = random_shares.len() + 1;
    if n < 2 {
        return Err(Error::InvalidPartyCount(n));
    }
    let mut shares: Vec<FieldValue> = random_shares.iter().map(|v| field.element(v.0)).collect();
    let last = field.sub(secret, field.sum(shares.iter().copied()));
    shares.push(last);
    Ok(ShareVector::new(shares, owner))
}

/// Sum of all shares; requires exactly `expected` of them.
pub fn reconstruct(field: &Fp, shares: &ShareVector, expected: usize) -> Result<FieldValue> {
    if shares.len() != expected {
        return Err(Error::IncompleteShares {
            expected,
            got: shares.len(),
        });
    }
    Ok(field.sum(shares.shares.iter().copied()))
}

/// One participant's aggregate of the shares it received, one from every
/// participant including itself.
pub fn aggregate_received(
    field: &Fp,
    received: &[FieldValue],
    expected: usize,
) -> Result<FieldValue> {
    if received.len() != expected {
        return Err(Error::IncompleteShares {
            expected,
            got: received.len(),
        });
    }
    Ok(field.sum(received.iter().copied()))
}

/// Signed real ↔ field element via `round(x · scale)` in centered form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedPointCodec {
    scale: u64,
    field: Fp,
}

impl FixedPointCodec {
    /// Requires at least one whole unit to be representable (`scale < m/2`).
    pub fn new(scale: u64, field: Fp) -> Result<Self> {
        if scale == 0 {
            return Err(Error::InvalidInput("scale must be positive".into()));
        }
        if 2 * scale >= field.modulus() {
            return Err(Error::InvalidInput(format!(
                "scale {scale} leaves no representable range in Z_{}",
                field.modulus()
            )));
        }
        Ok(Self { scale, field })
    }

    pub fn scale(&self) -> u64 {
        self.scale
    }

    pub fn field(&self) -> &Fp {
        &self.field
    }

    /// Largest magnitude (in kWh) that encodes without wrapping.
    pub fn max_magnitude(&self) -> f64 {
        ((self.field.modulus() - 1) / 2) as f64 / self.scale as f64
    }

    /// Whether `magnitude` kWh satisfies `magnitude · scale < m/2`.
    pub fn fits(&self, magnitude: f64) -> bool {
        2.0 * magnitude.abs() * (self.scale as f64) < self.field.modulus() as f64
    }

    /// `round(x · scale)`, half away from zero.
    pub fn quantize(&self, x: f64) -> Result<i64> {
        if !x.is_finite() {
            return Err(Error::EncodingRange { value: x });
        }
        let units = (x * self.scale as f64).round();
        if 2.0 * units.abs() >= self.field.modulus() as f64 {
            return Err(Error::EncodingRange { value: x });
        }
        Ok(units as i64)
    }

    pub fn encode(&self, x: f64) -> Result<FieldValue> {
        Ok(self.encode_units(self.quantize(x)?))
    }

    pub fn encode_units(&self, units: i64) -> FieldValue {
        self.field.from_signed(units as i128)
    }

    pub fn decode_units(&self, v: FieldValue) -> i64 {
        self.field.centered(v)
    }

    pub fn decode(&self, v: FieldValue) -> f64 {
        self.units_to_kwh(self.decode_units(v))
    }

    pub fn units_to_kwh(&self, units: i64) -> f64 {
        units as f64 / self.scale as f64
    }
}
