//! Pedersen commitments `g^m · h^r mod q` over a [`GroupParams`] key.

use num_traits::One;

use crate::error::{Error, Result};
use crate::numtheory::{BigNat, GroupParams};
use crate::sharing::FieldValue;

impl From<FieldValue> for BigNat {
    fn from(v: FieldValue) -> Self {
        v.to_big()
    }
}

/// A commitment value; transmitted and stored as `bits_q` bits.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Commitment {
    value: BigNat,
    bits: u64,
}

impl Commitment {
    /// Wraps a raw group element, checking it lies in `G`.
    pub fn from_value(ck: &GroupParams, value: BigNat) -> Result<Self> {
        if value >= *ck.q() || !value.modpow(ck.p(), ck.q()).is_one() {
            return Err(Error::InvalidInput("commitment is not an element of G".into()));
        }
        Ok(Self {
            value,
            bits: ck.bits_q(),
        })
    }

    pub fn value(&self) -> &BigNat {
        &self.value
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }
}

/// The pair a committer reveals to open a commitment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Opening {
    pub message: FieldValue,
    pub randomness: FieldValue,
}

/// `g^m · h^r mod q` with both exponents reduced mod `p`.
///
/// `ck` is validated on construction, so this cannot fail.
pub fn commit(ck: &GroupParams, message: impl Into<BigNat>, randomness: impl Into<BigNat>) -> Commitment {
    let (q, p) = (ck.q(), ck.p());
    let m = message.into() % p;
    let r = randomness.into() % p;
    let value = (ck.g().modpow(&m, q) * ck.h().modpow(&r, q)) % q;
    Commitment {
        value,
        bits: ck.bits_q(),
    }
}

pub fn commit_opening(ck: &GroupParams, opening: &Opening) -> Commitment {
    commit(ck, opening.message, opening.randomness)
}

/// Recomputes the commitment from the claimed opening and compares.
pub fn verify_open(
    ck: &GroupParams,
    c: &Commitment,
    message: impl Into<BigNat>,
    randomness: impl Into<BigNat>,
) -> bool {
    commit(ck, message, randomness).value == c.value
}

/// Product of commitments mod `q`; a commitment to the sums of the openings.
pub fn product<'a, I>(commitments: I, ck: &GroupParams) -> Result<Commitment>
where
    I: IntoIterator<Item = &'a Commitment>,
{
    let q = ck.q();
    let mut iter = commitments.into_iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::InvalidInput("product of an empty commitment list".into()))?;
    let value = iter.fold(first.value.clone() % q, |acc, c| (acc * &c.value) % q);
    Ok(Commitment {
        value,
        bits: ck.bits_q(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> GroupParams {
        let n = BigNat::from;
        GroupParams::new(n(11u32), n(5u32), n(2u32), n(3u32), n(4u32)).unwrap()
    }

    fn b(x: u64) -> BigNat {
        BigNat::from(x)
    }

    #[test]
    fn commit_examples() {
        let ck = toy();
        assert_eq!(commit(&ck, b(2), b(3)).value(), &b(4));
        assert_eq!(commit(&ck, b(0), b(0)).value(), &b(1));
        assert_eq!(commit(&ck, b(7), b(13)), commit(&ck, b(2), b(3)));
        assert_eq!(commit(&ck, b(2), b(3)).bits(), 4);
    }

    #[test]
    fn verify_examples() {
        let ck = toy();
        let c = commit(&ck, b(2), b(3));
        assert!(verify_open(&ck, &c, b(2), b(3)));
        // 3^2 * 4^4 = 9 * 3 = 5 (mod 11).
        assert_eq!(commit(&ck, b(2), b(4)).value(), &b(5));
        assert!(!verify_open(&ck, &c, b(2), b(4)));
    }

    #[test]
    fn product_examples() {
        let ck = toy();
        let prod = product([&commit(&ck, b(2), b(3)), &commit(&ck, b(1), b(1))], &ck).unwrap();
        assert_eq!(prod.value(), &b(4));
        assert_eq!(prod, commit(&ck, b(3), b(4)));

        let single = commit(&ck, b(1), b(2));
        assert_eq!(product([&single], &ck).unwrap(), single);

        let inv = product([&commit(&ck, b(2), b(3)), &commit(&ck, b(3), b(2))], &ck).unwrap();
        assert_eq!(inv.value(), &b(1));

        assert!(product(std::iter::empty(), &ck).is_err());
    }

    #[test]
    fn from_value_checks_membership() {
        let ck = toy();
        assert!(Commitment::from_value(&ck, b(9)).is_ok());
        assert!(Commitment::from_value(&ck, b(2)).is_err());
        assert!(Commitment::from_value(&ck, b(12)).is_err());
    }
}
