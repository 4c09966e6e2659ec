//! Communication-free comparison of Paillier ciphertexts.
//!
//! Two ciphertexts that share a key and a random value reveal the difference
//! of their plaintexts to anyone holding the public key:
//! `L(E[T,r]·E[m,r]⁻¹ mod Kp²) = T - m (mod Kp)`. Users with different keys
//! compare through an agreed reference value `P`: each side yields `P - mᵢ`
//! and the difference of those is `m₁ - m₂`.

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::paillier::{Ciphertext, KeyId, PublicKey, SignedPlain};

/// A reference ciphertext `E[T, r]` and a subject `E[m, r]` under one key.
///
/// That both were built with the same `r` is a client promise the server
/// cannot check up front; [`encrypted_diff`] reports a violation as
/// [`Error::RandomMismatch`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchedPair {
    reference: Ciphertext,
    subject: Ciphertext,
}

impl MatchedPair {
    pub fn new(reference: Ciphertext, subject: Ciphertext) -> Result<Self> {
        if reference.key_id() != subject.key_id() {
            return Err(Error::KeyMismatch);
        }
        Ok(MatchedPair { reference, subject })
    }

    pub fn key_id(&self) -> KeyId {
        self.reference.key_id()
    }

    pub fn reference(&self) -> &Ciphertext {
        &self.reference
    }

    pub fn subject(&self) -> &Ciphertext {
        &self.subject
    }
}

/// Differences `P - m₁` and `P - m₂` obtained under two keys against the
/// same reference `P`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossKeyDiff {
    pub d1: SignedPlain,
    pub d2: SignedPlain,
}

impl CrossKeyDiff {
    pub fn difference(&self) -> SignedPlain {
        cross_key_diff(&self.d1, &self.d2)
    }
}

/// `T - m` from `E[T, r]` and `E[m, r]`, using only the public key.
///
/// Costs one inversion, one multiplication and one `L` evaluation.
pub fn encrypted_diff(reference: &Ciphertext, subject: &Ciphertext, pk: &PublicKey) -> Result<SignedPlain> {
    let inv = pk.invert(subject)?;
    let quotient = pk.add(reference, &inv)?;
    let l = pk
        .l_function(quotient.value())
        .ok_or(Error::RandomMismatch)?;
    Ok(pk.decode_signed(&(l % pk.modulus())))
}

pub fn encrypted_diff_pair(pair: &MatchedPair, pk: &PublicKey) -> Result<SignedPlain> {
    encrypted_diff(&pair.reference, &pair.subject, pk)
}

/// `m₁ - m₂ = d₂ - d₁` where `dᵢ = P - mᵢ`.
pub fn cross_key_diff(d1: &SignedPlain, d2: &SignedPlain) -> SignedPlain {
    SignedPlain(&d2.0 - &d1.0)
}

/// Iterative comparison: multiplies `subject` by `g = 1 + Kp` until it
/// equals `reference`, returning the number of steps. Linear in the
/// difference; kept as a cross-check for [`encrypted_diff`].
pub fn hsu_iterative_diff(
    reference: &Ciphertext,
    subject: &Ciphertext,
    pk: &PublicKey,
    max_iter: u64,
) -> Result<SignedPlain> {
    if reference.key_id() != pk.id() || subject.key_id() != pk.id() {
        return Err(Error::KeyMismatch);
    }
    let g = BigUint::from(1u32) + pk.modulus();
    let n2 = pk.modulus_squared();
    let mut current = subject.value().clone();
    for inc in 0..=max_iter {
        if &current == reference.value() {
            return Ok(SignedPlain::from(inc as i64));
        }
        current = current * &g % n2;
    }
    Err(Error::OutOfRange(max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paillier::{op_counts, Keypair};
    use num_bigint::BigUint;

    fn small() -> Keypair {
        Keypair::from_primes(&BigUint::from(11u32), &BigUint::from(13u32)).unwrap()
    }

    #[test]
    fn same_random_examples() {
        let pk = small().public;
        let r = pk.tracked_random(BigUint::from(9u32)).unwrap();
        let t = pk.encrypt_i64(10, &r).unwrap();
        let m = pk.encrypt_i64(3, &r).unwrap();
        assert_eq!(encrypted_diff(&t, &m, &pk).unwrap(), 7.into());
        assert_eq!(encrypted_diff(&m, &t, &pk).unwrap(), (-7).into());
        assert_eq!(encrypted_diff(&m, &m, &pk).unwrap(), 0.into());
        let pair = MatchedPair::new(t, m).unwrap();
        assert_eq!(encrypted_diff_pair(&pair, &pk).unwrap(), 7.into());
    }

    #[test]
    fn three_operations_per_call() {
        let pk = small().public;
        let r = pk.tracked_random(BigUint::from(4u32)).unwrap();
        let t = pk.encrypt_i64(20, &r).unwrap();
        let m = pk.encrypt_i64(-3, &r).unwrap();
        let before = op_counts();
        encrypted_diff(&t, &m, &pk).unwrap();
        let d = op_counts().since(&before);
        assert_eq!((d.inv, d.mul, d.l_eval, d.pow), (1, 1, 1, 0));
        assert_eq!(d.total(), 3);
    }

    #[test]
    fn mismatched_randoms_detected() {
        let pk = small().public;
        let r1 = pk.tracked_random(BigUint::from(2u32)).unwrap();
        let r2 = pk.tracked_random(BigUint::from(3u32)).unwrap();
        let t = pk.encrypt_i64(10, &r1).unwrap();
        let m = pk.encrypt_i64(3, &r2).unwrap();
        assert_eq!(encrypted_diff(&t, &m, &pk), Err(Error::RandomMismatch));
    }

    #[test]
    fn cross_key_examples() {
        let p = 50i64;
        let d1 = SignedPlain::from(p - 4);
        let d2 = SignedPlain::from(p - 9);
        assert_eq!(cross_key_diff(&d1, &d2), (-5).into());
        assert_eq!(cross_key_diff(&d1, &d1), 0.into());
        let both = CrossKeyDiff { d1, d2 };
        assert_eq!(both.difference(), (-5).into());
    }

    #[test]
    fn iterative_examples() {
        let pk = small().public;
        let r = pk.tracked_random(BigUint::from(5u32)).unwrap();
        let m = pk.encrypt_i64(12, &r).unwrap();
        let same = pk.encrypt_i64(12, &r).unwrap();
        let plus5 = pk.encrypt_i64(17, &r).unwrap();
        assert_eq!(hsu_iterative_diff(&same, &m, &pk, 10).unwrap(), 0.into());
        assert_eq!(hsu_iterative_diff(&plus5, &m, &pk, 10).unwrap(), 5.into());
        assert_eq!(hsu_iterative_diff(&plus5, &m, &pk, 4), Err(Error::OutOfRange(4)));
    }
}
