//! Paillier cryptosystem with the generator fixed to `g = 1 + Kp`.
//!
//! Plaintexts are signed: residues above `(Kp-1)/2` stand for negative
//! values. Random values are tracked modulo `Kp` on the client, since
//! `r^Kp mod Kp²` only depends on `r mod Kp`.

use std::cell::Cell;
use std::fmt;

use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hexint;

/// Counts of the big-integer operations performed on the current thread.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub mul: u64,
    pub inv: u64,
    pub pow: u64,
    pub l_eval: u64,
}

impl OpCounts {
    pub fn total(&self) -> u64 {
        self.mul + self.inv + self.pow + self.l_eval
    }

    pub fn since(&self, earlier: &OpCounts) -> OpCounts {
        OpCounts {
            mul: self.mul - earlier.mul,
            inv: self.inv - earlier.inv,
            pow: self.pow - earlier.pow,
            l_eval: self.l_eval - earlier.l_eval,
        }
    }
}

thread_local! {
    static OPS: Cell<OpCounts> = Cell::new(OpCounts::default());
}

pub fn op_counts() -> OpCounts {
    OPS.with(Cell::get)
}

fn tally(f: impl FnOnce(&mut OpCounts)) {
    OPS.with(|ops| {
        let mut c = ops.get();
        f(&mut c);
        ops.set(c);
    });
}

/// Short identifier of a public key: the first 8 bytes of SHA-256 over the
/// big-endian modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KeyId(pub u64);

impl fmt::Display for KeyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl KeyId {
    fn of(modulus: &BigUint) -> Self {
        let digest = Sha256::digest(modulus.to_bytes_be());
        let mut head = [0u8; 8];
        head.copy_from_slice(&digest[..8]);
        KeyId(u64::from_be_bytes(head))
    }
}

/// A plaintext in the signed range `[-(Kp-1)/2, (Kp-1)/2]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignedPlain(pub BigInt);

impl SignedPlain {
    pub fn to_i64(&self) -> Option<i64> {
        self.0.to_i64()
    }
}

impl From<i64> for SignedPlain {
    fn from(v: i64) -> Self {
        SignedPlain(BigInt::from(v))
    }
}

impl fmt::Display for SignedPlain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Client-side record of the random value inside a ciphertext, in `Z*_Kp`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TrackedRandom(BigUint);

impl TrackedRandom {
    pub fn value(&self) -> &BigUint {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ciphertext {
    value: BigUint,
    key_id: KeyId,
}

impl Ciphertext {
    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn key_id(&self) -> KeyId {
        self.key_id
    }
}

/// `r^Kp mod Kp²` for a tracked random `r`; client-side only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    value: BigUint,
    key_id: KeyId,
}

#[derive(Clone, PartialEq, Eq)]
pub struct PublicKey {
    modulus: BigUint,
    modulus_squared: BigUint,
    half: BigUint,
    id: KeyId,
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PublicKey")
            .field("modulus", &self.modulus)
            .field("id", &self.id)
            .finish()
    }
}

impl Serialize for PublicKey {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Doc {
            modulus: String,
        }
        Doc {
            modulus: hexint::encode(&self.modulus),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Doc {
            #[serde(with = "hexint")]
            modulus: BigUint,
        }
        let doc = Doc::deserialize(deserializer)?;
        PublicKey::from_modulus(doc.modulus).map_err(serde::de::Error::custom)
    }
}

impl PublicKey {
    pub fn from_modulus(modulus: BigUint) -> Result<Self> {
        if modulus < BigUint::from(15u32) || modulus.is_even() {
            return Err(Error::InvalidParameter(format!(
                "public modulus {modulus} must be odd and at least 15"
            )));
        }
        let modulus_squared = &modulus * &modulus;
        let half = (&modulus - 1u32) >> 1;
        let id = KeyId::of(&modulus);
        Ok(PublicKey {
            modulus,
            modulus_squared,
            half,
            id,
        })
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn modulus_squared(&self) -> &BigUint {
        &self.modulus_squared
    }

    pub fn id(&self) -> KeyId {
        self.id
    }

    /// Largest magnitude a signed plaintext may take, `(Kp-1)/2`.
    pub fn max_plain(&self) -> &BigUint {
        &self.half
    }

    /// `max_plain` as an i64, saturating for keys wider than 64 bits.
    pub fn max_plain_i64(&self) -> i64 {
        self.half.to_i64().unwrap_or(i64::MAX)
    }

    pub fn encode_signed(&self, v: &SignedPlain) -> Result<BigUint> {
        if v.0.magnitude() > &self.half {
            return Err(Error::overflow(&v.0, &self.half));
        }
        let m = BigInt::from_biguint(Sign::Plus, self.modulus.clone());
        Ok(v.0.mod_floor(&m).magnitude().clone())
    }

    pub fn decode_signed(&self, residue: &BigUint) -> SignedPlain {
        let r = residue % &self.modulus;
        if r > self.half {
            SignedPlain(BigInt::from(r) - BigInt::from(self.modulus.clone()))
        } else {
            SignedPlain(BigInt::from(r))
        }
    }

    pub fn tracked_random(&self, value: BigUint) -> Result<TrackedRandom> {
        let value = value % &self.modulus;
        if value.is_zero() || !value.gcd(&self.modulus).is_one() {
            return Err(Error::InvalidRandom);
        }
        Ok(TrackedRandom(value))
    }

    /// Uniform element of `Z*_Kp`.
    pub fn sample_random<R: RngCore + CryptoRng + ?Sized>(&self, rng: &mut R) -> TrackedRandom {
        loop {
            let v = rng.gen_biguint_range(&BigUint::one(), &self.modulus);
            if v.gcd(&self.modulus).is_one() {
                return TrackedRandom(v);
            }
        }
    }

    /// `E[m, r] = (1 + m·Kp)·r^Kp mod Kp²`.
    pub fn encrypt(&self, m: &SignedPlain, r: &TrackedRandom) -> Result<Ciphertext> {
        let encoded = self.encode_signed(m)?;
        if r.0.is_zero() || r.0 >= self.modulus || !r.0.gcd(&self.modulus).is_one() {
            return Err(Error::InvalidRandom);
        }
        let mask = r.0.modpow(&self.modulus, &self.modulus_squared);
        let head = (encoded * &self.modulus + 1u32) % &self.modulus_squared;
        tally(|c| {
            c.pow += 1;
            c.mul += 2;
        });
        Ok(Ciphertext {
            value: head * mask % &self.modulus_squared,
            key_id: self.id,
        })
    }

    /// Precomputes `r^Kp mod Kp²` so several plaintexts can be encrypted
    /// under the same random value with one exponentiation.
    pub fn mask(&self, r: &TrackedRandom) -> Result<Mask> {
        if r.0.is_zero() || r.0 >= self.modulus || !r.0.gcd(&self.modulus).is_one() {
            return Err(Error::InvalidRandom);
        }
        tally(|c| c.pow += 1);
        Ok(Mask {
            value: r.0.modpow(&self.modulus, &self.modulus_squared),
            key_id: self.id,
        })
    }

    /// Same ciphertext as [`PublicKey::encrypt`] with the random behind `mask`.
    pub fn encrypt_masked(&self, m: &SignedPlain, mask: &Mask) -> Result<Ciphertext> {
        if mask.key_id != self.id {
            return Err(Error::KeyMismatch);
        }
        let encoded = self.encode_signed(m)?;
        let head = (encoded * &self.modulus + 1u32) % &self.modulus_squared;
        tally(|c| c.mul += 2);
        Ok(Ciphertext {
            value: head * &mask.value % &self.modulus_squared,
            key_id: self.id,
        })
    }

    pub fn encrypt_i64(&self, m: i64, r: &TrackedRandom) -> Result<Ciphertext> {
        self.encrypt(&SignedPlain::from(m), r)
    }

    /// `E[0, 1] = 1`, the neutral element of ciphertext multiplication.
    pub fn neutral(&self) -> Ciphertext {
        Ciphertext {
            value: BigUint::one(),
            key_id: self.id,
        }
    }

    /// Wraps a raw residue, checking `0 < value < Kp²` and `gcd(value, Kp) = 1`.
    pub fn ciphertext(&self, value: BigUint) -> Result<Ciphertext> {
        if value.is_zero() || value >= self.modulus_squared || !value.gcd(&self.modulus).is_one() {
            return Err(Error::MalformedCiphertext);
        }
        Ok(Ciphertext {
            value,
            key_id: self.id,
        })
    }

    fn check(&self, c: &Ciphertext) -> Result<()> {
        if c.key_id != self.id {
            Err(Error::KeyMismatch)
        } else {
            Ok(())
        }
    }

    /// Ciphertext product; decrypts to the sum of the plaintexts.
    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        self.check(a)?;
        self.check(b)?;
        tally(|c| c.mul += 1);
        Ok(Ciphertext {
            value: &a.value * &b.value % &self.modulus_squared,
            key_id: self.id,
        })
    }

    pub fn invert(&self, c: &Ciphertext) -> Result<Ciphertext> {
        self.check(c)?;
        tally(|c| c.inv += 1);
        let value = mod_inverse(&c.value, &self.modulus_squared).ok_or(Error::MalformedCiphertext)?;
        Ok(Ciphertext {
            value,
            key_id: self.id,
        })
    }

    /// `c^s mod Kp²`; decrypts to `s·m`. Negative `s` goes through the
    /// inverse of `c`.
    pub fn scale(&self, c: &Ciphertext, s: i64) -> Result<Ciphertext> {
        self.check(c)?;
        if s == 1 {
            return Ok(c.clone());
        }
        let base = if s < 0 { self.invert(c)? } else { c.clone() };
        tally(|c| c.pow += 1);
        let e = BigUint::from(s.unsigned_abs());
        Ok(Ciphertext {
            value: base.value.modpow(&e, &self.modulus_squared),
            key_id: self.id,
        })
    }

    pub fn random_mul(&self, a: &TrackedRandom, b: &TrackedRandom) -> TrackedRandom {
        TrackedRandom(&a.0 * &b.0 % &self.modulus)
    }

    pub fn random_pow(&self, r: &TrackedRandom, s: i64) -> Result<TrackedRandom> {
        let base = if s < 0 {
            mod_inverse(&r.0, &self.modulus).ok_or(Error::InvalidRandom)?
        } else {
            r.0.clone()
        };
        Ok(TrackedRandom(base.modpow(&BigUint::from(s.unsigned_abs()), &self.modulus)))
    }

    pub fn unit_random(&self) -> TrackedRandom {
        TrackedRandom(BigUint::one())
    }

    /// `L(u) = (u - 1) / Kp`, or `None` when `u ≢ 1 (mod Kp)`.
    pub(crate) fn l_function(&self, u: &BigUint) -> Option<BigUint> {
        tally(|c| c.l_eval += 1);
        if u.is_zero() {
            return None;
        }
        let (q, rem) = (u - 1u32).div_rem(&self.modulus);
        rem.is_zero().then_some(q)
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct PrivateKey {
    public: PublicKey,
    lambda: BigUint,
    lambda_inverse: BigUint,
}

impl fmt::Debug for PrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PrivateKey")
            .field("key_id", &self.public.id)
            .finish_non_exhaustive()
    }
}

impl PrivateKey {
    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    pub fn lambda(&self) -> &BigUint {
        &self.lambda
    }

    pub fn lambda_inverse(&self) -> &BigUint {
        &self.lambda_inverse
    }

    /// `m = L(c^Ks mod Kp²)·Ks⁻¹ mod Kp`, decoded as a signed value.
    pub fn decrypt(&self, c: &Ciphertext) -> Result<SignedPlain> {
        self.public.check(c)?;
        let pk = &self.public;
        let u = c.value.modpow(&self.lambda, &pk.modulus_squared);
        let l = pk.l_function(&u).ok_or(Error::MalformedCiphertext)?;
        let m = l * &self.lambda_inverse % &pk.modulus;
        Ok(pk.decode_signed(&m))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Keypair {
    pub public: PublicKey,
    pub private: PrivateKey,
}

impl Keypair {
    /// Builds the key pair from two distinct primes, enforcing
    /// `gcd(Kp, Ks) = 1`.
    pub fn from_primes(p: &BigUint, q: &BigUint) -> Result<Self> {
        if p == q {
            return Err(Error::KeyGeneration("p and q must be distinct".into()));
        }
        if !is_probable_prime(p) || !is_probable_prime(q) {
            return Err(Error::KeyGeneration("p and q must be prime".into()));
        }
        let modulus = p * q;
        let lambda = (p - 1u32) * (q - 1u32);
        if !modulus.gcd(&lambda).is_one() {
            return Err(Error::KeyGeneration("gcd(Kp, Ks) != 1".into()));
        }
        let lambda_inverse = mod_inverse(&lambda, &modulus)
            .ok_or_else(|| Error::KeyGeneration("Ks is not invertible mod Kp".into()))?;
        let public = PublicKey::from_modulus(modulus)?;
        Ok(Keypair {
            private: PrivateKey {
                public: public.clone(),
                lambda,
                lambda_inverse,
            },
            public,
        })
    }

    /// Rebuilds a key pair from its serialized components, re-deriving the
    /// inverse and checking consistency.
    pub fn from_parts(modulus: BigUint, lambda: BigUint) -> Result<Self> {
        let lambda_inverse = mod_inverse(&lambda, &modulus)
            .ok_or_else(|| Error::KeyGeneration("Ks is not invertible mod Kp".into()))?;
        let public = PublicKey::from_modulus(modulus)?;
        Ok(Keypair {
            private: PrivateKey {
                public: public.clone(),
                lambda,
                lambda_inverse,
            },
            public,
        })
    }
}

const MAX_KEYGEN_ATTEMPTS: usize = 10_000;

/// Generates a key pair whose modulus has exactly `bit_length` bits.
pub fn keygen<R: RngCore + CryptoRng + ?Sized>(bit_length: u64, rng: &mut R) -> Result<Keypair> {
    if bit_length < 8 {
        return Err(Error::InvalidParameter(format!(
            "key length {bit_length} is below the 8-bit minimum"
        )));
    }
    let p_bits = bit_length.div_ceil(2);
    let q_bits = bit_length / 2;
    for _ in 0..MAX_KEYGEN_ATTEMPTS {
        let p = random_prime(p_bits, rng)?;
        let q = random_prime(q_bits, rng)?;
        if p == q || (&p * &q).bits() != bit_length {
            continue;
        }
        match Keypair::from_primes(&p, &q) {
            Ok(keys) => return Ok(keys),
            Err(_) => continue,
        }
    }
    Err(Error::KeyGeneration(format!(
        "no suitable {bit_length}-bit modulus after {MAX_KEYGEN_ATTEMPTS} attempts"
    )))
}

fn random_prime<R: RngCore + CryptoRng + ?Sized>(bits: u64, rng: &mut R) -> Result<BigUint> {
    let lo = BigUint::one() << (bits - 1);
    let hi = BigUint::one() << bits;
    for _ in 0..(64 * bits as usize).max(1024) {
        let candidate = rng.gen_biguint_range(&lo, &hi) | BigUint::one();
        if candidate < hi && is_probable_prime(&candidate) {
            return Ok(candidate);
        }
    }
    Err(Error::KeyGeneration(format!(
        "no {bits}-bit prime found; randomness source looks unusable"
    )))
}

/// Miller-Rabin with the first twelve prime bases, which is deterministic
/// below 3.3·10²⁴, plus extra pseudo-random bases above that.
pub fn is_probable_prime(n: &BigUint) -> bool {
    const BASES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    let two = BigUint::from(2u32);
    if n < &two {
        return false;
    }
    for b in BASES {
        let b = BigUint::from(b);
        if n == &b {
            return true;
        }
        if (n % &b).is_zero() {
            return false;
        }
    }
    let n_minus_one = n - 1u32;
    let s = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> s;
    let witness = |a: &BigUint| -> bool {
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_one {
            return false;
        }
        for _ in 1..s {
            x = &x * &x % n;
            if x == n_minus_one {
                return false;
            }
        }
        true
    };
    if BASES.iter().any(|&b| witness(&BigUint::from(b))) {
        return false;
    }
    if n.bits() > 80 {
        let mut a = BigUint::from(41u32);
        for _ in 0..16 {
            a = (&a * &a + 7u32) % (n - 3u32) + 2u32;
            if witness(&a) {
                return false;
            }
        }
    }
    true
}

pub(crate) fn mod_inverse(a: &BigUint, m: &BigUint) -> Option<BigUint> {
    let a = BigInt::from(a % m);
    let m = BigInt::from(m.clone());
    let e = a.extended_gcd(&m);
    if !e.gcd.is_one() {
        return None;
    }
    let x = e.x.mod_floor(&m);
    debug_assert!(!x.is_negative());
    Some(x.magnitude().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn small() -> Keypair {
        Keypair::from_primes(&BigUint::from(11u32), &BigUint::from(13u32)).unwrap()
    }

    #[test]
    fn forced_primes_give_textbook_key() {
        let keys = small();
        assert_eq!(keys.public.modulus(), &BigUint::from(143u32));
        assert_eq!(keys.private.lambda(), &BigUint::from(120u32));
        // Extended-Euclid oracle by brute force: 120·x ≡ 1 (mod 143).
        let oracle = (1u32..143).find(|x| 120 * x % 143 == 1).unwrap();
        assert_eq!(keys.private.lambda_inverse(), &BigUint::from(oracle));
    }

    #[test]
    fn keygen_bit_length_contract() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for bits in [8u64, 9, 16, 17, 32, 64] {
            let keys = keygen(bits, &mut rng).unwrap();
            assert_eq!(keys.public.modulus().bits(), bits);
        }
        let k16 = keygen(16, &mut rng).unwrap();
        let n = k16.public.modulus().to_u64().unwrap();
        assert!((1 << 15..1 << 16).contains(&n));
        assert!(keygen(7, &mut rng).is_err());
    }

    #[test]
    fn signed_encoding() {
        let pk = small().public;
        assert_eq!(pk.encode_signed(&0.into()).unwrap(), BigUint::zero());
        assert_eq!(pk.encode_signed(&(-5).into()).unwrap(), BigUint::from(138u32));
        assert_eq!(pk.decode_signed(&BigUint::from(138u32)), (-5).into());
        assert_eq!(pk.decode_signed(&BigUint::from(71u32)), 71.into());
        assert_eq!(pk.decode_signed(&BigUint::from(72u32)), (-71).into());
        assert!(matches!(
            pk.encode_signed(&72.into()),
            Err(Error::PlaintextOverflow { .. })
        ));
        assert!(pk.encode_signed(&(-72).into()).is_err());
    }

    #[test]
    fn encrypt_textbook_vectors() {
        let pk = small().public;
        let one = pk.unit_random();
        assert_eq!(pk.encrypt_i64(0, &one).unwrap().value(), &BigUint::one());
        // Independent square-and-multiply oracle for 2^143 mod 143².
        let mut acc: u64 = 1;
        for _ in 0..143 {
            acc = acc * 2 % 20449;
        }
        let expected = (1 + 5 * 143) * acc % 20449;
        let r = pk.tracked_random(BigUint::from(2u32)).unwrap();
        assert_eq!(pk.encrypt_i64(5, &r).unwrap().value(), &BigUint::from(expected));
    }

    #[test]
    fn invalid_random_rejected() {
        let pk = small().public;
        assert_eq!(pk.tracked_random(BigUint::from(11u32)), Err(Error::InvalidRandom));
        assert_eq!(pk.tracked_random(BigUint::from(143u32)), Err(Error::InvalidRandom));
        assert_eq!(pk.tracked_random(BigUint::from(0u32)), Err(Error::InvalidRandom));
    }

    #[test]
    fn decrypt_neutral_and_malformed() {
        let keys = small();
        assert_eq!(keys.private.decrypt(&keys.public.neutral()).unwrap(), 0.into());
        // Every unit of Z_{Kp²} is a valid ciphertext; non-units are refused
        // before they reach decryption.
        let g = keys.public.ciphertext(BigUint::from(144u32)).unwrap();
        assert_eq!(keys.private.decrypt(&g).unwrap(), 1.into());
        assert!(keys.public.ciphertext(BigUint::from(11u32)).is_err());
        assert!(keys.public.ciphertext(BigUint::from(20449u32)).is_err());
    }

    #[test]
    fn homomorphic_examples() {
        let keys = small();
        let pk = &keys.public;
        let r1 = pk.tracked_random(BigUint::from(2u32)).unwrap();
        let r2 = pk.tracked_random(BigUint::from(7u32)).unwrap();
        let c2 = pk.encrypt_i64(2, &r1).unwrap();
        let c3 = pk.encrypt_i64(3, &r2).unwrap();
        let sum = pk.add(&c2, &c3).unwrap();
        assert_eq!(keys.private.decrypt(&sum).unwrap(), 5.into());
        let rr = pk.random_mul(&r1, &r2);
        assert_eq!(pk.encrypt_i64(5, &rr).unwrap(), sum);
        let zero = pk.encrypt_i64(0, &pk.unit_random()).unwrap();
        assert_eq!(pk.add(&c2, &zero).unwrap(), c2);

        assert_eq!(pk.scale(&c3, 1).unwrap(), c3);
        let neg = pk.scale(&c3, -2).unwrap();
        assert_eq!(keys.private.decrypt(&neg).unwrap(), (-6).into());
        let z = pk.encrypt_i64(0, &r2).unwrap();
        for s in -5..=5 {
            assert_eq!(keys.private.decrypt(&pk.scale(&z, s).unwrap()).unwrap(), 0.into());
        }
        assert_eq!(pk.random_pow(&r1, 0).unwrap(), pk.unit_random());
        assert_eq!(pk.random_mul(&r1, &pk.unit_random()), r1);
    }

    #[test]
    fn masked_encryption_matches() {
        let pk = small().public;
        let r = pk.tracked_random(BigUint::from(31u32)).unwrap();
        let mask = pk.mask(&r).unwrap();
        for m in -71..=71 {
            assert_eq!(
                pk.encrypt_masked(&m.into(), &mask).unwrap(),
                pk.encrypt_i64(m, &r).unwrap()
            );
        }
    }

    #[test]
    fn key_mismatch() {
        let a = small();
        let b = Keypair::from_primes(&BigUint::from(17u32), &BigUint::from(19u32)).unwrap();
        let ca = a.public.encrypt_i64(1, &a.public.unit_random()).unwrap();
        let cb = b.public.encrypt_i64(1, &b.public.unit_random()).unwrap();
        assert_eq!(a.public.add(&ca, &cb), Err(Error::KeyMismatch));
        assert_eq!(a.private.decrypt(&cb), Err(Error::KeyMismatch));
    }

    #[test]
    fn op_counts_for_encrypt() {
        let pk = small().public;
        let before = op_counts();
        pk.encrypt_i64(4, &pk.unit_random()).unwrap();
        let d = op_counts().since(&before);
        assert_eq!((d.pow, d.mul), (1, 2));
    }

    #[test]
    fn primality_small_range() {
        let sieve: Vec<u32> = (0u32..2000)
            .filter(|&n| n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0))
            .collect();
        let mr: Vec<u32> = (0u32..2000)
            .filter(|&n| is_probable_prime(&BigUint::from(n)))
            .collect();
        assert_eq!(sieve, mr);
        // Carmichael numbers.
        for c in [561u32, 1105, 1729, 2465, 2821, 6601, 8911] {
            assert!(!is_probable_prime(&BigUint::from(c)));
        }
    }
}
