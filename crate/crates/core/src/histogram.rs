//! Sub-band histograms: the clear reference, the server-side noisy
//! histogram over encrypted coefficients, and the encrypted class
//! cardinalities derived from it with client-supplied mapping vectors.
//!
//! A histogram has `K` classes of width `Δ` starting at `c_min`. Class of a
//! coefficient `c` is `clamp(floor((c - c_min)/Δ), 0, K-1)`, which is the
//! nearest class center `T_k = c_min + kΔ + Δ/2` with ties going to the
//! higher index. Coefficients outside the window fall into the edge
//! classes. Centers are handled doubled (`2·T_k`) so odd `Δ` stays integral.
//!
//! Each coefficient gets a secret shift `ν ∈ [0, K'-K]`; the server only
//! learns the noisy index `l = k + ν`.

use num_bigint::BigUint;
use rand::{CryptoRng, Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::compare::encrypted_diff;
use crate::error::{Error, Result};
use crate::paillier::{Ciphertext, KeyId, Mask, PublicKey, SignedPlain};
use crate::wavelet::BandId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub delta: i64,
    pub classes: usize,
    pub noisy_classes: usize,
    pub c_min: i64,
    pub c_max: i64,
    /// Absolute range the band can take; values outside it cannot come
    /// out of the transform.
    pub band_lo: i64,
    pub band_hi: i64,
}

impl HistogramSpec {
    pub fn new(
        delta: i64,
        classes: usize,
        noisy_classes: usize,
        c_min: i64,
        band_lo: i64,
        band_hi: i64,
    ) -> Result<Self> {
        if delta < 1 {
            return Err(Error::InvalidParameter(format!("class width {delta} must be >= 1")));
        }
        if classes < 1 {
            return Err(Error::InvalidParameter("at least one class is required".into()));
        }
        if noisy_classes < 2 * classes {
            return Err(Error::InvalidParameter(format!(
                "noisy class count {noisy_classes} must be at least twice the class count {classes}"
            )));
        }
        if band_lo > band_hi {
            return Err(Error::InvalidParameter(format!("empty band range [{band_lo}, {band_hi}]")));
        }
        Ok(HistogramSpec {
            delta,
            classes,
            noisy_classes,
            c_min,
            c_max: c_min + classes as i64 * delta - 1,
            band_lo,
            band_hi,
        })
    }

    /// Window spanning the whole band range: `K = ceil((hi-lo+1)/Δ)`.
    pub fn covering(delta: i64, band_lo: i64, band_hi: i64, noisy_factor: usize) -> Result<Self> {
        if delta < 1 {
            return Err(Error::InvalidParameter(format!("class width {delta} must be >= 1")));
        }
        let classes = (band_hi - band_lo + 1).div_euclid(delta) as usize
            + usize::from((band_hi - band_lo + 1).rem_euclid(delta) != 0);
        Self::new(delta, classes, noisy_factor.max(2) * classes, band_lo, band_lo, band_hi)
    }

    /// `K` classes of width `Δ` centred on the middle of the band range.
    pub fn centered(delta: i64, classes: usize, noisy_classes: usize, band_lo: i64, band_hi: i64) -> Result<Self> {
        let mid = band_lo + (band_hi - band_lo) / 2;
        let c_min = mid - (classes as i64 * delta) / 2;
        Self::new(delta, classes, noisy_classes, c_min, band_lo, band_hi)
    }

    /// Largest admissible shift `ν`.
    pub fn max_shift(&self) -> usize {
        self.noisy_classes - self.classes
    }

    /// True when no in-range coefficient can fall outside the class window.
    pub fn covers_band(&self) -> bool {
        self.c_min <= self.band_lo && self.c_max >= self.band_hi
    }

    pub fn check_dynamic(&self, c: i64) -> Result<()> {
        if c < self.band_lo || c > self.band_hi {
            Err(Error::DynamicBound {
                value: c,
                lo: self.band_lo,
                hi: self.band_hi,
            })
        } else {
            Ok(())
        }
    }

    pub fn class_of(&self, c: i64) -> Result<usize> {
        self.check_dynamic(c)?;
        let k = (c - self.c_min).div_euclid(self.delta);
        Ok(k.clamp(0, self.classes as i64 - 1) as usize)
    }

    /// `2·T_k` for any integer `k`.
    pub fn center_doubled(&self, k: i64) -> i64 {
        2 * self.c_min + (2 * k + 1) * self.delta
    }

    fn dummy_hi_doubled(&self) -> i64 {
        let top = self.center_doubled(self.classes as i64 - 1);
        (4 * self.band_hi - top).max(top) + 1
    }

    fn dummy_lo_doubled(&self) -> i64 {
        let bottom = self.center_doubled(0);
        (4 * self.band_lo - bottom).min(bottom) - 1
    }

    /// Doubled center sent for noisy index `l` of a coefficient shifted by
    /// `nu`. Indices mapping to a real class get `2·T_{l-ν}`; the others get
    /// placeholders far enough out that no in-range coefficient is ever
    /// closer to them than to a real center. The sequence is strictly
    /// increasing in `l`.
    pub fn noisy_center_doubled(&self, l: usize, nu: usize) -> i64 {
        let k = l as i64 - nu as i64;
        if k < 0 {
            self.dummy_lo_doubled() - (-k - 1)
        } else if k >= self.classes as i64 {
            self.dummy_hi_doubled() + (k - self.classes as i64)
        } else {
            self.center_doubled(k)
        }
    }

    /// Threshold `Θ = c_min - νΔ` of the single-threshold mode.
    pub fn compact_threshold(&self, nu: usize) -> i64 {
        self.c_min - nu as i64 * self.delta
    }

    /// Largest plaintext magnitude touched by the noisy-class computation.
    pub fn plain_bound(&self, mode: HistogramMode) -> i64 {
        match mode {
            HistogramMode::Centers => {
                let hi = self.dummy_hi_doubled() + self.max_shift() as i64;
                let lo = self.dummy_lo_doubled() - self.max_shift() as i64;
                [hi.abs(), lo.abs(), hi - 2 * self.band_lo, 2 * self.band_hi - lo]
                    .into_iter()
                    .max()
                    .unwrap_or(0)
            }
            HistogramMode::Compact => {
                let theta_lo = self.compact_threshold(self.max_shift());
                [theta_lo.abs(), self.c_min.abs(), self.band_hi - theta_lo]
                    .into_iter()
                    .max()
                    .unwrap_or(0)
            }
        }
    }
}

/// How the server locates each coefficient's noisy class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HistogramMode {
    /// `K'` encrypted class centers per coefficient.
    Centers,
    /// One encrypted threshold per coefficient.
    Compact,
}

impl std::str::FromStr for HistogramMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centers" => Ok(HistogramMode::Centers),
            "compact" => Ok(HistogramMode::Compact),
            other => Err(Error::InvalidParameter(format!("unknown mode {other:?}"))),
        }
    }
}

pub fn clear_histogram(values: &[i64], spec: &HistogramSpec) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; spec.classes];
    for &c in values {
        counts[spec.class_of(c)?] += 1;
    }
    Ok(counts)
}

/// Per-coefficient shifts `ν` of one band, client secret.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoiseGrid {
    pub band: BandId,
    pub shifts: Vec<usize>,
}

impl NoiseGrid {
    pub fn sample<R: RngCore + ?Sized>(band: BandId, len: usize, spec: &HistogramSpec, rng: &mut R) -> Self {
        let shifts = (0..len).map(|_| rng.gen_range(0..=spec.max_shift())).collect();
        NoiseGrid { band, shifts }
    }
}

/// Noisy index of `E[c, r]` from its `K'` doubled centers `E[2·T'_l, r²]`.
///
/// Scans every center: `l = argmin |2T'_l - 2c|`, ties to the higher index.
pub fn noisy_class_centers_mode(enc_coeff: &Ciphertext, noisy_centers: &[Ciphertext], pk: &PublicKey) -> Result<usize> {
    if noisy_centers.is_empty() {
        return Err(Error::MalformedPackage("no class centers".into()));
    }
    let doubled = pk.scale(enc_coeff, 2)?;
    let mut best: Option<(BigUint, usize)> = None;
    for (l, center) in noisy_centers.iter().enumerate() {
        let d = encrypted_diff(center, &doubled, pk)?;
        let dist = d.0.magnitude().clone();
        if best.as_ref().is_none_or(|(b, _)| dist <= *b) {
            best = Some((dist, l));
        }
    }
    Ok(best.map(|(_, l)| l).unwrap_or(0))
}

/// Same result as [`noisy_class_centers_mode`] in `O(log K')` comparisons,
/// relying on the centers being increasing in `l` (which
/// [`HistogramSpec::noisy_center_doubled`] guarantees).
pub fn noisy_class_centers_mode_bisect(
    enc_coeff: &Ciphertext,
    noisy_centers: &[Ciphertext],
    pk: &PublicKey,
) -> Result<usize> {
    let n = noisy_centers.len();
    if n == 0 {
        return Err(Error::MalformedPackage("no class centers".into()));
    }
    let doubled = pk.scale(enc_coeff, 2)?;
    let diff = |l: usize| encrypted_diff(&noisy_centers[l], &doubled, pk);
    // First l with 2T'_l - 2c >= 0.
    let (mut lo, mut hi) = (0usize, n);
    let mut at_hi = None;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        let d = diff(mid)?;
        if d.0.sign() != num_bigint::Sign::Minus {
            hi = mid;
            at_hi = Some(d);
        } else {
            lo = mid + 1;
        }
    }
    if lo == 0 {
        return Ok(0);
    }
    if lo == n {
        return Ok(n - 1);
    }
    let above = match at_hi {
        Some(d) => d,
        None => diff(lo)?,
    };
    let below = diff(lo - 1)?;
    if above.0.magnitude() <= below.0.magnitude() {
        Ok(lo)
    } else {
        Ok(lo - 1)
    }
}

/// Noisy index from a single threshold `E[Θ, r]`: `l = floor((c - Θ)/Δ)`.
pub fn noisy_class_compact_mode(
    enc_coeff: &Ciphertext,
    enc_theta: &Ciphertext,
    spec: &HistogramSpec,
    pk: &PublicKey,
) -> Result<usize> {
    let d = encrypted_diff(enc_coeff, enc_theta, pk)?
        .to_i64()
        .ok_or_else(|| Error::MalformedPackage("threshold distance out of range".into()))?;
    if d < 0 {
        return Err(Error::MalformedPackage(format!("negative threshold distance {d}")));
    }
    let l = (d / spec.delta) as usize;
    if l >= spec.noisy_classes {
        return Err(Error::MalformedPackage(format!("noisy index {l} beyond K'")));
    }
    Ok(l)
}

/// Server-visible histogram over `K'` noisy classes, with the per-coefficient
/// selector positions it was built from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoisyHistogram {
    pub counts: Vec<u64>,
    pub selectors: Vec<usize>,
}

pub fn build_noisy_histogram(indices: &[usize], noisy_classes: usize) -> Result<NoisyHistogram> {
    let mut counts = vec![0u64; noisy_classes];
    for &l in indices {
        *counts
            .get_mut(l)
            .ok_or_else(|| Error::MalformedPackage(format!("noisy index {l} beyond K'")))? += 1;
    }
    Ok(NoisyHistogram {
        counts,
        selectors: indices.to_vec(),
    })
}

fn select_product(selectors: &[usize], vectors: &[&[Ciphertext]], noisy_classes: usize, pk: &PublicKey) -> Result<Ciphertext> {
    if selectors.len() != vectors.len() {
        return Err(Error::LengthMismatch {
            left: selectors.len(),
            right: vectors.len(),
        });
    }
    let mut acc = pk.neutral();
    for (&l, v) in selectors.iter().zip(vectors) {
        if v.len() != noisy_classes {
            return Err(Error::MalformedPackage(format!(
                "vector of length {} where {noisy_classes} expected",
                v.len()
            )));
        }
        let picked = v
            .get(l)
            .ok_or_else(|| Error::MalformedPackage(format!("selector {l} beyond K'")))?;
        acc = pk.add(&acc, picked)?;
    }
    Ok(acc)
}

/// `E[H(k)] = Π_{x,y} P^{T_k}_{x,y}[l(x,y)]`: the selector is one-hot, so
/// the inner product reduces to picking one component per coefficient.
pub fn secure_cardinality(
    selectors: &[usize],
    mapping_vectors: &[&[Ciphertext]],
    noisy_classes: usize,
    pk: &PublicKey,
) -> Result<Ciphertext> {
    select_product(selectors, mapping_vectors, noisy_classes, pk)
}

/// `E[p_k·N]` carrying the same random as the matching
/// [`secure_cardinality`] output.
pub fn reference_sum(
    selectors: &[usize],
    reference_vectors: &[&[Ciphertext]],
    noisy_classes: usize,
    pk: &PublicKey,
) -> Result<Ciphertext> {
    select_product(selectors, reference_vectors, noisy_classes, pk)
}

/// Mapping vector `P^{T_k}` for one coefficient: `E[0, r_j]` everywhere
/// except `E[1, r_j]` at `k + ν`. Returns the random masks so the paired
/// reference vector can reuse them.
pub fn mapping_vector<R: RngCore + CryptoRng + ?Sized>(
    class: usize,
    nu: usize,
    spec: &HistogramSpec,
    pk: &PublicKey,
    rng: &mut R,
) -> Result<(Vec<Ciphertext>, Vec<Mask>)> {
    let hot = class + nu;
    if class >= spec.classes || hot >= spec.noisy_classes {
        return Err(Error::InvalidParameter(format!(
            "hot index {hot} outside [0, {})",
            spec.noisy_classes
        )));
    }
    let zero = SignedPlain::from(0);
    let one = SignedPlain::from(1);
    let mut cts = Vec::with_capacity(spec.noisy_classes);
    let mut masks = Vec::with_capacity(spec.noisy_classes);
    for j in 0..spec.noisy_classes {
        let mask = pk.mask(&pk.sample_random(rng))?;
        cts.push(pk.encrypt_masked(if j == hot { &one } else { &zero }, &mask)?);
        masks.push(mask);
    }
    Ok((cts, masks))
}

/// Reference vector `P`: `E[p_k, r_j]` with the mapping vector's randoms.
pub fn reference_vector(p_k: u64, masks: &[Mask], pk: &PublicKey) -> Result<Vec<Ciphertext>> {
    let p = SignedPlain::from(p_k as i64);
    masks.iter().map(|m| pk.encrypt_masked(&p, m)).collect()
}

/// Secret per-class reference values `p_k ∈ [1, max]` for one band, derived
/// from the seed users share.
pub fn reference_values(seed: &[u8; 32], band: BandId, classes: usize, max: u64) -> Vec<u64> {
    let mut h = Sha256::new();
    h.update(b"socbir/reference/v1");
    h.update(seed);
    h.update(band.level.to_be_bytes());
    h.update(band.band.to_string().as_bytes());
    h.update((classes as u64).to_be_bytes());
    let mut rng = ChaCha20Rng::from_seed(h.finalize().into());
    (0..classes).map(|_| rng.gen_range(1..=max.max(1))).collect()
}

/// Encrypted histogram of one band.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptedHistogram {
    pub band: BandId,
    /// `E[H(k)]` for each clear class.
    pub cardinalities: Vec<Ciphertext>,
    /// `E[p_k·N]` with the random of the matching cardinality.
    pub reference_sums: Vec<Ciphertext>,
    /// Number of coefficients `N` in the band.
    pub size: usize,
    pub key_id: KeyId,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paillier::{Keypair, TrackedRandom};
    use rand::SeedableRng;

    fn keys() -> Keypair {
        Keypair::from_primes(&BigUint::from(1_000_003u32), &BigUint::from(999_983u32)).unwrap()
    }

    fn band() -> BandId {
        BandId {
            level: 1,
            band: crate::wavelet::Band::HG,
        }
    }

    #[test]
    fn clear_examples() {
        let spec = HistogramSpec::new(4, 2, 4, 0, 0, 7).unwrap();
        assert_eq!(clear_histogram(&[0, 1, 5, 6], &spec).unwrap(), vec![2, 2]);
        assert_eq!(clear_histogram(&[], &spec).unwrap(), vec![0, 0]);
        assert!(matches!(
            clear_histogram(&[8], &spec),
            Err(Error::DynamicBound { value: 8, .. })
        ));
    }

    #[test]
    fn saturation_at_window_edges() {
        let spec = HistogramSpec::new(2, 3, 6, 0, -10, 10).unwrap();
        assert_eq!(spec.c_max, 5);
        assert_eq!(spec.class_of(-10).unwrap(), 0);
        assert_eq!(spec.class_of(5).unwrap(), 2);
        assert_eq!(spec.class_of(10).unwrap(), 2);
        assert!(!spec.covers_band());
    }

    #[test]
    fn argmin_rule_equals_floor_rule() {
        // Exhaustive: nearest doubled center with ties to the higher index.
        for delta in 1..=8i64 {
            for classes in 1..=5usize {
                for c_min in -9..=3i64 {
                    let spec = HistogramSpec::new(delta, classes, 2 * classes, c_min, -60, 60).unwrap();
                    for c in -60..=60 {
                        let mut best = (i64::MAX, 0usize);
                        for k in 0..classes {
                            let d = (spec.center_doubled(k as i64) - 2 * c).abs();
                            if d <= best.0 {
                                best = (d, k);
                            }
                        }
                        assert_eq!(spec.class_of(c).unwrap(), best.1, "Δ={delta} K={classes} c={c}");
                    }
                }
            }
        }
    }

    #[test]
    fn covering_window() {
        let spec = HistogramSpec::covering(4, 0, 255, 2).unwrap();
        assert_eq!(spec.classes, 64);
        assert_eq!(spec.noisy_classes, 128);
        assert!(spec.covers_band());
        let odd = HistogramSpec::covering(3, -4, 4, 2).unwrap();
        assert_eq!(odd.classes, 3);
        assert!(HistogramSpec::new(1, 4, 7, 0, 0, 3).is_err());
    }

    #[test]
    fn noisy_centers_increase_and_never_win() {
        let spec = HistogramSpec::centered(3, 4, 9, -40, 40).unwrap();
        for nu in 0..=spec.max_shift() {
            let centers: Vec<i64> = (0..spec.noisy_classes).map(|l| spec.noisy_center_doubled(l, nu)).collect();
            assert!(centers.windows(2).all(|w| w[0] < w[1]));
            for c in spec.band_lo..=spec.band_hi {
                let mut best = (i64::MAX, 0usize);
                for (l, t) in centers.iter().enumerate() {
                    let d = (t - 2 * c).abs();
                    if d <= best.0 {
                        best = (d, l);
                    }
                }
                assert_eq!(best.1, spec.class_of(c).unwrap() + nu);
            }
        }
    }

    fn encrypted_centers(
        spec: &HistogramSpec,
        nu: usize,
        r: &TrackedRandom,
        pk: &PublicKey,
    ) -> Vec<Ciphertext> {
        let r2 = pk.random_pow(r, 2).unwrap();
        (0..spec.noisy_classes)
            .map(|l| pk.encrypt_i64(spec.noisy_center_doubled(l, nu), &r2).unwrap())
            .collect()
    }

    #[test]
    fn centers_mode_sweep() {
        let keys = keys();
        let pk = &keys.public;
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let spec = HistogramSpec::centered(2, 3, 6, -12, 12).unwrap();
        for nu in 0..=spec.max_shift() {
            let r = pk.sample_random(&mut rng);
            let centers = encrypted_centers(&spec, nu, &r, pk);
            for c in spec.band_lo..=spec.band_hi {
                let ec = pk.encrypt_i64(c, &r).unwrap();
                let l = noisy_class_centers_mode(&ec, &centers, pk).unwrap();
                assert_eq!(l, spec.class_of(c).unwrap() + nu);
                assert_eq!(noisy_class_centers_mode_bisect(&ec, &centers, pk).unwrap(), l);
            }
        }
    }

    #[test]
    fn centers_mode_edges_and_mismatch() {
        let keys = keys();
        let pk = &keys.public;
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let spec = HistogramSpec::new(4, 3, 6, 0, 0, 11).unwrap();
        let r = pk.sample_random(&mut rng);
        let centers = encrypted_centers(&spec, 2, &r, pk);
        // At a center: T_1 = 6.
        let at_center = pk.encrypt_i64(6, &r).unwrap();
        assert_eq!(noisy_class_centers_mode(&at_center, &centers, pk).unwrap(), 3);
        // Left edge of class 1 is equidistant from T_0 and T_1.
        let edge = pk.encrypt_i64(4, &r).unwrap();
        assert_eq!(noisy_class_centers_mode(&edge, &centers, pk).unwrap(), 3);
        let other = pk.sample_random(&mut rng);
        let wrong = pk.encrypt_i64(4, &other).unwrap();
        assert_eq!(noisy_class_centers_mode(&wrong, &centers, pk), Err(Error::RandomMismatch));
    }

    #[test]
    fn compact_mode_agrees_with_centers_mode() {
        let keys = keys();
        let pk = &keys.public;
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let spec = HistogramSpec::covering(3, -10, 10, 2).unwrap();
        for nu in 0..=spec.max_shift() {
            let r = pk.sample_random(&mut rng);
            let centers = encrypted_centers(&spec, nu, &r, pk);
            let theta = pk.encrypt_i64(spec.compact_threshold(nu), &r).unwrap();
            for c in spec.band_lo..=spec.band_hi {
                let ec = pk.encrypt_i64(c, &r).unwrap();
                let compact = noisy_class_compact_mode(&ec, &theta, &spec, pk).unwrap();
                assert_eq!(compact, noisy_class_centers_mode(&ec, &centers, pk).unwrap());
                assert!(compact < spec.noisy_classes);
            }
        }
        let r = pk.sample_random(&mut rng);
        let theta = pk.encrypt_i64(spec.compact_threshold(0), &r).unwrap();
        let at_min = pk.encrypt_i64(spec.c_min, &r).unwrap();
        assert_eq!(noisy_class_compact_mode(&at_min, &theta, &spec, pk).unwrap(), 0);
        let below = pk.encrypt_i64(spec.c_min - 1, &r).unwrap();
        assert!(matches!(
            noisy_class_compact_mode(&below, &theta, &spec, pk),
            Err(Error::MalformedPackage(_))
        ));
    }

    #[test]
    fn noisy_histogram_counts() {
        let h = build_noisy_histogram(&[2, 2, 2, 2], 5).unwrap();
        assert_eq!(h.counts, vec![0, 0, 4, 0, 0]);
        let h = build_noisy_histogram(&[0, 4, 1, 1, 3], 5).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), 5);
        assert_eq!(h.selectors, vec![0, 4, 1, 1, 3]);
        assert!(build_noisy_histogram(&[5], 5).is_err());
    }

    #[test]
    fn cardinality_and_reference_sum() {
        let keys = keys();
        let pk = &keys.public;
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let spec = HistogramSpec::new(4, 2, 4, 0, 0, 7).unwrap();
        let coeffs = [0i64, 1, 5, 6, 7, 2, 3, 4, 0, 0, 0, 0, 1, 1, 1, 1];
        let nus: Vec<usize> = coeffs.iter().map(|_| rng.gen_range(0..=spec.max_shift())).collect();
        let selectors: Vec<usize> = coeffs
            .iter()
            .zip(&nus)
            .map(|(&c, &nu)| spec.class_of(c).unwrap() + nu)
            .collect();
        let clear = clear_histogram(&coeffs, &spec).unwrap();
        for (k, &expected) in clear.iter().enumerate() {
            let p_k = 3u64;
            let mut maps = Vec::new();
            let mut refs = Vec::new();
            for &nu in &nus {
                let (m, rs) = mapping_vector(k, nu, &spec, pk, &mut rng).unwrap();
                assert_eq!(
                    m.iter()
                        .filter(|c| keys.private.decrypt(c).unwrap() == 1.into())
                        .count(),
                    1
                );
                refs.push(reference_vector(p_k, &rs, pk).unwrap());
                maps.push(m);
            }
            let map_refs: Vec<&[Ciphertext]> = maps.iter().map(Vec::as_slice).collect();
            let ref_refs: Vec<&[Ciphertext]> = refs.iter().map(Vec::as_slice).collect();
            let card = secure_cardinality(&selectors, &map_refs, 4, pk).unwrap();
            let sum = reference_sum(&selectors, &ref_refs, 4, pk).unwrap();
            assert_eq!(keys.private.decrypt(&card).unwrap(), (expected as i64).into());
            assert_eq!(keys.private.decrypt(&sum).unwrap(), (16 * p_k as i64).into());
            let d = encrypted_diff(&sum, &card, pk).unwrap();
            assert_eq!(d, (16 * p_k as i64 - clear[k] as i64).into());
        }
        // Empty band: neutral element, decrypts to zero.
        let empty = secure_cardinality(&[], &[], 4, pk).unwrap();
        assert_eq!(keys.private.decrypt(&empty).unwrap(), 0.into());
    }

    #[test]
    fn malformed_vectors() {
        let keys = keys();
        let pk = &keys.public;
        let v = vec![pk.neutral(); 3];
        assert!(matches!(
            secure_cardinality(&[0], &[&v], 4, pk),
            Err(Error::MalformedPackage(_))
        ));
        assert!(matches!(
            secure_cardinality(&[0, 1], &[&v], 3, pk),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn reference_values_deterministic_and_bounded() {
        let seed = [7u8; 32];
        let a = reference_values(&seed, band(), 8, 15);
        assert_eq!(a, reference_values(&seed, band(), 8, 15));
        assert!(a.iter().all(|&p| (1..=15).contains(&p)));
        assert_ne!(a, reference_values(&[8u8; 32], band(), 8, 15));
    }
}
