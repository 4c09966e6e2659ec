//! Image signatures (one histogram per wavelet sub-band) in the clear and
//! in encrypted form, and L1 ranking between them.
//!
//! Encrypted signatures of different users are compared without any
//! private key: per class, each side yields `p_k·N - H(k)` against the
//! shared reference, and the difference of the two is `H₁(k) - H₂(k)`.
//! The server therefore sees per-class cardinality differences in clear.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::compare::{cross_key_diff, encrypted_diff};
use crate::error::{Error, Result};
use crate::format::{cts_from_hex, cts_to_hex, frame, unframe};
use crate::histogram::{clear_histogram, EncryptedHistogram, HistogramMode, HistogramSpec};
use crate::paillier::{KeyId, PrivateKey, PublicKey, SignedPlain};
use crate::wavelet::{dwt2_clear, dynamic_bounds, signature_bands, BandId, Grid, IntegerFilterPair};

/// How the class window of each band is laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClassLayout {
    /// `K` classes centred on each band's range; out-of-window
    /// coefficients land in the edge classes.
    Fixed { classes: usize, noisy_classes: usize },
    /// Enough classes to cover each band's full range, `K' = factor·K`.
    Covering { noisy_factor: usize },
}

/// Public parameters every participant agrees on. Its fingerprint tags
/// packages and signatures so mismatched ones are never compared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignatureConfig {
    pub filters: IntegerFilterPair,
    pub levels: u32,
    pub delta: i64,
    pub layout: ClassLayout,
    /// Public label of the shared reference seed; the seed itself stays
    /// with the users.
    pub reference_id: String,
    /// Reference values are drawn from `[1, reference_max]`.
    pub reference_max: u64,
    pub pixel_max: i64,
}

impl SignatureConfig {
    pub fn new(filters: IntegerFilterPair, levels: u32, delta: i64, layout: ClassLayout) -> Self {
        SignatureConfig {
            filters,
            levels,
            delta,
            layout,
            reference_id: "default".into(),
            reference_max: 15,
            pixel_max: 255,
        }
    }

    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(canonical)[..16])
    }

    pub fn check_geometry(&self, width: usize, height: usize) -> Result<()> {
        let step = 1usize << self.levels;
        if width == 0 || height == 0 || !width.is_multiple_of(step) || !height.is_multiple_of(step) {
            return Err(Error::Geometry(format!(
                "{width}x{height} image cannot be decomposed over {} levels",
                self.levels
            )));
        }
        Ok(())
    }

    /// Histogram parameters of every signature band, in canonical order.
    pub fn band_specs(&self) -> Result<Vec<(BandId, HistogramSpec)>> {
        let bounds = dynamic_bounds(&self.filters, self.levels, 0, self.pixel_max);
        signature_bands(self.levels)
            .into_iter()
            .map(|id| {
                let (lo, hi) = bounds.of(id).expect("bounds cover every band");
                let spec = match self.layout {
                    ClassLayout::Fixed { classes, noisy_classes } => {
                        HistogramSpec::centered(self.delta, classes, noisy_classes, lo, hi)?
                    }
                    ClassLayout::Covering { noisy_factor } => HistogramSpec::covering(self.delta, lo, hi, noisy_factor)?,
                };
                Ok((id, spec))
            })
            .collect()
    }

    /// Checks that every plaintext the pipeline can produce fits the key.
    pub fn validate_key(&self, pk: &PublicKey, mode: HistogramMode, width: usize, height: usize) -> Result<()> {
        self.check_geometry(width, height)?;
        let half = pk.max_plain_i64();
        let bounds = dynamic_bounds(&self.filters, self.levels, 0, self.pixel_max);
        if bounds.max_abs > half {
            return Err(Error::overflow(format!("wavelet dynamic {}", bounds.max_abs), half));
        }
        for (id, spec) in self.band_specs()? {
            if mode == HistogramMode::Compact && !spec.covers_band() {
                return Err(Error::InvalidParameter(format!(
                    "compact mode needs class windows covering band {id}"
                )));
            }
            let need = spec.plain_bound(mode);
            if need > half {
                return Err(Error::overflow(format!("class centers of band {id} ({need})"), half));
            }
            let size = band_size(id, self.levels, width, height) as i64;
            let refs = (self.reference_max as i64).saturating_mul(size);
            if refs > half {
                return Err(Error::overflow(format!("reference sum of band {id} ({refs})"), half));
            }
        }
        Ok(())
    }
}

/// Coefficient count of a band of a `width`×`height` image.
pub fn band_size(id: BandId, _levels: u32, width: usize, height: usize) -> usize {
    (width >> id.level) * (height >> id.level)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClearSignature {
    pub width: usize,
    pub height: usize,
    pub fingerprint: String,
    pub histograms: Vec<(BandId, Vec<u64>)>,
}

/// Reference pipeline: clear DWT with the same integer filters, then
/// per-band histograms.
pub fn clear_signature(image: &Grid<i64>, config: &SignatureConfig) -> Result<ClearSignature> {
    config.check_geometry(image.width(), image.height())?;
    let decomposition = dwt2_clear(image, &config.filters, config.levels)?;
    let histograms = config
        .band_specs()?
        .into_iter()
        .map(|(id, spec)| {
            let band = decomposition.band(id).expect("decomposition has every band");
            Ok((id, clear_histogram(band.grid.values(), &spec)?))
        })
        .collect::<Result<_>>()?;
    Ok(ClearSignature {
        width: image.width(),
        height: image.height(),
        fingerprint: config.fingerprint(),
        histograms,
    })
}

pub fn l1_clear(h1: &[u64], h2: &[u64]) -> Result<u64> {
    if h1.len() != h2.len() {
        return Err(Error::LengthMismatch {
            left: h1.len(),
            right: h2.len(),
        });
    }
    Ok(h1.iter().zip(h2).map(|(a, b)| a.abs_diff(*b)).sum())
}

pub fn clear_distance(a: &ClearSignature, b: &ClearSignature) -> Result<u64> {
    if a.fingerprint != b.fingerprint {
        return Err(Error::FingerprintMismatch {
            expected: a.fingerprint.clone(),
            found: b.fingerprint.clone(),
        });
    }
    if a.histograms.len() != b.histograms.len() {
        return Err(Error::LengthMismatch {
            left: a.histograms.len(),
            right: b.histograms.len(),
        });
    }
    a.histograms
        .iter()
        .zip(&b.histograms)
        .map(|((_, h1), (_, h2))| l1_clear(h1, h2))
        .sum()
}

/// Encrypted histograms of every signature band of one image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptedSignature {
    pub width: usize,
    pub height: usize,
    pub fingerprint: String,
    pub public_key: PublicKey,
    pub histograms: Vec<EncryptedHistogram>,
}

impl EncryptedSignature {
    pub fn key_id(&self) -> KeyId {
        self.public_key.id()
    }

    /// Owner-side view of the signature.
    pub fn decrypt(&self, sk: &PrivateKey) -> Result<ClearSignature> {
        let histograms = self
            .histograms
            .iter()
            .map(|h| {
                let counts = h
                    .cardinalities
                    .iter()
                    .map(|c| {
                        sk.decrypt(c)?
                            .to_i64()
                            .and_then(|v| u64::try_from(v).ok())
                            .ok_or_else(|| Error::MalformedPackage("negative cardinality".into()))
                    })
                    .collect::<Result<Vec<u64>>>()?;
                Ok((h.band, counts))
            })
            .collect::<Result<_>>()?;
        Ok(ClearSignature {
            width: self.width,
            height: self.height,
            fingerprint: self.fingerprint.clone(),
            histograms,
        })
    }
}

fn check_comparable(a: &EncryptedSignature, b: &EncryptedSignature) -> Result<()> {
    if a.fingerprint != b.fingerprint {
        return Err(Error::FingerprintMismatch {
            expected: a.fingerprint.clone(),
            found: b.fingerprint.clone(),
        });
    }
    if (a.width, a.height) != (b.width, b.height) {
        return Err(Error::Geometry(format!(
            "signatures of {}x{} and {}x{} images are not comparable",
            a.width, a.height, b.width, b.height
        )));
    }
    if a.histograms.len() != b.histograms.len() {
        return Err(Error::LengthMismatch {
            left: a.histograms.len(),
            right: b.histograms.len(),
        });
    }
    Ok(())
}

fn class_diff_unchecked(a: &EncryptedSignature, b: &EncryptedSignature, band: usize, class: usize) -> Result<SignedPlain> {
    let (ha, hb) = (&a.histograms[band], &b.histograms[band]);
    if ha.band != hb.band {
        return Err(Error::IncompleteBands(format!("band {} vs {}", ha.band, hb.band)));
    }
    let (ca, ra) = (
        ha.cardinalities.get(class),
        ha.reference_sums.get(class),
    );
    let (cb, rb) = (
        hb.cardinalities.get(class),
        hb.reference_sums.get(class),
    );
    let (Some(ca), Some(ra), Some(cb), Some(rb)) = (ca, ra, cb, rb) else {
        return Err(Error::LengthMismatch {
            left: ha.cardinalities.len().min(ha.reference_sums.len()),
            right: hb.cardinalities.len().min(hb.reference_sums.len()),
        });
    };
    let d1 = encrypted_diff(ra, ca, &a.public_key)?;
    let d2 = encrypted_diff(rb, cb, &b.public_key)?;
    Ok(cross_key_diff(&d1, &d2))
}

/// `H₁(k) - H₂(k)` for one band and class, from two signatures that may be
/// under different keys.
pub fn encrypted_class_diff(
    a: &EncryptedSignature,
    b: &EncryptedSignature,
    band: usize,
    class: usize,
) -> Result<SignedPlain> {
    check_comparable(a, b)?;
    if band >= a.histograms.len() {
        return Err(Error::InvalidParameter(format!("band index {band} out of range")));
    }
    class_diff_unchecked(a, b, band, class)
}

/// Sum over bands and classes of `|H₁(k) - H₂(k)|`.
pub fn encrypted_l1(a: &EncryptedSignature, b: &EncryptedSignature) -> Result<u64> {
    check_comparable(a, b)?;
    let mut total = 0u64;
    for (band, h) in a.histograms.iter().enumerate() {
        if h.cardinalities.len() != b.histograms[band].cardinalities.len() {
            return Err(Error::LengthMismatch {
                left: h.cardinalities.len(),
                right: b.histograms[band].cardinalities.len(),
            });
        }
        for class in 0..h.cardinalities.len() {
            let d = class_diff_unchecked(a, b, band, class)?;
            total += d
                .0
                .magnitude()
                .try_into()
                .map_err(|_| Error::MalformedPackage("cardinality difference too large".into()))
                .map(|v: u64| v)?;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedResult {
    pub id: String,
    pub distance: u64,
    pub rank: usize,
}

fn order(a: &(String, u64), b: &(String, u64)) -> Ordering {
    a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0))
}

/// Ascending distance, ties broken by id; at most `k` results.
pub fn rank_by_distance(mut scored: Vec<(String, u64)>, k: usize) -> Vec<RankedResult> {
    scored.sort_by(order);
    scored
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (id, distance))| RankedResult {
            id,
            distance,
            rank: i + 1,
        })
        .collect()
}

pub fn rank_top_k<'a>(
    query: &EncryptedSignature,
    database: impl IntoIterator<Item = (&'a str, &'a EncryptedSignature)>,
    k: usize,
) -> Result<Vec<RankedResult>> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let scored = database
        .into_iter()
        .map(|(id, sig)| Ok((id.to_owned(), encrypted_l1(query, sig)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(rank_by_distance(scored, k))
}

pub fn rank_top_k_clear<'a>(
    query: &ClearSignature,
    database: impl IntoIterator<Item = (&'a str, &'a ClearSignature)>,
    k: usize,
) -> Result<Vec<RankedResult>> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let scored = database
        .into_iter()
        .map(|(id, sig)| Ok((id.to_owned(), clear_distance(query, sig)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(rank_by_distance(scored, k))
}

pub const SIGNATURE_MAGIC: &str = "SOCBIR-SIGNATURE";
pub const SIGNATURE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HistogramDoc {
    band: BandId,
    size: usize,
    cardinalities: Vec<String>,
    reference_sums: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SignatureDoc {
    width: usize,
    height: usize,
    fingerprint: String,
    key_id: KeyId,
    public_key: PublicKey,
    histograms: Vec<HistogramDoc>,
}

pub fn serialize_signature(sig: &EncryptedSignature) -> String {
    let doc = SignatureDoc {
        width: sig.width,
        height: sig.height,
        fingerprint: sig.fingerprint.clone(),
        key_id: sig.key_id(),
        public_key: sig.public_key.clone(),
        histograms: sig
            .histograms
            .iter()
            .map(|h| HistogramDoc {
                band: h.band,
                size: h.size,
                cardinalities: cts_to_hex(&h.cardinalities),
                reference_sums: cts_to_hex(&h.reference_sums),
            })
            .collect(),
    };
    let body = serde_json::to_string(&doc).expect("signature serializes");
    frame(SIGNATURE_MAGIC, SIGNATURE_VERSION, &body)
}

pub fn deserialize_signature(text: &str) -> Result<EncryptedSignature> {
    let malformed = |m: String| Error::MalformedPackage(m);
    let body = unframe(SIGNATURE_MAGIC, SIGNATURE_VERSION, text, || malformed("empty signature".into()))?;
    let doc: SignatureDoc = serde_json::from_str(body).map_err(|e| malformed(e.to_string()))?;
    if doc.key_id != doc.public_key.id() {
        return Err(malformed("key id does not match the public key".into()));
    }
    let pk = doc.public_key;
    let histograms = doc
        .histograms
        .iter()
        .map(|h| {
            if h.cardinalities.len() != h.reference_sums.len() {
                return Err(malformed(format!("band {} has ragged class arrays", h.band)));
            }
            Ok(EncryptedHistogram {
                band: h.band,
                cardinalities: cts_from_hex(&h.cardinalities, &pk)?,
                reference_sums: cts_from_hex(&h.reference_sums, &pk)?,
                size: h.size,
                key_id: pk.id(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EncryptedSignature {
        width: doc.width,
        height: doc.height,
        fingerprint: doc.fingerprint,
        public_key: pk,
        histograms,
    })
}
