//! Client-side upload package: encrypted pixels plus, for every coefficient
//! of every signature band, the class centers (or threshold), the mapping
//! vectors and the reference vectors the server needs to derive the
//! encrypted signature on its own.

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{cts_from_hex, cts_to_hex, frame, unframe};
use crate::histogram::{mapping_vector, reference_values, reference_vector, HistogramMode, NoiseGrid};
use crate::paillier::{Ciphertext, KeyId, Keypair, PublicKey, SignedPlain, TrackedRandom};
use crate::signature::SignatureConfig;
use crate::wavelet::{dwt2_clear, random_recursion, BandId, Grid};

pub const PACKAGE_MAGIC: &str = "SOCBIR-PACKAGE";
pub const PACKAGE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackageHeader {
    pub image_id: String,
    pub width: usize,
    pub height: usize,
    pub fingerprint: String,
    pub key_id: KeyId,
    pub public_key: PublicKey,
    pub mode: HistogramMode,
}

/// Ancillary ciphertexts of one band, indexed by coefficient in row-major
/// order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandAncillary {
    pub band: BandId,
    /// `K'` doubled centers in centers mode, one threshold in compact mode.
    pub centers: Vec<Vec<Ciphertext>>,
    /// `mapping[coefficient][k]` has `K'` components.
    pub mapping: Vec<Vec<Vec<Ciphertext>>>,
    /// Same shape as `mapping`, with matching randoms.
    pub reference: Vec<Vec<Vec<Ciphertext>>>,
}

impl BandAncillary {
    pub fn ciphertext_count(&self) -> u64 {
        let nested = |v: &Vec<Vec<Vec<Ciphertext>>>| -> usize { v.iter().flatten().map(Vec::len).sum() };
        (self.centers.iter().map(Vec::len).sum::<usize>() + nested(&self.mapping) + nested(&self.reference)) as u64
    }

    pub fn coefficients(&self) -> usize {
        self.centers.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UploadPackage {
    pub header: PackageHeader,
    pub pixels: Vec<Ciphertext>,
    pub bands: Vec<BandAncillary>,
    /// Declared ancillary ciphertext count (pixels excluded).
    pub payload_count: u64,
}

impl UploadPackage {
    pub fn public_key(&self) -> &PublicKey {
        &self.header.public_key
    }

    pub fn pixel_grid(&self) -> Result<Grid<Ciphertext>> {
        Grid::new(self.header.width, self.header.height, self.pixels.clone())
    }

    pub fn ancillary_count(&self) -> u64 {
        self.bands.iter().map(BandAncillary::ciphertext_count).sum()
    }

    /// Every ciphertext in the package, pixels included.
    pub fn ciphertext_count(&self) -> u64 {
        self.pixels.len() as u64 + self.ancillary_count()
    }
}

/// What the client keeps. Never part of an [`UploadPackage`].
#[derive(Debug, Clone)]
pub struct ClientSecrets {
    pub keypair: Keypair,
    pub pixel_randoms: Grid<TrackedRandom>,
    pub noise: Vec<NoiseGrid>,
    pub reference_seed: [u8; 32],
}

fn dyadic_sizes(m: usize, n: usize, levels: u32) -> Result<u64> {
    let step = 1usize << levels;
    if m == 0 || n == 0 || !m.is_multiple_of(step) || !n.is_multiple_of(step) {
        return Err(Error::Geometry(format!("{m}x{n} is not divisible by 2^{levels}")));
    }
    let (m, n) = (m as u64, n as u64);
    let details: u64 = (1..=levels).map(|i| 3 * (m >> i) * (n >> i)).sum();
    Ok(details + (m >> levels) * (n >> levels))
}

/// Ancillary ciphertext count for an `m`×`n` image.
///
/// Centers mode: `m·n·K' + 2·K'·K·S` with `S = 3·Σ mn/4^i + mn/4^d`, which
/// equals `m·n·K'·(2K+1)` since `S = m·n`. Compact mode: `S·(1 + 2·K·K')`.
pub fn payload_count(m: usize, n: usize, classes: usize, noisy_classes: usize, levels: u32, mode: HistogramMode) -> Result<u64> {
    if classes < 1 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    if noisy_classes < 1 {
        return Err(Error::InvalidParameter("K' must be at least 1".into()));
    }
    let s = dyadic_sizes(m, n, levels)?;
    let (k, kp, mn) = (classes as u64, noisy_classes as u64, (m * n) as u64);
    match mode {
        HistogramMode::Centers => {
            let bracket = mn * kp + 2 * kp * k * s;
            let product = mn * kp * (2 * k + 1);
            assert_eq!(bracket, product, "bracket and product forms disagree");
            Ok(bracket)
        }
        HistogramMode::Compact => Ok(s * (1 + 2 * k * kp)),
    }
}

/// Builds the package for `image` and returns it with the secrets the
/// client must keep.
pub fn build_package<R: RngCore + CryptoRng + ?Sized>(
    image_id: &str,
    image: &Grid<i64>,
    keys: &Keypair,
    config: &SignatureConfig,
    mode: HistogramMode,
    reference_seed: &[u8; 32],
    rng: &mut R,
) -> Result<(UploadPackage, ClientSecrets)> {
    let pk = &keys.public;
    let (w, h) = (image.width(), image.height());
    if let Some(&bad) = image.values().iter().find(|&&p| p < 0 || p > config.pixel_max) {
        return Err(Error::InvalidParameter(format!(
            "pixel {bad} outside [0, {}]",
            config.pixel_max
        )));
    }
    config.validate_key(pk, mode, w, h)?;

    let pixel_randoms = Grid::from_fn(w, h, |_, _| pk.sample_random(rng));
    let pixels = image
        .values()
        .iter()
        .zip(pixel_randoms.values())
        .map(|(&p, r)| pk.encrypt_i64(p, r))
        .collect::<Result<Vec<_>>>()?;

    let clear = dwt2_clear(image, &config.filters, config.levels)?;
    let randoms = random_recursion(&pixel_randoms, &config.filters, config.levels, pk)?;

    let mut bands = Vec::new();
    let mut noise = Vec::new();
    for (id, spec) in config.band_specs()? {
        let coeffs = clear.band(id).expect("complete decomposition").grid.values();
        let rands = randoms.band(id).expect("complete decomposition").grid.values();
        let shifts = NoiseGrid::sample(id, coeffs.len(), &spec, rng);
        let p = reference_values(reference_seed, id, spec.classes, config.reference_max);

        let mut centers = Vec::with_capacity(coeffs.len());
        let mut mapping = Vec::with_capacity(coeffs.len());
        let mut reference = Vec::with_capacity(coeffs.len());
        for ((&c, r), &nu) in coeffs.iter().zip(rands).zip(&shifts.shifts) {
            spec.check_dynamic(c)?;
            centers.push(match mode {
                HistogramMode::Centers => {
                    let mask = pk.mask(&pk.random_pow(r, 2)?)?;
                    (0..spec.noisy_classes)
                        .map(|l| pk.encrypt_masked(&SignedPlain::from(spec.noisy_center_doubled(l, nu)), &mask))
                        .collect::<Result<Vec<_>>>()?
                }
                HistogramMode::Compact => vec![pk.encrypt_i64(spec.compact_threshold(nu), r)?],
            });
            let mut maps = Vec::with_capacity(spec.classes);
            let mut refs = Vec::with_capacity(spec.classes);
            for (k, &p_k) in p.iter().enumerate() {
                let (m, masks) = mapping_vector(k, nu, &spec, pk, rng)?;
                refs.push(reference_vector(p_k, &masks, pk)?);
                maps.push(m);
            }
            mapping.push(maps);
            reference.push(refs);
        }
        bands.push(BandAncillary {
            band: id,
            centers,
            mapping,
            reference,
        });
        noise.push(shifts);
    }

    let mut package = UploadPackage {
        header: PackageHeader {
            image_id: image_id.to_owned(),
            width: w,
            height: h,
            fingerprint: config.fingerprint(),
            key_id: pk.id(),
            public_key: pk.clone(),
            mode,
        },
        pixels,
        bands,
        payload_count: 0,
    };
    package.payload_count = package.ancillary_count();
    let secrets = ClientSecrets {
        keypair: keys.clone(),
        pixel_randoms,
        noise,
        reference_seed: *reference_seed,
    };
    Ok((package, secrets))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BandDoc {
    band: BandId,
    centers: Vec<Vec<String>>,
    mapping: Vec<Vec<Vec<String>>>,
    reference: Vec<Vec<Vec<String>>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PackageDoc {
    header: PackageHeader,
    payload_count: u64,
    pixels: Vec<String>,
    bands: Vec<BandDoc>,
}

fn nested_to_hex(v: &[Vec<Ciphertext>]) -> Vec<Vec<String>> {
    v.iter().map(|x| cts_to_hex(x)).collect()
}

fn nested_from_hex(v: &[Vec<String>], pk: &PublicKey) -> Result<Vec<Vec<Ciphertext>>> {
    v.iter().map(|x| cts_from_hex(x, pk)).collect()
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedPackage(msg.into())
}

/// Checks shapes that must hold for any package, independent of the
/// server's configuration.
fn check_structure(pkg: &UploadPackage) -> Result<()> {
    let h = &pkg.header;
    if h.key_id != h.public_key.id() {
        return Err(malformed("key id does not match the public key"));
    }
    if h.width == 0 || h.height == 0 || pkg.pixels.len() != h.width * h.height {
        return Err(malformed(format!(
            "{} pixels for a {}x{} image",
            pkg.pixels.len(),
            h.width,
            h.height
        )));
    }
    for b in &pkg.bands {
        let n = b.centers.len();
        if b.mapping.len() != n || b.reference.len() != n {
            return Err(malformed(format!("band {} has ragged coefficient arrays", b.band)));
        }
        for (maps, refs) in b.mapping.iter().zip(&b.reference) {
            if maps.len() != refs.len() || maps.iter().zip(refs).any(|(m, r)| m.len() != r.len()) {
                return Err(malformed(format!("band {} has mismatched mapping/reference shapes", b.band)));
            }
        }
    }
    if pkg.payload_count != pkg.ancillary_count() {
        return Err(malformed(format!(
            "declared payload {} but {} ciphertexts present",
            pkg.payload_count,
            pkg.ancillary_count()
        )));
    }
    Ok(())
}

pub fn serialize_package(pkg: &UploadPackage) -> String {
    let doc = PackageDoc {
        header: pkg.header.clone(),
        payload_count: pkg.payload_count,
        pixels: cts_to_hex(&pkg.pixels),
        bands: pkg
            .bands
            .iter()
            .map(|b| BandDoc {
                band: b.band,
                centers: nested_to_hex(&b.centers),
                mapping: b.mapping.iter().map(|m| nested_to_hex(m)).collect(),
                reference: b.reference.iter().map(|r| nested_to_hex(r)).collect(),
            })
            .collect(),
    };
    let body = serde_json::to_string(&doc).expect("package serializes");
    frame(PACKAGE_MAGIC, PACKAGE_VERSION, &body)
}

pub fn deserialize_package(text: &str) -> Result<UploadPackage> {
    let body = unframe(PACKAGE_MAGIC, PACKAGE_VERSION, text, || malformed("empty package"))?;
    let doc: PackageDoc = serde_json::from_str(body).map_err(|e| malformed(e.to_string()))?;
    let pk = doc.header.public_key.clone();
    let bands = doc
        .bands
        .iter()
        .map(|b| {
            Ok(BandAncillary {
                band: b.band,
                centers: nested_from_hex(&b.centers, &pk)?,
                mapping: b
                    .mapping
                    .iter()
                    .map(|m| nested_from_hex(m, &pk))
                    .collect::<Result<_>>()?,
                reference: b
                    .reference
                    .iter()
                    .map(|r| nested_from_hex(r, &pk))
                    .collect::<Result<_>>()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pkg = UploadPackage {
        pixels: cts_from_hex(&doc.pixels, &pk)?,
        header: doc.header,
        bands,
        payload_count: doc.payload_count,
    };
    check_structure(&pkg)?;
    Ok(pkg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::ClassLayout;
    use crate::wavelet::IntegerFilterPair;
    use num_bigint::BigUint;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn keys() -> Keypair {
        Keypair::from_primes(&BigUint::from(1_000_003u32), &BigUint::from(999_983u32)).unwrap()
    }

    fn config(classes: usize, noisy: usize, levels: u32) -> SignatureConfig {
        SignatureConfig::new(
            IntegerFilterPair::haar_unnormalized(4).unwrap(),
            levels,
            16,
            ClassLayout::Fixed {
                classes,
                noisy_classes: noisy,
            },
        )
    }

    fn image(w: usize, h: usize, seed: u64) -> Grid<i64> {
        use rand::Rng;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        Grid::from_fn(w, h, |_, _| rng.gen_range(0..=255))
    }

    #[test]
    fn payload_examples() {
        assert_eq!(payload_count(8, 8, 2, 8, 1, HistogramMode::Centers).unwrap(), 2560);
        assert_eq!(payload_count(8, 8, 2, 8, 1, HistogramMode::Compact).unwrap(), 2112);
        for d in 1..=3 {
            payload_count(16, 16, 3, 7, d, HistogramMode::Centers).unwrap();
        }
        assert!(payload_count(8, 8, 0, 8, 1, HistogramMode::Centers).is_err());
        assert!(matches!(
            payload_count(6, 8, 2, 8, 2, HistogramMode::Centers),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn census_matches_accounting() {
        let keys = keys();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for mode in [HistogramMode::Centers, HistogramMode::Compact] {
            let cfg = match mode {
                HistogramMode::Centers => config(2, 8, 1),
                HistogramMode::Compact => SignatureConfig {
                    layout: ClassLayout::Fixed {
                        classes: 2,
                        noisy_classes: 8,
                    },
                    delta: 4096,
                    ..config(2, 8, 1)
                },
            };
            let (pkg, secrets) = build_package("a", &image(8, 8, 2), &keys, &cfg, mode, &[1; 32], &mut rng).unwrap();
            assert_eq!(pkg.payload_count, payload_count(8, 8, 2, 8, 1, mode).unwrap());
            assert_eq!(pkg.ciphertext_count(), pkg.payload_count + 64);
            assert_eq!(secrets.noise.len(), 4);
        }
    }

    #[test]
    fn degenerate_single_class() {
        let keys = keys();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let (pkg, _) = build_package(
            "one",
            &image(4, 4, 4),
            &keys,
            &config(1, 2, 1),
            HistogramMode::Centers,
            &[0; 32],
            &mut rng,
        )
        .unwrap();
        assert_eq!(pkg.payload_count, 16 * 2 * 3);
    }

    #[test]
    fn rejects_bad_inputs() {
        let keys = keys();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let cfg = config(2, 4, 1);
        let odd = image(5, 4, 1);
        assert!(matches!(
            build_package("x", &odd, &keys, &cfg, HistogramMode::Centers, &[0; 32], &mut rng),
            Err(Error::Geometry(_))
        ));
        let hot = Grid::from_fn(4, 4, |_, _| 300);
        assert!(build_package("x", &hot, &keys, &cfg, HistogramMode::Centers, &[0; 32], &mut rng).is_err());
        let tiny = Keypair::from_primes(&BigUint::from(11u32), &BigUint::from(13u32)).unwrap();
        assert!(matches!(
            build_package("x", &image(4, 4, 1), &tiny, &cfg, HistogramMode::Centers, &[0; 32], &mut rng),
            Err(Error::PlaintextOverflow { .. })
        ));
    }

    #[test]
    fn serialization_roundtrip_and_corruption() {
        let keys = keys();
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let (pkg, _) = build_package(
            "img-1",
            &image(4, 4, 7),
            &keys,
            &config(2, 4, 1),
            HistogramMode::Centers,
            &[2; 32],
            &mut rng,
        )
        .unwrap();
        let text = serialize_package(&pkg);
        assert_eq!(deserialize_package(&text).unwrap(), pkg);
        assert_eq!(serialize_package(&deserialize_package(&text).unwrap()), text);

        let bytes = text.as_bytes();
        for pos in [0, 10, 20, 40, 80, bytes.len() / 2, bytes.len() - 1] {
            let mut corrupt = bytes.to_vec();
            corrupt[pos] ^= 0x01;
            let corrupt = String::from_utf8_lossy(&corrupt);
            assert!(deserialize_package(&corrupt).is_err(), "flip at {pos} accepted");
        }
        assert!(matches!(deserialize_package(""), Err(Error::MalformedPackage(_))));
        let truncated = &text[..text.len() / 2];
        assert!(matches!(deserialize_package(truncated), Err(Error::Format(_))));
        let version = text.replacen("SOCBIR-PACKAGE 1", "SOCBIR-PACKAGE 9", 1);
        assert!(matches!(deserialize_package(&version), Err(Error::Format(_))));
    }

    #[test]
    fn serialized_form_carries_no_secrets() {
        let keys = keys();
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let (pkg, secrets) = build_package(
            "img",
            &image(4, 4, 9),
            &keys,
            &config(2, 4, 1),
            HistogramMode::Centers,
            &[3; 32],
            &mut rng,
        )
        .unwrap();
        let text = serialize_package(&pkg);
        let body = text.splitn(3, '\n').nth(2).unwrap();
        let doc: serde_json::Value = serde_json::from_str(body).unwrap();
        let mut keys_seen = Vec::new();
        fn walk(v: &serde_json::Value, out: &mut Vec<String>) {
            match v {
                serde_json::Value::Object(map) => {
                    for (k, v) in map {
                        out.push(k.clone());
                        walk(v, out);
                    }
                }
                serde_json::Value::Array(a) => a.iter().for_each(|v| walk(v, out)),
                _ => {}
            }
        }
        walk(&doc, &mut keys_seen);
        for forbidden in ["lambda", "random", "randoms", "noise", "shift", "shifts", "seed", "p_k", "private"] {
            assert!(!keys_seen.iter().any(|k| k == forbidden), "{forbidden} leaked");
        }
        let lambda = crate::hexint::encode(keys.private.lambda());
        assert!(!text.contains(&format!("\"{lambda}\"")));
        let r0 = crate::hexint::encode(secrets.pixel_randoms.values()[0].value());
        assert!(!text.contains(&format!("\"{r0}\"")));
    }
}
