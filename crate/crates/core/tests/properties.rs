use std::sync::OnceLock;

use num_bigint::BigUint;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use socbir_core::compare::{cross_key_diff, encrypted_diff};
use socbir_core::hexint;
use socbir_core::histogram::{build_noisy_histogram, clear_histogram, HistogramMode, HistogramSpec};
use socbir_core::package::{build_package, deserialize_package, serialize_package};
use socbir_core::signature::{clear_signature, encrypted_l1, l1_clear, ClassLayout, EncryptedSignature, SignatureConfig};
use socbir_core::wavelet::{dwt2_clear, dwt2_encrypted, idwt2_clear, random_recursion, Grid, IntegerFilterPair};
use socbir_core::{keygen, Keypair, SignedPlain};

fn keys() -> &'static Keypair {
    static KEYS: OnceLock<Keypair> = OnceLock::new();
    KEYS.get_or_init(|| keygen(40, &mut ChaCha20Rng::seed_from_u64(100)).unwrap())
}

fn other_keys() -> &'static Keypair {
    static KEYS: OnceLock<Keypair> = OnceLock::new();
    KEYS.get_or_init(|| keygen(40, &mut ChaCha20Rng::seed_from_u64(101)).unwrap())
}

fn image(size: usize) -> impl Strategy<Value = Grid<i64>> {
    proptest::collection::vec(0i64..=255, size * size).prop_map(move |v| Grid::new(size, size, v).unwrap())
}

fn filters() -> impl Strategy<Value = IntegerFilterPair> {
    prop_oneof![
        Just(IntegerFilterPair::haar(4).unwrap()),
        Just(IntegerFilterPair::haar_unnormalized(4).unwrap()),
    ]
}

/// Server-side signature computed inline: transform, nearest center by full
/// scan, then per-class selections.
fn server_signature(pkg: &socbir_core::UploadPackage, cfg: &SignatureConfig) -> EncryptedSignature {
    use socbir_core::histogram::{noisy_class_centers_mode, reference_sum, secure_cardinality, EncryptedHistogram};
    let pk = pkg.public_key();
    let dec = dwt2_encrypted(&pkg.pixel_grid().unwrap(), &cfg.filters, cfg.levels, pk).unwrap();
    let histograms = pkg
        .bands
        .iter()
        .zip(cfg.band_specs().unwrap())
        .map(|(band, (id, spec))| {
            let coeffs = dec.band(id).unwrap().grid.values();
            let sel: Vec<usize> = coeffs
                .iter()
                .zip(&band.centers)
                .map(|(c, centers)| noisy_class_centers_mode(c, centers, pk).unwrap())
                .collect();
            fn pick(v: &[Vec<Vec<socbir_core::Ciphertext>>], k: usize) -> Vec<&[socbir_core::Ciphertext]> {
                v.iter().map(|x| x[k].as_slice()).collect()
            }
            EncryptedHistogram {
                band: id,
                cardinalities: (0..spec.classes)
                    .map(|k| secure_cardinality(&sel, &pick(&band.mapping, k), spec.noisy_classes, pk).unwrap())
                    .collect(),
                reference_sums: (0..spec.classes)
                    .map(|k| reference_sum(&sel, &pick(&band.reference, k), spec.noisy_classes, pk).unwrap())
                    .collect(),
                size: coeffs.len(),
                key_id: pk.id(),
            }
        })
        .collect();
    EncryptedSignature {
        width: pkg.header.width,
        height: pkg.header.height,
        fingerprint: cfg.fingerprint(),
        public_key: pk.clone(),
        histograms,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hex_roundtrip(bytes in proptest::collection::vec(any::<u8>(), 0..40)) {
        let v = BigUint::from_bytes_be(&bytes);
        let text = hexint::encode(&v);
        prop_assert_eq!(hexint::decode(&text).unwrap(), v);
    }

    #[test]
    fn decrypt_inverts_encrypt(m in -1_000_000_000i64..1_000_000_000, seed in any::<u64>()) {
        let k = keys();
        let r = k.public.sample_random(&mut ChaCha20Rng::seed_from_u64(seed));
        let c = k.public.encrypt_i64(m, &r).unwrap();
        prop_assert_eq!(k.private.decrypt(&c).unwrap(), SignedPlain::from(m));
    }

    #[test]
    fn homomorphic_add_and_scale(a in -1_000_000i64..1_000_000, b in -1_000_000i64..1_000_000, s in -1000i64..1000, seed in any::<u64>()) {
        let k = keys();
        let pk = &k.public;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let ca = pk.encrypt_i64(a, &pk.sample_random(&mut rng)).unwrap();
        let cb = pk.encrypt_i64(b, &pk.sample_random(&mut rng)).unwrap();
        prop_assert_eq!(k.private.decrypt(&pk.add(&ca, &cb).unwrap()).unwrap(), SignedPlain::from(a + b));
        prop_assert_eq!(k.private.decrypt(&pk.scale(&ca, s).unwrap()).unwrap(), SignedPlain::from(a * s));
    }

    #[test]
    fn matched_random_difference(t in -1_000_000i64..1_000_000, m in -1_000_000i64..1_000_000, seed in any::<u64>()) {
        let pk = &keys().public;
        let r = pk.sample_random(&mut ChaCha20Rng::seed_from_u64(seed));
        let d = encrypted_diff(&pk.encrypt_i64(t, &r).unwrap(), &pk.encrypt_i64(m, &r).unwrap(), pk).unwrap();
        prop_assert_eq!(d, SignedPlain::from(t - m));
    }

    #[test]
    fn cross_key_difference(p in 1i64..1000, m1 in 0i64..1000, m2 in 0i64..1000, seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let diff = |k: &Keypair, m: i64, rng: &mut ChaCha20Rng| {
            let r = k.public.sample_random(rng);
            encrypted_diff(&k.public.encrypt_i64(p, &r).unwrap(), &k.public.encrypt_i64(m, &r).unwrap(), &k.public).unwrap()
        };
        let (d1, d2) = (diff(keys(), m1, &mut rng), diff(other_keys(), m2, &mut rng));
        prop_assert_eq!(cross_key_diff(&d1, &d2), SignedPlain::from(m1 - m2));
    }

    #[test]
    fn argmin_equals_floor_class(delta in 1i64..12, classes in 1usize..6, c_min in -40i64..10, c in -60i64..60) {
        let spec = HistogramSpec::new(delta, classes, 2 * classes, c_min, -60, 60).unwrap();
        let best = (0..classes)
            .map(|k| ((spec.center_doubled(k as i64) - 2 * c).abs(), k))
            .min_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
            .unwrap()
            .1;
        prop_assert_eq!(spec.class_of(c).unwrap(), best);
    }

    #[test]
    fn histograms_count_every_coefficient(values in proptest::collection::vec(-60i64..=60, 0..80), delta in 1i64..9) {
        let spec = HistogramSpec::centered(delta, 4, 8, -60, 60).unwrap();
        let h = clear_histogram(&values, &spec).unwrap();
        prop_assert_eq!(h.iter().sum::<u64>(), values.len() as u64);
        let noisy: Vec<usize> = values.iter().map(|&v| spec.class_of(v).unwrap() + 2).collect();
        prop_assert_eq!(build_noisy_histogram(&noisy, 8).unwrap().counts.iter().sum::<u64>(), values.len() as u64);
    }

    #[test]
    fn l1_is_a_metric(a in proptest::collection::vec(0u64..50, 6), b in proptest::collection::vec(0u64..50, 6), c in proptest::collection::vec(0u64..50, 6)) {
        let brute: u64 = a.iter().zip(&b).map(|(x, y)| x.abs_diff(*y)).sum();
        prop_assert_eq!(l1_clear(&a, &b).unwrap(), brute);
        prop_assert_eq!(l1_clear(&a, &b).unwrap(), l1_clear(&b, &a).unwrap());
        prop_assert_eq!(l1_clear(&a, &a).unwrap(), 0);
        prop_assert!(l1_clear(&a, &c).unwrap() <= l1_clear(&a, &b).unwrap() + l1_clear(&b, &c).unwrap());
    }

    #[test]
    fn clear_transform_inverts(img in image(8), f in filters(), levels in 0u32..=3) {
        let d = dwt2_clear(&img, &f, levels).unwrap();
        prop_assert_eq!(idwt2_clear(&d, &f).unwrap(), img);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn encrypted_transform_commutes(img in image(8), f in filters(), levels in 1u32..=2, seed in any::<u64>()) {
        let k = keys();
        let pk = &k.public;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let randoms = Grid::from_fn(8, 8, |_, _| pk.sample_random(&mut rng));
        let enc = Grid::new(8, 8, img.values().iter().zip(randoms.values()).map(|(&p, r)| pk.encrypt_i64(p, r).unwrap()).collect()).unwrap();
        let server = dwt2_encrypted(&enc, &f, levels, pk).unwrap();
        let clear = dwt2_clear(&img, &f, levels).unwrap();
        let recursed = random_recursion(&randoms, &f, levels, pk).unwrap();
        for ((s, c), r) in server.bands().iter().zip(clear.bands()).zip(recursed.bands()) {
            for ((sc, &cc), rr) in s.grid.values().iter().zip(c.grid.values()).zip(r.grid.values()) {
                prop_assert_eq!(k.private.decrypt(sc).unwrap(), SignedPlain::from(cc));
                prop_assert_eq!(&pk.encrypt_i64(cc, rr).unwrap(), sc);
            }
        }
    }

    #[test]
    fn package_roundtrip_and_census(img in image(4), classes in 1usize..3, extra in 0usize..3, seed in any::<u64>()) {
        let cfg = SignatureConfig::new(
            IntegerFilterPair::haar_unnormalized(4).unwrap(),
            1,
            32,
            ClassLayout::Fixed { classes, noisy_classes: 2 * classes + extra },
        );
        let (pkg, _) = build_package("p", &img, keys(), &cfg, HistogramMode::Centers, &[1; 32], &mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(pkg.ciphertext_count(), pkg.payload_count + 16);
        prop_assert_eq!(pkg.payload_count as usize, 16 * (2 * classes + extra) * (2 * classes + 1));
        prop_assert_eq!(deserialize_package(&serialize_package(&pkg)).unwrap(), pkg);
    }

    #[test]
    fn encrypted_l1_matches_clear_and_is_a_metric(a in image(8), b in image(8), c in image(8), seed in any::<u64>()) {
        let cfg = SignatureConfig::new(
            IntegerFilterPair::haar_unnormalized(4).unwrap(),
            1,
            64,
            ClassLayout::Fixed { classes: 3, noisy_classes: 6 },
        );
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let owners = [keys(), other_keys(), keys()];
        let sigs: Vec<EncryptedSignature> = [&a, &b, &c]
            .iter()
            .zip(owners)
            .map(|(img, k)| {
                let (pkg, _) = build_package("x", img, k, &cfg, HistogramMode::Centers, &[4; 32], &mut rng).unwrap();
                server_signature(&pkg, &cfg)
            })
            .collect();
        let clear: Vec<_> = [&a, &b, &c].iter().map(|img| clear_signature(img, &cfg).unwrap()).collect();
        let d = |i: usize, j: usize| encrypted_l1(&sigs[i], &sigs[j]).unwrap();
        let clear_l1 = |i: usize, j: usize| -> u64 {
            clear[i].histograms.iter().zip(&clear[j].histograms).map(|((_, x), (_, y))| l1_clear(x, y).unwrap()).sum()
        };
        prop_assert_eq!(d(0, 1), clear_l1(0, 1));
        prop_assert_eq!(d(0, 1), d(1, 0));
        prop_assert_eq!(d(0, 0), 0);
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2));
    }
}
