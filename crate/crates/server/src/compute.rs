//! Server-side signature computation. Takes the package and the public
//! configuration only; nothing here can reach a private key, a noise grid
//! or a reference value.

use serde::{Deserialize, Serialize};
use socbir_core::histogram::{
    build_noisy_histogram, noisy_class_compact_mode, noisy_class_centers_mode_bisect, reference_sum, secure_cardinality,
    EncryptedHistogram, HistogramMode, HistogramSpec,
};
use socbir_core::package::{BandAncillary, UploadPackage};
use socbir_core::paillier::{op_counts, Ciphertext, OpCounts, PublicKey};
use socbir_core::signature::{EncryptedSignature, SignatureConfig};
use socbir_core::wavelet::dwt2_encrypted;
use socbir_core::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerOps {
    pub mul: u64,
    pub inv: u64,
    pub pow: u64,
    /// Encrypted comparisons, one `L` evaluation each.
    pub comparisons: u64,
}

impl ServerOps {
    pub fn from_counts(c: OpCounts) -> Self {
        ServerOps {
            mul: c.mul,
            inv: c.inv,
            pow: c.pow,
            comparisons: c.l_eval,
        }
    }

    pub fn total(&self) -> u64 {
        self.mul + self.inv + self.pow + self.comparisons
    }

    pub fn add(&mut self, other: &ServerOps) {
        self.mul += other.mul;
        self.inv += other.inv;
        self.pow += other.pow;
        self.comparisons += other.comparisons;
    }
}

#[derive(Debug, Clone)]
pub struct ComputedSignature {
    pub signature: EncryptedSignature,
    pub ops: ServerOps,
    /// Noisy histograms as the server sees them, in band order.
    pub noisy_counts: Vec<Vec<u64>>,
}

fn malformed(msg: String) -> Error {
    Error::MalformedPackage(msg)
}

fn check_band(band: &BandAncillary, spec: &HistogramSpec, size: usize, mode: HistogramMode) -> Result<()> {
    if band.coefficients() != size {
        return Err(malformed(format!(
            "band {} carries {} coefficients, expected {size}",
            band.band,
            band.coefficients()
        )));
    }
    let centers = match mode {
        HistogramMode::Centers => spec.noisy_classes,
        HistogramMode::Compact => 1,
    };
    if band.centers.iter().any(|c| c.len() != centers) {
        return Err(malformed(format!("band {}: expected {centers} centers per coefficient", band.band)));
    }
    let shape_ok = |v: &Vec<Vec<Vec<Ciphertext>>>| {
        v.iter()
            .all(|per| per.len() == spec.classes && per.iter().all(|x| x.len() == spec.noisy_classes))
    };
    if !shape_ok(&band.mapping) || !shape_ok(&band.reference) {
        return Err(malformed(format!(
            "band {}: vectors must be {}x{} per coefficient",
            band.band, spec.classes, spec.noisy_classes
        )));
    }
    Ok(())
}

fn noisy_index(
    coeff: &Ciphertext,
    centers: &[Ciphertext],
    spec: &HistogramSpec,
    mode: HistogramMode,
    pk: &PublicKey,
) -> Result<usize> {
    match mode {
        HistogramMode::Centers => noisy_class_centers_mode_bisect(coeff, centers, pk),
        HistogramMode::Compact => noisy_class_compact_mode(coeff, &centers[0], spec, pk),
    }
}

/// Encrypted transform, noisy classes, then per-class cardinalities and
/// reference sums for every signature band.
pub fn compute_signature(pkg: &UploadPackage, config: &SignatureConfig) -> Result<ComputedSignature> {
    let before = op_counts();
    let header = &pkg.header;
    let fingerprint = config.fingerprint();
    if header.fingerprint != fingerprint {
        return Err(Error::FingerprintMismatch {
            expected: fingerprint,
            found: header.fingerprint.clone(),
        });
    }
    let pk = &header.public_key;
    config.check_geometry(header.width, header.height)?;
    let specs = config.band_specs()?;
    if pkg.bands.len() != specs.len() || pkg.bands.iter().zip(&specs).any(|(b, (id, _))| b.band != *id) {
        return Err(Error::IncompleteBands(format!(
            "package carries {} bands, configuration expects {}",
            pkg.bands.len(),
            specs.len()
        )));
    }

    let decomposition = dwt2_encrypted(&pkg.pixel_grid()?, &config.filters, config.levels, pk)?;
    let mut histograms = Vec::with_capacity(specs.len());
    let mut noisy_counts = Vec::with_capacity(specs.len());
    for (band, (id, spec)) in pkg.bands.iter().zip(&specs) {
        let coeffs = decomposition.band(*id).expect("complete decomposition").grid.values();
        check_band(band, spec, coeffs.len(), header.mode)?;
        let indices = coeffs
            .iter()
            .zip(&band.centers)
            .map(|(c, centers)| noisy_index(c, centers, spec, header.mode, pk))
            .collect::<Result<Vec<_>>>()?;
        let noisy = build_noisy_histogram(&indices, spec.noisy_classes)?;
        let mut cardinalities = Vec::with_capacity(spec.classes);
        let mut reference_sums = Vec::with_capacity(spec.classes);
        for k in 0..spec.classes {
            let maps: Vec<&[Ciphertext]> = band.mapping.iter().map(|m| m[k].as_slice()).collect();
            let refs: Vec<&[Ciphertext]> = band.reference.iter().map(|r| r[k].as_slice()).collect();
            cardinalities.push(secure_cardinality(&noisy.selectors, &maps, spec.noisy_classes, pk)?);
            reference_sums.push(reference_sum(&noisy.selectors, &refs, spec.noisy_classes, pk)?);
        }
        histograms.push(EncryptedHistogram {
            band: *id,
            cardinalities,
            reference_sums,
            size: coeffs.len(),
            key_id: pk.id(),
        });
        noisy_counts.push(noisy.counts);
    }
    Ok(ComputedSignature {
        signature: EncryptedSignature {
            width: header.width,
            height: header.height,
            fingerprint,
            public_key: pk.clone(),
            histograms,
        },
        ops: ServerOps::from_counts(op_counts().since(&before)),
        noisy_counts,
    })
}
