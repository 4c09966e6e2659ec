//! Reconstruction attack: the server replaces every coefficient by a value
//! representing its histogram class and inverts the transform.
//!
//! In leaky mode the attacker knows each coefficient's clear class, as
//! with plain encrypted-center histograms. In secure mode it only knows
//! the noisy index `l = k + ν` and can do no better than assume the mean
//! shift.

use rand::{Rng, SeedableRng};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use socbir_core::histogram::HistogramSpec;
use socbir_core::wavelet::{
    dwt2_clear, dynamic_bounds, idwt2_real, Band, Decomposition, Grid, IntegerFilterPair, Subband,
};
use socbir_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackMode {
    Leaky,
    Secure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackParams {
    pub delta: i64,
    pub levels: u32,
    /// `K' = noisy_factor·K` for every band.
    pub noisy_factor: usize,
    pub filters: IntegerFilterPair,
    pub seed: u64,
    pub permutations: usize,
}

impl Default for AttackParams {
    fn default() -> Self {
        AttackParams {
            delta: 32,
            levels: 2,
            noisy_factor: 2,
            filters: IntegerFilterPair::haar_unnormalized(4).expect("valid filter"),
            seed: 7,
            permutations: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub correlation_leaky: f64,
    pub correlation_secure: f64,
    /// Mean and standard deviation of the correlation between the original
    /// and pixel permutations of the secure reconstruction.
    pub permutation_mean: f64,
    pub permutation_std: f64,
    /// Fraction of permutations at least as correlated (in magnitude) as
    /// the secure reconstruction.
    pub permutation_p: f64,
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Replaces coefficients by class representatives and inverts. Detail
/// bands use centers relative to the class holding zero, so an image
/// without detail reconstructs flat when classes are known.
pub fn reconstruct(image: &Grid<i64>, mode: AttackMode, params: &AttackParams, rng: &mut impl Rng) -> Result<Grid<f64>> {
    let decomposition = dwt2_clear(image, &params.filters, params.levels)?;
    let bounds = dynamic_bounds(&params.filters, params.levels, 0, 255);
    let mut bands = Vec::new();
    for sub in decomposition.bands() {
        let (lo, hi) = bounds
            .of(sub.id)
            .ok_or_else(|| Error::IncompleteBands(format!("no bounds for {}", sub.id)))?;
        let spec = HistogramSpec::covering(params.delta, lo, hi, params.noisy_factor)?;
        let center = |k: f64| spec.c_min as f64 + k * spec.delta as f64 + spec.delta as f64 / 2.0;
        let origin = if sub.id.band == Band::HH {
            0.0
        } else {
            center(spec.class_of(0)? as f64)
        };
        let mean_shift = spec.max_shift() as f64 / 2.0;
        let values = sub
            .grid
            .values()
            .iter()
            .map(|&c| {
                let k = spec.class_of(c)? as f64;
                Ok(match mode {
                    AttackMode::Leaky => center(k) - origin,
                    AttackMode::Secure => {
                        let l = k + rng.gen_range(0..=spec.max_shift()) as f64;
                        center(l - mean_shift) - origin
                    }
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        bands.push(Subband {
            id: sub.id,
            grid: Grid::new(sub.grid.width(), sub.grid.height(), values)?,
        });
    }
    idwt2_real(&Decomposition::from_bands(params.levels, bands)?, &params.filters)
}

pub fn run_attack(image: &Grid<i64>, params: &AttackParams) -> Result<(AttackReport, Grid<f64>, Grid<f64>)> {
    let mut rng = ChaCha20Rng::seed_from_u64(params.seed);
    let leaky = reconstruct(image, AttackMode::Leaky, params, &mut rng)?;
    let secure = reconstruct(image, AttackMode::Secure, params, &mut rng)?;
    let original: Vec<f64> = image.values().iter().map(|&v| v as f64).collect();
    let correlation_secure = pearson(&original, secure.values());
    let mut shuffled = secure.values().to_vec();
    let mut perms = Vec::with_capacity(params.permutations);
    for _ in 0..params.permutations {
        shuffled.shuffle(&mut rng);
        perms.push(pearson(&original, &shuffled));
    }
    let n = perms.len().max(1) as f64;
    let mean = perms.iter().sum::<f64>() / n;
    let std = (perms.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n).sqrt();
    let extreme = perms.iter().filter(|p| p.abs() >= correlation_secure.abs()).count();
    let report = AttackReport {
        correlation_leaky: pearson(&original, leaky.values()),
        correlation_secure,
        permutation_mean: mean,
        permutation_std: std,
        permutation_p: (extreme + 1) as f64 / (n + 1.0),
    };
    Ok((report, leaky, secure))
}

/// Min-max rescales to 8-bit grey levels; a flat grid maps to mid-grey.
pub fn to_gray(grid: &Grid<f64>) -> Vec<u8> {
    let lo = grid.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    grid.values()
        .iter()
        .map(|&v| {
            if hi - lo < 1e-9 {
                128
            } else {
                ((v - lo) / (hi - lo) * 255.0).round() as u8
            }
        })
        .collect()
}
