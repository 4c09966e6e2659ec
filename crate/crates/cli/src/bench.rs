//! Clear versus encrypted retrieval over the synthetic corpus, for a grid
//! of class widths and decomposition depths.

use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use socbir_core::histogram::HistogramMode;
use socbir_core::package::{build_package, payload_count};
use socbir_core::signature::{
    clear_signature, rank_top_k, rank_top_k_clear, ClassLayout, RankedResult, SignatureConfig,
};
use socbir_core::wavelet::IntegerFilterPair;
use socbir_core::{keygen, Keypair, Result};
use socbir_server::compute_signature;

use crate::corpus::{CorpusParams, LabelledImage, SyntheticCorpus};

pub const DEFAULT_DELTAS: [i64; 7] = [1, 2, 4, 8, 16, 32, 64];
pub const DEFAULT_LEVELS: [u32; 3] = [0, 1, 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchParams {
    pub corpus: CorpusParams,
    pub deltas: Vec<i64>,
    pub levels: Vec<u32>,
    pub classes: usize,
    pub noisy_classes: usize,
    pub bits: u64,
    /// Images are spread over this many users, each with its own key.
    pub users: usize,
    pub mode: HistogramMode,
    pub filters: IntegerFilterPair,
    pub top_k: usize,
    pub seed: u64,
}

impl Default for BenchParams {
    fn default() -> Self {
        BenchParams {
            corpus: CorpusParams::default(),
            deltas: DEFAULT_DELTAS.to_vec(),
            levels: DEFAULT_LEVELS.to_vec(),
            classes: 4,
            noisy_classes: 8,
            bits: 32,
            users: 3,
            mode: HistogramMode::Centers,
            filters: IntegerFilterPair::haar_unnormalized(4).expect("valid filter"),
            top_k: 5,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub delta: i64,
    pub levels: u32,
    pub precision_clear: f64,
    pub precision_encrypted: f64,
    pub ranking_equal: bool,
    /// Ancillary ciphertexts per image, pixels excluded.
    pub payload_per_image: u64,
    pub ciphertexts_per_image: u64,
}

/// Deterministic rows plus wall-clock timings kept apart so that equal
/// seeds give equal reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    #[serde(skip)]
    pub seconds: Vec<f64>,
}

impl BenchReport {
    pub fn all_equal(&self) -> bool {
        self.rows.iter().all(|r| r.ranking_equal && r.precision_clear == r.precision_encrypted)
    }

    pub fn write_csv(&self, out: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn derive_seed(parts: &[u64]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"socbir/bench/v1");
    for p in parts {
        h.update(p.to_be_bytes());
    }
    h.finalize().into()
}

pub fn user_keys(params: &BenchParams) -> Result<Vec<Keypair>> {
    (0..params.users.max(1))
        .map(|u| keygen(params.bits, &mut ChaCha20Rng::from_seed(derive_seed(&[params.seed, 0xBEEF, u as u64]))))
        .collect()
}

pub fn config_for(params: &BenchParams, delta: i64, levels: u32) -> SignatureConfig {
    SignatureConfig::new(
        params.filters.clone(),
        levels,
        delta,
        ClassLayout::Fixed {
            classes: params.classes,
            noisy_classes: params.noisy_classes,
        },
    )
}

/// Mean over queries of the fraction of the top results sharing the
/// query's label.
pub fn precision_at(results: &[Vec<RankedResult>], queries: &[LabelledImage], database: &[LabelledImage], k: usize) -> f64 {
    let label = |id: &str| database.iter().find(|d| d.id == id).map(|d| d.label.as_str());
    let total: f64 = results
        .iter()
        .zip(queries)
        .map(|(r, q)| r.iter().take(k).filter(|x| label(&x.id) == Some(q.label.as_str())).count() as f64 / k as f64)
        .sum();
    total / queries.len().max(1) as f64
}

/// One grid point: every image packaged under its owner's key, signatures
/// computed from packages alone, then both rankings compared.
pub fn run_point(
    params: &BenchParams,
    corpus: &SyntheticCorpus,
    keys: &[Keypair],
    delta: i64,
    levels: u32,
) -> Result<BenchRow> {
    let config = config_for(params, delta, levels);
    let reference_seed = derive_seed(&[params.seed, 0x5EED]);
    let encrypt = |i: usize, img: &LabelledImage| -> Result<_> {
        let mut rng = ChaCha20Rng::from_seed(derive_seed(&[params.seed, delta as u64, levels as u64, i as u64]));
        let owner = &keys[i % keys.len()];
        let (pkg, _) = build_package(&img.id, &img.image, owner, &config, params.mode, &reference_seed, &mut rng)?;
        let ciphertexts = pkg.ciphertext_count();
        Ok((compute_signature(&pkg, &config)?.signature, ciphertexts))
    };
    let all: Vec<&LabelledImage> = corpus.database.iter().chain(&corpus.queries).collect();
    let mut encrypted = Vec::with_capacity(all.len());
    let mut ciphertexts = 0;
    for (i, img) in all.iter().enumerate() {
        let (sig, n) = encrypt(i, img)?;
        encrypted.push(sig);
        ciphertexts = n;
    }
    let clear = all
        .iter()
        .map(|img| clear_signature(&img.image, &config))
        .collect::<Result<Vec<_>>>()?;
    let n_db = corpus.database.len();
    let mut enc_results = Vec::new();
    let mut clear_results = Vec::new();
    for q in 0..corpus.queries.len() {
        let db_enc = corpus.database.iter().zip(&encrypted[..n_db]).map(|(d, s)| (d.id.as_str(), s));
        enc_results.push(rank_top_k(&encrypted[n_db + q], db_enc, params.top_k)?);
        let db_clear = corpus.database.iter().zip(&clear[..n_db]).map(|(d, s)| (d.id.as_str(), s));
        clear_results.push(rank_top_k_clear(&clear[n_db + q], db_clear, params.top_k)?);
    }
    let size = corpus.params.size;
    Ok(BenchRow {
        delta,
        levels,
        precision_clear: precision_at(&clear_results, &corpus.queries, &corpus.database, params.top_k),
        precision_encrypted: precision_at(&enc_results, &corpus.queries, &corpus.database, params.top_k),
        ranking_equal: enc_results == clear_results,
        payload_per_image: payload_count(size, size, params.classes, params.noisy_classes, levels, params.mode)?,
        ciphertexts_per_image: ciphertexts,
    })
}

pub fn run_bench(params: &BenchParams, mut progress: impl FnMut(&BenchRow, f64)) -> Result<BenchReport> {
    let corpus = SyntheticCorpus::generate(&params.corpus);
    let keys = user_keys(params)?;
    let mut rows = Vec::new();
    let mut seconds = Vec::new();
    for &levels in &params.levels {
        for &delta in &params.deltas {
            let start = Instant::now();
            let row = run_point(params, &corpus, &keys, delta, levels)?;
            let elapsed = start.elapsed().as_secs_f64();
            progress(&row, elapsed);
            rows.push(row);
            seconds.push(elapsed);
        }
    }
    Ok(BenchReport { rows, seconds })
}
