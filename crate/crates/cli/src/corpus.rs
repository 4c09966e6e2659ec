//! Seeded synthetic corpus of labelled texture images.
//!
//! Each class is an oriented sinusoidal texture with its own frequency and
//! contrast; images of a class differ by phase, small frequency and
//! orientation jitter, brightness offset and pixel noise.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use socbir_core::wavelet::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextureClass {
    /// Cycles per pixel.
    pub frequency: f64,
    /// Orientation in radians, 0 = stripes varying along rows.
    pub orientation: f64,
    pub contrast: f64,
    /// Second harmonic weight; 0 gives a pure sinusoid.
    pub harmonic: f64,
}

pub const FAMILIES: [TextureClass; 4] = [
    TextureClass {
        frequency: 0.06,
        orientation: 0.0,
        contrast: 70.0,
        harmonic: 0.0,
    },
    TextureClass {
        frequency: 0.32,
        orientation: PI / 2.0,
        contrast: 50.0,
        harmonic: 0.3,
    },
    TextureClass {
        frequency: 0.18,
        orientation: PI / 4.0,
        contrast: 60.0,
        harmonic: 0.0,
    },
    TextureClass {
        frequency: 0.42,
        orientation: 3.0 * PI / 4.0,
        contrast: 35.0,
        harmonic: 0.6,
    },
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusParams {
    pub seed: u64,
    pub size: usize,
    pub database_per_class: usize,
    pub queries: usize,
    pub noise: f64,
}

impl Default for CorpusParams {
    fn default() -> Self {
        CorpusParams {
            seed: 7,
            size: 32,
            database_per_class: 5,
            queries: 10,
            noise: 12.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelledImage {
    pub id: String,
    pub label: String,
    pub image: Grid<i64>,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub params: CorpusParams,
    pub families: Vec<TextureClass>,
    pub database: Vec<LabelledImage>,
    pub queries: Vec<LabelledImage>,
}

pub fn texture(class: &TextureClass, size: usize, rng: &mut impl Rng, noise: f64) -> Grid<i64> {
    let phase = rng.gen_range(0.0..2.0 * PI);
    let freq = class.frequency * rng.gen_range(0.9..1.1);
    let theta = class.orientation + rng.gen_range(-0.08..0.08);
    let offset = rng.gen_range(-20.0..20.0);
    let (c, s) = (theta.cos(), theta.sin());
    Grid::from_fn(size, size, |x, y| {
        let t = 2.0 * PI * freq * (x as f64 * c + y as f64 * s) + phase;
        let wave = t.sin() + class.harmonic * (2.0 * t).sin();
        let jitter: f64 = rng.gen_range(-noise..=noise);
        (128.0 + offset + class.contrast * wave + jitter).round().clamp(0.0, 255.0) as i64
    })
}

impl SyntheticCorpus {
    pub fn generate(params: &CorpusParams) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(params.seed);
        let families = FAMILIES.to_vec();
        let mut database = Vec::new();
        for (c, class) in families.iter().enumerate() {
            for i in 0..params.database_per_class {
                database.push(LabelledImage {
                    id: format!("db-c{c}-{i}"),
                    label: format!("class{c}"),
                    image: texture(class, params.size, &mut rng, params.noise),
                });
            }
        }
        let queries = (0..params.queries)
            .map(|q| {
                let c = q % families.len();
                LabelledImage {
                    id: format!("query-{q:02}"),
                    label: format!("class{c}"),
                    image: texture(&families[c], params.size, &mut rng, params.noise),
                }
            })
            .collect();
        SyntheticCorpus {
            params: params.clone(),
            families,
            database,
            queries,
        }
    }

    pub fn label_count(&self) -> usize {
        self.families.len()
    }
}

/// Cartoon face on a dark background, used by the reconstruction attack.
pub fn face_image(size: usize) -> Grid<i64> {
    let s = size as f64;
    let ellipse = |x: f64, y: f64, cx: f64, cy: f64, rx: f64, ry: f64| {
        let (dx, dy) = ((x - cx) / rx, (y - cy) / ry);
        dx * dx + dy * dy <= 1.0
    };
    Grid::from_fn(size, size, |x, y| {
        let (x, y) = (x as f64 + 0.5, y as f64 + 0.5);
        let mut v = 30.0;
        if ellipse(x, y, 0.52 * s, 0.5 * s, 0.4 * s, 0.3 * s) {
            v = 200.0;
            if ellipse(x, y, 0.38 * s, 0.37 * s, 0.06 * s, 0.08 * s)
                || ellipse(x, y, 0.38 * s, 0.63 * s, 0.06 * s, 0.08 * s)
            {
                v = 40.0;
            }
            if ellipse(x, y, 0.55 * s, 0.5 * s, 0.1 * s, 0.035 * s) {
                v = 150.0;
            }
            if ellipse(x, y, 0.72 * s, 0.5 * s, 0.04 * s, 0.15 * s) {
                v = 70.0;
            }
        }
        if ellipse(x, y, 0.16 * s, 0.5 * s, 0.1 * s, 0.32 * s) {
            v = 90.0;
        }
        v as i64
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_labelled() {
        let p = CorpusParams::default();
        let a = SyntheticCorpus::generate(&p);
        let b = SyntheticCorpus::generate(&p);
        assert_eq!(a.database, b.database);
        assert_eq!(a.queries, b.queries);
        assert_eq!(a.database.len(), 20);
        assert_eq!(a.queries.len(), 10);
        assert!(a.label_count() >= 2);
        let c = SyntheticCorpus::generate(&CorpusParams { seed: 8, ..p });
        assert_ne!(a.database, c.database);
        for img in a.database.iter().chain(&a.queries) {
            assert!(img.image.values().iter().all(|&v| (0..=255).contains(&v)));
        }
    }

    #[test]
    fn face_has_structure() {
        let f = face_image(32);
        let distinct: std::collections::BTreeSet<_> = f.values().iter().collect();
        assert!(distinct.len() >= 4);
    }
}
