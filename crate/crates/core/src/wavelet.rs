//! Separable 2D DWT with integer filters, in the clear, over Paillier
//! ciphertexts, and over tracked random values.
//!
//! All three share one analysis routine parameterized by how a weighted
//! combination of parent values is formed, so their indexing is identical:
//!
//! `out(x, y) = Σ_{i,j} W(i)·W'(j)·in((2x + i) mod h, (2y + j) mod w)`
//!
//! with periodic extension. `x` indexes rows, `y` columns; the first filter
//! of a band name runs along `x`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paillier::{Ciphertext, PublicKey, TrackedRandom};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Band {
    HH,
    HG,
    GH,
    GG,
}

impl Band {
    pub const DETAILS: [Band; 3] = [Band::HG, Band::GH, Band::GG];

    fn filters(self) -> (FilterKind, FilterKind) {
        use FilterKind::*;
        match self {
            Band::HH => (Low, Low),
            Band::HG => (Low, High),
            Band::GH => (High, Low),
            Band::GG => (High, High),
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Band::HH => "HH",
            Band::HG => "HG",
            Band::GH => "GH",
            Band::GG => "GG",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BandId {
    pub level: u32,
    pub band: Band,
}

impl fmt::Display for BandId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.band, self.level)
    }
}

/// Canonical band order of a `levels`-deep signature: the three detail
/// bands of each level, ascending, then the deepest approximation. With
/// zero levels the only band is the image itself.
pub fn signature_bands(levels: u32) -> Vec<BandId> {
    let mut ids: Vec<BandId> = (1..=levels)
        .flat_map(|level| Band::DETAILS.map(|band| BandId { level, band }))
        .collect();
    ids.push(BandId {
        level: levels,
        band: Band::HH,
    });
    ids
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FilterKind {
    Low,
    High,
}

/// Integer low/high-pass pair `H = round(Q·h)`, `G = round(Q·g)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegerFilterPair {
    pub low: Vec<i64>,
    pub high: Vec<i64>,
    pub scale: i64,
    pub source_low: Vec<f64>,
    pub source_high: Vec<f64>,
}

impl IntegerFilterPair {
    /// Quantizes real filters, rounding half away from zero.
    pub fn expand(h: &[f64], g: &[f64], q: i64) -> Result<Self> {
        if q < 1 {
            return Err(Error::InvalidParameter(format!("filter scale {q} must be >= 1")));
        }
        if h.is_empty() || g.is_empty() {
            return Err(Error::InvalidParameter("empty filter".into()));
        }
        let quantize = |taps: &[f64]| -> Vec<i64> { taps.iter().map(|t| (t * q as f64).round() as i64).collect() };
        let low = quantize(h);
        let high = quantize(g);
        if low.iter().all(|&t| t == 0) || high.iter().all(|&t| t == 0) {
            return Err(Error::DegenerateFilter);
        }
        Ok(IntegerFilterPair {
            low,
            high,
            scale: q,
            source_low: h.to_vec(),
            source_high: g.to_vec(),
        })
    }

    /// Orthonormal Haar, `h = (1/√2, 1/√2)`, `g = (1/√2, -1/√2)`.
    pub fn haar(q: i64) -> Result<Self> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::expand(&[s, s], &[s, -s], q)
    }

    /// Averaging Haar, `h = (1/2, 1/2)`, `g = (1/2, -1/2)`.
    pub fn haar_unnormalized(q: i64) -> Result<Self> {
        Self::expand(&[0.5, 0.5], &[0.5, -0.5], q)
    }

    fn taps(&self, kind: FilterKind) -> &[i64] {
        match kind {
            FilterKind::Low => &self.low,
            FilterKind::High => &self.high,
        }
    }

    pub fn low_gain(&self) -> i64 {
        self.low.iter().map(|t| t.abs()).sum()
    }

    pub fn high_gain(&self) -> i64 {
        self.high.iter().map(|t| t.abs()).sum()
    }
}

/// Row-major 2D array; `get(x, y)` reads row `x`, column `y`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    values: Vec<T>,
}

impl<T> Grid<T> {
    pub fn new(width: usize, height: usize, values: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Geometry(format!("empty grid {width}x{height}")));
        }
        if values.len() != width * height {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: width * height,
            });
        }
        Ok(Grid { width, height, values })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for x in 0..height {
            for y in 0..width {
                values.push(f(x, y));
            }
        }
        Grid { width, height, values }
    }

    pub fn try_from_fn<E>(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> std::result::Result<T, E>,
    ) -> std::result::Result<Self, E> {
        let mut values = Vec::with_capacity(width * height);
        for x in 0..height {
            for y in 0..width {
                values.push(f(x, y)?);
            }
        }
        Ok(Grid { width, height, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.values[x * self.width + y]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(f).collect(),
        }
    }

    pub fn try_map<U, E>(&self, f: impl FnMut(&T) -> std::result::Result<U, E>) -> std::result::Result<Grid<U>, E> {
        Ok(Grid {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(f).collect::<std::result::Result<_, _>>()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subband<T> {
    pub id: BandId,
    pub grid: Grid<T>,
}

pub type SubbandGrid = Subband<i64>;
pub type EncryptedSubbandGrid = Subband<Ciphertext>;
pub type RandomGrid = Subband<TrackedRandom>;

/// Detail bands of every level plus the deepest approximation, in
/// [`signature_bands`] order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition<T> {
    levels: u32,
    bands: Vec<Subband<T>>,
}

impl<T> Decomposition<T> {
    /// Assembles a decomposition, checking that the band set is complete
    /// and consistently sized.
    pub fn from_bands(levels: u32, bands: Vec<Subband<T>>) -> Result<Self> {
        let expected = signature_bands(levels);
        let found: Vec<BandId> = bands.iter().map(|b| b.id).collect();
        if found != expected {
            return Err(Error::IncompleteBands(format!(
                "expected {} bands for {levels} levels, found [{}]",
                expected.len(),
                found.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(", ")
            )));
        }
        for b in &bands {
            let deepest = &bands[bands.len() - 1].grid;
            let shrink = 1usize << (levels - b.id.level);
            if b.grid.width != deepest.width * shrink || b.grid.height != deepest.height * shrink {
                return Err(Error::Geometry(format!("band {} has inconsistent size", b.id)));
            }
        }
        Ok(Decomposition { levels, bands })
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn bands(&self) -> &[Subband<T>] {
        &self.bands
    }

    pub fn into_bands(self) -> Vec<Subband<T>> {
        self.bands
    }

    pub fn band(&self, id: BandId) -> Option<&Subband<T>> {
        self.bands.iter().find(|b| b.id == id)
    }

    pub fn approximation(&self) -> &Subband<T> {
        &self.bands[self.bands.len() - 1]
    }
}

/// How the transform forms `Σ wᵢ·vᵢ` in a given domain.
trait Combine {
    type Elem: Clone;
    fn combine(&self, terms: &[(&Self::Elem, i64)]) -> Result<Self::Elem>;
}

struct ClearDomain;

impl Combine for ClearDomain {
    type Elem = i64;

    fn combine(&self, terms: &[(&i64, i64)]) -> Result<i64> {
        terms.iter().try_fold(0i64, |acc, (v, w)| {
            v.checked_mul(*w)
                .and_then(|p| acc.checked_add(p))
                .ok_or_else(|| Error::overflow("wavelet coefficient", i64::MAX))
        })
    }
}

struct CipherDomain<'a>(&'a PublicKey);

impl Combine for CipherDomain<'_> {
    type Elem = Ciphertext;

    fn combine(&self, terms: &[(&Ciphertext, i64)]) -> Result<Ciphertext> {
        let pk = self.0;
        let mut acc: Option<Ciphertext> = None;
        for (c, w) in terms {
            if *w == 0 {
                continue;
            }
            let powered = pk.scale(c, *w)?;
            acc = Some(match acc {
                None => powered,
                Some(a) => pk.add(&a, &powered)?,
            });
        }
        Ok(acc.unwrap_or_else(|| pk.neutral()))
    }
}

struct RandomDomain<'a>(&'a PublicKey);

impl Combine for RandomDomain<'_> {
    type Elem = TrackedRandom;

    fn combine(&self, terms: &[(&TrackedRandom, i64)]) -> Result<TrackedRandom> {
        let pk = self.0;
        terms.iter().try_fold(pk.unit_random(), |acc, (r, w)| {
            if *w == 0 {
                Ok(acc)
            } else {
                Ok(pk.random_mul(&acc, &pk.random_pow(r, *w)?))
            }
        })
    }
}

#[derive(Clone, Copy)]
enum Axis {
    Rows,
    Cols,
}

/// One filtering + decimation pass along `axis`.
fn pass<D: Combine>(domain: &D, input: &Grid<D::Elem>, taps: &[i64], axis: Axis) -> Result<Grid<D::Elem>> {
    let (w, h) = (input.width, input.height);
    let (out_w, out_h) = match axis {
        Axis::Rows => (w, h / 2),
        Axis::Cols => (w / 2, h),
    };
    let mut terms = Vec::with_capacity(taps.len());
    Grid::try_from_fn(out_w, out_h, |x, y| {
        terms.clear();
        for (j, &t) in taps.iter().enumerate() {
            let v = match axis {
                Axis::Rows => input.get((2 * x + j) % h, y),
                Axis::Cols => input.get(x, (2 * y + j) % w),
            };
            terms.push((v, t));
        }
        domain.combine(&terms)
    })
}

fn analyze<D: Combine>(
    domain: &D,
    image: &Grid<D::Elem>,
    filters: &IntegerFilterPair,
    levels: u32,
) -> Result<Decomposition<D::Elem>> {
    let mut approx = image.clone();
    let mut bands = Vec::with_capacity(3 * levels as usize + 1);
    for level in 1..=levels {
        if approx.width % 2 != 0 || approx.height % 2 != 0 {
            return Err(Error::Geometry(format!(
                "odd {}x{} approximation before level {level}",
                approx.width, approx.height
            )));
        }
        let low = pass(domain, &approx, filters.taps(FilterKind::Low), Axis::Rows)?;
        let high = pass(domain, &approx, filters.taps(FilterKind::High), Axis::Rows)?;
        for band in Band::DETAILS {
            let (fx, fy) = band.filters();
            let src = if fx == FilterKind::Low { &low } else { &high };
            let grid = pass(domain, src, filters.taps(fy), Axis::Cols)?;
            bands.push(Subband {
                id: BandId { level, band },
                grid,
            });
        }
        approx = pass(domain, &low, filters.taps(FilterKind::Low), Axis::Cols)?;
    }
    bands.push(Subband {
        id: BandId {
            level: levels,
            band: Band::HH,
        },
        grid: approx,
    });
    Ok(Decomposition { levels, bands })
}

/// Clear-domain transform with exact integer arithmetic.
pub fn dwt2_clear(image: &Grid<i64>, filters: &IntegerFilterPair, levels: u32) -> Result<Decomposition<i64>> {
    analyze(&ClearDomain, image, filters, levels)
}

/// The same transform over ciphertexts: every output is a product of
/// parent ciphertexts raised to integer filter products, mod `Kp²`.
pub fn dwt2_encrypted(
    image: &Grid<Ciphertext>,
    filters: &IntegerFilterPair,
    levels: u32,
    pk: &PublicKey,
) -> Result<Decomposition<Ciphertext>> {
    if image.values.iter().any(|c| c.key_id() != pk.id()) {
        return Err(Error::KeyMismatch);
    }
    analyze(&CipherDomain(pk), image, filters, levels)
}

/// Client-side mirror of [`dwt2_encrypted`] on the per-pixel random values:
/// `encrypt(clear coefficient, recursed random)` equals the server's
/// ciphertext bit for bit.
pub fn random_recursion(
    randoms: &Grid<TrackedRandom>,
    filters: &IntegerFilterPair,
    levels: u32,
    pk: &PublicKey,
) -> Result<Decomposition<TrackedRandom>> {
    analyze(&RandomDomain(pk), randoms, filters, levels)
}

/// Value range of every band for inputs in `[lo, hi]`, plus the largest
/// magnitude reached anywhere in the cascade (intermediate approximations
/// included).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DynamicBounds {
    pub bands: Vec<(BandId, i64, i64)>,
    pub max_abs: i64,
}

impl DynamicBounds {
    pub fn of(&self, id: BandId) -> Option<(i64, i64)> {
        self.bands.iter().find(|(b, _, _)| *b == id).map(|&(_, lo, hi)| (lo, hi))
    }
}

fn interval_pass(taps: &[i64], lo: i64, hi: i64) -> (i64, i64) {
    taps.iter().fold((0, 0), |(a, b), &t| {
        let (p, q) = (t * lo, t * hi);
        (a + p.min(q), b + p.max(q))
    })
}

pub fn dynamic_bounds(filters: &IntegerFilterPair, levels: u32, lo: i64, hi: i64) -> DynamicBounds {
    let mut bands = Vec::new();
    let mut approx = (lo, hi);
    let mut max_abs = lo.abs().max(hi.abs());
    for level in 1..=levels {
        let low = interval_pass(&filters.low, approx.0, approx.1);
        let high = interval_pass(&filters.high, approx.0, approx.1);
        for band in Band::DETAILS {
            let (fx, fy) = band.filters();
            let src = if fx == FilterKind::Low { low } else { high };
            let r = interval_pass(filters.taps(fy), src.0, src.1);
            max_abs = max_abs.max(r.0.abs()).max(r.1.abs());
            bands.push((BandId { level, band }, r.0, r.1));
        }
        max_abs = max_abs.max(low.0.abs()).max(low.1.abs()).max(high.0.abs()).max(high.1.abs());
        approx = interval_pass(&filters.low, low.0, low.1);
        max_abs = max_abs.max(approx.0.abs()).max(approx.1.abs());
    }
    bands.push((
        BandId {
            level: levels,
            band: Band::HH,
        },
        approx.0,
        approx.1,
    ));
    DynamicBounds { bands, max_abs }
}

fn two_tap(filters: &IntegerFilterPair) -> Result<([f64; 2], [f64; 2], f64)> {
    if filters.low.len() != 2 || filters.high.len() != 2 {
        return Err(Error::InvalidParameter(
            "inverse transform supports two-tap filters only".into(),
        ));
    }
    let a = [filters.low[0] as f64, filters.low[1] as f64];
    let b = [filters.high[0] as f64, filters.high[1] as f64];
    let det = a[0] * b[1] - a[1] * b[0];
    if det == 0.0 {
        return Err(Error::DegenerateFilter);
    }
    Ok((a, b, det))
}

fn synth_pass(lo: &Grid<f64>, hi: &Grid<f64>, a: [f64; 2], b: [f64; 2], det: f64, axis: Axis) -> Grid<f64> {
    let (w, h) = match axis {
        Axis::Rows => (lo.width, lo.height * 2),
        Axis::Cols => (lo.width * 2, lo.height),
    };
    Grid::from_fn(w, h, |x, y| {
        let (i, parity) = match axis {
            Axis::Rows => (x, x % 2),
            Axis::Cols => (y, y % 2),
        };
        let (l, g) = match axis {
            Axis::Rows => (*lo.get(i / 2, y), *hi.get(i / 2, y)),
            Axis::Cols => (*lo.get(x, i / 2), *hi.get(x, i / 2)),
        };
        if parity == 0 {
            (b[1] * l - a[1] * g) / det
        } else {
            (a[0] * g - b[0] * l) / det
        }
    })
}

/// Real-valued inverse of [`dwt2_clear`] for two-tap filter pairs. Accepts
/// arbitrary (e.g. quantized) coefficients.
pub fn idwt2_real(decomposition: &Decomposition<f64>, filters: &IntegerFilterPair) -> Result<Grid<f64>> {
    let (a, b, det) = two_tap(filters)?;
    let levels = decomposition.levels;
    let mut approx = decomposition.approximation().grid.clone();
    for level in (1..=levels).rev() {
        let get = |band| {
            decomposition
                .band(BandId { level, band })
                .map(|s| &s.grid)
                .ok_or_else(|| Error::IncompleteBands(format!("missing {band}{level}")))
        };
        let low = synth_pass(&approx, get(Band::HG)?, a, b, det, Axis::Cols);
        let high = synth_pass(get(Band::GH)?, get(Band::GG)?, a, b, det, Axis::Cols);
        approx = synth_pass(&low, &high, a, b, det, Axis::Rows);
    }
    Ok(approx)
}

/// Exact inverse of [`dwt2_clear`]: divides out the filter gain and fails
/// if the result is not integral.
pub fn idwt2_clear(decomposition: &Decomposition<i64>, filters: &IntegerFilterPair) -> Result<Grid<i64>> {
    let real = Decomposition {
        levels: decomposition.levels,
        bands: decomposition
            .bands
            .iter()
            .map(|s| Subband {
                id: s.id,
                grid: s.grid.map(|&v| v as f64),
            })
            .collect(),
    };
    let out = idwt2_real(&real, filters)?;
    out.try_map(|&v| {
        let r = v.round();
        if (v - r).abs() > 1e-6 {
            Err(Error::InvalidParameter(format!("non-integral reconstruction {v}")))
        } else {
            Ok(r as i64)
        }
    })
}
