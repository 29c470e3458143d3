//! Random island charts and the periodic land-height function.
//!
//! Each island is an anisotropic Gaussian bump
//! `A exp(-(a dx^2 + 2 b dx dy + c dy^2))`. The land height sums every
//! island over the 3x3 block of periodic images around the fundamental
//! domain; images further out are not included.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::geom::{Domain, Vec2};

/// Height at and above which a position is land (a crash).
pub const LAND_LEVEL: f64 = 0.9;

/// Upper bound on the island count of a chart.
pub const MAX_ISLANDS: usize = 20;

/// Tiles whose quadratic form exceeds this contribute below `2 e^-60` and are
/// skipped.
pub(crate) const PRUNE_EXPONENT: f64 = 60.0;

/// Retry cap for rejection sampling of free positions.
pub const PLACEMENT_RETRIES: usize = 10_000;

/// Per-island vectors, stored inline for charts up to [`MAX_ISLANDS`].
pub type IslandVecs = SmallVec<[Vec2; MAX_ISLANDS]>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Island {
    pub amplitude: f64,
    pub quad_a: f64,
    pub quad_b: f64,
    pub quad_c: f64,
    pub x0: f64,
    pub y0: f64,
}

impl Island {
    #[inline]
    pub(crate) fn form(&self, dx: f64, dy: f64) -> f64 {
        self.quad_a * dx * dx + 2.0 * self.quad_b * dx * dy + self.quad_c * dy * dy
    }

    /// Largest eigenvalue of `[[a, b], [b, c]]`.
    pub fn lambda_max(&self) -> f64 {
        let mean = 0.5 * (self.quad_a + self.quad_c);
        let half_diff = 0.5 * (self.quad_a - self.quad_c);
        mean + half_diff.hypot(self.quad_b)
    }

    /// Offsets from the island centre to `p` (already wrapped) for each of
    /// the nine tiles, in `j`-major order.
    #[inline]
    pub(crate) fn tile_offsets(&self, p: Vec2, domain: &Domain) -> [(f64, f64); 9] {
        let dx = p.x - self.x0;
        let dy = p.y - self.y0;
        let mut out = [(0.0, 0.0); 9];
        let mut n = 0;
        for j in -1..=1 {
            for k in -1..=1 {
                out[n] = (dx + j as f64 * domain.x_max, dy + k as f64 * domain.y_max);
                n += 1;
            }
        }
        out
    }

    #[inline]
    fn height(&self, p: Vec2, domain: &Domain) -> f64 {
        let mut h = 0.0;
        for (dx, dy) in self.tile_offsets(p, domain) {
            let q = self.form(dx, dy);
            if q <= PRUNE_EXPONENT {
                h += self.amplitude * (-q).exp();
            }
        }
        h
    }

    #[inline]
    pub(crate) fn height_and_gradient(&self, p: Vec2, domain: &Domain) -> (f64, Vec2) {
        let mut h = 0.0;
        let mut g = Vec2::ZERO;
        for (dx, dy) in self.tile_offsets(p, domain) {
            let q = self.form(dx, dy);
            if q <= PRUNE_EXPONENT {
                let v = self.amplitude * (-q).exp();
                h += v;
                g.x -= 2.0 * v * (self.quad_a * dx + self.quad_b * dy);
                g.y -= 2.0 * v * (self.quad_b * dx + self.quad_c * dy);
            }
        }
        (h, g)
    }

    fn validate(&self, domain: &Domain) -> Result<()> {
        let ok = (1.0..=2.0).contains(&self.amplitude)
            && self.quad_a >= 1.0
            && self.quad_c >= 1.0
            && self.quad_b * self.quad_b < self.quad_a * self.quad_c
            && (0.0..domain.x_max).contains(&self.x0)
            && (0.0..domain.y_max).contains(&self.y0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("island out of range: {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityBand {
    Low,
    Medium,
    High,
}

impl DensityBand {
    pub const ALL: [DensityBand; 3] = [DensityBand::Low, DensityBand::Medium, DensityBand::High];

    /// Inclusive island-count range.
    pub fn island_range(self) -> (usize, usize) {
        match self {
            DensityBand::Low => (1, 5),
            DensityBand::Medium => (8, 12),
            DensityBand::High => (16, 20),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DensityBand::Low => "low",
            DensityBand::Medium => "medium",
            DensityBand::High => "high",
        }
    }
}

impl fmt::Display for DensityBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DensityBand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(DensityBand::Low),
            "medium" => Ok(DensityBand::Medium),
            "high" => Ok(DensityBand::High),
            other => Err(Error::InvalidParameter(format!("unknown density band `{other}`"))),
        }
    }
}

/// Sampling ranges that are not fixed by the model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChartGenConfig {
    /// Upper bound for the diagonal form coefficients `a` and `c`.
    pub a_max: f64,
}

impl Default for ChartGenConfig {
    fn default() -> Self {
        ChartGenConfig { a_max: 4.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub islands: Vec<Island>,
    pub domain: Domain,
    pub seed: u64,
    /// `None` for hand-built charts.
    pub band: Option<DensityBand>,
}

impl Chart {
    /// Validates the island parameters and count.
    pub fn new(
        islands: Vec<Island>,
        domain: Domain,
        seed: u64,
        band: Option<DensityBand>,
    ) -> Result<Self> {
        if !domain.is_valid() {
            return Err(Error::InvalidParameter(format!("bad domain {domain:?}")));
        }
        if islands.len() > MAX_ISLANDS {
            return Err(Error::InvalidParameter(format!(
                "{} islands exceeds the maximum of {MAX_ISLANDS}",
                islands.len()
            )));
        }
        for island in &islands {
            island.validate(&domain)?;
        }
        Ok(Chart {
            islands,
            domain,
            seed,
            band,
        })
    }

    pub fn empty(domain: Domain) -> Self {
        Chart {
            islands: Vec::new(),
            domain,
            seed: 0,
            band: None,
        }
    }

    /// Land height `f(p)`; `p` is wrapped first.
    pub fn land_height(&self, p: Vec2) -> f64 {
        let p = self.domain.wrap(p);
        self.islands.iter().fold(0.0, |h, i| h + i.height(p, &self.domain))
    }

    /// Analytic gradient of [`Chart::land_height`].
    pub fn land_gradient(&self, p: Vec2) -> Vec2 {
        self.height_and_gradient(p).1
    }

    pub fn height_and_gradient(&self, p: Vec2) -> (f64, Vec2) {
        let p = self.domain.wrap(p);
        let mut h = 0.0;
        let mut g = Vec2::ZERO;
        for island in &self.islands {
            let (ih, ig) = island.height_and_gradient(p, &self.domain);
            h += ih;
            g += ig;
        }
        (h, g)
    }

    /// Land height together with each island's tile-summed gradient.
    pub fn island_gradients(&self, p: Vec2) -> (f64, IslandVecs) {
        let p = self.domain.wrap(p);
        let mut h = 0.0;
        let mut grads = IslandVecs::new();
        for island in &self.islands {
            let (ih, ig) = island.height_and_gradient(p, &self.domain);
            h += ih;
            grads.push(ig);
        }
        (h, grads)
    }

    /// `land_height(p) >= 0.9`, stopping once the partial sum gets there.
    /// Terms are non-negative and added in the same order, so the answer
    /// matches the full sum exactly.
    #[inline]
    pub fn is_land(&self, p: Vec2) -> bool {
        let p = self.domain.wrap(p);
        let mut h = 0.0;
        for island in &self.islands {
            h += island.height(p, &self.domain);
            if h >= LAND_LEVEL {
                return true;
            }
        }
        false
    }

    /// `size x size` greymap of the land height, top row at the largest
    /// `y`; land is white and water shades up to light grey.
    pub fn heightmap_pixels(&self, size: usize) -> Vec<u8> {
        let (hx, hy) = (self.domain.x_max / size as f64, self.domain.y_max / size as f64);
        let mut px = Vec::with_capacity(size * size);
        for j in (0..size).rev() {
            for i in 0..size {
                let f = self.land_height(Vec2::new((i as f64 + 0.5) * hx, (j as f64 + 0.5) * hy));
                px.push(if f >= LAND_LEVEL { 255 } else { crate::export::gray(f, 0.0, LAND_LEVEL, 200) });
            }
        }
        px
    }

    /// Serializes to the line-oriented `chart v1` format.
    pub fn to_text(&self) -> String {
        let band = self.band.map_or("none", DensityBand::as_str);
        let mut s = format!(
            "chart v1 {} {} {} {} {}\n",
            fmt_f64(self.domain.x_max),
            fmt_f64(self.domain.y_max),
            self.seed,
            band,
            self.islands.len()
        );
        for i in &self.islands {
            let _ = writeln!(
                s,
                "{} {} {} {} {} {}",
                fmt_f64(i.amplitude),
                fmt_f64(i.quad_a),
                fmt_f64(i.quad_b),
                fmt_f64(i.quad_c),
                fmt_f64(i.x0),
                fmt_f64(i.y0)
            );
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (hline, header) = lines.next().ok_or_else(|| Error::parse(1, "empty chart file"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 7 || fields[0] != "chart" {
            return Err(Error::parse(hline + 1, "expected `chart v1 <x_max> <y_max> <seed> <band> <N>`"));
        }
        if fields[1] != "v1" {
            return Err(Error::parse(hline + 1, format!("unsupported version `{}`", fields[1])));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::parse(hline + 1, format!("`{s}`: {e}")))
        };
        let domain = Domain::new(num(fields[2])?, num(fields[3])?);
        let seed = fields[4]
            .parse::<u64>()
            .map_err(|e| Error::parse(hline + 1, format!("seed: {e}")))?;
        let band = match fields[5] {
            "none" => None,
            b => Some(b.parse::<DensityBand>().map_err(|e| Error::parse(hline + 1, e.to_string()))?),
        };
        let n = fields[6]
            .parse::<usize>()
            .map_err(|e| Error::parse(hline + 1, format!("island count: {e}")))?;

        let mut islands = Vec::with_capacity(n);
        for _ in 0..n {
            let (lno, line) = lines
                .next()
                .ok_or_else(|| Error::parse(hline + 1, format!("expected {n} island lines")))?;
            let vals = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| Error::parse(lno + 1, format!("`{t}`: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if vals.len() != 6 {
                return Err(Error::parse(lno + 1, "island line needs `A a b c x0 y0`"));
            }
            islands.push(Island {
                amplitude: vals[0],
                quad_a: vals[1],
                quad_b: vals[2],
                quad_c: vals[3],
                x0: vals[4],
                y0: vals[5],
            });
        }
        if let Some((lno, _)) = lines.next() {
            return Err(Error::parse(lno + 1, "trailing data after island lines"));
        }
        Chart::new(islands, domain, seed, band)
    }

    /// Stable 64-bit identifier derived from the serialized chart.
    pub fn chart_hash(&self) -> u64 {
        let digest = Sha256::digest(self.to_text().as_bytes());
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(bytes)
    }
}

/// 17 significant digits; parses back to the identical `f64`.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Draws a chart for `(seed, band, domain)` with the default sampling ranges.
pub fn sample_chart(seed: u64, band: DensityBand, domain: Domain) -> Chart {
    sample_chart_with(seed, band, domain, &ChartGenConfig::default())
}

pub fn sample_chart_with(
    seed: u64,
    band: DensityBand,
    domain: Domain,
    config: &ChartGenConfig,
) -> Chart {
    assert!(domain.is_valid(), "chart dimensions must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = band.island_range();
    let n = rng.random_range(lo..=hi);
    let islands = (0..n)
        .map(|_| sample_island(&mut rng, domain, config.a_max))
        .collect();
    Chart {
        islands,
        domain,
        seed,
        band: Some(band),
    }
}

fn sample_island<R: Rng>(rng: &mut R, domain: Domain, a_max: f64) -> Island {
    let amplitude = rng.random_range(1.0..=2.0);
    let quad_a = rng.random_range(1.0..=a_max);
    let quad_c = rng.random_range(1.0..=a_max);
    let bound = (quad_a * quad_c).sqrt();
    // open interval (-sqrt(ac), sqrt(ac))
    let quad_b = loop {
        let b = rng.random_range(-bound..bound);
        if b * b < quad_a * quad_c {
            break b;
        }
    };
    Island {
        amplitude,
        quad_a,
        quad_b,
        quad_c,
        x0: rng.random_range(0.0..domain.x_max),
        y0: rng.random_range(0.0..domain.y_max),
    }
}

/// Rejection-samples a point with `f < 0.9`, outside `exclusion` if given.
pub fn sample_free_position<R: Rng>(
    chart: &Chart,
    rng: &mut R,
    exclusion: Option<(Vec2, f64)>,
) -> Result<Vec2> {
    sample_free_position_where(chart, rng, exclusion, |_| true)
}

/// Like [`sample_free_position`] with an extra acceptance predicate.
pub fn sample_free_position_where<R: Rng, F: FnMut(Vec2) -> bool>(
    chart: &Chart,
    rng: &mut R,
    exclusion: Option<(Vec2, f64)>,
    mut accept: F,
) -> Result<Vec2> {
    let d = chart.domain;
    for _ in 0..PLACEMENT_RETRIES {
        let p = Vec2::new(rng.random_range(0.0..d.x_max), rng.random_range(0.0..d.y_max));
        if chart.land_height(p) >= LAND_LEVEL {
            continue;
        }
        if let Some((c, r)) = exclusion {
            if d.distance(p, c) <= r {
                continue;
            }
        }
        if accept(p) {
            return Ok(p);
        }
    }
    Err(Error::Placement {
        attempts: PLACEMENT_RETRIES,
    })
}
