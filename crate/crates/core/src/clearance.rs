//! Conservative land-clearance raster.
//!
//! Every raster node stores an upper and a lower bound of the land height
//! over its Voronoi cell, built from a second-order Taylor bound with a local
//! Hessian estimate. A max-pyramid over the upper bounds answers "is this
//! whole rectangle certainly below the land level" in O(1). Callers fall back
//! to the exact land height whenever the bounds are inconclusive, so crash
//! detection through a [`Terrain`] is identical to exact evaluation.

use std::ops::Deref;

use crate::chart::{Chart, LAND_LEVEL, PRUNE_EXPONENT};
use crate::geom::Vec2;

/// Raster nodes per axis.
pub const DEFAULT_RASTER: usize = 512;

/// Absorbs pruned tiles and rounding in the per-node bound.
const BOUND_SLACK: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct ClearanceMap {
    n: usize,
    hx: f64,
    hy: f64,
    /// `levels[k]` holds `(n >> k)^2` block maxima, row-major.
    levels: Vec<Vec<f64>>,
    /// Per-node lower bounds.
    lower: Vec<f64>,
}

/// `max_{Q' >= q} e^{-Q'} (4 Q' + 2)`; the function peaks at `Q' = 1/2`.
fn hessian_envelope(q: f64) -> f64 {
    if q <= 0.5 {
        4.0 * (-0.5f64).exp()
    } else {
        (-q).exp() * (4.0 * q + 2.0)
    }
}

impl ClearanceMap {
    pub fn build(chart: &Chart, n: usize) -> Self {
        assert!(n.is_power_of_two() && n >= 2, "raster size must be a power of two");
        let d = chart.domain;
        let hx = d.x_max / n as f64;
        let hy = d.y_max / n as f64;
        let radius = 0.5 * hx.hypot(hy);

        let lambdas: Vec<f64> = chart.islands.iter().map(|i| i.lambda_max()).collect();
        // Taylor bounds over the ball of `radius` around `c`, with tile
        // offsets taken from `c` as given (not wrapped).
        let bounds = |c: Vec2| {
            let mut f = 0.0;
            let mut g = Vec2::ZERO;
            let mut hess = 0.0;
            for (island, &lam) in chart.islands.iter().zip(&lambdas) {
                let (ih, ig) = island.height_and_gradient(c, &d);
                f += ih;
                g += ig;
                let reach = lam.sqrt() * radius;
                for (dx, dy) in island.tile_offsets(c, &d) {
                    let s = island.form(dx, dy).max(0.0).sqrt();
                    let q_min = if s > reach { (s - reach) * (s - reach) } else { 0.0 };
                    if q_min <= PRUNE_EXPONENT {
                        hess += island.amplitude * lam * hessian_envelope(q_min);
                    }
                }
            }
            let spread = g.norm() * radius + 0.5 * hess * radius * radius + BOUND_SLACK;
            (f - spread, f + spread)
        };
        let mut base = vec![0.0; n * n];
        let mut lower = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                let c = Vec2::new(i as f64 * hx, j as f64 * hy);
                let (mut lo, mut hi) = bounds(c);
                // The tile window is anchored at the wrapped point, so nodes
                // on the seam also cover points expanded from the far side.
                let mut widen = |shift: Vec2| {
                    let (l, h) = bounds(c + shift);
                    lo = lo.min(l);
                    hi = hi.max(h);
                };
                if i == 0 {
                    widen(Vec2::new(d.x_max, 0.0));
                }
                if j == 0 {
                    widen(Vec2::new(0.0, d.y_max));
                }
                if i == 0 && j == 0 {
                    widen(Vec2::new(d.x_max, d.y_max));
                }
                base[j * n + i] = hi;
                lower[j * n + i] = lo;
            }
        }

        let mut levels = vec![base];
        let mut m = n;
        while m > 1 {
            let prev = levels.last().unwrap();
            let half = m / 2;
            let mut next = vec![0.0; half * half];
            for by in 0..half {
                for bx in 0..half {
                    let at = |x: usize, y: usize| prev[y * m + x];
                    next[by * half + bx] = at(2 * bx, 2 * by)
                        .max(at(2 * bx + 1, 2 * by))
                        .max(at(2 * bx, 2 * by + 1))
                        .max(at(2 * bx + 1, 2 * by + 1));
                }
            }
            levels.push(next);
            m = half;
        }
        ClearanceMap { n, hx, hy, levels, lower }
    }

    #[inline]
    fn node_index(&self, v: f64, h: f64) -> i64 {
        // floor without the libm call
        let u = v / h + 0.5;
        let t = u as i64;
        t - (u < t as f64) as i64
    }

    #[inline]
    fn node(&self, p: Vec2) -> usize {
        // n is a power of two, so masking is the periodic wrap
        let mask = self.n as i64 - 1;
        let i = self.node_index(p.x, self.hx) & mask;
        let j = self.node_index(p.y, self.hy) & mask;
        j as usize * self.n + i as usize
    }

    /// Upper bound of the land height around the node nearest to `p`.
    #[inline]
    pub fn bound_at(&self, p: Vec2) -> f64 {
        self.levels[0][self.node(p)]
    }

    /// Lower bound of the land height around the node nearest to `p`.
    #[inline]
    pub fn lower_bound_at(&self, p: Vec2) -> f64 {
        self.lower[self.node(p)]
    }

    /// `Some(answer)` when the bounds decide `f(p) >= 0.9` on their own.
    #[inline]
    pub fn classify(&self, p: Vec2) -> Option<bool> {
        let k = self.node(p);
        if self.levels[0][k] < LAND_LEVEL {
            Some(false)
        } else if self.lower[k] >= LAND_LEVEL {
            Some(true)
        } else {
            None
        }
    }

    /// `true` only if `f(p) < 0.9` is guaranteed.
    #[inline]
    pub fn point_clear(&self, p: Vec2) -> bool {
        self.bound_at(p) < LAND_LEVEL
    }

    /// `true` only if `f < 0.9` everywhere in the axis-aligned box spanned
    /// by `a` and `b` (unwrapped coordinates are fine).
    pub fn box_clear(&self, a: Vec2, b: Vec2) -> bool {
        let n = self.n as i64;
        let i0 = self.node_index(a.x.min(b.x), self.hx);
        let i1 = self.node_index(a.x.max(b.x), self.hx);
        let j0 = self.node_index(a.y.min(b.y), self.hy);
        let j1 = self.node_index(a.y.max(b.y), self.hy);
        let span = (i1 - i0 + 1).max(j1 - j0 + 1);
        if span >= n {
            return self.levels.last().unwrap()[0] < LAND_LEVEL;
        }
        let k = (span as u64).next_power_of_two().trailing_zeros() as usize;
        let block = 1i64 << k;
        let m = (self.n >> k) as i64;
        let level = &self.levels[k];
        let mut worst = f64::NEG_INFINITY;
        for by in j0.div_euclid(block)..=j1.div_euclid(block) {
            for bx in i0.div_euclid(block)..=i1.div_euclid(block) {
                let idx = by.rem_euclid(m) * m + bx.rem_euclid(m);
                worst = worst.max(level[idx as usize]);
            }
        }
        worst < LAND_LEVEL
    }
}

/// A chart bundled with its clearance raster.
#[derive(Clone, Debug)]
pub struct Terrain {
    chart: Chart,
    clearance: ClearanceMap,
}

impl Terrain {
    pub fn new(chart: Chart) -> Self {
        Self::with_raster(chart, DEFAULT_RASTER)
    }

    pub fn with_raster(chart: Chart, n: usize) -> Self {
        let clearance = ClearanceMap::build(&chart, n);
        Terrain { chart, clearance }
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn clearance(&self) -> &ClearanceMap {
        &self.clearance
    }

    /// Same answer as [`Chart::is_land`], usually without evaluating `f`.
    #[inline]
    pub fn is_land(&self, p: Vec2) -> bool {
        match self.clearance.classify(p) {
            Some(land) => land,
            None => self.chart.is_land(p),
        }
    }

    #[inline]
    pub fn box_clear(&self, a: Vec2, b: Vec2) -> bool {
        self.clearance.box_clear(a, b)
    }
}

impl Deref for Terrain {
    type Target = Chart;

    fn deref(&self) -> &Chart {
        &self.chart
    }
}
