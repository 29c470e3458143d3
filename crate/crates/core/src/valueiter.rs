//! Value iteration on a periodic grid with bilinear lookup between nodes.
//!
//! Grid nodes on land hold 100 and nodes inside the target hold -1; they
//! are pinned from the first sweep on. Every other node is backed up as
//! `min_a c(a) + gamma V(endpoint)`, where the future term is dropped when
//! the transition itself terminates (crash or arrival), since its
//! positional cost is already part of `c`.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::LAND_LEVEL;
use crate::clearance::Terrain;
use crate::currents::CurrentSpec;
use crate::dynamics::{
    fuel_cost, positional_cost, Integrator, MovementAction, TargetRegion, ACTION_COUNT, CRASH_COST,
    HEADINGS, TARGET_COST,
};
use crate::error::{Error, Result};
use crate::export::{self, fmt_exact, gray};
use crate::geom::{Domain, Vec2};

pub const DEFAULT_RESOLUTION: usize = 152;
pub const DEFAULT_GAMMA: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// The agent's model: `W == 0`.
    NoCurrent,
    /// The true field is known to the solver.
    KnownCurrent,
}

impl Variant {
    fn code(self) -> u8 {
        match self {
            Variant::NoCurrent => 0,
            Variant::KnownCurrent => 1,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Variant::NoCurrent),
            1 => Some(Variant::KnownCurrent),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveConfig {
    /// Nodes per axis.
    pub resolution: usize,
    pub gamma: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub variant: Variant,
    /// Only read for [`Variant::KnownCurrent`].
    pub current: CurrentSpec,
    pub integrator: Integrator,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            resolution: DEFAULT_RESOLUTION,
            gamma: DEFAULT_GAMMA,
            tol: 1e-6,
            max_iter: 500,
            variant: Variant::NoCurrent,
            current: CurrentSpec::new(0.0),
            integrator: Integrator::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValueGrid {
    /// Row-major: `values[j * nx + i]` is the node at `(i dx, j dy)`.
    pub values: Vec<f64>,
    pub nx: usize,
    pub ny: usize,
    pub domain: Domain,
    pub gamma: f64,
    pub chart_hash: u64,
    pub target: TargetRegion,
    pub variant: Variant,
    pub iterations: usize,
    /// Sup-norm change of each sweep.
    pub residual_history: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
struct Stencil {
    i0: usize,
    j0: usize,
    fx: f64,
    fy: f64,
}

fn stencil(domain: &Domain, nx: usize, ny: usize, p: Vec2) -> Stencil {
    let p = domain.wrap(p);
    let axis = |v: f64, period: f64, n: usize| {
        let g = v / (period / n as f64);
        let base = g.floor();
        let i = base as usize;
        if i >= n {
            (0, 0.0)
        } else {
            (i, g - base)
        }
    };
    let (i0, fx) = axis(p.x, domain.x_max, nx);
    let (j0, fy) = axis(p.y, domain.y_max, ny);
    Stencil { i0, j0, fx, fy }
}

#[inline]
fn interpolate(values: &[f64], nx: usize, ny: usize, s: Stencil) -> f64 {
    let i1 = if s.i0 + 1 == nx { 0 } else { s.i0 + 1 };
    let j1 = if s.j0 + 1 == ny { 0 } else { s.j0 + 1 };
    let r0 = s.j0 * nx;
    let r1 = j1 * nx;
    let (gx, gy) = (1.0 - s.fx, 1.0 - s.fy);
    gx * gy * values[r0 + s.i0] + s.fx * gy * values[r0 + i1] + gx * s.fy * values[r1 + s.i0] + s.fx * s.fy * values[r1 + i1]
}

impl ValueGrid {
    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        node_position(&self.domain, self.nx, self.ny, i, j)
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    /// Periodic bilinear interpolation; exact at nodes.
    pub fn lookup(&self, p: Vec2) -> f64 {
        interpolate(&self.values, self.nx, self.ny, stencil(&self.domain, self.nx, self.ny, p))
    }

    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::INFINITY)
    }

    /// Whether this grid was solved for exactly this problem.
    pub fn matches(&self, chart_hash: u64, gamma: f64, target: &TargetRegion, variant: Variant, resolution: usize) -> bool {
        self.chart_hash == chart_hash
            && self.gamma.to_bits() == gamma.to_bits()
            && self.target.center.x.to_bits() == target.center.x.to_bits()
            && self.target.center.y.to_bits() == target.center.y.to_bits()
            && self.target.radius.to_bits() == target.radius.to_bits()
            && self.variant == variant
            && self.nx == resolution
            && self.ny == resolution
    }
}

pub fn value_lookup(grid: &ValueGrid, p: Vec2) -> f64 {
    grid.lookup(p)
}

fn node_position(domain: &Domain, nx: usize, ny: usize, i: usize, j: usize) -> Vec2 {
    Vec2::new(i as f64 * domain.x_max / nx as f64, j as f64 * domain.y_max / ny as f64)
}

/// Actions that differ in effect: one zero-speed action plus the 80 moving ones.
fn distinct_actions() -> Vec<MovementAction> {
    (0..1).chain(HEADINGS..ACTION_COUNT).map(MovementAction::from_index).collect()
}

#[derive(Clone, Copy, Debug)]
struct Transition {
    cost: f64,
    /// `None` for terminal transitions.
    next: Option<Stencil>,
}

/// Per-node transition tables; they do not change between sweeps.
struct TransitionTable {
    /// Start of each node's entries, or `None` for pinned nodes.
    offsets: Vec<Option<u32>>,
    pinned: Vec<f64>,
    entries: Vec<Transition>,
    per_node: usize,
}

fn build_transitions(terrain: &Terrain, target: &TargetRegion, cfg: &SolveConfig) -> TransitionTable {
    let (nx, ny) = (cfg.resolution, cfg.resolution);
    let domain = terrain.domain;
    let actions = distinct_actions();
    let current = match cfg.variant {
        Variant::NoCurrent => None,
        Variant::KnownCurrent => Some(&cfg.current),
    };

    let rows: Vec<(Vec<Option<f64>>, Vec<Transition>)> = (0..ny)
        .into_par_iter()
        .map(|j| {
            let mut pins = Vec::with_capacity(nx);
            let mut entries = Vec::new();
            for i in 0..nx {
                let p = node_position(&domain, nx, ny, i, j);
                if terrain.land_height(p) >= LAND_LEVEL {
                    pins.push(Some(CRASH_COST));
                    continue;
                }
                if target.contains(terrain, p) {
                    pins.push(Some(TARGET_COST));
                    continue;
                }
                pins.push(None);
                for a in &actions {
                    let m = a.vector();
                    let end = match current {
                        Some(spec) if !spec.is_calm() => {
                            let motion = cfg.integrator.integrate(terrain, current, p, m, false);
                            (!motion.crashed).then_some(motion.endpoint)
                        }
                        _ => cfg.integrator.constant_endpoint(terrain, p, m),
                    };
                    let pos = match end {
                        None => CRASH_COST,
                        Some(e) if target.contains(terrain, e) => TARGET_COST,
                        Some(_) => 0.0,
                    };
                    entries.push(Transition {
                        cost: pos + fuel_cost(m),
                        next: end.filter(|_| pos == 0.0).map(|e| stencil(&domain, nx, ny, e)),
                    });
                }
            }
            (pins, entries)
        })
        .collect();

    let per_node = actions.len();
    let mut offsets = Vec::with_capacity(nx * ny);
    let mut pinned = Vec::with_capacity(nx * ny);
    let mut entries = Vec::new();
    for (pins, row_entries) in rows {
        let mut k = 0;
        for pin in pins {
            match pin {
                Some(v) => {
                    offsets.push(None);
                    pinned.push(v);
                }
                None => {
                    offsets.push(Some((entries.len() + k * per_node) as u32));
                    pinned.push(0.0);
                    k += 1;
                }
            }
        }
        entries.extend(row_entries);
    }
    TransitionTable {
        offsets,
        pinned,
        entries,
        per_node,
    }
}

/// Solves for the converged value grid of `(terrain, target)`.
pub fn value_iteration(terrain: &Terrain, target: &TargetRegion, cfg: &SolveConfig) -> Result<ValueGrid> {
    if !(0.0..1.0).contains(&cfg.gamma) {
        return Err(Error::InvalidParameter(format!("gamma {} outside [0, 1)", cfg.gamma)));
    }
    if !(cfg.tol > 0.0) || cfg.resolution < 2 {
        return Err(Error::InvalidParameter("tol must be positive and resolution at least 2".into()));
    }
    let n = cfg.resolution;
    let table = build_transitions(terrain, target, cfg);
    let gamma = cfg.gamma;

    let mut prev = vec![0.0; n * n];
    let mut next = vec![0.0; n * n];
    let mut history = Vec::new();
    for iter in 1..=cfg.max_iter {
        next.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
            for (i, out) in row.iter_mut().enumerate() {
                let node = j * n + i;
                *out = match table.offsets[node] {
                    None => table.pinned[node],
                    Some(off) => {
                        let off = off as usize;
                        table.entries[off..off + table.per_node]
                            .iter()
                            .map(|t| match t.next {
                                Some(s) => t.cost + gamma * interpolate(&prev, n, n, s),
                                None => t.cost,
                            })
                            .fold(f64::INFINITY, f64::min)
                    }
                };
            }
        });
        let residual = prev
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        history.push(residual);
        std::mem::swap(&mut prev, &mut next);
        if residual <= cfg.tol {
            return Ok(ValueGrid {
                values: prev,
                nx: n,
                ny: n,
                domain: terrain.domain,
                gamma,
                chart_hash: terrain.chart_hash(),
                target: *target,
                variant: cfg.variant,
                iterations: iter,
                residual_history: history,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: cfg.max_iter,
        residual: history.last().copied().unwrap_or(f64::INFINITY),
    })
}

/// Q-values of all 96 actions at `p` under `W == 0`, read from `grid`.
pub fn greedy_q_values(grid: &ValueGrid, terrain: &Terrain, target: &TargetRegion, p: Vec2) -> Vec<f64> {
    let integ = Integrator::default();
    (0..ACTION_COUNT)
        .map(|idx| {
            let m = MovementAction::from_index(idx).vector();
            let motion = integ.integrate_constant(terrain, p, m, Vec2::ZERO, false);
            let pos = positional_cost(terrain, target, &motion);
            let future = if pos == 0.0 { grid.gamma * grid.lookup(motion.endpoint) } else { 0.0 };
            pos + fuel_cost(m) + future
        })
        .collect()
}

/// First index of the minimum.
pub fn argmin(values: &[f64]) -> (usize, f64) {
    values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, &v)| if v < best.1 { (i, v) } else { best })
}

/// Greedy action with respect to `grid` (ties go to the lower index).
pub fn greedy_action(grid: &ValueGrid, terrain: &Terrain, target: &TargetRegion, p: Vec2) -> (MovementAction, f64) {
    let (i, q) = argmin(&greedy_q_values(grid, terrain, target, p));
    (MovementAction::from_index(i), q)
}

const CACHE_MAGIC: &[u8; 8] = b"SUBNAVVG";
const CACHE_VERSION: u32 = 1;

impl ValueGrid {
    /// Binary cache: header, then row-major little-endian `f64` values.
    pub fn write_cache<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(CACHE_MAGIC)?;
        out.write_all(&CACHE_VERSION.to_le_bytes())?;
        out.write_all(&self.chart_hash.to_le_bytes())?;
        out.write_all(&self.gamma.to_le_bytes())?;
        out.write_all(&[self.variant.code()])?;
        out.write_all(&(self.nx as u32).to_le_bytes())?;
        out.write_all(&(self.ny as u32).to_le_bytes())?;
        for v in [
            self.domain.x_max,
            self.domain.y_max,
            self.target.center.x,
            self.target.center.y,
            self.target.radius,
        ] {
            out.write_all(&v.to_le_bytes())?;
        }
        out.write_all(&(self.iterations as u32).to_le_bytes())?;
        out.write_all(&(self.residual_history.len() as u32).to_le_bytes())?;
        for v in self.residual_history.iter().chain(&self.values) {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_cache<R: Read>(mut input: R) -> Result<Self> {
        let mut buf = Vec::new();
        input
            .read_to_end(&mut buf)
            .map_err(|e| Error::Cache(e.to_string()))?;
        let mut cur = Cursor { buf: &buf, pos: 0 };
        if cur.take(8)? != CACHE_MAGIC {
            return Err(Error::Cache("bad magic".into()));
        }
        let version = cur.u32()?;
        if version != CACHE_VERSION {
            return Err(Error::Cache(format!("unsupported version {version}")));
        }
        let chart_hash = cur.u64()?;
        let gamma = cur.f64()?;
        let variant = Variant::from_code(cur.take(1)?[0]).ok_or_else(|| Error::Cache("bad variant".into()))?;
        let nx = cur.u32()? as usize;
        let ny = cur.u32()? as usize;
        let domain = Domain::new(cur.f64()?, cur.f64()?);
        let center = Vec2::new(cur.f64()?, cur.f64()?);
        let radius = cur.f64()?;
        let iterations = cur.u32()? as usize;
        let hist_len = cur.u32()? as usize;
        let residual_history = (0..hist_len).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
        let values = (0..nx * ny).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
        if cur.pos != buf.len() {
            return Err(Error::Cache("trailing bytes".into()));
        }
        if !domain.is_valid() || !(radius > 0.0) || nx < 2 || ny < 2 {
            return Err(Error::Cache("invalid header fields".into()));
        }
        Ok(ValueGrid {
            values,
            nx,
            ny,
            domain,
            gamma,
            chart_hash,
            target: TargetRegion { center, radius },
            variant,
            iterations,
            residual_history,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = export::create(path)?;
        self.write_cache(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_cache(std::io::BufReader::new(f))
    }

    /// Greyscale heatmap, north up. Land is white; the remaining values are
    /// stretched over the darker range.
    pub fn heatmap_pixels(&self) -> Vec<u8> {
        let ocean = self.values.iter().copied().filter(|&v| v < CRASH_COST);
        let (lo, hi) = ocean.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let mut px = Vec::with_capacity(self.nx * self.ny);
        for j in (0..self.ny).rev() {
            for i in 0..self.nx {
                let v = self.at(i, j);
                px.push(if v >= CRASH_COST { 255 } else { gray(v, lo, hi, 230) });
            }
        }
        px
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        export::write_pgm_file(path, self.nx, self.ny, &self.heatmap_pixels())
    }

    /// One CSV row per grid row `j`, columns ordered by `i`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for j in 0..self.ny {
            let row: Vec<String> = (0..self.nx).map(|i| fmt_exact(self.at(i, j))).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.buf.len() {
            return Err(Error::Cache("truncated".into()));
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
