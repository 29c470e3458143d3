//! Hidden water-current field.
//!
//! The raw direction field rotates the sign-maximized sum of per-island
//! gradients by 90 degrees. Its magnitude is then remapped so the current is
//! strongest where the raw field is weakest and vanishes on land or where
//! the raw field exceeds `w_max`.

use serde::{Deserialize, Serialize};

use crate::chart::{Chart, LAND_LEVEL};
use crate::geom::Vec2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurrentSpec {
    pub w_max: f64,
    /// Radially clamp `|W|` to `w_max`. Off by default, which leaves the
    /// literal magnitude `(w_max - |w|) / (2 w_max)`.
    #[serde(default)]
    pub clamp_magnitude: bool,
}

impl CurrentSpec {
    pub fn new(w_max: f64) -> Self {
        CurrentSpec {
            w_max,
            clamp_magnitude: false,
        }
    }

    pub fn is_calm(&self) -> bool {
        self.w_max == 0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignedSum {
    /// `+1.0` or `-1.0` per input vector.
    pub signs: Vec<f64>,
    pub resultant: Vec2,
}

/// Chooses signs `s_i` maximizing `|sum s_i v_i|`.
///
/// For a unit direction `u`, the best pattern aligned with `u` is
/// `s_i = sign(v_i . u)`; that pattern only changes when `u` crosses a
/// direction perpendicular to some `v_i`. Sweeping `u` once around the
/// circle therefore visits every candidate optimum in `O(N log N)`.
/// Equal norms prefer `+1` on the lowest index.
pub fn maximize_signed_sum(vectors: &[Vec2]) -> SignedSum {
    let mut signs = vec![1.0; vectors.len()];
    let resultant = max_signed_into(vectors, &mut signs);
    SignedSum { signs, resultant }
}

const TIE_REL: f64 = 1e-12;

fn lex_prefers(candidate: &[f64], incumbent: &[f64]) -> bool {
    for (c, i) in candidate.iter().zip(incumbent) {
        if c != i {
            return *c > *i;
        }
    }
    false
}

fn exact_sum(vectors: &[Vec2], signs: &[f64]) -> Vec2 {
    vectors
        .iter()
        .zip(signs)
        .fold(Vec2::ZERO, |acc, (v, s)| acc + *v * *s)
}

/// Writes the optimal signs into `signs` and returns the resultant.
pub(crate) fn max_signed_into(vectors: &[Vec2], signs: &mut [f64]) -> Vec2 {
    debug_assert_eq!(vectors.len(), signs.len());
    signs.iter_mut().for_each(|s| *s = 1.0);

    // (boundary angle in [0, 2pi), vector index)
    let mut events: Vec<(f64, usize)> = Vec::with_capacity(2 * vectors.len());
    let tau = std::f64::consts::TAU;
    for (i, v) in vectors.iter().enumerate() {
        if v.x == 0.0 && v.y == 0.0 {
            continue;
        }
        let theta = v.y.atan2(v.x);
        for off in [std::f64::consts::FRAC_PI_2, -std::f64::consts::FRAC_PI_2] {
            events.push(((theta + off).rem_euclid(tau), i));
        }
    }
    if events.is_empty() {
        return Vec2::ZERO;
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Start in the middle of the widest arc so the initial pattern is
    // unambiguous.
    let m = events.len();
    let mut widest = (0, f64::NEG_INFINITY);
    for k in 0..m {
        let next = if k + 1 < m { events[k + 1].0 } else { events[0].0 + tau };
        let gap = next - events[k].0;
        if gap > widest.1 {
            widest = (k, gap);
        }
    }
    let phi = events[widest.0].0 + 0.5 * widest.1;
    let u = Vec2::new(phi.cos(), phi.sin());
    let mut live = vec![1.0; vectors.len()];
    for (i, v) in vectors.iter().enumerate() {
        if v.dot(u) < 0.0 {
            live[i] = -1.0;
        }
    }
    let mut r = exact_sum(vectors, &live);
    let mut best_n2 = r.norm_sq();
    signs.copy_from_slice(&live);

    for step in 1..=m {
        let (_, i) = events[(widest.0 + step) % m];
        r -= vectors[i] * (2.0 * live[i]);
        live[i] = -live[i];
        let n2 = r.norm_sq();
        let tol = TIE_REL * best_n2.max(f64::MIN_POSITIVE);
        if n2 > best_n2 + tol || ((n2 - best_n2).abs() <= tol && lex_prefers(&live, signs)) {
            best_n2 = best_n2.max(n2);
            signs.copy_from_slice(&live);
        }
    }
    exact_sum(vectors, signs)
}

/// Raw, unscaled direction field `w(p)`: the rotated signed gradient sum.
/// Also returns the land height at `p`.
pub fn raw_direction(chart: &Chart, p: Vec2) -> (f64, Vec2) {
    let (f, grads) = chart.island_gradients(p);
    let mut signs = [1.0; crate::chart::MAX_ISLANDS];
    let sum = max_signed_into(&grads, &mut signs[..grads.len()]);
    (f, sum.perp())
}

/// Water current `W(p)` in chart units per action.
pub fn water_current(chart: &Chart, spec: &CurrentSpec, p: Vec2) -> Vec2 {
    if spec.w_max <= 0.0 {
        return Vec2::ZERO;
    }
    let (f, w) = raw_direction(chart, p);
    scaled_current(spec, f, w)
}

/// Applies the magnitude law to the raw field `w` at land height `f`.
#[inline]
pub(crate) fn scaled_current(spec: &CurrentSpec, f: f64, w: Vec2) -> Vec2 {
    if spec.w_max <= 0.0 || f >= LAND_LEVEL {
        return Vec2::ZERO;
    }
    let n = w.norm();
    if n == 0.0 || n > spec.w_max {
        return Vec2::ZERO;
    }
    let current = w * ((spec.w_max - n) / (2.0 * spec.w_max * n));
    if spec.clamp_magnitude {
        current.clamp_norm(spec.w_max)
    } else {
        current
    }
}

/// Bit `i` set when island `i` carries sign `-1`.
pub(crate) fn sign_mask(signs: &[f64]) -> u32 {
    signs
        .iter()
        .enumerate()
        .filter(|(_, s)| **s < 0.0)
        .fold(0, |m, (i, _)| m | (1 << i))
}
