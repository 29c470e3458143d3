//! Action set, motion through the current field and transition costs.
//!
//! An action lasts one time unit. The submarine follows
//! `dx/dt = M + W(x)` and stops at the first land crossing, whose time is
//! refined by bisection.

use std::f64::consts::TAU;
use std::io::Write;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::chart::{Chart, LAND_LEVEL, MAX_ISLANDS};
use crate::clearance::Terrain;
use crate::currents::{max_signed_into, scaled_current, sign_mask, CurrentSpec};
use crate::geom::Vec2;

pub const HEADINGS: usize = 16;
pub const THROTTLES: usize = 6;
pub const ACTION_COUNT: usize = HEADINGS * THROTTLES;

pub const CRASH_COST: f64 = 100.0;
pub const TARGET_COST: f64 = -1.0;
pub const FUEL_RATE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MovementAction {
    pub heading: u8,
    pub throttle: u8,
}

impl MovementAction {
    pub fn new(heading: u8, throttle: u8) -> Self {
        assert!((heading as usize) < HEADINGS && (throttle as usize) < THROTTLES);
        MovementAction { heading, throttle }
    }

    /// Position in [`movement_vectors`] (throttle-major).
    pub fn index(self) -> usize {
        self.throttle as usize * HEADINGS + self.heading as usize
    }

    pub fn from_index(index: usize) -> Self {
        assert!(index < ACTION_COUNT);
        MovementAction::new((index % HEADINGS) as u8, (index / HEADINGS) as u8)
    }

    /// Speed through the water, linear in the throttle index.
    pub fn speed(self) -> f64 {
        self.throttle as f64 / (THROTTLES - 1) as f64
    }

    /// Throttle setting; speed is its square root.
    pub fn throttle_setting(self) -> f64 {
        self.speed() * self.speed()
    }

    pub fn vector(self) -> Vec2 {
        let s = self.speed();
        if s == 0.0 {
            return Vec2::ZERO;
        }
        let angle = TAU * self.heading as f64 / HEADINGS as f64;
        Vec2::new(s * angle.cos(), s * angle.sin())
    }
}

/// All 96 movement actions, throttle-major.
pub fn movement_vectors() -> Vec<MovementAction> {
    (0..ACTION_COUNT).map(MovementAction::from_index).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementKind {
    Gps,
    CurrentProfiler,
}

impl MeasurementKind {
    pub fn default_cost(self) -> f64 {
        match self {
            MeasurementKind::Gps => 0.45,
            MeasurementKind::CurrentProfiler => 0.1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementAction {
    pub kind: MeasurementKind,
    pub cost: f64,
}

impl MeasurementAction {
    pub fn gps() -> Self {
        MeasurementAction {
            kind: MeasurementKind::Gps,
            cost: MeasurementKind::Gps.default_cost(),
        }
    }

    pub fn profiler() -> Self {
        MeasurementAction {
            kind: MeasurementKind::CurrentProfiler,
            cost: MeasurementKind::CurrentProfiler.default_cost(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetRegion {
    pub center: Vec2,
    pub radius: f64,
}

impl TargetRegion {
    pub const DEFAULT_RADIUS: f64 = 0.5;

    pub fn new(center: Vec2, radius: f64) -> Self {
        assert!(radius > 0.0, "target radius must be positive");
        TargetRegion { center, radius }
    }

    pub fn contains(&self, terrain: &Terrain, p: Vec2) -> bool {
        terrain.domain.distance(p, self.center) <= self.radius
    }
}

/// Fixed-step integrator settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integrator {
    pub substeps: usize,
    pub bisect_iters: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator {
            substeps: 32,
            bisect_iters: 10,
        }
    }
}

/// Outcome of integrating one action.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Motion {
    /// Wrapped into the fundamental domain.
    pub endpoint: Vec2,
    /// `1` unless the action ran aground.
    pub t_prime: f64,
    pub crashed: bool,
    /// `(t, position)` at the start, after every completed substep, and at
    /// the crash point if any. Empty unless tracing was requested.
    pub path: Vec<(f64, Vec2)>,
}

/// Largest representable time below one; keeps `t' < 1` for every crash.
const BEFORE_ONE: f64 = 1.0 - f64::EPSILON;

/// Largest velocity change over a step accepted without an error check.
const SMOOTH_CHANGE: f64 = 0.005;
/// Accepted disagreement between one RK4 step and two half steps.
const STEP_TOL: f64 = 1e-9;
/// Halvings allowed below a substep; reached only at field discontinuities.
const MAX_REFINE: u32 = 24;
/// Step rejections allowed per action. Paths chattering along a jump of `W`
/// would otherwise be refined without end.
const REFINE_BUDGET: u32 = 256;

/// Classical RK4 step; `k1` is the field at `x`.
#[inline]
fn rk4<F: Fn(Vec2) -> Vec2>(field: &F, x: Vec2, k1: Vec2, h: f64) -> Vec2 {
    let k2 = field(x + k1 * (0.5 * h));
    let k3 = field(x + k2 * (0.5 * h));
    let k4 = field(x + k3 * h);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Velocity `M + W(x)` and a key of the smooth piece of `W` containing `x`:
/// the optimal sign pattern, plus a flag where the magnitude cutoff applies.
/// `W` jumps where the pattern changes and has a kink at the cutoff.
fn motion_field(chart: &Chart, spec: &CurrentSpec, m: Vec2, x: Vec2) -> (Vec2, u32) {
    let (f, grads) = chart.island_gradients(x);
    let mut signs = [1.0; MAX_ISLANDS];
    let signs = &mut signs[..grads.len()];
    let sum = max_signed_into(&grads, signs);
    let w = scaled_current(spec, f, sum.perp());
    let cut = if w == Vec2::ZERO { 1 << 31 } else { 0 };
    (m + w, sign_mask(signs) | cut)
}

impl Integrator {
    /// Integrates `dx/dt = m + W(x)` over one action with RK4.
    /// `current = None`, or a calm spec, means `W == 0`.
    pub fn integrate(
        &self,
        terrain: &Terrain,
        current: Option<&CurrentSpec>,
        start: Vec2,
        m: Vec2,
        trace: bool,
    ) -> Motion {
        match current {
            Some(spec) if !spec.is_calm() => self.integrate_field(terrain, spec, start, m, trace),
            _ => self.integrate_constant(terrain, start, m, Vec2::ZERO, trace),
        }
    }

    /// Endpoint of constant-velocity motion, or `None` if it crashes. Gives
    /// the same verdict as [`Integrator::integrate_constant`] but skips the
    /// crash-time search.
    pub fn constant_endpoint(&self, terrain: &Terrain, start: Vec2, v: Vec2) -> Option<Vec2> {
        let end = start + v;
        if !terrain.box_clear(start, end) {
            let n = self.substeps as f64;
            let at = |k: usize| start + v * (k as f64 / n);
            // Only the verdict matters, so settle what the raster can before
            // paying for exact evaluations.
            let mut undecided: SmallVec<[usize; 64]> = SmallVec::new();
            for k in 1..=self.substeps {
                match terrain.clearance().classify(at(k)) {
                    Some(true) => return None,
                    Some(false) => {}
                    None => undecided.push(k),
                }
            }
            if undecided.into_iter().any(|k| terrain.chart().is_land(at(k))) {
                return None;
            }
        }
        Some(terrain.domain.wrap(end))
    }

    /// Straight-line motion under a current held fixed at `w` for the whole
    /// action. RK4 is exact for a constant field, so positions are evaluated
    /// in closed form.
    pub fn integrate_constant(
        &self,
        terrain: &Terrain,
        start: Vec2,
        m: Vec2,
        w: Vec2,
        trace: bool,
    ) -> Motion {
        let v = m + w;
        let at = |t: f64| start + v * t;
        let n = self.substeps;
        let mut path = Vec::new();
        if trace {
            path.push((0.0, terrain.domain.wrap(start)));
        }
        let clear = terrain.box_clear(start, at(1.0));
        for k in 1..=n {
            let t = k as f64 / n as f64;
            let p = at(t);
            if !clear && terrain.is_land(p) {
                let mut lo = (k - 1) as f64 / n as f64;
                let mut hi = t;
                for _ in 0..self.bisect_iters {
                    let mid = 0.5 * (lo + hi);
                    if terrain.is_land(at(mid)) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let end = terrain.domain.wrap(at(hi));
                if trace {
                    path.push((hi, end));
                }
                return Motion {
                    endpoint: end,
                    t_prime: hi.min(BEFORE_ONE),
                    crashed: true,
                    path,
                };
            }
            if trace {
                path.push((t, terrain.domain.wrap(p)));
            }
        }
        Motion {
            endpoint: terrain.domain.wrap(at(1.0)),
            t_prime: 1.0,
            crashed: false,
            path,
        }
    }

    /// RK4 over the fixed substep grid. A step whose stages stay in one
    /// smooth piece of the field with little change in velocity is taken
    /// as is; otherwise it is checked against two half steps and halved
    /// until they agree, which resolves the jumps of `W`.
    fn integrate_field(&self, terrain: &Terrain, spec: &CurrentSpec, start: Vec2, m: Vec2, trace: bool) -> Motion {
        let chart = terrain.chart();
        let eval = |p: Vec2| motion_field(chart, spec, m, p);
        let free = |p: Vec2| eval(p).0;
        let n = self.substeps;
        let h = 1.0 / n as f64;
        let min_dt = h / (1u64 << MAX_REFINE) as f64;
        let mut path = Vec::new();
        if trace {
            path.push((0.0, terrain.domain.wrap(start)));
        }
        let mut x = terrain.domain.wrap(start);
        let (mut kx, mut piece) = eval(x);
        let mut t = 0.0;
        let mut dt = h;
        let mut budget = REFINE_BUDGET;

        for k in 1..=n {
            let t_grid = k as f64 * h;
            while t < t_grid {
                let step = dt.min(t_grid - t);
                let k2 = eval(x + kx * (0.5 * step));
                let k3 = eval(x + k2.0 * (0.5 * step));
                let k4 = eval(x + k3.0 * step);
                let mut next = x + (kx + k2.0 * 2.0 + k3.0 * 2.0 + k4.0) * (step / 6.0);
                let mut k_next = eval(next);
                let smooth = [k2.1, k3.1, k4.1, k_next.1].iter().all(|&p| p == piece)
                    && (k_next.0 - kx).norm() <= SMOOTH_CHANGE;
                if !smooth {
                    let mid = rk4(&free, x, kx, 0.5 * step);
                    let end = rk4(&free, mid, free(mid), 0.5 * step);
                    if (end - next).norm() > STEP_TOL && step > min_dt && budget > 0 {
                        budget -= 1;
                        dt = 0.5 * step;
                        continue;
                    }
                    next = end;
                    k_next = eval(end);
                }

                if terrain.is_land(next) {
                    let (mut lo, mut hi, mut x_hi) = (0.0, step, next);
                    for _ in 0..self.bisect_iters {
                        let mid = 0.5 * (lo + hi);
                        let x_mid = rk4(&free, x, kx, mid);
                        if terrain.is_land(x_mid) {
                            hi = mid;
                            x_hi = x_mid;
                        } else {
                            lo = mid;
                        }
                    }
                    let end = terrain.domain.wrap(x_hi);
                    let t_hit = t + hi;
                    if trace {
                        path.push((t_hit, end));
                    }
                    return Motion {
                        endpoint: end,
                        t_prime: t_hit.min(BEFORE_ONE),
                        crashed: true,
                        path,
                    };
                }

                x = next;
                (kx, piece) = k_next;
                t = if step >= t_grid - t { t_grid } else { t + step };
                dt = (2.0 * step).min(h);
            }
            if trace {
                path.push((t_grid, terrain.domain.wrap(x)));
            }
        }
        Motion {
            endpoint: terrain.domain.wrap(x),
            t_prime: 1.0,
            crashed: false,
            path,
        }
    }
}

/// [`Integrator::integrate`] with the default settings and a traced path.
pub fn integrate_motion(
    terrain: &Terrain,
    current: Option<&CurrentSpec>,
    start: Vec2,
    m: Vec2,
) -> Motion {
    Integrator::default().integrate(terrain, current, start, m, true)
}

/// Constant-current variant used by the policy's expectation.
pub fn integrate_constant_current(terrain: &Terrain, start: Vec2, m: Vec2, w: Vec2) -> Motion {
    Integrator::default().integrate_constant(terrain, start, m, w, true)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub position: f64,
    pub fuel: f64,
    pub measurement: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.position + self.fuel + self.measurement
    }

    pub fn is_terminal(&self) -> bool {
        self.position != 0.0
    }
}

/// Positional cost of where an action ended.
#[inline]
pub fn positional_cost(terrain: &Terrain, target: &TargetRegion, motion: &Motion) -> f64 {
    if motion.crashed {
        CRASH_COST
    } else if target.contains(terrain, motion.endpoint) {
        TARGET_COST
    } else {
        0.0
    }
}

#[inline]
pub fn fuel_cost(m: Vec2) -> f64 {
    FUEL_RATE * m.norm()
}

/// Cost of one transition; positional cost is read at the endpoint.
pub fn transition_cost(
    terrain: &Terrain,
    target: &TargetRegion,
    motion: &Motion,
    action: MovementAction,
    measurements: &[MeasurementAction],
) -> CostBreakdown {
    CostBreakdown {
        position: positional_cost(terrain, target, motion),
        fuel: fuel_cost(action.vector()),
        measurement: measurements.iter().fold(0.0, |acc, m| acc + m.cost),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub endpoint: Vec2,
    pub t_prime: f64,
    pub path: Vec<(f64, Vec2)>,
    pub cost: CostBreakdown,
    pub terminal: bool,
}

/// Advances the true state by one movement action in the true field.
///
/// # Panics
/// If `true_state` is already terminal (on land or inside the target).
pub fn env_step(
    true_state: Vec2,
    action: MovementAction,
    terrain: &Terrain,
    current: &CurrentSpec,
    target: &TargetRegion,
) -> StepResult {
    assert!(
        terrain.land_height(true_state) < LAND_LEVEL && !target.contains(terrain, true_state),
        "env_step called on a terminal state {true_state:?}"
    );
    let motion = integrate_motion(terrain, Some(current), true_state, action.vector());
    let cost = transition_cost(terrain, target, &motion, action, &[]);
    StepResult {
        endpoint: motion.endpoint,
        t_prime: motion.t_prime,
        terminal: cost.is_terminal(),
        path: motion.path,
        cost,
    }
}

/// Writes `step,t,x,y` rows for a sequence of traced actions.
pub fn write_path_csv<'a, W: Write>(
    mut out: W,
    steps: impl IntoIterator<Item = (usize, &'a [(f64, Vec2)])>,
) -> std::io::Result<()> {
    writeln!(out, "step,t,x,y")?;
    for (step, path) in steps {
        for (t, p) in path {
            writeln!(out, "{step},{t},{},{}", p.x, p.y)?;
        }
    }
    Ok(())
}
