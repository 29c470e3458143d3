//! Belief tracking, the uncertainty-averaged Q-function and the
//! controlled-sensing policy loop.
//!
//! The agent's belief is a point estimate of position and local current
//! with scalar radii `sigma_p` and `sigma_w`. Each action is scored by the
//! uniform average of `c + gamma V(endpoint)` over the disc of position
//! offsets times the disc of current offsets, each endpoint following the
//! constant-current motion model. The agent measures when even the best
//! action's expected cost exceeds a measurement's price.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::clearance::Terrain;
use crate::currents::{water_current, CurrentSpec};
use crate::dynamics::{
    env_step, fuel_cost, CostBreakdown, Integrator, MeasurementKind, MovementAction, TargetRegion,
    ACTION_COUNT, CRASH_COST, HEADINGS, TARGET_COST,
};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::valueiter::{argmin, ValueGrid};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    pub est_pos: Vec2,
    pub sigma_p: f64,
    pub est_current: Vec2,
    pub sigma_w: f64,
    pub last_gps_pos: Vec2,
    pub steps_since_gps: usize,
    /// Sum of movement vectors since the last GPS fix.
    pub movement_sum: Vec2,
    /// Unwrapped dead-reckoned displacement since the last GPS fix.
    pub predicted_disp: Vec2,
}

impl Belief {
    /// Exact knowledge of position and local current.
    pub fn certain(pos: Vec2, current: Vec2) -> Self {
        Belief {
            est_pos: pos,
            sigma_p: 0.0,
            est_current: current,
            sigma_w: 0.0,
            last_gps_pos: pos,
            steps_since_gps: 0,
            movement_sum: Vec2::ZERO,
            predicted_disp: Vec2::ZERO,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyParams {
    /// Increment of `sigma_w` per action.
    pub growth_rate: f64,
    pub gamma: f64,
    /// Lattice points per axis over each disc; odd.
    pub quadrature_resolution: usize,
    pub gps_cost: f64,
    pub profiler_cost: f64,
    pub step_cap: usize,
    /// Factor applied to `sigma_w` by a GPS fix.
    pub gps_current_decay: f64,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams {
            growth_rate: 0.0,
            gamma: 0.95,
            quadrature_resolution: 5,
            gps_cost: MeasurementKind::Gps.default_cost(),
            profiler_cost: MeasurementKind::CurrentProfiler.default_cost(),
            step_cap: 25,
            gps_current_decay: 0.5,
        }
    }
}

impl PolicyParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(0.0..=1.0).contains(&self.growth_rate) {
            return bad("growth_rate must lie in [0, 1]");
        }
        if self.quadrature_resolution == 0 || self.quadrature_resolution % 2 == 0 {
            return bad("quadrature_resolution must be an odd positive integer");
        }
        if !(self.gps_cost > 0.0 && self.profiler_cost > 0.0) {
            return bad("measurement costs must be positive");
        }
        if !(0.0..1.0).contains(&self.gps_current_decay) || self.gps_current_decay == 0.0 {
            return bad("gps_current_decay must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn cost_of(&self, kind: MeasurementKind) -> f64 {
        match kind {
            MeasurementKind::Gps => self.gps_cost,
            MeasurementKind::CurrentProfiler => self.profiler_cost,
        }
    }
}

/// Everything the policy reads besides the belief.
#[derive(Clone, Copy)]
pub struct PolicyContext<'a> {
    pub terrain: &'a Terrain,
    pub grid: &'a ValueGrid,
    pub target: &'a TargetRegion,
    pub current: &'a CurrentSpec,
    pub params: &'a PolicyParams,
    pub integrator: Integrator,
}

impl<'a> PolicyContext<'a> {
    pub fn new(
        terrain: &'a Terrain,
        grid: &'a ValueGrid,
        target: &'a TargetRegion,
        current: &'a CurrentSpec,
        params: &'a PolicyParams,
    ) -> Self {
        PolicyContext {
            terrain,
            grid,
            target,
            current,
            params,
            integrator: Integrator::default(),
        }
    }
}

/// Centered `q x q` lattice over the disc's bounding square, keeping points
/// inside the disc. A zero radius collapses to the origin.
pub fn disc_lattice(radius: f64, q: usize) -> Vec<Vec2> {
    if radius <= 0.0 || q <= 1 {
        return vec![Vec2::ZERO];
    }
    let unit = |k: usize| 2.0 * k as f64 / (q - 1) as f64 - 1.0;
    let mut pts = Vec::new();
    for a in 0..q {
        for b in 0..q {
            let (u, v) = (unit(a), unit(b));
            if u * u + v * v <= 1.0 + 1e-12 {
                pts.push(Vec2::new(radius * u, radius * v));
            }
        }
    }
    pts
}

/// Sample sets for one belief, shared by every action.
pub struct QuadratureSamples {
    starts: Vec<Vec2>,
    /// Distinct clamped currents and how many lattice points map to each.
    currents: Vec<(Vec2, f64)>,
    total_weight: f64,
}

impl QuadratureSamples {
    pub fn new(belief: &Belief, w_max: f64, q: usize) -> Self {
        let starts: Vec<Vec2> = disc_lattice(belief.sigma_p, q)
            .into_iter()
            .map(|o| belief.est_pos + o)
            .collect();
        let mut currents: Vec<(Vec2, f64)> = Vec::new();
        for o in disc_lattice(belief.sigma_w, q) {
            let w = (belief.est_current + o).clamp_norm(w_max);
            match currents.iter_mut().find(|(c, _)| *c == w) {
                Some((_, n)) => *n += 1.0,
                None => currents.push((w, 1.0)),
            }
        }
        let total_weight = starts.len() as f64 * currents.iter().map(|c| c.1).sum::<f64>();
        QuadratureSamples {
            starts,
            currents,
            total_weight,
        }
    }

    pub fn len(&self) -> usize {
        self.starts.len() * self.currents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `c + gamma V(endpoint)` for one start/current sample; a start on land
/// counts as a crash.
pub fn sample_value(ctx: &PolicyContext<'_>, start: Vec2, m: Vec2, w: Vec2) -> f64 {
    let fuel = fuel_cost(m);
    if ctx.terrain.is_land(start) {
        return CRASH_COST + fuel;
    }
    match ctx.integrator.constant_endpoint(ctx.terrain, start, m + w) {
        None => CRASH_COST + fuel,
        Some(end) if ctx.target.contains(ctx.terrain, end) => TARGET_COST + fuel,
        Some(end) => fuel + ctx.params.gamma * ctx.grid.lookup(end),
    }
}

fn q_with_samples(ctx: &PolicyContext<'_>, samples: &QuadratureSamples, m: Vec2) -> f64 {
    let mut acc = 0.0;
    for &s in &samples.starts {
        for &(w, n) in &samples.currents {
            acc += n * sample_value(ctx, s, m, w);
        }
    }
    acc / samples.total_weight
}

/// Uncertainty-averaged Q-value of movement vector `m`.
pub fn q_uncertain(belief: &Belief, m: Vec2, ctx: &PolicyContext<'_>) -> f64 {
    let samples = QuadratureSamples::new(belief, ctx.current.w_max, ctx.params.quadrature_resolution);
    q_with_samples(ctx, &samples, m)
}

/// Q-values for all 96 actions in action order.
pub fn q_all(belief: &Belief, ctx: &PolicyContext<'_>) -> Vec<f64> {
    let samples = QuadratureSamples::new(belief, ctx.current.w_max, ctx.params.quadrature_resolution);
    let mut out = vec![0.0; ACTION_COUNT];
    // the 16 zero-throttle actions coincide
    let idle = q_with_samples(ctx, &samples, Vec2::ZERO);
    out[..HEADINGS].iter_mut().for_each(|q| *q = idle);
    for (idx, q) in out.iter_mut().enumerate().skip(HEADINGS) {
        *q = q_with_samples(ctx, &samples, MovementAction::from_index(idx).vector());
    }
    out
}

/// Grows the uncertainties and dead-reckons one action forward.
pub fn propagate_belief(belief: &Belief, m: Vec2, params: &PolicyParams, current: &CurrentSpec, terrain: &Terrain) -> Belief {
    let mut b = *belief;
    b.sigma_w = (b.sigma_w + params.growth_rate).min(current.w_max);
    b.sigma_p += b.sigma_w;
    let v = m + b.est_current;
    b.est_pos = terrain.domain.wrap(b.est_pos + v * 1.0);
    b.predicted_disp += v;
    b.movement_sum += m;
    b.steps_since_gps += 1;
    b
}

/// GPS fix: exact position, and an averaged current estimate from the
/// displacement since the previous fix.
pub fn apply_gps(belief: &Belief, true_pos: Vec2, params: &PolicyParams, current: &CurrentSpec, terrain: &Terrain) -> Belief {
    let mut b = *belief;
    if b.steps_since_gps > 0 {
        // Resolve the periodic image by its distance from the prediction.
        let predicted = b.last_gps_pos + b.predicted_disp;
        let actual_disp = b.predicted_disp + terrain.domain.delta(true_pos, predicted);
        let drift = (actual_disp - b.movement_sum) / b.steps_since_gps as f64;
        b.est_current = drift.clamp_norm(current.w_max);
        b.sigma_w *= params.gps_current_decay;
    }
    b.est_pos = true_pos;
    b.sigma_p = 0.0;
    b.last_gps_pos = true_pos;
    b.steps_since_gps = 0;
    b.movement_sum = Vec2::ZERO;
    b.predicted_disp = Vec2::ZERO;
    b
}

/// Current-profiler reading at the true position; position is unaffected.
pub fn apply_profiler(belief: &Belief, terrain: &Terrain, current: &CurrentSpec, true_pos: Vec2) -> Belief {
    let mut b = *belief;
    b.est_current = water_current(terrain, current, true_pos).clamp_norm(current.w_max);
    b.sigma_w = 0.0;
    b
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub measurements: Vec<MeasurementKind>,
    pub action: MovementAction,
    /// Minimum Q before any measurement.
    pub v_min: f64,
    /// Q of the chosen action.
    pub q: f64,
    /// Belief after the measurements.
    pub belief: Belief,
}

/// One pass of the sensing policy: measure if warranted, then pick the
/// action with the lowest expected value.
pub fn select_action(belief: &Belief, true_pos: Vec2, ctx: &PolicyContext<'_>) -> Decision {
    let p = ctx.params;
    let qs = q_all(belief, ctx);
    let (mut best, v_min) = argmin(&qs);
    let mut q_best = v_min;

    let est_in_target = ctx.target.contains(ctx.terrain, belief.est_pos) || ctx.grid.lookup(belief.est_pos) <= -1.0;
    let mut b = *belief;
    let mut measurements = Vec::new();
    if v_min > p.gps_cost + p.profiler_cost {
        b = apply_gps(&b, true_pos, p, ctx.current, ctx.terrain);
        b = apply_profiler(&b, ctx.terrain, ctx.current, true_pos);
        measurements.extend([MeasurementKind::Gps, MeasurementKind::CurrentProfiler]);
    } else if v_min > p.gps_cost || est_in_target {
        b = apply_gps(&b, true_pos, p, ctx.current, ctx.terrain);
        measurements.push(MeasurementKind::Gps);
    } else if v_min > p.profiler_cost {
        b = apply_profiler(&b, ctx.terrain, ctx.current, true_pos);
        measurements.push(MeasurementKind::CurrentProfiler);
    }
    if !measurements.is_empty() {
        (best, q_best) = argmin(&q_all(&b, ctx));
    }
    Decision {
        measurements,
        action: MovementAction::from_index(best),
        v_min,
        q: q_best,
        belief: b,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Crash,
    Timeout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based action count.
    pub step: usize,
    pub true_pos: Vec2,
    pub belief_before: Belief,
    pub belief_measured: Belief,
    pub measurements: Vec<MeasurementKind>,
    pub action: MovementAction,
    pub v_min: f64,
    pub q: f64,
    pub endpoint: Vec2,
    pub t_prime: f64,
    pub cost: CostBreakdown,
    pub terminal: bool,
    #[serde(skip)]
    pub path: Vec<(f64, Vec2)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub start: Vec2,
    pub steps: Vec<StepRecord>,
    pub outcome: Outcome,
    pub total_cost: f64,
    pub measurement_cost: f64,
}

impl TrajectoryLog {
    pub fn actions(&self) -> usize {
        self.steps.len()
    }

    /// Terminal positional cost and the step it occurred on, if any.
    pub fn terminal(&self) -> Option<(usize, f64)> {
        self.steps
            .last()
            .filter(|s| s.terminal)
            .map(|s| (s.step, s.cost.position))
    }

    pub fn measurement_count(&self) -> usize {
        self.steps.iter().map(|s| s.measurements.len()).sum()
    }

    /// Line-delimited JSON: one object per step, then a summary line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for s in &self.steps {
            let b = &s.belief_measured;
            let row = serde_json::json!({
                "step": s.step,
                "est_x": b.est_pos.x,
                "est_y": b.est_pos.y,
                "sigma_p": b.sigma_p,
                "est_wx": b.est_current.x,
                "est_wy": b.est_current.y,
                "sigma_w": b.sigma_w,
                "x": s.true_pos.x,
                "y": s.true_pos.y,
                "heading": s.action.heading,
                "throttle": s.action.throttle,
                "measurements": s.measurements,
                "cost_position": s.cost.position,
                "cost_fuel": s.cost.fuel,
                "cost_measurement": s.cost.measurement,
                "end_x": s.endpoint.x,
                "end_y": s.endpoint.y,
                "t_prime": s.t_prime,
            });
            writeln!(out, "{row}")?;
        }
        let summary = serde_json::json!({
            "outcome": self.outcome,
            "steps": self.actions(),
            "total_cost": self.total_cost,
            "measurement_cost": self.measurement_cost,
            "start_x": self.start.x,
            "start_y": self.start.y,
        });
        writeln!(out, "{summary}")
    }
}

/// Runs the sensing policy from `start` until arrival, crash or the step cap.
///
/// # Panics
/// If `start` is on land or inside the target.
pub fn run_trajectory(ctx: &PolicyContext<'_>, start: Vec2) -> TrajectoryLog {
    let w0 = water_current(ctx.terrain, ctx.current, start).clamp_norm(ctx.current.w_max);
    let mut belief = Belief::certain(start, w0);
    let mut true_pos = start;
    let mut steps = Vec::new();
    let mut total_cost = 0.0;
    let mut measurement_cost = 0.0;
    let mut outcome = Outcome::Timeout;

    for step in 1..=ctx.params.step_cap {
        let decision = select_action(&belief, true_pos, ctx);
        let result = env_step(true_pos, decision.action, ctx.terrain, ctx.current, ctx.target);
        let mut cost = result.cost;
        cost.measurement = decision.measurements.iter().fold(0.0, |acc, &k| acc + ctx.params.cost_of(k));
        total_cost += cost.total();
        measurement_cost += cost.measurement;
        steps.push(StepRecord {
            step,
            true_pos,
            belief_before: belief,
            belief_measured: decision.belief,
            measurements: decision.measurements,
            action: decision.action,
            v_min: decision.v_min,
            q: decision.q,
            endpoint: result.endpoint,
            t_prime: result.t_prime,
            cost,
            terminal: result.terminal,
            path: result.path,
        });
        if result.terminal {
            outcome = if cost.position < 0.0 { Outcome::Success } else { Outcome::Crash };
            break;
        }
        belief = propagate_belief(&decision.belief, decision.action.vector(), ctx.params, ctx.current, ctx.terrain);
        true_pos = result.endpoint;
    }
    TrajectoryLog {
        start,
        steps,
        outcome,
        total_cost,
        measurement_cost,
    }
}
