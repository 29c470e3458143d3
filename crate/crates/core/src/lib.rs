//! Navigation of a submarine across procedurally generated island charts
//! under hidden water currents, with position and current uncertainty.
//!
//! The crate covers chart and current generation, the motion model, value
//! iteration over a periodic grid, a belief-averaged Q-function with
//! controlled sensing (GPS and current profiler), and a parameter sweep
//! harness.

pub mod belief;
pub mod chart;
pub mod clearance;
pub mod currents;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod geom;
pub mod harness;
pub mod valueiter;

pub use belief::{
    apply_gps, apply_profiler, propagate_belief, q_uncertain, run_trajectory, select_action, Belief, Outcome,
    PolicyContext, PolicyParams, TrajectoryLog,
};
pub use chart::{sample_chart, Chart, DensityBand, Island, LAND_LEVEL};
pub use clearance::Terrain;
pub use currents::{maximize_signed_sum, water_current, CurrentSpec};
pub use dynamics::{
    env_step, CostBreakdown, Integrator, MeasurementKind, MovementAction, StepResult, TargetRegion, ACTION_COUNT,
};
pub use error::{Error, Result};
pub use geom::{Domain, Vec2};
pub use valueiter::{value_iteration, value_lookup, SolveConfig, ValueGrid, Variant};
