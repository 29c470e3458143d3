//! Shared fixtures for the kernel benchmarks.

use subnav_core::harness::{build_case, ChartCase, SweepConfig};
use subnav_core::{Belief, DensityBand, Vec2};

/// First medium-density chart of the desk sweep, solved at full resolution.
pub fn medium_case() -> ChartCase {
    build_case(&SweepConfig::desk(), DensityBand::Medium, 0).expect("desk chart builds")
}

/// Deterministic points spread over the 10 x 10 domain.
pub fn probe_points(n: usize) -> Vec<Vec2> {
    // additive recurrence on the golden ratio, low discrepancy
    let phi = 0.618_033_988_749_894_9;
    (0..n)
        .map(|i| {
            let i = i as f64;
            Vec2::new((i * phi).fract() * 10.0, ((i + 0.5) * phi * phi).fract() * 10.0)
        })
        .collect()
}

/// A belief typical of the middle of a windy episode.
pub fn mid_episode_belief(pos: Vec2) -> Belief {
    Belief {
        sigma_p: 0.3,
        sigma_w: 0.2,
        est_current: Vec2::new(0.1, -0.05),
        ..Belief::certain(pos, Vec2::ZERO)
    }
}
