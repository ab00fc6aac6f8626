//! Time-optimal point-to-point motion of an overhead crane around a rectangular obstacle.

mod config;
pub mod dynamics;
mod tocp;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use config::{CraneBounds, CraneConfig, Interval, Obstacle};
pub use dynamics::{payload_position, rk4_step, CraneDynamics, CraneState, Dynamics};
pub use tocp::{
    build_tocp, feasible_initialization, separating_hyperplane, CraneConstraints, CraneProblem,
    TocpLayout,
};

use crate::error::{FslpError, Result};

/// Resampling attempts per endpoint before giving up.
const MAX_DRAWS: usize = 1000;

/// `count = n^2` instances pairing `n` perturbations of A with `n` perturbations of B, drawn
/// uniformly from squares of half-width `radius`. Instance `i * n + j` uses start `i`, end `j`.
///
/// Endpoints closer to the obstacle than the load radius, or whose rest state violates the
/// state bounds, are redrawn.
pub fn perturb_problems(
    cfg: &CraneConfig,
    seed: u64,
    count: usize,
    radius: f64,
) -> Result<Vec<CraneConfig>> {
    let n = (count as f64).sqrt().round() as usize;
    if n * n != count || count == 0 {
        return Err(FslpError::Config(format!(
            "instance count {count} is not a positive perfect square"
        )));
    }
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(FslpError::Config(format!(
            "perturbation radius must be finite and nonnegative, got {radius}"
        )));
    }
    let obstacle = cfg.obstacle()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |center: [f64; 2]| -> Result<[f64; 2]> {
        for _ in 0..MAX_DRAWS {
            let p = [
                center[0] + radius * (2.0 * rng.gen::<f64>() - 1.0),
                center[1] + radius * (2.0 * rng.gen::<f64>() - 1.0),
            ];
            if endpoint_admissible(cfg, &obstacle, p) {
                return Ok(p);
            }
        }
        Err(FslpError::Config(format!(
            "no admissible endpoint within {radius} of {center:?}"
        )))
    };
    let starts = (0..n)
        .map(|_| draw(cfg.start_payload))
        .collect::<Result<Vec<_>>>()?;
    let ends = (0..n)
        .map(|_| draw(cfg.end_payload))
        .collect::<Result<Vec<_>>>()?;

    let mut out = Vec::with_capacity(count);
    for &s in &starts {
        for &e in &ends {
            out.push(CraneConfig {
                start_payload: s,
                end_payload: e,
                ..cfg.clone()
            });
        }
    }
    Ok(out)
}

fn endpoint_admissible(cfg: &CraneConfig, obstacle: &Obstacle, p: [f64; 2]) -> bool {
    let x = CraneState::at_rest_below(p[0], p[1]);
    let b = &cfg.bounds;
    let inside = |v: f64, [lo, hi]: Interval| lo <= v && v <= hi;
    obstacle.distance(p) > cfg.r_load && inside(x.x_c, b.x_c) && inside(x.l, b.l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perturbations_are_deterministic() {
        let cfg = CraneConfig::default();
        let a = perturb_problems(&cfg, 7, 100, 0.05).unwrap();
        let b = perturb_problems(&cfg, 7, 100, 0.05).unwrap();
        assert_eq!(a.len(), 100);
        assert_eq!(a, b);
        assert_ne!(a, perturb_problems(&cfg, 8, 100, 0.05).unwrap());
        for c in &a {
            assert!((c.start_payload[0] - cfg.start_payload[0]).abs() <= 0.05);
            assert!((c.end_payload[1] - cfg.end_payload[1]).abs() <= 0.05);
        }
        // grid structure
        assert_eq!(a[3].start_payload, a[7].start_payload);
        assert_eq!(a[3].end_payload, a[13].end_payload);
    }

    #[test]
    fn zero_radius_reproduces_config() {
        let cfg = CraneConfig::default();
        let all = perturb_problems(&cfg, 1, 9, 0.0).unwrap();
        assert!(all.iter().all(|c| *c == cfg));
    }

    #[test]
    fn count_must_be_square() {
        assert!(perturb_problems(&CraneConfig::default(), 1, 10, 0.05).is_err());
    }
}
