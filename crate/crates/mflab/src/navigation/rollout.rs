//! Trajectory rollout and success-rate evaluation for trained filters.

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::PointCloud;
use crate::rng::rng_from_seed;

use super::{nearest_node, FilterNet, NavMap};

#[derive(Debug, Clone, Copy)]
pub struct RolloutConfig {
    pub step_size: f64,
    pub max_steps: usize,
    pub goal_radius: f64,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        RolloutConfig {
            step_size: 0.02,
            max_steps: 600,
            goal_radius: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Rollout {
    pub trajectory: Vec<[f64; 2]>,
    pub success: bool,
}

fn positions_signal(cloud: &PointCloud) -> Array2<f64> {
    let n = cloud.len();
    let mut input = Array2::<f64>::zeros((n, 2));
    for i in 0..n {
        let p = cloud.point(i);
        input[(i, 0)] = p[0];
        input[(i, 1)] = p[1];
    }
    input
}

fn rollout_with_field(
    field: &Array2<f64>,
    cloud: &PointCloud,
    map: &NavMap,
    start: usize,
    cfg: &RolloutConfig,
) -> Rollout {
    let p0 = cloud.point(start);
    let mut pos = [p0[0], p0[1]];
    let mut trajectory = vec![pos];
    for _ in 0..cfg.max_steps {
        let to_goal = ((pos[0] - map.goal[0]).powi(2) + (pos[1] - map.goal[1]).powi(2)).sqrt();
        if to_goal <= cfg.goal_radius {
            return Rollout {
                trajectory,
                success: true,
            };
        }
        let node = nearest_node(cloud, pos);
        let dir = [field[(node, 0)], field[(node, 1)]];
        let norm = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
        if norm < 1e-12 {
            break;
        }
        let next = [
            pos[0] + cfg.step_size * dir[0] / norm,
            pos[1] + cfg.step_size * dir[1] / norm,
        ];
        if !map.bounds.contains_closed(next) || !map.visible_unchecked(pos, next) {
            break;
        }
        pos = next;
        trajectory.push(pos);
    }
    // the loop ran out of steps or hit something; check the radius once more
    let to_goal = ((pos[0] - map.goal[0]).powi(2) + (pos[1] - map.goal[1]).powi(2)).sqrt();
    Rollout {
        trajectory,
        success: to_goal <= cfg.goal_radius,
    }
}

/// Rolls the agent out from a start node, following the model's direction
/// field read at the node nearest the agent. Succeeds on entering the goal
/// radius; fails on obstacle contact, leaving the bounds, or exhausting
/// `max_steps`. Failure is a result, not an error.
pub fn rollout(
    model: &FilterNet,
    cloud: &PointCloud,
    map: &NavMap,
    start: usize,
    cfg: &RolloutConfig,
) -> Result<Rollout> {
    if start >= cloud.len() {
        return Err(Error::invalid(format!("start node {start} out of range")));
    }
    let field = model.forward(&positions_signal(cloud))?;
    Ok(rollout_with_field(&field, cloud, map, start, cfg))
}

/// Runs `n_tests` rollouts from seeded random free-space starting points
/// (each mapped to its nearest node) and counts successes.
pub fn evaluate(
    model: &FilterNet,
    map: &NavMap,
    cloud: &PointCloud,
    n_tests: usize,
    seed: u64,
    cfg: &RolloutConfig,
) -> Result<usize> {
    let field = model.forward(&positions_signal(cloud))?;
    evaluate_field(&field, map, cloud, n_tests, seed, cfg)
}

/// Same evaluation protocol for an explicit per-node direction field.
pub fn evaluate_field(
    field: &Array2<f64>,
    map: &NavMap,
    cloud: &PointCloud,
    n_tests: usize,
    seed: u64,
    cfg: &RolloutConfig,
) -> Result<usize> {
    if n_tests == 0 {
        return Ok(0);
    }
    let mut rng = rng_from_seed(seed);
    let mut starts = Vec::with_capacity(n_tests);
    let mut draws = 0usize;
    while starts.len() < n_tests {
        draws += 1;
        if draws > 10_000_000 {
            return Err(Error::MapInfeasible("could not draw test starts".into()));
        }
        let x = map.bounds.x0 + rng.gen::<f64>() * (map.bounds.x1 - map.bounds.x0);
        let y = map.bounds.y0 + rng.gen::<f64>() * (map.bounds.y1 - map.bounds.y0);
        if map.is_free([x, y]) {
            starts.push(nearest_node(cloud, [x, y]));
        }
    }
    let successes = starts
        .par_iter()
        .map(|&s| rollout_with_field(field, cloud, map, s, cfg))
        .filter(|r| r.success)
        .count();
    Ok(successes)
}
