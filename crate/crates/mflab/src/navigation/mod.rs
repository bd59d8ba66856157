//! Navigation-control experiment: obstacle map, free-space sampling,
//! visibility-pruned kernel graph, shortest-path direction labels, trainable
//! layered graph filters, and rollout evaluation.

mod net;
mod rollout;

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::Write;
use std::sync::Arc;

use ndarray::Array2;
use ordered_float::NotNan;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use net::{
    gradient_check_max_rel_error, train_filter, training_gso, FilterNet, FilterNetParams,
    Nonlinearity, TrainOutcome,
};
pub use rollout::{evaluate, evaluate_field, rollout, Rollout, RolloutConfig};

use crate::error::{Error, Result};
use crate::graph::{build_graph, CloudDomain, DistanceMetric, GeometricGraph, PointCloud};
use crate::report::fmt_f64;
use crate::rng::rng_from_seed;

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl From<[f64; 4]> for Rect {
    fn from(v: [f64; 4]) -> Self {
        Rect {
            x0: v[0],
            y0: v[1],
            x1: v[2],
            y1: v[3],
        }
    }
}

impl From<Rect> for [f64; 4] {
    fn from(r: Rect) -> Self {
        [r.x0, r.y0, r.x1, r.y1]
    }
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    /// Closed containment: boundary points count as inside.
    pub fn contains_closed(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }

    fn contains_rect(&self, other: &Rect) -> bool {
        other.x0 >= self.x0 && other.x1 <= self.x1 && other.y0 >= self.y0 && other.y1 <= self.y1
    }

    /// Slab test: does the segment p-q intersect the closed rectangle?
    /// Touching the boundary counts as intersecting.
    fn segment_hits(&self, p: [f64; 2], q: [f64; 2]) -> bool {
        let d = [q[0] - p[0], q[1] - p[1]];
        let mut t0 = 0.0f64;
        let mut t1 = 1.0f64;
        for axis in 0..2 {
            let (lo, hi) = if axis == 0 {
                (self.x0, self.x1)
            } else {
                (self.y0, self.y1)
            };
            if d[axis] == 0.0 {
                if p[axis] < lo || p[axis] > hi {
                    return false;
                }
            } else {
                let mut ta = (lo - p[axis]) / d[axis];
                let mut tb = (hi - p[axis]) / d[axis];
                if ta > tb {
                    std::mem::swap(&mut ta, &mut tb);
                }
                t0 = t0.max(ta);
                t1 = t1.min(tb);
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }
}

/// A planar navigation problem: bounds, obstacle rectangles, and a goal point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavMap {
    pub bounds: Rect,
    pub obstacles: Vec<Rect>,
    pub goal: [f64; 2],
}

impl NavMap {
    pub fn new(bounds: Rect, obstacles: Vec<Rect>, goal: [f64; 2]) -> Result<Self> {
        let map = NavMap {
            bounds,
            obstacles,
            goal,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bounds.x0 < self.bounds.x1 && self.bounds.y0 < self.bounds.y1) {
            return Err(Error::invalid("degenerate map bounds"));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if !(o.x0 < o.x1 && o.y0 < o.y1) {
                return Err(Error::invalid(format!("degenerate obstacle {i}")));
            }
            if !self.bounds.contains_rect(o) {
                return Err(Error::invalid(format!("obstacle {i} escapes the bounds")));
            }
        }
        if !self.is_free(self.goal) {
            return Err(Error::invalid("goal is not in free space"));
        }
        Ok(())
    }

    /// Free space: inside the bounds and strictly outside every obstacle.
    pub fn is_free(&self, p: [f64; 2]) -> bool {
        self.bounds.contains_closed(p) && !self.obstacles.iter().any(|o| o.contains_closed(p))
    }

    pub(crate) fn visible_unchecked(&self, p: [f64; 2], q: [f64; 2]) -> bool {
        !self.obstacles.iter().any(|o| o.segment_hits(p, q))
    }
}

/// True iff the segment between two in-bounds points crosses no obstacle.
/// Touching an obstacle boundary counts as blocked.
pub fn visible(map: &NavMap, p: [f64; 2], q: [f64; 2]) -> Result<bool> {
    if !map.bounds.contains_closed(p) || !map.bounds.contains_closed(q) {
        return Err(Error::invalid("visibility query outside map bounds"));
    }
    Ok(map.visible_unchecked(p, q))
}

/// The built-in desk-scale map used when no map file is given: a unit square
/// centered on the origin with the goal at the center and two square
/// obstacles toward opposite corners. Centering the frame keeps the
/// position-feature regression well-conditioned at the reference learning
/// rate.
pub fn default_map() -> NavMap {
    NavMap {
        bounds: Rect::new(-0.5, -0.5, 0.5, 0.5),
        obstacles: vec![
            Rect::new(-0.44, -0.44, -0.3, -0.3),
            Rect::new(0.28, 0.14, 0.42, 0.28),
        ],
        goal: [0.0, 0.0],
    }
}

/// Desk-scale kernel bandwidth for navigation graphs: twice the average area
/// per sample, giving a connection radius of about four typical spacings so
/// the trajectory graph stays connected but local.
pub fn nav_default_epsilon(map: &NavMap, n: usize) -> f64 {
    let area = (map.bounds.x1 - map.bounds.x0) * (map.bounds.y1 - map.bounds.y0);
    2.0 * area / n as f64
}

/// Rejection-samples `n` uniform free-space points. Deterministic per seed.
pub fn sample_free_space(map: &NavMap, n: usize, seed: u64) -> Result<PointCloud> {
    if n < 2 {
        return Err(Error::invalid("need at least 2 sample points"));
    }
    map.validate()?;
    let mut rng = rng_from_seed(seed);
    let mut points = Array2::<f64>::zeros((n, 2));
    let mut accepted = 0usize;
    let mut draws = 0usize;
    while accepted < n {
        draws += 1;
        if draws == 1_000_000 && (accepted as f64) < 0.01 * draws as f64 {
            return Err(Error::MapInfeasible(format!(
                "acceptance rate {:.4}% after {draws} draws",
                100.0 * accepted as f64 / draws as f64
            )));
        }
        if draws > 100_000_000 {
            return Err(Error::MapInfeasible("rejection sampling stalled".into()));
        }
        let x = map.bounds.x0 + rng.gen::<f64>() * (map.bounds.x1 - map.bounds.x0);
        let y = map.bounds.y0 + rng.gen::<f64>() * (map.bounds.y1 - map.bounds.y0);
        if map.is_free([x, y]) {
            points[(accepted, 0)] = x;
            points[(accepted, 1)] = y;
            accepted += 1;
        }
    }
    Ok(PointCloud {
        points,
        intrinsic_dim: 2,
        domain: CloudDomain::PlanarFreeSpace,
        seed,
    })
}

/// Kernel graph over free-space samples with obstacle-aware weights: pairs
/// whose connecting segment crosses an obstacle get weight zero.
pub fn build_nav_graph(map: &NavMap, cloud: &PointCloud, epsilon: f64) -> Result<GeometricGraph> {
    build_graph(cloud, epsilon, DistanceMetric::ObstacleAware, Some(map))
}

/// Direction labels harvested from shortest-path trajectories.
#[derive(Debug, Clone)]
pub struct NavDataset {
    pub cloud: Arc<PointCloud>,
    pub labeled_indices: Vec<usize>,
    /// Unit direction toward the successor node, per labeled index.
    pub labels: Vec<[f64; 2]>,
    /// Node sequences of the generated trajectories (start to goal).
    pub trajectories: Vec<Vec<usize>>,
    pub goal_node: usize,
    pub skipped_trajectories: usize,
}

impl NavDataset {
    pub fn to_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "index,x,y,dir_x,dir_y")?;
        for (&i, dir) in self.labeled_indices.iter().zip(&self.labels) {
            let p = self.cloud.point(i);
            writeln!(
                w,
                "{},{},{},{},{}",
                i,
                fmt_f64(p[0]),
                fmt_f64(p[1]),
                fmt_f64(dir[0]),
                fmt_f64(dir[1])
            )?;
        }
        Ok(())
    }
}

/// Shortest-path structure of a nav graph: Dijkstra distances from the goal
/// node and the next hop toward it.
#[derive(Debug, Clone)]
pub struct ShortestPaths {
    pub goal_node: usize,
    pub dist: Vec<f64>,
    /// `next[u]` is the node after `u` on the shortest path to the goal.
    pub next: Vec<Option<usize>>,
}

/// Edges beyond the kernel's effective support (Gaussian factor below e^-2)
/// are skipped when building trajectories, so shortest paths hop through
/// local waypoints instead of jumping across the whole map in one step.
pub fn connection_radius(epsilon: f64) -> f64 {
    (8.0 * epsilon).sqrt()
}

/// Runs Dijkstra from the node nearest the map goal. Edge lengths are
/// Euclidean distances over visible (positive-weight) pairs within the
/// kernel's connection radius.
pub fn shortest_paths(
    graph: &GeometricGraph,
    cloud: &PointCloud,
    map: &NavMap,
) -> Result<ShortestPaths> {
    let n = cloud.len();
    if graph.n != n {
        return Err(Error::invalid("graph and cloud sizes differ"));
    }
    let goal_node = nearest_node(cloud, map.goal);
    let radius2 = connection_radius(graph.epsilon).powi(2);

    let mut dist = vec![f64::INFINITY; n];
    let mut next: Vec<Option<usize>> = vec![None; n];
    let mut heap: BinaryHeap<Reverse<(NotNan<f64>, usize)>> = BinaryHeap::new();
    dist[goal_node] = 0.0;
    heap.push(Reverse((NotNan::new(0.0).unwrap(), goal_node)));
    while let Some(Reverse((d, u))) = heap.pop() {
        let d = d.into_inner();
        if d > dist[u] {
            continue;
        }
        let pu = cloud.point(u);
        for v in 0..n {
            if v == u || graph.adjacency[(u, v)] <= 0.0 {
                continue;
            }
            let pv = cloud.point(v);
            let len2 = (pu[0] - pv[0]).powi(2) + (pu[1] - pv[1]).powi(2);
            if len2 > radius2 {
                continue;
            }
            let cand = d + len2.sqrt();
            if cand < dist[v] {
                dist[v] = cand;
                next[v] = Some(u);
                heap.push(Reverse((NotNan::new(cand).unwrap(), v)));
            }
        }
    }
    Ok(ShortestPaths {
        goal_node,
        dist,
        next,
    })
}

pub(crate) fn nearest_node(cloud: &PointCloud, p: [f64; 2]) -> usize {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for i in 0..cloud.len() {
        let q = cloud.point(i);
        let d = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Generates `n_trajectories` shortest-path trajectories from random start
/// nodes and labels every node along them with the unit direction toward its
/// successor. Unreachable starts are skipped and counted.
pub fn dijkstra_labels(
    graph: &GeometricGraph,
    cloud: &Arc<PointCloud>,
    map: &NavMap,
    n_trajectories: usize,
    seed: u64,
) -> Result<NavDataset> {
    let paths = shortest_paths(graph, cloud, map)?;
    let n = cloud.len();
    let mut rng = rng_from_seed(seed);

    let mut label_map: std::collections::BTreeMap<usize, [f64; 2]> = Default::default();
    let mut trajectories = Vec::new();
    let mut skipped = 0usize;
    for _ in 0..n_trajectories {
        let start = rng.gen_range(0..n);
        if !paths.dist[start].is_finite() {
            skipped += 1;
            continue;
        }
        let mut traj = Vec::new();
        let mut u = start;
        while u != paths.goal_node {
            let succ = paths.next[u].expect("finite distance implies a next hop");
            let pu = cloud.point(u);
            let ps = cloud.point(succ);
            let mut dir = [ps[0] - pu[0], ps[1] - pu[1]];
            let norm = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
            if norm > 0.0 {
                dir[0] /= norm;
                dir[1] /= norm;
                label_map.insert(u, dir);
            }
            traj.push(u);
            u = succ;
        }
        traj.push(paths.goal_node);
        if traj.len() > 1 {
            trajectories.push(traj);
        }
    }

    let labeled_indices: Vec<usize> = label_map.keys().copied().collect();
    let labels: Vec<[f64; 2]> = label_map.values().copied().collect();
    Ok(NavDataset {
        cloud: Arc::clone(cloud),
        labeled_indices,
        labels,
        trajectories,
        goal_node: paths.goal_node,
        skipped_trajectories: skipped,
    })
}
