//! 2D grid path planning on the occupancy map, path-midpoint extraction,
//! discrete-action path following and rotate-to-face.
//!
//! The planner is 8-connected A* over the robot-radius-inflated grid. Costs
//! are carried as integer (straight, diagonal) step counts and compared
//! exactly in integer arithmetic, so the reported cost is identical to an
//! exhaustive Dijkstra run — no floating-point accumulation order can split
//! them.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::wrap_angle;
use crate::simworld::{apply_action, Action, ActionConfig, OccupancyMap, RobotState, SceneSpec};
use crate::{Point2, Scalar};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("no free connection between start and goal")]
    Unreachable,
    #[error("no free cell within 3 robot radii of the goal")]
    GoalTooDeep,
    #[error("robot is stuck: {0} consecutive blocked forward steps")]
    Stuck(u32),
}

/// Planned path: consecutive occupied-grid cell centers from start to goal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub waypoints: Vec<Point2>,
    /// Grid-metric arc length in meters.
    pub length: Scalar,
}

/// Exact grid cost: `straight + diagonal * sqrt(2)` step counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridCost {
    pub straight: u32,
    pub diagonal: u32,
}

impl GridCost {
    pub const ZERO: GridCost = GridCost {
        straight: 0,
        diagonal: 0,
    };

    pub fn value(self) -> Scalar {
        self.straight as Scalar + self.diagonal as Scalar * std::f64::consts::SQRT_2
    }

    fn plus(self, straight: u32, diagonal: u32) -> GridCost {
        GridCost {
            straight: self.straight + straight,
            diagonal: self.diagonal + diagonal,
        }
    }

    fn add(self, other: GridCost) -> GridCost {
        self.plus(other.straight, other.diagonal)
    }

    /// Exact comparison of `s1 + d1*sqrt2` against `s2 + d2*sqrt2` in integer
    /// arithmetic (no equal-but-distinct pairs exist: sqrt2 is irrational).
    pub fn cmp_exact(self, other: GridCost) -> Ordering {
        let u = self.straight as i64 - other.straight as i64;
        let v = other.diagonal as i64 - self.diagonal as i64;
        if u == 0 && v == 0 {
            return Ordering::Equal;
        }
        if u <= 0 && v >= 0 {
            return Ordering::Less;
        }
        if u >= 0 && v <= 0 {
            return Ordering::Greater;
        }
        let u2 = (u as i128) * (u as i128);
        let v2 = 2 * (v as i128) * (v as i128);
        if u > 0 {
            if u2 < v2 {
                Ordering::Less
            } else {
                Ordering::Greater
            }
        } else if u2 > v2 {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    }
}

/// Occupancy grid dilated by the robot radius.
pub struct InflatedGrid {
    pub width: usize,
    pub height: usize,
    blocked: Vec<bool>,
}

impl InflatedGrid {
    pub fn from_map(map: &OccupancyMap, robot_radius: Scalar) -> Self {
        let r_cells = (robot_radius / map.resolution + 1e-9).floor() as i64;
        let mut offsets = Vec::new();
        for dy in -r_cells..=r_cells {
            for dx in -r_cells..=r_cells {
                let d = ((dx * dx + dy * dy) as Scalar).sqrt() * map.resolution;
                if d <= robot_radius + 1e-9 {
                    offsets.push((dx, dy));
                }
            }
        }
        let mut blocked = vec![false; map.width * map.height];
        for (ix, iy) in map.occupied_cells() {
            for &(dx, dy) in &offsets {
                let x = ix as i64 + dx;
                let y = iy as i64 + dy;
                if x >= 0 && y >= 0 && (x as usize) < map.width && (y as usize) < map.height {
                    blocked[y as usize * map.width + x as usize] = true;
                }
            }
        }
        Self {
            width: map.width,
            height: map.height,
            blocked,
        }
    }

    pub fn is_blocked(&self, ix: usize, iy: usize) -> bool {
        self.blocked[iy * self.width + ix]
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
struct HeapEntry {
    f: GridCost,
    g: GridCost,
    idx: usize,
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap: invert so the smallest f pops first;
        // break ties toward larger g (deeper nodes), then lower index
        other
            .f
            .cmp_exact(self.f)
            .then_with(|| self.g.cmp_exact(other.g))
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const NEIGHBORS: [(i64, i64, u32, u32); 8] = [
    (1, 0, 1, 0),
    (-1, 0, 1, 0),
    (0, 1, 1, 0),
    (0, -1, 1, 0),
    (1, 1, 0, 1),
    (1, -1, 0, 1),
    (-1, 1, 0, 1),
    (-1, -1, 0, 1),
];

fn octile(a: (usize, usize), b: (usize, usize)) -> GridCost {
    let dx = a.0.abs_diff(b.0) as u32;
    let dy = a.1.abs_diff(b.1) as u32;
    GridCost {
        straight: dx.max(dy) - dx.min(dy),
        diagonal: dx.min(dy),
    }
}

/// A* over the inflated grid. Returns per-cell parent links and the goal
/// cost, or `None` when the goal is unreachable.
fn astar(
    grid: &InflatedGrid,
    start: (usize, usize),
    goal: (usize, usize),
) -> Option<(Vec<usize>, GridCost)> {
    let w = grid.width;
    let idx = |c: (usize, usize)| c.1 * w + c.0;
    let mut g: Vec<Option<GridCost>> = vec![None; w * grid.height];
    let mut parent: Vec<usize> = vec![usize::MAX; w * grid.height];
    let mut closed = vec![false; w * grid.height];
    let mut heap = BinaryHeap::new();
    g[idx(start)] = Some(GridCost::ZERO);
    heap.push(HeapEntry {
        f: octile(start, goal),
        g: GridCost::ZERO,
        idx: idx(start),
    });
    while let Some(entry) = heap.pop() {
        let i = entry.idx;
        if closed[i] {
            continue;
        }
        closed[i] = true;
        if i == idx(goal) {
            return Some((parent, g[i].expect("settled")));
        }
        let (ix, iy) = (i % w, i / w);
        let gi = g[i].expect("queued nodes have costs");
        for &(dx, dy, s, d) in &NEIGHBORS {
            let nx = ix as i64 + dx;
            let ny = iy as i64 + dy;
            if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= grid.height {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            if grid.is_blocked(nx, ny) || closed[ny * w + nx] {
                continue;
            }
            let ng = gi.plus(s, d);
            let ni = ny * w + nx;
            if g[ni].map_or(true, |old| ng.cmp_exact(old) == Ordering::Less) {
                g[ni] = Some(ng);
                parent[ni] = i;
                heap.push(HeapEntry {
                    f: ng.add(octile((nx, ny), goal)),
                    g: ng,
                    idx: ni,
                });
            }
        }
    }
    None
}

/// Nearest free cell to `p` within `max_dist`, by center distance with ties
/// broken on the lower linear index. `None` when everything nearby is blocked.
fn snap_to_free(
    map: &OccupancyMap,
    grid: &InflatedGrid,
    p: Point2,
    max_dist: Scalar,
) -> Option<(usize, usize)> {
    let (cx, cy) = map.cell_of(p)?;
    if !grid.is_blocked(cx, cy) {
        return Some((cx, cy));
    }
    let r_cells = (max_dist / map.resolution).ceil() as i64 + 1;
    let mut best: Option<(Scalar, usize, (usize, usize))> = None;
    for dy in -r_cells..=r_cells {
        for dx in -r_cells..=r_cells {
            let x = cx as i64 + dx;
            let y = cy as i64 + dy;
            if x < 0 || y < 0 || (x as usize) >= map.width || (y as usize) >= map.height {
                continue;
            }
            let (x, y) = (x as usize, y as usize);
            if grid.is_blocked(x, y) {
                continue;
            }
            let d = map.cell_center(x, y).dist(p);
            if d > max_dist {
                continue;
            }
            let key = y * map.width + x;
            if best.map_or(true, |(bd, bk, _)| d < bd || (d == bd && key < bk)) {
                best = Some((d, key, (x, y)));
            }
        }
    }
    best.map(|(_, _, cell)| cell)
}

/// Plan a grid-optimal path from `start` to `goal` with the obstacles
/// inflated by `robot_radius`. A blocked goal cell is replaced by the nearest
/// free cell within `3 * robot_radius` (same for a blocked start).
pub fn plan_path(
    map: &OccupancyMap,
    start: Point2,
    goal: Point2,
    robot_radius: Scalar,
) -> Result<Path, PlanError> {
    let grid = InflatedGrid::from_map(map, robot_radius);
    let start_cell = snap_to_free(map, &grid, start, 3.0 * robot_radius).ok_or(PlanError::Unreachable)?;
    let goal_cell = snap_to_free(map, &grid, goal, 3.0 * robot_radius).ok_or(PlanError::GoalTooDeep)?;
    let (parent, cost) = astar(&grid, start_cell, goal_cell).ok_or(PlanError::Unreachable)?;

    let w = map.width;
    let mut cells = vec![goal_cell.1 * w + goal_cell.0];
    while *cells.last().expect("non-empty") != start_cell.1 * w + start_cell.0 {
        let prev = parent[*cells.last().expect("non-empty")];
        debug_assert!(prev != usize::MAX);
        cells.push(prev);
    }
    cells.reverse();
    let waypoints = cells
        .into_iter()
        .map(|i| map.cell_center(i % w, i / w))
        .collect();
    Ok(Path {
        waypoints,
        length: cost.value() * map.resolution,
    })
}

/// Exhaustive Dijkstra cost between the same snapped cells; the reference
/// the planner's optimality contract is stated against.
pub fn dijkstra_cost(
    map: &OccupancyMap,
    start: Point2,
    goal: Point2,
    robot_radius: Scalar,
) -> Result<GridCost, PlanError> {
    let grid = InflatedGrid::from_map(map, robot_radius);
    let start_cell = snap_to_free(map, &grid, start, 3.0 * robot_radius).ok_or(PlanError::Unreachable)?;
    let goal_cell = snap_to_free(map, &grid, goal, 3.0 * robot_radius).ok_or(PlanError::GoalTooDeep)?;
    let w = grid.width;
    let idx = |c: (usize, usize)| c.1 * w + c.0;
    let mut g: Vec<Option<GridCost>> = vec![None; w * grid.height];
    let mut closed = vec![false; w * grid.height];
    let mut heap = BinaryHeap::new();
    g[idx(start_cell)] = Some(GridCost::ZERO);
    heap.push(HeapEntry {
        f: GridCost::ZERO,
        g: GridCost::ZERO,
        idx: idx(start_cell),
    });
    while let Some(entry) = heap.pop() {
        let i = entry.idx;
        if closed[i] {
            continue;
        }
        closed[i] = true;
        if i == idx(goal_cell) {
            return Ok(g[i].expect("settled"));
        }
        let (ix, iy) = (i % w, i / w);
        let gi = g[i].expect("queued nodes have costs");
        for &(dx, dy, s, d) in &NEIGHBORS {
            let nx = ix as i64 + dx;
            let ny = iy as i64 + dy;
            if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= grid.height {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            if grid.is_blocked(nx, ny) || closed[ny * w + nx] {
                continue;
            }
            let ng = gi.plus(s, d);
            let ni = ny * w + nx;
            if g[ni].map_or(true, |old| ng.cmp_exact(old) == Ordering::Less) {
                g[ni] = Some(ng);
                heap.push(HeapEntry {
                    f: ng,
                    g: ng,
                    idx: ni,
                });
            }
        }
    }
    Err(PlanError::Unreachable)
}

/// The point at half the total arc length along the path polyline.
pub fn path_midpoint(path: &Path) -> Point2 {
    assert!(!path.waypoints.is_empty(), "midpoint of an empty path");
    point_at_arc_length(path, polyline_length(&path.waypoints) * 0.5)
}

fn polyline_length(pts: &[Point2]) -> Scalar {
    pts.windows(2).map(|w| w[0].dist(w[1])).sum()
}

fn point_at_arc_length(path: &Path, s: Scalar) -> Point2 {
    let pts = &path.waypoints;
    if pts.len() == 1 || s <= 0.0 {
        return pts[0];
    }
    let mut acc = 0.0;
    for w in pts.windows(2) {
        let seg = w[0].dist(w[1]);
        if acc + seg >= s {
            let t = if seg > 0.0 { (s - acc) / seg } else { 0.0 };
            return w[0] + (w[1] - w[0]) * t;
        }
        acc += seg;
    }
    *pts.last().expect("non-empty")
}

/// The shorter sequence of unit turns aligning the heading with the bearing
/// of `target`, to within half a turn step.
pub fn rotate_to_face(state: &RobotState, target: Point2, turn_step_deg: Scalar) -> Vec<Action> {
    let delta = wrap_angle((target - state.position).angle() - state.heading);
    let step = turn_step_deg.to_radians();
    let n = (delta.abs() / step).round() as usize;
    let action = if delta >= 0.0 { Action::TurnLeft } else { Action::TurnRight };
    vec![action; n]
}

#[derive(Clone, Debug)]
pub struct FollowOutcome {
    pub state: RobotState,
    pub actions: Vec<Action>,
    /// Sum of executed forward steps, meters.
    pub traveled: Scalar,
    pub collisions: u32,
}

/// Greedy discrete-action path follower: aim at the next waypoint, step
/// forward, stop once `stop_at` meters have been traveled or the path is
/// exhausted. Five consecutive blocked steps abort with `Stuck`.
pub fn follow_path(
    scene: &SceneSpec,
    state: &RobotState,
    path: &Path,
    stop_at: Scalar,
    cfg: &ActionConfig,
    robot_radius: Scalar,
) -> Result<FollowOutcome, PlanError> {
    let mut out = FollowOutcome {
        state: *state,
        actions: Vec::new(),
        traveled: 0.0,
        collisions: 0,
    };
    let step = cfg.forward_step;
    let reach = step * 0.5 + 1e-9;
    let mut wp = 1usize; // waypoint 0 is the start cell
    let mut blocked_streak = 0u32;
    while out.traveled + 1e-9 < stop_at {
        while wp < path.waypoints.len() && out.state.position.dist(path.waypoints[wp]) <= reach {
            wp += 1;
        }
        if wp >= path.waypoints.len() {
            break;
        }
        let target = path.waypoints[wp];
        // the grid path can graze geometry the cells round away; when a step
        // is blocked, retry at widening alternating offsets from the aim
        // heading before giving up
        let mut moved = false;
        for veer_deg in [0.0f64, 20.0, -20.0, 45.0, -45.0] {
            for turn in rotate_to_face(&out.state, target, cfg.turn_step_deg) {
                out.state = apply_action(scene, &out.state, turn, cfg, robot_radius).state;
                out.actions.push(turn);
            }
            if veer_deg != 0.0 {
                let turns = (veer_deg.abs() / cfg.turn_step_deg).round() as usize;
                let action = if veer_deg > 0.0 { Action::TurnLeft } else { Action::TurnRight };
                for _ in 0..turns {
                    out.state = apply_action(scene, &out.state, action, cfg, robot_radius).state;
                    out.actions.push(action);
                }
            }
            let step_out = apply_action(scene, &out.state, Action::MoveForward, cfg, robot_radius);
            out.actions.push(Action::MoveForward);
            if step_out.collided {
                out.collisions += 1;
            } else {
                out.state = step_out.state;
                out.traveled += step;
                moved = true;
                break;
            }
        }
        if moved {
            blocked_streak = 0;
        } else {
            blocked_streak += 1;
            if blocked_streak >= 5 {
                return Err(PlanError::Stuck(blocked_streak));
            }
            // skip the unreachable waypoint and re-aim
            wp += 1;
        }
    }
    Ok(out)
}
