//! The square task grid around the queried object: 1 cm cells holding one of
//! four states under a priority-overwrite rule (object > obstacle > ground >
//! unseen).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;
use crate::scalar::Real;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GridError {
    #[error("object has no projected points")]
    EmptyObject,
}

/// Cell classification. Priority from highest to lowest:
/// `QueriedObject > Obstacle > Ground > Unseen`; rasterization only ever
/// upgrades a cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellState {
    Unseen,
    Obstacle,
    Ground,
    QueriedObject,
}

impl CellState {
    pub fn priority(self) -> u8 {
        match self {
            CellState::Unseen => 0,
            CellState::Ground => 1,
            CellState::Obstacle => 2,
            CellState::QueriedObject => 3,
        }
    }

    fn index(self) -> usize {
        match self {
            CellState::Unseen => 0,
            CellState::Obstacle => 1,
            CellState::Ground => 2,
            CellState::QueriedObject => 3,
        }
    }
}

/// Minimal enclosing circle of the object's ground projection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectFootprint<F> {
    pub center: Vec2<F>,
    pub radius: F,
}

/// Smallest circle containing all points (center, radius). Returns the exact
/// minimal enclosing circle; a single point yields radius 0 (callers floor it
/// at the grid resolution).
pub fn object_footprint<F: Real>(points: &[Vec2<F>]) -> Result<ObjectFootprint<F>, GridError> {
    if points.is_empty() {
        return Err(GridError::EmptyObject);
    }
    let (center, radius) = min_enclosing_circle(points);
    Ok(ObjectFootprint { center, radius })
}

/// Welzl-style incremental minimal enclosing circle with a fixed-seed shuffle
/// for the expected-linear running time.
pub fn min_enclosing_circle<F: Real>(points: &[Vec2<F>]) -> (Vec2<F>, F) {
    let mut order: Vec<usize> = (0..points.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d65635f73656564);
    order.shuffle(&mut rng);
    let p = |i: usize| points[order[i]];

    let inside = |c: (Vec2<F>, F), q: Vec2<F>| -> bool {
        let eps = c.1 * F::epsilon() * F::of(64.0) + F::of(1e-12);
        c.0.dist(q) <= c.1 + eps
    };

    let mut circ = (p(0), F::zero());
    for i in 1..points.len() {
        if inside(circ, p(i)) {
            continue;
        }
        circ = (p(i), F::zero());
        for j in 0..i {
            if inside(circ, p(j)) {
                continue;
            }
            circ = circle_two(p(i), p(j));
            for k in 0..j {
                if !inside(circ, p(k)) {
                    circ = circle_three(p(i), p(j), p(k));
                }
            }
        }
    }
    circ
}

fn circle_two<F: Real>(a: Vec2<F>, b: Vec2<F>) -> (Vec2<F>, F) {
    let c = (a + b) * F::half();
    (c, c.dist(a))
}

fn circle_three<F: Real>(a: Vec2<F>, b: Vec2<F>, c: Vec2<F>) -> (Vec2<F>, F) {
    let d = F::two() * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
    let scale = (b - a).norm().max((c - a).norm()).max((c - b).norm());
    if d.abs() <= F::of(1e-12) * scale * scale {
        // collinear support: span the two farthest points
        let (mut u, mut v, mut best) = (a, b, a.dist_sq(b));
        for (x, y) in [(a, c), (b, c)] {
            let dd = x.dist_sq(y);
            if dd > best {
                best = dd;
                u = x;
                v = y;
            }
        }
        return circle_two(u, v);
    }
    let a2 = a.norm_sq();
    let b2 = b.norm_sq();
    let c2 = c.norm_sq();
    let ux = (a2 * (b.y - c.y) + b2 * (c.y - a.y) + c2 * (a.y - b.y)) / d;
    let uy = (a2 * (c.x - b.x) + b2 * (a.x - c.x) + c2 * (b.x - a.x)) / d;
    let center = Vec2::new(ux, uy);
    let r = center.dist(a).max(center.dist(b)).max(center.dist(c));
    (center, r)
}

/// Square grid of `CellState` centered at the object footprint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskGrid<F> {
    pub center: Vec2<F>,
    pub half_extent: F,
    pub resolution: F,
    /// Cells per side.
    pub size: usize,
    /// Row-major, `cells[iy * size + ix]`.
    cells: Vec<CellState>,
}

/// Build the task grid: centered at the footprint, half-extent
/// `max(r_q, resolution) + 1 m`, all cells unseen.
pub fn build_task_grid<F: Real>(footprint: &ObjectFootprint<F>, resolution: F) -> TaskGrid<F> {
    assert!(resolution > F::zero());
    let r_q = footprint.radius.max(resolution);
    let half = r_q + F::one();
    let size = (F::two() * half / resolution).round().to_usize().unwrap().max(1);
    TaskGrid {
        center: footprint.center,
        // keep geometry consistent with the rounded cell count
        half_extent: F::of(size as f64) * resolution * F::half(),
        resolution,
        size,
        cells: vec![CellState::Unseen; size * size],
    }
}

impl<F: Real> TaskGrid<F> {
    pub fn min_corner(&self) -> Vec2<F> {
        self.center - Vec2::new(self.half_extent, self.half_extent)
    }

    pub fn max_corner(&self) -> Vec2<F> {
        self.center + Vec2::new(self.half_extent, self.half_extent)
    }

    /// Containing cell under the floor convention; `None` outside the grid.
    pub fn cell_of(&self, p: Vec2<F>) -> Option<(usize, usize)> {
        let rel = p - self.min_corner();
        let fx = (rel.x / self.resolution).floor();
        let fy = (rel.y / self.resolution).floor();
        if fx < F::zero() || fy < F::zero() {
            return None;
        }
        let (ix, iy) = (fx.to_usize()?, fy.to_usize()?);
        (ix < self.size && iy < self.size).then_some((ix, iy))
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Vec2<F> {
        self.min_corner()
            + Vec2::new(
                (F::of(ix as f64) + F::half()) * self.resolution,
                (F::of(iy as f64) + F::half()) * self.resolution,
            )
    }

    pub fn state(&self, ix: usize, iy: usize) -> CellState {
        self.cells[iy * self.size + ix]
    }

    /// Rasterize points under the priority rule: each in-grid point upgrades
    /// its cell to `max(current, state)`; out-of-grid points are ignored.
    pub fn rasterize(&mut self, points: &[Vec2<F>], state: CellState) {
        assert!(state != CellState::Unseen, "cannot rasterize the unseen state");
        for &p in points {
            if let Some((ix, iy)) = self.cell_of(p) {
                let cell = &mut self.cells[iy * self.size + ix];
                if state.priority() > cell.priority() {
                    *cell = state;
                }
            }
        }
    }

    /// Centers of all cells in `state`, row-major.
    pub fn cells_of_state(&self, state: CellState) -> Vec<Vec2<F>> {
        let mut out = Vec::new();
        for iy in 0..self.size {
            for ix in 0..self.size {
                if self.state(ix, iy) == state {
                    out.push(self.cell_center(ix, iy));
                }
            }
        }
        out
    }

    /// Cell counts as `[unseen, obstacle, ground, queried_object]`.
    pub fn counts(&self) -> [usize; 4] {
        let mut c = [0usize; 4];
        for cell in &self.cells {
            c[cell.index()] += 1;
        }
        c
    }

    pub fn total_cells(&self) -> usize {
        self.cells.len()
    }

    /// Run-length encoding `"<u|o|g|q><count>,..."` (row-major), compact
    /// enough to embed in episode traces.
    pub fn rle_encode(&self) -> String {
        let mut out = String::new();
        let mut iter = self.cells.iter();
        let Some(first) = iter.next() else {
            return out;
        };
        let ch = |s: CellState| match s {
            CellState::Unseen => 'u',
            CellState::Obstacle => 'o',
            CellState::Ground => 'g',
            CellState::QueriedObject => 'q',
        };
        let mut cur = *first;
        let mut run = 1usize;
        for &cell in iter {
            if cell == cur {
                run += 1;
            } else {
                out.push(ch(cur));
                out.push_str(&run.to_string());
                out.push(',');
                cur = cell;
                run = 1;
            }
        }
        out.push(ch(cur));
        out.push_str(&run.to_string());
        out
    }

    pub fn rle_decode(&mut self, encoded: &str) -> bool {
        let mut cells = Vec::with_capacity(self.cells.len());
        for part in encoded.split(',') {
            if part.is_empty() {
                continue;
            }
            let state = match part.as_bytes()[0] {
                b'u' => CellState::Unseen,
                b'o' => CellState::Obstacle,
                b'g' => CellState::Ground,
                b'q' => CellState::QueriedObject,
                _ => return false,
            };
            let Ok(run) = part[1..].parse::<usize>() else {
                return false;
            };
            cells.extend(std::iter::repeat(state).take(run));
        }
        if cells.len() != self.cells.len() {
            return false;
        }
        self.cells = cells;
        true
    }
}
