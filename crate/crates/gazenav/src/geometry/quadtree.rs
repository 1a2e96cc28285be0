//! Point quadtree over 2D points with exact nearest-neighbor queries.
//!
//! One index holds the points of a single class (object / obstacle / ground).
//! The contract is exactness: `nearest` must return the same answer as a
//! linear scan, with ties broken by lowest insertion order.

use crate::geometry::{GeometryError, Vec2};
use crate::scalar::Real;

const LEAF_CAPACITY: usize = 16;
const MAX_DEPTH: usize = 24;

#[derive(Clone, Debug)]
enum Node {
    Leaf(Vec<u32>),
    Branch(Box<[Node; 4]>),
}

/// Static 2D spatial index built once from a point set.
#[derive(Clone, Debug)]
pub struct SpatialIndex2D<F> {
    points: Vec<Vec2<F>>,
    root: Node,
    center: Vec2<F>,
    half: F,
}

impl<F: Real> SpatialIndex2D<F> {
    pub fn from_points<I: IntoIterator<Item = Vec2<F>>>(points: I) -> Self {
        let points: Vec<Vec2<F>> = points.into_iter().collect();
        let mut idx = Self {
            points: Vec::new(),
            root: Node::Leaf(Vec::new()),
            center: Vec2::zero(),
            half: F::one(),
        };
        if points.is_empty() {
            return idx;
        }
        let mut lo = points[0];
        let mut hi = points[0];
        for p in &points {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        let span = (hi.x - lo.x).max(hi.y - lo.y);
        idx.center = (lo + hi) * F::half();
        // pad so boundary points sit strictly inside
        idx.half = span * F::half() + F::of(1e-9) + span * F::of(1e-9);
        idx.points = points;
        for i in 0..idx.points.len() {
            let p = idx.points[i];
            insert(&mut idx.root, idx.center, idx.half, p, i as u32, &idx.points, 0);
        }
        idx
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec2<F>] {
        &self.points
    }

    /// Exact nearest neighbor: `(distance, attaining point)`, ties broken by
    /// lowest insertion order.
    pub fn nearest(&self, query: Vec2<F>) -> Result<(F, Vec2<F>), GeometryError> {
        let (d2, id) = self.nearest_id(query)?;
        Ok((d2.sqrt(), self.points[id as usize]))
    }

    /// Nearest neighbor returning squared distance and insertion id.
    pub fn nearest_id(&self, query: Vec2<F>) -> Result<(F, u32), GeometryError> {
        if self.points.is_empty() {
            return Err(GeometryError::EmptyIndex);
        }
        let mut best = (F::infinity(), u32::MAX);
        search(&self.root, self.center, self.half, query, &self.points, &mut best);
        Ok(best)
    }
}

fn quadrant<F: Real>(center: Vec2<F>, p: Vec2<F>) -> usize {
    (usize::from(p.x >= center.x)) | (usize::from(p.y >= center.y) << 1)
}

fn child_center<F: Real>(center: Vec2<F>, half: F, q: usize) -> Vec2<F> {
    let h = half * F::half();
    Vec2::new(
        if q & 1 == 1 { center.x + h } else { center.x - h },
        if q & 2 == 2 { center.y + h } else { center.y - h },
    )
}

fn insert<F: Real>(
    node: &mut Node,
    center: Vec2<F>,
    half: F,
    p: Vec2<F>,
    id: u32,
    points: &[Vec2<F>],
    depth: usize,
) {
    match node {
        Node::Leaf(ids) => {
            if ids.len() < LEAF_CAPACITY || depth >= MAX_DEPTH {
                ids.push(id);
                return;
            }
            let old = std::mem::take(ids);
            let mut children: Box<[Node; 4]> = Box::new([
                Node::Leaf(Vec::new()),
                Node::Leaf(Vec::new()),
                Node::Leaf(Vec::new()),
                Node::Leaf(Vec::new()),
            ]);
            for oid in old {
                let op = points[oid as usize];
                let q = quadrant(center, op);
                insert(&mut children[q], child_center(center, half, q), half * F::half(), op, oid, points, depth + 1);
            }
            *node = Node::Branch(children);
            insert(node, center, half, p, id, points, depth);
        }
        Node::Branch(children) => {
            let q = quadrant(center, p);
            insert(&mut children[q], child_center(center, half, q), half * F::half(), p, id, points, depth + 1);
        }
    }
}

/// Squared distance from `q` to the node's square.
fn cell_dist_sq<F: Real>(center: Vec2<F>, half: F, q: Vec2<F>) -> F {
    let dx = ((q.x - center.x).abs() - half).max(F::zero());
    let dy = ((q.y - center.y).abs() - half).max(F::zero());
    dx * dx + dy * dy
}

fn search<F: Real>(
    node: &Node,
    center: Vec2<F>,
    half: F,
    query: Vec2<F>,
    points: &[Vec2<F>],
    best: &mut (F, u32),
) {
    match node {
        Node::Leaf(ids) => {
            for &id in ids {
                let d2 = query.dist_sq(points[id as usize]);
                if d2 < best.0 || (d2 == best.0 && id < best.1) {
                    *best = (d2, id);
                }
            }
        }
        Node::Branch(children) => {
            // visit the query's quadrant first, then the rest by proximity
            let mut order = [0usize, 1, 2, 3];
            let qq = quadrant(center, query);
            order.swap(0, qq);
            order[1..].sort_by(|&a, &b| {
                let da = cell_dist_sq(child_center(center, half, a), half * F::half(), query);
                let db = cell_dist_sq(child_center(center, half, b), half * F::half(), query);
                da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
            });
            for q in order {
                let cc = child_center(center, half, q);
                let ch = half * F::half();
                // <= so that equal-distance cells are still searched (tie on id)
                if cell_dist_sq(cc, ch, query) <= best.0 {
                    search(&children[q], cc, ch, query, points, best);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn linear_scan(points: &[Vec2<f64>], q: Vec2<f64>) -> (f64, u32) {
        let mut best = (f64::INFINITY, u32::MAX);
        for (i, p) in points.iter().enumerate() {
            let d2 = q.dist_sq(*p);
            if d2 < best.0 || (d2 == best.0 && (i as u32) < best.1) {
                best = (d2, i as u32);
            }
        }
        best
    }

    #[test]
    fn single_point() {
        let idx = SpatialIndex2D::from_points(vec![Vec2::new(0.0f64, 0.0)]);
        let (d, p) = idx.nearest(Vec2::new(3.0, 4.0)).unwrap();
        assert_eq!(d, 5.0);
        assert_eq!(p, Vec2::new(0.0, 0.0));
    }

    #[test]
    fn empty_index_errors() {
        let idx: SpatialIndex2D<f64> = SpatialIndex2D::from_points(vec![]);
        assert!(matches!(idx.nearest(Vec2::zero()), Err(GeometryError::EmptyIndex)));
    }

    #[test]
    fn matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let points: Vec<Vec2<f64>> = (0..10_000)
            .map(|_| Vec2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)))
            .collect();
        let idx = SpatialIndex2D::from_points(points.clone());
        for _ in 0..100 {
            let q = Vec2::new(rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0));
            let (d2, id) = idx.nearest_id(q).unwrap();
            let (ld2, lid) = linear_scan(&points, q);
            assert_eq!(d2, ld2);
            assert_eq!(id, lid);
        }
    }

    #[test]
    fn duplicate_points_tie_break_lowest_id() {
        let p = Vec2::new(1.0f64, 1.0);
        let points = vec![p; 40]; // deeper than MAX_DEPTH splits can separate
        let idx = SpatialIndex2D::from_points(points);
        let (_, id) = idx.nearest_id(Vec2::new(0.0, 0.0)).unwrap();
        assert_eq!(id, 0);
    }

    #[test]
    fn f32_instantiation() {
        let points = vec![Vec2::new(0.0f32, 0.0), Vec2::new(1.0, 0.0)];
        let idx = SpatialIndex2D::from_points(points);
        let (d, p) = idx.nearest(Vec2::new(0.9, 0.0)).unwrap();
        assert!((d - 0.1).abs() < 1e-6);
        assert_eq!(p, Vec2::new(1.0, 0.0));
    }
}
