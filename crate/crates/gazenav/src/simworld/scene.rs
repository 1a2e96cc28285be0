//! Ground-truth synthetic scenes: box/disk primitives on a rectangular
//! floor, per-object operation directions, and the analytic queries (ray
//! casting, footprint distances) the simulator is built on.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{Point2, Point3, Scalar};

/// Segmentation id reserved for the floor plane.
pub const FLOOR_ID: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error("object {0} not present in scene")]
    UnknownObject(u32),
    #[error("object {0} has no operation direction")]
    NoOperationDirection(u32),
}

/// Footprint shape of a primitive; the 3D body is the vertical extrusion
/// from z = 0 to the primitive height.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Box { size: [Scalar; 2], yaw: Scalar },
    Disk { radius: Scalar },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub object_id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub center: Point2,
    pub height: Scalar,
    pub shape: Shape,
    /// Unit vector pointing from the object toward the side it is operated
    /// from (e.g. the refrigerator-door front).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operation_direction: Option<Point2>,
}

impl Primitive {
    /// Map a world point into the footprint's local frame.
    fn to_local(&self, p: Point2) -> Point2 {
        let rel = p - self.center;
        match self.shape {
            Shape::Box { yaw, .. } => rel.rotated(-yaw),
            Shape::Disk { .. } => rel,
        }
    }

    /// Distance from `p` to the footprint (0 inside).
    pub fn footprint_distance(&self, p: Point2) -> Scalar {
        let l = self.to_local(p);
        match self.shape {
            Shape::Box { size, .. } => {
                let dx = (l.x.abs() - size[0] * 0.5).max(0.0);
                let dy = (l.y.abs() - size[1] * 0.5).max(0.0);
                (dx * dx + dy * dy).sqrt()
            }
            Shape::Disk { radius } => (l.norm() - radius).max(0.0),
        }
    }

    pub fn footprint_contains(&self, p: Point2) -> bool {
        let l = self.to_local(p);
        match self.shape {
            Shape::Box { size, .. } => l.x.abs() <= size[0] * 0.5 && l.y.abs() <= size[1] * 0.5,
            Shape::Disk { radius } => l.norm() <= radius,
        }
    }

    /// Point where the ray from the footprint center along `dir` exits the
    /// footprint boundary.
    pub fn boundary_point_along(&self, dir: Point2) -> Point2 {
        let dir = dir.normalized().expect("non-zero direction");
        let t = match self.shape {
            Shape::Box { size, yaw } => {
                let l = dir.rotated(-yaw);
                let tx = if l.x.abs() > 1e-12 {
                    size[0] * 0.5 / l.x.abs()
                } else {
                    Scalar::INFINITY
                };
                let ty = if l.y.abs() > 1e-12 {
                    size[1] * 0.5 / l.y.abs()
                } else {
                    Scalar::INFINITY
                };
                tx.min(ty)
            }
            Shape::Disk { radius } => radius,
        };
        self.center + dir * t
    }

    /// Nearest positive ray parameter hitting the extruded body.
    pub fn ray_hit(&self, origin: Point3, dir: Point3) -> Option<Scalar> {
        match self.shape {
            Shape::Box { size, yaw } => {
                let o2 = (origin.xy() - self.center).rotated(-yaw);
                let d2 = dir.xy().rotated(-yaw);
                slab_hit(
                    Point3::new(o2.x, o2.y, origin.z),
                    Point3::new(d2.x, d2.y, dir.z),
                    Point3::new(-size[0] * 0.5, -size[1] * 0.5, 0.0),
                    Point3::new(size[0] * 0.5, size[1] * 0.5, self.height),
                )
            }
            Shape::Disk { radius } => {
                cylinder_hit(origin - Point3::new(self.center.x, self.center.y, 0.0), dir, radius, self.height)
            }
        }
    }

    /// Does the 2D segment `a..b` cross this footprint?
    pub fn segment_crosses(&self, a: Point2, b: Point2) -> bool {
        match self.shape {
            Shape::Box { size, yaw: _ } => {
                let la = self.to_local(a);
                let lb = self.to_local(b);
                segment_aabb_overlap(la, lb, size[0] * 0.5, size[1] * 0.5)
            }
            Shape::Disk { radius } => segment_point_distance(a, b, self.center) < radius,
        }
    }
}

fn slab_hit(origin: Point3, dir: Point3, lo: Point3, hi: Point3) -> Option<Scalar> {
    let mut t0: Scalar = 1e-9;
    let mut t1 = Scalar::INFINITY;
    for (o, d, l, h) in [
        (origin.x, dir.x, lo.x, hi.x),
        (origin.y, dir.y, lo.y, hi.y),
        (origin.z, dir.z, lo.z, hi.z),
    ] {
        if d.abs() < 1e-12 {
            if o < l || o > h {
                return None;
            }
            continue;
        }
        let (mut a, mut b) = ((l - o) / d, (h - o) / d);
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        t0 = t0.max(a);
        t1 = t1.min(b);
        if t0 > t1 {
            return None;
        }
    }
    Some(t0)
}

fn cylinder_hit(origin: Point3, dir: Point3, radius: Scalar, height: Scalar) -> Option<Scalar> {
    let mut best = Scalar::INFINITY;
    // lateral surface
    let (ox, oy, dx, dy) = (origin.x, origin.y, dir.x, dir.y);
    let a = dx * dx + dy * dy;
    if a > 1e-15 {
        let b = 2.0 * (ox * dx + oy * dy);
        let c = ox * ox + oy * oy - radius * radius;
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let s = disc.sqrt();
            for t in [(-b - s) / (2.0 * a), (-b + s) / (2.0 * a)] {
                if t > 1e-9 {
                    let z = origin.z + t * dir.z;
                    if (0.0..=height).contains(&z) {
                        best = best.min(t);
                    }
                }
            }
        }
    }
    // caps
    if dir.z.abs() > 1e-12 {
        for plane_z in [0.0, height] {
            let t = (plane_z - origin.z) / dir.z;
            if t > 1e-9 {
                let x = origin.x + t * dir.x;
                let y = origin.y + t * dir.y;
                if x * x + y * y <= radius * radius {
                    best = best.min(t);
                }
            }
        }
    }
    best.is_finite().then_some(best)
}

fn segment_point_distance(a: Point2, b: Point2, p: Point2) -> Scalar {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq < 1e-18 {
        return a.dist(p);
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    (a + ab * t).dist(p)
}

/// Liang-Barsky overlap test of a segment against an axis-aligned box of
/// half-sizes `(hx, hy)` centered at the origin.
fn segment_aabb_overlap(a: Point2, b: Point2, hx: Scalar, hy: Scalar) -> bool {
    let d = b - a;
    let mut t0: Scalar = 0.0;
    let mut t1: Scalar = 1.0;
    for (o, dd, l, h) in [(a.x, d.x, -hx, hx), (a.y, d.y, -hy, hy)] {
        if dd.abs() < 1e-15 {
            if o < l || o > h {
                return false;
            }
            continue;
        }
        let (mut u, mut v) = ((l - o) / dd, (h - o) / dd);
        if u > v {
            std::mem::swap(&mut u, &mut v);
        }
        t0 = t0.max(u);
        t1 = t1.min(v);
        if t0 > t1 {
            return false;
        }
    }
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartPose {
    pub position: Point2,
    pub heading: Scalar,
}

/// Suggested task shipped with generated scenes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskHint {
    pub text: String,
    pub label: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloorExtent {
    pub min: Point2,
    pub max: Point2,
}

impl FloorExtent {
    pub fn contains(&self, p: Point2, margin: Scalar) -> bool {
        p.x >= self.min.x + margin
            && p.x <= self.max.x - margin
            && p.y >= self.min.y + margin
            && p.y <= self.max.y - margin
    }

    pub fn center(&self) -> Point2 {
        (self.min + self.max) * 0.5
    }

    pub fn span(&self) -> Point2 {
        self.max - self.min
    }
}

/// A complete synthetic environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub name: String,
    pub floor: FloorExtent,
    pub primitives: Vec<Primitive>,
    pub start: StartPose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskHint>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    pub t: Scalar,
    pub object_id: u32,
}

impl SceneSpec {
    pub fn validate(&self, robot_radius: Scalar) -> Result<(), SceneError> {
        let mut seen = std::collections::BTreeSet::new();
        for p in &self.primitives {
            if p.object_id == 0 || p.object_id == FLOOR_ID {
                return Err(SceneError::Invalid(format!(
                    "object_id {} is reserved",
                    p.object_id
                )));
            }
            if !seen.insert(p.object_id) {
                return Err(SceneError::Invalid(format!(
                    "duplicate object_id {}",
                    p.object_id
                )));
            }
            if p.height <= 0.0 {
                return Err(SceneError::Invalid(format!(
                    "object {} has non-positive height",
                    p.object_id
                )));
            }
            if let Some(d) = p.operation_direction {
                if (d.norm() - 1.0).abs() > 1e-6 {
                    return Err(SceneError::Invalid(format!(
                        "object {} operation_direction is not unit length",
                        p.object_id
                    )));
                }
            }
        }
        if self.floor.min.x >= self.floor.max.x || self.floor.min.y >= self.floor.max.y {
            return Err(SceneError::Invalid("empty floor extent".into()));
        }
        if !self.position_free(self.start.position, robot_radius) {
            return Err(SceneError::Invalid("start pose is not collision-free".into()));
        }
        Ok(())
    }

    pub fn primitive(&self, object_id: u32) -> Option<&Primitive> {
        self.primitives.iter().find(|p| p.object_id == object_id)
    }

    /// Lowest object id whose label matches exactly.
    pub fn resolve_label(&self, label: &str) -> Option<u32> {
        self.primitives
            .iter()
            .filter(|p| p.label.as_deref() == Some(label))
            .map(|p| p.object_id)
            .min()
    }

    /// Distance from `p` to the nearest primitive footprint (0 inside one).
    pub fn clearance(&self, p: Point2) -> Scalar {
        self.primitives
            .iter()
            .map(|prim| prim.footprint_distance(p))
            .fold(Scalar::INFINITY, Scalar::min)
    }

    /// Is a robot disk centered at `p` collision-free and on the floor?
    pub fn position_free(&self, p: Point2, robot_radius: Scalar) -> bool {
        self.floor.contains(p, robot_radius) && self.clearance(p) > robot_radius
    }

    /// Nearest hit along a world-space ray (unit `dir` not required; `t` is
    /// in units of `|dir|`). Floor hits report [`FLOOR_ID`].
    pub fn raycast(&self, origin: Point3, dir: Point3) -> Option<RayHit> {
        let mut best: Option<RayHit> = None;
        let mut consider = |t: Scalar, object_id: u32| {
            if best.map_or(true, |b| t < b.t) {
                best = Some(RayHit { t, object_id });
            }
        };
        for prim in &self.primitives {
            if let Some(t) = prim.ray_hit(origin, dir) {
                consider(t, prim.object_id);
            }
        }
        if dir.z < -1e-12 {
            let t = -origin.z / dir.z;
            if t > 1e-9 {
                let p = Point2::new(origin.x + t * dir.x, origin.y + t * dir.y);
                if self.floor.contains(p, 0.0) {
                    consider(t, FLOOR_ID);
                }
            }
        }
        best
    }

    /// Is the straight 2D segment from `a` to `b` blocked by any primitive
    /// footprint other than `exclude`?
    pub fn segment_blocked(&self, a: Point2, b: Point2, exclude: u32) -> bool {
        self.primitives
            .iter()
            .filter(|p| p.object_id != exclude)
            .any(|p| p.segment_crosses(a, b))
    }

    /// Ground-truth pose from which `object_id` is operated: on the boundary
    /// ray along the operation direction, `robot_radius + epsilon` out from
    /// the footprint, heading back at the object center.
    pub fn optimal_operation_pose(
        &self,
        object_id: u32,
        robot_radius: Scalar,
        epsilon: Scalar,
    ) -> Result<(Point2, Scalar), SceneError> {
        let prim = self
            .primitive(object_id)
            .ok_or(SceneError::UnknownObject(object_id))?;
        let dir = prim
            .operation_direction
            .ok_or(SceneError::NoOperationDirection(object_id))?;
        let boundary = prim.boundary_point_along(dir);
        let position = boundary + dir * (robot_radius + epsilon);
        let heading = (prim.center - position).angle();
        Ok((position, heading))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self, SceneError> {
        serde_json::from_str(s).map_err(|e| SceneError::Invalid(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk_scene() -> SceneSpec {
        SceneSpec {
            name: "disk".into(),
            floor: FloorExtent {
                min: Point2::new(-2.5, -2.5),
                max: Point2::new(2.5, 2.5),
            },
            primitives: vec![Primitive {
                object_id: 10,
                label: Some("chair".into()),
                center: Point2::new(0.0, 0.0),
                height: 0.9,
                shape: Shape::Disk { radius: 0.3 },
                operation_direction: Some(Point2::new(1.0, 0.0)),
            }],
            start: StartPose {
                position: Point2::new(-1.5, -1.5),
                heading: 0.0,
            },
            task: None,
        }
    }

    #[test]
    fn optimal_pose_disk_front() {
        let scene = disk_scene();
        let (pos, heading) = scene.optimal_operation_pose(10, 0.2, 0.01).unwrap();
        assert!(pos.dist(Point2::new(0.51, 0.0)) < 1e-12);
        assert!((heading.abs() - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn optimal_pose_symmetry() {
        let mut scene = disk_scene();
        scene.primitives[0].operation_direction = Some(Point2::new(0.0, 1.0));
        let (pos, _) = scene.optimal_operation_pose(10, 0.2, 0.01).unwrap();
        assert!(pos.x.abs() < 1e-12);
        assert!((pos.y - 0.51).abs() < 1e-12);
    }

    #[test]
    fn optimal_pose_requires_direction() {
        let mut scene = disk_scene();
        scene.primitives[0].operation_direction = None;
        assert!(matches!(
            scene.optimal_operation_pose(10, 0.2, 0.01),
            Err(SceneError::NoOperationDirection(10))
        ));
        assert!(matches!(
            scene.optimal_operation_pose(99, 0.2, 0.01),
            Err(SceneError::UnknownObject(99))
        ));
    }

    #[test]
    fn yawed_box_boundary_and_distance() {
        let prim = Primitive {
            object_id: 2,
            label: None,
            center: Point2::new(1.0, 1.0),
            height: 1.0,
            shape: Shape::Box {
                size: [0.6, 0.4],
                yaw: std::f64::consts::FRAC_PI_2,
            },
            operation_direction: None,
        };
        // after a 90 degree yaw, the long side runs along y
        assert!(prim.footprint_contains(Point2::new(1.0, 1.29)));
        assert!(!prim.footprint_contains(Point2::new(1.0, 1.31)));
        assert!((prim.footprint_distance(Point2::new(1.5, 1.0)) - 0.3).abs() < 1e-12);
        let b = prim.boundary_point_along(Point2::new(0.0, 1.0));
        assert!(b.dist(Point2::new(1.0, 1.3)) < 1e-12);
    }

    #[test]
    fn raycast_box_face() {
        let scene = SceneSpec {
            name: "box".into(),
            floor: FloorExtent {
                min: Point2::new(-5.0, -5.0),
                max: Point2::new(5.0, 5.0),
            },
            primitives: vec![Primitive {
                object_id: 2,
                label: None,
                center: Point2::new(2.5, 0.0),
                height: 2.0,
                shape: Shape::Box {
                    size: [1.0, 1.0],
                    yaw: 0.0,
                },
                operation_direction: None,
            }],
            start: StartPose {
                position: Point2::new(-2.0, 0.0),
                heading: 0.0,
            },
            task: None,
        };
        let hit = scene
            .raycast(Point3::new(0.0, 0.0, 1.0), Point3::new(1.0, 0.0, 0.0))
            .unwrap();
        assert!((hit.t - 2.0).abs() < 1e-12);
        assert_eq!(hit.object_id, 2);
        // looking away: only the floor can catch the ray, and a level ray misses it
        assert!(scene
            .raycast(Point3::new(0.0, 0.0, 1.0), Point3::new(-1.0, 0.0, 0.0))
            .is_none());
        // downward ray hits the floor
        let floor = scene
            .raycast(Point3::new(0.0, 0.0, 1.5), Point3::new(0.0, 0.0, -1.0))
            .unwrap();
        assert_eq!(floor.object_id, FLOOR_ID);
        assert!((floor.t - 1.5).abs() < 1e-12);
    }

    #[test]
    fn raycast_cylinder() {
        let prim = Primitive {
            object_id: 3,
            label: None,
            center: Point2::new(2.0, 0.0),
            height: 1.0,
            shape: Shape::Disk { radius: 0.5 },
            operation_direction: None,
        };
        let t = prim
            .ray_hit(Point3::new(0.0, 0.0, 0.5), Point3::new(1.0, 0.0, 0.0))
            .unwrap();
        assert!((t - 1.5).abs() < 1e-12);
        // over the top: no hit
        assert!(prim
            .ray_hit(Point3::new(0.0, 0.0, 1.5), Point3::new(1.0, 0.0, 0.0))
            .is_none());
        // hit the top cap from above
        let t = prim
            .ray_hit(Point3::new(2.0, 0.0, 2.0), Point3::new(0.0, 0.0, -1.0))
            .unwrap();
        assert!((t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn segment_blocking() {
        let scene = disk_scene();
        assert!(scene.segment_blocked(Point2::new(-1.0, 0.0), Point2::new(1.0, 0.0), 99));
        assert!(!scene.segment_blocked(Point2::new(-1.0, 0.0), Point2::new(1.0, 0.0), 10));
        assert!(!scene.segment_blocked(Point2::new(-1.0, 1.0), Point2::new(1.0, 1.0), 99));
    }

    #[test]
    fn validation_catches_duplicates_and_reserved_ids() {
        let mut scene = disk_scene();
        scene.primitives.push(scene.primitives[0].clone());
        assert!(scene.validate(0.2).is_err());
        let mut scene = disk_scene();
        scene.primitives[0].object_id = FLOOR_ID;
        assert!(scene.validate(0.2).is_err());
        let mut scene = disk_scene();
        scene.start.position = Point2::new(0.0, 0.4);
        assert!(scene.validate(0.2).is_err());
        assert!(disk_scene().validate(0.2).is_ok());
    }

    #[test]
    fn scene_json_round_trip() {
        let scene = disk_scene();
        let json = scene.to_json_string();
        let back = SceneSpec::from_json_str(&json).unwrap();
        assert_eq!(back, scene);
    }
}
