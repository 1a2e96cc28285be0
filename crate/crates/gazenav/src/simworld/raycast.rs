//! Simulated RGB-D sensing: per-pixel ray casting producing depth plus
//! oracle segmentation ids, and pinhole back-projection.

use serde::{Deserialize, Serialize};

use crate::geometry::{PointCloud, PointLabel, RigidTransform};
use crate::simworld::scene::SceneSpec;
use crate::{Point2, Point3, Scalar};

/// Pinhole intrinsics. Pixels are addressed at integer coordinates, so the
/// principal pixel `(cx, cy)` lies exactly on the optical axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: Scalar,
    pub fy: Scalar,
    pub cx: Scalar,
    pub cy: Scalar,
}

impl Intrinsics {
    /// Square-pixel intrinsics for an image size and horizontal FOV.
    pub fn for_size(width: usize, height: usize, hfov_deg: Scalar) -> Self {
        let fx = (width as Scalar / 2.0) / (hfov_deg.to_radians() / 2.0).tan();
        Self {
            fx,
            fy: fx,
            cx: width as Scalar / 2.0,
            cy: height as Scalar / 2.0,
        }
    }
}

/// One simulated capture: ray depth (meters along the ray), segmentation ids
/// (0 = no hit), camera pose and intrinsics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<Scalar>,
    pub seg: Vec<u32>,
    /// World-from-camera pose.
    pub pose: RigidTransform<Scalar>,
    pub intrinsics: Intrinsics,
    pub index: u32,
}

/// Cast one ray per pixel against the scene. Depth is the Euclidean distance
/// from the camera center to the nearest hit; misses leave depth 0 / seg 0.
pub fn capture_frame(
    scene: &SceneSpec,
    pose: &RigidTransform<Scalar>,
    intrinsics: &Intrinsics,
    width: usize,
    height: usize,
    index: u32,
) -> Frame {
    let mut depth = vec![0.0; width * height];
    let mut seg = vec![0u32; width * height];
    let origin = pose.translation;
    for v in 0..height {
        for u in 0..width {
            let dir_cam = Point3::new(
                (u as Scalar - intrinsics.cx) / intrinsics.fx,
                (v as Scalar - intrinsics.cy) / intrinsics.fy,
                1.0,
            );
            let dir = pose
                .apply_rotation(dir_cam)
                .normalized()
                .expect("pixel ray is never zero");
            if let Some(hit) = scene.raycast(origin, dir) {
                depth[v * width + u] = hit.t;
                seg[v * width + u] = hit.object_id;
            }
        }
    }
    Frame {
        width,
        height,
        depth,
        seg,
        pose: *pose,
        intrinsics: *intrinsics,
        index,
    }
}

impl Frame {
    pub fn at(&self, u: usize, v: usize) -> (Scalar, u32) {
        let i = v * self.width + u;
        (self.depth[i], self.seg[i])
    }

    /// Unit ray direction of pixel `(u, v)` in world coordinates.
    pub fn pixel_ray(&self, u: Scalar, v: Scalar) -> Point3 {
        let dir_cam = Point3::new(
            (u - self.intrinsics.cx) / self.intrinsics.fx,
            (v - self.intrinsics.cy) / self.intrinsics.fy,
            1.0,
        );
        self.pose
            .apply_rotation(dir_cam)
            .normalized()
            .expect("pixel ray is never zero")
    }

    /// World point of a hit pixel; `None` where depth is 0.
    pub fn back_project(&self, u: usize, v: usize) -> Option<Point3> {
        let (d, _) = self.at(u, v);
        (d > 0.0).then(|| self.pose.translation + self.pixel_ray(u as Scalar, v as Scalar) * d)
    }

    /// Project a world point to pixel coordinates; `None` behind the camera.
    pub fn project(&self, p: Point3) -> Option<(Scalar, Scalar)> {
        let cam = self.pose.inverse().apply(p);
        if cam.z <= 1e-9 {
            return None;
        }
        Some((
            self.intrinsics.cx + self.intrinsics.fx * cam.x / cam.z,
            self.intrinsics.cy + self.intrinsics.fy * cam.y / cam.z,
        ))
    }

    pub fn camera_position(&self) -> Point2 {
        self.pose.translation.xy()
    }

    /// Back-project every hit pixel; points of `object_id` are labeled
    /// `Object`, everything else `Other`.
    pub fn to_cloud(&self, object_id: Option<u32>) -> PointCloud<Scalar> {
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for v in 0..self.height {
            for u in 0..self.width {
                let (d, id) = self.at(u, v);
                if d <= 0.0 {
                    continue;
                }
                points.push(self.pose.translation + self.pixel_ray(u as Scalar, v as Scalar) * d);
                labels.push(if Some(id) == object_id {
                    PointLabel::Object
                } else {
                    PointLabel::Other
                });
            }
        }
        PointCloud {
            points,
            labels: Some(labels),
        }
    }

    /// Back-project only the pixels of one segment.
    pub fn segment_cloud(&self, object_id: u32) -> PointCloud<Scalar> {
        let mut points = Vec::new();
        for v in 0..self.height {
            for u in 0..self.width {
                let (d, id) = self.at(u, v);
                if d > 0.0 && id == object_id {
                    points.push(self.pose.translation + self.pixel_ray(u as Scalar, v as Scalar) * d);
                }
            }
        }
        PointCloud {
            labels: Some(vec![PointLabel::Object; points.len()]),
            points,
        }
    }

    /// Distinct non-zero segment ids with pixel counts, ascending by id.
    pub fn segments(&self) -> Vec<(u32, usize)> {
        let mut counts = std::collections::BTreeMap::new();
        for &id in &self.seg {
            if id != 0 {
                *counts.entry(id).or_insert(0usize) += 1;
            }
        }
        counts.into_iter().collect()
    }

    pub fn pixel_count_of(&self, ids: &[u32]) -> usize {
        self.seg.iter().filter(|id| ids.contains(id)).count()
    }
}

/// Robot poses (position, heading) on a ring around the floor center; every
/// ring position contributes an outward-facing and an inward-facing view so
/// both wall-adjacent and central objects are covered. Positions that are
/// not collision-free are skipped. This is the one-shot exploration pass
/// that produces the scene image set.
pub fn exploration_ring(scene: &SceneSpec, count: usize, robot_radius: Scalar) -> Vec<(Point2, Scalar)> {
    let center = scene.floor.center();
    let span = scene.floor.span();
    let radius = 0.22 * span.x.min(span.y);
    let mut poses = Vec::new();
    for k in 0..count {
        let a = std::f64::consts::TAU * k as Scalar / count as Scalar;
        let pos = center + Point2::from_angle(a) * radius;
        if scene.position_free(pos, robot_radius) {
            poses.push((pos, a));
            poses.push((pos, crate::scalar::wrap_angle(a + std::f64::consts::PI)));
        }
    }
    poses
}

/// Capture one frame per pose (level pitch, camera height), indexed 1..N.
pub fn scene_image_set(
    scene: &SceneSpec,
    poses: &[(Point2, Scalar)],
    intrinsics: &Intrinsics,
    width: usize,
    height: usize,
) -> Vec<Frame> {
    use crate::simworld::robot::RobotState;
    poses
        .iter()
        .enumerate()
        .map(|(i, &(position, heading))| {
            let state = RobotState::new(position, heading);
            capture_frame(scene, &state.camera_pose(), intrinsics, width, height, (i + 1) as u32)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::robot::RobotState;
    use crate::simworld::scene::{FloorExtent, Primitive, Shape, StartPose, FLOOR_ID};

    fn box_scene() -> SceneSpec {
        SceneSpec {
            name: "box".into(),
            floor: FloorExtent {
                min: Point2::new(-5.0, -5.0),
                max: Point2::new(5.0, 5.0),
            },
            primitives: vec![Primitive {
                object_id: 7,
                label: Some("crate".into()),
                center: Point2::new(2.5, 0.0),
                height: 3.0,
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
        }
    }

    #[test]
    fn principal_pixel_depth() {
        let scene = box_scene();
        let state = RobotState::new(Point2::zero(), 0.0);
        let intr = Intrinsics::for_size(160, 120, 90.0);
        let frame = capture_frame(&scene, &state.camera_pose(), &intr, 160, 120, 1);
        let (d, id) = frame.at(80, 60);
        assert_eq!(id, 7);
        assert!((d - 2.0).abs() < 1e-9, "depth {d}");
    }

    #[test]
    fn empty_half_space_is_all_miss() {
        let mut scene = box_scene();
        scene.primitives.clear();
        scene.floor.max = Point2::new(-1.0, 5.0); // no floor ahead either
        scene.floor.min = Point2::new(-5.0, -5.0);
        let state = RobotState::new(Point2::zero(), 0.0);
        let intr = Intrinsics::for_size(32, 24, 90.0);
        let frame = capture_frame(&scene, &state.camera_pose(), &intr, 32, 24, 1);
        assert!(frame.depth.iter().all(|&d| d == 0.0));
        assert!(frame.seg.iter().all(|&s| s == 0));
    }

    #[test]
    fn depth_seg_consistency() {
        let scene = box_scene();
        let state = RobotState::new(Point2::zero(), 0.3);
        let intr = Intrinsics::for_size(64, 48, 90.0);
        let frame = capture_frame(&scene, &state.camera_pose(), &intr, 64, 48, 1);
        for i in 0..frame.depth.len() {
            assert_eq!(frame.seg[i] != 0, frame.depth[i] > 0.0);
        }
    }

    #[test]
    fn back_projection_lands_on_surfaces() {
        let scene = box_scene();
        let state = RobotState::new(Point2::zero(), 0.1);
        let intr = Intrinsics::for_size(64, 48, 90.0);
        let frame = capture_frame(&scene, &state.camera_pose(), &intr, 64, 48, 1);
        let prim = &scene.primitives[0];
        for v in 0..48 {
            for u in 0..64 {
                let Some(p) = frame.back_project(u, v) else {
                    continue;
                };
                let (_, id) = frame.at(u, v);
                let err = if id == FLOOR_ID {
                    p.z.abs()
                } else {
                    // on the box surface: either on a side face (footprint
                    // boundary) or the top plane
                    let side = prim.footprint_distance(p.xy());
                    let top = (p.z - prim.height).abs();
                    side.min(top)
                };
                assert!(err < 1e-6, "pixel ({u},{v}) off-surface by {err}");
            }
        }
    }

    #[test]
    fn project_back_project_round_trip() {
        let scene = box_scene();
        let state = RobotState::new(Point2::new(0.2, -0.4), 0.15);
        let intr = Intrinsics::for_size(64, 48, 90.0);
        let frame = capture_frame(&scene, &state.camera_pose(), &intr, 64, 48, 1);
        for v in (0..48).step_by(5) {
            for u in (0..64).step_by(7) {
                let Some(p) = frame.back_project(u, v) else {
                    continue;
                };
                let (pu, pv) = frame.project(p).expect("hit point is in front");
                assert!((pu - u as f64).abs() < 0.5 && (pv - v as f64).abs() < 0.5);
            }
        }
    }

    #[test]
    fn segment_listing_and_clouds() {
        let scene = box_scene();
        let state = RobotState::new(Point2::zero(), 0.0);
        let intr = Intrinsics::for_size(64, 48, 90.0);
        let frame = capture_frame(&scene, &state.camera_pose(), &intr, 64, 48, 1);
        let segs = frame.segments();
        assert!(segs.iter().any(|&(id, n)| id == 7 && n > 0));
        let box_pixels = segs.iter().find(|&&(id, _)| id == 7).unwrap().1;
        let cloud = frame.segment_cloud(7);
        assert_eq!(cloud.len(), box_pixels);
        let full = frame.to_cloud(Some(7));
        let object_points = full
            .labels
            .as_ref()
            .unwrap()
            .iter()
            .filter(|l| **l == crate::geometry::PointLabel::Object)
            .count();
        assert_eq!(object_points, box_pixels);
    }

    #[test]
    fn image_set_indices_and_visibility() {
        let scene = box_scene();
        let intr = Intrinsics::for_size(64, 48, 90.0);
        let poses: Vec<(Point2, Scalar)> = (0..8)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / 8.0;
                (Point2::from_angle(a) * 1.0, a)
            })
            .collect();
        let frames = scene_image_set(&scene, &poses, &intr, 64, 48);
        assert_eq!(frames.len(), 8);
        assert_eq!(frames.iter().map(|f| f.index).collect::<Vec<_>>(), (1..=8).collect::<Vec<u32>>());
        // a frame looking away from the box (heading pi) sees no box pixel
        let away = &frames[4];
        assert_eq!(away.pixel_count_of(&[7]), 0);
        // the frame looking at it does
        assert!(frames[0].pixel_count_of(&[7]) > 0);
        // empty pose list -> empty set
        assert!(scene_image_set(&scene, &[], &intr, 64, 48).is_empty());
    }
}
