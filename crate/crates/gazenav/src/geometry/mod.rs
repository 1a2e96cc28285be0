//! Point clouds, plane fitting, ground-frame projection and a 2D spatial
//! index — the scalar-generic geometry core.

mod quadtree;
mod ransac;
mod vec;

pub use quadtree::SpatialIndex2D;
pub use ransac::{fit_ground_plane, jacobi_eigen_sym3, least_squares_plane, plane_from_points};
pub use vec::{RigidTransform, Vec2, Vec3};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeometryError {
    #[error("cloud has fewer than 3 points or no non-collinear triple")]
    DegenerateCloud,
    #[error("spatial index is empty")]
    EmptyIndex,
    #[error("malformed point cloud text: {0}")]
    MalformedText(String),
}

/// Per-point class tag carried through cloud fusion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointLabel {
    Object,
    Other,
}

/// A labeled 3D point cloud in the world frame.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud<F> {
    pub points: Vec<Vec3<F>>,
    /// When present, same length as `points`.
    pub labels: Option<Vec<PointLabel>>,
}

impl<F: Real> PointCloud<F> {
    pub fn new(points: Vec<Vec3<F>>) -> Self {
        Self { points, labels: None }
    }

    pub fn with_labels(points: Vec<Vec3<F>>, labels: Vec<PointLabel>) -> Self {
        assert_eq!(points.len(), labels.len());
        Self {
            points,
            labels: Some(labels),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn label(&self, i: usize) -> PointLabel {
        self.labels.as_ref().map_or(PointLabel::Other, |l| l[i])
    }

    /// Append another cloud; labels are kept if both sides carry them (a
    /// label-less side contributes `Other`).
    pub fn extend(&mut self, other: &PointCloud<F>) {
        let need_labels = self.labels.is_some() || other.labels.is_some();
        if need_labels && self.labels.is_none() {
            self.labels = Some(vec![PointLabel::Other; self.points.len()]);
        }
        self.points.extend_from_slice(&other.points);
        if let Some(labels) = &mut self.labels {
            match &other.labels {
                Some(ol) => labels.extend_from_slice(ol),
                None => labels.extend(std::iter::repeat(PointLabel::Other).take(other.points.len())),
            }
        }
    }

    pub fn is_valid(&self) -> bool {
        self.points.iter().all(|p| p.is_finite())
            && self.labels.as_ref().map_or(true, |l| l.len() == self.points.len())
    }

    /// Whitespace-delimited `x y z [label]` dump for debugging.
    pub fn to_xyz_text(&self) -> String {
        let mut out = String::new();
        for (i, p) in self.points.iter().enumerate() {
            out.push_str(&format!("{} {} {}", p.x, p.y, p.z));
            if self.labels.is_some() {
                out.push_str(match self.label(i) {
                    PointLabel::Object => " object",
                    PointLabel::Other => " other",
                });
            }
            out.push('\n');
        }
        out
    }

    pub fn from_xyz_text(text: &str) -> Result<Self, GeometryError> {
        let mut points = Vec::new();
        let mut labels = Vec::new();
        let mut any_label = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 && fields.len() != 4 {
                return Err(GeometryError::MalformedText(format!(
                    "line {}: expected 3 or 4 fields",
                    lineno + 1
                )));
            }
            let mut coord = [F::zero(); 3];
            for (i, f) in fields[..3].iter().enumerate() {
                let v: f64 = f
                    .parse()
                    .map_err(|_| GeometryError::MalformedText(format!("line {}: bad number", lineno + 1)))?;
                coord[i] = F::of(v);
            }
            points.push(Vec3::new(coord[0], coord[1], coord[2]));
            if fields.len() == 4 {
                any_label = true;
                labels.push(match fields[3] {
                    "object" => PointLabel::Object,
                    "other" => PointLabel::Other,
                    other => {
                        return Err(GeometryError::MalformedText(format!(
                            "line {}: unknown label {other:?}",
                            lineno + 1
                        )))
                    }
                });
            } else {
                labels.push(PointLabel::Other);
            }
        }
        Ok(Self {
            points,
            labels: any_label.then_some(labels),
        })
    }
}

/// Plane `n . x + d = 0` with unit normal, plus the supporting inliers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneModel<F> {
    pub normal: Vec3<F>,
    pub offset: F,
    pub inlier_indices: Vec<usize>,
}

impl<F: Real> PlaneModel<F> {
    pub fn signed_distance(&self, p: Vec3<F>) -> F {
        self.normal.dot(p) + self.offset
    }

    pub fn distance(&self, p: Vec3<F>) -> F {
        self.signed_distance(p).abs()
    }
}

/// Fixed 2D coordinate frame on a plane: origin is the plane's foot of the
/// world origin, axes are right-handed with the plane normal.
#[derive(Clone, Copy, Debug)]
pub struct GroundFrame<F> {
    pub origin: Vec3<F>,
    pub e1: Vec3<F>,
    pub e2: Vec3<F>,
    pub normal: Vec3<F>,
}

impl<F: Real> GroundFrame<F> {
    pub fn from_plane(plane: &PlaneModel<F>) -> Self {
        let n = plane.normal;
        let origin = -n * plane.offset;
        let seed = if n.x.abs() < F::of(0.9) {
            Vec3::new(F::one(), F::zero(), F::zero())
        } else {
            Vec3::new(F::zero(), F::one(), F::zero())
        };
        let e1 = (seed - n * seed.dot(n)).normalized().expect("unit normal");
        let e2 = n.cross(e1);
        Self { origin, e1, e2, normal: n }
    }

    /// Orthogonal projection expressed in frame coordinates.
    pub fn project(&self, p: Vec3<F>) -> Vec2<F> {
        let q = p - self.origin;
        Vec2::new(q.dot(self.e1), q.dot(self.e2))
    }

    /// Lift frame coordinates back onto the plane.
    pub fn lift(&self, p: Vec2<F>) -> Vec3<F> {
        self.origin + self.e1 * p.x + self.e2 * p.y
    }
}

/// Project every point of `cloud` orthogonally onto `plane`, expressed in the
/// plane's canonical 2D frame. Output order follows input order.
pub fn project_to_ground<F: Real>(cloud: &PointCloud<F>, plane: &PlaneModel<F>) -> Vec<Vec2<F>> {
    let frame = GroundFrame::from_plane(plane);
    cloud.points.iter().map(|&p| frame.project(p)).collect()
}

/// Apply a rigid transform to every point; labels carry through.
pub fn transform_cloud<F: Real>(cloud: &PointCloud<F>, pose: &RigidTransform<F>) -> PointCloud<F> {
    PointCloud {
        points: cloud.points.iter().map(|&p| pose.apply(p)).collect(),
        labels: cloud.labels.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn flat_cloud(n: usize) -> PointCloud<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        PointCloud::new(
            (0..n)
                .map(|_| Vec3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), 0.0))
                .collect(),
        )
    }

    #[test]
    fn exact_plane_recovered() {
        let cloud = flat_cloud(1000);
        let plane = fit_ground_plane(&cloud, 200, 0.01, 1).unwrap();
        assert!(plane.normal.dist(Vec3::new(0.0, 0.0, 1.0)) < 1e-9);
        assert!(plane.offset.abs() < 1e-9);
        assert_eq!(plane.inlier_indices.len(), 1000);
    }

    #[test]
    fn two_points_degenerate() {
        let cloud = PointCloud::new(vec![Vec3::new(0.0f64, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)]);
        assert!(matches!(
            fit_ground_plane(&cloud, 100, 0.01, 1),
            Err(GeometryError::DegenerateCloud)
        ));
    }

    #[test]
    fn all_collinear_degenerate() {
        let cloud = PointCloud::new((0..10).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect());
        assert!(matches!(
            fit_ground_plane(&cloud, 100, 0.01, 1),
            Err(GeometryError::DegenerateCloud)
        ));
    }

    #[test]
    fn noisy_plane_with_outliers_matches_least_squares_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut points = Vec::new();
        for _ in 0..700 {
            points.push(Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-0.005..0.005),
            ));
        }
        for _ in 0..300 {
            points.push(Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.05..2.0),
            ));
        }
        let cloud = PointCloud::new(points);
        let plane = fit_ground_plane(&cloud, 500, 0.01, 3).unwrap();

        // oracle: least-squares fit z = ax + by + c on the known inliers,
        // solved through its own normal equations
        let known: Vec<Vec3<f64>> = cloud.points[..700].to_vec();
        let (mut sxx, mut sxy, mut sx, mut syy, mut sy, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let (mut sxz, mut syz, mut sz) = (0.0, 0.0, 0.0);
        for p in &known {
            sxx += p.x * p.x;
            sxy += p.x * p.y;
            sx += p.x;
            syy += p.y * p.y;
            sy += p.y;
            n += 1.0;
            sxz += p.x * p.z;
            syz += p.y * p.z;
            sz += p.z;
        }
        // solve [sxx sxy sx; sxy syy sy; sx sy n] [a b c]' = [sxz syz sz]'
        let m = [[sxx, sxy, sx], [sxy, syy, sy], [sx, sy, n]];
        let rhs = [sxz, syz, sz];
        let det = |m: &[[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let d0 = det(&m);
        let mut sol = [0.0f64; 3];
        for i in 0..3 {
            let mut mi = m;
            for r in 0..3 {
                mi[r][i] = rhs[r];
            }
            sol[i] = det(&mi) / d0;
        }
        let (a, b, c) = (sol[0], sol[1], sol[2]);
        let len = (a * a + b * b + 1.0).sqrt();
        let oracle_n = Vec3::new(-a / len, -b / len, 1.0 / len);
        let oracle_d = -c / len;

        let cos = plane.normal.dot(oracle_n).clamp(-1.0, 1.0);
        assert!(cos.acos().to_degrees() < 1.0, "normal error too large");
        assert!((plane.offset - oracle_d).abs() < 0.01, "offset error too large");
        assert!(plane.normal.dist(Vec3::new(0.0, 0.0, 1.0)) < 1f64.to_radians() * 1.5);
    }

    #[test]
    fn ransac_deterministic_for_fixed_seed() {
        let cloud = flat_cloud(500);
        let a = fit_ground_plane(&cloud, 300, 0.01, 5).unwrap();
        let b = fit_ground_plane(&cloud, 300, 0.01, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn inlier_count_invariant_under_rotation_about_normal() {
        let mut cloud = flat_cloud(400);
        // push a few points clearly off-plane; keep everything away from the
        // tolerance boundary so rotation round-off cannot flip membership
        for i in 0..50 {
            cloud.points[i].z = 0.5 + i as f64 * 0.01;
        }
        let base = fit_ground_plane(&cloud, 300, 0.01, 11).unwrap();
        let rot = RigidTransform::from_yaw_translation(1.1f64, Vec3::zero());
        let rotated = transform_cloud(&cloud, &rot);
        let turned = fit_ground_plane(&rotated, 300, 0.01, 11).unwrap();
        assert_eq!(base.inlier_indices.len(), turned.inlier_indices.len());
    }

    #[test]
    fn project_axis_aligned() {
        let plane = PlaneModel {
            normal: Vec3::new(0.0f64, 0.0, 1.0),
            offset: 0.0,
            inlier_indices: vec![],
        };
        let cloud = PointCloud::new(vec![Vec3::new(1.0, 2.0, 3.0)]);
        let pts = project_to_ground(&cloud, &plane);
        assert_eq!(pts, vec![Vec2::new(1.0, 2.0)]);
        let empty: PointCloud<f64> = PointCloud::new(vec![]);
        assert!(project_to_ground(&empty, &plane).is_empty());
    }

    #[test]
    fn projection_is_isometric_on_plane_points() {
        let ang = 10f64.to_radians();
        let plane = PlaneModel {
            normal: Vec3::new(0.0, ang.sin(), ang.cos()),
            offset: 0.3,
            inlier_indices: vec![],
        };
        let frame = GroundFrame::from_plane(&plane);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pts: Vec<Vec3<f64>> = (0..50)
            .map(|_| frame.lift(Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))))
            .collect();
        let proj = project_to_ground(&PointCloud::new(pts.clone()), &plane);
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let d3 = pts[i].dist(pts[j]);
                let d2 = proj[i].dist(proj[j]);
                assert!((d3 - d2).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn projection_idempotent_via_lift() {
        let plane = PlaneModel {
            normal: Vec3::new(0.1f64, -0.2, 0.97).normalized().unwrap(),
            offset: -0.4,
            inlier_indices: vec![],
        };
        let frame = GroundFrame::from_plane(&plane);
        let p = Vec2::new(1.25, -0.75);
        let again = frame.project(frame.lift(p));
        assert!(p.dist(again) < 1e-12);
    }

    #[test]
    fn transform_cloud_identity_and_translation() {
        let cloud = PointCloud::with_labels(
            vec![Vec3::new(0.0f64, 0.0, 0.0)],
            vec![PointLabel::Object],
        );
        let id = transform_cloud(&cloud, &RigidTransform::identity());
        assert_eq!(id, cloud);
        let t = RigidTransform::from_translation(Vec3::new(1.0, 0.0, 0.0));
        let moved = transform_cloud(&cloud, &t);
        assert_eq!(moved.points, vec![Vec3::new(1.0, 0.0, 0.0)]);
        assert_eq!(moved.labels, cloud.labels);
    }

    #[test]
    fn xyz_text_round_trip() {
        let cloud = PointCloud::with_labels(
            vec![Vec3::new(1.5f64, -2.0, 0.25), Vec3::new(0.0, 0.0, 1.0)],
            vec![PointLabel::Object, PointLabel::Other],
        );
        let text = cloud.to_xyz_text();
        let back = PointCloud::from_xyz_text(&text).unwrap();
        assert_eq!(back, cloud);
        assert!(PointCloud::<f64>::from_xyz_text("1 2").is_err());
    }

    #[test]
    fn f32_plane_fit() {
        let pts: Vec<Vec3<f32>> = (0..100)
            .map(|i| Vec3::new((i % 10) as f32 * 0.1, (i / 10) as f32 * 0.1, 0.0))
            .collect();
        let plane = fit_ground_plane(&PointCloud::new(pts), 200, 0.01, 2).unwrap();
        assert!(plane.normal.dist(Vec3::new(0.0, 0.0, 1.0)) < 1e-4);
    }
}
