//! Task-aware object navigation and simulation.
//!
//! The crate drives a disc robot through a four-stage pipeline: pick the
//! scene image showing the queried object, navigate there and densify the
//! local point cloud with a camera sweep, build a prioritized task grid and
//! sample robot-sized candidate circles around the object, then let a
//! pluggable scorer choose the pose the robot should gaze from. An
//! evaluation bench aggregates SR / SPL / DTG over scene suites.
//!
//! The geometry core ([`geometry`], [`taskgrid`], [`candidates`]) is generic
//! over the scalar type via [`scalar::Real`]; everything downstream uses the
//! concrete [`Scalar`] aliases below.

pub mod candidates;
pub mod evalbench;
pub mod geometry;
pub mod navpath;
pub mod pipeline;
pub mod scalar;
pub mod scorer;
pub mod simworld;
pub mod taskgrid;
pub mod viz;

/// Scalar type used by the concrete simulator, planner and pipeline.
pub type Scalar = f64;
/// 2D point/vector in meters, ground frame.
pub type Point2 = geometry::Vec2<Scalar>;
/// 3D point/vector in meters, world frame.
pub type Point3 = geometry::Vec3<Scalar>;

/// Disc robot radius in meters.
pub const ROBOT_RADIUS: Scalar = 0.2;
