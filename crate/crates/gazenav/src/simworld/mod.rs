//! Synthetic 3D environments and the robot that moves through them:
//! raycast RGB-D capture with oracle segmentation, the discrete action set,
//! the sweep procedure, occupancy maps and ground-truth operation poses.

mod occupancy;
mod raycast;
mod robot;
mod scene;
pub mod templates;

pub use occupancy::{build_occupancy_map, OccupancyMap};
pub use raycast::{capture_frame, exploration_ring, scene_image_set, Frame, Intrinsics};
pub use robot::{
    apply_action, sweep_capture, Action, ActionConfig, RobotState, StepOutcome, CAMERA_HEIGHT,
    PITCH_LIMIT_DEG,
};
pub use scene::{
    FloorExtent, Primitive, RayHit, SceneError, SceneSpec, Shape, StartPose, TaskHint, FLOOR_ID,
};
