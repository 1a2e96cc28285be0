//! Robot embodiment: discrete action set, collision-checked motion, camera
//! pose composition and the sweep capture pattern.

use serde::{Deserialize, Serialize};

use crate::geometry::RigidTransform;
use crate::scalar::wrap_angle;
use crate::simworld::raycast::{capture_frame, Frame, Intrinsics};
use crate::simworld::scene::SceneSpec;
use crate::{Point2, Point3, Scalar};

/// Camera height above the floor, meters.
pub const CAMERA_HEIGHT: Scalar = 1.5;

/// Camera pitch clamp, degrees.
pub const PITCH_LIMIT_DEG: Scalar = 80.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub position: Point2,
    /// Heading in radians, wrapped to (-pi, pi].
    pub heading: Scalar,
    /// Camera pitch in radians; 0 is level, negative looks down.
    pub pitch: Scalar,
    pub camera_height: Scalar,
}

impl RobotState {
    pub fn new(position: Point2, heading: Scalar) -> Self {
        Self {
            position,
            heading: wrap_angle(heading),
            pitch: 0.0,
            camera_height: CAMERA_HEIGHT,
        }
    }

    pub fn from_start(start: &crate::simworld::scene::StartPose) -> Self {
        Self::new(start.position, start.heading)
    }

    /// World-from-camera pose with optional yaw/pitch offsets. Camera
    /// convention: +x right, +y down, +z forward.
    pub fn camera_pose_offset(&self, yaw_offset: Scalar, pitch_offset: Scalar) -> RigidTransform<Scalar> {
        let yaw = self.heading + yaw_offset;
        let pitch = self.pitch + pitch_offset;
        let forward = Point3::new(
            yaw.cos() * pitch.cos(),
            yaw.sin() * pitch.cos(),
            pitch.sin(),
        );
        let right = forward
            .cross(Point3::new(0.0, 0.0, 1.0))
            .normalized()
            .expect("pitch stays within the clamp");
        let down = forward.cross(right);
        let origin = Point3::new(self.position.x, self.position.y, self.camera_height);
        RigidTransform::from_axes(right, down, forward, origin)
    }

    pub fn camera_pose(&self) -> RigidTransform<Scalar> {
        self.camera_pose_offset(0.0, 0.0)
    }

    /// Signed bearing of `target` relative to the current heading.
    pub fn bearing_to(&self, target: Point2) -> Scalar {
        wrap_angle((target - self.position).angle() - self.heading)
    }
}

/// Discrete action set; magnitudes live in [`ActionConfig`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Stop,
    MoveForward,
    TurnLeft,
    TurnRight,
    LookUp,
    LookDown,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionConfig {
    /// Forward step, meters.
    pub forward_step: Scalar,
    /// Turn step, degrees.
    pub turn_step_deg: Scalar,
    /// Look step, degrees.
    pub look_step_deg: Scalar,
}

impl Default for ActionConfig {
    fn default() -> Self {
        Self {
            forward_step: 0.1,
            turn_step_deg: 1.0,
            look_step_deg: 30.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: RobotState,
    pub collided: bool,
}

/// Apply one action. A forward step that would collide (robot disk against
/// primitive footprints, or leaving the floor) is a no-op with the collision
/// flag set.
pub fn apply_action(
    scene: &SceneSpec,
    state: &RobotState,
    action: Action,
    cfg: &ActionConfig,
    robot_radius: Scalar,
) -> StepOutcome {
    let mut next = *state;
    let mut collided = false;
    match action {
        Action::Stop => {}
        Action::MoveForward => {
            let target = state.position + Point2::from_angle(state.heading) * cfg.forward_step;
            if scene.position_free(target, robot_radius) {
                next.position = target;
            } else {
                collided = true;
            }
        }
        Action::TurnLeft => next.heading = wrap_angle(state.heading + cfg.turn_step_deg.to_radians()),
        Action::TurnRight => next.heading = wrap_angle(state.heading - cfg.turn_step_deg.to_radians()),
        Action::LookUp => {
            next.pitch = (state.pitch + cfg.look_step_deg.to_radians())
                .clamp(-PITCH_LIMIT_DEG.to_radians(), PITCH_LIMIT_DEG.to_radians())
        }
        Action::LookDown => {
            next.pitch = (state.pitch - cfg.look_step_deg.to_radians())
                .clamp(-PITCH_LIMIT_DEG.to_radians(), PITCH_LIMIT_DEG.to_radians())
        }
    }
    StepOutcome { state: next, collided }
}

/// The six-frame sweep around a target the robot is already facing: yaw
/// offsets {-a0, 0, +a0} at level pitch, then the same tilted down by a1.
/// The robot state is untouched (the camera returns to its original pose).
///
/// Panics if the robot is not facing `target` to within one degree.
pub fn sweep_capture(
    scene: &SceneSpec,
    state: &RobotState,
    target: Point2,
    intrinsics: &Intrinsics,
    width: usize,
    height: usize,
    yaw_deg: Scalar,
    pitch_deg: Scalar,
) -> Vec<Frame> {
    let off = state.bearing_to(target).abs();
    assert!(
        off <= 1.0f64.to_radians() + 1e-9,
        "sweep requires facing the target (off by {:.2} deg)",
        off.to_degrees()
    );
    let a0 = yaw_deg.to_radians();
    let a1 = -pitch_deg.to_radians();
    let mut frames = Vec::with_capacity(6);
    let mut index = 1;
    for pitch_off in [0.0, a1] {
        for yaw_off in [-a0, 0.0, a0] {
            let pose = state.camera_pose_offset(yaw_off, pitch_off);
            frames.push(capture_frame(scene, &pose, intrinsics, width, height, index));
            index += 1;
        }
    }
    frames
}
