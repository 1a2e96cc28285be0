//! The VLM stand-in: a scorer maps (task, options) to scores. Three
//! implementations ship — the scene-omniscient oracle, a scripted replayer,
//! and an HTTP client for a remote model — behind one trait, plus the
//! marker-projection machinery that turns candidate circles into scoreable
//! image annotations.

mod oracle;
mod remote;
mod scripted;

pub use oracle::OracleScorer;
pub use remote::{remote_score, RemoteConfig, RemoteScorer, WireOption, WireRequest, WireResponse};
pub use scripted::{DecisionRecord, ScriptedScorer};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::RigidTransform;
use crate::candidates::CandidateSet;
use crate::geometry::PointCloud;
use crate::simworld::{Frame, Intrinsics, SceneSpec};
use crate::{Point2, Point3, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum ScorerError {
    #[error("queried object not found in any frame")]
    ObjectNotFound,
    #[error("no segment matches the query")]
    SegmentNotFound,
    #[error("no candidate marker is visible")]
    NoVisibleCandidates,
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed scorer response: {0}")]
    Malformed(String),
    #[error("scores length {got} does not match option count {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("scripted replay mismatch: {0}")]
    Replay(String),
}

/// The task query: free text plus the resolved object label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskQuery {
    pub text: String,
    pub label: String,
}

impl TaskQuery {
    pub fn new(text: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            label: label.into(),
        }
    }
}

/// Which scoring stage a decision belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    SelectImage,
    LocateObject,
    ScoreCandidates,
}

/// One scoring outcome: per-option scores (higher is better) and the chosen
/// option index (always the argmax, ties to the lowest index).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScorerDecision {
    pub chosen: usize,
    pub scores: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

impl ScorerDecision {
    /// Build a decision from raw scores; `chosen` is the first argmax.
    pub fn from_scores(scores: Vec<f64>, rationale: Option<String>) -> Self {
        assert!(!scores.is_empty(), "decision over zero options");
        let mut chosen = 0;
        for (i, s) in scores.iter().enumerate() {
            if *s > scores[chosen] {
                chosen = i;
            }
        }
        Self {
            chosen,
            scores,
            rationale,
        }
    }

    pub fn abstained(&self) -> bool {
        self.scores.iter().all(|s| *s <= 0.0)
    }
}

/// A segment candidate for object localization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentOption {
    pub object_id: u32,
    pub pixel_count: usize,
}

/// A visible candidate circle offered for scoring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateOption {
    pub marker: u32,
    pub center: Point2,
    pub pixel: (Scalar, Scalar),
}

/// Scoring backend. Implementations must produce decisions whose `chosen`
/// is the argmax of `scores` with ties to the lowest index, and may signal
/// "not found" on the image stage by returning all-zero scores.
pub trait Scorer {
    /// Stage 1: score each frame for task relevance.
    fn select_image(&mut self, query: &TaskQuery, frames: &[Frame]) -> Result<ScorerDecision, ScorerError>;

    /// Stage 2: pick the segment that is the queried object.
    fn locate_object(
        &mut self,
        query: &TaskQuery,
        segments: &[SegmentOption],
    ) -> Result<ScorerDecision, ScorerError>;

    /// Stage 4: score the visible candidate markers in the current frame.
    fn score_candidates(
        &mut self,
        query: &TaskQuery,
        options: &[CandidateOption],
        frame: &Frame,
    ) -> Result<ScorerDecision, ScorerError>;
}

/// Exact label match over segments, ties to the lowest object id (segments
/// arrive sorted by id). Shared by the oracle and the remote client, whose
/// segmentation is oracle data either way.
pub(crate) fn locate_by_label(
    labels: &std::collections::BTreeMap<u32, String>,
    query: &TaskQuery,
    segments: &[SegmentOption],
) -> Result<ScorerDecision, ScorerError> {
    if segments.is_empty() {
        return Err(ScorerError::SegmentNotFound);
    }
    let scores: Vec<f64> = segments
        .iter()
        .map(|s| {
            if labels.get(&s.object_id).map(String::as_str) == Some(query.label.as_str()) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    if scores.iter().all(|s| *s <= 0.0) {
        return Err(ScorerError::SegmentNotFound);
    }
    Ok(ScorerDecision::from_scores(scores, None))
}

/// Stage-1 image selection: the scorer grades every frame, and the chosen
/// frame's camera ground position becomes the navigation goal.
pub fn identify_target_scene(
    frames: &[Frame],
    query: &TaskQuery,
    scorer: &mut dyn Scorer,
) -> Result<(usize, Point2, ScorerDecision), ScorerError> {
    if frames.is_empty() {
        return Err(ScorerError::ObjectNotFound);
    }
    let decision = scorer.select_image(query, frames)?;
    if decision.scores.len() != frames.len() {
        return Err(ScorerError::LengthMismatch {
            expected: frames.len(),
            got: decision.scores.len(),
        });
    }
    if decision.abstained() {
        return Err(ScorerError::ObjectNotFound);
    }
    let idx = decision.chosen;
    Ok((idx, frames[idx].camera_position(), decision))
}

/// The object cloud the scorer picked out of one frame.
#[derive(Clone, Debug)]
pub struct LocatedObject {
    pub object_id: u32,
    pub cloud: PointCloud<Scalar>,
    pub decision: ScorerDecision,
}

/// Stage 2: the scorer picks the segment matching the query; its pixels are
/// back-projected into the world frame as the object cloud.
pub fn locate_object_in_frame(
    frame: &Frame,
    query: &TaskQuery,
    scorer: &mut dyn Scorer,
) -> Result<LocatedObject, ScorerError> {
    let segments: Vec<SegmentOption> = frame
        .segments()
        .into_iter()
        .map(|(object_id, pixel_count)| SegmentOption {
            object_id,
            pixel_count,
        })
        .collect();
    if segments.is_empty() {
        return Err(ScorerError::SegmentNotFound);
    }
    let decision = scorer.locate_object(query, &segments)?;
    if decision.scores.len() != segments.len() {
        return Err(ScorerError::LengthMismatch {
            expected: segments.len(),
            got: decision.scores.len(),
        });
    }
    if decision.abstained() {
        return Err(ScorerError::SegmentNotFound);
    }
    let object_id = segments[decision.chosen].object_id;
    Ok(LocatedObject {
        object_id,
        cloud: frame.segment_cloud(object_id),
        decision,
    })
}

/// A candidate circle projected into the image plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkerProjection {
    pub marker: u32,
    pub center: Point2,
    /// Pixel position when the center projects in front of the camera.
    pub pixel: Option<(Scalar, Scalar)>,
    /// In frame bounds and with unblocked line of sight.
    pub visible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkerOverlay {
    pub markers: Vec<MarkerProjection>,
}

impl MarkerOverlay {
    pub fn visible_options(&self) -> Vec<CandidateOption> {
        self.markers
            .iter()
            .filter(|m| m.visible)
            .map(|m| CandidateOption {
                marker: m.marker,
                center: m.center,
                pixel: m.pixel.expect("visible markers have pixels"),
            })
            .collect()
    }
}

/// Project each candidate center (lifted to the floor plane) through the
/// camera; a marker is visible when it lands inside the image and the ray
/// from the camera to the center is not blocked by scene geometry.
pub fn project_markers(
    pose: &RigidTransform<Scalar>,
    intrinsics: &Intrinsics,
    width: usize,
    height: usize,
    candidates: &CandidateSet<Scalar>,
    scene: &SceneSpec,
) -> MarkerOverlay {
    let cam_from_world = pose.inverse();
    let origin = pose.translation;
    let markers = candidates
        .circles
        .iter()
        .map(|c| {
            let world = Point3::new(c.center.x, c.center.y, 0.0);
            let cam = cam_from_world.apply(world);
            if cam.z <= 1e-9 {
                return MarkerProjection {
                    marker: c.marker,
                    center: c.center,
                    pixel: None,
                    visible: false,
                };
            }
            let u = intrinsics.cx + intrinsics.fx * cam.x / cam.z;
            let v = intrinsics.cy + intrinsics.fy * cam.y / cam.z;
            let in_bounds = u >= 0.0 && u <= (width - 1) as Scalar && v >= 0.0 && v <= (height - 1) as Scalar;
            let visible = in_bounds && {
                let to_center = world - origin;
                let dist = to_center.norm();
                match to_center.normalized() {
                    Some(dir) => scene
                        .raycast(origin, dir)
                        .map_or(true, |hit| hit.t >= dist - 1e-6),
                    None => false,
                }
            };
            MarkerProjection {
                marker: c.marker,
                center: c.center,
                pixel: Some((u, v)),
                visible,
            }
        })
        .collect();
    MarkerOverlay { markers }
}

/// Result of scoring the visible markers of an overlay.
#[derive(Clone, Debug)]
pub struct CandidateChoice {
    pub marker: u32,
    pub decision: ScorerDecision,
    pub options: Vec<CandidateOption>,
}

/// Stage 4: score visible markers only; the chosen index maps back to a
/// marker number.
pub fn score_candidates(
    overlay: &MarkerOverlay,
    frame: &Frame,
    query: &TaskQuery,
    scorer: &mut dyn Scorer,
) -> Result<CandidateChoice, ScorerError> {
    let options = overlay.visible_options();
    if options.is_empty() {
        return Err(ScorerError::NoVisibleCandidates);
    }
    let decision = scorer.score_candidates(query, &options, frame)?;
    if decision.scores.len() != options.len() {
        return Err(ScorerError::LengthMismatch {
            expected: options.len(),
            got: decision.scores.len(),
        });
    }
    Ok(CandidateChoice {
        marker: options[decision.chosen].marker,
        decision,
        options,
    })
}
