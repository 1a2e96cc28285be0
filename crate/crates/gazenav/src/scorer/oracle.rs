//! Scene-omniscient scorer: the deterministic stand-in for a vision-language
//! model, encoding the single piece of common sense the pipeline needs —
//! stand on the side the object is operated from.

use std::collections::BTreeMap;

use crate::scorer::{
    locate_by_label, CandidateOption, Scorer, ScorerDecision, ScorerError, SegmentOption, TaskQuery,
};
use crate::simworld::{Frame, SceneSpec};

/// Penalty for candidates whose line to the object's operating front is
/// blocked; it dominates any cosine so unblocked options always win.
const BLOCKED_PENALTY: f64 = 10.0;

pub struct OracleScorer {
    scene: SceneSpec,
    labels: BTreeMap<u32, String>,
}

impl OracleScorer {
    pub fn new(scene: &SceneSpec) -> Self {
        let labels = scene
            .primitives
            .iter()
            .filter_map(|p| p.label.clone().map(|l| (p.object_id, l)))
            .collect();
        Self {
            scene: scene.clone(),
            labels,
        }
    }

    fn matching_ids(&self, query: &TaskQuery) -> Vec<u32> {
        self.labels
            .iter()
            .filter(|(_, l)| l.as_str() == query.label)
            .map(|(id, _)| *id)
            .collect()
    }
}

impl Scorer for OracleScorer {
    fn select_image(&mut self, query: &TaskQuery, frames: &[Frame]) -> Result<ScorerDecision, ScorerError> {
        let ids = self.matching_ids(query);
        let scores = frames
            .iter()
            .map(|f| f.pixel_count_of(&ids) as f64)
            .collect();
        Ok(ScorerDecision::from_scores(scores, None))
    }

    fn locate_object(
        &mut self,
        query: &TaskQuery,
        segments: &[SegmentOption],
    ) -> Result<ScorerDecision, ScorerError> {
        locate_by_label(&self.labels, query, segments)
    }

    fn score_candidates(
        &mut self,
        query: &TaskQuery,
        options: &[CandidateOption],
        _frame: &Frame,
    ) -> Result<ScorerDecision, ScorerError> {
        let target_id = self
            .matching_ids(query)
            .into_iter()
            .min()
            .ok_or(ScorerError::SegmentNotFound)?;
        let target = self.scene.primitive(target_id).expect("id came from the scene");
        let scores = options
            .iter()
            .map(|opt| match target.operation_direction {
                Some(dir) => {
                    let to_object = target.center - opt.center;
                    let cos = to_object
                        .normalized()
                        .map_or(-1.0, |v| v.dot(-dir));
                    let front = target.boundary_point_along(dir);
                    let blocked = self.scene.segment_blocked(opt.center, front, target_id);
                    cos - if blocked { BLOCKED_PENALTY } else { 0.0 }
                }
                // objects without a declared front: nearer is better
                None => -opt.center.dist(target.center),
            })
            .collect();
        Ok(ScorerDecision::from_scores(scores, None))
    }
}
