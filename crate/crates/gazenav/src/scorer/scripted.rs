//! Replay scorer: feeds back a recorded decision log, byte for byte.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::scorer::{
    CandidateOption, Scorer, ScorerDecision, ScorerError, SegmentOption, Stage, TaskQuery,
};
use crate::simworld::Frame;

/// One logged decision: enough to replay and to audit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub stage: Stage,
    pub options: usize,
    pub scores: Vec<f64>,
    pub chosen: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

impl DecisionRecord {
    pub fn to_jsonl_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

/// Scorer that replays a recorded decision log in order, verifying that each
/// call matches the recorded stage and option count.
pub struct ScriptedScorer {
    records: VecDeque<DecisionRecord>,
}

impl ScriptedScorer {
    pub fn new(records: Vec<DecisionRecord>) -> Self {
        Self {
            records: records.into(),
        }
    }

    /// Parse a JSON-lines decision log.
    pub fn from_jsonl(text: &str) -> Result<Self, ScorerError> {
        let mut records = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: DecisionRecord = serde_json::from_str(line)
                .map_err(|e| ScorerError::Replay(format!("line {}: {e}", lineno + 1)))?;
            records.push(rec);
        }
        Ok(Self::new(records))
    }

    pub fn remaining(&self) -> usize {
        self.records.len()
    }

    fn next(&mut self, stage: Stage, options: usize) -> Result<ScorerDecision, ScorerError> {
        let rec = self
            .records
            .pop_front()
            .ok_or_else(|| ScorerError::Replay("decision log exhausted".into()))?;
        if rec.stage != stage {
            return Err(ScorerError::Replay(format!(
                "expected stage {:?}, log has {:?}",
                stage, rec.stage
            )));
        }
        if rec.options != options {
            return Err(ScorerError::Replay(format!(
                "stage {:?} has {} options, log recorded {}",
                stage, options, rec.options
            )));
        }
        Ok(ScorerDecision {
            chosen: rec.chosen,
            scores: rec.scores,
            rationale: rec.rationale,
        })
    }
}

impl Scorer for ScriptedScorer {
    fn select_image(&mut self, _query: &TaskQuery, frames: &[Frame]) -> Result<ScorerDecision, ScorerError> {
        self.next(Stage::SelectImage, frames.len())
    }

    fn locate_object(
        &mut self,
        _query: &TaskQuery,
        segments: &[SegmentOption],
    ) -> Result<ScorerDecision, ScorerError> {
        self.next(Stage::LocateObject, segments.len())
    }

    fn score_candidates(
        &mut self,
        _query: &TaskQuery,
        options: &[CandidateOption],
        _frame: &Frame,
    ) -> Result<ScorerDecision, ScorerError> {
        self.next(Stage::ScoreCandidates, options.len())
    }
}
