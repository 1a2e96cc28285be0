//! HTTP client for a remote scoring service (the slot a hosted VLM plugs
//! into). The wire format is one JSON POST per decision:
//!
//! ```text
//! request:  {"task": "...", "stage": "select_image" | "score_candidates",
//!            "options": [{"index": 1, "image": "<base64 PPM>"} |
//!                        {"marker": 3, "image": "<base64 PPM>"}]}
//! response: {"scores": [0.1, 0.9], "rationale": "..."}
//! ```
//!
//! Object localization has no wire stage: segment ids and labels are oracle
//! data from the simulator, so the client resolves them locally by label
//! match, exactly like the oracle scorer.

use std::collections::BTreeMap;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::scorer::{
    locate_by_label, CandidateOption, Scorer, ScorerDecision, ScorerError, SegmentOption, TaskQuery,
};
use crate::simworld::{Frame, SceneSpec};
use crate::viz;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    /// Request timeout in seconds.
    pub timeout_secs: f64,
    /// Additional attempts after a transport failure.
    pub retries: u32,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout_secs: 30.0,
            retries: 2,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WireOption {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marker: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<u32>,
    /// Base64-encoded binary PPM.
    pub image: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WireRequest {
    pub task: String,
    pub stage: String,
    pub options: Vec<WireOption>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WireResponse {
    pub scores: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

/// POST a scoring request and parse the response, retrying transport
/// failures per the config. The scores array must match the option count.
pub fn remote_score(
    agent: &ureq::Agent,
    cfg: &RemoteConfig,
    request: &WireRequest,
) -> Result<ScorerDecision, ScorerError> {
    let mut last_transport = String::new();
    for _attempt in 0..=cfg.retries {
        let sent = agent.post(&cfg.endpoint).send_json(request);
        let mut response = match sent {
            Ok(r) => r,
            Err(e) => {
                last_transport = e.to_string();
                continue;
            }
        };
        let text = match response.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => {
                last_transport = e.to_string();
                continue;
            }
        };
        let wire: WireResponse =
            serde_json::from_str(&text).map_err(|e| ScorerError::Malformed(e.to_string()))?;
        if wire.scores.len() != request.options.len() {
            return Err(ScorerError::LengthMismatch {
                expected: request.options.len(),
                got: wire.scores.len(),
            });
        }
        if wire.scores.is_empty() {
            return Err(ScorerError::Malformed("empty scores array".into()));
        }
        return Ok(ScorerDecision::from_scores(wire.scores, wire.rationale));
    }
    Err(ScorerError::Transport(last_transport))
}

/// Scorer backed by a remote endpoint. Frames go out as segmentation-colored
/// PPM images; candidate markers are stamped into the image as digits at
/// their projected pixels.
pub struct RemoteScorer {
    cfg: RemoteConfig,
    agent: ureq::Agent,
    labels: BTreeMap<u32, String>,
}

impl RemoteScorer {
    pub fn new(cfg: RemoteConfig, scene: &SceneSpec) -> Self {
        let agent = ureq::Agent::new_with_config(
            ureq::Agent::config_builder()
                .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_secs)))
                .build(),
        );
        let labels = scene
            .primitives
            .iter()
            .filter_map(|p| p.label.clone().map(|l| (p.object_id, l)))
            .collect();
        Self { cfg, agent, labels }
    }

    fn frame_image(frame: &Frame) -> String {
        BASE64.encode(viz::seg_ppm(frame))
    }

    fn annotated_image(frame: &Frame, options: &[CandidateOption]) -> String {
        let mut rgb = viz::seg_ppm_pixels(frame);
        for opt in options {
            let (u, v) = opt.pixel;
            viz::stamp_number(
                &mut rgb,
                frame.width,
                frame.height,
                u.round() as i64 - 1,
                v.round() as i64 - 2,
                opt.marker,
                [255, 32, 32],
            );
        }
        BASE64.encode(viz::ppm_bytes(frame.width, frame.height, &rgb))
    }
}

impl Scorer for RemoteScorer {
    fn select_image(&mut self, query: &TaskQuery, frames: &[Frame]) -> Result<ScorerDecision, ScorerError> {
        let request = WireRequest {
            task: query.text.clone(),
            stage: "select_image".into(),
            options: frames
                .iter()
                .map(|f| WireOption {
                    marker: None,
                    index: Some(f.index),
                    image: Self::frame_image(f),
                })
                .collect(),
        };
        remote_score(&self.agent, &self.cfg, &request)
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
        frame: &Frame,
    ) -> Result<ScorerDecision, ScorerError> {
        let image = Self::annotated_image(frame, options);
        let request = WireRequest {
            task: query.text.clone(),
            stage: "score_candidates".into(),
            options: options
                .iter()
                .map(|o| WireOption {
                    marker: Some(o.marker),
                    index: None,
                    image: image.clone(),
                })
                .collect(),
        };
        remote_score(&self.agent, &self.cfg, &request)
    }
}
