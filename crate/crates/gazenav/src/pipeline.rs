//! End-to-end episode orchestration: identify the target scene, navigate
//! there, densify the local cloud with a sweep, build the task grid, sample
//! candidate circles, and run the two-step scored decision to the final
//! gazing pose. Ablation modes cut individual stages out.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::candidates::{generate_candidates, CandidateError, CandidateSet};
use crate::evalbench::EpisodeResult;
use crate::geometry::{
    fit_ground_plane, GeometryError, GroundFrame, PlaneModel, PointCloud, PointLabel,
};
use crate::navpath::{follow_path, path_midpoint, plan_path, rotate_to_face, PlanError};
use crate::scalar::wrap_angle;
use crate::scorer::{
    identify_target_scene, locate_object_in_frame, project_markers, score_candidates,
    DecisionRecord, Scorer, ScorerError, Stage, TaskQuery,
};
use crate::simworld::{
    apply_action, build_occupancy_map, capture_frame, exploration_ring, scene_image_set,
    sweep_capture, Action, ActionConfig, Frame, Intrinsics, OccupancyMap, RobotState, SceneError,
    SceneSpec,
};
use crate::taskgrid::{build_task_grid, object_footprint, CellState, GridError, TaskGrid};
use crate::{Point2, Point3, Scalar, ROBOT_RADIUS};

/// Pipeline variant: the full method or one of its ablations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Full,
    /// Directly navigate to the target after localization; no candidates.
    Dnt,
    /// One-step goal decision: skip the midpoint re-scoring.
    Ogd,
    /// Skip the sweep; the grid is built from the single stage-1 frame.
    NoRts,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Mode> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Some(Mode::Full),
            "dnt" => Some(Mode::Dnt),
            "ogd" => Some(Mode::Ogd),
            "norts" | "no-rts" | "no_rts" => Some(Mode::NoRts),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::Dnt => "dnt",
            Mode::Ogd => "ogd",
            Mode::NoRts => "norts",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub robot_radius: Scalar,
    /// Task-grid resolution, meters per cell.
    pub grid_resolution: Scalar,
    /// Sweep yaw offset, degrees.
    pub sweep_yaw_deg: Scalar,
    /// Sweep downward tilt, degrees.
    pub sweep_pitch_deg: Scalar,
    /// Repositioning step, meters.
    pub epsilon: Scalar,
    pub seed: u64,
    pub mode: Mode,
    /// Success threshold on DTG, meters.
    pub success_threshold: Scalar,
    pub image_width: usize,
    pub image_height: usize,
    pub hfov_deg: Scalar,
    pub occupancy_resolution: Scalar,
    pub ransac_iterations: usize,
    pub ransac_tolerance: Scalar,
    pub exploration_poses: usize,
    pub actions: ActionConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            robot_radius: ROBOT_RADIUS,
            grid_resolution: 0.01,
            sweep_yaw_deg: 30.0,
            sweep_pitch_deg: 60.0,
            epsilon: 0.01,
            seed: 0,
            mode: Mode::Full,
            success_threshold: 0.5,
            image_width: 160,
            image_height: 120,
            hfov_deg: 90.0,
            occupancy_resolution: 0.05,
            ransac_iterations: 500,
            ransac_tolerance: 0.01,
            exploration_poses: 12,
            actions: ActionConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("robot_radius", self.robot_radius),
            ("grid_resolution", self.grid_resolution),
            ("epsilon", self.epsilon),
            ("success_threshold", self.success_threshold),
            ("occupancy_resolution", self.occupancy_resolution),
        ] {
            if v <= 0.0 {
                return Err(format!("{name} must be positive"));
            }
        }
        for (name, v) in [
            ("sweep_yaw_deg", self.sweep_yaw_deg),
            ("sweep_pitch_deg", self.sweep_pitch_deg),
        ] {
            if !(0.0..90.0).contains(&v) || v == 0.0 {
                return Err(format!("{name} must lie in (0, 90) degrees"));
            }
        }
        if self.image_width < 8 || self.image_height < 8 {
            return Err("image size too small".into());
        }
        if self.exploration_poses == 0 {
            return Err("exploration_poses must be at least 1".into());
        }
        Ok(())
    }

    pub fn intrinsics(&self) -> Intrinsics {
        Intrinsics::for_size(self.image_width, self.image_height, self.hfov_deg)
    }
}

/// Anything that can end an episode early.
#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Candidates(#[from] CandidateError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("no up-facing ground plane found")]
    NoGroundPlane,
}

/// Append-only record of everything an episode did; replaying the same
/// scene, query and config yields the identical sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    EpisodeStart {
        scene: String,
        query: TaskQuery,
        mode: Mode,
        seed: u64,
    },
    Decision {
        stage: Stage,
        options: usize,
        scores: Vec<f64>,
        chosen: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        marker: Option<u32>,
    },
    TargetScene {
        frame_index: u32,
        goal: Point2,
    },
    Navigate {
        purpose: String,
        from: Point2,
        to: Point2,
        planned_length: Scalar,
        stop_at: Scalar,
        traveled: Scalar,
        action_count: usize,
        waypoints: Vec<Point2>,
    },
    RotateToFace {
        target: Point2,
        turns: usize,
    },
    ObjectLocated {
        object_id: u32,
        points: usize,
    },
    SweepCaptured {
        frames: usize,
    },
    GroundPlane {
        normal: Point3,
        offset: Scalar,
        inliers: usize,
    },
    GridBuilt {
        center: Point2,
        half_extent: Scalar,
        resolution: Scalar,
        size: usize,
        unseen: usize,
        obstacle: usize,
        ground: usize,
        object: usize,
        rle: String,
    },
    Candidates {
        set: CandidateSet<Scalar>,
    },
    FallbackNearest {
        step: u8,
        marker: u32,
    },
    FinalCommand {
        position: Point2,
        heading: Scalar,
    },
    ActionLog {
        actions: Vec<Action>,
    },
    Failure {
        stage: String,
        reason: String,
    },
    Final {
        position: Point2,
        heading: Scalar,
        collisions: u32,
        traveled: Scalar,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub events: Vec<TraceEvent>,
}

impl EpisodeTrace {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("trace serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, String> {
        let mut events = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            events.push(
                serde_json::from_str(line).map_err(|e| format!("line {}: {e}", lineno + 1))?,
            );
        }
        Ok(Self { events })
    }

    /// The scorer decisions in call order, for scripted replay.
    pub fn decision_records(&self) -> Vec<DecisionRecord> {
        self.events
            .iter()
            .filter_map(|e| match e {
                TraceEvent::Decision {
                    stage,
                    options,
                    scores,
                    chosen,
                    ..
                } => Some(DecisionRecord {
                    stage: *stage,
                    options: *options,
                    scores: scores.clone(),
                    chosen: *chosen,
                    rationale: None,
                }),
                _ => None,
            })
            .collect()
    }

    pub fn candidate_set(&self) -> Option<&CandidateSet<Scalar>> {
        self.events.iter().find_map(|e| match e {
            TraceEvent::Candidates { set } => Some(set),
            _ => None,
        })
    }

    pub fn final_command(&self) -> Option<Point2> {
        self.events.iter().find_map(|e| match e {
            TraceEvent::FinalCommand { position, .. } => Some(*position),
            _ => None,
        })
    }

    pub fn chosen_markers(&self) -> Vec<u32> {
        self.events
            .iter()
            .filter_map(|e| match e {
                TraceEvent::Decision {
                    marker: Some(m), ..
                } => Some(*m),
                TraceEvent::FallbackNearest { marker, .. } => Some(*marker),
                _ => None,
            })
            .collect()
    }
}

/// Ground-truth goal for the metrics: the optimal operation pose, or the
/// nearest reachable free cell to the object for objects with no declared
/// front.
pub fn metrics_goal(
    scene: &SceneSpec,
    map: &OccupancyMap,
    target_id: u32,
    robot_radius: Scalar,
) -> (Point2, Scalar) {
    match scene.optimal_operation_pose(target_id, robot_radius, 0.01) {
        Ok(pose) => pose,
        Err(_) => {
            let target = scene.primitive(target_id).expect("caller resolved the id");
            let grid = crate::navpath::InflatedGrid::from_map(map, robot_radius);
            let mut best: Option<(Scalar, Point2)> = None;
            for iy in 0..map.height {
                for ix in 0..map.width {
                    if grid.is_blocked(ix, iy) {
                        continue;
                    }
                    let c = map.cell_center(ix, iy);
                    let d = c.dist(target.center);
                    if best.map_or(true, |(bd, _)| d < bd) {
                        best = Some((d, c));
                    }
                }
            }
            let position = best.map(|(_, p)| p).unwrap_or(target.center);
            let heading = (target.center - position).angle();
            (position, heading)
        }
    }
}

/// Run one episode. Stage failures never panic: they are recorded in the
/// trace and scored from wherever the robot stopped. The only error is an
/// unresolvable query label (a configuration problem, not an episode).
pub fn run_episode(
    scene: &SceneSpec,
    query: &TaskQuery,
    scorer: &mut dyn Scorer,
    cfg: &PipelineConfig,
) -> Result<(EpisodeResult, EpisodeTrace), SceneError> {
    let target_id = scene
        .resolve_label(&query.label)
        .ok_or_else(|| SceneError::Invalid(format!("query label {:?} not in scene", query.label)))?;
    let map = build_occupancy_map(scene, cfg.occupancy_resolution);
    let (optimal_pos, _optimal_heading) = metrics_goal(scene, &map, target_id, cfg.robot_radius);
    let shortest = match plan_path(&map, scene.start.position, optimal_pos, cfg.robot_radius) {
        Ok(p) => p.length,
        Err(_) => scene.start.position.dist(optimal_pos),
    };

    let mut runner = Runner {
        scene,
        query,
        scorer,
        cfg,
        map: &map,
        intr: cfg.intrinsics(),
        robot: RobotState::new(scene.start.position, scene.start.heading),
        events: vec![TraceEvent::EpisodeStart {
            scene: scene.name.clone(),
            query: query.clone(),
            mode: cfg.mode,
            seed: cfg.seed,
        }],
        actions: Vec::new(),
        traveled: 0.0,
        collisions: 0,
        frame_counter: 100,
    };

    let failure = match runner.run() {
        Ok(()) => None,
        Err((stage, err)) => {
            let reason = err.to_string();
            runner.events.push(TraceEvent::Failure {
                stage: stage.to_string(),
                reason: reason.clone(),
            });
            Some(format!("{stage}: {reason}"))
        }
    };
    runner.actions.push(Action::Stop);

    let final_pos = runner.robot.position;
    let final_heading = runner.robot.heading;
    let dtg = final_pos.dist(optimal_pos);
    let target_center = scene.primitive(target_id).expect("resolved").center;
    let heading_error_deg = wrap_angle((target_center - final_pos).angle() - final_heading)
        .abs()
        .to_degrees();

    runner.events.push(TraceEvent::ActionLog {
        actions: runner.actions.clone(),
    });
    runner.events.push(TraceEvent::Final {
        position: final_pos,
        heading: final_heading,
        collisions: runner.collisions,
        traveled: runner.traveled,
    });

    let result = EpisodeResult {
        scene: scene.name.clone(),
        query: query.text.clone(),
        mode: cfg.mode,
        seed: cfg.seed,
        success: dtg < cfg.success_threshold,
        shortest_path: shortest,
        traveled: runner.traveled,
        dtg,
        final_position: final_pos,
        final_heading,
        heading_error_deg,
        failure,
    };
    Ok((result, EpisodeTrace { events: runner.events }))
}

/// Run one episode under an explicit ablation mode.
pub fn run_ablation(
    scene: &SceneSpec,
    query: &TaskQuery,
    scorer: &mut dyn Scorer,
    cfg: &PipelineConfig,
    mode: Mode,
) -> Result<(EpisodeResult, EpisodeTrace), SceneError> {
    let cfg = PipelineConfig {
        mode,
        ..cfg.clone()
    };
    run_episode(scene, query, scorer, &cfg)
}

struct Runner<'a> {
    scene: &'a SceneSpec,
    query: &'a TaskQuery,
    scorer: &'a mut dyn Scorer,
    cfg: &'a PipelineConfig,
    map: &'a OccupancyMap,
    intr: Intrinsics,
    robot: RobotState,
    events: Vec<TraceEvent>,
    actions: Vec<Action>,
    traveled: Scalar,
    collisions: u32,
    frame_counter: u32,
}

impl<'a> Runner<'a> {
    fn run(&mut self) -> Result<(), (&'static str, EpisodeError)> {
        let stage1 = self.stage_one().map_err(|e| ("identify_target_scene", e))?;

        if self.cfg.mode == Mode::Dnt {
            return self.direct_to_target().map_err(|e| ("direct_navigation", e));
        }

        let (grid, gaze_center) = self
            .reconstruct_task_space(&stage1)
            .map_err(|e| ("reconstruct_task_space", e))?;

        let candidates = self
            .location_candidates(&grid)
            .map_err(|e| ("generate_candidates", e))?;

        let final_center = self
            .sequential_decision(&candidates, gaze_center)
            .map_err(|e| ("sequential_decision", e))?;

        let heading = (gaze_center - final_center).angle();
        self.events.push(TraceEvent::FinalCommand {
            position: final_center,
            heading,
        });
        self.rotate_to(gaze_center);
        Ok(())
    }

    // -- stage 1 ---------------------------------------------------------

    fn stage_one(&mut self) -> Result<StageOne, EpisodeError> {
        let poses = exploration_ring(self.scene, self.cfg.exploration_poses, self.cfg.robot_radius);
        let frames = scene_image_set(
            self.scene,
            &poses,
            &self.intr,
            self.cfg.image_width,
            self.cfg.image_height,
        );
        let (idx, goal, decision) = identify_target_scene(&frames, self.query, self.scorer)?;
        self.events.push(TraceEvent::Decision {
            stage: Stage::SelectImage,
            options: decision.scores.len(),
            scores: decision.scores.clone(),
            chosen: decision.chosen,
            marker: None,
        });
        self.events.push(TraceEvent::TargetScene {
            frame_index: frames[idx].index,
            goal,
        });

        self.navigate(goal, "stage1_goal", StopRule::Full)?;

        let located = locate_object_in_frame(&frames[idx], self.query, self.scorer)?;
        self.push_locate_events(&located);
        let estimate = centroid_xy(&located.cloud);
        self.rotate_to(estimate);
        Ok(StageOne {
            chosen_frame: frames[idx].clone(),
            object_estimate: estimate,
        })
    }

    // -- stage 2 ---------------------------------------------------------

    fn reconstruct_task_space(
        &mut self,
        stage1: &StageOne,
    ) -> Result<(TaskGrid<Scalar>, Point2), EpisodeError> {
        let frames: Vec<Frame> = match self.cfg.mode {
            Mode::NoRts => vec![stage1.chosen_frame.clone()],
            _ => {
                let sweep = sweep_capture(
                    self.scene,
                    &self.robot,
                    stage1.object_estimate,
                    &self.intr,
                    self.cfg.image_width,
                    self.cfg.image_height,
                    self.cfg.sweep_yaw_deg,
                    self.cfg.sweep_pitch_deg,
                );
                self.events.push(TraceEvent::SweepCaptured {
                    frames: sweep.len(),
                });
                sweep
            }
        };

        // locate the object in the new captures; frames are tried in order
        // (the level center frame is the natural pick for a sweep)
        let order: Vec<usize> = if frames.len() == 6 {
            vec![1, 4, 0, 2, 3, 5]
        } else {
            (0..frames.len()).collect()
        };
        let mut located = None;
        for &i in &order {
            match locate_object_in_frame(&frames[i], self.query, self.scorer) {
                Ok(l) => {
                    located = Some(l);
                    break;
                }
                Err(ScorerError::SegmentNotFound) => continue,
                Err(e) => return Err(e.into()),
            }
        }
        let located = located.ok_or(ScorerError::SegmentNotFound)?;
        self.push_locate_events(&located);
        let object_id = located.object_id;

        let mut cloud = PointCloud::default();
        for f in &frames {
            cloud.extend(&f.to_cloud(Some(object_id)));
        }
        let plane = self.fit_up_facing_plane(&cloud)?;
        self.events.push(TraceEvent::GroundPlane {
            normal: plane.normal,
            offset: plane.offset,
            inliers: plane.inlier_indices.len(),
        });

        let frame2d = GroundFrame::from_plane(&plane);
        let mut object_pts = Vec::new();
        let mut ground_pts = Vec::with_capacity(plane.inlier_indices.len());
        let mut obstacle_pts = Vec::new();
        let mut inlier = vec![false; cloud.len()];
        for &i in &plane.inlier_indices {
            inlier[i] = true;
        }
        for i in 0..cloud.len() {
            let p = frame2d.project(cloud.points[i]);
            match (cloud.label(i), inlier[i]) {
                (PointLabel::Object, _) => object_pts.push(p),
                (PointLabel::Other, true) => ground_pts.push(p),
                (PointLabel::Other, false) => obstacle_pts.push(p),
            }
        }
        let footprint = object_footprint(&object_pts)?;
        let mut grid = build_task_grid(&footprint, self.cfg.grid_resolution);
        grid.rasterize(&ground_pts, CellState::Ground);
        grid.rasterize(&obstacle_pts, CellState::Obstacle);
        grid.rasterize(&object_pts, CellState::QueriedObject);
        let counts = grid.counts();
        self.events.push(TraceEvent::GridBuilt {
            center: grid.center,
            half_extent: grid.half_extent,
            resolution: grid.resolution,
            size: grid.size,
            unseen: counts[0],
            obstacle: counts[1],
            ground: counts[2],
            object: counts[3],
            rle: grid.rle_encode(),
        });
        // a grid that never saw floor cannot place the robot anywhere
        if counts[2] == 0 {
            return Err(CandidateError::NoFeasibleCandidate.into());
        }

        // A tall object seen from one side projects to a thin line (its
        // visible face), so the enclosing circle's center sits on that face
        // rather than in the body. Push the gaze target rearward along the
        // face normal in that case; a filled footprint (visible top) needs
        // no correction.
        let gaze_center = corrected_gaze_center(&object_pts, &footprint, self.robot.position);
        Ok((grid, gaze_center))
    }

    /// RANSAC with an up-facing acceptance loop: dominant planes that are not
    /// within 25 degrees of world-up (walls, tall fronts) are stripped and
    /// the fit repeats on the remainder.
    fn fit_up_facing_plane(&self, cloud: &PointCloud<Scalar>) -> Result<PlaneModel<Scalar>, EpisodeError> {
        let min_up = 25f64.to_radians().cos();
        let mut work = cloud.clone();
        let mut index_map: Vec<usize> = (0..cloud.len()).collect();
        for _round in 0..4 {
            let plane = fit_ground_plane(
                &work,
                self.cfg.ransac_iterations,
                self.cfg.ransac_tolerance,
                self.cfg.seed,
            )?;
            if plane.normal.z >= min_up {
                let inlier_indices = plane.inlier_indices.iter().map(|&i| index_map[i]).collect();
                return Ok(PlaneModel {
                    inlier_indices,
                    ..plane
                });
            }
            let drop: std::collections::HashSet<usize> = plane.inlier_indices.iter().copied().collect();
            let mut next_points = Vec::with_capacity(work.len());
            let mut next_labels = Vec::with_capacity(work.len());
            let mut next_map = Vec::with_capacity(work.len());
            for i in 0..work.len() {
                if !drop.contains(&i) {
                    next_points.push(work.points[i]);
                    next_labels.push(work.label(i));
                    next_map.push(index_map[i]);
                }
            }
            work = PointCloud::with_labels(next_points, next_labels);
            index_map = next_map;
        }
        Err(EpisodeError::NoGroundPlane)
    }

    // -- stage 3 ---------------------------------------------------------

    fn location_candidates(
        &mut self,
        grid: &TaskGrid<Scalar>,
    ) -> Result<CandidateSet<Scalar>, EpisodeError> {
        let set = generate_candidates(grid, self.cfg.robot_radius, self.cfg.epsilon, self.cfg.seed)?;
        self.events.push(TraceEvent::Candidates { set: set.clone() });
        Ok(set)
    }

    // -- stage 4 ---------------------------------------------------------

    fn sequential_decision(
        &mut self,
        candidates: &CandidateSet<Scalar>,
        object_center: Point2,
    ) -> Result<Point2, EpisodeError> {
        let first = self.score_from_here(candidates, 1)?;
        let first_center = candidates
            .by_marker(first)
            .expect("marker from this set")
            .center;

        if self.cfg.mode == Mode::Ogd {
            self.navigate(first_center, "one_step_goal", StopRule::Full)?;
            return Ok(first_center);
        }

        self.navigate(first_center, "step1_midpoint", StopRule::Midpoint)?;
        self.rotate_to(object_center);

        let second = self.score_from_here(candidates, 2)?;
        let second_center = candidates
            .by_marker(second)
            .expect("marker from this set")
            .center;
        self.navigate(second_center, "step2_final", StopRule::Full)?;
        Ok(second_center)
    }

    /// Project all candidates from the current camera and score the visible
    /// ones; an empty view falls back to the nearest candidate. The camera
    /// tilts down first — candidate markers are floor points close by, out
    /// of a level camera's view.
    fn score_from_here(
        &mut self,
        candidates: &CandidateSet<Scalar>,
        step: u8,
    ) -> Result<u32, EpisodeError> {
        for _ in 0..2 {
            self.act(Action::LookDown);
        }
        let frame = self.capture_here();
        let overlay = project_markers(
            &self.robot.camera_pose(),
            &self.intr,
            self.cfg.image_width,
            self.cfg.image_height,
            candidates,
            self.scene,
        );
        for _ in 0..2 {
            self.act(Action::LookUp);
        }
        match score_candidates(&overlay, &frame, self.query, self.scorer) {
            Ok(choice) => {
                self.events.push(TraceEvent::Decision {
                    stage: Stage::ScoreCandidates,
                    options: choice.options.len(),
                    scores: choice.decision.scores.clone(),
                    chosen: choice.decision.chosen,
                    marker: Some(choice.marker),
                });
                Ok(choice.marker)
            }
            Err(ScorerError::NoVisibleCandidates) => {
                let marker = candidates
                    .nearest_to(self.robot.position)
                    .expect("non-empty set")
                    .marker;
                self.events.push(TraceEvent::FallbackNearest { step, marker });
                Ok(marker)
            }
            Err(e) => Err(e.into()),
        }
    }

    // -- DNT -------------------------------------------------------------

    fn direct_to_target(&mut self) -> Result<(), EpisodeError> {
        let frame = self.capture_here();
        let located = locate_object_in_frame(&frame, self.query, self.scorer)?;
        self.push_locate_events(&located);
        let centroid = centroid_xy(&located.cloud);
        self.events.push(TraceEvent::FinalCommand {
            position: centroid,
            heading: self.robot.heading,
        });
        self.navigate(centroid, "direct_target", StopRule::Full)?;
        Ok(())
    }

    // -- shared movement/capture helpers ----------------------------------

    fn act(&mut self, action: Action) {
        let out = apply_action(self.scene, &self.robot, action, &self.cfg.actions, self.cfg.robot_radius);
        self.robot = out.state;
        if out.collided {
            self.collisions += 1;
        }
        self.actions.push(action);
    }

    fn capture_here(&mut self) -> Frame {
        self.frame_counter += 1;
        capture_frame(
            self.scene,
            &self.robot.camera_pose(),
            &self.intr,
            self.cfg.image_width,
            self.cfg.image_height,
            self.frame_counter,
        )
    }

    fn push_locate_events(&mut self, located: &crate::scorer::LocatedObject) {
        self.events.push(TraceEvent::Decision {
            stage: Stage::LocateObject,
            options: located.decision.scores.len(),
            scores: located.decision.scores.clone(),
            chosen: located.decision.chosen,
            marker: None,
        });
        self.events.push(TraceEvent::ObjectLocated {
            object_id: located.object_id,
            points: located.cloud.len(),
        });
    }

    fn rotate_to(&mut self, target: Point2) {
        let turns = rotate_to_face(&self.robot, target, self.cfg.actions.turn_step_deg);
        for turn in &turns {
            self.robot = apply_action(self.scene, &self.robot, *turn, &self.cfg.actions, self.cfg.robot_radius).state;
        }
        self.actions.extend_from_slice(&turns);
        self.events.push(TraceEvent::RotateToFace {
            target,
            turns: turns.len(),
        });
    }

    fn navigate(&mut self, goal: Point2, purpose: &str, stop: StopRule) -> Result<(), EpisodeError> {
        let path = plan_path(self.map, self.robot.position, goal, self.cfg.robot_radius)?;
        let stop_at = match stop {
            StopRule::Full => path.length,
            StopRule::Midpoint => path.length * 0.5,
        };
        let out = follow_path(
            self.scene,
            &self.robot,
            &path,
            stop_at,
            &self.cfg.actions,
            self.cfg.robot_radius,
        );
        // even a stuck follower has moved the robot; account before bailing
        let (state, actions, traveled, collisions, stuck) = match out {
            Ok(o) => (o.state, o.actions, o.traveled, o.collisions, None),
            Err(e) => (self.robot, Vec::new(), 0.0, 0, Some(e)),
        };
        self.robot = state;
        self.traveled += traveled;
        self.collisions += collisions;
        self.events.push(TraceEvent::Navigate {
            purpose: purpose.to_string(),
            from: *path.waypoints.first().expect("non-empty path"),
            to: goal,
            planned_length: path.length,
            stop_at,
            traveled,
            action_count: actions.len(),
            waypoints: path.waypoints.clone(),
        });
        self.actions.extend(actions);
        if let Some(e) = stuck {
            return Err(e.into());
        }
        Ok(())
    }
}

struct StageOne {
    chosen_frame: Frame,
    object_estimate: Point2,
}

#[derive(Clone, Copy)]
enum StopRule {
    Full,
    Midpoint,
}

fn centroid_xy(cloud: &PointCloud<Scalar>) -> Point2 {
    let mut acc = Point2::zero();
    for p in &cloud.points {
        acc += p.xy();
    }
    acc / (cloud.len().max(1) as Scalar)
}

/// Estimate the object's body center for gazing. When the sensed footprint
/// is line-like (2D PCA eigenvalue ratio below a thinness threshold), the
/// body extends behind the seen face: shift the target along the face
/// normal, away from the viewer, by most of the footprint radius.
fn corrected_gaze_center(
    points: &[Point2],
    footprint: &crate::taskgrid::ObjectFootprint<Scalar>,
    viewer: Point2,
) -> Point2 {
    let n = points.len();
    if n < 3 {
        return footprint.center;
    }
    let mut mean = Point2::zero();
    for p in points {
        mean += *p;
    }
    mean = mean / n as Scalar;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let d = *p - mean;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    let tr = sxx + syy;
    let disc = ((sxx - syy) * (sxx - syy) + 4.0 * sxy * sxy).sqrt();
    let l_max = 0.5 * (tr + disc);
    let l_min = 0.5 * (tr - disc).max(0.0);
    if l_max <= 1e-12 || l_min / l_max > 0.04 {
        return footprint.center;
    }
    // eigenvector of the minor eigenvalue = normal of the dominant line
    let v = if sxy.abs() > 1e-12 {
        Point2::new(l_min - syy, sxy)
    } else if sxx <= syy {
        Point2::new(1.0, 0.0)
    } else {
        Point2::new(0.0, 1.0)
    };
    let Some(mut normal) = v.normalized() else {
        return footprint.center;
    };
    if normal.dot(footprint.center - viewer) < 0.0 {
        normal = -normal;
    }
    footprint.center + normal * (footprint.radius.min(0.5) * 0.8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::OracleScorer;
    use crate::simworld::templates::{generate_scene, StartPlacement, TemplateParams};

    fn quick_cfg() -> PipelineConfig {
        PipelineConfig {
            ransac_iterations: 200,
            ..Default::default()
        }
    }

    fn task_of(scene: &SceneSpec) -> TaskQuery {
        let hint = scene.task.clone().expect("templates carry tasks");
        TaskQuery::new(hint.text, hint.label)
    }

    #[test]
    fn full_mode_open_room_succeeds() {
        let scene = generate_scene(
            "open-room",
            &TemplateParams {
                object: Some("refrigerator".into()),
                start: StartPlacement::Random,
                distractors: None,
            },
            3,
        )
        .unwrap();
        let query = task_of(&scene);
        let mut oracle = OracleScorer::new(&scene);
        let (result, trace) = run_episode(&scene, &query, &mut oracle, &quick_cfg()).unwrap();
        assert!(result.failure.is_none(), "failure: {:?}", result.failure);
        assert!(result.success, "dtg {}", result.dtg);
        assert!(result.dtg < 0.5);
        assert!(result.heading_error_deg < 10.0, "heading err {}", result.heading_error_deg);
        // the commanded final pose is a generated candidate center
        let set = trace.candidate_set().expect("candidates traced");
        let cmd = trace.final_command().expect("final command traced");
        assert!(set.circles.iter().any(|c| c.center == cmd));
    }

    #[test]
    fn episode_is_deterministic() {
        let scene = generate_scene("open-room", &TemplateParams::default(), 11).unwrap();
        let query = task_of(&scene);
        let cfg = quick_cfg();
        let mut o1 = OracleScorer::new(&scene);
        let (r1, t1) = run_episode(&scene, &query, &mut o1, &cfg).unwrap();
        let mut o2 = OracleScorer::new(&scene);
        let (r2, t2) = run_episode(&scene, &query, &mut o2, &cfg).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(t1.to_jsonl(), t2.to_jsonl());
    }

    #[test]
    fn absent_label_is_config_error() {
        let scene = generate_scene("open-room", &TemplateParams::default(), 1).unwrap();
        let query = TaskQuery::new("find the teleporter", "teleporter");
        let mut oracle = OracleScorer::new(&scene);
        assert!(run_episode(&scene, &query, &mut oracle, &quick_cfg()).is_err());
    }

    #[test]
    fn scorer_abstention_is_failed_episode() {
        let scene = generate_scene("open-room", &TemplateParams::default(), 1).unwrap();
        let query = task_of(&scene);
        // a scripted log that abstains at stage 1
        let cfg = quick_cfg();
        let n_frames = exploration_ring(&scene, cfg.exploration_poses, cfg.robot_radius).len();
        let mut scripted = crate::scorer::ScriptedScorer::new(vec![DecisionRecord {
            stage: Stage::SelectImage,
            options: n_frames,
            scores: vec![0.0; n_frames],
            chosen: 0,
            rationale: None,
        }]);
        let (result, trace) = run_episode(&scene, &query, &mut scripted, &cfg).unwrap();
        assert!(!result.success);
        assert!(result.failure.as_deref().unwrap_or("").contains("identify_target_scene"));
        // DTG is measured from the start since the robot never moved
        let map = build_occupancy_map(&scene, 0.05);
        let (optimal, _) = metrics_goal(&scene, &map, 10, 0.2);
        assert!((result.dtg - scene.start.position.dist(optimal)).abs() < 1e-9);
        assert!(trace
            .events
            .iter()
            .any(|e| matches!(e, TraceEvent::Failure { .. })));
    }

    #[test]
    fn scripted_replay_reproduces_trace() {
        let scene = generate_scene("open-room", &TemplateParams::default(), 21).unwrap();
        let query = task_of(&scene);
        let cfg = quick_cfg();
        let mut oracle = OracleScorer::new(&scene);
        let (_, trace) = run_episode(&scene, &query, &mut oracle, &cfg).unwrap();
        let mut scripted = crate::scorer::ScriptedScorer::new(trace.decision_records());
        let (_, replayed) = run_episode(&scene, &query, &mut scripted, &cfg).unwrap();
        assert_eq!(replayed.to_jsonl(), trace.to_jsonl());
    }

    #[test]
    fn dnt_skips_candidates_and_parks_adjacent() {
        let scene = generate_scene(
            "wall-backed-object",
            &TemplateParams {
                object: Some("refrigerator".into()),
                start: StartPlacement::Beside,
                distractors: None,
            },
            5,
        )
        .unwrap();
        let query = task_of(&scene);
        let cfg = quick_cfg();
        let mut oracle = OracleScorer::new(&scene);
        let (dnt, trace) = run_ablation(&scene, &query, &mut oracle, &cfg, Mode::Dnt).unwrap();
        assert!(dnt.failure.is_none(), "{:?}", dnt.failure);
        // no candidate generation, no second decision
        assert!(trace.candidate_set().is_none());
        assert!(trace
            .events
            .iter()
            .all(|e| !matches!(e, TraceEvent::Decision { stage: Stage::ScoreCandidates, .. })));
        // the robot stops adjacent to the object footprint
        let target = scene.primitive(10).unwrap();
        let adjacency = target.footprint_distance(dnt.final_position);
        assert!(adjacency < 0.8, "parked {adjacency} m from the object");
    }

    #[test]
    fn norts_fails_when_stage1_frame_lacks_local_ground() {
        // a low wall hides the floor around the object from the ring pose;
        // the single-frame grid then has no place to stand
        let mut scene = generate_scene(
            "wall-backed-object",
            &TemplateParams {
                object: Some("refrigerator".into()),
                start: StartPlacement::Beside,
                distractors: None,
            },
            2,
        )
        .unwrap();
        let target = scene.primitive(10).unwrap();
        let dir = target.operation_direction.unwrap();
        let target_center = target.center;
        let barrier_center = target_center + dir * 1.0;
        let lateral = Point2::new(-dir.y, dir.x);
        scene.primitives.push(crate::simworld::Primitive {
            object_id: 60,
            label: None,
            center: barrier_center,
            height: 1.2,
            shape: crate::simworld::Shape::Box {
                size: [0.15, 3.5],
                yaw: lateral.angle(),
            },
            operation_direction: None,
        });
        // keep the start legal even with the new barrier
        if !scene.position_free(scene.start.position, 0.2) {
            scene.start.position = target_center + lateral * 1.6;
        }
        let query = task_of(&scene);
        let mut oracle = OracleScorer::new(&scene);
        let (result, trace) = run_ablation(&scene, &query, &mut oracle, &quick_cfg(), Mode::NoRts).unwrap();
        if let Some(f) = &result.failure {
            assert!(
                f.contains("no feasible candidate") || f.contains("no segment"),
                "unexpected failure {f}"
            );
        } else {
            // if it survived, the grid must at least have seen some ground
            let ground = trace.events.iter().find_map(|e| match e {
                TraceEvent::GridBuilt { ground, .. } => Some(*ground),
                _ => None,
            });
            assert!(ground.unwrap_or(0) > 0);
        }
    }
}
