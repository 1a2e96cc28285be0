//! Metrics and benchmark aggregation: SR, SPL, DTG over scene suites, with
//! deterministic CSV/JSON report emission.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::{run_episode, EpisodeTrace, Mode, PipelineConfig};
use crate::scorer::{Scorer, TaskQuery};
use crate::simworld::{SceneError, SceneSpec};
use crate::{Point2, Scalar};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("no episode results")]
    EmptyResults,
}

/// Outcome of one episode, the row every metric is computed from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub scene: String,
    pub query: String,
    pub mode: Mode,
    pub seed: u64,
    /// DTG below the success threshold.
    pub success: bool,
    /// Shortest path length from start to the optimal pose (l_i), meters.
    pub shortest_path: Scalar,
    /// Distance actually traveled (p_i), meters.
    pub traveled: Scalar,
    /// Distance from the final position to the optimal operation position.
    pub dtg: Scalar,
    pub final_position: Point2,
    pub final_heading: Scalar,
    /// |final heading - bearing to the object center|, degrees (auxiliary;
    /// success is decided on DTG only).
    pub heading_error_deg: Scalar,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Euclidean DTG between a final and an optimal position (headings excluded).
pub fn compute_dtg(final_position: Point2, optimal_position: Point2) -> Scalar {
    final_position.dist(optimal_position)
}

/// Success rate: the fraction of successful episodes.
pub fn compute_sr(results: &[EpisodeResult]) -> Result<Scalar, MetricError> {
    if results.is_empty() {
        return Err(MetricError::EmptyResults);
    }
    let s: Scalar = results.iter().map(|r| Scalar::from(u8::from(r.success))).sum();
    Ok(s / results.len() as Scalar)
}

/// Success weighted by path length: `(1/N) sum S_i * l_i / max(l_i, p_i)`.
pub fn compute_spl(results: &[EpisodeResult]) -> Result<Scalar, MetricError> {
    if results.is_empty() {
        return Err(MetricError::EmptyResults);
    }
    let total: Scalar = results
        .iter()
        .map(|r| {
            if !r.success {
                return 0.0;
            }
            debug_assert!(r.shortest_path > 0.0, "spl requires positive l_i");
            r.shortest_path / r.shortest_path.max(r.traveled)
        })
        .sum();
    Ok(total / results.len() as Scalar)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub group: String,
    pub episodes: usize,
    pub sr: Scalar,
    pub spl: Scalar,
    pub mean_dtg: Scalar,
    pub mean_heading_error_deg: Scalar,
}

fn aggregate(group: &str, results: &[EpisodeResult]) -> Aggregate {
    let n = results.len() as Scalar;
    Aggregate {
        group: group.to_string(),
        episodes: results.len(),
        sr: compute_sr(results).unwrap_or(0.0),
        spl: compute_spl(results).unwrap_or(0.0),
        mean_dtg: results.iter().map(|r| r.dtg).sum::<Scalar>() / n.max(1.0),
        mean_heading_error_deg: results.iter().map(|r| r.heading_error_deg).sum::<Scalar>() / n.max(1.0),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: PipelineConfig,
    pub seeds: Vec<u64>,
    pub rows: Vec<EpisodeResult>,
    pub per_scene: Vec<Aggregate>,
    pub overall: Aggregate,
}

impl BenchmarkReport {
    /// Deterministic CSV: one row per episode, fixed column order.
    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "scene",
            "query",
            "mode",
            "seed",
            "success",
            "shortest_path_m",
            "traveled_m",
            "dtg_m",
            "final_x",
            "final_y",
            "final_heading_rad",
            "heading_error_deg",
            "failure",
        ])
        .expect("csv header");
        for r in &self.rows {
            w.write_record([
                r.scene.as_str(),
                r.query.as_str(),
                r.mode.name(),
                &r.seed.to_string(),
                &u8::from(r.success).to_string(),
                &format!("{:.6}", r.shortest_path),
                &format!("{:.6}", r.traveled),
                &format!("{:.6}", r.dtg),
                &format!("{:.6}", r.final_position.x),
                &format!("{:.6}", r.final_position.y),
                &format!("{:.6}", r.final_heading),
                &format!("{:.6}", r.heading_error_deg),
                r.failure.as_deref().unwrap_or(""),
            ])
            .expect("csv row");
        }
        String::from_utf8(w.into_inner().expect("csv flush")).expect("csv is utf8")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Recompute every aggregate from the rows; `true` when they match the
    /// stored values exactly.
    pub fn aggregates_consistent(&self) -> bool {
        let mut scenes: Vec<String> = self.rows.iter().map(|r| r.scene.clone()).collect();
        scenes.dedup();
        let per_scene: Vec<Aggregate> = scenes
            .iter()
            .map(|s| {
                let rows: Vec<EpisodeResult> =
                    self.rows.iter().filter(|r| &r.scene == s).cloned().collect();
                aggregate(s, &rows)
            })
            .collect();
        per_scene == self.per_scene && aggregate("overall", &self.rows) == self.overall
    }
}

/// Run every (scene, query) pair once per seed, in order, and aggregate.
/// `make_scorer` builds a fresh scorer per episode so stateful backends
/// replay cleanly. Per-episode traces are handed to `on_trace` as they
/// complete.
pub fn run_benchmark(
    suite: &[(SceneSpec, TaskQuery)],
    make_scorer: &mut dyn FnMut(&SceneSpec, u64) -> Box<dyn Scorer>,
    cfg: &PipelineConfig,
    seeds: &[u64],
    mut on_trace: Option<&mut dyn FnMut(&EpisodeResult, &EpisodeTrace)>,
) -> Result<BenchmarkReport, SceneError> {
    let mut rows = Vec::with_capacity(suite.len() * seeds.len());
    for (scene, query) in suite {
        for &seed in seeds {
            let episode_cfg = PipelineConfig {
                seed,
                ..cfg.clone()
            };
            let mut scorer = make_scorer(scene, seed);
            let (result, trace) = run_episode(scene, query, scorer.as_mut(), &episode_cfg)?;
            if let Some(cb) = on_trace.as_deref_mut() {
                cb(&result, &trace);
            }
            rows.push(result);
        }
    }
    let mut scene_names: Vec<String> = rows.iter().map(|r| r.scene.clone()).collect();
    scene_names.dedup();
    let per_scene = scene_names
        .iter()
        .map(|s| {
            let group: Vec<EpisodeResult> = rows.iter().filter(|r| &r.scene == s).cloned().collect();
            aggregate(s, &group)
        })
        .collect();
    let overall = aggregate("overall", &rows);
    Ok(BenchmarkReport {
        config: cfg.clone(),
        seeds: seeds.to_vec(),
        rows,
        per_scene,
        overall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(success: bool, l: Scalar, p: Scalar) -> EpisodeResult {
        EpisodeResult {
            scene: "s".into(),
            query: "q".into(),
            mode: Mode::Full,
            seed: 0,
            success,
            shortest_path: l,
            traveled: p,
            dtg: if success { 0.1 } else { 1.0 },
            final_position: Point2::zero(),
            final_heading: 0.0,
            heading_error_deg: 0.0,
            failure: None,
        }
    }

    #[test]
    fn dtg_is_euclidean() {
        assert!((compute_dtg(Point2::new(1.0, 0.0), Point2::new(1.0, 0.4)) - 0.4).abs() < 1e-12);
        assert_eq!(compute_dtg(Point2::new(2.0, 3.0), Point2::new(2.0, 3.0)), 0.0);
    }

    #[test]
    fn spl_worked_examples() {
        assert_eq!(compute_spl(&[result(true, 2.0, 4.0)]).unwrap(), 0.5);
        assert_eq!(
            compute_spl(&[result(false, 2.0, 4.0), result(false, 1.0, 1.0)]).unwrap(),
            0.0
        );
        let two = [result(true, 3.0, 3.0), result(true, 1.0, 2.0)];
        assert_eq!(compute_spl(&two).unwrap(), 0.75);
        assert!(matches!(compute_spl(&[]), Err(MetricError::EmptyResults)));
    }

    #[test]
    fn sr_worked_examples() {
        let mut rows: Vec<EpisodeResult> = (0..7).map(|_| result(true, 1.0, 1.0)).collect();
        rows.extend((0..3).map(|_| result(false, 1.0, 1.0)));
        assert!((compute_sr(&rows).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(compute_sr(&[result(true, 1.0, 1.0)]).unwrap(), 1.0);
        assert!(matches!(compute_sr(&[]), Err(MetricError::EmptyResults)));
    }

    #[test]
    fn spl_never_exceeds_sr() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let rows: Vec<EpisodeResult> = (0..rng.gen_range(1..20))
                .map(|_| {
                    result(
                        rng.gen_bool(0.6),
                        rng.gen_range(0.1..5.0),
                        rng.gen_range(0.0..6.0),
                    )
                })
                .collect();
            let sr = compute_sr(&rows).unwrap();
            let spl = compute_spl(&rows).unwrap();
            assert!(spl <= sr + 1e-12, "spl {spl} > sr {sr}");
            assert!((0.0..=1.0).contains(&spl) && (0.0..=1.0).contains(&sr));
            // equality holds exactly when every success traveled no farther
            // than the shortest path
            let tight = rows.iter().filter(|r| r.success).all(|r| r.traveled <= r.shortest_path);
            if tight {
                assert!((spl - sr).abs() < 1e-12);
            } else {
                assert!(spl < sr);
            }
        }
    }

    #[test]
    fn csv_is_deterministic_and_aggregates_recompute() {
        use crate::scorer::OracleScorer;
        use crate::simworld::templates::{generate_scene, TemplateParams};
        let suite: Vec<(SceneSpec, TaskQuery)> = (0..2)
            .map(|s| {
                let scene = generate_scene("open-room", &TemplateParams::default(), s).unwrap();
                let t = scene.task.clone().unwrap();
                (scene, TaskQuery::new(t.text, t.label))
            })
            .collect();
        let cfg = PipelineConfig {
            ransac_iterations: 150,
            ..Default::default()
        };
        let mut factory = |scene: &SceneSpec, _seed: u64| -> Box<dyn Scorer> {
            Box::new(OracleScorer::new(scene))
        };
        let a = run_benchmark(&suite, &mut factory, &cfg, &[1, 2], None).unwrap();
        let b = run_benchmark(&suite, &mut factory, &cfg, &[1, 2], None).unwrap();
        assert_eq!(a.rows.len(), 4);
        assert_eq!(a.to_csv_string(), b.to_csv_string());
        assert!(a.aggregates_consistent());
        // repeats show up as extra seeds
        let c = run_benchmark(&suite, &mut factory, &cfg, &[1, 2, 3], None).unwrap();
        assert_eq!(c.rows.len(), 6);
    }
}
