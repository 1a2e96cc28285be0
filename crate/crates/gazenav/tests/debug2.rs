use gazenav::pipeline::*;
use gazenav::scorer::{OracleScorer, TaskQuery};
use gazenav::simworld::templates::{generate_scene, TemplateParams, StartPlacement};
#[test]
#[ignore]
fn dbg_vending() {
    let params = TemplateParams { object: None, start: StartPlacement::Random, distractors: None };
    let scene = generate_scene("open-room", &params, 2).unwrap();
    let t = scene.task.clone().unwrap();
    let query = TaskQuery::new(t.text, t.label);
    let mut oracle = OracleScorer::new(&scene);
    let cfg = PipelineConfig { ransac_iterations: 250, ..Default::default() };
    let (r, trace) = run_episode(&scene, &query, &mut oracle, &cfg).unwrap();
    let target = scene.primitive(10).unwrap();
    let (opt, _) = scene.optimal_operation_pose(10, 0.2, 0.01).unwrap();
    println!("center {:?} op_dir {:?} optimal {:?}", target.center, target.operation_direction.unwrap(), opt);
    for e in &trace.events {
        match e {
            TraceEvent::Candidates { set } => {
                for c in &set.circles {
                    println!("  cand {} {:?} dist_to_opt {:.3}", c.marker, c.center, c.center.dist(opt));
                }
            }
            TraceEvent::Decision { stage, marker, .. } if marker.is_some() => println!("chose {:?} {:?}", stage, marker),
            TraceEvent::FallbackNearest { step, marker } => println!("fallback {step} {marker}"),
            _ => {}
        }
    }
    println!("final {:?} dtg {:.3}", r.final_position, r.dtg);
}
