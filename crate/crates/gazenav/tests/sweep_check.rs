use gazenav::pipeline::*;
use gazenav::scorer::{OracleScorer, TaskQuery};
use gazenav::simworld::templates::{generate_scene, StartPlacement, TemplateParams};

#[test]
#[ignore]
fn survey_full_mode() {
    let cfg = PipelineConfig { ransac_iterations: 250, ..Default::default() };
    let mut ok = 0;
    let mut total = 0;
    for template in ["open-room", "wall-backed-object", "corner-object", "cluttered"] {
        for start in [StartPlacement::Random, StartPlacement::Beside, StartPlacement::Behind] {
            for seed in 0..5u64 {
                let params = TemplateParams { object: None, start, distractors: None };
                let scene = generate_scene(template, &params, seed).unwrap();
                let t = scene.task.clone().unwrap();
                let query = TaskQuery::new(t.text.clone(), t.label.clone());
                let mut oracle = OracleScorer::new(&scene);
                let (r, _) = run_episode(&scene, &query, &mut oracle, &cfg).unwrap();
                total += 1;
                let good = r.success && r.heading_error_deg < 10.0;
                if good { ok += 1; }
                if !good {
                    println!("MISS {template}/{start:?}/{seed} {} dtg {:.3} head {:.1} fail {:?}",
                        t.label, r.dtg, r.heading_error_deg, r.failure);
                }
            }
        }
    }
    println!("survey: {ok}/{total}");
}
