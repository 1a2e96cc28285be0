//! Seeded scene generators used by the CLI and the benchmark suites.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simworld::scene::{
    FloorExtent, Primitive, SceneSpec, Shape, StartPose, TaskHint,
};
use crate::{Point2, Scalar, ROBOT_RADIUS};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("unknown scene template {0:?}")]
    UnknownTemplate(String),
}

pub const TEMPLATES: [&str; 5] = [
    "open-room",
    "wall-backed-object",
    "corner-object",
    "enclosed-object",
    "cluttered",
];

/// Where the robot starts relative to the object's operation direction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartPlacement {
    Front,
    Beside,
    Behind,
    #[default]
    Random,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TemplateParams {
    /// Target object label; seeded pick from the catalog when absent.
    pub object: Option<String>,
    pub start: StartPlacement,
    /// Distractor count for the cluttered template.
    pub distractors: Option<usize>,
}

struct CatalogEntry {
    label: &'static str,
    task: &'static str,
    /// [depth (front axis), width] for boxes; depth doubles as diameter for disks.
    size: [Scalar; 2],
    height: Scalar,
    disk: bool,
}

const CATALOG: [CatalogEntry; 5] = [
    CatalogEntry {
        label: "refrigerator",
        task: "open the refrigerator",
        size: [0.65, 0.65],
        height: 1.8,
        disk: false,
    },
    CatalogEntry {
        label: "cabinet",
        task: "open the cabinet",
        size: [0.45, 0.8],
        height: 1.0,
        disk: false,
    },
    CatalogEntry {
        label: "couch",
        task: "sit on the couch",
        size: [0.65, 1.4],
        height: 0.8,
        disk: false,
    },
    CatalogEntry {
        label: "chair",
        task: "sit on the chair",
        size: [0.56, 0.56],
        height: 0.9,
        disk: true,
    },
    CatalogEntry {
        label: "vending machine",
        task: "buy a drink from the vending machine",
        size: [0.7, 0.7],
        height: 1.9,
        disk: false,
    },
];

const ROOM_HALF: Scalar = 2.5;
const WALL_THICKNESS: Scalar = 0.1;
const WALL_HEIGHT: Scalar = 2.5;
const TARGET_ID: u32 = 10;

/// Generate a scene from a named template; deterministic per seed.
pub fn generate_scene(
    template: &str,
    params: &TemplateParams,
    seed: u64,
) -> Result<SceneSpec, TemplateError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scene = match template {
        "open-room" => open_room(&mut rng, params, 0),
        "wall-backed-object" => wall_backed(&mut rng, params),
        "corner-object" => corner_object(&mut rng, params),
        "enclosed-object" => enclosed_object(&mut rng, params),
        "cluttered" => {
            let n = params.distractors.unwrap_or(4);
            open_room(&mut rng, params, n)
        }
        other => return Err(TemplateError::UnknownTemplate(other.to_string())),
    };
    scene.name = format!("{template}-{seed}");
    place_start(&mut rng, &mut scene, params.start);
    debug_assert!(scene.validate(ROBOT_RADIUS).is_ok(), "template produced an invalid scene");
    Ok(scene)
}

fn room_shell() -> (FloorExtent, Vec<Primitive>) {
    let floor = FloorExtent {
        min: Point2::new(-ROOM_HALF, -ROOM_HALF),
        max: Point2::new(ROOM_HALF, ROOM_HALF),
    };
    let inner = ROOM_HALF - WALL_THICKNESS * 0.5;
    let len = 2.0 * ROOM_HALF;
    let walls = [
        (Point2::new(0.0, inner), [len, WALL_THICKNESS]),
        (Point2::new(0.0, -inner), [len, WALL_THICKNESS]),
        (Point2::new(inner, 0.0), [WALL_THICKNESS, len]),
        (Point2::new(-inner, 0.0), [WALL_THICKNESS, len]),
    ];
    let prims = walls
        .iter()
        .enumerate()
        .map(|(i, (center, size))| Primitive {
            object_id: 90 + i as u32,
            label: None,
            center: *center,
            height: WALL_HEIGHT,
            shape: Shape::Box {
                size: *size,
                yaw: 0.0,
            },
            operation_direction: None,
        })
        .collect();
    (floor, prims)
}

fn pick_entry<'a>(rng: &mut ChaCha8Rng, params: &TemplateParams) -> &'a CatalogEntry {
    if let Some(label) = &params.object {
        if let Some(e) = CATALOG.iter().find(|e| e.label == label) {
            // keep the rng stream identical whether or not the pick was forced
            let _ = rng.gen_range(0..CATALOG.len());
            return e;
        }
    }
    &CATALOG[rng.gen_range(0..CATALOG.len())]
}

fn make_target(entry: &CatalogEntry, center: Point2, yaw: Scalar) -> Primitive {
    let shape = if entry.disk {
        Shape::Disk {
            radius: entry.size[0] * 0.5,
        }
    } else {
        Shape::Box {
            size: entry.size,
            yaw,
        }
    };
    Primitive {
        object_id: TARGET_ID,
        label: Some(entry.label.to_string()),
        center,
        height: entry.height,
        shape,
        operation_direction: Some(Point2::from_angle(yaw)),
    }
}

fn base_scene(floor: FloorExtent, prims: Vec<Primitive>, entry: &CatalogEntry) -> SceneSpec {
    SceneSpec {
        name: String::new(),
        floor,
        primitives: prims,
        start: StartPose {
            position: Point2::new(-1.8, -1.8),
            heading: 0.0,
        },
        task: Some(TaskHint {
            text: entry.task.to_string(),
            label: entry.label.to_string(),
        }),
    }
}

fn open_room(rng: &mut ChaCha8Rng, params: &TemplateParams, distractors: usize) -> SceneSpec {
    let (floor, mut prims) = room_shell();
    let entry = pick_entry(rng, params);
    let center = Point2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let quarter = rng.gen_range(0..4) as Scalar * std::f64::consts::FRAC_PI_2;
    let yaw = quarter + rng.gen_range(-0.15..0.15);
    let target = make_target(entry, center, yaw);
    prims.push(target);
    let mut scene = base_scene(floor, prims, entry);

    let palette = ["plant", "box", "lamp", "trash can"];
    let mut next_id = 20;
    for _ in 0..distractors {
        for _attempt in 0..60 {
            let c = Point2::new(rng.gen_range(-1.9..1.9), rng.gen_range(-1.9..1.9));
            let size = [rng.gen_range(0.3..0.55), rng.gen_range(0.3..0.55)];
            let prim = Primitive {
                object_id: next_id,
                label: Some(palette[(next_id as usize) % palette.len()].to_string()),
                center: c,
                height: rng.gen_range(0.4..1.2),
                shape: Shape::Box {
                    size,
                    yaw: rng.gen_range(-0.4..0.4),
                },
                operation_direction: None,
            };
            if distractor_placement_ok(&scene, &prim) {
                scene.primitives.push(prim);
                next_id += 1;
                break;
            }
        }
    }
    scene
}

/// Keep distractors out of the target's operating corridor and away from
/// everything else so the front stays reachable.
fn distractor_placement_ok(scene: &SceneSpec, prim: &Primitive) -> bool {
    let target = scene.primitive(TARGET_ID).expect("target placed first");
    let op_dir = target.operation_direction.expect("target has a direction");
    let rel = prim.center - target.center;
    let along = rel.dot(op_dir);
    let lateral = rel.cross(op_dir).abs();
    if along > -0.2 && along < 1.6 && lateral < 0.8 {
        return false; // inside the front corridor
    }
    let sep = scene
        .primitives
        .iter()
        .map(|p| prim.footprint_distance(p.center).min(p.footprint_distance(prim.center)))
        .fold(Scalar::INFINITY, Scalar::min);
    sep > 0.55
}

fn wall_backed(rng: &mut ChaCha8Rng, params: &TemplateParams) -> SceneSpec {
    let (floor, mut prims) = room_shell();
    let entry = pick_entry(rng, params);
    let side = rng.gen_range(0..4u32);
    // inward normal of the chosen wall
    let normal = match side {
        0 => Point2::new(0.0, -1.0), // north wall
        1 => Point2::new(0.0, 1.0),
        2 => Point2::new(-1.0, 0.0),
        _ => Point2::new(1.0, 0.0),
    };
    let inner_face = ROOM_HALF - WALL_THICKNESS;
    let lateral = rng.gen_range(-1.1..1.1);
    let depth = entry.size[0];
    let along_axis = -normal * (inner_face - depth * 0.5 - 0.01);
    let lateral_axis = Point2::new(-normal.y, normal.x) * lateral;
    let center = along_axis + lateral_axis;
    let yaw = normal.angle();
    prims.push(make_target(entry, center, yaw));
    base_scene(floor, prims, entry)
}

fn corner_object(rng: &mut ChaCha8Rng, params: &TemplateParams) -> SceneSpec {
    let (floor, mut prims) = room_shell();
    let entry = pick_entry(rng, params);
    let sx = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let sy = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let inward = Point2::new(-sx, -sy).normalized().expect("unit");
    let half_diag = (entry.size[0].max(entry.size[1])) * std::f64::consts::FRAC_1_SQRT_2 + 0.06;
    let inner_face = ROOM_HALF - WALL_THICKNESS;
    let corner = Point2::new(sx * inner_face, sy * inner_face);
    let center = corner + inward * half_diag;
    let yaw = inward.angle();
    prims.push(make_target(entry, center, yaw));
    base_scene(floor, prims, entry)
}

fn enclosed_object(rng: &mut ChaCha8Rng, params: &TemplateParams) -> SceneSpec {
    let (floor, mut prims) = room_shell();
    let entry = pick_entry(rng, params);
    let center = Point2::new(rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7));
    let yaw = rng.gen_range(0.0..std::f64::consts::TAU);
    prims.push(make_target(entry, center, yaw));
    // ring of pillars tight enough that no robot-sized circle fits the band
    let object_radius = entry.size[0].max(entry.size[1]) * 0.5;
    let ring_radius = object_radius + 0.45;
    let pillars = 12;
    for k in 0..pillars {
        let a = std::f64::consts::TAU * k as Scalar / pillars as Scalar;
        prims.push(Primitive {
            object_id: 40 + k as u32,
            label: None,
            center: center + Point2::from_angle(a) * ring_radius,
            height: 1.2,
            shape: Shape::Box {
                size: [0.25, 0.25],
                yaw: a,
            },
            operation_direction: None,
        });
    }
    base_scene(floor, prims, entry)
}

fn place_start(rng: &mut ChaCha8Rng, scene: &mut SceneSpec, placement: StartPlacement) {
    let target = scene.primitive(TARGET_ID).expect("target exists");
    let center = target.center;
    let op_dir = target.operation_direction.expect("target has a direction");
    let margin = ROBOT_RADIUS + 0.06;
    for _ in 0..120 {
        let offset = match placement {
            StartPlacement::Front => rng.gen_range(-0.5..0.5),
            StartPlacement::Beside => {
                let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                side * rng.gen_range(1.2..1.9)
            }
            StartPlacement::Behind => std::f64::consts::PI + rng.gen_range(-0.5..0.5),
            StartPlacement::Random => rng.gen_range(0.0..std::f64::consts::TAU),
        };
        let dist = rng.gen_range(1.5..2.1);
        let pos = center + op_dir.rotated(offset) * dist;
        if scene.position_free(pos, margin) {
            scene.start = StartPose {
                position: pos,
                heading: rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
            };
            return;
        }
    }
    // deterministic fallback: coarse scan for any free spot away from the target
    let step = 0.25;
    let mut y = scene.floor.min.y + 0.4;
    while y < scene.floor.max.y - 0.4 {
        let mut x = scene.floor.min.x + 0.4;
        while x < scene.floor.max.x - 0.4 {
            let pos = Point2::new(x, y);
            if pos.dist(center) > 1.2 && scene.position_free(pos, margin) {
                scene.start = StartPose {
                    position: pos,
                    heading: 0.0,
                };
                return;
            }
            x += step;
        }
        y += step;
    }
    panic!("template left no free start position");
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_templates_generate_valid_scenes() {
        for template in TEMPLATES {
            for seed in 0..6 {
                let scene = generate_scene(template, &TemplateParams::default(), seed)
                    .unwrap_or_else(|e| panic!("{template}: {e}"));
                scene
                    .validate(ROBOT_RADIUS)
                    .unwrap_or_else(|e| panic!("{template} seed {seed}: {e}"));
                assert!(scene.task.is_some());
                assert!(scene.primitive(TARGET_ID).is_some());
            }
        }
    }

    #[test]
    fn unknown_template_errors() {
        assert!(matches!(
            generate_scene("lunar-base", &TemplateParams::default(), 1),
            Err(TemplateError::UnknownTemplate(_))
        ));
    }

    #[test]
    fn generation_is_deterministic() {
        for template in TEMPLATES {
            let a = generate_scene(template, &TemplateParams::default(), 9).unwrap();
            let b = generate_scene(template, &TemplateParams::default(), 9).unwrap();
            assert_eq!(a.to_json_string(), b.to_json_string());
        }
    }

    #[test]
    fn wall_backed_object_faces_away_from_wall() {
        for seed in 0..10 {
            let scene = generate_scene("wall-backed-object", &TemplateParams::default(), seed).unwrap();
            let target = scene.primitive(TARGET_ID).unwrap();
            let dir = target.operation_direction.unwrap();
            // the operating direction must point back into the room
            let toward_center = (scene.floor.center() - target.center).normalized().unwrap();
            assert!(dir.dot(toward_center) > 0.7, "seed {seed}: dir {dir:?}");
        }
    }

    #[test]
    fn start_placement_behind_is_behind() {
        for seed in 0..8 {
            let params = TemplateParams {
                start: StartPlacement::Behind,
                ..Default::default()
            };
            let scene = generate_scene("open-room", &params, seed).unwrap();
            let target = scene.primitive(TARGET_ID).unwrap();
            let dir = target.operation_direction.unwrap();
            let rel = (scene.start.position - target.center).normalized().unwrap();
            assert!(rel.dot(dir) < 0.0, "seed {seed}: start not behind");
        }
    }
}
