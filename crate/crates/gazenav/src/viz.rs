//! Static visualization export: PGM/PPM image builders for frames, task
//! grids and occupancy maps, digit stamping for marker annotation, and SVG
//! renderings of scenes and episode traces.

use crate::candidates::CandidateSet;
use crate::simworld::{Frame, OccupancyMap, SceneSpec, Shape};
use crate::taskgrid::{CellState, TaskGrid};
use crate::{Point2, Scalar};

/// Binary PGM (P5), one byte per pixel.
pub fn pgm_bytes(width: usize, height: usize, data: &[u8]) -> Vec<u8> {
    assert_eq!(data.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(data);
    out
}

/// Binary PPM (P6), three bytes per pixel.
pub fn ppm_bytes(width: usize, height: usize, rgb: &[[u8; 3]]) -> Vec<u8> {
    assert_eq!(rgb.len(), width * height);
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    for px in rgb {
        out.extend_from_slice(px);
    }
    out
}

/// Depth image scaled to the frame's maximum depth.
pub fn depth_pgm(frame: &Frame) -> Vec<u8> {
    let max = frame.depth.iter().cloned().fold(0.0, Scalar::max).max(1e-9);
    let data: Vec<u8> = frame
        .depth
        .iter()
        .map(|&d| if d <= 0.0 { 0 } else { (d / max * 255.0).round() as u8 })
        .collect();
    pgm_bytes(frame.width, frame.height, &data)
}

/// Deterministic segment-id color (golden-angle hue walk; 0 stays black).
pub fn seg_color(id: u32) -> [u8; 3] {
    if id == 0 {
        return [0, 0, 0];
    }
    let hue = (id as f64 * 137.508) % 360.0;
    let (r, g, b) = hsv_to_rgb(hue, 0.65, 0.95);
    [r, g, b]
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (u8, u8, u8) {
    let c = v * s;
    let x = c * (1.0 - ((h / 60.0) % 2.0 - 1.0).abs());
    let m = v - c;
    let (r, g, b) = match (h / 60.0) as u32 % 6 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    (
        ((r + m) * 255.0).round() as u8,
        ((g + m) * 255.0).round() as u8,
        ((b + m) * 255.0).round() as u8,
    )
}

/// Segmentation ids rendered with the deterministic palette.
pub fn seg_ppm_pixels(frame: &Frame) -> Vec<[u8; 3]> {
    frame.seg.iter().map(|&id| seg_color(id)).collect()
}

pub fn seg_ppm(frame: &Frame) -> Vec<u8> {
    ppm_bytes(frame.width, frame.height, &seg_ppm_pixels(frame))
}

/// Segmentation ids as raw gray levels (id modulo 256).
pub fn seg_pgm(frame: &Frame) -> Vec<u8> {
    let data: Vec<u8> = frame.seg.iter().map(|&id| (id % 256) as u8).collect();
    pgm_bytes(frame.width, frame.height, &data)
}

const DIGITS: [[u8; 5]; 10] = [
    [0b111, 0b101, 0b101, 0b101, 0b111], // 0
    [0b010, 0b110, 0b010, 0b010, 0b111], // 1
    [0b111, 0b001, 0b111, 0b100, 0b111], // 2
    [0b111, 0b001, 0b111, 0b001, 0b111], // 3
    [0b101, 0b101, 0b111, 0b001, 0b001], // 4
    [0b111, 0b100, 0b111, 0b001, 0b111], // 5
    [0b111, 0b100, 0b111, 0b101, 0b111], // 6
    [0b111, 0b001, 0b010, 0b010, 0b010], // 7
    [0b111, 0b101, 0b111, 0b101, 0b111], // 8
    [0b111, 0b101, 0b111, 0b001, 0b111], // 9
];

/// Stamp a decimal number into an RGB pixel buffer with a 3x5 bitmap font,
/// anchored at its top-left corner. Out-of-bounds pixels are clipped.
pub fn stamp_number(
    rgb: &mut [[u8; 3]],
    width: usize,
    height: usize,
    x: i64,
    y: i64,
    number: u32,
    color: [u8; 3],
) {
    let text = number.to_string();
    for (k, ch) in text.bytes().enumerate() {
        let glyph = DIGITS[(ch - b'0') as usize];
        let gx = x + (k as i64) * 4;
        for (row, bits) in glyph.iter().enumerate() {
            for col in 0..3 {
                if bits & (0b100 >> col) != 0 {
                    let px = gx + col as i64;
                    let py = y + row as i64;
                    if px >= 0 && py >= 0 && (px as usize) < width && (py as usize) < height {
                        rgb[py as usize * width + px as usize] = color;
                    }
                }
            }
        }
    }
}

/// Task grid as PGM: unseen gray, obstacle black, ground white, object dark.
pub fn taskgrid_pgm(grid: &TaskGrid<Scalar>) -> Vec<u8> {
    let n = grid.size;
    let mut data = vec![0u8; n * n];
    for iy in 0..n {
        for ix in 0..n {
            // flip y so north is up in the image
            let v = match grid.state(ix, n - 1 - iy) {
                CellState::Unseen => 128,
                CellState::Obstacle => 0,
                CellState::Ground => 255,
                CellState::QueriedObject => 64,
            };
            data[iy * n + ix] = v;
        }
    }
    pgm_bytes(n, n, &data)
}

/// Companion PPM with the queried object in red.
pub fn taskgrid_ppm(grid: &TaskGrid<Scalar>) -> Vec<u8> {
    let n = grid.size;
    let mut rgb = vec![[0u8; 3]; n * n];
    for iy in 0..n {
        for ix in 0..n {
            rgb[iy * n + ix] = match grid.state(ix, n - 1 - iy) {
                CellState::Unseen => [128, 128, 128],
                CellState::Obstacle => [0, 0, 0],
                CellState::Ground => [255, 255, 255],
                CellState::QueriedObject => [255, 0, 0],
            };
        }
    }
    ppm_bytes(n, n, &rgb)
}

/// Occupancy map as PGM: occupied black, free white.
pub fn occupancy_pgm(map: &OccupancyMap) -> Vec<u8> {
    let mut data = vec![0u8; map.width * map.height];
    for iy in 0..map.height {
        for ix in 0..map.width {
            let occ = map.is_occupied(ix, map.height - 1 - iy);
            data[iy * map.width + ix] = if occ { 0 } else { 255 };
        }
    }
    pgm_bytes(map.width, map.height, &data)
}

/// Minimal SVG writer mapping world coordinates to a y-down viewport.
pub struct SvgCanvas {
    min: Point2,
    max: Point2,
    scale: Scalar,
    body: String,
}

impl SvgCanvas {
    pub fn new(min: Point2, max: Point2, pixels_per_meter: Scalar) -> Self {
        Self {
            min,
            max,
            scale: pixels_per_meter,
            body: String::new(),
        }
    }

    fn tx(&self, p: Point2) -> (Scalar, Scalar) {
        ((p.x - self.min.x) * self.scale, (self.max.y - p.y) * self.scale)
    }

    pub fn rect_rotated(&mut self, center: Point2, size: [Scalar; 2], yaw: Scalar, style: &str) {
        let (cx, cy) = self.tx(center);
        let w = size[0] * self.scale;
        let h = size[1] * self.scale;
        // SVG y points down, so a CCW world yaw is a negative SVG rotation
        self.body.push_str(&format!(
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" transform=\"rotate({:.3} {:.2} {:.2})\" {} />\n",
            cx - w * 0.5,
            cy - h * 0.5,
            w,
            h,
            -yaw.to_degrees(),
            cx,
            cy,
            style
        ));
    }

    pub fn circle(&mut self, center: Point2, radius: Scalar, style: &str) {
        let (cx, cy) = self.tx(center);
        self.body.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{:.2}\" {} />\n",
            cx,
            cy,
            radius * self.scale,
            style
        ));
    }

    pub fn polyline(&mut self, points: &[Point2], style: &str) {
        if points.is_empty() {
            return;
        }
        let coords: Vec<String> = points
            .iter()
            .map(|p| {
                let (x, y) = self.tx(*p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        self.body
            .push_str(&format!("<polyline points=\"{}\" {} />\n", coords.join(" "), style));
    }

    pub fn text(&mut self, at: Point2, content: &str, style: &str) {
        let (x, y) = self.tx(at);
        self.body.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{y:.2}\" {style}>{content}</text>\n"
        ));
    }

    pub fn arrow(&mut self, from: Point2, dir: Point2, length: Scalar, style: &str) {
        let tip = from + dir * length;
        let left = from + dir.rotated(0.4) * (length * 0.7);
        let right = from + dir.rotated(-0.4) * (length * 0.7);
        self.polyline(&[from, tip], style);
        self.polyline(&[left, tip, right], style);
    }

    pub fn finish(self) -> String {
        let w = (self.max.x - self.min.x) * self.scale;
        let h = (self.max.y - self.min.y) * self.scale;
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.2} {h:.2}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body
        )
    }
}

/// Scene footprint rendering: floor, primitives, start pose, operation
/// directions.
pub fn scene_svg_canvas(scene: &SceneSpec) -> SvgCanvas {
    let mut svg = SvgCanvas::new(scene.floor.min, scene.floor.max, 120.0);
    for prim in &scene.primitives {
        let style = if prim.label.is_some() {
            "fill=\"#7fb3d5\" stroke=\"#1b4f72\" stroke-width=\"1\""
        } else {
            "fill=\"#aab7b8\" stroke=\"#566573\" stroke-width=\"1\""
        };
        match prim.shape {
            Shape::Box { size, yaw } => svg.rect_rotated(prim.center, size, yaw, style),
            Shape::Disk { radius } => svg.circle(prim.center, radius, style),
        }
        if let Some(dir) = prim.operation_direction {
            svg.arrow(prim.center, dir, 0.45, "stroke=\"#b7950b\" stroke-width=\"2\" fill=\"none\"");
        }
    }
    svg.circle(
        scene.start.position,
        0.08,
        "fill=\"#27ae60\" stroke=\"#145a32\" stroke-width=\"1\"",
    );
    svg.arrow(
        scene.start.position,
        Point2::from_angle(scene.start.heading),
        0.3,
        "stroke=\"#27ae60\" stroke-width=\"2\" fill=\"none\"",
    );
    svg
}

pub fn scene_svg(scene: &SceneSpec) -> String {
    scene_svg_canvas(scene).finish()
}

/// Candidate circles with marker numbers; the chosen one highlighted.
pub fn draw_candidates(svg: &mut SvgCanvas, set: &CandidateSet<Scalar>, chosen: Option<u32>) {
    for c in &set.circles {
        let style = if Some(c.marker) == chosen {
            "fill=\"none\" stroke=\"#c0392b\" stroke-width=\"3\""
        } else {
            "fill=\"none\" stroke=\"#2e86c1\" stroke-width=\"1.5\""
        };
        svg.circle(c.center, c.radius, style);
        svg.text(
            c.center + Point2::new(-0.03, -0.03),
            &c.marker.to_string(),
            "font-size=\"12\" fill=\"#17202a\"",
        );
    }
}
