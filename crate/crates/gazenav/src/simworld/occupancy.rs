//! The assumed 2D occupancy map: primitive footprints rasterized over the
//! floor extent.

use serde::{Deserialize, Serialize};

use crate::simworld::scene::SceneSpec;
use crate::{Point2, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyMap {
    /// World coordinates of the minimum corner.
    pub origin: Point2,
    pub resolution: Scalar,
    pub width: usize,
    pub height: usize,
    occupied: Vec<bool>,
}

/// Rasterize the scene's primitive footprints. A cell is occupied when its
/// center lies within half a resolution of a footprint (with a tiny epsilon
/// so exactly-aligned box edges don't bleed into the neighbor row).
pub fn build_occupancy_map(scene: &SceneSpec, resolution: Scalar) -> OccupancyMap {
    assert!(resolution > 0.0);
    let span = scene.floor.span();
    let width = (span.x / resolution).round() as usize;
    let height = (span.y / resolution).round() as usize;
    let mut map = OccupancyMap {
        origin: scene.floor.min,
        resolution,
        width,
        height,
        occupied: vec![false; width * height],
    };
    let threshold = resolution * 0.5 - 1e-9;
    for iy in 0..height {
        for ix in 0..width {
            let c = map.cell_center(ix, iy);
            if scene.clearance(c) < threshold {
                map.occupied[iy * width + ix] = true;
            }
        }
    }
    map
}

impl OccupancyMap {
    pub fn cell_center(&self, ix: usize, iy: usize) -> Point2 {
        self.origin
            + Point2::new(
                (ix as Scalar + 0.5) * self.resolution,
                (iy as Scalar + 0.5) * self.resolution,
            )
    }

    /// Containing cell (floor convention); `None` outside the map.
    pub fn cell_of(&self, p: Point2) -> Option<(usize, usize)> {
        let rel = p - self.origin;
        let fx = (rel.x / self.resolution).floor();
        let fy = (rel.y / self.resolution).floor();
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (ix, iy) = (fx as usize, fy as usize);
        (ix < self.width && iy < self.height).then_some((ix, iy))
    }

    pub fn is_occupied(&self, ix: usize, iy: usize) -> bool {
        self.occupied[iy * self.width + ix]
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    pub fn occupied_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.height).flat_map(move |iy| {
            (0..self.width).filter_map(move |ix| self.is_occupied(ix, iy).then_some((ix, iy)))
        })
    }
}
