//! Benchmark geometries: a tensile dogbone, a plate with two diagonally
//! opposite edge notches and a plate with circular holes.
//!
//! All three are built from structured grids (optionally graded) that are
//! node-mapped or carved. Dimensions are plain configuration values.

use crate::error::{Error, Result};
use crate::mesh::{generate_grid, generate_rectangle, Mesh, Point};

/// Coordinates covering `[start, end]` with a uniform spacing not larger
/// than `h` inside each segment. Segment ends are always grid lines.
pub fn graded_axis(segments: &[(f64, f64, f64)]) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = Vec::new();
    for &(a, b, h) in segments {
        if !(b > a && h > 0.0) {
            return Err(Error::InvalidInput(format!(
                "bad axis segment ({a}, {b}, {h})"
            )));
        }
        if let Some(&last) = out.last() {
            if (last - a).abs() > 1e-12 * (1.0 + a.abs()) {
                return Err(Error::InvalidInput("axis segments must be contiguous".into()));
            }
            out.pop();
        }
        let n = ((b - a) / h - 1e-9).ceil().max(1.0) as usize;
        out.extend((0..=n).map(|i| a + (b - a) * i as f64 / n as f64));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct DogboneConfig {
    pub length: f64,
    pub height: f64,
    pub waist_height: f64,
    /// Half length of the constant-width centre section.
    pub flat_half_length: f64,
    /// Length of each smooth transition between waist and grip.
    pub taper_length: f64,
    pub nx: usize,
    /// Cell rows; keep even so the mesh is mirror symmetric about `y = 0`.
    pub ny: usize,
}

impl Default for DogboneConfig {
    fn default() -> Self {
        DogboneConfig {
            length: 1.0,
            height: 0.2,
            waist_height: 0.1,
            flat_half_length: 0.15,
            taper_length: 0.2,
            nx: 52,
            ny: 14,
        }
    }
}

impl DogboneConfig {
    /// Full height of the specimen at abscissa `x`.
    pub fn width_at(&self, x: f64) -> f64 {
        let d = (x - 0.5 * self.length).abs() - self.flat_half_length;
        let s = if d <= 0.0 {
            0.0
        } else if d >= self.taper_length {
            1.0
        } else {
            0.5 * (1.0 - (std::f64::consts::PI * d / self.taper_length).cos())
        };
        self.waist_height + (self.height - self.waist_height) * s
    }
}

/// Dogbone centred on `y = 0`, spanning `x` in `[0, length]`.
pub fn dogbone(cfg: &DogboneConfig) -> Result<Mesh> {
    let half = 0.5 * cfg.height;
    let xs: Vec<f64> = (0..=cfg.nx)
        .map(|i| cfg.length * i as f64 / cfg.nx as f64)
        .collect();
    let ys: Vec<f64> = (0..=cfg.ny)
        .map(|j| -half + cfg.height * j as f64 / cfg.ny as f64)
        .collect();
    let grid = generate_grid(&xs, &ys)?;
    grid.map_nodes(|[x, y]| [x, y * cfg.width_at(x) / cfg.height])
}

#[derive(Debug, Clone)]
pub struct NotchedPlateConfig {
    pub size: f64,
    pub notch_width: f64,
    pub notch_depth: f64,
    /// Abscissa of the left face of the notch cut from the top edge.
    pub top_notch_x: f64,
    /// Abscissa of the left face of the notch cut from the bottom edge.
    pub bottom_notch_x: f64,
    pub fine_h: f64,
    pub coarse_h: f64,
    /// Refined band `[lo, hi]` in both directions.
    pub band: (f64, f64),
}

impl Default for NotchedPlateConfig {
    fn default() -> Self {
        NotchedPlateConfig {
            size: 1.0,
            notch_width: 0.05,
            notch_depth: 0.3,
            top_notch_x: 0.30,
            bottom_notch_x: 0.65,
            fine_h: 0.05,
            coarse_h: 0.1,
            band: (0.2, 0.8),
        }
    }
}

/// Square plate with two rectangular notches at diagonally opposite edges,
/// meshed with a finer band through the ligament between the notch tips.
pub fn notched_plate(cfg: &NotchedPlateConfig) -> Result<Mesh> {
    let (lo, hi) = cfg.band;
    let axis = graded_axis(&[
        (0.0, lo, cfg.coarse_h),
        (lo, hi, cfg.fine_h),
        (hi, cfg.size, cfg.coarse_h),
    ])?;
    let grid = generate_grid(&axis, &axis)?;
    let c = cfg.clone();
    let in_top = move |p: Point| {
        p[0] > c.top_notch_x && p[0] < c.top_notch_x + c.notch_width && p[1] > c.size - c.notch_depth
    };
    let c = cfg.clone();
    let in_bottom = move |p: Point| {
        p[0] > c.bottom_notch_x && p[0] < c.bottom_notch_x + c.notch_width && p[1] < c.notch_depth
    };
    grid.carve(|p| !in_top(p) && !in_bottom(p))
}

#[derive(Debug, Clone)]
pub struct PlateWithHolesConfig {
    pub width: f64,
    pub height: f64,
    pub holes: Vec<(Point, f64)>,
    pub nx: usize,
    pub ny: usize,
}

impl Default for PlateWithHolesConfig {
    fn default() -> Self {
        PlateWithHolesConfig {
            width: 2.0,
            height: 1.0,
            holes: vec![
                ([0.5, 0.32], 0.14),
                ([0.85, 0.7], 0.14),
                ([1.2, 0.3], 0.14),
                ([1.55, 0.68], 0.14),
            ],
            nx: 24,
            ny: 12,
        }
    }
}

pub fn plate_with_holes(cfg: &PlateWithHolesConfig) -> Result<Mesh> {
    let grid = generate_rectangle(cfg.nx, cfg.ny, cfg.width, cfg.height)?;
    let holes = cfg.holes.clone();
    grid.carve(move |p| {
        holes
            .iter()
            .all(|(c, r)| (p[0] - c[0]).hypot(p[1] - c[1]) >= *r)
    })
}
