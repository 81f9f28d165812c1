//! Column raycaster producing RGB, planar depth, and ground-truth ground
//! masks.
//!
//! Every pixel `(u, v)` is sampled at exactly that sub-pixel position, so the
//! row `v = cy` is the horizon. For a fixed column the horizontal ray is the
//! same for all rows, and because all walls share one height and the camera
//! sits below it, a single DDA per column finds the only wall a pixel of that
//! column can ever see.

use image::{Rgb, RgbImage};

use super::{NavGrid, SceneSpec};
use crate::affordance::AffordanceMask;
use crate::error::Result;
use crate::geometry::{unproject, CameraIntrinsics, PixelPoint, Pose2D};

/// Planar depth in meters; `+inf` where the ray escapes.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl DepthImage {
    pub fn filled(width: u32, height: u32, value: f64) -> Self {
        DepthImage {
            width,
            height,
            data: vec![value; (width * height) as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, u: u32, v: u32) -> f64 {
        self.data[(v * self.width + u) as usize]
    }

    pub fn set(&mut self, u: u32, v: u32, d: f64) {
        self.data[(v * self.width + u) as usize] = d;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hit {
    Floor,
    /// `x_face` is true when the ray crossed a vertical (constant-x) cell face.
    Wall { x_face: bool },
    Sky,
}

/// Raw per-pixel raycast output for one view.
#[derive(Debug, Clone)]
pub struct ViewRaycast {
    pub hits: Vec<Hit>,
    pub depth: DepthImage,
}

impl ViewRaycast {
    pub fn hit(&self, u: u32, v: u32) -> Hit {
        self.hits[(v * self.depth.width + u) as usize]
    }
}

/// First wall entry along the horizontal ray `origin + t * dir`, with `t`
/// measured in units of `dir` (planar depth when `dir` has unit forward
/// component).
fn first_wall(scene: &SceneSpec, ox: f64, oy: f64, dx: f64, dy: f64) -> (f64, bool) {
    let cs = scene.cell_size;
    let (mut i, mut j) = scene.cell_of(ox, oy);
    let step_i: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_j: i64 = if dy > 0.0 { 1 } else { -1 };

    let axis_init = |o: f64, d: f64, idx: i64, step: i64| -> (f64, f64) {
        if d == 0.0 {
            return (f64::INFINITY, f64::INFINITY);
        }
        let boundary = if step > 0 { (idx + 1) as f64 * cs } else { idx as f64 * cs };
        ((boundary - o) / d, cs / d.abs())
    };
    let (mut t_max_x, t_delta_x) = axis_init(ox, dx, i, step_i);
    let (mut t_max_y, t_delta_y) = axis_init(oy, dy, j, step_j);

    let limit = scene.cols() + scene.rows() + 4;
    for _ in 0..limit {
        let (t, x_face) = if t_max_x < t_max_y {
            i += step_i;
            let t = t_max_x;
            t_max_x += t_delta_x;
            (t, true)
        } else {
            j += step_j;
            let t = t_max_y;
            t_max_y += t_delta_y;
            (t, false)
        };
        if scene.is_wall(i, j) {
            return (t, x_face);
        }
    }
    // Out-of-grid cells are walls, so the loop always terminates above.
    (f64::INFINITY, true)
}

/// Casts every pixel of a view.
pub fn raycast(
    scene: &SceneSpec,
    view_pose: Pose2D,
    intr: &CameraIntrinsics,
    cam_height: f64,
) -> Result<ViewRaycast> {
    scene.check_inside(view_pose.x, view_pose.y)?;
    let (w, h) = (intr.width, intr.height);
    let (fx, fy) = view_pose.forward();
    let (rx, ry) = view_pose.right();

    let columns: Vec<(f64, bool)> = (0..w)
        .map(|u| {
            let a = (f64::from(u) - intr.cx) / intr.fx;
            first_wall(scene, view_pose.x, view_pose.y, fx + a * rx, fy + a * ry)
        })
        .collect();

    let mut hits = vec![Hit::Sky; (w * h) as usize];
    let mut depth = DepthImage::filled(w, h, f64::INFINITY);
    for v in 0..h {
        // downward slope of the ray per unit planar depth
        let slope = (f64::from(v) - intr.cy) / intr.fy;
        let t_floor = if slope > 0.0 { cam_height / slope } else { f64::INFINITY };
        for u in 0..w {
            let (t_wall, x_face) = columns[u as usize];
            let idx = (v * w + u) as usize;
            if t_floor < t_wall {
                hits[idx] = Hit::Floor;
                depth.data[idx] = t_floor;
            } else if cam_height - slope * t_wall <= scene.wall_height {
                hits[idx] = Hit::Wall { x_face };
                depth.data[idx] = t_wall;
            }
        }
    }
    Ok(ViewRaycast { hits, depth })
}

fn shade(color: [u8; 3], factor: f64) -> Rgb<u8> {
    Rgb(color.map(|c| (f64::from(c) * factor).round().clamp(0.0, 255.0) as u8))
}

/// Flat class colors with distance attenuation; vertical and horizontal wall
/// faces get different brightness so corners stay legible.
pub fn render(
    scene: &SceneSpec,
    view_pose: Pose2D,
    intr: &CameraIntrinsics,
    cam_height: f64,
) -> Result<(RgbImage, DepthImage)> {
    let cast = raycast(scene, view_pose, intr, cam_height)?;
    let pal = scene.palette;
    let img = RgbImage::from_fn(intr.width, intr.height, |u, v| {
        let d = cast.depth.get(u, v);
        let atten = 1.0 / (1.0 + 0.08 * d);
        match cast.hit(u, v) {
            Hit::Floor => shade(pal.free, 0.35 + 0.65 * atten),
            Hit::Wall { x_face } => {
                shade(pal.wall, (0.3 + 0.7 * atten) * if x_face { 1.0 } else { 0.82 })
            }
            Hit::Sky => Rgb(pal.sky),
        }
    });
    Ok((img, cast.depth))
}

/// Pixels whose first hit is floor lying in a cell that stays navigable
/// after eroding free space by the agent radius.
pub fn ground_mask(
    scene: &SceneSpec,
    nav: &NavGrid,
    view_pose: Pose2D,
    intr: &CameraIntrinsics,
    cam_height: f64,
) -> Result<AffordanceMask> {
    let cast = raycast(scene, view_pose, intr, cam_height)?;
    Ok(mask_from_raycast(scene, nav, &cast, view_pose, intr, cam_height))
}

pub(crate) fn mask_from_raycast(
    scene: &SceneSpec,
    nav: &NavGrid,
    cast: &ViewRaycast,
    view_pose: Pose2D,
    intr: &CameraIntrinsics,
    cam_height: f64,
) -> AffordanceMask {
    AffordanceMask::from_fn(intr.width, intr.height, |u, v| {
        if cast.hit(u, v) != Hit::Floor {
            return false;
        }
        let px = PixelPoint::new(f64::from(u), f64::from(v));
        match unproject(intr, view_pose, cam_height, px, cast.depth.get(u, v)) {
            Ok(p) => {
                let (i, j) = scene.cell_of(p.x, p.y);
                nav.is_navigable(i, j)
            }
            Err(_) => false,
        }
    })
}
