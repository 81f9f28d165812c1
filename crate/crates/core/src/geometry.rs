//! Pinhole camera model and the pixel/world conversions used throughout the
//! pipeline.
//!
//! Frames:
//! - world: right-handed, `z` up, floor at `z = 0`, heading measured
//!   counter-clockwise from `+x`;
//! - camera: `+z` forward along the optical axis, `+x` right, `+y` down.
//!
//! At heading 0 the camera's right maps to world `-y`. Depth values are
//! *planar*: the distance along the optical axis, not the ray length.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let wrapped = a.rem_euclid(TAU);
    if wrapped > PI {
        wrapped - TAU
    } else {
        wrapped
    }
}

/// Pinhole intrinsics with square pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    /// Builds intrinsics from a horizontal field of view (radians) with the
    /// principal point at the exact image center.
    pub fn from_hfov(width: u32, height: u32, hfov: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidIntrinsics(format!(
                "image size {width}x{height} must be non-zero"
            )));
        }
        if !(hfov > 0.0 && hfov < PI) {
            return Err(Error::InvalidIntrinsics(format!(
                "hfov {hfov} rad must lie in (0, pi)"
            )));
        }
        let fx = f64::from(width) / (2.0 * (hfov / 2.0).tan());
        let intr = CameraIntrinsics {
            width,
            height,
            fx,
            fy: fx,
            cx: f64::from(width) / 2.0,
            cy: f64::from(height) / 2.0,
        };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<()> {
        let (w, h) = (f64::from(self.width), f64::from(self.height));
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidIntrinsics("focal lengths must be positive".into()));
        }
        if !(0.0..=w).contains(&self.cx) || !(0.0..=h).contains(&self.cy) {
            return Err(Error::InvalidIntrinsics(
                "principal point must lie inside the image".into(),
            ));
        }
        Ok(())
    }

    pub fn contains(&self, px: PixelPoint) -> bool {
        px.u >= 0.0 && px.v >= 0.0 && px.u < f64::from(self.width) && px.v < f64::from(self.height)
    }
}

/// Agent pose on the floor plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    /// Radians, CCW from world `+x`, kept in `(-pi, pi]`.
    pub heading: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose2D {
            x,
            y,
            heading: normalize_angle(heading),
        }
    }

    pub fn rotated(self, delta: f64) -> Self {
        Pose2D::new(self.x, self.y, self.heading + delta)
    }

    pub fn position(&self) -> WorldPoint {
        WorldPoint::floor(self.x, self.y)
    }

    pub fn distance_to(&self, other: &Pose2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Unit vector along the heading.
    pub fn forward(&self) -> (f64, f64) {
        (self.heading.cos(), self.heading.sin())
    }

    /// Unit vector pointing to the camera's right (clockwise of forward).
    pub fn right(&self) -> (f64, f64) {
        (self.heading.sin(), -self.heading.cos())
    }
}

/// One of the four non-overlapping observation directions, in the fixed
/// counter-clockwise order used everywhere in the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewDirection {
    Front,
    Left,
    Back,
    Right,
}

impl ViewDirection {
    pub const ALL: [ViewDirection; 4] = [
        ViewDirection::Front,
        ViewDirection::Left,
        ViewDirection::Back,
        ViewDirection::Right,
    ];

    pub fn yaw_offset(self) -> f64 {
        match self {
            ViewDirection::Front => 0.0,
            ViewDirection::Left => PI / 2.0,
            ViewDirection::Back => PI,
            ViewDirection::Right => -PI / 2.0,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ViewDirection::Front => "front",
            ViewDirection::Left => "left",
            ViewDirection::Back => "back",
            ViewDirection::Right => "right",
        }
    }
}

impl std::fmt::Display for ViewDirection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Image coordinates: `u` is the column (rightward), `v` the row (downward).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

impl PixelPoint {
    pub fn new(u: f64, v: f64) -> Self {
        PixelPoint { u, v }
    }

    pub fn distance_to(&self, other: &PixelPoint) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl WorldPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        WorldPoint { x, y, z }
    }

    pub fn floor(x: f64, y: f64) -> Self {
        WorldPoint { x, y, z: 0.0 }
    }

    pub fn planar_distance(&self, other: &WorldPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Pose of the camera looking in `dir` from an agent at `pose`.
pub fn view_pose(pose: Pose2D, dir: ViewDirection) -> Pose2D {
    pose.rotated(dir.yaw_offset())
}

/// Lifts a pixel with planar depth into the world frame.
pub fn unproject(
    intr: &CameraIntrinsics,
    view_pose: Pose2D,
    cam_height: f64,
    px: PixelPoint,
    planar_depth: f64,
) -> Result<WorldPoint> {
    if !(planar_depth > 0.0 && planar_depth.is_finite()) {
        return Err(Error::InvalidDepth(planar_depth));
    }
    let x_cam = (px.u - intr.cx) / intr.fx * planar_depth;
    let y_cam = (px.v - intr.cy) / intr.fy * planar_depth;
    let (fx, fy) = view_pose.forward();
    let (rx, ry) = view_pose.right();
    Ok(WorldPoint {
        x: view_pose.x + planar_depth * fx + x_cam * rx,
        y: view_pose.y + planar_depth * fy + x_cam * ry,
        z: cam_height - y_cam,
    })
}

/// Inverse of [`unproject`]. Returns `None` for points behind the camera or
/// outside the image.
pub fn project(
    intr: &CameraIntrinsics,
    view_pose: Pose2D,
    cam_height: f64,
    w: WorldPoint,
) -> Option<(PixelPoint, f64)> {
    let (dx, dy, dz) = (w.x - view_pose.x, w.y - view_pose.y, w.z - cam_height);
    let (fx, fy) = view_pose.forward();
    let (rx, ry) = view_pose.right();
    let z_cam = dx * fx + dy * fy;
    // negated so that NaN is rejected too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(z_cam > 0.0) {
        return None;
    }
    let x_cam = dx * rx + dy * ry;
    let y_cam = -dz;
    let px = PixelPoint {
        u: intr.cx + intr.fx * x_cam / z_cam,
        v: intr.cy + intr.fy * y_cam / z_cam,
    };
    intr.contains(px).then_some((px, z_cam))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn intr512() -> CameraIntrinsics {
        CameraIntrinsics::from_hfov(512, 512, PI / 2.0).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn hfov_90_gives_half_width_focal() {
        let intr = intr512();
        assert!(close(intr.fx, 256.0, 1e-9));
        assert_eq!((intr.cx, intr.cy), (256.0, 256.0));
    }

    #[test]
    fn view_pose_offsets() {
        let p = Pose2D::new(0.0, 0.0, 0.0);
        assert_eq!(view_pose(p, ViewDirection::Front), p);
        assert!(close(view_pose(p, ViewDirection::Left).heading, PI / 2.0, 1e-12));
        let q = view_pose(Pose2D::new(1.0, 2.0, 170f64.to_radians()), ViewDirection::Back);
        assert_eq!((q.x, q.y), (1.0, 2.0));
        assert!(close(q.heading, (-10f64).to_radians(), 1e-12));
    }

    #[test]
    fn heading_wraps_into_half_open_interval() {
        assert!(close(normalize_angle(PI), PI, 1e-15));
        assert!(close(normalize_angle(-PI), PI, 1e-15));
        assert!(close(normalize_angle(3.0 * PI / 2.0), -PI / 2.0, 1e-12));
    }

    #[test]
    fn unproject_examples() {
        let intr = intr512();
        let pose = Pose2D::new(0.0, 0.0, 0.0);
        let h = 1.25;
        let p = unproject(&intr, pose, h, PixelPoint::new(256.0, 256.0), 2.0).unwrap();
        assert!(close(p.x, 2.0, 1e-12) && close(p.y, 0.0, 1e-12) && close(p.z, 1.25, 1e-12));
        let p = unproject(&intr, pose, h, PixelPoint::new(256.0, 384.0), 2.5).unwrap();
        assert!(close(p.x, 2.5, 1e-12) && close(p.y, 0.0, 1e-12) && close(p.z, 0.0, 1e-12));
        let p = unproject(&intr, pose, h, PixelPoint::new(384.0, 384.0), 2.5).unwrap();
        assert!(close(p.x, 2.5, 1e-12) && close(p.y, -1.25, 1e-12) && close(p.z, 0.0, 1e-12));
        // re-projection recovers the floor pixels
        let (px, d) = project(&intr, pose, h, p).unwrap();
        assert!(close(px.u, 384.0, 1e-9) && close(px.v, 384.0, 1e-9) && close(d, 2.5, 1e-12));
    }

    #[test]
    fn unproject_rejects_bad_depth() {
        let intr = intr512();
        let pose = Pose2D::new(0.0, 0.0, 0.0);
        for d in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                unproject(&intr, pose, 1.25, PixelPoint::new(10.0, 10.0), d),
                Err(Error::InvalidDepth(_))
            ));
        }
    }

    #[test]
    fn project_frustum() {
        let intr = intr512();
        let pose = Pose2D::new(0.0, 0.0, 0.0);
        let (px, d) = project(&intr, pose, 1.25, WorldPoint::new(2.0, 0.0, 1.25)).unwrap();
        assert_eq!((px.u, px.v, d), (256.0, 256.0, 2.0));
        assert!(project(&intr, pose, 1.25, WorldPoint::new(-1.0, 0.0, 0.0)).is_none());
        // in front but far outside the 90 degree frustum
        assert!(project(&intr, pose, 1.25, WorldPoint::new(1.0, 5.0, 0.0)).is_none());
    }

    #[test]
    fn four_quarter_turns_restore_heading() {
        let p = Pose2D::new(0.3, -0.2, 0.7);
        let mut q = p;
        for _ in 0..4 {
            q = view_pose(q, ViewDirection::Left);
        }
        assert!(close(normalize_angle(q.heading - p.heading), 0.0, 1e-12));
    }

    proptest! {
        #[test]
        fn round_trip(u in 0.0f64..511.99, v in 0.0f64..511.99, d in 0.05f64..50.0,
                      x in -10.0f64..10.0, y in -10.0f64..10.0, h in -PI..PI) {
            let intr = intr512();
            let pose = Pose2D::new(x, y, h);
            let w = unproject(&intr, pose, 1.25, PixelPoint::new(u, v), d).unwrap();
            let (px, d2) = project(&intr, pose, 1.25, w).unwrap();
            prop_assert!((px.u - u).abs() < 1e-6 && (px.v - v).abs() < 1e-6);
            prop_assert!((d2 - d).abs() < 1e-9);
        }
    }
}
