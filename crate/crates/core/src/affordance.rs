//! Navigational affordances: ground masks, their union, and the labeled
//! candidate points scattered inside them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{unproject, CameraIntrinsics, PixelPoint, Pose2D, ViewDirection, WorldPoint};
use crate::scene::{DepthImage, NavGrid, SceneSpec};

/// Per-pixel navigable-ground flags for one view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffordanceMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl AffordanceMask {
    pub fn empty(width: u32, height: u32) -> Self {
        AffordanceMask {
            width,
            height,
            bits: vec![false; (width * height) as usize],
        }
    }

    pub fn full(width: u32, height: u32) -> Self {
        AffordanceMask {
            width,
            height,
            bits: vec![true; (width * height) as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut mask = Self::empty(width, height);
        for v in 0..height {
            for u in 0..width {
                mask.bits[(v * width + u) as usize] = f(u, v);
            }
        }
        mask
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, u: u32, v: u32) -> bool {
        u < self.width && v < self.height && self.bits[(v * self.width + u) as usize]
    }

    /// Signed lookup; anything outside the image is not ground.
    pub fn get_i(&self, u: i64, v: i64) -> bool {
        u >= 0 && v >= 0 && self.get(u as u32, v as u32)
    }

    /// Lookup at the pixel nearest to a sub-pixel position.
    pub fn get_px(&self, px: PixelPoint) -> bool {
        self.get_i(px.u.round() as i64, px.v.round() as i64)
    }

    pub fn set(&mut self, u: u32, v: u32, value: bool) {
        let idx = (v * self.width + u) as usize;
        self.bits[idx] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_subset_of(&self, other: &AffordanceMask) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }

    fn check_dims(&self, width: u32, height: u32) -> Result<()> {
        if self.width != width || self.height != height {
            return Err(Error::DimensionMismatch {
                want_w: width,
                want_h: height,
                got_w: self.width,
                got_h: self.height,
            });
        }
        Ok(())
    }

    /// Clears every pixel whose depth is not finite.
    pub fn sanitize_with_depth(&mut self, depth: &DepthImage) -> Result<()> {
        self.check_dims(depth.width(), depth.height())?;
        for v in 0..self.height {
            for u in 0..self.width {
                if !depth.get(u, v).is_finite() {
                    self.set(u, v, false);
                }
            }
        }
        Ok(())
    }

    /// 8-bit grayscale: 255 = ground, 0 = not ground.
    pub fn to_gray(&self) -> image::GrayImage {
        image::GrayImage::from_fn(self.width, self.height, |u, v| {
            image::Luma([if self.get(u, v) { 255 } else { 0 }])
        })
    }

    pub fn from_gray(img: &image::GrayImage) -> Self {
        Self::from_fn(img.width(), img.height(), |u, v| img.get_pixel(u, v).0[0] >= 128)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_gray().save(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::from_gray(&img.to_luma8()))
    }
}

/// Pixel-wise union of `masks`; an empty list yields an all-zero mask of the
/// given size.
pub fn merge_masks(width: u32, height: u32, masks: &[AffordanceMask]) -> Result<AffordanceMask> {
    let mut out = AffordanceMask::empty(width, height);
    for m in masks {
        m.check_dims(width, height)?;
        for (o, b) in out.bits.iter_mut().zip(&m.bits) {
            *o |= *b;
        }
    }
    Ok(out)
}

/// A labeled point inside a view's affordance mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePoint {
    /// 1-based label, unique within the view.
    pub id: u32,
    pub px: PixelPoint,
    pub world: WorldPoint,
    pub view_dir: ViewDirection,
    pub depth: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    pub stride_px: f64,
    pub margin_px: u32,
    pub max_points: usize,
    pub min_clearance_px: u32,
    pub max_range_m: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            stride_px: 56.0,
            margin_px: 24,
            max_points: 30,
            min_clearance_px: 6,
            max_range_m: 8.0,
        }
    }
}

/// Everything needed to lift a view's pixels into the world.
#[derive(Debug, Clone, Copy)]
pub struct ViewGeometry<'a> {
    pub intr: &'a CameraIntrinsics,
    pub view_pose: Pose2D,
    pub cam_height: f64,
    pub dir: ViewDirection,
}

fn clearance_offsets(radius: u32) -> Vec<(i64, i64)> {
    let r = i64::from(radius);
    let mut offsets = Vec::new();
    for dv in -r..=r {
        for du in -r..=r {
            if du * du + dv * dv <= r * r {
                offsets.push((du, dv));
            }
        }
    }
    offsets
}

fn grid_positions(margin: u32, stride: f64, extent: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut i = 0u32;
    loop {
        let p = (f64::from(margin) + f64::from(i) * stride).floor();
        if p >= f64::from(extent) {
            break;
        }
        out.push(p as u32);
        i += 1;
    }
    out
}

/// Scatters a regular grid over the mask and keeps the points with enough
/// ground around them and a finite, in-range depth. The stride grows by 1.5x
/// until at most `max_points` survive. Survivors are labeled 1..n in
/// row-major order.
pub fn sample_candidates(
    mask: &AffordanceMask,
    depth: &DepthImage,
    geom: ViewGeometry<'_>,
    cfg: &SamplingConfig,
) -> Result<Vec<CandidatePoint>> {
    mask.check_dims(depth.width(), depth.height())?;
    let offsets = clearance_offsets(cfg.min_clearance_px);
    let mut stride = cfg.stride_px.max(1.0);
    loop {
        let mut kept = Vec::new();
        for v in grid_positions(cfg.margin_px, stride, mask.height()) {
            for u in grid_positions(cfg.margin_px, stride, mask.width()) {
                let clear = offsets
                    .iter()
                    .all(|(du, dv)| mask.get_i(i64::from(u) + du, i64::from(v) + dv));
                let d = depth.get(u, v);
                if clear && d.is_finite() && d > 0.0 && d <= cfg.max_range_m {
                    kept.push((u, v, d));
                }
            }
        }
        if kept.len() > cfg.max_points && kept.len() > 1 {
            stride *= 1.5;
            continue;
        }
        return kept
            .into_iter()
            .enumerate()
            .map(|(i, (u, v, d))| {
                let px = PixelPoint::new(f64::from(u), f64::from(v));
                Ok(CandidatePoint {
                    id: i as u32 + 1,
                    px,
                    world: unproject(geom.intr, geom.view_pose, geom.cam_height, px, d)?,
                    view_dir: geom.dir,
                    depth: d,
                })
            })
            .collect();
    }
}

/// Identifies one view of one decision step, used for file naming.
#[derive(Debug, Clone, Copy)]
pub struct ViewKey<'a> {
    pub episode: &'a str,
    pub step: usize,
    pub dir: ViewDirection,
}

impl ViewKey<'_> {
    pub fn stem(&self) -> String {
        format!("{}_{}_{}", self.episode, self.step, self.dir.name())
    }

    pub fn mask_file_name(&self) -> String {
        format!("{}.mask.png", self.stem())
    }

    pub fn view_file_name(&self) -> String {
        format!("{}.png", self.stem())
    }
}

/// Inputs available to an affordance source for a single view.
pub struct ViewRequest<'a> {
    pub key: ViewKey<'a>,
    pub scene: &'a SceneSpec,
    pub nav: &'a NavGrid,
    pub geom: ViewGeometry<'a>,
    pub depth: &'a DepthImage,
}

/// Where ground masks come from.
pub trait AffordanceProvider: Send + Sync {
    fn mask(&self, req: &ViewRequest<'_>) -> Result<AffordanceMask>;
}

/// Ground truth masks computed from scene geometry.
#[derive(Debug, Default, Clone, Copy)]
pub struct OracleAffordance;

impl AffordanceProvider for OracleAffordance {
    fn mask(&self, req: &ViewRequest<'_>) -> Result<AffordanceMask> {
        crate::scene::ground_mask(
            req.scene,
            req.nav,
            req.geom.view_pose,
            req.geom.intr,
            req.geom.cam_height,
        )
    }
}

/// Masks read from PNG files written by an external segmenter.
#[derive(Debug, Clone)]
pub struct FileAffordance {
    pub dir: PathBuf,
}

impl FileAffordance {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FileAffordance { dir: dir.into() }
    }
}

impl AffordanceProvider for FileAffordance {
    fn mask(&self, req: &ViewRequest<'_>) -> Result<AffordanceMask> {
        let path = self.dir.join(req.key.mask_file_name());
        let mut mask = AffordanceMask::load_png(&path)?;
        mask.check_dims(req.geom.intr.width, req.geom.intr.height)?;
        mask.sanitize_with_depth(req.depth)?;
        Ok(mask)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AffordanceSource {
    Oracle,
    File,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn geom(intr: &CameraIntrinsics) -> ViewGeometry<'_> {
        ViewGeometry {
            intr,
            view_pose: Pose2D::new(0.0, 0.0, 0.0),
            cam_height: 1.25,
            dir: ViewDirection::Front,
        }
    }

    #[test]
    fn merge_identity_disjoint_absorption() {
        let m = AffordanceMask::from_fn(8, 8, |u, v| u < v);
        assert_eq!(merge_masks(8, 8, std::slice::from_ref(&m)).unwrap(), m);

        let a = AffordanceMask::from_fn(8, 8, |u, _| u < 3);
        let b = AffordanceMask::from_fn(8, 8, |u, _| u > 5);
        let out = merge_masks(8, 8, &[a.clone(), b.clone()]).unwrap();
        assert_eq!(out.count(), a.count() + b.count());

        let small = AffordanceMask::from_fn(8, 8, |u, v| u < 2 && v < 2);
        let big = AffordanceMask::from_fn(8, 8, |u, _| u < 4);
        assert_eq!(merge_masks(8, 8, &[small, big.clone()]).unwrap(), big);

        assert_eq!(merge_masks(8, 8, &[]).unwrap().count(), 0);
    }

    #[test]
    fn merge_rejects_mismatched_sizes() {
        let a = AffordanceMask::empty(8, 8);
        let b = AffordanceMask::empty(8, 9);
        assert!(matches!(
            merge_masks(8, 8, &[a, b]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn full_mask_grid_enumeration() {
        let intr = CameraIntrinsics::from_hfov(512, 512, PI / 2.0).unwrap();
        let mask = AffordanceMask::full(512, 512);
        let depth = DepthImage::filled(512, 512, 2.0);
        let cfg = SamplingConfig {
            stride_px: 128.0,
            margin_px: 64,
            max_points: 30,
            min_clearance_px: 0,
            max_range_m: 8.0,
        };
        let pts = sample_candidates(&mask, &depth, geom(&intr), &cfg).unwrap();
        assert_eq!(pts.len(), 16);
        let coords = [64.0, 192.0, 320.0, 448.0];
        for (i, p) in pts.iter().enumerate() {
            assert_eq!(p.id, i as u32 + 1);
            assert_eq!(p.px.v, coords[i / 4]);
            assert_eq!(p.px.u, coords[i % 4]);
        }
    }

    #[test]
    fn empty_mask_gives_no_candidates() {
        let intr = CameraIntrinsics::from_hfov(64, 64, PI / 2.0).unwrap();
        let pts = sample_candidates(
            &AffordanceMask::empty(64, 64),
            &DepthImage::filled(64, 64, 2.0),
            geom(&intr),
            &SamplingConfig::default(),
        )
        .unwrap();
        assert!(pts.is_empty());
    }

    #[test]
    fn overfull_grid_widens_stride() {
        let intr = CameraIntrinsics::from_hfov(512, 512, PI / 2.0).unwrap();
        let cfg = SamplingConfig {
            max_points: 10,
            min_clearance_px: 0,
            ..SamplingConfig::default()
        };
        let pts = sample_candidates(
            &AffordanceMask::full(512, 512),
            &DepthImage::filled(512, 512, 2.0),
            geom(&intr),
            &cfg,
        )
        .unwrap();
        assert!(pts.len() <= 10 && !pts.is_empty());
    }

    #[test]
    fn clearance_and_range_filters() {
        let intr = CameraIntrinsics::from_hfov(128, 128, PI / 2.0).unwrap();
        let cfg = SamplingConfig {
            stride_px: 32.0,
            margin_px: 16,
            max_points: 100,
            min_clearance_px: 4,
            max_range_m: 5.0,
        };
        // a 1-pixel-wide hole right next to (48, 48) knocks that point out
        let mut mask = AffordanceMask::full(128, 128);
        mask.set(50, 48, false);
        let mut depth = DepthImage::filled(128, 128, 2.0);
        depth.set(80, 16, 9.0);
        depth.set(112, 16, f64::INFINITY);
        let pts = sample_candidates(&mask, &depth, geom(&intr), &cfg).unwrap();
        let has = |u: f64, v: f64| pts.iter().any(|p| p.px.u == u && p.px.v == v);
        assert!(!has(48.0, 48.0));
        assert!(!has(80.0, 16.0));
        assert!(!has(112.0, 16.0));
        assert!(has(16.0, 16.0));
        assert_eq!(pts.len(), 13);
    }

    #[test]
    fn sanitize_clears_infinite_depth() {
        let mut mask = AffordanceMask::full(4, 4);
        let mut depth = DepthImage::filled(4, 4, 1.0);
        depth.set(1, 2, f64::INFINITY);
        mask.sanitize_with_depth(&depth).unwrap();
        assert!(!mask.get(1, 2));
        assert_eq!(mask.count(), 15);
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.mask.png");
        let m = AffordanceMask::from_fn(16, 9, |u, v| (u + v) % 3 == 0);
        m.save_png(&path).unwrap();
        assert_eq!(AffordanceMask::load_png(&path).unwrap(), m);
    }

    #[test]
    fn mask_file_naming() {
        let key = ViewKey {
            episode: "ep3",
            step: 2,
            dir: ViewDirection::Left,
        };
        assert_eq!(key.mask_file_name(), "ep3_2_left.mask.png");
    }
}
