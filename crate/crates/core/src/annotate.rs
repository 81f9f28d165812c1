//! Visual-prompt overlays: numbered candidate points on a view, and numbered
//! candidate paths on the four observation images.
//!
//! Rendering is integer-only with an embedded 5x7 bitmap font, so identical
//! inputs always give identical pixels.

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::affordance::CandidatePoint;
use crate::error::{Error, Result};
use crate::geometry::{PixelPoint, Pose2D, WorldPoint};
use crate::scene::SceneSpec;
use crate::lowplan::CandidateSet;

pub const POINT_RADIUS: i64 = 9;
const LINE_HALF_WIDTH: i64 = 1;
const WAYPOINT_RING: i64 = 12;

const PALETTE: [[u8; 3]; 12] = [
    [230, 25, 75],
    [60, 140, 60],
    [0, 90, 200],
    [245, 130, 48],
    [145, 30, 180],
    [0, 150, 150],
    [200, 40, 200],
    [110, 110, 0],
    [170, 60, 40],
    [0, 0, 128],
    [128, 0, 0],
    [70, 70, 70],
];

const WHITE: Rgb<u8> = Rgb([255, 255, 255]);

const DIGITS: [[u8; 7]; 10] = [
    [0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110],
    [0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110],
    [0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111],
    [0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110],
    [0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010],
    [0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110],
    [0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110],
    [0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000],
    [0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110],
    [0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100],
];

pub fn label_color(id: u32) -> Rgb<u8> {
    Rgb(PALETTE[(id.max(1) as usize - 1) % PALETTE.len()])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarkKind {
    Point,
    Path,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegendEntry {
    pub id: u32,
    pub anchor: PixelPoint,
    pub kind: MarkKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedImage {
    pub image: RgbImage,
    pub legend: Vec<LegendEntry>,
}

impl AnnotatedImage {
    pub fn plain(image: RgbImage) -> Self {
        AnnotatedImage {
            image,
            legend: Vec::new(),
        }
    }

    pub fn png_bytes(&self) -> Vec<u8> {
        encode_png(&self.image)
    }
}

pub fn encode_png(image: &RgbImage) -> Vec<u8> {
    let mut buf = std::io::Cursor::new(Vec::new());
    image
        .write_to(&mut buf, image::ImageFormat::Png)
        .expect("in-memory PNG encoding");
    buf.into_inner()
}

fn put(img: &mut RgbImage, x: i64, y: i64, c: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

fn disc(img: &mut RgbImage, cx: i64, cy: i64, r: i64, c: Rgb<u8>) {
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                put(img, cx + dx, cy + dy, c);
            }
        }
    }
}

fn ring(img: &mut RgbImage, cx: i64, cy: i64, r: i64, width: i64, c: Rgb<u8>) {
    let (outer, inner) = (r * r, (r - width) * (r - width));
    for dy in -r..=r {
        for dx in -r..=r {
            let d = dx * dx + dy * dy;
            if d <= outer && d > inner {
                put(img, cx + dx, cy + dy, c);
            }
        }
    }
}

fn text(img: &mut RgbImage, cx: i64, cy: i64, label: &str, c: Rgb<u8>) {
    let digits: Vec<usize> = label.bytes().map(|b| usize::from(b - b'0')).collect();
    let width = digits.len() as i64 * 6 - 1;
    let (x0, y0) = (cx - width / 2, cy - 3);
    for (k, d) in digits.iter().enumerate() {
        for (row, bits) in DIGITS[*d].iter().enumerate() {
            for col in 0..5 {
                if bits & (0b10000 >> col) != 0 {
                    put(img, x0 + k as i64 * 6 + col, y0 + row as i64, c);
                }
            }
        }
    }
}

fn label(img: &mut RgbImage, at: (i64, i64), id: u32) {
    disc(img, at.0, at.1, POINT_RADIUS, label_color(id));
    text(img, at.0, at.1, &id.to_string(), WHITE);
}

fn thick_line(img: &mut RgbImage, a: (i64, i64), b: (i64, i64), c: Rgb<u8>) {
    let steps = (b.0 - a.0).abs().max((b.1 - a.1).abs()).max(1);
    for s in 0..=steps {
        // integer interpolation, rounding to nearest
        let x = a.0 + ((b.0 - a.0) * s * 2 + steps).div_euclid(2 * steps);
        let y = a.1 + ((b.1 - a.1) * s * 2 + steps).div_euclid(2 * steps);
        disc(img, x, y, LINE_HALF_WIDTH, c);
    }
}

fn pixel(px: PixelPoint) -> (i64, i64) {
    (px.u.round() as i64, px.v.round() as i64)
}

/// Bottom-center pixel standing in for the agent's footpoint in a view.
pub fn view_anchor(width: u32, height: u32) -> PixelPoint {
    PixelPoint::new(f64::from(width / 2), f64::from(height.saturating_sub(1)))
}

/// Draws each candidate as a colored disc carrying its numeric label.
pub fn draw_points(view: &RgbImage, candidates: &[CandidatePoint]) -> AnnotatedImage {
    let mut image = view.clone();
    let mut legend = Vec::with_capacity(candidates.len());
    for c in candidates {
        label(&mut image, pixel(c.px), c.id);
        legend.push(LegendEntry {
            id: c.id,
            anchor: c.px,
            kind: MarkKind::Point,
        });
    }
    AnnotatedImage { image, legend }
}

/// Draws every candidate path of the step onto the view it belongs to,
/// rooted at the view anchor and labeled with its global id at the
/// terminal waypoint. `views` are in Front, Left, Back, Right order.
pub fn draw_paths(views: &[RgbImage; 4], paths: &CandidateSet) -> Result<[AnnotatedImage; 4]> {
    let mut out = views.clone().map(AnnotatedImage::plain);
    for entry in paths.entries() {
        let k = entry.path.view_dir.index();
        let img = &out[k].image;
        let (w, h) = (img.width(), img.height());
        let inside = |p: &PixelPoint| p.u >= 0.0 && p.v >= 0.0 && p.u < f64::from(w) && p.v < f64::from(h);
        if entry.pixels.is_empty() || !entry.pixels.iter().all(inside) {
            return Err(Error::ForeignPath {
                global_id: entry.global_id,
                view: entry.path.view_dir.to_string(),
            });
        }
    }
    for entry in paths.entries() {
        let view = &mut out[entry.path.view_dir.index()];
        let (w, h) = (view.image.width(), view.image.height());
        let color = label_color(entry.global_id);
        let mut prev = pixel(view_anchor(w, h));
        for p in &entry.pixels {
            let next = pixel(*p);
            thick_line(&mut view.image, prev, next, color);
            prev = next;
        }
        ring(&mut view.image, prev.0, prev.1, WAYPOINT_RING, 2, color);
    }
    for entry in paths.entries() {
        let view = &mut out[entry.path.view_dir.index()];
        let terminal = *entry.pixels.last().expect("checked non-empty");
        label(&mut view.image, pixel(terminal), entry.global_id);
        view.legend.push(LegendEntry {
            id: entry.global_id,
            anchor: terminal,
            kind: MarkKind::Path,
        });
    }
    Ok(out)
}

/// Bird's-eye raster of a scene with north up: walls, the agent trace, the
/// goal disc and the success-radius circle.
pub fn topdown_plot(scene: &SceneSpec, trace: &[Pose2D], goal: WorldPoint, success_radius: f64, px_per_m: f64) -> RgbImage {
    let s = px_per_m.max(1.0);
    let w = (scene.width_m() * s).ceil().max(1.0) as u32;
    let h = (scene.height_m() * s).ceil().max(1.0) as u32;
    let to_px = |x: f64, y: f64| ((x * s).floor() as i64, ((scene.height_m() - y) * s).floor() as i64);
    let mut img = RgbImage::from_fn(w, h, |u, v| {
        let x = (f64::from(u) + 0.5) / s;
        let y = scene.height_m() - (f64::from(v) + 0.5) / s;
        let (i, j) = scene.cell_of(x, y);
        if scene.is_wall(i, j) {
            Rgb([60, 60, 60])
        } else {
            Rgb([235, 235, 230])
        }
    });
    let (gx, gy) = to_px(goal.x, goal.y);
    let r = (success_radius * s).round() as i64;
    ring(&mut img, gx, gy, r, 2, Rgb([40, 160, 40]));
    disc(&mut img, gx, gy, (0.2 * s).round().max(2.0) as i64, Rgb([40, 160, 40]));
    let trace_color = Rgb([0, 90, 200]);
    for pair in trace.windows(2) {
        thick_line(&mut img, to_px(pair[0].x, pair[0].y), to_px(pair[1].x, pair[1].y), trace_color);
    }
    if let (Some(first), Some(last)) = (trace.first(), trace.last()) {
        let (sx, sy) = to_px(first.x, first.y);
        disc(&mut img, sx, sy, 4, Rgb([245, 130, 48]));
        let (ex, ey) = to_px(last.x, last.y);
        ring(&mut img, ex, ey, 5, 2, Rgb([230, 25, 75]));
    }
    img
}
