//! Discrete agent motion with disk-vs-cell collision and sliding.

use serde::{Deserialize, Serialize};

use super::SceneSpec;
use crate::control::Action;
use crate::geometry::Pose2D;

pub const FORWARD_STEP_M: f64 = 0.25;
pub const ROTATION_STEP_RAD: f64 = std::f64::consts::PI / 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentBody {
    pub radius: f64,
    pub sliding: bool,
}

impl Default for AgentBody {
    fn default() -> Self {
        AgentBody {
            radius: 0.10,
            sliding: true,
        }
    }
}

const CONTACT_EPS: f64 = 1e-9;

/// Farthest position along one axis a disk can travel before touching a
/// wall cell. `along` is the moving coordinate, `across` the fixed one.
fn sweep_axis(
    scene: &SceneSpec,
    along: f64,
    across: f64,
    delta: f64,
    radius: f64,
    x_axis: bool,
) -> f64 {
    if delta == 0.0 {
        return along;
    }
    let cs = scene.cell_size;
    let target = along + delta;
    let lo = ((along.min(target) - radius) / cs).floor() as i64;
    let hi = ((along.max(target) + radius) / cs).floor() as i64;
    let band_lo = ((across - radius) / cs).floor() as i64;
    let band_hi = ((across + radius) / cs).floor() as i64;
    let mut limit = target;
    for a in lo..=hi {
        for b in band_lo..=band_hi {
            let wall = if x_axis { scene.is_wall(a, b) } else { scene.is_wall(b, a) };
            if !wall {
                continue;
            }
            let (b0, b1) = (b as f64 * cs, (b + 1) as f64 * cs);
            let gap = (b0 - across).max(across - b1).max(0.0);
            // a wall merely touched from the side does not block motion along it
            if gap >= radius - CONTACT_EPS {
                continue;
            }
            let half_chord = (radius * radius - gap * gap).sqrt();
            let (a0, a1) = (a as f64 * cs, (a + 1) as f64 * cs);
            if delta > 0.0 {
                let stop = a0 - half_chord;
                if stop >= along - CONTACT_EPS {
                    limit = limit.min(stop);
                }
            } else {
                let stop = a1 + half_chord;
                if stop <= along + CONTACT_EPS {
                    limit = limit.max(stop);
                }
            }
        }
    }
    if delta > 0.0 {
        limit.max(along)
    } else {
        limit.min(along)
    }
}

/// Applies one low-level action. Rotations are exact 15 degree turns.
/// Forward attempts 0.25 m; on contact, the blocked axis-aligned component
/// is cancelled and the tangential one still applied (when sliding is on).
/// `Stop` leaves the pose unchanged.
pub fn step(scene: &SceneSpec, pose: Pose2D, action: Action, body: AgentBody) -> (Pose2D, bool) {
    match action {
        Action::RotateLeft => (pose.rotated(ROTATION_STEP_RAD), false),
        Action::RotateRight => (pose.rotated(-ROTATION_STEP_RAD), false),
        Action::Stop => (pose, false),
        Action::Forward => {
            let (fx, fy) = pose.forward();
            let (dx, dy) = (FORWARD_STEP_M * fx, FORWARD_STEP_M * fy);
            let r = body.radius;
            let nx = sweep_axis(scene, pose.x, pose.y, dx, r, true);
            let blocked_x = nx != pose.x + dx;
            if blocked_x && !body.sliding {
                // without sliding, contact stops the whole move
                let ny = pose.y;
                return (Pose2D { x: nx, y: ny, ..pose }, true);
            }
            let ny = sweep_axis(scene, pose.y, nx, dy, r, false);
            let blocked_y = ny != pose.y + dy;
            let (nx, ny) = if blocked_y && !body.sliding { (pose.x, pose.y) } else { (nx, ny) };
            (Pose2D { x: nx, y: ny, ..pose }, blocked_x || blocked_y)
        }
    }
}

/// Clearance between a disk center and the nearest wall cell.
pub fn clearance(scene: &SceneSpec, x: f64, y: f64, search: f64) -> f64 {
    let cs = scene.cell_size;
    let (ci, cj) = scene.cell_of(x, y);
    let reach = (search / cs).ceil() as i64 + 1;
    let mut best = f64::INFINITY;
    for j in cj - reach..=cj + reach {
        for i in ci - reach..=ci + reach {
            if !scene.is_wall(i, j) {
                continue;
            }
            let (x0, y0) = (i as f64 * cs, j as f64 * cs);
            let gx = (x0 - x).max(x - (x0 + cs)).max(0.0);
            let gy = (y0 - y).max(y - (y0 + cs)).max(0.0);
            best = best.min(gx.hypot(gy));
        }
    }
    best
}
