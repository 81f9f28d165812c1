//! Seeded multi-room layouts and episodes over them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AgentBody, Cell, NavGrid, SceneSpec};
use crate::error::{Error, Result};
use crate::geometry::Pose2D;
use crate::runner::Episode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub rooms: usize,
    pub size_m: f64,
    pub obstacle_density: f64,
    pub cell_size: f64,
    pub wall_height: f64,
    pub door_width_m: f64,
    pub min_room_m: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            rooms: 4,
            size_m: 10.0,
            obstacle_density: 0.03,
            cell_size: 0.1,
            wall_height: 2.5,
            door_width_m: 1.0,
            min_room_m: 2.4,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Room {
    i0: usize,
    j0: usize,
    i1: usize,
    j1: usize,
}

impl Room {
    fn w(&self) -> usize {
        self.i1 - self.i0 + 1
    }
    fn h(&self) -> usize {
        self.j1 - self.j0 + 1
    }
}

/// A door cut into a wall line: `vertical` walls have constant `i = line`.
#[derive(Debug, Clone, Copy)]
struct Door {
    vertical: bool,
    line: usize,
    from: usize,
    to: usize,
}

fn blocks_door(doors: &[Door], vertical_wall: bool, at: usize, ends: [usize; 2], pad: usize) -> bool {
    // a new wall at `at` meets perpendicular walls at its two `ends`
    doors.iter().any(|d| {
        d.vertical != vertical_wall
            && ends.contains(&d.line)
            && at + pad >= d.from
            && at <= d.to + pad
    })
}

/// Number of navigable cells reachable from the first navigable cell, and
/// the total navigable count.
fn connectivity(scene: &SceneSpec, body: AgentBody) -> (usize, usize) {
    let nav = NavGrid::new(scene, body);
    let cells: Vec<_> = nav.navigable_cells().collect();
    let Some(&start) = cells.first() else {
        return (0, 0);
    };
    let (cols, rows) = (scene.cols(), scene.rows());
    let mut seen = vec![false; cols * rows];
    let mut stack = vec![start];
    seen[start.1 as usize * cols + start.0 as usize] = true;
    let mut reached = 0;
    while let Some((i, j)) = stack.pop() {
        reached += 1;
        for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let (ni, nj) = (i + di, j + dj);
            if nav.is_navigable(ni, nj) {
                let k = nj as usize * cols + ni as usize;
                if !seen[k] {
                    seen[k] = true;
                    stack.push((ni, nj));
                }
            }
        }
    }
    (reached, cells.len())
}

/// Binary-partitions a square floor into rooms joined by doorways, then
/// drops box obstacles that keep the eroded free space connected.
pub fn generate_scene(id: impl Into<String>, cfg: &GeneratorConfig, seed: u64) -> Result<SceneSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cs = cfg.cell_size;
    let n = (cfg.size_m / cs).round() as usize;
    let min_room = (cfg.min_room_m / cs).round() as usize;
    let door = ((cfg.door_width_m / cs).round() as usize).max(1);
    if n < min_room + 2 {
        return Err(Error::InvalidScene(format!("size {} m is too small", cfg.size_m)));
    }
    let mut scene = SceneSpec::new(id, cs, cfg.wall_height, n, n, vec![Cell::Free; n * n])?;
    scene.fill_rect(0, 0, n - 1, 0, Cell::Wall);
    scene.fill_rect(0, n - 1, n - 1, n - 1, Cell::Wall);
    scene.fill_rect(0, 0, 0, n - 1, Cell::Wall);
    scene.fill_rect(n - 1, 0, n - 1, n - 1, Cell::Wall);

    let mut rooms = vec![Room {
        i0: 1,
        j0: 1,
        i1: n - 2,
        j1: n - 2,
    }];
    let mut doors: Vec<Door> = Vec::new();
    while rooms.len() < cfg.rooms.max(1) {
        let mut order: Vec<usize> = (0..rooms.len()).collect();
        order.sort_by_key(|&k| std::cmp::Reverse(rooms[k].w() * rooms[k].h()));
        let mut split_done = false;
        for k in order {
            let room = rooms[k];
            let vertical = room.w() >= room.h();
            let span = if vertical { room.w() } else { room.h() };
            let across = if vertical { room.h() } else { room.w() };
            if span < 2 * min_room + 1 || across < door + 4 {
                continue;
            }
            let lo = if vertical { room.i0 } else { room.j0 } + min_room;
            let hi = if vertical { room.i1 } else { room.j1 } - min_room;
            let ends = if vertical {
                [room.j0 - 1, room.j1 + 1]
            } else {
                [room.i0 - 1, room.i1 + 1]
            };
            let Some(at) = (0..64)
                .map(|_| rng.random_range(lo..=hi))
                .find(|&at| !blocks_door(&doors, vertical, at, ends, 3))
            else {
                continue;
            };
            let (a0, a1) = if vertical { (room.j0, room.j1) } else { (room.i0, room.i1) };
            let door_from = rng.random_range(a0 + 2..=a1 - 1 - door);
            let door_to = door_from + door - 1;
            for a in a0..=a1 {
                if (door_from..=door_to).contains(&a) {
                    continue;
                }
                if vertical {
                    scene.set_cell(at, a, Cell::Wall);
                } else {
                    scene.set_cell(a, at, Cell::Wall);
                }
            }
            doors.push(Door {
                vertical,
                line: at,
                from: door_from,
                to: door_to,
            });
            let (first, second) = if vertical {
                (Room { i1: at - 1, ..room }, Room { i0: at + 1, ..room })
            } else {
                (Room { j1: at - 1, ..room }, Room { j0: at + 1, ..room })
            };
            rooms[k] = first;
            rooms.push(second);
            split_done = true;
            break;
        }
        if !split_done {
            break;
        }
    }

    let body = AgentBody::default();
    let free_cells = rooms.iter().map(|r| r.w() * r.h()).sum::<usize>();
    let target = (cfg.obstacle_density.clamp(0.0, 0.5) * free_cells as f64) as usize;
    let mut placed = 0;
    let door_clear = (0.8 / cs).round() as usize + door / 2;
    for _ in 0..400 {
        if placed >= target {
            break;
        }
        let room = rooms[rng.random_range(0..rooms.len())];
        let bw = rng.random_range(3..=8usize).min(room.w().saturating_sub(10));
        let bh = rng.random_range(3..=8usize).min(room.h().saturating_sub(10));
        if bw < 3 || bh < 3 {
            continue;
        }
        let i0 = rng.random_range(room.i0 + 2..=room.i1 - 1 - bw);
        let j0 = rng.random_range(room.j0 + 2..=room.j1 - 1 - bh);
        let (ci, cj) = (i0 + bw / 2, j0 + bh / 2);
        let near_door = doors.iter().any(|d| {
            let mid = (d.from + d.to) / 2;
            let (di, dj) = if d.vertical { (d.line, mid) } else { (mid, d.line) };
            ci.abs_diff(di) <= door_clear + bw / 2 && cj.abs_diff(dj) <= door_clear + bh / 2
        });
        if near_door {
            continue;
        }
        let before = scene.clone();
        scene.fill_rect(i0, j0, i0 + bw - 1, j0 + bh - 1, Cell::Wall);
        let (reached, total) = connectivity(&scene, body);
        if reached != total || total == 0 {
            scene = before;
            continue;
        }
        placed += bw * bh;
    }
    Ok(scene)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeGenConfig {
    pub count: usize,
    pub min_geodesic_m: f64,
    pub max_geodesic_m: f64,
}

impl Default for EpisodeGenConfig {
    fn default() -> Self {
        EpisodeGenConfig {
            count: 3,
            min_geodesic_m: 4.0,
            max_geodesic_m: 10.0,
        }
    }
}

fn compass(dx: f64, dy: f64) -> &'static str {
    const NAMES: [&str; 8] = [
        "east",
        "northeast",
        "north",
        "northwest",
        "west",
        "southwest",
        "south",
        "southeast",
    ];
    let a = dy.atan2(dx).rem_euclid(std::f64::consts::TAU);
    NAMES[((a / (std::f64::consts::TAU / 8.0)).round() as usize) % 8]
}

/// Samples start/goal pairs whose geodesic separation lies in the
/// configured range.
pub fn generate_episodes(
    scene: &SceneSpec,
    body: AgentBody,
    cfg: &EpisodeGenConfig,
    seed: u64,
) -> Result<Vec<Episode>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nav = NavGrid::new(scene, body);
    let cells: Vec<(i64, i64)> = nav.navigable_cells().collect();
    if cells.is_empty() {
        return Err(Error::InvalidScene(format!("scene {} has no navigable cells", scene.id)));
    }
    let mut out = Vec::with_capacity(cfg.count);
    let mut attempts = 0;
    while out.len() < cfg.count {
        attempts += 1;
        if attempts > 200 * cfg.count.max(1) {
            return Err(Error::InvalidScene(format!(
                "could not place {} episodes in scene {}",
                cfg.count, scene.id
            )));
        }
        let goal = cells[rng.random_range(0..cells.len())];
        let (gx, gy) = nav.cell_center(goal.0, goal.1);
        let field = nav.distance_field(gx, gy)?;
        // a few start draws per goal keeps the Dijkstra cost down
        for _ in 0..16 {
            let start = cells[rng.random_range(0..cells.len())];
            let (sx, sy) = nav.cell_center(start.0, start.1);
            let Some(d) = field.distance_from(sx, sy)? else {
                continue;
            };
            if d < cfg.min_geodesic_m || d > cfg.max_geodesic_m {
                continue;
            }
            let heading = f64::from(rng.random_range(-11..=12i32)) * 15f64.to_radians();
            let instruction = format!(
                "Walk about {:.0} meters towards the {} of the floor, finding your way through the doorways, and stop at the goal.",
                d,
                compass(gx - sx, gy - sy)
            );
            out.push(Episode {
                id: format!("{}_ep{}", scene.id, out.len()),
                scene_id: scene.id.clone(),
                start: Pose2D::new(sx, sy, heading),
                goal: [gx, gy],
                instruction,
                gt_shortest: d,
            });
            break;
        }
    }
    Ok(out)
}

/// `count` scenes named `scene_000`, `scene_001`, ... with
/// `ecfg.count` episodes each, all derived from one seed.
pub fn generate_suite(
    seed: u64,
    count: usize,
    gcfg: &GeneratorConfig,
    ecfg: &EpisodeGenConfig,
    body: AgentBody,
) -> Result<(Vec<SceneSpec>, Vec<Episode>)> {
    let mut scenes = Vec::with_capacity(count);
    let mut episodes = Vec::new();
    for k in 0..count {
        let scene_seed = seed.wrapping_mul(1_000_003).wrapping_add(k as u64);
        let scene = generate_scene(format!("scene_{k:03}"), gcfg, scene_seed)?;
        episodes.extend(generate_episodes(&scene, body, ecfg, scene_seed ^ 0x5eed)?);
        scenes.push(scene);
    }
    Ok((scenes, episodes))
}
