//! Eroded free space and geodesic distances over it.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{AgentBody, SceneSpec};
use crate::error::{Error, Result};

/// Endpoints farther than this from any navigable cell center cannot be snapped.
pub const SNAP_RADIUS_M: f64 = 0.5;

/// 16-neighbourhood: orthogonal, diagonal and knight moves. Each move lists
/// the intermediate cells its straight segment crosses.
type Move = ((i64, i64), &'static [(i64, i64)]);

const MOVES: [Move; 16] = [
    ((1, 0), &[]),
    ((-1, 0), &[]),
    ((0, 1), &[]),
    ((0, -1), &[]),
    ((1, 1), &[(1, 0), (0, 1)]),
    ((1, -1), &[(1, 0), (0, -1)]),
    ((-1, 1), &[(-1, 0), (0, 1)]),
    ((-1, -1), &[(-1, 0), (0, -1)]),
    ((1, 2), &[(0, 1), (1, 1)]),
    ((-1, 2), &[(0, 1), (-1, 1)]),
    ((1, -2), &[(0, -1), (1, -1)]),
    ((-1, -2), &[(0, -1), (-1, -1)]),
    ((2, 1), &[(1, 0), (1, 1)]),
    ((2, -1), &[(1, 0), (1, -1)]),
    ((-2, 1), &[(-1, 0), (-1, 1)]),
    ((-2, -1), &[(-1, 0), (-1, -1)]),
];

/// Per-cell navigability after eroding free space by the agent radius: a
/// cell is navigable iff it is free and its center keeps at least `radius`
/// clearance from every wall cell (including the out-of-grid border).
#[derive(Debug, Clone)]
pub struct NavGrid {
    cols: usize,
    rows: usize,
    cell_size: f64,
    navigable: Vec<bool>,
}

impl NavGrid {
    pub fn new(scene: &SceneSpec, body: AgentBody) -> Self {
        let cs = scene.cell_size;
        let r = body.radius;
        let reach = (r / cs).ceil() as i64 + 1;
        let (cols, rows) = (scene.cols(), scene.rows());
        let mut navigable = vec![false; cols * rows];
        for j in 0..rows as i64 {
            for i in 0..cols as i64 {
                if scene.is_wall(i, j) {
                    continue;
                }
                let (cx, cy) = scene.cell_center(i, j);
                let mut clear = true;
                'scan: for dj in -reach..=reach {
                    for di in -reach..=reach {
                        let (wi, wj) = (i + di, j + dj);
                        if !scene.is_wall(wi, wj) {
                            continue;
                        }
                        let (x0, y0) = (wi as f64 * cs, wj as f64 * cs);
                        let gx = (x0 - cx).max(cx - (x0 + cs)).max(0.0);
                        let gy = (y0 - cy).max(cy - (y0 + cs)).max(0.0);
                        if gx.hypot(gy) < r {
                            clear = false;
                            break 'scan;
                        }
                    }
                }
                navigable[j as usize * cols + i as usize] = clear;
            }
        }
        NavGrid {
            cols,
            rows,
            cell_size: cs,
            navigable,
        }
    }

    pub fn is_navigable(&self, i: i64, j: i64) -> bool {
        i >= 0
            && j >= 0
            && (i as usize) < self.cols
            && (j as usize) < self.rows
            && self.navigable[j as usize * self.cols + i as usize]
    }

    pub fn is_navigable_at(&self, x: f64, y: f64) -> bool {
        let cs = self.cell_size;
        self.is_navigable((x / cs).floor() as i64, (y / cs).floor() as i64)
    }

    pub fn cell_center(&self, i: i64, j: i64) -> (f64, f64) {
        ((i as f64 + 0.5) * self.cell_size, (j as f64 + 0.5) * self.cell_size)
    }

    pub fn navigable_cells(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        (0..self.rows).flat_map(move |j| {
            (0..self.cols)
                .filter(move |&i| self.navigable[j * self.cols + i])
                .map(move |i| (i as i64, j as i64))
        })
    }

    /// Nearest navigable cell center within [`SNAP_RADIUS_M`].
    pub fn snap(&self, x: f64, y: f64) -> Result<(i64, i64)> {
        let cs = self.cell_size;
        let (ci, cj) = ((x / cs).floor() as i64, (y / cs).floor() as i64);
        if self.is_navigable(ci, cj) {
            return Ok((ci, cj));
        }
        let reach = (SNAP_RADIUS_M / cs).ceil() as i64 + 1;
        let mut best: Option<(f64, (i64, i64))> = None;
        for j in cj - reach..=cj + reach {
            for i in ci - reach..=ci + reach {
                if !self.is_navigable(i, j) {
                    continue;
                }
                let (px, py) = self.cell_center(i, j);
                let d = (px - x).hypot(py - y);
                if d <= SNAP_RADIUS_M && best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, (i, j)));
                }
            }
        }
        best.map(|(_, c)| c).ok_or(Error::SnapFailure {
            x,
            y,
            radius: SNAP_RADIUS_M,
        })
    }

    fn index(&self, i: i64, j: i64) -> usize {
        j as usize * self.cols + i as usize
    }

    /// Single-source Dijkstra from the cell containing (or nearest to) `goal`.
    pub fn distance_field(&self, goal_x: f64, goal_y: f64) -> Result<DistanceField> {
        let source = self.snap(goal_x, goal_y)?;
        let mut dist = vec![f64::INFINITY; self.cols * self.rows];
        let mut heap = BinaryHeap::new();
        dist[self.index(source.0, source.1)] = 0.0;
        heap.push(QueueItem {
            cost: 0.0,
            cell: source,
        });
        let cs = self.cell_size;
        while let Some(QueueItem { cost, cell: (i, j) }) = heap.pop() {
            if cost > dist[self.index(i, j)] {
                continue;
            }
            for ((di, dj), through) in MOVES.iter() {
                let (ni, nj) = (i + di, j + dj);
                if !self.is_navigable(ni, nj)
                    || !through.iter().all(|(ti, tj)| self.is_navigable(i + ti, j + tj))
                {
                    continue;
                }
                let next = cost + cs * ((di * di + dj * dj) as f64).sqrt();
                let slot = self.index(ni, nj);
                if next < dist[slot] {
                    dist[slot] = next;
                    heap.push(QueueItem {
                        cost: next,
                        cell: (ni, nj),
                    });
                }
            }
        }
        Ok(DistanceField {
            grid: self.clone(),
            goal: (goal_x, goal_y),
            dist,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct QueueItem {
    cost: f64,
    cell: (i64, i64),
}

impl Eq for QueueItem {}

impl Ord for QueueItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for QueueItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Geodesic distances to one goal from anywhere in the scene.
#[derive(Debug, Clone)]
pub struct DistanceField {
    grid: NavGrid,
    goal: (f64, f64),
    dist: Vec<f64>,
}

impl DistanceField {
    pub fn goal(&self) -> (f64, f64) {
        self.goal
    }

    /// `Ok(None)` when the point is in a component the goal cannot reach.
    ///
    /// The grid distance between snapped cell centers is floored by the
    /// straight-line distance, so the result never undercuts Euclidean.
    pub fn distance_from(&self, x: f64, y: f64) -> Result<Option<f64>> {
        let (i, j) = self.grid.snap(x, y)?;
        let d = self.dist[self.grid.index(i, j)];
        if d.is_finite() {
            let euclid = (x - self.goal.0).hypot(y - self.goal.1);
            Ok(Some(d.max(euclid)))
        } else {
            Ok(None)
        }
    }
}

/// Obstacle-respecting floor distance; `Ok(None)` means unreachable.
pub fn geodesic_distance(nav: &NavGrid, from: (f64, f64), to: (f64, f64)) -> Result<Option<f64>> {
    nav.snap(from.0, from.1)?;
    nav.distance_field(to.0, to.1)?.distance_from(from.0, from.1)
}
