//! Deterministic stand-in for the low-level language model: visibility graph
//! over candidate points, spread-out far waypoints, shortest pixel paths.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::PlannedPath;
use crate::affordance::{AffordanceMask, CandidatePoint};
use crate::annotate::view_anchor;
use crate::geometry::{CameraIntrinsics, PixelPoint, ViewDirection, WorldPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScriptedPlannerConfig {
    pub k_paths: usize,
    pub min_sep_deg: f64,
    pub seg_sample_px: f64,
    /// Rank waypoints by closeness to the goal instead of by depth.
    pub use_goal_hint: bool,
}

impl Default for ScriptedPlannerConfig {
    fn default() -> Self {
        ScriptedPlannerConfig {
            k_paths: 3,
            min_sep_deg: 25.0,
            seg_sample_px: 4.0,
            use_goal_hint: false,
        }
    }
}

/// True iff every `spacing`-spaced sample on the straight segment `a -> b`
/// (endpoints included, nearest-pixel lookup) lies inside the mask.
pub fn segment_is_clear(mask: &AffordanceMask, a: PixelPoint, b: PixelPoint, spacing: f64) -> bool {
    let len = a.distance_to(&b);
    let n = ((len / spacing.max(1e-6)).ceil() as usize).max(1);
    (0..=n).all(|k| {
        let t = k as f64 / n as f64;
        mask.get_px(PixelPoint::new(a.u + (b.u - a.u) * t, a.v + (b.v - a.v) * t))
    })
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    node: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A* over `nodes` (node 0 is the start) with Euclidean edge weights and
/// the Euclidean distance to the target as heuristic.
fn shortest_path(nodes: &[PixelPoint], adj: &[Vec<bool>], target: usize) -> Option<Vec<usize>> {
    let n = nodes.len();
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    g[0] = 0.0;
    let mut open = BinaryHeap::new();
    open.push(Open {
        f: nodes[0].distance_to(&nodes[target]),
        node: 0,
    });
    while let Some(Open { node, .. }) = open.pop() {
        if closed[node] {
            continue;
        }
        if node == target {
            let mut path = vec![target];
            let mut cur = target;
            while parent[cur] != 0 {
                cur = parent[cur];
                path.push(cur);
            }
            path.reverse();
            return Some(path);
        }
        closed[node] = true;
        for next in 1..n {
            if closed[next] || !adj[node][next] {
                continue;
            }
            let cand = g[node] + nodes[node].distance_to(&nodes[next]);
            if cand < g[next] {
                g[next] = cand;
                parent[next] = node;
                open.push(Open {
                    f: cand + nodes[next].distance_to(&nodes[target]),
                    node: next,
                });
            }
        }
    }
    None
}

fn bearing_deg(intr: &CameraIntrinsics, px: PixelPoint) -> f64 {
    ((px.u - intr.cx) / intr.fx).atan().to_degrees()
}

/// Proposes up to `k_paths` paths in one view. Waypoints are taken greedily
/// by descending depth (or ascending distance to `goal_hint` when enabled),
/// skipping any that cannot be reached or that sit within `min_sep_deg` of an
/// already chosen bearing.
pub fn plan_view_scripted(
    candidates: &[CandidatePoint],
    mask: &AffordanceMask,
    intr: &CameraIntrinsics,
    dir: ViewDirection,
    goal_hint: Option<WorldPoint>,
    cfg: &ScriptedPlannerConfig,
) -> Vec<PlannedPath> {
    let mut nodes = Vec::with_capacity(candidates.len() + 1);
    nodes.push(view_anchor(mask.width(), mask.height()));
    nodes.extend(candidates.iter().map(|c| c.px));
    let n = nodes.len();
    let mut adj = vec![vec![false; n]; n];
    for a in 0..n {
        for b in a + 1..n {
            let clear = segment_is_clear(mask, nodes[a], nodes[b], cfg.seg_sample_px);
            adj[a][b] = clear;
            adj[b][a] = clear;
        }
    }

    let mut order: Vec<usize> = (0..candidates.len()).collect();
    match goal_hint.filter(|_| cfg.use_goal_hint) {
        Some(goal) => order.sort_by(|&a, &b| {
            candidates[a]
                .world
                .planar_distance(&goal)
                .total_cmp(&candidates[b].world.planar_distance(&goal))
                .then(candidates[a].id.cmp(&candidates[b].id))
        }),
        None => order.sort_by(|&a, &b| {
            candidates[b]
                .depth
                .total_cmp(&candidates[a].depth)
                .then(candidates[a].id.cmp(&candidates[b].id))
        }),
    }

    let mut chosen_bearings: Vec<f64> = Vec::new();
    let mut out = Vec::new();
    for k in order {
        if out.len() >= cfg.k_paths {
            break;
        }
        let bearing = bearing_deg(intr, candidates[k].px);
        if chosen_bearings.iter().any(|b| (b - bearing).abs() < cfg.min_sep_deg) {
            continue;
        }
        let Some(route) = shortest_path(&nodes, &adj, k + 1) else {
            continue;
        };
        chosen_bearings.push(bearing);
        out.push(PlannedPath {
            waypoint_id: candidates[k].id,
            point_ids: route.iter().map(|&node| candidates[node - 1].id).collect(),
            view_dir: dir,
        });
    }
    out
}
