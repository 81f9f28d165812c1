//! Per-view waypoint and path proposals, and their merge into one candidate
//! set per decision step.

mod llm_plan;
mod parse;
mod scripted;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::affordance::{AffordanceMask, CandidatePoint};
use crate::error::{Error, Result};
use crate::geometry::{unproject, CameraIntrinsics, PixelPoint, Pose2D, ViewDirection, WorldPoint};
use crate::scene::DepthImage;

pub use llm_plan::{plan_view_llm, LowLevelPrompt};
pub use parse::{parse_plan_response, serialize_plan, PlanParse, PLAN_SCHEMA};
pub use scripted::{plan_view_scripted, segment_is_clear, ScriptedPlannerConfig};

/// A chain of candidate ids in one view, ending at its waypoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedPath {
    pub waypoint_id: u32,
    pub point_ids: Vec<u32>,
    pub view_dir: ViewDirection,
}

impl PlannedPath {
    pub fn is_well_formed(&self) -> bool {
        let mut seen = std::collections::BTreeSet::new();
        !self.point_ids.is_empty()
            && self.point_ids.last() == Some(&self.waypoint_id)
            && self.point_ids.iter().all(|id| seen.insert(*id))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEntry {
    pub global_id: u32,
    pub path: PlannedPath,
    pub pixels: Vec<PixelPoint>,
    pub world_polyline: Vec<WorldPoint>,
}

impl CandidateEntry {
    pub fn terminal(&self) -> WorldPoint {
        *self.world_polyline.last().expect("non-empty path")
    }
}

/// All proposals of one step, with global ids `1..=M`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CandidateSet {
    entries: Vec<CandidateEntry>,
}

impl CandidateSet {
    pub fn from_entries(entries: Vec<CandidateEntry>) -> Self {
        CandidateSet { entries }
    }

    pub fn entries(&self) -> &[CandidateEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, global_id: u32) -> Option<&CandidateEntry> {
        self.entries.iter().find(|e| e.global_id == global_id)
    }
}

/// Everything observed in one direction at one step.
#[derive(Debug, Clone)]
pub struct ViewObservation {
    pub dir: ViewDirection,
    pub view_pose: Pose2D,
    pub rgb: RgbImage,
    pub depth: DepthImage,
    pub mask: AffordanceMask,
    pub candidates: Vec<CandidatePoint>,
}

/// Concatenates the per-view paths in Front, Left, Back, Right order,
/// assigns global ids and lifts every path point into the world with its
/// view's depth.
pub fn merge(
    per_view: &[Vec<PlannedPath>; 4],
    views: &[ViewObservation; 4],
    intr: &CameraIntrinsics,
    cam_height: f64,
) -> Result<CandidateSet> {
    let mut entries = Vec::new();
    for dir in ViewDirection::ALL {
        let view = &views[dir.index()];
        for path in &per_view[dir.index()] {
            let mut pixels = Vec::with_capacity(path.point_ids.len());
            let mut world = Vec::with_capacity(path.point_ids.len());
            for id in &path.point_ids {
                let cand = view
                    .candidates
                    .iter()
                    .find(|c| c.id == *id)
                    .filter(|_| path.view_dir == dir)
                    .ok_or(Error::DanglingId {
                        id: *id,
                        view: dir.to_string(),
                    })?;
                let d = view.depth.get(cand.px.u as u32, cand.px.v as u32);
                pixels.push(cand.px);
                world.push(unproject(intr, view.view_pose, cam_height, cand.px, d)?);
            }
            entries.push(CandidateEntry {
                global_id: entries.len() as u32 + 1,
                path: path.clone(),
                pixels,
                world_polyline: world,
            });
        }
    }
    Ok(CandidateSet { entries })
}
