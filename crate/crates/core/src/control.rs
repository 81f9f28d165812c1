//! Rotate-then-forward conversion of a world polyline into discrete actions,
//! and execution of those actions in the scene.

use serde::{Deserialize, Serialize};

use crate::geometry::{normalize_angle, Pose2D, WorldPoint};
use crate::scene::{self, AgentBody, SceneSpec, FORWARD_STEP_M, ROTATION_STEP_RAD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Action {
    Forward,
    RotateLeft,
    RotateRight,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSegment {
    pub target: WorldPoint,
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MotionPlan {
    pub segments: Vec<PlanSegment>,
    pub total_forward: f64,
}

impl MotionPlan {
    pub fn actions(&self) -> impl Iterator<Item = Action> + '_ {
        self.segments.iter().flat_map(|s| s.actions.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.segments.iter().map(|s| s.actions.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Nearest integer to a non-negative `x`, with exact halves going down.
fn round_half_down(x: f64) -> f64 {
    (x - 0.5).ceil().max(0.0)
}

/// Number of signed 15 degree turns that best realizes `delta` (ties toward
/// zero).
pub fn quantize_turn(delta: f64) -> i32 {
    let steps = round_half_down(delta.abs() / ROTATION_STEP_RAD) as i32;
    if delta < 0.0 {
        -steps
    } else {
        steps
    }
}

/// Open-space forward move, identical arithmetic to an unobstructed
/// [`scene::step`].
pub(crate) fn advance(pose: Pose2D) -> Pose2D {
    let (fx, fy) = pose.forward();
    Pose2D {
        x: pose.x + FORWARD_STEP_M * fx,
        y: pose.y + FORWARD_STEP_M * fy,
        ..pose
    }
}

/// Converts each segment into quantized rotations followed by
/// `round(d / 0.25)` forwards. The bearing of every segment is measured from
/// the simulated pose reached by the previous segment.
pub fn polyline_to_actions(start: Pose2D, polyline: &[WorldPoint]) -> MotionPlan {
    let mut pose = start;
    let mut segments = Vec::with_capacity(polyline.len());
    let mut forwards = 0usize;
    for target in polyline {
        let mut actions = Vec::new();
        let (dx, dy) = (target.x - pose.x, target.y - pose.y);
        let dist = dx.hypot(dy);
        if dist >= FORWARD_STEP_M / 2.0 {
            let turn = quantize_turn(normalize_angle(dy.atan2(dx) - pose.heading));
            let (action, delta) = if turn >= 0 {
                (Action::RotateLeft, ROTATION_STEP_RAD)
            } else {
                (Action::RotateRight, -ROTATION_STEP_RAD)
            };
            for _ in 0..turn.unsigned_abs() {
                actions.push(action);
                pose = pose.rotated(delta);
            }
            let n = (dist / FORWARD_STEP_M).round() as usize;
            for _ in 0..n {
                actions.push(Action::Forward);
                pose = advance(pose);
            }
            forwards += n;
        }
        segments.push(PlanSegment {
            target: *target,
            actions,
        });
    }
    MotionPlan {
        segments,
        total_forward: forwards as f64 * FORWARD_STEP_M,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Execution {
    pub final_pose: Pose2D,
    /// Starting pose followed by the pose after every executed action.
    pub trace: Vec<Pose2D>,
    pub actions: Vec<Action>,
    pub collisions: usize,
}

/// Runs the plan through the simulator, at most `budget` actions.
pub fn execute_with_budget(
    scene: &SceneSpec,
    pose: Pose2D,
    plan: &MotionPlan,
    body: AgentBody,
    budget: usize,
) -> Execution {
    let mut trace = vec![pose];
    let mut actions = Vec::new();
    let mut current = pose;
    let mut collisions = 0;
    for action in plan.actions().take(budget) {
        let (next, hit) = scene::step(scene, current, action, body);
        collisions += usize::from(hit);
        current = next;
        trace.push(current);
        actions.push(action);
    }
    Execution {
        final_pose: current,
        trace,
        actions,
        collisions,
    }
}

pub fn execute(scene: &SceneSpec, pose: Pose2D, plan: &MotionPlan, body: AgentBody) -> Execution {
    execute_with_budget(scene, pose, plan, body, usize::MAX)
}
