//! High-level decision: choose one merged candidate path or stop.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::annotate::AnnotatedImage;
use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, Pose2D, ViewDirection, WorldPoint};
use crate::llm::{extract_json_object, ChatClient, ChatMessage, ContentPart};
use crate::lowplan::{CandidateEntry, CandidateSet};
use crate::prompt::{default_pathagent, PromptTemplate};
use crate::scene::DistanceField;

pub const THOUGHT_SUMMARY_CHARS: usize = 240;

pub const DECISION_SCHEMA: &str = r#"{"thought": "<your reasoning>", "action": <path number> or "stop"}"#;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentAction {
    SelectPath(u32),
    Stop,
}

impl Serialize for AgentAction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            AgentAction::SelectPath(id) => s.serialize_u32(*id),
            AgentAction::Stop => s.serialize_str("stop"),
        }
    }
}

impl<'de> Deserialize<'de> for AgentAction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        AgentAction::from_json(&v).ok_or_else(|| serde::de::Error::custom(format!("invalid action {v}")))
    }
}

impl AgentAction {
    /// `"stop"` (any case, surrounding space ignored), or a non-negative
    /// integer given as a number or a numeric string.
    pub fn from_json(v: &Value) -> Option<Self> {
        match v {
            Value::Number(n) => n.as_u64().and_then(|n| u32::try_from(n).ok()).map(AgentAction::SelectPath),
            Value::String(s) if s.trim().eq_ignore_ascii_case("stop") => Some(AgentAction::Stop),
            Value::String(s) => s.trim().parse().ok().map(AgentAction::SelectPath),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub thought: String,
    pub action: AgentAction,
}

impl Decision {
    pub fn stop(thought: impl Into<String>) -> Self {
        Decision {
            thought: thought.into(),
            action: AgentAction::Stop,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub step: usize,
    pub action: AgentAction,
    pub view_dir: Option<ViewDirection>,
    pub summary: String,
    /// Agent position after the step was executed.
    pub endpoint: WorldPoint,
}

/// Step indices are strictly increasing.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    entries: Vec<HistoryEntry>,
}

impl History {
    pub fn entries(&self) -> &[HistoryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_prompt_text(&self) -> String {
        if self.entries.is_empty() {
            return "Nothing yet; this is the first step.".into();
        }
        let mut out = String::new();
        for e in &self.entries {
            let what = match (e.action, e.view_dir) {
                (AgentAction::SelectPath(id), Some(dir)) => format!("followed path {id} ({dir} view)"),
                (AgentAction::SelectPath(id), None) => format!("followed path {id}"),
                (AgentAction::Stop, _) => "stopped".into(),
            };
            let _ = writeln!(
                out,
                "Step {}: {what}, ended at ({:.2}, {:.2}). Thought: {}",
                e.step, e.endpoint.x, e.endpoint.y, e.summary
            );
        }
        out.trim_end().to_string()
    }
}

/// Longest prefix of `text` of at most `max` chars, cut at a word boundary
/// when one exists.
pub fn truncate_at_word(text: &str, max: usize) -> String {
    let text = text.trim();
    if text.chars().count() <= max {
        return text.to_string();
    }
    let cut: String = text.chars().take(max).collect();
    let next_is_space = text.chars().nth(max).is_some_and(char::is_whitespace);
    if next_is_space {
        return cut.trim_end().to_string();
    }
    match cut.rfind(char::is_whitespace) {
        Some(i) => cut[..i].trim_end().to_string(),
        None => cut,
    }
}

/// Appends one entry. Panics if `step` does not exceed the last step.
pub fn update_history(
    history: &mut History,
    step: usize,
    decision: &Decision,
    chosen: Option<&CandidateEntry>,
    endpoint: WorldPoint,
) {
    if let Some(last) = history.entries.last() {
        assert!(step > last.step, "history steps must increase ({step} after {})", last.step);
    }
    history.entries.push(HistoryEntry {
        step,
        action: decision.action,
        view_dir: chosen.map(|c| c.path.view_dir),
        summary: truncate_at_word(&decision.thought, THOUGHT_SUMMARY_CHARS),
        endpoint,
    });
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleAgentConfig {
    pub stop_radius_m: f64,
}

impl Default for OracleAgentConfig {
    fn default() -> Self {
        OracleAgentConfig { stop_radius_m: 1.0 }
    }
}

fn geodesic_or_inf(field: &DistanceField, p: WorldPoint) -> f64 {
    field.distance_from(p.x, p.y).ok().flatten().unwrap_or(f64::INFINITY)
}

/// Ground-truth agent: stop within `stop_radius_m` of the goal, otherwise
/// take the path whose terminal is geodesically closest to it (lower id on
/// ties). An empty candidate set means stop.
pub fn decide_oracle(candidates: &CandidateSet, pose: Pose2D, goal_field: &DistanceField, cfg: &OracleAgentConfig) -> Decision {
    let here = geodesic_or_inf(goal_field, pose.position());
    if here <= cfg.stop_radius_m {
        return Decision::stop(format!("{here:.2} m from the goal, within the stop radius"));
    }
    let mut best: Option<(f64, u32)> = None;
    for e in candidates.entries() {
        let d = geodesic_or_inf(goal_field, e.terminal());
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, e.global_id));
        }
    }
    match best {
        Some((d, id)) => Decision {
            thought: format!("path {id} ends {d:.2} m from the goal (now {here:.2} m)"),
            action: AgentAction::SelectPath(id),
        },
        None => Decision::stop("no candidate paths"),
    }
}

/// One text line per candidate: id, view, distance and bearing of the
/// terminal relative to the agent (bearing positive to the left).
pub fn candidate_digest(candidates: &CandidateSet, pose: Pose2D) -> String {
    if candidates.is_empty() {
        return "(none)".into();
    }
    let mut out = String::new();
    for e in candidates.entries() {
        let t = e.terminal();
        let (dx, dy) = (t.x - pose.x, t.y - pose.y);
        let bearing = normalize_angle(dy.atan2(dx) - pose.heading).to_degrees();
        let _ = writeln!(
            out,
            "Path {}: drawn in the {} view, ends {:.1} m away at bearing {:+.0} degrees",
            e.global_id,
            e.path.view_dir,
            dx.hypot(dy),
            bearing
        );
    }
    out.trim_end().to_string()
}

#[derive(Debug, Clone)]
pub struct HighLevelPrompt {
    pub template: PromptTemplate,
}

impl Default for HighLevelPrompt {
    fn default() -> Self {
        HighLevelPrompt {
            template: default_pathagent(),
        }
    }
}

fn parse_decision(reply: &str, candidates: &CandidateSet) -> std::result::Result<Decision, String> {
    let obj = extract_json_object(reply).ok_or_else(|| Error::NoJson.to_string())?;
    let thought = obj.get("thought").and_then(Value::as_str).unwrap_or_default().to_string();
    let raw = obj.get("action").ok_or("missing \"action\"")?;
    let action = AgentAction::from_json(raw).ok_or_else(|| format!("invalid action {raw}"))?;
    if let AgentAction::SelectPath(id) = action {
        if candidates.get(id).is_none() {
            return Err(format!("path {id} does not exist"));
        }
    }
    Ok(Decision { thought, action })
}

/// Asks the model with the rendered prompt and the four annotated views in
/// Front, Left, Back, Right order. An unusable reply earns one reprompt; a
/// second one becomes Stop with the violation recorded in the thought.
#[allow(clippy::too_many_arguments)]
pub fn decide_llm(
    client: &dyn ChatClient,
    prompt: &HighLevelPrompt,
    instruction: &str,
    history: &History,
    annotated: &[AnnotatedImage; 4],
    candidates: &CandidateSet,
    pose: Pose2D,
) -> Result<Decision> {
    let text = prompt.template.render(&[
        ("instruction", instruction),
        ("history", &history.to_prompt_text()),
        ("candidates", &candidate_digest(candidates, pose)),
        ("output_schema", DECISION_SCHEMA),
    ])?;
    let mut parts = vec![ContentPart::Text(text)];
    for (dir, img) in ViewDirection::ALL.iter().zip(annotated) {
        parts.push(ContentPart::Text(format!("{dir} view:")));
        parts.push(ContentPart::Png(img.png_bytes()));
    }
    let mut messages = vec![ChatMessage::user(parts)];
    let valid: Vec<String> = candidates.entries().iter().map(|e| e.global_id.to_string()).collect();
    let mut last_err = String::new();
    for attempt in 0..2 {
        let reply = client.complete(&messages)?;
        match parse_decision(&reply, candidates) {
            Ok(d) => return Ok(d),
            Err(e) => {
                log::warn!("decision reply rejected (attempt {}): {e}", attempt + 1);
                messages.push(ChatMessage::assistant(reply));
                messages.push(ChatMessage::user_text(format!(
                    "Your reply could not be used: {e}. Valid path numbers are [{}], or \"stop\". Answer again with a single JSON object following this schema:\n{DECISION_SCHEMA}",
                    valid.join(", ")
                )));
                last_err = e;
            }
        }
    }
    Ok(Decision::stop(format!("fallback stop: model reply invalid twice ({last_err})")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PixelPoint;
    use crate::lowplan::PlannedPath;
    use crate::scene::{AgentBody, NavGrid, SceneSpec};

    fn entry(id: u32, x: f64, y: f64) -> CandidateEntry {
        CandidateEntry {
            global_id: id,
            path: PlannedPath {
                waypoint_id: 1,
                point_ids: vec![1],
                view_dir: ViewDirection::Front,
            },
            pixels: vec![PixelPoint::new(0.0, 0.0)],
            world_polyline: vec![WorldPoint::floor(x, y)],
        }
    }

    fn field(goal: (f64, f64)) -> DistanceField {
        let scene = SceneSpec::open("open", 10.0, 10.0, 0.1).unwrap();
        NavGrid::new(&scene, AgentBody::default()).distance_field(goal.0, goal.1).unwrap()
    }

    #[test]
    fn oracle_stops_near_goal() {
        let f = field((5.5, 5.0));
        let set = CandidateSet::from_entries(vec![entry(1, 2.0, 2.0)]);
        let d = decide_oracle(&set, Pose2D::new(5.0, 5.0, 0.0), &f, &Default::default());
        assert_eq!(d.action, AgentAction::Stop);
    }

    #[test]
    fn oracle_takes_argmin_lowest_id_on_ties() {
        let f = field((9.0, 5.0));
        let pose = Pose2D::new(1.0, 5.0, 0.0);
        // terminals 4.2 m and 2.1 m from the goal
        let set = CandidateSet::from_entries(vec![entry(1, 4.8, 5.0), entry(2, 6.9, 5.0)]);
        assert_eq!(decide_oracle(&set, pose, &f, &Default::default()).action, AgentAction::SelectPath(2));
        let set = CandidateSet::from_entries(vec![
            entry(1, 2.0, 5.0),
            entry(2, 6.0, 5.0),
            entry(3, 3.0, 5.0),
            entry(4, 2.5, 5.0),
            entry(5, 6.0, 5.0),
        ]);
        assert_eq!(decide_oracle(&set, pose, &f, &Default::default()).action, AgentAction::SelectPath(2));
        let d = decide_oracle(&CandidateSet::default(), pose, &f, &Default::default());
        assert_eq!(d.action, AgentAction::Stop);
    }

    #[test]
    fn action_wire_format() {
        assert_eq!(serde_json::to_string(&AgentAction::Stop).unwrap(), "\"stop\"");
        assert_eq!(serde_json::to_string(&AgentAction::SelectPath(3)).unwrap(), "3");
        let a: AgentAction = serde_json::from_str("\"STOP\"").unwrap();
        assert_eq!(a, AgentAction::Stop);
        let a: AgentAction = serde_json::from_str("\"4\"").unwrap();
        assert_eq!(a, AgentAction::SelectPath(4));
        assert!(serde_json::from_str::<AgentAction>("-1").is_err());
    }

    #[test]
    fn history_appends_and_truncates() {
        let mut h = History::default();
        let d = Decision::stop("x");
        update_history(&mut h, 0, &d, None, WorldPoint::floor(0.0, 0.0));
        assert_eq!(h.len(), 1);
        assert_eq!(h.entries()[0].step, 0);
        for s in 1..6 {
            update_history(&mut h, s, &d, None, WorldPoint::floor(0.0, 0.0));
        }
        assert_eq!(h.entries().iter().map(|e| e.step).collect::<Vec<_>>(), (0..6).collect::<Vec<_>>());

        let long = "word ".repeat(60);
        let mut h = History::default();
        update_history(&mut h, 0, &Decision::stop(long.clone()), None, WorldPoint::floor(0.0, 0.0));
        let s = &h.entries()[0].summary;
        assert!(s.chars().count() <= THOUGHT_SUMMARY_CHARS);
        assert!(long.starts_with(s.as_str()));
        assert!(s.ends_with("word"));
    }

    #[test]
    #[should_panic]
    fn history_rejects_non_increasing_steps() {
        let mut h = History::default();
        let d = Decision::stop("x");
        update_history(&mut h, 2, &d, None, WorldPoint::floor(0.0, 0.0));
        update_history(&mut h, 2, &d, None, WorldPoint::floor(0.0, 0.0));
    }

    #[test]
    fn truncation_edge_cases() {
        assert_eq!(truncate_at_word("short", 10), "short");
        assert_eq!(truncate_at_word("abcdefghij", 4), "abcd");
        assert_eq!(truncate_at_word("ab cd ef", 5), "ab cd");
        assert_eq!(truncate_at_word("ab cdef", 5), "ab");
    }

    #[test]
    fn decision_parsing() {
        let set = CandidateSet::from_entries(vec![entry(1, 0.0, 0.0), entry(3, 0.0, 0.0)]);
        let d = parse_decision(r#"{"thought":"go to door","action":3}"#, &set).unwrap();
        assert_eq!(d.action, AgentAction::SelectPath(3));
        assert_eq!(d.thought, "go to door");
        let d = parse_decision(r#"{"thought":"arrived","action":"stop"}"#, &set).unwrap();
        assert_eq!(d.action, AgentAction::Stop);
        assert!(parse_decision(r#"{"thought":"?","action":42}"#, &set).is_err());
        assert!(parse_decision("no", &set).is_err());
    }

    #[test]
    fn digest_reports_relative_bearing() {
        let set = CandidateSet::from_entries(vec![entry(1, 0.0, 2.0)]);
        let text = candidate_digest(&set, Pose2D::new(0.0, 0.0, 0.0));
        assert!(text.contains("Path 1"), "{text}");
        assert!(text.contains("2.0 m"), "{text}");
        assert!(text.contains("+90 degrees"), "{text}");
    }
}
