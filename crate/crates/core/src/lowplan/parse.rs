//! Reply format of the low-level planner model.

use std::collections::BTreeSet;

use serde_json::{json, Value};

use super::PlannedPath;
use crate::error::{Error, Result};
use crate::geometry::ViewDirection;
use crate::llm::extract_json_object;

/// Output schema quoted verbatim into the prompt.
pub const PLAN_SCHEMA: &str = r#"{"waypoints": [{"waypoint_id": <int>, "path": [<int>, ...]}]}
"path" lists candidate point numbers in driving order and its last element equals "waypoint_id"."#;

/// Paths accepted from a reply plus one diagnostic per dropped entry.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlanParse {
    pub paths: Vec<PlannedPath>,
    pub diagnostics: Vec<String>,
}

fn as_id(v: &Value) -> Option<u32> {
    v.as_u64().and_then(|n| u32::try_from(n).ok())
}

fn check_entry(entry: &Value, valid_ids: &BTreeSet<u32>, view_dir: ViewDirection) -> std::result::Result<PlannedPath, String> {
    let waypoint_id = entry
        .get("waypoint_id")
        .and_then(as_id)
        .ok_or("missing or non-integer waypoint_id")?;
    let raw = entry
        .get("path")
        .and_then(Value::as_array)
        .ok_or("missing or non-array path")?;
    let point_ids = raw
        .iter()
        .map(|v| as_id(v).ok_or_else(|| format!("non-integer path element {v}")))
        .collect::<std::result::Result<Vec<u32>, String>>()?;
    if let Some(bad) = std::iter::once(&waypoint_id)
        .chain(&point_ids)
        .find(|id| !valid_ids.contains(id))
    {
        return Err(format!("unknown candidate id {bad}"));
    }
    let path = PlannedPath {
        waypoint_id,
        point_ids,
        view_dir,
    };
    if path.point_ids.is_empty() {
        Err("empty path".into())
    } else if path.point_ids.last() != Some(&waypoint_id) {
        Err(format!("path does not end at waypoint {waypoint_id}"))
    } else if !path.is_well_formed() {
        Err("path repeats a candidate id".into())
    } else {
        Ok(path)
    }
}

/// Reads the first JSON object in `text`. Entries that violate the schema or
/// reference ids outside `valid_ids` are dropped with a diagnostic; a reply
/// without any JSON object, or without a `waypoints` array, is an error.
pub fn parse_plan_response(text: &str, valid_ids: &BTreeSet<u32>, view_dir: ViewDirection) -> Result<PlanParse> {
    let obj = extract_json_object(text).ok_or(Error::NoJson)?;
    let entries = obj
        .get("waypoints")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::BadReply("no \"waypoints\" array".into()))?;
    let mut out = PlanParse::default();
    for (i, entry) in entries.iter().enumerate() {
        match check_entry(entry, valid_ids, view_dir) {
            Ok(p) => out.paths.push(p),
            Err(why) => out.diagnostics.push(format!("entry {i}: {why}")),
        }
    }
    Ok(out)
}

pub fn serialize_plan(paths: &[PlannedPath]) -> String {
    let entries: Vec<Value> = paths
        .iter()
        .map(|p| json!({"waypoint_id": p.waypoint_id, "path": p.point_ids}))
        .collect();
    json!({ "waypoints": entries }).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(n: u32) -> BTreeSet<u32> {
        (1..=n).collect()
    }

    #[test]
    fn schema_example() {
        let p = parse_plan_response(r#"{"waypoints":[{"waypoint_id":7,"path":[3,7]}]}"#, &ids(10), ViewDirection::Left)
            .unwrap();
        assert_eq!(p.paths.len(), 1);
        assert_eq!(p.paths[0].point_ids, vec![3, 7]);
        assert_eq!(p.paths[0].view_dir, ViewDirection::Left);
        assert!(p.diagnostics.is_empty());
    }

    #[test]
    fn invalid_entries_are_dropped() {
        let text = r#"{"waypoints":[
            {"waypoint_id":99,"path":[99]},
            {"waypoint_id":2,"path":[1,2]},
            {"waypoint_id":3,"path":[3,1]},
            {"waypoint_id":4,"path":[]},
            {"waypoint_id":5,"path":[5,2,5]},
            {"path":[1]}
        ]}"#;
        let p = parse_plan_response(text, &ids(10), ViewDirection::Front).unwrap();
        assert_eq!(p.paths.len(), 1);
        assert_eq!(p.paths[0].waypoint_id, 2);
        assert_eq!(p.diagnostics.len(), 5);
    }

    #[test]
    fn empty_and_missing() {
        let p = parse_plan_response(r#"{"waypoints":[]}"#, &ids(3), ViewDirection::Front).unwrap();
        assert!(p.paths.is_empty());
        assert!(matches!(parse_plan_response("no idea", &ids(3), ViewDirection::Front), Err(Error::NoJson)));
        assert!(parse_plan_response(r#"{"paths":[]}"#, &ids(3), ViewDirection::Front).is_err());
    }

    #[test]
    fn fenced_block_in_prose() {
        let text = "The door is at 4.\n```json\n{\"waypoints\": [{\"waypoint_id\": 4, \"path\": [2, 4]}]}\n```";
        let p = parse_plan_response(text, &ids(5), ViewDirection::Back).unwrap();
        assert_eq!(p.paths[0].point_ids, vec![2, 4]);
    }

    fn arb_path() -> impl Strategy<Value = Vec<u32>> {
        proptest::sample::subsequence((1u32..=30).collect::<Vec<_>>(), 1..6).prop_shuffle()
    }

    proptest! {
        #[test]
        fn serialize_round_trip(chains in proptest::collection::vec(arb_path(), 0..5)) {
            let paths: Vec<PlannedPath> = chains
                .into_iter()
                .map(|ids| PlannedPath { waypoint_id: *ids.last().unwrap(), point_ids: ids, view_dir: ViewDirection::Right })
                .collect();
            let back = parse_plan_response(&serialize_plan(&paths), &ids(30), ViewDirection::Right).unwrap();
            prop_assert!(back.diagnostics.is_empty());
            prop_assert_eq!(back.paths, paths);
        }
    }
}
