//! Per-episode and aggregate navigation metrics: trajectory length,
//! navigation error, oracle success, success, and path-length-weighted
//! success.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runner::{Episode, TrajectoryLog};
use crate::scene::{AgentBody, DistanceField, NavGrid, SceneSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub episode: String,
    pub tl: f64,
    /// Geodesic distance from the final position to the goal.
    pub ne: f64,
    pub euclid_ne: f64,
    pub osr: f64,
    pub sr: f64,
    pub spl: f64,
}

fn geodesic(field: &DistanceField, episode: &str, x: f64, y: f64) -> Result<f64> {
    let fail = |why: String| Error::Evaluation {
        episode: episode.to_string(),
        reason: why,
    };
    field
        .distance_from(x, y)
        .map_err(|e| fail(format!("pose ({x:.3}, {y:.3}): {e}")))?
        .ok_or_else(|| fail(format!("goal unreachable from ({x:.3}, {y:.3})")))
}

/// Metric values given a goal distance field.
pub fn evaluate_with_field(
    log: &TrajectoryLog,
    episode: &Episode,
    field: &DistanceField,
    success_radius_m: f64,
) -> Result<EpisodeResult> {
    if log.episode_id() != episode.id {
        return Err(Error::Evaluation {
            episode: episode.id.clone(),
            reason: format!("log belongs to episode {}", log.episode_id()),
        });
    }
    let trace = log.full_trace();
    let tl: f64 = trace.windows(2).map(|w| w[0].distance_to(&w[1])).sum();
    let last = log.terminal.final_pose;
    let ne = geodesic(field, &episode.id, last.x, last.y)?;
    let euclid_ne = (last.x - episode.goal[0]).hypot(last.y - episode.goal[1]);
    let mut closest = ne;
    for p in &trace {
        closest = closest.min(geodesic(field, &episode.id, p.x, p.y)?);
    }
    let sr = if ne <= success_radius_m { 1.0 } else { 0.0 };
    let osr = if closest <= success_radius_m { 1.0 } else { 0.0 };
    let spl = if episode.gt_shortest > 0.0 {
        sr * episode.gt_shortest / tl.max(episode.gt_shortest)
    } else {
        sr
    };
    Ok(EpisodeResult {
        episode: episode.id.clone(),
        tl,
        ne,
        euclid_ne,
        osr,
        sr,
        spl,
    })
}

pub fn evaluate(
    log: &TrajectoryLog,
    episode: &Episode,
    scene: &SceneSpec,
    body: AgentBody,
    success_radius_m: f64,
) -> Result<EpisodeResult> {
    let nav = NavGrid::new(scene, body);
    let field = nav
        .distance_field(episode.goal[0], episode.goal[1])
        .map_err(|e| Error::Evaluation {
            episode: episode.id.clone(),
            reason: format!("goal: {e}"),
        })?;
    evaluate_with_field(log, episode, &field, success_radius_m)
}

/// Means over episodes; rates are stored as exact percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub n: usize,
    pub tl: f64,
    pub ne: f64,
    pub euclid_ne: f64,
    pub osr_pct: f64,
    pub sr_pct: f64,
    pub spl_pct: f64,
    pub success_radius_m: f64,
    pub config_digest: Option<String>,
}

pub fn aggregate(results: &[EpisodeResult], success_radius_m: f64, config_digest: Option<String>) -> Result<Report> {
    if results.is_empty() {
        return Err(Error::Evaluation {
            episode: "(all)".into(),
            reason: "no episode results to aggregate".into(),
        });
    }
    let n = results.len() as f64;
    let mean = |f: fn(&EpisodeResult) -> f64| results.iter().map(f).sum::<f64>() / n;
    Ok(Report {
        n: results.len(),
        tl: mean(|r| r.tl),
        ne: mean(|r| r.ne),
        euclid_ne: mean(|r| r.euclid_ne),
        osr_pct: 100.0 * mean(|r| r.osr),
        sr_pct: 100.0 * mean(|r| r.sr),
        spl_pct: 100.0 * mean(|r| r.spl),
        success_radius_m,
        config_digest,
    })
}

impl Report {
    /// Plain-text table: lengths in meters to two decimals, rates as
    /// percentages to one decimal.
    pub fn table(&self) -> String {
        let header = ["Episodes", "TL", "NE", "OSR", "SR", "SPL"];
        let row = [
            self.n.to_string(),
            format!("{:.2}", self.tl),
            format!("{:.2}", self.ne),
            format!("{:.1}", self.osr_pct),
            format!("{:.1}", self.sr_pct),
            format!("{:.1}", self.spl_pct),
        ];
        let widths: Vec<usize> = header.iter().zip(&row).map(|(h, r)| h.len().max(r.len())).collect();
        let line = |cells: Vec<String>| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        let mut out = line(header.iter().map(|s| s.to_string()).collect());
        out.push('\n');
        out += &line(row.to_vec());
        out += &format!("\nsuccess radius {:.1} m; NE is geodesic (Euclidean mean {:.2} m)\n", self.success_radius_m, self.euclid_ne);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose2D;
    use crate::runner::{StepRecord, StopReason, TerminalRecord};

    fn log_through(points: &[(f64, f64)]) -> TrajectoryLog {
        let poses: Vec<Pose2D> = points.iter().map(|&(x, y)| Pose2D::new(x, y, 0.0)).collect();
        TrajectoryLog {
            steps: vec![StepRecord {
                episode: "e".into(),
                step: 0,
                pose: poses[0],
                candidate_count: 0,
                candidates: Default::default(),
                decision: None,
                recovery: false,
                actions: Vec::new(),
                trace: poses[1..].to_vec(),
                collisions: 0,
                images: Vec::new(),
            }],
            terminal: TerminalRecord {
                episode: "e".into(),
                final_pose: *poses.last().unwrap(),
                stop_reason: StopReason::AgentStop,
                total_actions: 0,
                error: None,
            },
        }
    }

    fn episode(goal: [f64; 2], shortest: f64) -> Episode {
        Episode {
            id: "e".into(),
            scene_id: "open".into(),
            start: Pose2D::new(1.0, 1.0, 0.0),
            goal,
            instruction: String::new(),
            gt_shortest: shortest,
        }
    }

    fn scene() -> SceneSpec {
        SceneSpec::open("open", 20.0, 20.0, 0.1).unwrap()
    }

    #[test]
    fn on_goal_exact_case() {
        let log = log_through(&[(1.05, 1.05), (2.05, 1.05), (2.05, 2.05)]);
        let r = evaluate(&log, &episode([2.05, 2.05], 2.0), &scene(), AgentBody::default(), 3.0).unwrap();
        assert!((r.tl - 2.0).abs() < 1e-12);
        assert!(r.ne.abs() < 1e-9);
        assert_eq!((r.sr, r.osr), (1.0, 1.0));
        assert!((r.spl - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spl_formula_and_failure() {
        // a straight 12.8 m walk in open space
        let log = log_through(&[(1.05, 5.05), (13.85, 5.05)]);
        let r = evaluate(&log, &episode([14.05, 5.05], 10.0), &scene(), AgentBody::default(), 3.0).unwrap();
        assert!((r.spl - 0.78125).abs() < 1e-12);
        let r = evaluate(&log, &episode([13.85, 18.05], 10.0), &scene(), AgentBody::default(), 3.0).unwrap();
        assert_eq!(r.sr, 0.0);
        assert_eq!(r.spl, 0.0);
        assert!(r.ne >= r.euclid_ne);
    }

    #[test]
    fn oracle_success_without_success() {
        let log = log_through(&[(1.05, 1.05), (9.05, 1.05), (1.05, 1.05)]);
        let r = evaluate(&log, &episode([9.05, 2.05], 8.0), &scene(), AgentBody::default(), 3.0).unwrap();
        assert_eq!((r.osr, r.sr, r.spl), (1.0, 0.0, 0.0));
    }

    #[test]
    fn aggregate_rules() {
        let mk = |spl: f64| EpisodeResult {
            episode: "e".into(),
            tl: 1.0,
            ne: 0.0,
            euclid_ne: 0.0,
            osr: 1.0,
            sr: 1.0,
            spl,
        };
        let rep = aggregate(&[mk(1.0), mk(0.0)], 3.0, None).unwrap();
        assert_eq!(rep.spl_pct, 50.0);
        let one = aggregate(&[mk(0.25)], 3.0, None).unwrap();
        assert_eq!((one.n, one.spl_pct, one.tl), (1, 25.0, 1.0));
        assert!(aggregate(&[], 3.0, None).is_err());
        let t = rep.table();
        for col in ["TL", "NE", "OSR", "SR", "SPL"] {
            assert!(t.contains(col));
        }
        assert!(t.contains("50.0"));
    }

    #[test]
    fn unreachable_goal_is_an_evaluation_error() {
        let mut s = scene();
        s.fill_rect(100, 0, 101, 199, crate::scene::Cell::Wall);
        let log = log_through(&[(1.05, 1.05), (2.05, 1.05)]);
        let err = evaluate(&log, &episode([15.05, 5.05], 14.0), &s, AgentBody::default(), 3.0).unwrap_err();
        assert!(matches!(err, Error::Evaluation { .. }));
    }
}
