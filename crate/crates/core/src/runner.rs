//! Episode orchestration: observe, plan per view, merge, decide, execute,
//! until the agent stops or a cap is reached.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::affordance::{
    sample_candidates, AffordanceProvider, AffordanceSource, FileAffordance, OracleAffordance, SamplingConfig,
    ViewGeometry, ViewKey, ViewRequest,
};
use crate::annotate::{draw_paths, draw_points, AnnotatedImage};
use crate::control::{execute_with_budget, polyline_to_actions, Action, MotionPlan, PlanSegment};
use crate::error::{Error, Result};
use crate::geometry::{view_pose, CameraIntrinsics, Pose2D, ViewDirection, WorldPoint};
use crate::llm::{ChatClient, EndpointConfig, HttpChatClient};
use crate::lowplan::{
    merge, plan_view_llm, plan_view_scripted, CandidateSet, LowLevelPrompt, PlannedPath, ScriptedPlannerConfig,
    ViewObservation,
};
use crate::pathagent::{decide_llm, decide_oracle, update_history, AgentAction, Decision, HighLevelPrompt, History, OracleAgentConfig};
use crate::prompt::{PromptTemplate, PATHAGENT_PLACEHOLDERS, VAP_PLACEHOLDERS};
use crate::scene::{render, AgentBody, NavGrid, SceneSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub id: String,
    pub scene_id: String,
    pub start: Pose2D,
    pub goal: [f64; 2],
    pub instruction: String,
    /// Geodesic start-to-goal distance in meters.
    pub gt_shortest: f64,
}

impl Episode {
    pub fn goal_point(&self) -> WorldPoint {
        WorldPoint::floor(self.goal[0], self.goal[1])
    }

    pub fn load_list(path: &Path) -> Result<Vec<Episode>> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save_list(episodes: &[Episode], path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(episodes)? + "\n";
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    #[default]
    Scripted,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    #[default]
    Oracle,
    Llm,
}

/// Every tunable of a run. Unknown keys are rejected when loading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub planner: PlannerKind,
    pub agent: AgentKind,
    pub affordance: AffordanceSource,
    /// Directory of `<episode>_<step>_<dir>.mask.png` files for the file source.
    pub mask_dir: Option<PathBuf>,
    pub max_decisions: usize,
    pub max_actions: usize,
    /// Forwarded to the model endpoint.
    pub seed: u64,
    pub parallelism: usize,
    pub image_width: u32,
    pub image_height: u32,
    pub hfov_deg: f64,
    pub cam_height_m: f64,
    pub recovery_turns: usize,
    pub success_radius_m: f64,
    pub include_instruction: bool,
    pub vap_prompt: Option<PathBuf>,
    pub pathagent_prompt: Option<PathBuf>,
    pub body: AgentBody,
    pub sampling: SamplingConfig,
    pub scripted: ScriptedPlannerConfig,
    pub oracle: OracleAgentConfig,
    pub endpoint: EndpointConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            planner: PlannerKind::Scripted,
            agent: AgentKind::Oracle,
            affordance: AffordanceSource::Oracle,
            mask_dir: None,
            max_decisions: 12,
            max_actions: 200,
            seed: 0,
            parallelism: 1,
            image_width: 512,
            image_height: 512,
            hfov_deg: 90.0,
            cam_height_m: 1.25,
            recovery_turns: 6,
            success_radius_m: 3.0,
            include_instruction: true,
            vap_prompt: None,
            pathagent_prompt: None,
            body: AgentBody::default(),
            sampling: SamplingConfig::default(),
            scripted: ScriptedPlannerConfig::default(),
            oracle: OracleAgentConfig::default(),
            endpoint: EndpointConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.max_decisions == 0 || self.max_actions == 0 {
            return bad("max_decisions and max_actions must be positive");
        }
        if self.parallelism == 0 {
            return bad("parallelism must be positive");
        }
        // negated so that NaN is rejected too
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.success_radius_m > 0.0) || !(self.cam_height_m > 0.0) {
            return bad("success_radius_m and cam_height_m must be positive");
        }
        if self.affordance == AffordanceSource::File && self.mask_dir.is_none() {
            return bad("affordance = \"file\" needs mask_dir");
        }
        self.intrinsics().map(|_| ())
    }

    pub fn intrinsics(&self) -> Result<CameraIntrinsics> {
        CameraIntrinsics::from_hfov(self.image_width, self.image_height, self.hfov_deg.to_radians())
    }

    pub fn uses_llm(&self) -> bool {
        self.planner == PlannerKind::Llm || self.agent == AgentKind::Llm
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    AgentStop,
    MaxDecisions,
    MaxActions,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub episode: String,
    pub step: usize,
    /// Pose at the start of the step.
    pub pose: Pose2D,
    pub candidate_count: usize,
    pub candidates: CandidateSet,
    /// Absent on recovery steps.
    pub decision: Option<Decision>,
    pub recovery: bool,
    pub actions: Vec<Action>,
    /// Pose after each executed action.
    pub trace: Vec<Pose2D>,
    pub collisions: usize,
    pub images: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalRecord {
    pub episode: String,
    pub final_pose: Pose2D,
    pub stop_reason: StopReason,
    pub total_actions: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum Record {
    Step(StepRecord),
    Terminal(TerminalRecord),
}

/// Steps are contiguous from 0, followed by exactly one terminal record.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub steps: Vec<StepRecord>,
    pub terminal: TerminalRecord,
}

impl TrajectoryLog {
    pub fn episode_id(&self) -> &str {
        &self.terminal.episode
    }

    /// Start pose followed by every pose the agent passed through.
    pub fn full_trace(&self) -> Vec<Pose2D> {
        let mut out = vec![self.steps.first().map_or(self.terminal.final_pose, |s| s.pose)];
        for s in &self.steps {
            out.extend_from_slice(&s.trace);
        }
        out
    }

    pub fn total_actions(&self) -> usize {
        self.steps.iter().map(|s| s.actions.len()).sum()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            out += &serde_json::to_string(&Record::Step(s.clone())).expect("record serializes");
            out.push('\n');
        }
        out += &serde_json::to_string(&Record::Terminal(self.terminal.clone())).expect("record serializes");
        out.push('\n');
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut steps = Vec::new();
        let mut terminal = None;
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            if terminal.is_some() {
                return Err(Error::Setup(format!("line {}: record after the terminal record", n + 1)));
            }
            match serde_json::from_str::<Record>(line)? {
                Record::Step(s) => {
                    if s.step != steps.len() {
                        return Err(Error::Setup(format!("line {}: expected step {}, got {}", n + 1, steps.len(), s.step)));
                    }
                    steps.push(s);
                }
                Record::Terminal(t) => terminal = Some(t),
            }
        }
        let terminal = terminal.ok_or_else(|| Error::Setup("log has no terminal record".into()))?;
        Ok(TrajectoryLog { steps, terminal })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(self.to_jsonl().as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut text = String::new();
        for line in BufReader::new(file).lines() {
            text += &line.map_err(|e| Error::io(path, e))?;
            text.push('\n');
        }
        Self::from_jsonl(&text)
    }

    pub fn file_name(episode_id: &str) -> String {
        format!("{episode_id}.jsonl")
    }
}

/// A failed episode together with everything logged before the failure.
#[derive(Debug, thiserror::Error)]
#[error("episode {}: {source}", partial.episode_id())]
pub struct RunError {
    #[source]
    pub source: Error,
    pub partial: Box<TrajectoryLog>,
}

/// Configured providers for running episodes.
pub struct Pipeline {
    cfg: RunConfig,
    intr: CameraIntrinsics,
    affordance: Box<dyn AffordanceProvider>,
    chat: Option<Arc<dyn ChatClient>>,
    low_prompt: LowLevelPrompt,
    high_prompt: HighLevelPrompt,
    image_dir: Option<PathBuf>,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline").field("cfg", &self.cfg).finish_non_exhaustive()
    }
}

impl Pipeline {
    /// Builds providers from the config; the HTTP client is only created when
    /// the planner or the agent is model-driven.
    pub fn from_config(cfg: RunConfig, transcript: Option<&Path>) -> Result<Self> {
        let chat: Option<Arc<dyn ChatClient>> = if cfg.uses_llm() {
            let mut client = HttpChatClient::new(cfg.endpoint.clone())?.with_seed(cfg.seed);
            if let Some(path) = transcript {
                client = client.with_transcript(path)?;
            }
            Some(Arc::new(client))
        } else {
            None
        };
        Self::with_chat(cfg, chat)
    }

    /// Like [`Pipeline::from_config`] with a caller-supplied chat client.
    pub fn with_chat(cfg: RunConfig, chat: Option<Arc<dyn ChatClient>>) -> Result<Self> {
        cfg.validate()?;
        if cfg.uses_llm() && chat.is_none() {
            return Err(Error::Config("a model-driven planner or agent needs a chat client".into()));
        }
        let affordance: Box<dyn AffordanceProvider> = match cfg.affordance {
            AffordanceSource::Oracle => Box::new(OracleAffordance),
            AffordanceSource::File => Box::new(FileAffordance::new(cfg.mask_dir.clone().expect("validated"))),
        };
        let low_template = match &cfg.vap_prompt {
            Some(p) => PromptTemplate::load(p, VAP_PLACEHOLDERS)?,
            None => LowLevelPrompt::default().template,
        };
        let high_template = match &cfg.pathagent_prompt {
            Some(p) => PromptTemplate::load(p, PATHAGENT_PLACEHOLDERS)?,
            None => HighLevelPrompt::default().template,
        };
        Ok(Pipeline {
            intr: cfg.intrinsics()?,
            low_prompt: LowLevelPrompt {
                template: low_template,
                include_instruction: cfg.include_instruction,
            },
            high_prompt: HighLevelPrompt { template: high_template },
            cfg,
            affordance,
            chat,
            image_dir: None,
        })
    }

    pub fn with_affordance(mut self, provider: Box<dyn AffordanceProvider>) -> Self {
        self.affordance = provider;
        self
    }

    /// Saves raw and annotated views of every step under `dir`.
    pub fn with_image_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.image_dir = Some(dir.into());
        self
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    fn chat(&self) -> &dyn ChatClient {
        self.chat.as_deref().expect("checked at construction")
    }

    fn observe(&self, episode: &str, step: usize, scene: &SceneSpec, nav: &NavGrid, pose: Pose2D) -> Result<[ViewObservation; 4]> {
        let mut out = Vec::with_capacity(4);
        for dir in ViewDirection::ALL {
            let vp = view_pose(pose, dir);
            let (rgb, depth) = render(scene, vp, &self.intr, self.cfg.cam_height_m)?;
            let geom = ViewGeometry {
                intr: &self.intr,
                view_pose: vp,
                cam_height: self.cfg.cam_height_m,
                dir,
            };
            let req = ViewRequest {
                key: ViewKey { episode, step, dir },
                scene,
                nav,
                geom,
                depth: &depth,
            };
            let mask = self.affordance.mask(&req)?;
            let candidates = sample_candidates(&mask, &depth, geom, &self.cfg.sampling)?;
            out.push(ViewObservation {
                dir,
                view_pose: vp,
                rgb,
                depth,
                mask,
                candidates,
            });
        }
        Ok(out.try_into().expect("four views"))
    }

    fn plan_views(&self, views: &[ViewObservation; 4], instruction: &str, goal: WorldPoint) -> Result<[Vec<PlannedPath>; 4]> {
        match self.cfg.planner {
            PlannerKind::Scripted => Ok(views.each_ref().map(|v| {
                plan_view_scripted(&v.candidates, &v.mask, &self.intr, v.dir, Some(goal), &self.cfg.scripted)
            })),
            PlannerKind::Llm => {
                // one request per view, concurrently; the client bounds in-flight calls
                let results: Vec<Result<Vec<PlannedPath>>> = std::thread::scope(|s| {
                    let handles: Vec<_> = views
                        .iter()
                        .map(|v| {
                            s.spawn(move || {
                                if v.candidates.is_empty() {
                                    return Ok(Vec::new());
                                }
                                let annotated = draw_points(&v.rgb, &v.candidates);
                                let ids: BTreeSet<u32> = v.candidates.iter().map(|c| c.id).collect();
                                plan_view_llm(self.chat(), &self.low_prompt, instruction, &annotated, &ids, v.dir)
                            })
                        })
                        .collect();
                    handles.into_iter().map(|h| h.join().expect("planner thread")).collect()
                });
                let mut out: [Vec<PlannedPath>; 4] = Default::default();
                for (slot, r) in out.iter_mut().zip(results) {
                    *slot = r?;
                }
                Ok(out)
            }
        }
    }

    fn save_images(
        &self,
        episode: &str,
        step: usize,
        views: &[ViewObservation; 4],
        annotated: Option<&[AnnotatedImage; 4]>,
    ) -> Result<Vec<String>> {
        let Some(dir) = &self.image_dir else {
            return Ok(Vec::new());
        };
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut names = Vec::new();
        let mut save = |name: String, img: &RgbImage| -> Result<()> {
            let path = dir.join(&name);
            img.save(&path).map_err(|source| Error::Image { path, source })?;
            names.push(name);
            Ok(())
        };
        for v in views {
            let key = ViewKey { episode, step, dir: v.dir };
            save(key.view_file_name(), &v.rgb)?;
            if let Some(a) = annotated {
                save(format!("{}.annotated.png", key.stem()), &a[v.dir.index()].image)?;
            }
        }
        Ok(names)
    }

    /// Runs one episode to completion. Failures carry the partial log.
    pub fn run_episode(&self, episode: &Episode, scene: &SceneSpec) -> std::result::Result<TrajectoryLog, RunError> {
        let mut steps = Vec::new();
        let mut pose = episode.start;
        let outcome = self.run_steps(episode, scene, &mut steps, &mut pose);
        let total_actions = steps.iter().map(|s: &StepRecord| s.actions.len()).sum();
        let terminal = |stop_reason, error| TerminalRecord {
            episode: episode.id.clone(),
            final_pose: pose,
            stop_reason,
            total_actions,
            error,
        };
        match outcome {
            Ok(reason) => Ok(TrajectoryLog {
                terminal: terminal(reason, None),
                steps,
            }),
            Err(e) => Err(RunError {
                partial: Box::new(TrajectoryLog {
                    terminal: terminal(StopReason::Error, Some(e.to_string())),
                    steps,
                }),
                source: e,
            }),
        }
    }

    fn run_steps(&self, ep: &Episode, scene: &SceneSpec, steps: &mut Vec<StepRecord>, pose: &mut Pose2D) -> Result<StopReason> {
        if ep.scene_id != scene.id {
            return Err(Error::Setup(format!("episode {} belongs to scene {}, got {}", ep.id, ep.scene_id, scene.id)));
        }
        let nav = NavGrid::new(scene, self.cfg.body);
        nav.snap(ep.start.x, ep.start.y)
            .map_err(|e| Error::Setup(format!("episode {} start: {e}", ep.id)))?;
        let field = nav
            .distance_field(ep.goal[0], ep.goal[1])
            .map_err(|e| Error::Setup(format!("episode {} goal: {e}", ep.id)))?;
        let goal = ep.goal_point();
        let mut history = History::default();
        let mut used = 0usize;

        for step in 0..self.cfg.max_decisions {
            if used >= self.cfg.max_actions {
                return Ok(StopReason::MaxActions);
            }
            let views = self.observe(&ep.id, step, scene, &nav, *pose)?;
            let per_view = self.plan_views(&views, &ep.instruction, goal)?;
            let candidates = merge(&per_view, &views, &self.intr, self.cfg.cam_height_m)?;
            let start_pose = *pose;

            let (decision, plan, images) = if candidates.is_empty() {
                let turn = PlanSegment {
                    target: pose.position(),
                    actions: vec![Action::RotateLeft; self.cfg.recovery_turns],
                };
                let plan = MotionPlan {
                    segments: vec![turn],
                    total_forward: 0.0,
                };
                (None, plan, self.save_images(&ep.id, step, &views, None)?)
            } else {
                // path overlays are only needed by the model agent or for saving
                let annotated = if self.cfg.agent == AgentKind::Llm || self.image_dir.is_some() {
                    let rgbs = views.each_ref().map(|v| v.rgb.clone());
                    Some(draw_paths(&rgbs, &candidates)?)
                } else {
                    None
                };
                let decision = match self.cfg.agent {
                    AgentKind::Oracle => decide_oracle(&candidates, *pose, &field, &self.cfg.oracle),
                    AgentKind::Llm => decide_llm(
                        self.chat(),
                        &self.high_prompt,
                        &ep.instruction,
                        &history,
                        annotated.as_ref().expect("built for the model agent"),
                        &candidates,
                        *pose,
                    )?,
                };
                let images = self.save_images(&ep.id, step, &views, annotated.as_ref())?;
                let plan = match decision.action {
                    AgentAction::Stop => MotionPlan::default(),
                    AgentAction::SelectPath(id) => {
                        let entry = candidates.get(id).expect("decisions reference the candidate set");
                        polyline_to_actions(*pose, &entry.world_polyline)
                    }
                };
                (Some(decision), plan, images)
            };

            let exec = execute_with_budget(scene, *pose, &plan, self.cfg.body, self.cfg.max_actions - used);
            used += exec.actions.len();
            *pose = exec.final_pose;
            let stopped = decision.as_ref().is_some_and(|d| d.action == AgentAction::Stop);
            if let Some(d) = &decision {
                let chosen = match d.action {
                    AgentAction::SelectPath(id) => candidates.get(id),
                    AgentAction::Stop => None,
                };
                update_history(&mut history, step, d, chosen, pose.position());
            }
            steps.push(StepRecord {
                episode: ep.id.clone(),
                step,
                pose: start_pose,
                candidate_count: candidates.len(),
                recovery: decision.is_none(),
                decision,
                actions: exec.actions,
                trace: exec.trace[1..].to_vec(),
                collisions: exec.collisions,
                images,
                candidates,
            });
            if stopped {
                return Ok(StopReason::AgentStop);
            }
            if used >= self.cfg.max_actions {
                return Ok(StopReason::MaxActions);
            }
        }
        Ok(StopReason::MaxDecisions)
    }

    /// Runs episodes on a pool of `parallelism` threads. Output order equals
    /// input order; a failing episode yields its error without affecting the
    /// others.
    pub fn run_batch(
        &self,
        episodes: &[Episode],
        scenes: &HashMap<String, SceneSpec>,
        parallelism: usize,
    ) -> Vec<std::result::Result<TrajectoryLog, RunError>> {
        let run_one = |ep: &Episode| match scenes.get(&ep.scene_id) {
            Some(scene) => self.run_episode(ep, scene),
            None => Err(RunError {
                source: Error::Setup(format!("episode {} references unknown scene {}", ep.id, ep.scene_id)),
                partial: Box::new(TrajectoryLog {
                    steps: Vec::new(),
                    terminal: TerminalRecord {
                        episode: ep.id.clone(),
                        final_pose: ep.start,
                        stop_reason: StopReason::Error,
                        total_actions: 0,
                        error: Some(format!("unknown scene {}", ep.scene_id)),
                    },
                }),
            }),
        };
        match rayon::ThreadPoolBuilder::new().num_threads(parallelism.max(1)).build() {
            Ok(pool) => pool.install(|| episodes.par_iter().map(run_one).collect()),
            Err(e) => {
                log::warn!("could not build a thread pool ({e}); running sequentially");
                episodes.iter().map(run_one).collect()
            }
        }
    }
}

/// Loads every `*.json` scene in `dir`, keyed by scene id.
pub fn load_scenes(dir: &Path) -> Result<HashMap<String, SceneSpec>> {
    let mut out = HashMap::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    for p in paths {
        let Ok(scene) = SceneSpec::load(&p) else {
            log::debug!("skipping {} (not a scene file)", p.display());
            continue;
        };
        out.insert(scene.id.clone(), scene);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> RunConfig {
        RunConfig {
            image_width: 128,
            image_height: 128,
            sampling: SamplingConfig {
                stride_px: 14.0,
                margin_px: 6,
                min_clearance_px: 2,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    fn open_episode(goal: [f64; 2]) -> (SceneSpec, Episode) {
        let scene = SceneSpec::open("room", 8.0, 8.0, 0.1).unwrap();
        let ep = Episode {
            id: "e0".into(),
            scene_id: "room".into(),
            start: Pose2D::new(1.5, 4.0, 0.0),
            goal,
            instruction: "go east".into(),
            gt_shortest: (goal[0] - 1.5f64).hypot(goal[1] - 4.0),
        };
        (scene, ep)
    }

    #[test]
    fn config_round_trips_and_rejects_unknown_keys() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
        assert!(RunConfig::from_toml("max_decisons = 3").is_err());
        assert!(RunConfig::from_toml("max_actions = 0").is_err());
        let tuned = RunConfig::from_toml("max_decisions = 5\n[scripted]\nk_paths = 2").unwrap();
        assert_eq!((tuned.max_decisions, tuned.scripted.k_paths), (5, 2));
        assert_ne!(tuned.digest(), cfg.digest());
        assert_eq!(cfg.digest().len(), 64);
    }

    #[test]
    fn stop_at_step_zero_near_goal() {
        let (scene, ep) = open_episode([2.0, 4.0]);
        let p = Pipeline::with_chat(small_cfg(), None).unwrap();
        let log = p.run_episode(&ep, &scene).unwrap();
        assert_eq!(log.steps.len(), 1);
        assert_eq!(log.terminal.stop_reason, StopReason::AgentStop);
        assert_eq!(log.total_actions(), 0);
    }

    #[test]
    fn open_room_reaches_goal() {
        let (scene, ep) = open_episode([6.5, 4.0]);
        let p = Pipeline::with_chat(small_cfg(), None).unwrap();
        let log = p.run_episode(&ep, &scene).unwrap();
        let f = log.terminal.final_pose;
        assert!((f.x - 6.5).hypot(f.y - 4.0) <= 3.0, "{f:?}");
        assert!(log.steps.len() <= 5);
        assert_eq!(log.terminal.stop_reason, StopReason::AgentStop);
    }

    #[test]
    fn jsonl_round_trip() {
        let (scene, ep) = open_episode([6.5, 4.0]);
        let p = Pipeline::with_chat(small_cfg(), None).unwrap();
        let log = p.run_episode(&ep, &scene).unwrap();
        let back = TrajectoryLog::from_jsonl(&log.to_jsonl()).unwrap();
        assert_eq!(back, log);
        assert!(TrajectoryLog::from_jsonl("").is_err());
    }

    #[test]
    fn scene_mismatch_is_a_setup_error() {
        let (scene, mut ep) = open_episode([6.5, 4.0]);
        ep.scene_id = "other".into();
        let p = Pipeline::with_chat(small_cfg(), None).unwrap();
        let err = p.run_episode(&ep, &scene).unwrap_err();
        assert!(matches!(err.source, Error::Setup(_)));
        assert_eq!(err.partial.terminal.stop_reason, StopReason::Error);
    }

    #[test]
    fn llm_modes_need_a_client() {
        let cfg = RunConfig {
            agent: AgentKind::Llm,
            ..small_cfg()
        };
        assert!(Pipeline::with_chat(cfg, None).is_err());
    }
}
