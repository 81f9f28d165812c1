//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 runtime
//! error.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::affordance::{sample_candidates, AffordanceProvider, AffordanceSource, OracleAffordance, ViewGeometry, ViewKey, ViewRequest};
use crate::annotate::{draw_paths, draw_points, topdown_plot};
use crate::error::{Error, Result};
use crate::geometry::{view_pose, Pose2D, ViewDirection};
use crate::lowplan::{merge, plan_view_scripted, ViewObservation};
use crate::metrics::{aggregate, evaluate_with_field, Report};
use crate::runner::{load_scenes, AgentKind, Episode, Pipeline, PlannerKind, RunConfig, TrajectoryLog};
use crate::scene::{generate_suite, render, EpisodeGenConfig, GeneratorConfig, NavGrid, SceneSpec};

#[derive(Debug, Parser)]
#[command(name = "affordnav", version, about = "Affordance-driven instruction-following navigation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate seeded multi-room scenes and an episode list over them.
    GenScenes(GenScenesArgs),
    /// Run episodes and write one JSONL trajectory log per episode.
    Run(RunArgs),
    /// Score trajectory logs.
    Eval(EvalArgs),
    /// Render the four views at one pose with candidate points and paths.
    Annotate(AnnotateArgs),
    /// Re-render a logged trajectory: per-step path overlays and a top-down plot.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct GenScenesArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long, default_value_t = 3)]
    pub episodes_per_scene: usize,
    #[arg(long, default_value_t = 4)]
    pub rooms: usize,
    #[arg(long, default_value_t = 10.0)]
    pub size: f64,
    #[arg(long, default_value_t = 4.0)]
    pub min_geodesic: f64,
    #[arg(long, default_value_t = 10.0)]
    pub max_geodesic: f64,
}

/// Flags overriding the config file.
#[derive(Debug, Args, Default)]
pub struct ConfigArgs {
    /// TOML run configuration; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_planner)]
    pub planner: Option<PlannerKind>,
    #[arg(long, value_parser = parse_agent)]
    pub agent: Option<AgentKind>,
    #[arg(long, value_parser = parse_affordance)]
    pub affordance: Option<AffordanceSource>,
    #[arg(long)]
    pub mask_dir: Option<PathBuf>,
    #[arg(long)]
    pub max_decisions: Option<usize>,
    #[arg(long)]
    pub max_actions: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long)]
    pub success_radius: Option<f64>,
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Withhold the instruction from the low-level planner.
    #[arg(long)]
    pub no_instruction: bool,
}

fn parse_planner(s: &str) -> std::result::Result<PlannerKind, String> {
    match s {
        "scripted" => Ok(PlannerKind::Scripted),
        "llm" => Ok(PlannerKind::Llm),
        _ => Err(format!("unknown planner {s:?} (scripted | llm)")),
    }
}

fn parse_agent(s: &str) -> std::result::Result<AgentKind, String> {
    match s {
        "oracle" => Ok(AgentKind::Oracle),
        "llm" => Ok(AgentKind::Llm),
        _ => Err(format!("unknown agent {s:?} (oracle | llm)")),
    }
}

fn parse_affordance(s: &str) -> std::result::Result<AffordanceSource, String> {
    match s {
        "oracle" => Ok(AffordanceSource::Oracle),
        "file" => Ok(AffordanceSource::File),
        _ => Err(format!("unknown affordance source {s:?} (oracle | file)")),
    }
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = &self.$flag { cfg.$($field).+ = v.clone().into(); })*
            };
        }
        set!(
            planner => planner,
            agent => agent,
            affordance => affordance,
            max_decisions => max_decisions,
            max_actions => max_actions,
            seed => seed,
            parallelism => parallelism,
            success_radius => success_radius_m,
            base_url => endpoint.base_url,
            model => endpoint.model,
        );
        if let Some(d) = &self.mask_dir {
            cfg.mask_dir = Some(d.clone());
        }
        if self.no_instruction {
            cfg.include_instruction = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON list of episodes.
    #[arg(long)]
    pub episodes: PathBuf,
    /// Directory of scene JSON files (defaults to the episode file's directory).
    #[arg(long)]
    pub scenes: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Save raw and annotated views of every step under `<out>/images`.
    #[arg(long)]
    pub save_images: bool,
    /// Write model request/response transcripts (images redacted) to this JSONL file.
    #[arg(long)]
    pub log_llm: Option<PathBuf>,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub episodes: PathBuf,
    #[arg(long)]
    pub scenes: Option<PathBuf>,
    /// Directory holding `<episode>.jsonl` logs and the run's `config.json`.
    #[arg(long)]
    pub logs: PathBuf,
    #[arg(long)]
    pub success_radius: Option<f64>,
    /// Report JSON path (default `<logs>/report.json`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub x: f64,
    #[arg(long)]
    pub y: f64,
    #[arg(long, default_value_t = 0.0)]
    pub heading_deg: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long)]
    pub episodes: PathBuf,
    #[arg(long)]
    pub scenes: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Top-down plot scale.
    #[arg(long, default_value_t = 40.0)]
    pub px_per_m: f64,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn scenes_dir(explicit: &Option<PathBuf>, episodes: &Path) -> PathBuf {
    explicit.clone().unwrap_or_else(|| {
        episodes
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
    })
}

fn gen_scenes(a: &GenScenesArgs) -> Result<()> {
    mkdir(&a.out)?;
    let gcfg = GeneratorConfig {
        rooms: a.rooms,
        size_m: a.size,
        ..Default::default()
    };
    let ecfg = EpisodeGenConfig {
        count: a.episodes_per_scene,
        min_geodesic_m: a.min_geodesic,
        max_geodesic_m: a.max_geodesic,
    };
    let (scenes, episodes) = generate_suite(a.seed, a.count, &gcfg, &ecfg, RunConfig::default().body)?;
    for scene in &scenes {
        scene.save(&a.out.join(format!("{}.json", scene.id)))?;
    }
    Episode::save_list(&episodes, &a.out.join("episodes.json"))?;
    eprintln!("wrote {} scenes and {} episodes to {}", a.count, episodes.len(), a.out.display());
    Ok(())
}

fn run(a: &RunArgs) -> Result<bool> {
    let cfg = a.cfg.resolve()?;
    let episodes = Episode::load_list(&a.episodes)?;
    let scenes = load_scenes(&scenes_dir(&a.scenes, &a.episodes))?;
    mkdir(&a.out)?;
    write(&a.out.join("config.json"), &(cfg.to_json() + "\n"))?;
    write(&a.out.join("config.sha256"), &(cfg.digest() + "\n"))?;
    let mut pipeline = Pipeline::from_config(cfg.clone(), a.log_llm.as_deref())?;
    if a.save_images {
        pipeline = pipeline.with_image_dir(a.out.join("images"));
    }
    let results = pipeline.run_batch(&episodes, &scenes, cfg.parallelism);
    let mut all_ok = true;
    for r in results {
        let log = match r {
            Ok(log) => log,
            Err(e) => {
                eprintln!("error: {e}");
                all_ok = false;
                *e.partial
            }
        };
        log.write(&a.out.join(TrajectoryLog::file_name(log.episode_id())))?;
    }
    eprintln!("wrote {} logs to {}", episodes.len(), a.out.display());
    Ok(all_ok)
}

fn eval(a: &EvalArgs) -> Result<Report> {
    let episodes = Episode::load_list(&a.episodes)?;
    let scenes = load_scenes(&scenes_dir(&a.scenes, &a.episodes))?;
    let cfg_path = a.logs.join("config.json");
    let (cfg, digest) = if cfg_path.exists() {
        let text = std::fs::read_to_string(&cfg_path).map_err(|e| Error::io(&cfg_path, e))?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        let digest = cfg.digest();
        (cfg, Some(digest))
    } else {
        (RunConfig::default(), None)
    };
    let radius = a.success_radius.unwrap_or(cfg.success_radius_m);
    let mut results = Vec::new();
    for ep in &episodes {
        let path = a.logs.join(TrajectoryLog::file_name(&ep.id));
        if !path.exists() {
            log::warn!("no log for episode {}", ep.id);
            continue;
        }
        let log = TrajectoryLog::read(&path)?;
        let scene = scenes
            .get(&ep.scene_id)
            .ok_or_else(|| Error::Setup(format!("unknown scene {}", ep.scene_id)))?;
        let field = NavGrid::new(scene, cfg.body).distance_field(ep.goal[0], ep.goal[1])?;
        results.push(evaluate_with_field(&log, ep, &field, radius)?);
    }
    let report = aggregate(&results, radius, digest)?;
    let out = a.out.clone().unwrap_or_else(|| a.logs.join("report.json"));
    write(&out, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    let per_episode = serde_json::to_string_pretty(&results)? + "\n";
    write(&out.with_extension("episodes.json"), &per_episode)?;
    print!("{}", report.table());
    Ok(report)
}

fn annotate(a: &AnnotateArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let scene = SceneSpec::load(&a.scene)?;
    let nav = NavGrid::new(&scene, cfg.body);
    let intr = cfg.intrinsics()?;
    let pose = Pose2D::new(a.x, a.y, a.heading_deg.to_radians());
    scene.check_inside(pose.x, pose.y)?;
    mkdir(&a.out)?;
    let mut views = Vec::new();
    for dir in ViewDirection::ALL {
        let vp = view_pose(pose, dir);
        let (rgb, depth) = render(&scene, vp, &intr, cfg.cam_height_m)?;
        let geom = ViewGeometry {
            intr: &intr,
            view_pose: vp,
            cam_height: cfg.cam_height_m,
            dir,
        };
        let key = ViewKey {
            episode: "annotate",
            step: 0,
            dir,
        };
        let req = ViewRequest {
            key,
            scene: &scene,
            nav: &nav,
            geom,
            depth: &depth,
        };
        let mask = OracleAffordance.mask(&req)?;
        let candidates = sample_candidates(&mask, &depth, geom, &cfg.sampling)?;
        rgb.save(a.out.join(key.view_file_name()))
            .map_err(|source| Error::Image { path: a.out.join(key.view_file_name()), source })?;
        mask.save_png(&a.out.join(key.mask_file_name()))?;
        let points = draw_points(&rgb, &candidates);
        let p = a.out.join(format!("{}.points.png", key.stem()));
        points.image.save(&p).map_err(|source| Error::Image { path: p.clone(), source })?;
        views.push(ViewObservation {
            dir,
            view_pose: vp,
            rgb,
            depth,
            mask,
            candidates,
        });
    }
    let views: [ViewObservation; 4] = views.try_into().expect("four views");
    let per_view = views
        .each_ref()
        .map(|v| plan_view_scripted(&v.candidates, &v.mask, &intr, v.dir, None, &cfg.scripted));
    let set = merge(&per_view, &views, &intr, cfg.cam_height_m)?;
    let annotated = draw_paths(&views.each_ref().map(|v| v.rgb.clone()), &set)?;
    for (dir, img) in ViewDirection::ALL.iter().zip(&annotated) {
        let p = a.out.join(format!("annotate_0_{dir}.paths.png"));
        img.image.save(&p).map_err(|source| Error::Image { path: p.clone(), source })?;
    }
    write(&a.out.join("candidates.json"), &(serde_json::to_string_pretty(&set)? + "\n"))?;
    eprintln!("{} candidate paths written to {}", set.len(), a.out.display());
    Ok(())
}

fn replay(a: &ReplayArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let log = TrajectoryLog::read(&a.log)?;
    let episodes = Episode::load_list(&a.episodes)?;
    let ep = episodes
        .iter()
        .find(|e| e.id == log.episode_id())
        .ok_or_else(|| Error::Setup(format!("episode {} not in {}", log.episode_id(), a.episodes.display())))?;
    let scenes: HashMap<String, SceneSpec> = load_scenes(&scenes_dir(&a.scenes, &a.episodes))?;
    let scene = scenes
        .get(&ep.scene_id)
        .ok_or_else(|| Error::Setup(format!("unknown scene {}", ep.scene_id)))?;
    let intr = cfg.intrinsics()?;
    mkdir(&a.out)?;
    for step in &log.steps {
        let mut rgbs = Vec::with_capacity(4);
        for dir in ViewDirection::ALL {
            rgbs.push(render(scene, view_pose(step.pose, dir), &intr, cfg.cam_height_m)?.0);
        }
        let rgbs: [image::RgbImage; 4] = rgbs.try_into().expect("four views");
        let annotated = draw_paths(&rgbs, &step.candidates)?;
        for (dir, img) in ViewDirection::ALL.iter().zip(&annotated) {
            let p = a.out.join(format!("{}_{}_{dir}.replay.png", ep.id, step.step));
            img.image.save(&p).map_err(|source| Error::Image { path: p.clone(), source })?;
        }
    }
    let plot = topdown_plot(scene, &log.full_trace(), ep.goal_point(), cfg.success_radius_m, a.px_per_m);
    let p = a.out.join(format!("{}_topdown.png", ep.id));
    plot.save(&p).map_err(|source| Error::Image { path: p.clone(), source })?;
    eprintln!("replayed {} steps into {}", log.steps.len(), a.out.display());
    Ok(())
}

/// Runs a parsed command; `Ok(false)` means some episodes failed.
pub fn dispatch(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::GenScenes(a) => gen_scenes(a).map(|_| true),
        Command::Run(a) => run(a),
        Command::Eval(a) => eval(a).map(|_| true),
        Command::Annotate(a) => annotate(a).map(|_| true),
        Command::Replay(a) => replay(a).map(|_| true),
    }
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(Error::Config(msg)) => {
            eprintln!("error: invalid config: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    main_with_args(std::env::args_os())
}
