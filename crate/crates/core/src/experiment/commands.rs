use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore};

use super::{architecture_diff, ExperimentConfig, ExperimentError};
use crate::autodiff::ParameterSet;
use crate::dqn::{train, TrainError, TrainingLog};
use crate::eval::{
    eval_indices, evaluate, export_attention_heatmap, run_episode, summarize, token_strings, write_report_bundle,
    EpisodeReport, EvalPlan, EvalSummary, Policy,
};
use crate::lang::{
    generate_instruction, natural_waypoints, sample_waypoints, split_dataset, split_words, Houses, Instruction,
    InstructionDataset, LangError, Split,
};
use crate::model::{load_checkpoint, save_checkpoint, ArchitectureConfig, FollowNet};
use crate::seed;
use crate::world::{
    generate_house, render_observation, EnvConfig, GenerateConfig, HouseMap, Observation, RegionKind,
};

fn io_err(path: &Path, e: std::io::Error) -> ExperimentError {
    ExperimentError::Io(format!("{}: {e}", path.display()))
}

fn create_dir(path: &Path) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

/// Loads house files keyed by house name.
pub fn load_houses(paths: &[PathBuf]) -> Result<Houses, ExperimentError> {
    let mut houses = Houses::new();
    for p in paths {
        let h = HouseMap::load(p)?;
        let name = h.name().to_string();
        if houses.insert(name.clone(), h).is_some() {
            return Err(ExperimentError::Config(format!("house name `{name}` appears in more than one file")));
        }
    }
    Ok(houses)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenWorldOptions {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub min_objects: usize,
    pub max_objects: usize,
}

/// Writes `<out>/<name>.house` and returns its path.
pub fn gen_world(cfg: &ExperimentConfig, opts: &GenWorldOptions) -> Result<PathBuf, ExperimentError> {
    let gc = GenerateConfig {
        min_objects: opts.min_objects,
        max_objects: opts.max_objects,
        ..GenerateConfig::new(opts.name.clone(), opts.width, opts.height, cfg.seed)
    };
    let house = generate_house(&gc)?;
    create_dir(&cfg.out)?;
    let path = cfg.out.join(format!("{}.house", opts.name));
    house.save(&path)?;
    Ok(path)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitMode {
    /// Generate train records, then carve a hold-out split from them.
    Auto,
    Train,
    Holdout,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenInstrOptions {
    pub tasks: usize,
    pub per_task: usize,
    pub min_waypoints: usize,
    pub max_waypoints: usize,
    pub split: SplitMode,
    pub holdout_fraction: f64,
    /// Keep existing records in the dataset file and add the new ones.
    pub append: bool,
}

/// A start room and goal region in one house.
struct Task<'a> {
    house: &'a HouseMap,
    start: String,
    goal: String,
    natural: usize,
}

fn sample_task<'a>(houses: &'a Houses, min_waypoints: usize, rng: &mut impl Rng) -> Result<Task<'a>, ExperimentError> {
    let list: Vec<&HouseMap> = houses.values().collect();
    for _ in 0..1000 {
        let house = list[rng.gen_range(0..list.len())];
        let rooms: Vec<&str> = house
            .regions()
            .iter()
            .filter(|r| r.kind == RegionKind::Room && !house.is_door_region(r))
            .map(|r| r.name.as_str())
            .collect();
        if rooms.is_empty() {
            continue;
        }
        let start = rooms[rng.gen_range(0..rooms.len())];
        let goals: Vec<&str> = house
            .regions()
            .iter()
            .filter(|r| r.name != start && !house.is_door_region(r))
            .map(|r| r.name.as_str())
            .collect();
        if goals.is_empty() {
            continue;
        }
        let goal = goals[rng.gen_range(0..goals.len())];
        let Ok(natural) = natural_waypoints(house, start, goal) else { continue };
        if natural.len() + 1 < min_waypoints {
            continue;
        }
        return Ok(Task { house, start: start.into(), goal: goal.into(), natural: natural.len() });
    }
    Err(LangError::Generation(format!("no task admits {min_waypoints} waypoints in the configured houses")).into())
}

/// `per_task` instructions for one task, or `None` when a hold-out
/// instruction cannot avoid words missing from `train_words` or texts
/// already in `train_texts`.
fn phrase_task(
    task: &Task<'_>,
    opts: &GenInstrOptions,
    train_words: &BTreeSet<String>,
    train_texts: &BTreeSet<&str>,
    rng: &mut impl RngCore,
) -> Result<Option<Vec<Instruction>>, ExperimentError> {
    let holdout = opts.split == SplitMode::Holdout;
    let max = opts.max_waypoints.min(task.natural + 1);
    let mut out = Vec::with_capacity(opts.per_task);
    for _ in 0..opts.per_task {
        let count = rng.gen_range(opts.min_waypoints..=max);
        let path = sample_waypoints(task.house, &task.start, &task.goal, count, rng)?;
        let mut found = None;
        for _ in 0..20 {
            let candidate = generate_instruction(task.house, &task.start, &task.goal, &path, rng.next_u64())?;
            let unseen = !train_texts.contains(candidate.text.as_str());
            if !holdout || (unseen && split_words(&candidate.text).iter().all(|w| train_words.contains(w))) {
                found = Some(candidate);
                break;
            }
        }
        let Some(mut ins) = found else { return Ok(None) };
        ins.split = if holdout { Split::Holdout } else { Split::Train };
        out.push(ins);
    }
    Ok(Some(out))
}

/// Samples `tasks` start/goal pairs and `per_task` instructions for each,
/// writes the dataset to `cfg.dataset` and returns it.
pub fn gen_instr(cfg: &ExperimentConfig, opts: &GenInstrOptions) -> Result<InstructionDataset, ExperimentError> {
    if opts.min_waypoints == 0 || opts.min_waypoints > opts.max_waypoints {
        return Err(ExperimentError::Config("need 1 <= min-waypoints <= max-waypoints".into()));
    }
    if opts.tasks == 0 || opts.per_task == 0 {
        return Err(ExperimentError::Config("tasks and per-task must be positive".into()));
    }
    cfg.require_inputs(false)?;
    let houses = load_houses(&cfg.houses)?;
    let existing: Vec<Instruction> = if opts.append && cfg.dataset.is_file() {
        InstructionDataset::load(&cfg.dataset, &houses)?.instructions().to_vec()
    } else {
        Vec::new()
    };
    let train_words: BTreeSet<String> =
        existing.iter().filter(|i| i.split == Split::Train).flat_map(|i| split_words(&i.text)).collect();
    let train_texts: BTreeSet<&str> =
        existing.iter().filter(|i| i.split == Split::Train).map(|i| i.text.as_str()).collect();
    if opts.split == SplitMode::Holdout && train_words.is_empty() {
        return Err(ExperimentError::Config("hold-out records need existing train records; use --append".into()));
    }

    let mut rng = seed::substream(cfg.seed, "gen-instr");
    let mut fresh = Vec::with_capacity(opts.tasks * opts.per_task);
    for _ in 0..opts.tasks {
        let mut batch = None;
        for _ in 0..200 {
            let task = sample_task(&houses, opts.min_waypoints, &mut rng)?;
            batch = phrase_task(&task, opts, &train_words, &train_texts, &mut rng)?;
            if batch.is_some() {
                break;
            }
        }
        let batch = batch.ok_or_else(|| {
            LangError::Generation("could not phrase hold-out routes with the train vocabulary only".into())
        })?;
        fresh.extend(batch);
    }
    let fresh = if opts.split == SplitMode::Auto {
        let ds = InstructionDataset::new(fresh);
        split_dataset(&ds, opts.holdout_fraction, seed::derive(cfg.seed, "split"))?.instructions().to_vec()
    } else {
        fresh
    };
    let all = InstructionDataset::new(existing.into_iter().chain(fresh).collect());
    all.validate(&houses)?;
    if let Some(parent) = cfg.dataset.parent() {
        create_dir(parent)?;
    }
    all.save(&cfg.dataset)?;
    Ok(all)
}

/// Loads houses and the dataset and checks they fit `arch`.
fn load_inputs(cfg: &ExperimentConfig, arch: &ArchitectureConfig) -> Result<(Houses, InstructionDataset), ExperimentError> {
    cfg.require_inputs(true)?;
    let houses = load_houses(&cfg.houses)?;
    let dataset = InstructionDataset::load(&cfg.dataset, &houses)?;
    if dataset.vocabulary().len() > arch.vocab_size {
        return Err(ExperimentError::Config(format!(
            "dataset vocabulary has {} entries but architecture.vocab_size is {}",
            dataset.vocabulary().len(),
            arch.vocab_size
        )));
    }
    for h in houses.values() {
        if h.num_classes() != arch.num_classes {
            return Err(ExperimentError::Config(format!(
                "house `{}` has {} classes but architecture.num_classes is {}",
                h.name(),
                h.num_classes(),
                arch.num_classes
            )));
        }
    }
    Ok((houses, dataset))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainOptions {
    pub total_steps: Option<usize>,
    pub no_attention: bool,
}

pub const CHECKPOINT_FILE: &str = "checkpoint.fnet";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";

fn arch_for(cfg: &ExperimentConfig, no_attention: bool) -> ArchitectureConfig {
    let mut arch = cfg.effective_architecture();
    if no_attention {
        arch.attention = false;
    }
    arch
}

/// Trains and writes `checkpoint.fnet`, `train_log.csv` and the resolved
/// `config.toml` under `cfg.out`. An aborted run still writes the last good
/// parameters before reporting the error.
pub fn run_train(cfg: &ExperimentConfig, opts: &TrainOptions) -> Result<TrainingLog, ExperimentError> {
    let arch = arch_for(cfg, opts.no_attention);
    let (houses, dataset) = load_inputs(cfg, &arch)?;
    let mut training = cfg.effective_training();
    if let Some(n) = opts.total_steps {
        training.total_env_steps = n;
    }
    let net = FollowNet::new(arch.clone())?;
    create_dir(&cfg.out)?;
    let resolved = ExperimentConfig { attention: arch.attention, training: training.clone(), ..cfg.clone() };
    let cfg_path = cfg.out.join("config.toml");
    std::fs::write(&cfg_path, resolved.to_toml()).map_err(|e| io_err(&cfg_path, e))?;
    let ckpt = cfg.out.join(CHECKPOINT_FILE);
    match train(&net, &dataset, &houses, &cfg.effective_render(), &training, None) {
        Ok(outcome) => {
            save_checkpoint(&ckpt, &arch, &outcome.params)?;
            outcome.log.write(&cfg.out.join(TRAIN_LOG_FILE))?;
            Ok(outcome.log)
        }
        Err(TrainError::Aborted { step, last_good, source }) => {
            save_checkpoint(&ckpt, &arch, &last_good)?;
            Err(TrainError::Aborted { step, last_good, source }.into())
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    /// Defaults to `<out>/checkpoint.fnet`.
    pub checkpoint: Option<PathBuf>,
    pub episodes: usize,
    pub no_attention: bool,
    pub split: Split,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { checkpoint: None, episodes: 100, no_attention: false, split: Split::Holdout }
    }
}

/// Loads a checkpoint and refuses it unless its architecture equals the
/// configured one.
fn load_matching(
    cfg: &ExperimentConfig,
    checkpoint: Option<&Path>,
    no_attention: bool,
) -> Result<(FollowNet, ParameterSet), ExperimentError> {
    let path = checkpoint.map(Path::to_path_buf).unwrap_or_else(|| cfg.out.join(CHECKPOINT_FILE));
    let (stored, params) = load_checkpoint(&path)?;
    let want = arch_for(cfg, no_attention);
    let diff = architecture_diff(&want, &stored);
    if !diff.is_empty() {
        return Err(ExperimentError::Mismatch(format!("configured vs checkpoint: {}", diff.join("; "))));
    }
    Ok((FollowNet::new(stored)?, params))
}

fn eval_env(cfg: &ExperimentConfig) -> EnvConfig {
    EnvConfig { render: cfg.effective_render(), max_episode_steps: cfg.training.max_episode_steps }
}

/// Greedy evaluation written as a report bundle under `<out>/eval`.
pub fn run_eval(cfg: &ExperimentConfig, opts: &EvalOptions) -> Result<(Vec<EpisodeReport>, EvalSummary), ExperimentError> {
    let (net, params) = load_matching(cfg, opts.checkpoint.as_deref(), opts.no_attention)?;
    let (houses, dataset) = load_inputs(cfg, net.config())?;
    let plan = EvalPlan {
        split: opts.split,
        episodes: opts.episodes,
        seed: seed::derive(cfg.seed, seed::EVAL),
        policy: Policy::Greedy,
        parallel: cfg.training.parallel,
    };
    let reports = evaluate(&net, &params, &dataset, &houses, &plan, &eval_env(cfg))?;
    let summary = summarize(&reports)?;
    write_report_bundle(&cfg.out.join("eval"), &reports, &dataset)?;
    Ok((reports, summary))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlayOptions {
    pub checkpoint: Option<PathBuf>,
    /// Position within the hold-out instructions (train when none).
    pub instruction: usize,
    pub no_attention: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlayOutput {
    pub report: EpisodeReport,
    pub dir: PathBuf,
}

/// Semantic labels on the left, depth on the right, one row per pixel row.
pub fn observation_pgm(obs: &Observation) -> String {
    let (w, h) = (obs.width, obs.height);
    let scale = 255.0 / (obs.num_classes.max(2) - 1) as f64;
    let mut s = format!("P2\n{} {h}\n255\n", 2 * w);
    for y in 0..h {
        let row = &obs.classes[y * w..(y + 1) * w];
        let depth = &obs.depth[y * w..(y + 1) * w];
        let cells: Vec<String> = row
            .iter()
            .map(|&c| ((c as f64 * scale).round() as u8).to_string())
            .chain(depth.iter().map(|&d| ((d.clamp(0.0, 1.0) * 255.0).round() as u8).to_string()))
            .collect();
        s.push_str(&cells.join(" "));
        s.push('\n');
    }
    s
}

/// Rolls one greedy episode and writes `frame_<t>.pgm` for each of the
/// `T + 1` observations, `trajectory.csv` and, with attention, the heatmap.
pub fn play(cfg: &ExperimentConfig, opts: &PlayOptions) -> Result<PlayOutput, ExperimentError> {
    let (net, params) = load_matching(cfg, opts.checkpoint.as_deref(), opts.no_attention)?;
    let (houses, dataset) = load_inputs(cfg, net.config())?;
    let indices = eval_indices(&dataset, Split::Holdout);
    let id = *indices.get(opts.instruction).ok_or_else(|| {
        ExperimentError::Config(format!("instruction {} out of range ({} available)", opts.instruction, indices.len()))
    })?;
    let ins = &dataset.instructions()[id];
    let house = &houses[&ins.house];
    let env = eval_env(cfg);
    let episode_seed = seed::derive(cfg.seed, &format!("play/{}", opts.instruction));
    let report = run_episode(&net, &params, house, ins, id, episode_seed, Policy::Greedy, &env)?;

    let dir = cfg.out.join("play");
    create_dir(&dir)?;
    for (t, pose) in report.poses.iter().enumerate() {
        let obs = render_observation(house, pose, ins.tokens.clone(), &env.render);
        let path = dir.join(format!("frame_{t:03}.pgm"));
        std::fs::write(&path, observation_pgm(&obs)).map_err(|e| io_err(&path, e))?;
    }
    let mut csv = String::from("step,x,y,heading\n");
    for (t, p) in report.poses.iter().enumerate() {
        let _ = writeln!(csv, "{t},{},{},{:?}", p.x, p.y, p.heading);
    }
    let path = dir.join("trajectory.csv");
    std::fs::write(&path, csv).map_err(|e| io_err(&path, e))?;
    let info = format!(
        "instruction,{}\nwaypoints,{}\nsuccess,{}\nsteps,{}\nreturn,{}\n",
        ins.text,
        ins.waypoints.join(" > "),
        report.success.label(),
        report.steps_taken,
        report.total_return
    );
    let path = dir.join("episode.txt");
    std::fs::write(&path, info).map_err(|e| io_err(&path, e))?;
    if report.attention.is_some() {
        let tokens = token_strings(&dataset, dataset.vocabulary(), id);
        export_attention_heatmap(&report, &tokens, &dir.join("attention"))?;
    }
    Ok(PlayOutput { report, dir })
}
