use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use follownet::experiment::{
    gen_instr, gen_world, play, run_eval, run_train, EvalOptions, ExperimentConfig, ExperimentError, GenInstrOptions,
    GenWorldOptions, PlayOptions, SplitMode, TrainOptions,
};
use follownet::lang::Split;

#[derive(Parser)]
#[command(name = "follownet", version, about = "Instruction-following navigation experiments")]
struct Cli {
    /// Experiment config (TOML). Defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a multi-room house file.
    GenWorld(GenWorldArgs),
    /// Generate an instruction dataset over the configured houses.
    GenInstr(GenInstrArgs),
    /// Train a model and write a checkpoint and training log.
    Train(TrainArgs),
    /// Evaluate a checkpoint and write a report bundle.
    Eval(EvalArgs),
    /// Roll one greedy episode and write frames, trajectory and attention.
    Play(PlayArgs),
}

#[derive(Args)]
struct GenWorldArgs {
    #[arg(long, default_value_t = 23)]
    width: usize,
    #[arg(long, default_value_t = 18)]
    height: usize,
    #[arg(long, default_value = "house")]
    name: String,
    #[arg(long, default_value_t = 4)]
    min_objects: usize,
    #[arg(long, default_value_t = 8)]
    max_objects: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Auto,
    Train,
    Holdout,
}

#[derive(Args)]
struct GenInstrArgs {
    #[arg(long, default_value_t = 7)]
    tasks: usize,
    #[arg(long, default_value_t = 3)]
    per_task: usize,
    /// Defaults to 1, or to --max-waypoints with `--split holdout`.
    #[arg(long)]
    min_waypoints: Option<usize>,
    #[arg(long, default_value_t = 5)]
    max_waypoints: usize,
    #[arg(long, value_enum, default_value = "auto")]
    split: SplitArg,
    #[arg(long, default_value_t = 0.2)]
    holdout_fraction: f64,
    /// Keep the records already in the dataset file.
    #[arg(long)]
    append: bool,
    /// Dataset file; overrides the config.
    #[arg(long)]
    dataset: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    total_steps: Option<usize>,
    /// Train the baseline without attention.
    #[arg(long)]
    no_attention: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long)]
    no_attention: bool,
    /// Evaluate on the train split instead of the hold-out split.
    #[arg(long)]
    train_split: bool,
}

#[derive(Args)]
struct PlayArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Index into the hold-out instructions.
    #[arg(long, default_value_t = 0)]
    instruction: usize,
    #[arg(long)]
    no_attention: bool,
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    match cli.command {
        Command::GenWorld(a) => {
            let opts = GenWorldOptions {
                name: a.name,
                width: a.width,
                height: a.height,
                min_objects: a.min_objects,
                max_objects: a.max_objects,
            };
            println!("{}", gen_world(&cfg, &opts)?.display());
        }
        Command::GenInstr(a) => {
            if let Some(d) = a.dataset {
                cfg.dataset = d;
            }
            let split = match a.split {
                SplitArg::Auto => SplitMode::Auto,
                SplitArg::Train => SplitMode::Train,
                SplitArg::Holdout => SplitMode::Holdout,
            };
            let min = a.min_waypoints.unwrap_or(if split == SplitMode::Holdout { a.max_waypoints } else { 1 });
            let opts = GenInstrOptions {
                tasks: a.tasks,
                per_task: a.per_task,
                min_waypoints: min,
                max_waypoints: a.max_waypoints,
                split,
                holdout_fraction: a.holdout_fraction,
                append: a.append,
            };
            let ds = gen_instr(&cfg, &opts)?;
            println!(
                "{}: {} records ({} train, {} hold-out)",
                cfg.dataset.display(),
                ds.len(),
                ds.indices(Split::Train).len(),
                ds.indices(Split::Holdout).len()
            );
        }
        Command::Train(a) => {
            let log = run_train(&cfg, &TrainOptions { total_steps: a.total_steps, no_attention: a.no_attention })?;
            if let Some(last) = log.rows.last() {
                println!(
                    "step {}: return {:.4}, full {:.2}, partial {:.2}, none {:.2}",
                    last.step, last.avg_return, last.full, last.partial, last.none
                );
            }
            println!("{}", cfg.out.display());
        }
        Command::Eval(a) => {
            let opts = EvalOptions {
                checkpoint: a.checkpoint,
                episodes: a.episodes,
                no_attention: a.no_attention,
                split: if a.train_split { Split::Train } else { Split::Holdout },
            };
            let (_, s) = run_eval(&cfg, &opts)?;
            println!(
                "{} episodes: return {:.4}, full {:.2}, partial {:.2}, none {:.2}",
                s.episodes, s.avg_return, s.full, s.partial, s.none
            );
        }
        Command::Play(a) => {
            let out = play(
                &cfg,
                &PlayOptions { checkpoint: a.checkpoint, instruction: a.instruction, no_attention: a.no_attention },
            )?;
            println!("{} steps, {} -> {}", out.report.steps_taken, out.report.success.label(), out.dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.category(), e.to_string().replace('\n', " "));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
