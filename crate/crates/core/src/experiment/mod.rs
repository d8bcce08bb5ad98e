//! Experiment plumbing behind the `follownet` binary: a TOML experiment
//! config and one function per subcommand. Every command is a pure function
//! of its inputs, flags and seed.

mod commands;

pub use commands::{
    gen_instr, gen_world, load_houses, play, run_eval, run_train, EvalOptions, GenInstrOptions, GenWorldOptions,
    PlayOptions, PlayOutput, SplitMode, TrainOptions,
};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dqn::{TrainError, TrainingConfig};
use crate::eval::EvalError;
use crate::lang::LangError;
use crate::model::{ArchitectureConfig, ModelError};
use crate::world::{RenderConfig, WorldError};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("checkpoint does not match the configured architecture: {0}")]
    Mismatch(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl ExperimentError {
    /// Stable machine-readable category for the command line.
    pub fn category(&self) -> &'static str {
        match self {
            ExperimentError::Config(_) => "config",
            ExperimentError::Io(_) => "io",
            ExperimentError::Mismatch(_) => "mismatch",
            ExperimentError::World(WorldError::Generation(_)) | ExperimentError::Lang(LangError::Generation(_)) => {
                "generation"
            }
            ExperimentError::World(WorldError::Io(_)) | ExperimentError::Lang(LangError::Io(_)) => "io",
            ExperimentError::World(_) => "world",
            ExperimentError::Lang(_) => "data",
            ExperimentError::Model(ModelError::Checkpoint(_)) => "checkpoint",
            ExperimentError::Model(_) => "model",
            ExperimentError::Train(TrainError::Aborted { .. }) => "aborted",
            ExperimentError::Train(_) => "train",
            ExperimentError::Eval(_) => "eval",
        }
    }

    /// Process exit code; distinct per category.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 2,
            "io" => 3,
            "mismatch" => 4,
            "generation" => 5,
            "world" | "data" => 6,
            "checkpoint" | "model" => 7,
            "aborted" | "train" => 8,
            _ => 9,
        }
    }
}

/// Everything a run depends on. Relative paths resolve against the config
/// file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub houses: Vec<PathBuf>,
    pub dataset: PathBuf,
    /// Overrides `architecture.attention`.
    pub attention: bool,
    pub architecture: ArchitectureConfig,
    pub training: TrainingConfig,
    /// Field of view and depth range; image size comes from `architecture`.
    pub render: RenderConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("runs/default"),
            houses: vec![PathBuf::from("houses/house_a.house"), PathBuf::from("houses/house_b.house")],
            dataset: PathBuf::from("data/instructions.jsonl"),
            attention: true,
            architecture: ArchitectureConfig::default(),
            training: TrainingConfig::default(),
            render: RenderConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string().replace('\n', " ")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Reads a config and resolves its relative paths against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.out);
        fix(&mut cfg.dataset);
        cfg.houses.iter_mut().for_each(fix);
        Ok(cfg)
    }

    /// The architecture with the top-level attention flag applied.
    pub fn effective_architecture(&self) -> ArchitectureConfig {
        ArchitectureConfig { attention: self.attention, ..self.architecture.clone() }
    }

    /// Render settings sized to the network input.
    pub fn effective_render(&self) -> RenderConfig {
        RenderConfig { width: self.architecture.image_width, height: self.architecture.image_height, ..self.render }
    }

    /// Training settings with the experiment seed applied.
    pub fn effective_training(&self) -> TrainingConfig {
        TrainingConfig { rng_seed: self.seed, ..self.training.clone() }
    }

    /// Checks that every input file exists.
    pub fn require_inputs(&self, dataset: bool) -> Result<(), ExperimentError> {
        let mut missing: Vec<String> =
            self.houses.iter().filter(|p| !p.is_file()).map(|p| p.display().to_string()).collect();
        if dataset && !self.dataset.is_file() {
            missing.push(self.dataset.display().to_string());
        }
        if self.houses.is_empty() {
            return Err(ExperimentError::Config("no house files configured".into()));
        }
        if missing.is_empty() {
            Ok(())
        } else {
            Err(ExperimentError::Config(format!("missing input files: {}", missing.join(", "))))
        }
    }
}

/// Field-by-field differences between two architectures, `name: a != b`.
pub fn architecture_diff(a: &ArchitectureConfig, b: &ArchitectureConfig) -> Vec<String> {
    let (serde_json::Value::Object(x), serde_json::Value::Object(y)) =
        (serde_json::to_value(a).expect("serializes"), serde_json::to_value(b).expect("serializes"))
    else {
        unreachable!("architecture serializes to an object")
    };
    x.iter()
        .filter_map(|(k, v)| {
            let w = y.get(k).unwrap_or(&serde_json::Value::Null);
            (v != w).then(|| format!("{k}: {v} != {w}"))
        })
        .collect()
}
