//! Trains the attention network on the one-room smoke fixture and prints
//! the training log.
//!
//! cargo run --release --example train_smoke -- [env_steps]

use std::path::Path;

use follownet::dqn::{train, TrainingConfig};
use follownet::lang::{Houses, InstructionDataset};
use follownet::model::{ArchitectureConfig, FollowNet};
use follownet::world::{HouseMap, RenderConfig};

fn main() {
    let steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10_000);
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let house = HouseMap::load(&dir.join("smoke.house")).unwrap();
    let houses: Houses = [(house.name().to_string(), house)].into();
    let dataset = InstructionDataset::load(&dir.join("smoke.jsonl"), &houses).unwrap();

    let arch = ArchitectureConfig { image_height: 6, image_width: 8, num_classes: 5, vocab_size: 8, ..Default::default() };
    let net = FollowNet::new(arch).unwrap();
    let render = RenderConfig { width: 8, height: 6, max_distance: 4.0, ..Default::default() };
    let cfg = TrainingConfig {
        learning_rate: 3e-3,
        momentum: 0.9,
        total_env_steps: steps,
        warmup_steps: 500,
        target_sync_every: 500,
        epsilon_decay_fraction: 0.3,
        max_episode_steps: 30,
        eval_every: (steps / 5).max(1),
        rng_seed: 1,
        ..Default::default()
    };
    let out = train(&net, &dataset, &houses, &render, &cfg, None).unwrap();
    print!("{}", out.log.to_csv());
}
