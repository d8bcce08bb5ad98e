//! Trains briefly on the smoke fixture, evaluates, and writes the report
//! bundle (summary, per-episode rows, per-word rates, histogram and one
//! attention heatmap per episode) into a directory.
//!
//! cargo run --release --example evaluate_report -- [out_dir]

use std::path::{Path, PathBuf};

use follownet::dqn::{train, TrainingConfig};
use follownet::eval::{evaluate, summarize, waypoint_histogram, write_report_bundle, EvalPlan, Policy, WaypointHistogram};
use follownet::lang::{Houses, InstructionDataset, Split};
use follownet::model::{ArchitectureConfig, FollowNet};
use follownet::world::{EnvConfig, HouseMap, RenderConfig};

fn main() {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs/example_report"));
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
        total_env_steps: 4_000,
        warmup_steps: 500,
        target_sync_every: 500,
        epsilon_decay_fraction: 0.3,
        max_episode_steps: 30,
        eval_every: 4_000,
        rng_seed: 3,
        ..Default::default()
    };
    let params = train(&net, &dataset, &houses, &render, &cfg, None).unwrap().params;

    let plan = EvalPlan { split: Split::Holdout, episodes: 20, seed: 9, policy: Policy::Greedy, parallel: true };
    let env = EnvConfig { render, max_episode_steps: 30 };
    let reports = evaluate(&net, &params, &dataset, &houses, &plan, &env).unwrap();
    let s = summarize(&reports).unwrap();
    println!("full {:.2}  partial {:.2}  none {:.2}  return {:.3}", s.full, s.partial, s.none, s.avg_return);
    let h = waypoint_histogram(&reports).unwrap();
    for (label, share) in WaypointHistogram::LABELS.iter().zip(h.shares()) {
        println!("  waypoints {label:>9}: {share:.2}");
    }
    write_report_bundle(&out, &reports, &dataset).unwrap();
    println!("report written to {}", out.display());
}
