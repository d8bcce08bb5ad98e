//! End-to-end runs of the `follownet` binary on the bundled fixtures.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use follownet::lang::{Houses, InstructionDataset, Split};
use follownet::model::{encode_checkpoint, load_checkpoint, FollowNet};
use follownet::world::HouseMap;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_follownet")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = bin(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn smoke_config() -> String {
    root().join("configs/smoke.toml").display().to_string()
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

#[test]
fn gen_world_is_deterministic_and_connected() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["--seed", "1", "--out", &s(out), "gen-world", "--width", "23", "--height", "18", "--name", "h"]);
    }
    let fa = std::fs::read(a.join("h.house")).unwrap();
    assert_eq!(fa, std::fs::read(b.join("h.house")).unwrap());
    let h = HouseMap::load(&a.join("h.house")).unwrap();
    assert_eq!((h.width(), h.height()), (23, 18));
    assert!(h.is_connected());
    let fixture = std::fs::read(root().join("fixtures/house_a.house")).unwrap();
    ok(&["--seed", "1", "--out", &s(&a), "gen-world", "--name", "house_a"]);
    assert_eq!(std::fs::read(a.join("house_a.house")).unwrap(), fixture);
}

#[test]
fn gen_world_rejects_impossible_size() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&["--out", &s(dir.path()), "gen-world", "--width", "3", "--height", "3"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error[generation]:"), "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn gen_instr_counts_splits_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("exp.toml");
    let houses = [root().join("fixtures/house_a.house"), root().join("fixtures/house_b.house")];
    std::fs::write(
        &cfg_path,
        format!("houses = [{:?}, {:?}]\ndataset = \"data.jsonl\"\n", s(&houses[0]), s(&houses[1])),
    )
    .unwrap();
    let c = s(&cfg_path);
    ok(&["--config", &c, "--seed", "3", "gen-instr", "--tasks", "7", "--per-task", "3", "--split", "train"]);
    let data = dir.path().join("data.jsonl");
    let first = std::fs::read(&data).unwrap();
    let loaded: Houses = houses
        .iter()
        .map(|p| {
            let h = HouseMap::load(p).unwrap();
            (h.name().to_string(), h)
        })
        .collect();
    let ds = InstructionDataset::load(&data, &loaded).unwrap();
    assert_eq!(ds.len(), 21);
    assert!(ds.instructions().iter().all(|i| (1..=5).contains(&i.waypoints.len())));
    ok(&["--config", &c, "--seed", "3", "gen-instr", "--tasks", "7", "--per-task", "3", "--split", "train"]);
    assert_eq!(std::fs::read(&data).unwrap(), first);

    ok(&["--config", &c, "--seed", "4", "gen-instr", "--tasks", "3", "--max-waypoints", "2", "--split", "holdout", "--append"]);
    let ds = InstructionDataset::load(&data, &loaded).unwrap();
    let holdout = ds.indices(Split::Holdout);
    assert_eq!(holdout.len(), 9);
    assert!(holdout.iter().all(|&i| ds.instructions()[i].waypoints.len() == 2));
    assert_eq!(ds.indices(Split::Train).len(), 21);

    ok(&["--config", &c, "--seed", "6", "gen-instr", "--tasks", "7", "--per-task", "3", "--holdout-fraction", "0.3"]);
    let ds = InstructionDataset::load(&data, &loaded).unwrap();
    assert_eq!(ds.len(), 21);
    // Seven tasks of three phrasings each: 30% rounds up to three whole tasks.
    assert_eq!(ds.indices(Split::Holdout).len(), 9);
    let pair = |i: usize| {
        let x = &ds.instructions()[i];
        (x.house.clone(), x.start_region.clone(), x.goal().to_string())
    };
    let train_pairs: std::collections::BTreeSet<_> = ds.indices(Split::Train).into_iter().map(pair).collect();
    assert!(ds.indices(Split::Holdout).into_iter().all(|i| !train_pairs.contains(&pair(i))));
}

#[test]
fn train_eval_play_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let c = smoke_config();
    ok(&["--config", &c, "--out", &s(&out), "train", "--total-steps", "0"]);
    let ckpt = out.join("checkpoint.fnet");
    let (cfg, _) = load_checkpoint(&ckpt).unwrap();
    assert!(cfg.attention);
    let init = FollowNet::new(cfg.clone()).unwrap().init_params(follownet::seed::derive(1, "init")).unwrap();
    assert_eq!(std::fs::read(&ckpt).unwrap(), encode_checkpoint(&cfg, &init).unwrap());
    assert_eq!(std::fs::read_to_string(out.join("train_log.csv")).unwrap().lines().count(), 1);

    let before = std::fs::read(&ckpt).unwrap();
    let text = ok(&["--config", &c, "--out", &s(&out), "eval", "--episodes", "100"]);
    assert!(text.starts_with("100 episodes"), "{text}");
    let episodes = std::fs::read_to_string(out.join("eval/episodes.csv")).unwrap();
    assert_eq!(episodes.lines().count(), 101);
    assert_eq!(std::fs::read(&ckpt).unwrap(), before);
    let summary = std::fs::read(out.join("eval/summary.csv")).unwrap();
    ok(&["--config", &c, "--out", &s(&out), "eval", "--episodes", "100"]);
    assert_eq!(std::fs::read(out.join("eval/summary.csv")).unwrap(), summary);

    ok(&["--config", &c, "--out", &s(&out), "play"]);
    let traj = std::fs::read_to_string(out.join("play/trajectory.csv")).unwrap();
    let poses: Vec<&str> = traj.lines().skip(1).collect();
    let t = poses.len() - 1;
    let frames = std::fs::read_dir(out.join("play")).unwrap().filter(|e| {
        e.as_ref().unwrap().file_name().to_string_lossy().starts_with("frame_")
    });
    assert_eq!(frames.count(), t + 1);
    let house = HouseMap::load(&root().join("fixtures/smoke.house")).unwrap();
    for line in poses {
        let f: Vec<&str> = line.split(',').collect();
        assert!(house.walkable(f[1].parse().unwrap(), f[2].parse().unwrap()));
    }
    let heat = std::fs::read_to_string(out.join("play/attention.csv")).unwrap();
    assert_eq!(heat.lines().next().unwrap().split(',').count(), t + 1);
}

#[test]
fn baseline_checkpoint_is_marked_and_mismatch_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let c = smoke_config();
    ok(&["--config", &c, "--out", &s(&out), "train", "--total-steps", "0", "--no-attention"]);
    let (cfg, _) = load_checkpoint(&out.join("checkpoint.fnet")).unwrap();
    assert!(!cfg.attention);
    let res = bin(&["--config", &c, "--out", &s(&out), "eval", "--episodes", "5"]);
    assert_eq!(res.status.code(), Some(4));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.starts_with("error[mismatch]:") && err.contains("attention"), "{err}");
    ok(&["--config", &c, "--out", &s(&out), "eval", "--episodes", "5", "--no-attention"]);
    assert!(!out.join("eval/attention").exists());
}

#[test]
fn short_training_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let c = smoke_config();
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&["--config", &c, "--out", &s(&out), "train", "--total-steps", "600"]);
        (std::fs::read(out.join("train_log.csv")).unwrap(), std::fs::read(out.join("checkpoint.fnet")).unwrap())
    };
    let (log_a, ck_a) = run("a");
    let (log_b, ck_b) = run("b");
    assert_eq!(log_a, log_b);
    assert_eq!(ck_a, ck_b);
    assert!(String::from_utf8(log_a).unwrap().starts_with("step,avg_return,full_success"));
}

#[test]
fn missing_inputs_and_bad_config_have_categories() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("exp.toml");
    std::fs::write(&cfg_path, "houses = [\"nope.house\"]\n").unwrap();
    let res = bin(&["--config", &s(&cfg_path), "train"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).starts_with("error[config]:"));
    std::fs::write(&cfg_path, "bogus_key = 1\n").unwrap();
    let res = bin(&["--config", &s(&cfg_path), "train"]);
    assert!(String::from_utf8_lossy(&res.stderr).starts_with("error[config]:"));
}
