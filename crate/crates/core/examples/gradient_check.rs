//! Finite-difference check of every parameter of a small network.
//!
//! cargo run --release --example gradient_check

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use follownet::autodiff::{grad_check, AutodiffError};
use follownet::model::{ArchitectureConfig, FollowNet};
use follownet::world::Observation;

fn main() {
    let cfg = ArchitectureConfig {
        image_height: 6,
        image_width: 8,
        num_classes: 5,
        vocab_size: 10,
        max_tokens: 8,
        semantic_channels: vec![2, 3, 3],
        depth_channels: vec![2, 3],
        embed_dim: 3,
        gru_dim: 4,
        semantic_dim: 3,
        depth_dim: 3,
        attention_hidden: 4,
        q_hidden: vec![5, 4],
        ..Default::default()
    };
    // Random inputs keep ReLU pre-activations away from their kink.
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = cfg.image_height * cfg.image_width;
    let obs = Observation {
        height: cfg.image_height,
        width: cfg.image_width,
        num_classes: cfg.num_classes,
        classes: (0..n).map(|_| rng.gen_range(0..cfg.num_classes as u8)).collect(),
        depth: (0..n).map(|_| rng.gen_range(0.0..1.0)).collect(),
        tokens: Arc::new(vec![2, 5, 7, 3, 9]),
    };
    for attention in [true, false] {
        let net = FollowNet::new(ArchitectureConfig { attention, ..cfg.clone() }).unwrap();
        let mut params = net.init_params(13).unwrap();
        // Initial weights give attention gradients near the finite-difference
        // noise floor; doubling them keeps the relative error meaningful.
        for (name, t) in params.iter_mut() {
            if !name.starts_with("sem_") && !name.starts_with("depth_") {
                t.values_mut().iter_mut().for_each(|v| *v *= 2.0);
            }
        }
        let report = grad_check(&params, 1e-5, |tape| {
            let q = net.forward(tape, &obs).map_err(|e| AutodiffError::GradCheck(e.to_string()))?.q;
            Ok(tape.squared_error(q, 0.7))
        })
        .unwrap();
        println!(
            "attention={attention}: {} coordinates, max relative error {:.2e} at {:?}",
            report.coordinates, report.max_relative_error, report.worst
        );
    }
}
