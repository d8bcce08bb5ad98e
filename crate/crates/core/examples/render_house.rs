//! Generates a house, prints it, and renders one first-person view as ASCII
//! (class letters above, depth shading below).
//!
//! cargo run --release --example render_house -- [seed]

use std::sync::Arc;

use follownet::world::{generate_house, render_observation, GenerateConfig, Heading, Pose, RenderConfig};

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let house = generate_house(&GenerateConfig::new("demo", 23, 18, seed)).unwrap();
    print!("{}", house.to_text());

    let (x, y) = house.walkable_cells()[0];
    let pose = Pose { x, y, heading: Heading::PosX };
    let cfg = RenderConfig { width: 48, height: 12, ..Default::default() };
    let obs = render_observation(&house, &pose, Arc::new(vec![]), &cfg);
    println!("\nview from ({x},{y}) facing {}:", pose.heading.label());
    let glyphs = b".#^D0123456789abcdef";
    for row in obs.classes.chunks(obs.width) {
        println!("{}", row.iter().map(|&c| glyphs[c as usize % glyphs.len()] as char).collect::<String>());
    }
    let shades = b"@%#*+=-:. ";
    for row in obs.depth.chunks(obs.width) {
        let line: String = row.iter().map(|&d| shades[((d * 9.0).round() as usize).min(9)] as char).collect();
        println!("{line}");
    }
}
