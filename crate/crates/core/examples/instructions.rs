//! Generates instructions with hidden waypoint annotations for a fixture
//! house and shows the tokenised form.
//!
//! cargo run --release --example instructions

use std::path::Path;

use follownet::lang::{build_vocab, generate_instruction, natural_waypoints, tokenize};
use follownet::world::{HouseMap, RegionKind};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/house_a.house");
    let house = HouseMap::load(&path).unwrap();
    let rooms: Vec<&str> = house
        .regions()
        .iter()
        .filter(|r| r.kind == RegionKind::Room && !house.is_door_region(r))
        .map(|r| r.name.as_str())
        .collect();
    let objects: Vec<&str> =
        house.regions().iter().filter(|r| r.kind == RegionKind::Object).map(|r| r.name.as_str()).collect();

    let mut generated = Vec::new();
    for (i, goal) in objects.iter().enumerate() {
        let start = rooms[i % rooms.len()];
        let Ok(path) = natural_waypoints(&house, start, goal) else { continue };
        match generate_instruction(&house, start, goal, &path, i as u64) {
            Ok(ins) => generated.push(ins),
            Err(e) => eprintln!("{start} -> {goal}: {e}"),
        }
    }
    let vocab = build_vocab(&generated.iter().map(|i| i.text.as_str()).collect::<Vec<_>>());
    for ins in &generated {
        println!("{} -> {}", ins.start_region, ins.waypoints.join(" > "));
        println!("  {}", ins.text);
        println!("  {:?}", tokenize(&ins.text, &vocab));
    }
    println!("{} instructions, {} vocabulary entries", generated.len(), vocab.len());
}
