//! Extracts a face code on the default 7x7 grid and prints a few jets.

use lac::gabor::{BankParams, FilterBank};
use lac::graph::{FaceCode, FaceGraph};
use lac::synth::{self, FaceParams};

fn main() -> lac::Result<()> {
    let bank = FilterBank::new(&BankParams::default())?;
    let img = synth::render(&FaceParams::sample(1, 0), 128, 128)?;
    let code = FaceCode::extract("example", &img, &FaceGraph::default_grid(), &bank)?;
    println!("{} nodes x {} channels", code.jets.len(), code.jets[0].len());
    for node in [0, 24, 48] {
        let (x, y) = code.graph.nodes()[node];
        let jet = &code.jets[node];
        let head: Vec<String> = jet.amplitudes()[..6].iter().map(|a| format!("{a:.3}")).collect();
        println!("node {node:>2} at ({x}, {y}): |jet| = {:.3}, finest scale [{}]", jet.norm(), head.join(", "));
    }
    let json = code.to_json(None);
    println!("code file: {} bytes of JSON", json.len());
    Ok(())
}
