//! Places a reference face's grid on a shifted, rescaled rendering of the
//! same face by exhaustive rigid search.

use lac::gabor::{BankParams, FilterBank};
use lac::graph::{self, FaceCode, FaceGraph, RigidSearch};
use lac::synth::{self, FaceParams};

fn main() -> lac::Result<()> {
    let bank = FilterBank::new(&BankParams::default())?;
    let params = FaceParams::sample(9, 1);
    let reference = FaceCode::extract("ref", &synth::render(&params, 128, 128)?, &FaceGraph::default_grid(), &bank)?;
    let moved = synth::render(&params.clone().shifted(3.0, -2.0), 128, 128)?;
    let placement = graph::rigid_place(&moved, &reference, &bank, &RigidSearch::default())?;
    println!(
        "found shift ({}, {}) at scale {:.2}, similarity {:.4}",
        placement.shift.0, placement.shift.1, placement.scale, placement.similarity
    );
    Ok(())
}
