//! LAC and pixel similarity matrices over a small synthetic face set, and
//! the rank correlation between them.

use lac::gabor::{BankParams, FilterBank};
use lac::graph::{FaceCode, FaceGraph};
use lac::similarity::{self, PixelFace};
use lac::{stats, synth};

fn main() -> lac::Result<()> {
    let bank = FilterBank::new(&BankParams::default())?;
    let grid = FaceGraph::default_grid();
    let faces = synth::face_set(8, 5, 128)?;
    let codes: Vec<FaceCode> = faces.iter().map(|(id, img)| FaceCode::extract(id.as_str(), img, &grid, &bank)).collect::<lac::Result<_>>()?;
    let lac_m = similarity::similarity_matrix(&codes)?;
    let pixel_faces: Vec<PixelFace> = faces.iter().map(|(id, img)| PixelFace { id, image: img, graph: &grid }).collect();
    let pixel_m = similarity::pixel_similarity_matrix(&pixel_faces, 11)?;

    print!("{}", lac_m.to_csv(&[]));
    let rho = stats::spearman(&lac_m.upper_triangle(), &pixel_m.upper_triangle())?;
    println!("spearman(LAC, pixel) = {rho:.3} over {} pairs", lac_m.upper_triangle().len());
    Ok(())
}
