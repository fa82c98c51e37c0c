//! Recovers a random planar configuration from its rank-order distances.

use lac::nmds::{self, NmdsOptions};
use lac::similarity::{MatrixKind, SimilarityMatrix};
use lac::rng;
use rand::Rng;

fn main() -> lac::Result<()> {
    let mut r = rng::seeded(42);
    let truth: Vec<Vec<f64>> = (0..16).map(|_| vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]).collect();
    let ids = (0..truth.len()).map(|i| format!("p{i}")).collect();
    // a monotone distortion of distance; only the order survives
    let d = SimilarityMatrix::from_pairs(ids, MatrixKind::Dissimilarity, 0.0, |i, j| {
        let dist = truth[i].iter().zip(&truth[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        Ok(dist.powi(3) + dist)
    })?;
    let sol = nmds::nmds(&d, &NmdsOptions { dims: 2, seed: 7, ..Default::default() })?;
    let fit = nmds::procrustes(&truth, &sol.points)?;
    println!("stress {:.2e} after {} iterations (restart {})", sol.stress, sol.iterations, sol.best_restart);
    println!("Procrustes residual {:.2e}, scale {:.3}", fit.residual, fit.scale);
    Ok(())
}
