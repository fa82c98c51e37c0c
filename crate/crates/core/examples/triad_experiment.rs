//! Simulated triad experiment: noisy observers answer a plan, the model
//! predicts the same triads, and subject-level bootstrap gives standard
//! errors for human-human and model-human concordance.

use lac::gabor::{BankParams, FilterBank};
use lac::graph::{FaceCode, FaceGraph};
use lac::stats::{self, Dataset, Response, Statistic, TriadTrial};
use lac::{rng, similarity, synth};
use rand::Rng;

fn main() -> lac::Result<()> {
    let bank = FilterBank::new(&BankParams::default())?;
    let grid = FaceGraph::default_grid();
    let faces = synth::face_set(8, 2, 128)?;
    let codes: Vec<FaceCode> = faces.iter().map(|(id, img)| FaceCode::extract(id.as_str(), img, &grid, &bank)).collect::<lac::Result<_>>()?;
    let m = similarity::similarity_matrix(&codes)?;
    let ids = m.ids().to_vec();

    let plan = stats::generate_triads(&ids, true, 1)?;
    let analysed: Vec<TriadTrial> = plan.iter().filter(|t| !t.is_catch).cloned().collect();
    let model = stats::predict_triads(&m, &analysed)?;

    // observers follow the model with probability 0.8
    let subjects: Vec<Vec<TriadTrial>> = (0..6u64)
        .map(|s| {
            let mut r = rng::stream(7, s);
            model
                .iter()
                .map(|t| {
                    let flip = r.random::<f64>() < 0.2;
                    let response = match (t.response, flip) {
                        (Response::Left, true) => Response::Right,
                        (Response::Right, true) => Response::Left,
                        (other, _) => other,
                    };
                    t.clone().answered(response)
                })
                .collect()
        })
        .collect();

    println!("{} triads per subject, {} analysed", plan.len(), analysed.len());
    println!("self concordance: {:.1}%", stats::concordance(&model, &model)?);
    let data = Dataset::Triads { model: &model, subjects: &subjects };
    for st in [Statistic::HumanHuman, Statistic::ModelHuman, Statistic::Difference] {
        let r = stats::bootstrap_se(data, st, 1000, 3)?;
        println!("{st:>12}: {:.2} ± {:.2}", r.estimate, r.standard_error);
    }
    Ok(())
}
