//! Rating sessions to a normalized similarity matrix, then a 2-D nMDS map of
//! the faces.

use lac::nmds::{self, NmdsOptions};
use lac::session::SessionPlan;
use lac::stats::{self, RatingTrial};
use lac::{rng, session::PlanTrials};
use rand::Rng;

fn main() -> lac::Result<()> {
    let ids: Vec<String> = (0..8).map(|i| format!("f{i}")).collect();
    // faces on a circle; neighbors look most alike
    let angle = |id: &str| id[1..].parse::<f64>().unwrap() * std::f64::consts::TAU / 8.0;
    let plan = SessionPlan::rating("demo", &ids, 4)?;
    let PlanTrials::Rating(trials) = plan.trials else { unreachable!("rating plan") };

    // each subject adds its own noise
    let sessions: Vec<Vec<RatingTrial>> = (0..5u64)
        .map(|s| {
            let mut r = rng::stream(11, s);
            trials
                .iter()
                .map(|t| {
                    let chord = 2.0 * ((angle(&t.a) - angle(&t.b)) / 2.0).sin().abs();
                    let base = 10.0 - 4.0 * chord;
                    let rating = (base + r.random_range(-1.5..1.5)).round().clamp(1.0, 10.0) as u8;
                    RatingTrial { rating: Some(rating), ..t.clone() }
                })
                .collect()
        })
        .collect();

    let matrices = sessions
        .iter()
        .map(|s| stats::normalize_ratings(&ids, s)?.to_matrix())
        .collect::<lac::Result<Vec<_>>>()?;
    let mean = stats::average_matrices(&matrices)?;
    let sol = nmds::nmds(&nmds::to_dissimilarity(&mean), &NmdsOptions { dims: 2, seed: 1, ..Default::default() })?;
    println!("stress {:.4}, r² {:.4}, best restart {}", sol.stress, sol.r_squared, sol.best_restart);
    print!("{}", sol.projection_csv(&[]));
    Ok(())
}
