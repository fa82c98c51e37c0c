use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::triads::{concordance, concordance_matrix, TriadTrial};
use crate::rng;
use crate::{Error, Result};

pub const MIN_REPLICATES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub estimate: f64,
    pub standard_error: f64,
    pub replicates: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    /// Mean of a list of values.
    Mean,
    /// Mean concordance over distinct subject pairs.
    HumanHuman,
    /// Mean concordance between the model and each subject.
    ModelHuman,
    /// `ModelHuman` minus `HumanHuman`.
    Difference,
}

impl Statistic {
    pub const ALL: [Statistic; 4] = [Statistic::Mean, Statistic::HumanHuman, Statistic::ModelHuman, Statistic::Difference];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::Mean => "mean",
            Statistic::HumanHuman => "human-human",
            Statistic::ModelHuman => "model-human",
            Statistic::Difference => "difference",
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Statistic::ALL.into_iter().find(|st| st.name() == s).ok_or_else(|| Error::UnknownStatistic(s.to_string()))
    }
}

/// The resampling units: plain values, or subjects' triad responses plus the
/// model's responses to the same triads.
#[derive(Debug, Clone, Copy)]
pub enum Dataset<'a> {
    Values(&'a [f64]),
    Triads { model: &'a [TriadTrial], subjects: &'a [Vec<TriadTrial>] },
}

/// Resamples `units` indices with replacement `replicates` times and
/// evaluates `statistic` on each resample. Replicate `r` draws from its own
/// stream of `seed`, so the result does not depend on scheduling.
pub fn bootstrap<F>(units: usize, statistic: F, replicates: usize, seed: u64) -> Result<BootstrapResult>
where
    F: Fn(&[usize]) -> Result<f64> + Sync,
{
    if units == 0 {
        return Err(Error::InvalidArgument("cannot bootstrap an empty dataset".into()));
    }
    if replicates < MIN_REPLICATES {
        return Err(Error::InvalidArgument(format!("need at least {MIN_REPLICATES} replicates, got {replicates}")));
    }
    let identity: Vec<usize> = (0..units).collect();
    let estimate = statistic(&identity)?;
    let values: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(seed, r as u64);
            let sample: Vec<usize> = (0..units).map(|_| g.random_range(0..units)).collect();
            statistic(&sample)
        })
        .collect::<Result<_>>()?;
    let standard_error = if values.iter().all(|v| *v == values[0]) {
        0.0
    } else {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Ok(BootstrapResult { estimate, standard_error, replicates, seed })
}

/// Subject-level bootstrap standard error of a named statistic.
pub fn bootstrap_se(data: Dataset<'_>, statistic: Statistic, replicates: usize, seed: u64) -> Result<BootstrapResult> {
    match (data, statistic) {
        (Dataset::Values(values), Statistic::Mean) => bootstrap(
            values.len(),
            |idx| Ok(idx.iter().map(|&i| values[i]).sum::<f64>() / idx.len() as f64),
            replicates,
            seed,
        ),
        (Dataset::Triads { model, subjects }, st) if st != Statistic::Mean => {
            if subjects.len() < 2 {
                return Err(Error::InvalidArgument(format!("need at least 2 subjects, got {}", subjects.len())));
            }
            // resampling only reindexes subjects, so every concordance is computed once
            let pairwise = concordance_matrix(subjects)?;
            let to_model: Vec<f64> = subjects.iter().map(|s| concordance(model, s)).collect::<Result<_>>()?;
            let human = |idx: &[usize]| {
                let mut sum = 0.0;
                let mut pairs = 0usize;
                for a in 0..idx.len() {
                    for b in a + 1..idx.len() {
                        sum += pairwise[idx[a]][idx[b]];
                        pairs += 1;
                    }
                }
                sum / pairs as f64
            };
            let machine = |idx: &[usize]| idx.iter().map(|&i| to_model[i]).sum::<f64>() / idx.len() as f64;
            bootstrap(
                subjects.len(),
                |idx| {
                    Ok(match st {
                        Statistic::HumanHuman => human(idx),
                        Statistic::ModelHuman => machine(idx),
                        _ => machine(idx) - human(idx),
                    })
                },
                replicates,
                seed,
            )
        }
        (_, st) => Err(Error::InvalidArgument(format!("statistic {st} does not apply to this dataset"))),
    }
}
