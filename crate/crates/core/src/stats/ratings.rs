use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::similarity::{MatrixKind, SimilarityMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    Practice,
    B2,
    B3,
}

impl std::fmt::Display for Block {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Block::Practice => "practice",
            Block::B2 => "b2",
            Block::B3 => "b3",
        })
    }
}

/// One pairwise similarity rating on the 1–10 scale. `rating` is `None` in a
/// plan that has not been run yet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingTrial {
    pub a: String,
    pub b: String,
    pub left_face: String,
    pub block: Block,
    #[serde(default)]
    pub rating: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<f64>,
}

impl RatingTrial {
    pub fn validate(&self) -> Result<()> {
        if self.a == self.b {
            return Err(Error::InvalidTrial(format!("pair repeats face {:?}", self.a)));
        }
        if self.left_face != self.a && self.left_face != self.b {
            return Err(Error::InvalidTrial(format!("left face {:?} is not in pair ({}, {})", self.left_face, self.a, self.b)));
        }
        if let Some(r) = self.rating {
            if !(1..=10).contains(&r) {
                return Err(Error::InvalidTrial(format!("rating {r} outside 1..=10")));
            }
        }
        Ok(())
    }

    pub fn right_face(&self) -> &str {
        if self.left_face == self.a { &self.b } else { &self.a }
    }
}

/// Three blocks over all unordered pairs, each block in its own shuffled
/// order. The first block is practice; the left/right placement of every
/// pair in the third block is the mirror of the second.
pub fn generate_rating_plan(ids: &[String], seed: u64) -> Result<Vec<RatingTrial>> {
    let n = ids.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 faces for ratings, got {n}")));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let mut r = rng::seeded(seed);
    let mut plan = Vec::with_capacity(3 * pairs.len());

    let block = |r: &mut rng::Rng, block: Block, lefts: &HashMap<(usize, usize), usize>| {
        let mut order = pairs.clone();
        order.shuffle(r);
        order
            .into_iter()
            .map(|(i, j)| RatingTrial {
                a: ids[i].clone(),
                b: ids[j].clone(),
                left_face: ids[lefts[&(i, j)]].clone(),
                block,
                rating: None,
                timestamp: None,
            })
            .collect::<Vec<_>>()
    };
    let draw_lefts = |r: &mut rng::Rng| -> HashMap<(usize, usize), usize> {
        pairs.iter().map(|&(i, j)| ((i, j), if r.random::<bool>() { i } else { j })).collect()
    };
    let practice = draw_lefts(&mut r);
    let second = draw_lefts(&mut r);
    let third: HashMap<(usize, usize), usize> = second.iter().map(|(&(i, j), &l)| ((i, j), if l == i { j } else { i })).collect();
    plan.extend(block(&mut r, Block::Practice, &practice));
    plan.extend(block(&mut r, Block::B2, &second));
    plan.extend(block(&mut r, Block::B3, &third));
    Ok(plan)
}

fn pair_index(ids: &[String]) -> HashMap<&str, usize> {
    ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect()
}

/// Mean of the block-2 and block-3 ratings of every pair, keyed `(i, j)` with
/// `i < j` indices into `ids`. Practice ratings are ignored.
pub fn pair_means(ids: &[String], trials: &[RatingTrial]) -> Result<HashMap<(usize, usize), f64>> {
    let index = pair_index(ids);
    let mut got: HashMap<(usize, usize, Block), u8> = HashMap::new();
    for t in trials {
        t.validate()?;
        let i = *index.get(t.a.as_str()).ok_or_else(|| Error::UnknownId(t.a.clone()))?;
        let j = *index.get(t.b.as_str()).ok_or_else(|| Error::UnknownId(t.b.clone()))?;
        if t.block == Block::Practice {
            continue;
        }
        let Some(rating) = t.rating else { continue };
        if got.insert((i.min(j), i.max(j), t.block), rating).is_some() {
            return Err(Error::InvalidTrial(format!("pair ({}, {}) rated twice in block {}", t.a, t.b, t.block)));
        }
    }
    let n = ids.len();
    let mut means = HashMap::new();
    for i in 0..n {
        for j in i + 1..n {
            let mut sum = 0.0;
            for block in [Block::B2, Block::B3] {
                let r = got.get(&(i, j, block)).ok_or_else(|| Error::MissingPair(ids[i].clone(), ids[j].clone(), block.to_string()))?;
                sum += f64::from(*r);
            }
            means.insert((i, j), sum / 2.0);
        }
    }
    Ok(means)
}

/// A subject's z-scored pair means.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedRatings {
    pub ids: Vec<String>,
    /// `(i, j, score)` with `i < j`, row-major over the upper triangle.
    pub scores: Vec<(usize, usize, f64)>,
}

impl NormalizedRatings {
    /// Scores as a similarity matrix; the diagonal holds the largest score.
    pub fn to_matrix(&self) -> Result<SimilarityMatrix> {
        let lookup: HashMap<(usize, usize), f64> = self.scores.iter().map(|&(i, j, s)| ((i, j), s)).collect();
        let top = self.scores.iter().map(|s| s.2).fold(f64::NEG_INFINITY, f64::max);
        SimilarityMatrix::from_pairs(self.ids.clone(), MatrixKind::Similarity, top, |i, j| Ok(lookup[&(i, j)]))
    }
}

/// Averages blocks 2 and 3 per pair, then z-scores the pair means within the
/// subject (population standard deviation).
pub fn normalize_ratings(ids: &[String], trials: &[RatingTrial]) -> Result<NormalizedRatings> {
    let means = pair_means(ids, trials)?;
    let n = ids.len();
    let ordered: Vec<(usize, usize, f64)> =
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| (i, j, means[&(i, j)])).collect();
    if ordered.is_empty() {
        return Err(Error::InvalidArgument("need at least one pair".into()));
    }
    let count = ordered.len() as f64;
    let mean = ordered.iter().map(|p| p.2).sum::<f64>() / count;
    let sd = (ordered.iter().map(|p| (p.2 - mean).powi(2)).sum::<f64>() / count).sqrt();
    if sd == 0.0 {
        return Err(Error::ZeroVariance("every pair received the same mean rating".into()));
    }
    Ok(NormalizedRatings { ids: ids.to_vec(), scores: ordered.into_iter().map(|(i, j, m)| (i, j, (m - mean) / sd)).collect() })
}

/// Elementwise mean of matrices over the same faces (in the first matrix's
/// order).
pub fn average_matrices(matrices: &[SimilarityMatrix]) -> Result<SimilarityMatrix> {
    let first = matrices.first().ok_or_else(|| Error::InvalidArgument("no matrices to average".into()))?;
    let ids = first.ids().to_vec();
    let n = ids.len();
    let mut values = vec![0.0; n * n];
    for m in matrices {
        if m.len() != n || m.kind() != first.kind() {
            return Err(Error::Incompatible("matrices differ in size or kind".into()));
        }
        let idx: Vec<usize> = ids.iter().map(|id| m.index_of(id)).collect::<Result<_>>()?;
        for i in 0..n {
            for j in 0..n {
                values[i * n + j] += m.get(idx[i], idx[j]);
            }
        }
    }
    let k = matrices.len() as f64;
    // symmetric sums stay symmetric; divide pairwise to keep it exact
    values.iter_mut().for_each(|v| *v /= k);
    SimilarityMatrix::new(ids, values, first.kind())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i:02}")).collect()
    }

    #[test]
    fn plan_has_three_blocks_of_all_pairs() {
        let plan = generate_rating_plan(&ids(16), 7).unwrap();
        assert_eq!(plan.len(), 360);
        for block in [Block::Practice, Block::B2, Block::B3] {
            let pairs: HashSet<(String, String)> =
                plan.iter().filter(|t| t.block == block).map(|t| (t.a.clone(), t.b.clone())).collect();
            assert_eq!(pairs.len(), 120);
        }
        assert_eq!(plan.iter().filter(|t| t.block == Block::Practice).count(), 120);
        assert!(plan.iter().all(|t| t.validate().is_ok() && t.rating.is_none()));
    }

    #[test]
    fn second_and_third_blocks_are_counterbalanced() {
        let plan = generate_rating_plan(&ids(16), 7).unwrap();
        let left = |b: Block| -> HashMap<(String, String), String> {
            plan.iter().filter(|t| t.block == b).map(|t| ((t.a.clone(), t.b.clone()), t.left_face.clone())).collect()
        };
        let (l2, l3) = (left(Block::B2), left(Block::B3));
        for (pair, face) in &l2 {
            assert_ne!(&l3[pair], face);
        }
        // orders differ between blocks
        let order = |b: Block| plan.iter().filter(|t| t.block == b).map(|t| (t.a.clone(), t.b.clone())).collect::<Vec<_>>();
        assert_ne!(order(Block::B2), order(Block::B3));
        assert_eq!(plan, generate_rating_plan(&ids(16), 7).unwrap());
    }

    fn rate(plan: &[RatingTrial], f: impl Fn(&RatingTrial) -> u8) -> Vec<RatingTrial> {
        plan.iter().map(|t| RatingTrial { rating: Some(f(t)), ..t.clone() }).collect()
    }

    #[test]
    fn pair_mean_averages_blocks_two_and_three() {
        let faces = ids(3);
        let plan = generate_rating_plan(&faces, 1).unwrap();
        let rated = rate(&plan, |t| match t.block {
            Block::Practice => 10,
            Block::B2 => 4,
            Block::B3 => 6,
        });
        let m = pair_means(&faces, &rated).unwrap();
        assert_eq!(m[&(0, 1)], 5.0);
        assert_eq!(m.len(), 3);
    }

    #[test]
    fn normalization_gives_zero_mean_unit_sd() {
        let faces = ids(16);
        let plan = generate_rating_plan(&faces, 2).unwrap();
        let rated = rate(&plan, |t| {
            let h = t.a.bytes().chain(t.b.bytes()).fold(7u32, |h, c| h.wrapping_mul(31).wrapping_add(c as u32));
            (h % 10) as u8 + 1 + u8::from(t.block == Block::B3 && h % 3 == 0).min(9 - (h % 10) as u8)
        });
        let z = normalize_ratings(&faces, &rated).unwrap();
        assert_eq!(z.scores.len(), 120);
        let n = z.scores.len() as f64;
        let mean = z.scores.iter().map(|s| s.2).sum::<f64>() / n;
        let sd = (z.scores.iter().map(|s| (s.2 - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 1e-12);
        assert!((sd - 1.0).abs() < 1e-12);
        let m = z.to_matrix().unwrap();
        assert_eq!(m.upper_triangle().len(), 120);
    }

    #[test]
    fn normalization_errors() {
        let faces = ids(4);
        let plan = generate_rating_plan(&faces, 3).unwrap();
        let flat = rate(&plan, |_| 5);
        assert!(matches!(normalize_ratings(&faces, &flat), Err(Error::ZeroVariance(_))));
        let mut missing = rate(&plan, |t| (t.a.len() + t.b.len()) as u8 % 10 + 1);
        let pos = missing.iter().position(|t| t.block == Block::B3).unwrap();
        missing.remove(pos);
        assert!(matches!(normalize_ratings(&faces, &missing), Err(Error::MissingPair(..))));
        let mut bad = plan[0].clone();
        bad.rating = Some(11);
        assert!(bad.validate().is_err());
        bad.rating = Some(0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn average_of_identical_matrices_is_the_matrix() {
        let faces = ids(4);
        let plan = generate_rating_plan(&faces, 3).unwrap();
        let rated = rate(&plan, |t| (t.a.as_bytes()[2] + t.b.as_bytes()[2]) % 10 + 1);
        let m = normalize_ratings(&faces, &rated).unwrap().to_matrix().unwrap();
        let avg = average_matrices(&[m.clone(), m.clone(), m.clone()]).unwrap();
        for (a, b) in avg.values().iter().zip(m.values()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
