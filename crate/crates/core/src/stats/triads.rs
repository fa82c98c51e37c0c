use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::similarity::{MatrixKind, SimilarityMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Response {
    Left,
    Right,
    /// Unanswered, or a model tie.
    #[default]
    None,
}

/// One forced choice: which bottom face looks more like the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriadTrial {
    pub target: String,
    pub left: String,
    pub right: String,
    #[serde(default)]
    pub response: Response,
    pub is_catch: bool,
    /// Milliseconds since the Unix epoch, as recorded by the experiment UI.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<f64>,
}

impl TriadTrial {
    pub fn new(target: &str, left: &str, right: &str) -> Self {
        Self {
            target: target.into(),
            left: left.into(),
            right: right.into(),
            response: Response::None,
            is_catch: target == left || target == right,
            timestamp: None,
        }
    }

    pub fn answered(mut self, response: Response) -> Self {
        self.response = response;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.left == self.right {
            return Err(Error::InvalidTrial(format!("both bottom faces are {:?}", self.left)));
        }
        let repeats = self.target == self.left || self.target == self.right;
        if self.is_catch != repeats {
            return Err(Error::InvalidTrial(format!(
                "triad ({}; {}, {}) has is_catch={} but {} the target",
                self.target,
                self.left,
                self.right,
                self.is_catch,
                if repeats { "repeats" } else { "does not repeat" }
            )));
        }
        Ok(())
    }

    /// Target plus the unordered bottom pair; identifies a triad regardless of
    /// screen side.
    pub fn key(&self) -> (&str, &str, &str) {
        let (a, b) = if self.left <= self.right { (&self.left, &self.right) } else { (&self.right, &self.left) };
        (&self.target, a, b)
    }

    pub fn chosen(&self) -> Option<&str> {
        match self.response {
            Response::Left => Some(&self.left),
            Response::Right => Some(&self.right),
            Response::None => None,
        }
    }
}

/// Every target with every unordered pair of distinct other faces, plus (with
/// `include_catch`) every target paired with itself and one other face.
/// Order and screen sides are shuffled by `seed`.
pub fn generate_triads(ids: &[String], include_catch: bool, seed: u64) -> Result<Vec<TriadTrial>> {
    let n = ids.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 faces for triads, got {n}")));
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(d) = ids.iter().find(|id| !seen.insert(id.as_str())) {
        return Err(Error::InvalidArgument(format!("duplicate face id {d:?}")));
    }
    let mut trials = Vec::with_capacity(n * (n - 1) * (n - 2) / 2 + n * (n - 1));
    for t in 0..n {
        let others: Vec<usize> = (0..n).filter(|&i| i != t).collect();
        for (p, &a) in others.iter().enumerate() {
            for &b in &others[p + 1..] {
                trials.push(TriadTrial::new(&ids[t], &ids[a], &ids[b]));
            }
        }
        if include_catch {
            for &o in &others {
                trials.push(TriadTrial::new(&ids[t], &ids[t], &ids[o]));
            }
        }
    }
    let mut r = rng::seeded(seed);
    trials.shuffle(&mut r);
    for trial in &mut trials {
        if r.random::<bool>() {
            std::mem::swap(&mut trial.left, &mut trial.right);
        }
    }
    Ok(trials)
}

/// Answers each triad with the bottom face more similar to the target under
/// `m`; exact ties are left unanswered.
pub fn predict_triads(m: &SimilarityMatrix, triads: &[TriadTrial]) -> Result<Vec<TriadTrial>> {
    triads
        .iter()
        .map(|t| {
            t.validate()?;
            if t.is_catch {
                return Err(Error::InvalidTrial(format!("catch triad ({}; {}, {}) cannot be predicted", t.target, t.left, t.right)));
            }
            let target = m.index_of(&t.target)?;
            let left = m.get(target, m.index_of(&t.left)?);
            let right = m.get(target, m.index_of(&t.right)?);
            let response = if left > right {
                Response::Left
            } else if right > left {
                Response::Right
            } else {
                Response::None
            };
            Ok(TriadTrial { response, timestamp: None, ..t.clone() })
        })
        .collect()
}

fn choices(trials: &[TriadTrial]) -> Result<HashMap<(&str, &str, &str), &str>> {
    let mut map = HashMap::with_capacity(trials.len());
    for t in trials.iter().filter(|t| !t.is_catch) {
        t.validate()?;
        if let Some(c) = t.chosen() {
            if map.insert(t.key(), c).is_some() {
                let (a, b, c) = t.key();
                return Err(Error::InvalidTrial(format!("triad ({a}; {b}, {c}) answered twice")));
            }
        }
    }
    Ok(map)
}

/// Percentage of jointly answered non-catch triads on which both responders
/// picked the same face.
pub fn concordance(a: &[TriadTrial], b: &[TriadTrial]) -> Result<f64> {
    let (ca, cb) = (choices(a)?, choices(b)?);
    let (small, large) = if ca.len() <= cb.len() { (&ca, &cb) } else { (&cb, &ca) };
    let mut compared = 0usize;
    let mut agreed = 0usize;
    for (key, choice) in small {
        if let Some(other) = large.get(key) {
            compared += 1;
            agreed += usize::from(choice == other);
        }
    }
    if compared == 0 {
        return Err(Error::EmptyComparison);
    }
    Ok(100.0 * agreed as f64 / compared as f64)
}

/// Concordance between every pair of subjects (diagonal: self-concordance).
pub fn concordance_matrix(subjects: &[Vec<TriadTrial>]) -> Result<Vec<Vec<f64>>> {
    let n = subjects.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let c = concordance(&subjects[i], &subjects[j])?;
            m[i][j] = c;
            m[j][i] = c;
        }
    }
    Ok(m)
}

/// Mean concordance over all distinct subject pairs.
pub fn mean_pairwise_concordance(subjects: &[Vec<TriadTrial>]) -> Result<f64> {
    if subjects.len() < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 subjects, got {}", subjects.len())));
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..subjects.len() {
        for j in i + 1..subjects.len() {
            sum += concordance(&subjects[i], &subjects[j])?;
            pairs += 1;
        }
    }
    Ok(sum / pairs as f64)
}

/// Mean concordance between `model` and each subject.
pub fn mean_model_concordance(model: &[TriadTrial], subjects: &[Vec<TriadTrial>]) -> Result<f64> {
    if subjects.is_empty() {
        return Err(Error::InvalidArgument("no subjects".into()));
    }
    let mut sum = 0.0;
    for s in subjects {
        sum += concordance(model, s)?;
    }
    Ok(sum / subjects.len() as f64)
}

/// Fraction of answered catch trials in which the repeated target was chosen.
pub fn catch_accuracy(trials: &[TriadTrial]) -> Option<f64> {
    let answered: Vec<&TriadTrial> = trials.iter().filter(|t| t.is_catch && t.response != Response::None).collect();
    if answered.is_empty() {
        return None;
    }
    let hits = answered.iter().filter(|t| t.chosen() == Some(t.target.as_str())).count();
    Some(hits as f64 / answered.len() as f64)
}

/// Pairwise similarity from pooled triad choices: for faces `i` and `j`, the
/// fraction of answered non-catch triads with one of them as target and the
/// other on the bottom in which the other was chosen.
pub fn triad_similarity_index(ids: &[String], subjects: &[Vec<TriadTrial>]) -> Result<SimilarityMatrix> {
    let n = ids.len();
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let lookup = |id: &str| index.get(id).copied().ok_or_else(|| Error::UnknownId(id.to_string()));
    let mut wins = vec![0usize; n * n];
    let mut trials = vec![0usize; n * n];
    for t in subjects.iter().flatten().filter(|t| !t.is_catch) {
        t.validate()?;
        let Some(chosen) = t.chosen() else { continue };
        let target = lookup(&t.target)?;
        for bottom in [&t.left, &t.right] {
            let b = lookup(bottom)?;
            let (lo, hi) = (target.min(b), target.max(b));
            trials[lo * n + hi] += 1;
            if chosen == bottom.as_str() {
                wins[lo * n + hi] += 1;
            }
        }
    }
    SimilarityMatrix::from_pairs(ids.to_vec(), MatrixKind::Similarity, 1.0, |i, j| {
        match trials[i * n + j] {
            0 => Err(Error::NeverCoOccurring(ids[i].clone(), ids[j].clone())),
            count => Ok(wins[i * n + j] as f64 / count as f64),
        }
    })
}
