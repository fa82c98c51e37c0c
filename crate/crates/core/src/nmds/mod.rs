//! Nonmetric multidimensional scaling.
//!
//! Each iteration computes configuration distances, fits disparities to them
//! by isotonic regression over the dissimilarity order, and moves the points
//! with a Guttman transform toward those disparities. Stress-1 with optimal
//! disparities cannot increase from one iteration to the next.

mod isotonic;
mod procrustes;

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use isotonic::isotonic_regression;
pub use procrustes::{procrustes, ProcrustesFit};

use crate::numfmt::sig17;
use crate::rng;
use crate::similarity::{MatrixKind, SimilarityMatrix};
use crate::{Error, Result};

/// Dissimilarities from any matrix. Similarity-ordered kinds become
/// `max − value`; a dissimilarity matrix is kept. The diagonal is 0.
pub fn to_dissimilarity(m: &SimilarityMatrix) -> SimilarityMatrix {
    let n = m.len();
    let values: Vec<f64> = match m.kind() {
        MatrixKind::Dissimilarity => m.values().to_vec(),
        MatrixKind::Similarity | MatrixKind::DissimilarityDerived => {
            let top = m.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            m.values().iter().map(|v| top - v).collect()
        }
    };
    let values = values.into_iter().enumerate().map(|(k, v)| if k / n == k % n { 0.0 } else { v }).collect();
    SimilarityMatrix::new(m.ids().to_vec(), values, MatrixKind::Dissimilarity).expect("symmetric input stays symmetric")
}

/// How disparities of tied dissimilarities are constrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ties {
    /// Tied dissimilarities may receive different disparities.
    Primary,
    /// Tied dissimilarities receive one common disparity.
    #[default]
    Secondary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NmdsOptions {
    pub dims: usize,
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop when one iteration lowers Stress-1 by less than this.
    pub tol: f64,
    pub ties: Ties,
}

impl Default for NmdsOptions {
    fn default() -> Self {
        Self { dims: 3, seed: 0, restarts: 20, max_iter: 2000, tol: 1e-10, ties: Ties::Secondary }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdsSolution {
    pub ids: Vec<String>,
    pub dims: usize,
    /// One row per face; column means are 0 and the mean squared norm is 1.
    pub points: Vec<Vec<f64>>,
    pub stress: f64,
    pub r_squared: f64,
    pub iterations: usize,
    pub seed: u64,
    pub restarts: usize,
    /// Index of the restart that produced the solution.
    pub best_restart: usize,
    /// Stress-1 before each update of the winning restart, then the final
    /// value.
    #[serde(skip)]
    pub history: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// Upper-triangle pairs in dissimilarity order with their tie-block bounds.
struct Order {
    pairs: Vec<(usize, usize)>,
    /// `blocks[b]..blocks[b + 1]` index tied runs in `pairs`.
    blocks: Vec<usize>,
}

impl Order {
    fn new(d: &SimilarityMatrix) -> Self {
        let n = d.len();
        let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        pairs.sort_by(|a, b| d.get(a.0, a.1).total_cmp(&d.get(b.0, b.1)));
        let mut blocks = vec![0];
        for k in 1..pairs.len() {
            if d.get(pairs[k].0, pairs[k].1) != d.get(pairs[k - 1].0, pairs[k - 1].1) {
                blocks.push(k);
            }
        }
        blocks.push(pairs.len());
        Self { pairs, blocks }
    }

    /// Least-squares disparities for `dist` (indexed like `pairs`).
    fn disparities(&self, dist: &[f64], ties: Ties) -> Vec<f64> {
        let mut out = vec![0.0; dist.len()];
        match ties {
            Ties::Primary => {
                // inside a tie block any order is allowed; sorting by distance is optimal
                let mut order: Vec<usize> = Vec::with_capacity(dist.len());
                for b in self.blocks.windows(2) {
                    let mut run: Vec<usize> = (b[0]..b[1]).collect();
                    run.sort_by(|&x, &y| dist[x].total_cmp(&dist[y]));
                    order.extend(run);
                }
                let y: Vec<f64> = order.iter().map(|&k| dist[k]).collect();
                let fit = isotonic_regression(&y, &vec![1.0; y.len()]).expect("finite distances");
                for (k, v) in order.into_iter().zip(fit) {
                    out[k] = v;
                }
            }
            Ties::Secondary => {
                let (means, weights): (Vec<f64>, Vec<f64>) = self
                    .blocks
                    .windows(2)
                    .map(|b| {
                        let len = (b[1] - b[0]) as f64;
                        (dist[b[0]..b[1]].iter().sum::<f64>() / len, len)
                    })
                    .unzip();
                let fit = isotonic_regression(&means, &weights).expect("finite distances");
                for (b, v) in self.blocks.windows(2).zip(fit) {
                    out[b[0]..b[1]].fill(v);
                }
            }
        }
        out
    }
}

fn distances(x: &DMatrix<f64>, pairs: &[(usize, usize)]) -> Vec<f64> {
    pairs
        .iter()
        .map(|&(i, j)| (0..x.ncols()).map(|c| (x[(i, c)] - x[(j, c)]).powi(2)).sum::<f64>().sqrt())
        .collect()
}

fn stress1(dist: &[f64], disp: &[f64]) -> f64 {
    let num: f64 = dist.iter().zip(disp).map(|(d, h)| (d - h) * (d - h)).sum();
    let den: f64 = dist.iter().map(|d| d * d).sum();
    (num / den).sqrt()
}

/// Centers the columns and scales to unit mean squared row norm.
fn normalize(x: &mut DMatrix<f64>) {
    let n = x.nrows() as f64;
    for mut col in x.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    let rms = (x.norm_squared() / n).sqrt();
    if rms > 0.0 {
        *x /= rms;
    }
}

struct Run {
    points: DMatrix<f64>,
    stress: f64,
    r_squared: f64,
    iterations: usize,
    history: Vec<f64>,
}

fn run(order: &Order, n: usize, opts: &NmdsOptions, mut rng: rng::Rng) -> Run {
    let mut x = DMatrix::from_fn(n, opts.dims, |_, _| rng.random_range(-1.0..=1.0));
    normalize(&mut x);
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let dist = distances(&x, &order.pairs);
        let disp = order.disparities(&dist, opts.ties);
        let stress = stress1(&dist, &disp);
        let done = iterations >= opts.max_iter
            || history.last().is_some_and(|prev: &f64| prev - stress < opts.tol)
            || stress == 0.0;
        history.push(stress);
        if done {
            let r_squared = squared_correlation(&disp, &dist);
            return Run { points: x, stress, r_squared, iterations, history };
        }
        // Guttman transform with unit weights: X⁺ = B(X) X / n
        let mut b = DMatrix::<f64>::zeros(n, n);
        for (k, &(i, j)) in order.pairs.iter().enumerate() {
            if dist[k] > 0.0 {
                let v = -disp[k] / dist[k];
                b[(i, j)] = v;
                b[(j, i)] = v;
            }
        }
        for i in 0..n {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| b[(i, j)]).sum();
            b[(i, i)] = -off;
        }
        x = (b * &x) / n as f64;
        normalize(&mut x);
        iterations += 1;
    }
}

fn squared_correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
        sab += (x - ma) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab * sab / (saa * sbb)).clamp(0.0, 1.0)
}

fn prepare(d: &SimilarityMatrix, opts: &NmdsOptions) -> Result<Order> {
    if d.kind() != MatrixKind::Dissimilarity {
        return Err(Error::InvalidArgument(format!("nmds needs a dissimilarity matrix, got {}", d.kind())));
    }
    let n = d.len();
    if opts.dims == 0 || n <= opts.dims {
        return Err(Error::InvalidArgument(format!("need 1 <= dims < faces, got dims {} for {n} faces", opts.dims)));
    }
    if opts.restarts == 0 {
        return Err(Error::InvalidArgument("need at least one restart".into()));
    }
    if (0..n).any(|i| d.get(i, i) != 0.0) {
        return Err(Error::InvalidArgument("dissimilarity diagonal must be 0".into()));
    }
    let order = Order::new(d);
    if order.blocks.len() <= 2 {
        return Err(Error::Degenerate("all dissimilarities are equal".into()));
    }
    Ok(order)
}

fn solution(d: &SimilarityMatrix, opts: &NmdsOptions, restart: usize, best: Run) -> MdsSolution {
    MdsSolution {
        ids: d.ids().to_vec(),
        dims: opts.dims,
        points: procrustes::from_matrix(&best.points),
        stress: best.stress,
        r_squared: best.r_squared,
        iterations: best.iterations,
        seed: opts.seed,
        restarts: opts.restarts,
        best_restart: restart,
        history: best.history,
        config_hash: None,
    }
}

/// Best of `opts.restarts` random starts. Restart `r` draws its start from
/// stream `r` of `opts.seed`; the lowest stress wins, ties to the lowest `r`.
pub fn nmds(d: &SimilarityMatrix, opts: &NmdsOptions) -> Result<MdsSolution> {
    let order = prepare(d, opts)?;
    let runs: Vec<Run> =
        (0..opts.restarts).into_par_iter().map(|r| run(&order, d.len(), opts, rng::stream(opts.seed, r as u64))).collect();
    let (best_restart, best) = runs
        .into_iter()
        .enumerate()
        .reduce(|a, b| if b.1.stress < a.1.stress { b } else { a })
        .expect("at least one restart");
    Ok(solution(d, opts, best_restart, best))
}

/// The single restart `restart` of [`nmds`], with its full stress history.
pub fn nmds_restart(d: &SimilarityMatrix, opts: &NmdsOptions, restart: usize) -> Result<MdsSolution> {
    let order = prepare(d, opts)?;
    if restart >= opts.restarts {
        return Err(Error::InvalidArgument(format!("restart {restart} of {}", opts.restarts)));
    }
    let best = run(&order, d.len(), opts, rng::stream(opts.seed, restart as u64));
    Ok(solution(d, opts, restart, best))
}

impl MdsSolution {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse { path: path.into(), line: e.line(), message: e.to_string() })
    }

    /// Coordinates on the first two principal axes of the configuration.
    /// Each axis is signed so its largest-magnitude coordinate is positive.
    pub fn projection_2d(&self) -> Vec<(f64, f64)> {
        let x = procrustes::to_matrix(&self.points).expect("solution has points");
        let n = x.nrows() as f64;
        let mut c = x.clone();
        for mut col in c.column_iter_mut() {
            let mean = col.sum() / n;
            col.add_scalar_mut(-mean);
        }
        let eig = SymmetricEigen::new(c.transpose() * &c);
        let mut axes: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        axes.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let score = |axis: Option<&usize>| -> Vec<f64> {
            let Some(&a) = axis else { return vec![0.0; c.nrows()] };
            let s: Vec<f64> = (c.clone() * eig.eigenvectors.column(a)).iter().copied().collect();
            let top = s.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            if top < 0.0 { s.iter().map(|v| -v).collect() } else { s }
        };
        let (px, py) = (score(axes.first()), score(axes.get(1)));
        px.into_iter().zip(py).collect()
    }

    /// `id,x,y` rows of [`Self::projection_2d`].
    pub fn projection_csv(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            out.push_str(&format!("# {c}\n"));
        }
        out.push_str("id,x,y\n");
        for (id, (x, y)) in self.ids.iter().zip(self.projection_2d()) {
            out.push_str(&format!("{id},{},{}\n", sig17(x), sig17(y)));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planar(seed: u64, n: usize) -> Vec<Vec<f64>> {
        let mut r = rng::seeded(seed);
        (0..n).map(|_| vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]).collect()
    }

    fn dissimilarities(points: &[Vec<f64>]) -> SimilarityMatrix {
        let ids = (0..points.len()).map(|i| format!("p{i}")).collect();
        SimilarityMatrix::from_pairs(ids, MatrixKind::Dissimilarity, 0.0, |i, j| {
            Ok(points[i].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        })
        .unwrap()
    }

    #[test]
    fn to_dissimilarity_reverses_order() {
        let ids: Vec<String> = (0..3).map(|i| i.to_string()).collect();
        let s = SimilarityMatrix::new(ids, vec![1.0, 0.2, 0.7, 0.2, 1.0, 0.5, 0.7, 0.5, 1.0], MatrixKind::Similarity).unwrap();
        let d = to_dissimilarity(&s);
        assert_eq!(d.values(), &[0.0, 0.8, 0.30000000000000004, 0.8, 0.0, 0.5, 0.30000000000000004, 0.5, 0.0]);
        assert_eq!(d.kind(), MatrixKind::Dissimilarity);
        assert_eq!(to_dissimilarity(&d), d);
    }

    #[test]
    fn recovers_a_planar_configuration() {
        let truth = planar(11, 16);
        let opts = NmdsOptions { dims: 2, restarts: 8, seed: 3, ..Default::default() };
        let sol = nmds(&dissimilarities(&truth), &opts).unwrap();
        assert!(sol.stress < 0.01, "stress {}", sol.stress);
        let res = procrustes(&truth, &sol.points).unwrap().residual;
        assert!(res < 1e-3, "residual {res} stress {} iters {}", sol.stress, sol.iterations);
        assert!(sol.r_squared > 0.99);
        let col_means: Vec<f64> = (0..2).map(|j| sol.points.iter().map(|p| p[j]).sum::<f64>() / 16.0).collect();
        assert!(col_means.iter().all(|m| m.abs() < 1e-12));
    }

    #[test]
    fn stress_never_increases() {
        for ties in [Ties::Primary, Ties::Secondary] {
            let truth: Vec<Vec<f64>> = planar(5, 10).into_iter().map(|p| vec![p[0], p[1], p[0] * p[1]]).collect();
            let mut d = dissimilarities(&truth);
            // coarse rounding creates ties
            let rounded: Vec<f64> = d.values().iter().map(|v| (v * 4.0).round() / 4.0).collect();
            d = SimilarityMatrix::new(d.ids().to_vec(), rounded, MatrixKind::Dissimilarity).unwrap();
            let sol = nmds(&d, &NmdsOptions { dims: 2, restarts: 3, ties, max_iter: 300, ..Default::default() }).unwrap();
            for w in sol.history.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-15, "{ties:?}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn reproducible_and_validated() {
        let d = dissimilarities(&planar(2, 8));
        let opts = NmdsOptions { dims: 2, restarts: 4, seed: 9, ..Default::default() };
        let best = nmds(&d, &opts).unwrap();
        assert_eq!(best, nmds(&d, &opts).unwrap());
        let single = nmds_restart(&d, &opts, best.best_restart).unwrap();
        assert_eq!((single.points, single.stress), (best.points.clone(), best.stress));
        assert!(nmds_restart(&d, &opts, 4).is_err());
        assert!(nmds(&d, &NmdsOptions { dims: 8, ..opts.clone() }).is_err());
        let flat = SimilarityMatrix::from_pairs(d.ids().to_vec(), MatrixKind::Dissimilarity, 0.0, |_, _| Ok(1.0)).unwrap();
        assert!(matches!(nmds(&flat, &opts), Err(Error::Degenerate(_))));
        let sim = d.clone().with_kind(MatrixKind::Similarity);
        assert!(nmds(&sim, &opts).is_err());
    }

    #[test]
    fn projection_uses_principal_axes() {
        let points = vec![vec![-3.0, 0.1, 0.0], vec![4.0, -0.1, 0.0], vec![-0.5, 1.0, 0.2], vec![-0.5, -1.0, -0.2]];
        let sol = MdsSolution {
            ids: (0..4).map(|i| i.to_string()).collect(),
            dims: 3,
            points,
            stress: 0.0,
            r_squared: 1.0,
            iterations: 0,
            seed: 0,
            restarts: 1,
            best_restart: 0,
            history: vec![],
            config_hash: None,
        };
        let p = sol.projection_2d();
        // the first axis carries the long spread and is positive at its extreme
        assert!((p[1].0 - 4.0).abs() < 0.1 && (p[0].0 + 3.0).abs() < 0.1);
        let csv = sol.projection_csv(&["config=abc".into()]);
        assert!(csv.starts_with("# config=abc\nid,x,y\n0,"));
        let back = MdsSolution::from_json(&sol.to_json(), Path::new("s.json")).unwrap();
        assert_eq!(back.points, sol.points);
    }
}
