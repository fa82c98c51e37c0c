//! LAC similarity, the pixel-patch control measure and similarity matrices.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::gabor::Jet;
use crate::graph::{FaceCode, FaceGraph};
use crate::imageio::GrayImage;
use crate::numfmt::sig17;
use crate::{Error, Result};

/// Normalized dot product of two jets.
pub fn jet_similarity(a: &Jet, b: &Jet) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Incompatible(format!("jets of length {} and {}", a.len(), b.len())));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateJet { context: None });
    }
    let dot: f64 = a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(0.0, 1.0))
}

/// Unweighted mean of [`jet_similarity`] over corresponding jets. This is the
/// single objective shared by face comparison and graph placement.
pub fn mean_jet_similarity(a: &[Jet], b: &[Jet]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Incompatible(format!("{} versus {} nodes", a.len(), b.len())));
    }
    let mut sum = 0.0;
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        sum += jet_similarity(x, y).map_err(|e| match e {
            Error::DegenerateJet { .. } => Error::DegenerateJet { context: Some(format!("node {i}")) },
            other => other,
        })?;
    }
    Ok(sum / a.len() as f64)
}

pub fn lac_similarity(a: &FaceCode, b: &FaceCode) -> Result<f64> {
    if a.bank_params != b.bank_params {
        return Err(Error::Incompatible(format!("{} and {} use different filter banks", a.face_id, b.face_id)));
    }
    if a.jets.len() != b.jets.len() {
        return Err(Error::Incompatible(format!(
            "{} has {} nodes, {} has {}",
            a.face_id,
            a.jets.len(),
            b.face_id,
            b.jets.len()
        )));
    }
    mean_jet_similarity(&a.jets, &b.jets).map_err(|e| match e {
        Error::DegenerateJet { context } => Error::DegenerateJet {
            context: Some(format!("{} vs {}: {}", a.face_id, b.face_id, context.unwrap_or_default())),
        },
        other => other,
    })
}

fn patch(img: &GrayImage, node: (f64, f64), size: usize) -> Result<Vec<f64>> {
    let half = (size / 2) as i64;
    let (cx, cy) = (node.0.round() as i64, node.1.round() as i64);
    let fits = node.0.is_finite()
        && node.1.is_finite()
        && cx - half >= 0
        && cy - half >= 0
        && cx + half < img.width() as i64
        && cy + half < img.height() as i64;
    if !fits {
        return Err(Error::OutOfBounds { x: node.0, y: node.1, radius: half as usize, width: img.width(), height: img.height() });
    }
    let mut v = Vec::with_capacity(size * size);
    for y in cy - half..=cy + half {
        for x in cx - half..=cx + half {
            v.push(img.get(x as usize, y as usize));
        }
    }
    Ok(v)
}

/// Negated mean Euclidean distance between `patch`×`patch` pixel vectors
/// centered on corresponding nodes. Larger is more similar; 0 is identity.
pub fn pixel_similarity(img_a: &GrayImage, graph_a: &FaceGraph, img_b: &GrayImage, graph_b: &FaceGraph, patch_size: usize) -> Result<f64> {
    if patch_size % 2 == 0 {
        return Err(Error::InvalidArgument(format!("patch size {patch_size} must be odd")));
    }
    if graph_a.len() != graph_b.len() {
        return Err(Error::Incompatible(format!("graphs with {} and {} nodes", graph_a.len(), graph_b.len())));
    }
    let mut total = 0.0;
    for (&na, &nb) in graph_a.nodes().iter().zip(graph_b.nodes()) {
        let pa = patch(img_a, na, patch_size)?;
        let pb = patch(img_b, nb, patch_size)?;
        total += pa.iter().zip(&pb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    }
    Ok(-(total / graph_a.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Similarity,
    Dissimilarity,
    /// Negated distances: ordered like similarities, maximum 0 on the diagonal.
    DissimilarityDerived,
}

impl fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatrixKind::Similarity => "similarity",
            MatrixKind::Dissimilarity => "dissimilarity",
            MatrixKind::DissimilarityDerived => "dissimilarity-derived",
        })
    }
}

impl FromStr for MatrixKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "similarity" => Ok(MatrixKind::Similarity),
            "dissimilarity" => Ok(MatrixKind::Dissimilarity),
            "dissimilarity-derived" => Ok(MatrixKind::DissimilarityDerived),
            other => Err(format!("unknown matrix kind {other:?}")),
        }
    }
}

/// Symmetric matrix of pairwise values over labelled faces.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    ids: Vec<String>,
    values: Vec<f64>,
    kind: MatrixKind,
}

impl SimilarityMatrix {
    pub fn new(ids: Vec<String>, values: Vec<f64>, kind: MatrixKind) -> Result<Self> {
        let n = ids.len();
        if n == 0 {
            return Err(Error::InvalidArgument("matrix has no faces".into()));
        }
        if values.len() != n * n {
            return Err(Error::InvalidArgument(format!("{} values for {n} faces", values.len())));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::InvalidArgument(format!("duplicate face id {dup:?}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("matrix has non-finite values".into()));
        }
        for i in 0..n {
            for j in i + 1..n {
                if values[i * n + j] != values[j * n + i] {
                    return Err(Error::InvalidArgument(format!("matrix is not symmetric at ({}, {})", ids[i], ids[j])));
                }
            }
        }
        Ok(Self { ids, values, kind })
    }

    /// Builds a matrix from `f(i, j)` evaluated for `i < j`; the diagonal is
    /// `diagonal`.
    pub fn from_pairs(ids: Vec<String>, kind: MatrixKind, diagonal: f64, f: impl Fn(usize, usize) -> Result<f64> + Sync) -> Result<Self> {
        let n = ids.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let vals: Vec<f64> = pairs.par_iter().map(|&(i, j)| f(i, j)).collect::<Result<_>>()?;
        let mut values = vec![diagonal; n * n];
        for (&(i, j), v) in pairs.iter().zip(vals) {
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
        Self::new(ids, values, kind)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ids.len() + j]
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.ids.iter().position(|x| x == id).ok_or_else(|| Error::UnknownId(id.to_string()))
    }

    pub fn get_by_id(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.get(self.index_of(a)?, self.index_of(b)?))
    }

    /// Off-diagonal values for `i < j`, row by row.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.len();
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| self.get(i, j)).collect()
    }

    /// Upper-triangle values after reordering to `ids`.
    pub fn upper_triangle_for(&self, ids: &[String]) -> Result<Vec<f64>> {
        let idx: Vec<usize> = ids.iter().map(|id| self.index_of(id)).collect::<Result<_>>()?;
        let n = idx.len();
        Ok((0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| self.get(idx[i], idx[j])).collect())
    }

    pub fn with_kind(self, kind: MatrixKind) -> Self {
        Self { kind, ..self }
    }

    /// CSV: `#` comment lines (kind first), a header row `id,<ids>`, then one
    /// row per face.
    pub fn to_csv(&self, extra_comments: &[String]) -> String {
        let mut out = format!("# kind={}\n", self.kind);
        for c in extra_comments {
            out.push_str(&format!("# {c}\n"));
        }
        out.push_str("id");
        for id in &self.ids {
            out.push(',');
            out.push_str(id);
        }
        out.push('\n');
        let n = self.len();
        for i in 0..n {
            out.push_str(&self.ids[i]);
            for j in 0..n {
                out.push(',');
                out.push_str(&sig17(self.get(i, j)));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse { path: path.into(), line, message };
        let mut kind = None;
        let mut ids: Option<Vec<String>> = None;
        let mut values = Vec::new();
        let mut row = 0;
        for (ln, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r'))) {
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(k) = comment.trim().strip_prefix("kind=") {
                    kind = Some(k.trim().parse::<MatrixKind>().map_err(|m| err(ln, m))?);
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            match &ids {
                None => {
                    if cells.first() != Some(&"id") {
                        return Err(err(ln, "header row must start with \"id\"".into()));
                    }
                    ids = Some(cells[1..].iter().map(|s| s.to_string()).collect());
                }
                Some(ids) => {
                    if row >= ids.len() {
                        return Err(err(ln, "more rows than header ids".into()));
                    }
                    if cells[0] != ids[row] {
                        return Err(err(ln, format!("row id {:?} does not match header id {:?}", cells[0], ids[row])));
                    }
                    if cells.len() != ids.len() + 1 {
                        return Err(err(ln, format!("expected {} values, found {}", ids.len(), cells.len() - 1)));
                    }
                    for c in &cells[1..] {
                        values.push(c.parse::<f64>().map_err(|_| err(ln, format!("not a number: {c:?}")))?);
                    }
                    row += 1;
                }
            }
        }
        let ids = ids.ok_or_else(|| err(1, "missing header row".into()))?;
        if row != ids.len() {
            return Err(err(text.lines().count(), format!("expected {} rows, found {row}", ids.len())));
        }
        let kind = kind.ok_or_else(|| err(1, "missing \"# kind=\" line".into()))?;
        Self::new(ids, values, kind)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text, path)
    }
}

/// LAC similarities between all codes; diagonal 1.
pub fn similarity_matrix(codes: &[FaceCode]) -> Result<SimilarityMatrix> {
    let ids = codes.iter().map(|c| c.face_id.clone()).collect();
    SimilarityMatrix::from_pairs(ids, MatrixKind::Similarity, 1.0, |i, j| lac_similarity(&codes[i], &codes[j]))
}

/// A face for the pixel control: id, image and graph.
pub struct PixelFace<'a> {
    pub id: &'a str,
    pub image: &'a GrayImage,
    pub graph: &'a FaceGraph,
}

pub fn pixel_similarity_matrix(faces: &[PixelFace<'_>], patch_size: usize) -> Result<SimilarityMatrix> {
    if patch_size % 2 == 0 {
        return Err(Error::InvalidArgument(format!("patch size {patch_size} must be odd")));
    }
    let ids = faces.iter().map(|f| f.id.to_string()).collect();
    SimilarityMatrix::from_pairs(ids, MatrixKind::DissimilarityDerived, 0.0, |i, j| {
        pixel_similarity(faces[i].image, faces[i].graph, faces[j].image, faces[j].graph, patch_size)
    })
}
