//! Facial graphs, face codes and rigid graph placement.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gabor::{self, BankParams, FilterBank, Jet};
use crate::imageio::GrayImage;
use crate::similarity;
use crate::{Error, Result};

/// Ordered facial points. Node `i` of two graphs marks the same facial
/// location; regular grids are row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceGraph {
    label: String,
    nodes: Vec<(f64, f64)>,
    shape: Option<(usize, usize)>,
}

impl FaceGraph {
    pub fn new(label: impl Into<String>, nodes: Vec<(f64, f64)>, shape: Option<(usize, usize)>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidGraph("graph has no nodes".into()));
        }
        if let Some(i) = nodes.iter().position(|(x, y)| !(x.is_finite() && y.is_finite())) {
            return Err(Error::InvalidGraph(format!("node {i} has a non-finite coordinate")));
        }
        if let Some((r, c)) = shape {
            if r * c != nodes.len() {
                return Err(Error::InvalidGraph(format!("{r}x{c} grid with {} nodes", nodes.len())));
            }
        }
        Ok(Self { label: label.into(), nodes, shape })
    }

    /// `rows`×`cols` lattice, row-major from `top_left = (x, y)`.
    pub fn regular_grid(rows: usize, cols: usize, top_left: (f64, f64), spacing: f64) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::InvalidGraph(format!("grid must be at least 2x2, got {rows}x{cols}")));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidGraph(format!("spacing {spacing} must be positive")));
        }
        let nodes = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| (top_left.0 + c as f64 * spacing, top_left.1 + r as f64 * spacing)))
            .collect();
        Self::new("grid", nodes, Some((rows, cols)))
    }

    /// The default 7×7 grid for 128×128 faces: nodes 32..=92 on both axes,
    /// leaving room for the largest default kernel plus a few pixels of shift.
    pub fn default_grid() -> Self {
        Self::regular_grid(7, 7, (32.0, 32.0), 10.0).expect("valid default grid")
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn nodes(&self) -> &[(f64, f64)] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self) -> Option<(usize, usize)> {
        self.shape
    }

    pub fn centroid(&self) -> (f64, f64) {
        let n = self.nodes.len() as f64;
        let (sx, sy) = self.nodes.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        (sx / n, sy / n)
    }

    /// Every node moved by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        self.transformed(1.0, (dx, dy))
    }

    /// Scales about the centroid, then translates. Scale 1 with zero shift
    /// returns the nodes bit for bit.
    pub fn transformed(&self, scale: f64, shift: (f64, f64)) -> Self {
        let (cx, cy) = self.centroid();
        let ox = cx * (1.0 - scale) + shift.0;
        let oy = cy * (1.0 - scale) + shift.1;
        Self {
            label: self.label.clone(),
            nodes: self.nodes.iter().map(|&(x, y)| (scale * x + ox, scale * y + oy)).collect(),
            shape: self.shape,
        }
    }

    /// True when a support of `radius` around every node (including the
    /// neighbours used for sub-pixel interpolation) lies inside `img`.
    pub fn fits(&self, width: usize, height: usize, radius: usize) -> bool {
        self.first_outside(width, height, radius).is_none()
    }

    fn first_outside(&self, width: usize, height: usize, radius: usize) -> Option<usize> {
        let r = radius as f64;
        self.nodes.iter().position(|&(x, y)| {
            !(x.floor() - r >= 0.0 && y.floor() - r >= 0.0 && x.ceil() + r < width as f64 && y.ceil() + r < height as f64)
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GraphFile::from(self)).expect("graph serializes")
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(text).map_err(|e| parse_error(path, e))?;
        file.into_graph(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }
}

fn parse_error(path: &Path, e: serde_json::Error) -> Error {
    let message = e.to_string();
    // serde_json appends " at line L column C"; keep only the description
    let message = match message.rfind(" at line ") {
        Some(i) => message[..i].to_string(),
        None => message,
    };
    Error::Parse { path: path.into(), line: e.line(), message }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct GraphFile {
    face_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cols: Option<usize>,
    nodes: Vec<NodeEntry>,
}

/// Either a bare `[x, y]` in canonical order or an explicitly indexed node.
#[derive(Serialize)]
#[serde(untagged)]
enum NodeEntry {
    Plain([f64; 2]),
    Indexed { index: usize, x: f64, y: f64 },
}

// Hand-written so that a bad coordinate is reported where it occurs rather
// than after the whole node.
impl<'de> Deserialize<'de> for NodeEntry {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::{self, MapAccess, SeqAccess, Visitor};

        struct NodeVisitor;

        impl<'de> Visitor<'de> for NodeVisitor {
            type Value = NodeEntry;

            fn expecting(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str("a node as [x, y] or {\"index\": i, \"x\": x, \"y\": y}")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<NodeEntry, A::Error> {
                let x: f64 = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let y: f64 = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(1, &self))?;
                if seq.next_element::<de::IgnoredAny>()?.is_some() {
                    return Err(de::Error::invalid_length(3, &self));
                }
                Ok(NodeEntry::Plain([x, y]))
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<NodeEntry, A::Error> {
                let (mut index, mut x, mut y) = (None, None, None);
                while let Some(key) = map.next_key::<String>()? {
                    match key.as_str() {
                        "index" if index.is_none() => index = Some(map.next_value::<usize>()?),
                        "x" if x.is_none() => x = Some(map.next_value::<f64>()?),
                        "y" if y.is_none() => y = Some(map.next_value::<f64>()?),
                        "index" | "x" | "y" => return Err(de::Error::custom(format!("duplicate field `{key}`"))),
                        other => return Err(de::Error::unknown_field(other, &["index", "x", "y"])),
                    }
                }
                Ok(NodeEntry::Indexed {
                    index: index.ok_or_else(|| de::Error::missing_field("index"))?,
                    x: x.ok_or_else(|| de::Error::missing_field("x"))?,
                    y: y.ok_or_else(|| de::Error::missing_field("y"))?,
                })
            }
        }

        d.deserialize_any(NodeVisitor)
    }
}

impl From<&FaceGraph> for GraphFile {
    fn from(g: &FaceGraph) -> Self {
        Self {
            face_id: g.label.clone(),
            rows: g.shape.map(|s| s.0),
            cols: g.shape.map(|s| s.1),
            nodes: g.nodes.iter().map(|&(x, y)| NodeEntry::Plain([x, y])).collect(),
        }
    }
}

impl GraphFile {
    fn into_graph(self, path: &Path) -> Result<FaceGraph> {
        let shape = match (self.rows, self.cols) {
            (Some(r), Some(c)) => Some((r, c)),
            (None, None) => None,
            _ => return Err(Error::InvalidGraph(format!("{}: rows and cols must be given together", path.display()))),
        };
        let indexed = self.nodes.iter().filter(|n| matches!(n, NodeEntry::Indexed { .. })).count();
        let nodes = if indexed == 0 {
            self.nodes.into_iter().map(|n| match n {
                NodeEntry::Plain([x, y]) => (x, y),
                NodeEntry::Indexed { .. } => unreachable!(),
            }).collect()
        } else if indexed == self.nodes.len() {
            let n = self.nodes.len();
            let mut slots: Vec<Option<(f64, f64)>> = vec![None; n];
            for entry in self.nodes {
                let NodeEntry::Indexed { index, x, y } = entry else { unreachable!() };
                let slot = slots.get_mut(index).ok_or_else(|| {
                    Error::InvalidGraph(format!("{}: node index {index} out of range for {n} nodes", path.display()))
                })?;
                if slot.replace((x, y)).is_some() {
                    return Err(Error::InvalidGraph(format!("{}: duplicate node index {index}", path.display())));
                }
            }
            slots.into_iter().map(|s| s.expect("indices form a permutation")).collect()
        } else {
            return Err(Error::InvalidGraph(format!("{}: mixes indexed and plain nodes", path.display())));
        };
        FaceGraph::new(self.face_id, nodes, shape)
    }
}

/// A face: its graph and one jet per node.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceCode {
    pub face_id: String,
    pub graph: FaceGraph,
    pub jets: Vec<Jet>,
    pub bank_params: BankParams,
}

impl FaceCode {
    /// Extracts jets at every node of `graph`.
    pub fn extract(face_id: impl Into<String>, img: &GrayImage, graph: &FaceGraph, bank: &FilterBank) -> Result<Self> {
        let jets = extract_jets(img, graph, bank)?;
        Ok(Self { face_id: face_id.into(), graph: graph.clone(), jets, bank_params: bank.params().clone() })
    }

    pub fn validate(&self) -> Result<()> {
        self.bank_params.validate()?;
        if self.jets.len() != self.graph.len() {
            return Err(Error::Incompatible(format!(
                "{}: {} jets for {} nodes",
                self.face_id,
                self.jets.len(),
                self.graph.len()
            )));
        }
        let channels = self.bank_params.channels();
        for (i, j) in self.jets.iter().enumerate() {
            if j.len() != channels {
                return Err(Error::Incompatible(format!(
                    "{}: jet {i} has {} components, bank has {channels}",
                    self.face_id,
                    j.len()
                )));
            }
            Jet::new(j.amplitudes().to_vec())?;
        }
        Ok(())
    }

    /// JSON with every number written to full precision. `config_hash` is
    /// recorded when given.
    pub fn to_json(&self, config_hash: Option<&str>) -> String {
        let file = CodeFile {
            face_id: self.face_id.clone(),
            bank_params: self.bank_params.clone(),
            graph: GraphFile::from(&self.graph),
            jets: self.jets.clone(),
            config_hash: config_hash.map(str::to_string),
        };
        serde_json::to_string_pretty(&file).expect("code serializes")
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let file: CodeFile = serde_json::from_str(text).map_err(|e| parse_error(path, e))?;
        let code = Self {
            face_id: file.face_id,
            graph: file.graph.into_graph(path)?,
            jets: file.jets,
            bank_params: file.bank_params,
        };
        code.validate()?;
        Ok(code)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CodeFile {
    face_id: String,
    bank_params: BankParams,
    graph: GraphFile,
    jets: Vec<Jet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
}

/// Jets at every node, in node order.
pub fn extract_jets(img: &GrayImage, graph: &FaceGraph, bank: &FilterBank) -> Result<Vec<Jet>> {
    let radius = bank.max_radius();
    if let Some(i) = graph.first_outside(img.width(), img.height(), radius) {
        let (x, y) = graph.nodes[i];
        return Err(Error::OutOfBounds { x, y, radius, width: img.width(), height: img.height() });
    }
    graph.nodes.par_iter().map(|&p| gabor::jet(img, bank, p)).collect()
}

/// Discretized search over isotropic scale about the graph centroid and
/// translation. Candidates are `i * step` for every integer `i` with
/// `|i * step| <= max`, so the identity is always included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidSearch {
    pub max_shift: f64,
    pub shift_step: f64,
    pub max_scale_dev: f64,
    pub scale_step: f64,
}

impl Default for RigidSearch {
    fn default() -> Self {
        Self { max_shift: 6.0, shift_step: 1.0, max_scale_dev: 0.1, scale_step: 0.05 }
    }
}

impl RigidSearch {
    fn offsets(max: f64, step: f64) -> Result<Vec<f64>> {
        if !(max.is_finite() && max >= 0.0) {
            return Err(Error::InvalidArgument(format!("search range {max} must be nonnegative")));
        }
        if max == 0.0 {
            return Ok(vec![0.0]);
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidArgument(format!("search step {step} must be positive")));
        }
        let n = (max / step + 1e-9).floor() as i64;
        Ok((-n..=n).map(|i| i as f64 * step).collect())
    }

    /// All candidates as `(scale, (dx, dy))`, scale-major.
    pub fn candidates(&self) -> Result<Vec<(f64, (f64, f64))>> {
        let shifts = Self::offsets(self.max_shift, self.shift_step)?;
        let scales = Self::offsets(self.max_scale_dev, self.scale_step)?;
        if let Some(s) = scales.iter().find(|s| 1.0 + **s <= 0.0) {
            return Err(Error::InvalidArgument(format!("scale {} is not positive", 1.0 + s)));
        }
        let shifts = &shifts;
        Ok(scales
            .iter()
            .flat_map(|&s| shifts.iter().flat_map(move |&dy| shifts.iter().map(move |&dx| (1.0 + s, (dx, dy)))))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub graph: FaceGraph,
    pub scale: f64,
    pub shift: (f64, f64),
    pub similarity: f64,
}

/// Places `reference.graph` on `img` by exhaustive rigid search, maximizing
/// the LAC similarity between the jets found on `img` and the reference jets.
/// Ties go to the smallest shift, then the scale closest to 1, then the
/// earliest candidate.
pub fn rigid_place(img: &GrayImage, reference: &FaceCode, bank: &FilterBank, search: &RigidSearch) -> Result<Placement> {
    if &reference.bank_params != bank.params() {
        return Err(Error::Incompatible("reference code was built with different bank parameters".into()));
    }
    let candidates = search.candidates()?;
    let radius = bank.max_radius();
    let scored: Vec<Option<f64>> = candidates
        .par_iter()
        .map(|&(scale, shift)| {
            let g = reference.graph.transformed(scale, shift);
            if !g.fits(img.width(), img.height(), radius) {
                return Ok(None);
            }
            let jets = extract_jets(img, &g, bank)?;
            similarity::mean_jet_similarity(&jets, &reference.jets).map(Some)
        })
        .collect::<Result<_>>()?;

    let key = |i: usize| {
        let (scale, (dx, dy)): (f64, (f64, f64)) = candidates[i];
        ((dx * dx + dy * dy).sqrt(), (scale - 1.0).abs())
    };
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scored.iter().enumerate() {
        let Some(s) = *s else { continue };
        best = match best {
            None => Some((i, s)),
            Some((j, b)) if s > b || (s == b && key(i) < key(j)) => Some((i, s)),
            keep => keep,
        };
    }
    let (i, similarity) = best.ok_or(Error::NoPlacement)?;
    let (scale, shift) = candidates[i];
    Ok(Placement { graph: reference.graph.transformed(scale, shift), scale, shift, similarity })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{self, FaceParams};
    use std::path::PathBuf;

    #[test]
    fn regular_grid_layout() {
        let g = FaceGraph::regular_grid(2, 2, (10.0, 10.0), 5.0).unwrap();
        assert_eq!(g.nodes(), &[(10.0, 10.0), (15.0, 10.0), (10.0, 15.0), (15.0, 15.0)]);
        assert!(FaceGraph::regular_grid(1, 3, (0.0, 0.0), 1.0).is_err());
        assert!(FaceGraph::regular_grid(3, 3, (0.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn default_grid_clears_the_largest_kernel() {
        let g = FaceGraph::default_grid();
        assert_eq!(g.len(), 49);
        let bank = FilterBank::new(&BankParams::default()).unwrap();
        assert!(g.fits(128, 128, bank.max_radius()));
        for (dx, dy) in [(-2.0, -2.0), (2.0, 2.0), (2.0, -2.0)] {
            assert!(g.translated(dx, dy).fits(128, 128, bank.max_radius()));
        }
        assert!(!g.translated(-3.0, 0.0).fits(128, 128, bank.max_radius()));
    }

    #[test]
    fn graph_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = FaceGraph::new("face07", vec![(1.5, 2.25), (0.1, 1e-7), (100.0, 3.0)], None).unwrap();
        let p = dir.path().join("g.json");
        g.save(&p).unwrap();
        assert_eq!(FaceGraph::load(&p).unwrap(), g);
        let grid = FaceGraph::default_grid().with_label("x");
        grid.save(&p).unwrap();
        assert_eq!(FaceGraph::load(&p).unwrap(), grid);
    }

    #[test]
    fn graph_file_errors() {
        let p = PathBuf::from("g.json");
        let bad = "{\n  \"face_id\": \"a\",\n  \"nodes\": [\n    [1, 2],\n    [\"x\", 2]\n  ]\n}";
        match FaceGraph::from_json(bad, &p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
        let dup = r#"{"face_id": "a", "nodes": [{"index": 0, "x": 1, "y": 1}, {"index": 0, "x": 2, "y": 2}]}"#;
        assert!(matches!(FaceGraph::from_json(dup, &p), Err(Error::InvalidGraph(m)) if m.contains("duplicate")));
        let shape = r#"{"face_id": "a", "rows": 2, "cols": 2, "nodes": [[1, 1]]}"#;
        assert!(FaceGraph::from_json(shape, &p).is_err());
    }

    #[test]
    fn indexed_nodes_are_put_in_canonical_order() {
        let p = PathBuf::from("g.json");
        let text = r#"{"face_id": "a", "nodes": [{"index": 2, "x": 3, "y": 0}, {"index": 0, "x": 1, "y": 0}, {"index": 1, "x": 2, "y": 0}]}"#;
        let g = FaceGraph::from_json(text, &p).unwrap();
        assert_eq!(g.nodes(), &[(1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]);
    }

    #[test]
    fn hand_placed_fixture_loads() {
        let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/hand_placed_49.json");
        let g = FaceGraph::load(&p).unwrap();
        assert_eq!(g.len(), 49);
        assert_eq!(g.shape(), Some((7, 7)));
        // row-major: y is nondecreasing by row, x increases within a row
        for r in 0..7 {
            let row = &g.nodes()[r * 7..(r + 1) * 7];
            assert!(row.windows(2).all(|w| w[1].0 > w[0].0));
        }
        for r in 1..7 {
            let prev: f64 = g.nodes()[(r - 1) * 7..r * 7].iter().map(|n| n.1).sum();
            let cur: f64 = g.nodes()[r * 7..(r + 1) * 7].iter().map(|n| n.1).sum();
            assert!(cur > prev);
        }
        let bank = FilterBank::new(&BankParams::default()).unwrap();
        assert!(g.fits(128, 128, bank.max_radius()));
    }

    #[test]
    fn extraction_checks_bounds() {
        let bank = FilterBank::new(&BankParams::default()).unwrap();
        let img = synth::render(&FaceParams::default(), 128, 128).unwrap();
        let g = FaceGraph::default_grid().translated(-5.0, 0.0);
        assert!(matches!(FaceCode::extract("a", &img, &g, &bank), Err(Error::OutOfBounds { .. })));
    }

    #[test]
    fn code_file_round_trip_and_validation() {
        let bank = FilterBank::new(&BankParams::default()).unwrap();
        let img = synth::render(&FaceParams::default(), 128, 128).unwrap();
        let code = FaceCode::extract("a", &img, &FaceGraph::default_grid(), &bank).unwrap();
        let text = code.to_json(Some("abc"));
        let back = FaceCode::from_json(&text, Path::new("a.json")).unwrap();
        assert_eq!(back, code);
        let mut broken = code.clone();
        broken.jets.pop();
        assert!(FaceCode::from_json(&broken.to_json(None), Path::new("b.json")).is_err());
    }

    #[test]
    fn search_candidates_include_identity() {
        let c = RigidSearch { max_shift: 2.0, shift_step: 1.0, max_scale_dev: 0.1, scale_step: 0.05 }.candidates().unwrap();
        assert_eq!(c.len(), 5 * 5 * 5);
        assert!(c.contains(&(1.0, (0.0, 0.0))));
        assert!(RigidSearch { shift_step: 0.0, ..Default::default() }.candidates().is_err());
    }

    #[test]
    fn self_match_returns_reference_graph() {
        let bank = FilterBank::new(&BankParams::default()).unwrap();
        let img = synth::render(&FaceParams::default(), 128, 128).unwrap();
        let reference = FaceCode::extract("a", &img, &FaceGraph::default_grid(), &bank).unwrap();
        let search = RigidSearch { max_shift: 2.0, shift_step: 1.0, max_scale_dev: 0.0, scale_step: 0.0 };
        let p = rigid_place(&img, &reference, &bank, &search).unwrap();
        assert_eq!(p.graph, reference.graph);
        assert_eq!((p.scale, p.shift), (1.0, (0.0, 0.0)));
        assert!((p.similarity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_placement_when_everything_is_outside() {
        let bank = FilterBank::new(&BankParams::default()).unwrap();
        let img = synth::render(&FaceParams::default(), 128, 128).unwrap();
        let reference = FaceCode::extract("a", &img, &FaceGraph::default_grid(), &bank).unwrap();
        let small = GrayImage::constant(64, 64, 0.5).unwrap();
        let search = RigidSearch { max_shift: 1.0, shift_step: 1.0, max_scale_dev: 0.0, scale_step: 0.0 };
        assert!(matches!(rigid_place(&small, &reference, &bank, &search), Err(Error::NoPlacement)));
    }
}
