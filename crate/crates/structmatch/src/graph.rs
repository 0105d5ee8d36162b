//! Attributed graphs over scene regions and model classes, their training,
//! and the vertex / edge dissimilarities the matcher blends.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ClassSpace;
use crate::regions::{
    centroid_vector, pairwise_region_distances, region_mean_probability, Region, RegionSet,
};
use crate::tensor::{LabelMap, ProbabilityTensor};

/// Which spatial relationship the edges carry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationFamily {
    /// Edges store min/max boundary distances; vertices store mean scores.
    Distance,
    /// Edges store the normalized centroid displacement and its norm;
    /// vertices additionally store their diameter.
    Direction,
}

impl fmt::Display for RelationFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelationFamily::Distance => "distance",
            RelationFamily::Direction => "direction",
        })
    }
}

impl std::str::FromStr for RelationFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distance" => Ok(RelationFamily::Distance),
            "direction" => Ok(RelationFamily::Direction),
            other => Err(Error::InvalidParameter(format!(
                "unknown relation family {other:?} (expected \"distance\" or \"direction\")"
            ))),
        }
    }
}

/// Per-vertex attributes. `diameter` is present exactly in the direction
/// family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexAttr {
    /// Mean class scores in channel space, summing to 1.
    pub prob: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diameter: Option<f64>,
}

/// Per-edge attributes; the variant must match the graph's family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EdgeAttr {
    Distance { d_min: f64, d_max: f64 },
    Direction { v: Vec<f64>, norm: f64 },
}

impl EdgeAttr {
    pub fn family(&self) -> RelationFamily {
        match self {
            EdgeAttr::Distance { .. } => RelationFamily::Distance,
            EdgeAttr::Direction { .. } => RelationFamily::Direction,
        }
    }

    fn zero(family: RelationFamily, ndim: usize) -> Self {
        match family {
            RelationFamily::Distance => EdgeAttr::Distance {
                d_min: 0.0,
                d_max: 0.0,
            },
            RelationFamily::Direction => EdgeAttr::Direction {
                v: vec![0.0; ndim],
                norm: 0.0,
            },
        }
    }
}

/// Complete directed graph over the regions of one scene. Vertex i is region
/// id i; self-edges do not exist.
#[derive(Clone, Debug)]
pub struct SceneGraph {
    family: RelationFamily,
    vertices: Vec<VertexAttr>,
    edges: Vec<EdgeAttr>,
}

impl SceneGraph {
    /// Assembles a graph from already-computed attributes. `edges` is the
    /// dense n*n row-major table; diagonal entries are ignored.
    pub fn from_parts(
        family: RelationFamily,
        vertices: Vec<VertexAttr>,
        edges: Vec<EdgeAttr>,
    ) -> Result<Self> {
        validate_parts(family, &vertices, &edges, vertices.len())?;
        Ok(Self {
            family,
            vertices,
            edges,
        })
    }

    pub fn family(&self) -> RelationFamily {
        self.family
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Directed edges in the complete graph: n * (n - 1).
    pub fn edge_count(&self) -> usize {
        self.vertices.len() * self.vertices.len().saturating_sub(1)
    }

    pub fn vertex(&self, i: usize) -> &VertexAttr {
        &self.vertices[i]
    }

    pub fn edge(&self, i: usize, j: usize) -> &EdgeAttr {
        debug_assert_ne!(i, j, "self-edges do not exist");
        &self.edges[i * self.vertices.len() + j]
    }
}

fn validate_parts(
    family: RelationFamily,
    vertices: &[VertexAttr],
    edges: &[EdgeAttr],
    n: usize,
) -> Result<()> {
    if vertices.is_empty() {
        return Err(Error::EmptyRegionSet);
    }
    if edges.len() != n * n {
        return Err(Error::Shape(format!(
            "edge table holds {} entries, {n} vertices need {}",
            edges.len(),
            n * n
        )));
    }
    let prob_len = vertices[0].prob.len();
    for v in vertices {
        if v.prob.len() != prob_len {
            return Err(Error::AttrLength {
                left: prob_len,
                right: v.prob.len(),
            });
        }
        let has_diameter = v.diameter.is_some();
        if has_diameter != (family == RelationFamily::Direction) {
            return Err(Error::InvalidParameter(format!(
                "vertex diameter must be present exactly in the direction family (family {family})"
            )));
        }
    }
    for (idx, e) in edges.iter().enumerate() {
        let (i, j) = (idx / n, idx % n);
        if i != j && e.family() != family {
            return Err(Error::FamilyMismatch {
                left: family,
                right: e.family(),
            });
        }
    }
    Ok(())
}

/// Builds the scene graph of a region set: one vertex per region with its
/// mean score vector (and diameter in the direction family), plus every
/// ordered pair's spatial relation.
pub fn build_scene_graph(
    rs: &RegionSet,
    t: &ProbabilityTensor,
    family: RelationFamily,
) -> Result<SceneGraph> {
    if rs.is_empty() {
        return Err(Error::EmptyRegionSet);
    }
    let c_s = rs.scene_diagonal();
    let ndim = rs.dims().ndim();
    let n = rs.len();

    let mut vertices = Vec::with_capacity(n);
    for r in rs.regions() {
        vertices.push(VertexAttr {
            prob: region_mean_probability(r, t)?,
            diameter: (family == RelationFamily::Direction).then(|| r.diameter()),
        });
    }

    let mut edges = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                edges.push(EdgeAttr::zero(family, ndim));
                continue;
            }
            edges.push(relation(rs.region(i), rs.region(j), c_s, ndim, family)?);
        }
    }

    SceneGraph::from_parts(family, vertices, edges)
}

/// The spatial relation of an ordered region pair, in the requested family.
fn relation(
    a: &Region,
    b: &Region,
    c_s: f64,
    ndim: usize,
    family: RelationFamily,
) -> Result<EdgeAttr> {
    match family {
        RelationFamily::Distance => {
            let (d_min, d_max) = pairwise_region_distances(a, b, c_s)?;
            Ok(EdgeAttr::Distance { d_min, d_max })
        }
        RelationFamily::Direction => {
            let (v, norm) = centroid_vector(a, b, c_s);
            Ok(EdgeAttr::Direction {
                v: v[..ndim].to_vec(),
                norm,
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub num_samples: usize,
}

/// Class-level structural model: one vertex per class (1..=N), attributes
/// averaged over training annotations, complete directed edge set.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelGraph {
    family: RelationFamily,
    classes: ClassSpace,
    class_names: Vec<String>,
    ndim: usize,
    vertices: Vec<VertexAttr>,
    edges: Vec<EdgeAttr>,
    training: TrainingMeta,
}

impl ModelGraph {
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        family: RelationFamily,
        classes: ClassSpace,
        class_names: Option<Vec<String>>,
        ndim: usize,
        vertices: Vec<VertexAttr>,
        edges: Vec<EdgeAttr>,
        training: TrainingMeta,
    ) -> Result<Self> {
        let n = classes.num_classes();
        if vertices.len() != n {
            return Err(Error::Shape(format!(
                "{} vertex attributes for {n} classes",
                vertices.len()
            )));
        }
        if ndim != 2 && ndim != 3 {
            return Err(Error::Shape(format!("model ndim must be 2 or 3, got {ndim}")));
        }
        validate_parts(family, &vertices, &edges, n)?;
        for v in &vertices {
            if v.prob.len() != classes.channels() {
                return Err(Error::AttrLength {
                    left: classes.channels(),
                    right: v.prob.len(),
                });
            }
        }
        let class_names = match class_names {
            Some(names) => {
                if names.len() != n {
                    return Err(Error::Shape(format!(
                        "{} class names for {n} classes",
                        names.len()
                    )));
                }
                names
            }
            None => (1..=n).map(|c| format!("class_{c}")).collect(),
        };
        Ok(Self {
            family,
            classes,
            class_names,
            ndim,
            vertices,
            edges,
            training,
        })
    }

    pub fn family(&self) -> RelationFamily {
        self.family
    }

    pub fn class_space(&self) -> &ClassSpace {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.num_classes()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn ndim(&self) -> usize {
        self.ndim
    }

    pub fn training(&self) -> TrainingMeta {
        self.training
    }

    /// Vertex of the 0-based model index (class id minus one).
    pub fn vertex_by_index(&self, k: usize) -> &VertexAttr {
        &self.vertices[k]
    }

    pub fn vertex(&self, class: u32) -> &VertexAttr {
        &self.vertices[class as usize - 1]
    }

    pub fn edge_by_index(&self, k: usize, l: usize) -> &EdgeAttr {
        debug_assert_ne!(k, l, "self-edges do not exist");
        &self.edges[k * self.num_classes() + l]
    }

    pub fn edge(&self, class_a: u32, class_b: u32) -> &EdgeAttr {
        self.edge_by_index(class_a as usize - 1, class_b as usize - 1)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = self.to_json_string();
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    /// Deterministic pretty JSON (map keys sorted), newline-terminated.
    pub fn to_json_string(&self) -> String {
        let file = ModelFile::from_graph(self);
        let mut s = serde_json::to_string_pretty(&file).expect("model serialization is infallible");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        file.into_graph(path)
    }
}

const MODEL_VERSION: u32 = 1;

/// On-disk schema. Edge keys are `"i,j"` with 1-based class ids.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    family: RelationFamily,
    num_classes: usize,
    class_names: Vec<String>,
    background_channel: bool,
    ndim: usize,
    vertex_attrs: Vec<VertexFileEntry>,
    edge_attrs: BTreeMap<String, EdgeAttr>,
    training: TrainingMeta,
}

#[derive(Serialize, Deserialize)]
struct VertexFileEntry {
    class: u32,
    prob: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    diameter: Option<f64>,
}

impl ModelFile {
    fn from_graph(g: &ModelGraph) -> Self {
        let vertex_attrs = g
            .vertices
            .iter()
            .enumerate()
            .map(|(k, v)| VertexFileEntry {
                class: k as u32 + 1,
                prob: v.prob.clone(),
                diameter: v.diameter,
            })
            .collect();
        let mut edge_attrs = BTreeMap::new();
        let n = g.num_classes();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    edge_attrs.insert(
                        format!("{},{}", i + 1, j + 1),
                        g.edge_by_index(i, j).clone(),
                    );
                }
            }
        }
        Self {
            version: MODEL_VERSION,
            family: g.family,
            num_classes: n,
            class_names: g.class_names.clone(),
            background_channel: g.classes.background_channel(),
            ndim: g.ndim,
            vertex_attrs,
            edge_attrs,
            training: g.training,
        }
    }

    fn into_graph(self, path: &Path) -> Result<ModelGraph> {
        if self.version != MODEL_VERSION {
            return Err(Error::format(
                path,
                format!(
                    "unsupported model version {} (this build reads {MODEL_VERSION})",
                    self.version
                ),
            ));
        }
        let n = self.num_classes;
        let classes = ClassSpace::new(n, self.background_channel)?;
        let mut vertices = vec![None; n];
        for entry in self.vertex_attrs {
            if entry.class == 0 || entry.class as usize > n {
                return Err(Error::format(
                    path,
                    format!("vertex class {} out of 1..={n}", entry.class),
                ));
            }
            let slot = &mut vertices[entry.class as usize - 1];
            if slot.is_some() {
                return Err(Error::format(
                    path,
                    format!("duplicate vertex entry for class {}", entry.class),
                ));
            }
            *slot = Some(VertexAttr {
                prob: entry.prob,
                diameter: entry.diameter,
            });
        }
        let vertices: Vec<VertexAttr> = vertices
            .into_iter()
            .enumerate()
            .map(|(k, v)| v.ok_or_else(|| Error::format(path, format!("missing vertex for class {}", k + 1))))
            .collect::<Result<_>>()?;

        let mut edges = vec![EdgeAttr::zero(self.family, self.ndim); n * n];
        let mut seen = 0usize;
        for (key, attr) in self.edge_attrs {
            let (a, b) = key
                .split_once(',')
                .and_then(|(a, b)| Some((a.trim().parse::<usize>().ok()?, b.trim().parse::<usize>().ok()?)))
                .ok_or_else(|| Error::format(path, format!("bad edge key {key:?}")))?;
            if a == 0 || b == 0 || a > n || b > n || a == b {
                return Err(Error::format(path, format!("edge key {key:?} out of range")));
            }
            edges[(a - 1) * n + (b - 1)] = attr;
            seen += 1;
        }
        if seen != n * (n - 1) {
            return Err(Error::format(
                path,
                format!("expected {} edges, found {seen}", n * (n - 1)),
            ));
        }
        ModelGraph::from_parts(
            self.family,
            classes,
            Some(self.class_names),
            self.ndim,
            vertices,
            edges,
            self.training,
        )
    }
}

/// Trains a model graph from hard annotations: all cells of a class merge
/// into one vertex per annotation, attributes are averaged componentwise
/// across annotations (direction norms included).
///
/// Every annotation must contain every class; grids may differ in size (each
/// annotation normalizes by its own diagonal) but not in rank.
pub fn train_model_graph(
    annotations: &[LabelMap],
    family: RelationFamily,
    classes: ClassSpace,
    class_names: Option<Vec<String>>,
) -> Result<ModelGraph> {
    if annotations.is_empty() {
        return Err(Error::NoAnnotations);
    }
    let n = classes.num_classes();
    let ndim = annotations[0].dims().ndim();

    let mut diam_sum = vec![0.0f64; n];
    let mut edge_acc: Vec<EdgeAcc> = vec![EdgeAcc::zero(ndim); n * n];

    for (ai, ann) in annotations.iter().enumerate() {
        let dims = *ann.dims();
        if dims.ndim() != ndim {
            return Err(Error::DimMismatch(format!(
                "annotation {ai} is {}-D, annotation 0 is {ndim}-D",
                dims.ndim()
            )));
        }
        if dims.diagonal() == 0.0 {
            return Err(Error::DegenerateGrid);
        }
        let c_s = dims.diagonal();

        let mut per_class: Vec<Vec<crate::grid::Point>> = vec![Vec::new(); n + 1];
        for idx in 0..dims.num_cells() {
            let label = ann.get(idx);
            if !classes.contains_label(label) {
                return Err(Error::ClassOutOfRange {
                    label,
                    num_classes: n,
                });
            }
            if label > 0 {
                per_class[label as usize].push(dims.point(idx));
            }
        }
        let mut merged: Vec<Region> = Vec::with_capacity(n);
        for class in 1..=n as u32 {
            let points = std::mem::take(&mut per_class[class as usize]);
            if points.is_empty() {
                return Err(Error::MissingClass {
                    annotation: ai,
                    class,
                });
            }
            merged.push(Region::from_points(class as usize - 1, class, points, &dims));
        }

        for i in 0..n {
            diam_sum[i] += merged[i].diameter();
            for j in 0..n {
                if i == j {
                    continue;
                }
                edge_acc[i * n + j].add(relation(&merged[i], &merged[j], c_s, ndim, family)?);
            }
        }
    }

    let count = annotations.len() as f64;
    let vertices = (1..=n as u32)
        .map(|class| VertexAttr {
            prob: classes.one_hot(class),
            diameter: (family == RelationFamily::Direction)
                .then(|| diam_sum[class as usize - 1] / count),
        })
        .collect();
    let edges = edge_acc
        .into_iter()
        .enumerate()
        .map(|(idx, acc)| {
            if idx / n == idx % n {
                EdgeAttr::zero(family, ndim)
            } else {
                acc.mean(count, family)
            }
        })
        .collect();

    ModelGraph::from_parts(
        family,
        classes,
        class_names,
        ndim,
        vertices,
        edges,
        TrainingMeta {
            num_samples: annotations.len(),
        },
    )
}

/// Componentwise sums of edge attributes during training.
#[derive(Clone)]
struct EdgeAcc {
    d_min: f64,
    d_max: f64,
    v: Vec<f64>,
    norm: f64,
}

impl EdgeAcc {
    fn zero(ndim: usize) -> Self {
        Self {
            d_min: 0.0,
            d_max: 0.0,
            v: vec![0.0; ndim],
            norm: 0.0,
        }
    }

    fn add(&mut self, e: EdgeAttr) {
        match e {
            EdgeAttr::Distance { d_min, d_max } => {
                self.d_min += d_min;
                self.d_max += d_max;
            }
            EdgeAttr::Direction { v, norm } => {
                for (acc, comp) in self.v.iter_mut().zip(v) {
                    *acc += comp;
                }
                self.norm += norm;
            }
        }
    }

    fn mean(self, count: f64, family: RelationFamily) -> EdgeAttr {
        match family {
            RelationFamily::Distance => EdgeAttr::Distance {
                d_min: self.d_min / count,
                d_max: self.d_max / count,
            },
            RelationFamily::Direction => EdgeAttr::Direction {
                v: self.v.into_iter().map(|c| c / count).collect(),
                norm: self.norm / count,
            },
        }
    }
}

/// Mean squared difference of two equal-length vectors.
pub(crate) fn mse(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum::<f64>()
        / n
}

/// Dissimilarity of a scene vertex against a model vertex, in [0, 1].
///
/// Distance family: mean squared difference of the score vectors. Direction
/// family: that term blended with the absolute diameter difference by
/// `lambda_v`.
pub fn vertex_dissimilarity(
    family: RelationFamily,
    scene: &VertexAttr,
    model: &VertexAttr,
    lambda_v: f64,
) -> Result<f64> {
    if scene.prob.len() != model.prob.len() {
        return Err(Error::AttrLength {
            left: scene.prob.len(),
            right: model.prob.len(),
        });
    }
    check_unit_weight("lambda_v", lambda_v)?;
    let score = mse(&scene.prob, &model.prob);
    match family {
        RelationFamily::Distance => Ok(score),
        RelationFamily::Direction => {
            let sd = require_diameter(scene)?;
            let md = require_diameter(model)?;
            Ok(lambda_v * score + (1.0 - lambda_v) * (sd - md).abs())
        }
    }
}

/// Dissimilarity of a scene edge against a model edge, in [0, 1].
///
/// Distance family blends |d_min difference| and |d_max difference| by
/// `lambda_e`. Direction family blends the halved cosine misalignment
/// |cos(theta) - 1| / 2 with the absolute norm difference; a vector of
/// negligible length counts as aligned (cos = 1).
pub fn edge_dissimilarity(scene: &EdgeAttr, model: &EdgeAttr, lambda_e: f64) -> Result<f64> {
    check_unit_weight("lambda_e", lambda_e)?;
    match (scene, model) {
        (
            EdgeAttr::Distance { d_min: a0, d_max: a1 },
            EdgeAttr::Distance { d_min: b0, d_max: b1 },
        ) => Ok(lambda_e * (a0 - b0).abs() + (1.0 - lambda_e) * (a1 - b1).abs()),
        (
            EdgeAttr::Direction { v: va, norm: na },
            EdgeAttr::Direction { v: vb, norm: nb },
        ) => {
            if va.len() != vb.len() {
                return Err(Error::AttrLength {
                    left: va.len(),
                    right: vb.len(),
                });
            }
            let la = vec_norm(va);
            let lb = vec_norm(vb);
            let cos = if la < DEGENERATE_NORM || lb < DEGENERATE_NORM {
                1.0
            } else {
                let dot: f64 = va.iter().zip(vb).map(|(x, y)| x * y).sum();
                (dot / (la * lb)).clamp(-1.0, 1.0)
            };
            Ok(lambda_e * (cos - 1.0).abs() / 2.0 + (1.0 - lambda_e) * (na - nb).abs())
        }
        (scene, model) => Err(Error::FamilyMismatch {
            left: scene.family(),
            right: model.family(),
        }),
    }
}

/// Vectors shorter than this have no usable direction.
const DEGENERATE_NORM: f64 = 1e-12;

fn vec_norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn require_diameter(v: &VertexAttr) -> Result<f64> {
    v.diameter.ok_or_else(|| {
        Error::InvalidParameter("direction-family vertex without a diameter".into())
    })
}

fn check_unit_weight(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::InvalidParameter(format!(
            "{name} must lie in [0, 1], got {value}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridDims;
    use crate::regions::{extract_regions, ExtractParams};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scene_fixture(family: RelationFamily) -> (RegionSet, ProbabilityTensor) {
        let _ = family;
        let dims = GridDims::new_2d(6, 6).unwrap();
        let mut labels = vec![0u32; 36];
        for r in 0..2 {
            for c in 0..2 {
                labels[r * 6 + c] = 1;
            }
        }
        for r in 4..6 {
            for c in 3..6 {
                labels[r * 6 + c] = 2;
            }
        }
        let map = LabelMap::new(dims, labels).unwrap();
        let classes = ClassSpace::new(2, true).unwrap();
        let mut values = Vec::new();
        for idx in 0..dims.num_cells() {
            let l = map.get(idx) as usize;
            let mut el = [0.1f32; 3];
            el[l] = 0.8;
            values.extend_from_slice(&el);
        }
        let t = ProbabilityTensor::new(dims, 3, values).unwrap();
        let rs = extract_regions(&map, &t, &ExtractParams::new(classes)).unwrap();
        (rs, t)
    }

    #[test]
    fn worked_vertex_dissimilarity() {
        let scene = VertexAttr {
            prob: vec![0.6, 0.2, 0.2],
            diameter: None,
        };
        let model = VertexAttr {
            prob: vec![1.0, 0.0, 0.0],
            diameter: None,
        };
        let d = vertex_dissimilarity(RelationFamily::Distance, &scene, &model, 0.5).unwrap();
        assert!((d - 0.08).abs() < 1e-12);
    }

    #[test]
    fn worked_edge_dissimilarity() {
        let scene = EdgeAttr::Distance {
            d_min: 0.8,
            d_max: 0.8,
        };
        let model = EdgeAttr::Distance {
            d_min: 0.6,
            d_max: 0.6,
        };
        // Both components differ by the same 0.2, so any blend gives 0.2.
        for lambda_e in [0.0, 0.3, 0.5, 1.0] {
            let d = edge_dissimilarity(&scene, &model, lambda_e).unwrap();
            assert!((d - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_attrs_have_zero_dissimilarity() {
        let v = VertexAttr {
            prob: vec![0.25, 0.5, 0.25],
            diameter: Some(0.4),
        };
        assert_eq!(
            vertex_dissimilarity(RelationFamily::Direction, &v, &v, 0.5).unwrap(),
            0.0
        );
        let e = EdgeAttr::Direction {
            v: vec![0.5, 0.1],
            norm: 0.51,
        };
        assert_eq!(edge_dissimilarity(&e, &e, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn opposite_directions_max_out_the_angle_term() {
        let a = EdgeAttr::Direction {
            v: vec![0.5, 0.0],
            norm: 0.5,
        };
        let b = EdgeAttr::Direction {
            v: vec![-0.5, 0.0],
            norm: 0.5,
        };
        let d = edge_dissimilarity(&a, &b, 1.0).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        let orthogonal = EdgeAttr::Direction {
            v: vec![0.0, 0.5],
            norm: 0.5,
        };
        let d = edge_dissimilarity(&a, &orthogonal, 1.0).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_direction_counts_as_aligned() {
        let zero = EdgeAttr::Direction {
            v: vec![0.0, 0.0],
            norm: 0.0,
        };
        let other = EdgeAttr::Direction {
            v: vec![0.3, 0.4],
            norm: 0.5,
        };
        let d = edge_dissimilarity(&zero, &other, 1.0).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn family_mismatch_is_rejected() {
        let a = EdgeAttr::Distance {
            d_min: 0.1,
            d_max: 0.2,
        };
        let b = EdgeAttr::Direction {
            v: vec![1.0, 0.0],
            norm: 1.0,
        };
        assert!(matches!(
            edge_dissimilarity(&a, &b, 0.5),
            Err(Error::FamilyMismatch { .. })
        ));
    }

    #[test]
    fn scene_graph_has_dense_edges_and_no_self_loops() {
        let (rs, t) = scene_fixture(RelationFamily::Distance);
        let g = build_scene_graph(&rs, &t, RelationFamily::Distance).unwrap();
        assert_eq!(g.vertex_count(), 2);
        assert_eq!(g.edge_count(), 2);
        let e01 = g.edge(0, 1);
        let e10 = g.edge(1, 0);
        // Distances are symmetric even though both directed edges exist.
        assert_eq!(e01, e10);
        match e01 {
            EdgeAttr::Distance { d_min, d_max } => {
                assert!(*d_min > 0.0 && d_min < d_max);
                assert!(*d_max <= 1.0);
            }
            other => panic!("wrong family: {other:?}"),
        }
    }

    #[test]
    fn direction_scene_graph_stores_antisymmetric_vectors() {
        let (rs, t) = scene_fixture(RelationFamily::Direction);
        let g = build_scene_graph(&rs, &t, RelationFamily::Direction).unwrap();
        match (g.edge(0, 1), g.edge(1, 0)) {
            (
                EdgeAttr::Direction { v: v01, norm: n01 },
                EdgeAttr::Direction { v: v10, norm: n10 },
            ) => {
                assert_eq!(v01.len(), 2);
                for (a, b) in v01.iter().zip(v10) {
                    assert!((a + b).abs() < 1e-12);
                }
                assert!((n01 - n10).abs() < 1e-12);
            }
            other => panic!("wrong family: {other:?}"),
        }
        assert!(g.vertex(0).diameter.is_some());
    }

    #[test]
    fn training_single_annotation_reproduces_its_relations() {
        let dims = GridDims::new_2d(6, 6).unwrap();
        let mut labels = vec![0u32; 36];
        labels[0] = 1;
        labels[35] = 2;
        let ann = LabelMap::new(dims, labels).unwrap();
        let classes = ClassSpace::new(2, true).unwrap();
        let g = train_model_graph(&[ann], RelationFamily::Distance, classes, None).unwrap();
        assert_eq!(g.num_classes(), 2);
        assert_eq!(g.training().num_samples, 1);
        assert_eq!(g.vertex(1).prob, vec![0.0, 1.0, 0.0]);
        match g.edge(1, 2) {
            EdgeAttr::Distance { d_min, d_max } => {
                // Two opposite corners: distance equals the diagonal.
                assert!((d_min - 1.0).abs() < 1e-12);
                assert!((d_max - 1.0).abs() < 1e-12);
            }
            other => panic!("wrong family: {other:?}"),
        }
    }

    #[test]
    fn training_averages_across_annotations() {
        let classes = ClassSpace::new(2, true).unwrap();
        let dims = GridDims::new_2d(1, 11).unwrap();
        // Annotation 0: classes 2 apart. Annotation 1: 6 apart. c_s = 10.
        let mut a0 = vec![0u32; 11];
        a0[0] = 1;
        a0[2] = 2;
        let mut a1 = vec![0u32; 11];
        a1[0] = 1;
        a1[6] = 2;
        let anns = vec![
            LabelMap::new(dims, a0).unwrap(),
            LabelMap::new(dims, a1).unwrap(),
        ];
        let g = train_model_graph(&anns, RelationFamily::Distance, classes, None).unwrap();
        match g.edge(1, 2) {
            EdgeAttr::Distance { d_min, d_max } => {
                assert!((d_min - 0.4).abs() < 1e-12);
                assert!((d_max - 0.4).abs() < 1e-12);
            }
            other => panic!("wrong family: {other:?}"),
        }
    }

    #[test]
    fn training_merges_disconnected_class_components() {
        let classes = ClassSpace::new(2, true).unwrap();
        let dims = GridDims::new_2d(1, 11).unwrap();
        // Class 1 appears at both ends; class 2 in the middle.
        let mut labels = vec![0u32; 11];
        labels[0] = 1;
        labels[10] = 1;
        labels[5] = 2;
        let ann = LabelMap::new(dims, labels).unwrap();
        let g = train_model_graph(&[ann], RelationFamily::Direction, classes, None).unwrap();
        // Merged class-1 vertex spans the whole row: diameter 1.
        assert!((g.vertex(1).diameter.unwrap() - 1.0).abs() < 1e-12);
        match g.edge(1, 2) {
            EdgeAttr::Direction { v, norm } => {
                // Centroid of {0, 10} is 5, same as class 2: zero vector.
                assert!(v.iter().all(|c| c.abs() < 1e-12));
                assert!(*norm < 1e-12);
            }
            other => panic!("wrong family: {other:?}"),
        }
    }

    #[test]
    fn training_requires_every_class_everywhere() {
        let classes = ClassSpace::new(3, true).unwrap();
        let dims = GridDims::new_2d(2, 2).unwrap();
        let good = LabelMap::new(dims, vec![1, 2, 3, 0]).unwrap();
        let bad = LabelMap::new(dims, vec![1, 2, 0, 0]).unwrap();
        let err =
            train_model_graph(&[good, bad], RelationFamily::Distance, classes, None).unwrap_err();
        assert!(matches!(
            err,
            Error::MissingClass {
                annotation: 1,
                class: 3
            }
        ));
    }

    #[test]
    fn model_json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for family in [RelationFamily::Distance, RelationFamily::Direction] {
            let classes = ClassSpace::new(3, true).unwrap();
            let dims = GridDims::new_2d(8, 8).unwrap();
            let mut labels = vec![0u32; 64];
            for class in 1..=3u32 {
                loop {
                    let idx = rng.random_range(0..64);
                    if labels[idx] == 0 {
                        labels[idx] = class;
                        break;
                    }
                }
            }
            let ann = LabelMap::new(dims, labels).unwrap();
            let g = train_model_graph(
                &[ann],
                family,
                classes,
                Some(vec!["bg-ish".into(), "mid".into(), "far".into()]),
            )
            .unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("model.json");
            g.save(&path).unwrap();
            let loaded = ModelGraph::load(&path).unwrap();
            assert_eq!(loaded, g);
            // Serialization is deterministic.
            assert_eq!(loaded.to_json_string(), g.to_json_string());
        }
    }

    #[test]
    fn model_load_rejects_future_version() {
        let classes = ClassSpace::new(1, true).unwrap();
        let dims = GridDims::new_2d(1, 3).unwrap();
        let ann = LabelMap::new(dims, vec![0, 1, 0]).unwrap();
        let g = train_model_graph(&[ann], RelationFamily::Distance, classes, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let hacked = g.to_json_string().replace("\"version\": 1", "\"version\": 9");
        std::fs::write(&path, hacked).unwrap();
        let err = ModelGraph::load(&path).unwrap_err();
        assert!(err.to_string().contains("unsupported model version 9"), "{err}");
    }

    proptest::proptest! {
        #[test]
        fn dissimilarities_stay_in_unit_interval(
            seed in 0u64..1000,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let channels = rng.random_range(2..6usize);
            let simplex = |rng: &mut ChaCha8Rng| {
                let raw: Vec<f64> = (0..channels).map(|_| rng.random::<f64>() + 1e-6).collect();
                let sum: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / sum).collect::<Vec<f64>>()
            };
            let sv = VertexAttr { prob: simplex(&mut rng), diameter: Some(rng.random::<f64>()) };
            let mv = VertexAttr { prob: simplex(&mut rng), diameter: Some(rng.random::<f64>()) };
            for family in [RelationFamily::Distance, RelationFamily::Direction] {
                let d = vertex_dissimilarity(family, &sv, &mv, rng.random::<f64>()).unwrap();
                proptest::prop_assert!((0.0..=1.0).contains(&d));
            }
        }
    }
}
