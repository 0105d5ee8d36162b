//! Deterministic synthetic scenes: planted class blobs, a matching
//! probability tensor, and structured corruptions (split, swap, artifacts)
//! for tests and demos.

use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ClassSpace, GridDims, Point};
use crate::tensor::{LabelMap, ProbabilityTensor};

fn default_sharpness() -> f64 {
    0.8
}

fn default_true() -> bool {
    true
}

fn default_blob_radius() -> u32 {
    5
}

/// An explicitly placed Euclidean ball of one class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobSpec {
    pub class: u32,
    /// Center cell, one coordinate per grid axis.
    pub center: Vec<u32>,
    pub radius: u32,
}

/// A batch of small wrong-class blobs planted away from the structure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactSpec {
    pub count: u32,
    pub radius: u32,
    /// Dominant class of the artifact; random in 1..=N when omitted.
    #[serde(default)]
    pub class: Option<u32>,
    /// Fixed center; only allowed with count = 1. Random placement when
    /// omitted.
    #[serde(default)]
    pub center: Option<Vec<u32>>,
}

/// Corruptions applied to the ground truth, in field order: splits, then
/// swaps, then artifacts.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionSpec {
    /// Classes whose blob gets cut at the median of its longest axis, the
    /// far fragment moved to a random free spot.
    #[serde(default)]
    pub split: Vec<u32>,
    /// Class pairs whose labels are exchanged.
    #[serde(default)]
    pub swap: Vec<[u32; 2]>,
    #[serde(default)]
    pub artifacts: Vec<ArtifactSpec>,
}

impl CorruptionSpec {
    pub fn is_empty(&self) -> bool {
        self.split.is_empty() && self.swap.is_empty() && self.artifacts.is_empty()
    }
}

/// Full recipe for one scene. The seed pins every random choice, so equal
/// specs generate byte-identical outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub seed: u64,
    /// Grid extents, 2 or 3 axes.
    pub dims: Vec<usize>,
    /// Number of foreground classes.
    pub classes: u32,
    /// Probability mass of the dominant channel; the rest is spread evenly.
    #[serde(default = "default_sharpness")]
    pub sharpness: f64,
    /// Whether channel 0 is background (classes map to channels 1..=N).
    #[serde(default = "default_true")]
    pub background_channel: bool,
    /// Radius for auto-placed per-class blobs when `blobs` is empty.
    #[serde(default = "default_blob_radius")]
    pub blob_radius: u32,
    /// Explicit blob layout; one auto-placed blob per class when empty.
    #[serde(default)]
    pub blobs: Vec<BlobSpec>,
    #[serde(default)]
    pub corruption: CorruptionSpec,
}

impl SceneSpec {
    /// Minimal spec: auto-placed blobs, no corruption.
    pub fn new(seed: u64, dims: Vec<usize>, classes: u32) -> Self {
        Self {
            seed,
            dims,
            classes,
            sharpness: default_sharpness(),
            background_channel: true,
            blob_radius: default_blob_radius(),
            blobs: Vec::new(),
            corruption: CorruptionSpec::default(),
        }
    }

    pub fn class_space(&self) -> Result<ClassSpace> {
        ClassSpace::new(self.classes as usize, self.background_channel)
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Toml {
            path: origin.to_path_buf(),
            source: Box::new(e),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }
}

/// Generated outputs: the clean ground truth, the corrupted label map the
/// tensor encodes, and the linear indices of planted artifact cells.
#[derive(Clone, Debug)]
pub struct SynthScene {
    pub tensor: ProbabilityTensor,
    pub ground_truth: LabelMap,
    pub corrupted: LabelMap,
    pub artifact_cells: Vec<usize>,
}

/// Minimum empty-cell gap (Chebyshev) kept around every placed blob so
/// regions stay separate under either connectivity.
const PLACEMENT_GAP: u32 = 2;

const PLACEMENT_ATTEMPTS: u32 = 10_000;

/// Builds the scene described by `spec`. All placement randomness comes
/// from a ChaCha stream seeded with `spec.seed`.
pub fn generate(spec: &SceneSpec) -> Result<SynthScene> {
    let dims = GridDims::from_extents(&spec.dims)?;
    let classes = spec.class_space()?;
    let channels = classes.channels();
    if !(spec.sharpness > 1.0 / channels as f64 && spec.sharpness <= 1.0) {
        return Err(Error::Synth(format!(
            "sharpness {} must exceed the uniform mass 1/{channels} and stay at most 1",
            spec.sharpness
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut gt = LabelMap::zeros(dims);

    if spec.blobs.is_empty() {
        for class in 1..=spec.classes {
            place_random_ball(&mut gt, &mut rng, class, spec.blob_radius, &dims).map_err(
                |_| {
                    Error::Synth(format!(
                        "could not place a radius-{} blob for class {class} after {} attempts",
                        spec.blob_radius, PLACEMENT_ATTEMPTS
                    ))
                },
            )?;
        }
    } else {
        for blob in &spec.blobs {
            if blob.class == 0 || blob.class > spec.classes {
                return Err(Error::Synth(format!(
                    "blob class {} outside 1..={}",
                    blob.class, spec.classes
                )));
            }
            let center = parse_center(&blob.center, &dims)?;
            let pts = ball_points(&dims, center, blob.radius);
            if !fits(&dims, center, blob.radius) {
                return Err(Error::Synth(format!(
                    "blob at {:?} radius {} sticks out of the grid",
                    blob.center, blob.radius
                )));
            }
            if !clear(&gt, &pts, 0) {
                return Err(Error::Synth(format!(
                    "blob at {:?} overlaps an earlier blob",
                    blob.center
                )));
            }
            paint(&mut gt, &pts, blob.class);
        }
    }

    let mut corrupted = gt.clone();
    for &class in &spec.corruption.split {
        split_class(&mut corrupted, &mut rng, class, &dims)?;
    }
    for &[a, b] in &spec.corruption.swap {
        if a == b || a == 0 || b == 0 || a > spec.classes || b > spec.classes {
            return Err(Error::Synth(format!(
                "swap pair ({a}, {b}) must name two distinct classes in 1..={}",
                spec.classes
            )));
        }
        for idx in 0..dims.num_cells() {
            let l = corrupted.get(idx);
            if l == a {
                corrupted.set(dims.point(idx), b);
            } else if l == b {
                corrupted.set(dims.point(idx), a);
            }
        }
    }
    let mut artifact_cells = Vec::new();
    for art in &spec.corruption.artifacts {
        plant_artifacts(&mut corrupted, &mut rng, art, spec.classes, &dims, &mut artifact_cells)?;
    }
    artifact_cells.sort_unstable();

    let tensor = encode_tensor(&corrupted, &classes, spec.sharpness)?;
    Ok(SynthScene {
        tensor,
        ground_truth: gt,
        corrupted,
        artifact_cells,
    })
}

fn parse_center(coords: &[u32], dims: &GridDims) -> Result<Point> {
    if coords.len() != dims.ndim() {
        return Err(Error::Synth(format!(
            "center {:?} has {} coordinates for a {}-d grid",
            coords,
            coords.len(),
            dims.ndim()
        )));
    }
    let mut p = [0u32; 3];
    p[..coords.len()].copy_from_slice(coords);
    if !dims.contains(p) {
        return Err(Error::Synth(format!("center {coords:?} outside the grid")));
    }
    Ok(p)
}

/// Cells within Euclidean distance `radius` of `center`, clipped to the
/// grid, in scan order.
fn ball_points(dims: &GridDims, center: Point, radius: u32) -> Vec<Point> {
    let r = radius as i64;
    let rr = r * r;
    let mut pts = Vec::new();
    let lo = |ax: usize| (center[ax] as i64 - r).max(0) as u32;
    let hi = |ax: usize| ((center[ax] as i64 + r) as usize).min(dims.extent(ax) - 1) as u32;
    for row in lo(0)..=hi(0) {
        for col in lo(1)..=hi(1) {
            for depth in lo(2)..=hi(2) {
                let p = [row, col, depth];
                let d: i64 = (0..3)
                    .map(|ax| {
                        let d = p[ax] as i64 - center[ax] as i64;
                        d * d
                    })
                    .sum();
                if d <= rr {
                    pts.push(p);
                }
            }
        }
    }
    pts
}

/// Whether a radius-`r` ball around `center` stays fully inside the grid.
fn fits(dims: &GridDims, center: Point, radius: u32) -> bool {
    (0..dims.ndim()).all(|ax| {
        center[ax] >= radius && center[ax] as usize + radius as usize <= dims.extent(ax) - 1
    })
}

/// True when every point's Chebyshev `gap`-neighborhood holds only
/// background.
fn clear(map: &LabelMap, pts: &[Point], gap: u32) -> bool {
    let dims = *map.dims();
    let g = gap as i64;
    pts.iter().all(|p| {
        let lo = |ax: usize| (p[ax] as i64 - g).max(0) as u32;
        let hi = |ax: usize| ((p[ax] as i64 + g) as usize).min(dims.extent(ax) - 1) as u32;
        for row in lo(0)..=hi(0) {
            for col in lo(1)..=hi(1) {
                for depth in lo(2)..=hi(2) {
                    if map.at([row, col, depth]) != 0 {
                        return false;
                    }
                }
            }
        }
        true
    })
}

fn paint(map: &mut LabelMap, pts: &[Point], class: u32) {
    for &p in pts {
        map.set(p, class);
    }
}

fn random_center(rng: &mut ChaCha8Rng, dims: &GridDims, radius: u32) -> Result<Point> {
    let mut p = [0u32; 3];
    for ax in 0..dims.ndim() {
        let extent = dims.extent(ax) as u32;
        if 2 * radius + 1 > extent {
            return Err(Error::Synth(format!(
                "radius {radius} does not fit in a {extent}-cell axis"
            )));
        }
        p[ax] = rng.random_range(radius..=extent - 1 - radius);
    }
    Ok(p)
}

fn place_random_ball(
    map: &mut LabelMap,
    rng: &mut ChaCha8Rng,
    class: u32,
    radius: u32,
    dims: &GridDims,
) -> Result<Vec<Point>> {
    for _ in 0..PLACEMENT_ATTEMPTS {
        let center = random_center(rng, dims, radius)?;
        let pts = ball_points(dims, center, radius);
        if clear(map, &pts, PLACEMENT_GAP) {
            paint(map, &pts, class);
            return Ok(pts);
        }
    }
    Err(Error::Synth(format!(
        "no free spot for a radius-{radius} ball of class {class}"
    )))
}

/// Cuts the class's cells at the median of their longest bounding-box axis
/// and moves the far fragment to a random free spot, keeping the label.
fn split_class(
    map: &mut LabelMap,
    rng: &mut ChaCha8Rng,
    class: u32,
    dims: &GridDims,
) -> Result<()> {
    let cells: Vec<Point> = (0..dims.num_cells())
        .filter(|&idx| map.get(idx) == class)
        .map(|idx| dims.point(idx))
        .collect();
    if cells.is_empty() {
        return Err(Error::Synth(format!("split class {class} is not present")));
    }
    let mut lo = [u32::MAX; 3];
    let mut hi = [0u32; 3];
    for p in &cells {
        for ax in 0..3 {
            lo[ax] = lo[ax].min(p[ax]);
            hi[ax] = hi[ax].max(p[ax]);
        }
    }
    let axis = (0..3).max_by_key(|&ax| (hi[ax] - lo[ax], std::cmp::Reverse(ax))).unwrap();
    let mut coords: Vec<u32> = cells.iter().map(|p| p[axis]).collect();
    coords.sort_unstable();
    let median = coords[coords.len() / 2];
    let fragment: Vec<Point> = cells.iter().copied().filter(|p| p[axis] > median).collect();
    if fragment.is_empty() {
        return Err(Error::Synth(format!(
            "class {class} is too thin to split along axis {axis}"
        )));
    }
    for &p in &fragment {
        map.set(p, 0);
    }
    // Fragment footprint relative to its own bounding box.
    let mut fmin = [u32::MAX; 3];
    let mut fmax = [0u32; 3];
    for p in &fragment {
        for ax in 0..3 {
            fmin[ax] = fmin[ax].min(p[ax]);
            fmax[ax] = fmax[ax].max(p[ax]);
        }
    }
    for _ in 0..PLACEMENT_ATTEMPTS {
        let mut target = [0u32; 3];
        let mut ok = true;
        for ax in 0..3 {
            let span = fmax[ax] - fmin[ax];
            let extent = dims.extent(ax) as u32;
            if span >= extent {
                ok = false;
                break;
            }
            target[ax] = rng.random_range(0..=extent - 1 - span);
        }
        if !ok {
            break;
        }
        let moved: Vec<Point> = fragment
            .iter()
            .map(|p| {
                let mut q = [0u32; 3];
                for ax in 0..3 {
                    q[ax] = p[ax] - fmin[ax] + target[ax];
                }
                q
            })
            .collect();
        if clear(map, &moved, PLACEMENT_GAP) {
            paint(map, &moved, class);
            return Ok(());
        }
    }
    Err(Error::Synth(format!(
        "no free spot for the split fragment of class {class}"
    )))
}

fn plant_artifacts(
    map: &mut LabelMap,
    rng: &mut ChaCha8Rng,
    art: &ArtifactSpec,
    num_classes: u32,
    dims: &GridDims,
    cells: &mut Vec<usize>,
) -> Result<()> {
    if let Some(class) = art.class {
        if class == 0 || class > num_classes {
            return Err(Error::Synth(format!(
                "artifact class {class} outside 1..={num_classes}"
            )));
        }
    }
    if art.center.is_some() && art.count != 1 {
        return Err(Error::Synth(
            "a fixed artifact center requires count = 1".into(),
        ));
    }
    for _ in 0..art.count {
        let class = match art.class {
            Some(c) => c,
            None => rng.random_range(1..=num_classes),
        };
        let pts = match &art.center {
            Some(center) => {
                let center = parse_center(center, dims)?;
                let pts = ball_points(dims, center, art.radius);
                if !clear(map, &pts, PLACEMENT_GAP) {
                    return Err(Error::Synth(format!(
                        "artifact at {:?} is too close to existing structure",
                        art.center
                    )));
                }
                pts
            }
            None => {
                let mut placed = None;
                for _ in 0..PLACEMENT_ATTEMPTS {
                    let center = random_center(rng, dims, art.radius)?;
                    let pts = ball_points(dims, center, art.radius);
                    if clear(map, &pts, PLACEMENT_GAP) {
                        placed = Some(pts);
                        break;
                    }
                }
                placed.ok_or_else(|| {
                    Error::Synth(format!(
                        "no free spot for a radius-{} artifact",
                        art.radius
                    ))
                })?
            }
        };
        paint(map, &pts, class);
        cells.extend(pts.iter().map(|&p| dims.linear(p)));
    }
    Ok(())
}

/// Turns a label map into a probability tensor: the labeled channel gets
/// `sharpness`, the remainder is spread evenly over the other channels.
fn encode_tensor(
    map: &LabelMap,
    classes: &ClassSpace,
    sharpness: f64,
) -> Result<ProbabilityTensor> {
    let dims = *map.dims();
    let channels = classes.channels();
    let rest = ((1.0 - sharpness) / (channels - 1) as f64) as f32;
    let peak = sharpness as f32;
    let mut values = Vec::with_capacity(dims.num_cells() * channels);
    for idx in 0..dims.num_cells() {
        let label = map.get(idx);
        if !classes.contains_label(label) {
            return Err(Error::Synth(format!(
                "cell {idx} is background but the tensor has no background channel"
            )));
        }
        let win = classes.channel_of_label(label);
        for ch in 0..channels {
            values.push(if ch == win { peak } else { rest });
        }
    }
    ProbabilityTensor::new(dims, channels, values)
}
