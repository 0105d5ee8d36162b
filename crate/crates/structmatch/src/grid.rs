//! Grid geometry shared by every stage: dimensions, linear indexing,
//! neighborhoods, and the scene diagonal that normalizes all distances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A cell position as (row, col, depth). 2-D grids keep depth at 0.
pub type Point = [u32; 3];

/// Dense row-major grid extents. 2-D grids store a depth extent of 1 and
/// remember their true rank in `ndim`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDims {
    extents: [usize; 3],
    ndim: usize,
}

impl GridDims {
    pub fn new_2d(rows: usize, cols: usize) -> Result<Self> {
        Self::from_extents(&[rows, cols])
    }

    pub fn new_3d(rows: usize, cols: usize, depth: usize) -> Result<Self> {
        Self::from_extents(&[rows, cols, depth])
    }

    /// Accepts 2 or 3 nonzero extents.
    pub fn from_extents(extents: &[usize]) -> Result<Self> {
        let ndim = extents.len();
        if ndim != 2 && ndim != 3 {
            return Err(Error::Shape(format!(
                "expected 2 or 3 spatial extents, got {ndim}"
            )));
        }
        if extents.contains(&0) {
            return Err(Error::Shape(format!("zero extent in {extents:?}")));
        }
        let mut padded = [1usize; 3];
        padded[..ndim].copy_from_slice(extents);
        Ok(Self {
            extents: padded,
            ndim,
        })
    }

    pub fn ndim(&self) -> usize {
        self.ndim
    }

    pub fn rows(&self) -> usize {
        self.extents[0]
    }

    pub fn cols(&self) -> usize {
        self.extents[1]
    }

    pub fn depth(&self) -> usize {
        self.extents[2]
    }

    /// Total number of cells.
    pub fn num_cells(&self) -> usize {
        self.extents[0] * self.extents[1] * self.extents[2]
    }

    /// Spatial extents in declaration order (2 or 3 entries).
    pub fn shape(&self) -> &[usize] {
        &self.extents[..self.ndim]
    }

    /// Extent along one axis; the depth axis of a 2-D grid reports 1.
    pub fn extent(&self, ax: usize) -> usize {
        self.extents[ax]
    }

    /// Row-major linear index of `p`.
    pub fn linear(&self, p: Point) -> usize {
        debug_assert!(self.contains(p), "{p:?} outside {:?}", self.shape());
        (p[0] as usize * self.extents[1] + p[1] as usize) * self.extents[2] + p[2] as usize
    }

    /// Inverse of [`linear`](Self::linear).
    pub fn point(&self, idx: usize) -> Point {
        debug_assert!(idx < self.num_cells());
        let k = idx % self.extents[2];
        let rest = idx / self.extents[2];
        [
            (rest / self.extents[1]) as u32,
            (rest % self.extents[1]) as u32,
            k as u32,
        ]
    }

    pub fn contains(&self, p: Point) -> bool {
        (p[0] as usize) < self.extents[0]
            && (p[1] as usize) < self.extents[1]
            && (p[2] as usize) < self.extents[2]
    }

    /// Euclidean diagonal `sqrt(sum (extent - 1)^2)`, the scene-size constant
    /// every stored distance is divided by. Zero for a single-cell grid.
    pub fn diagonal(&self) -> f64 {
        self.shape()
            .iter()
            .map(|&e| {
                let d = (e - 1) as f64;
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Euclidean distance between cell centers.
pub fn distance(a: Point, b: Point) -> f64 {
    squared_distance(a, b).sqrt()
}

pub(crate) fn squared_distance(a: Point, b: Point) -> f64 {
    (0..3)
        .map(|ax| {
            let d = a[ax] as f64 - b[ax] as f64;
            d * d
        })
        .sum()
}

pub(crate) fn in_grid(dims: &GridDims, q: [i64; 3]) -> Option<Point> {
    if q.iter().any(|&c| c < 0) {
        return None;
    }
    let p = [q[0] as u32, q[1] as u32, q[2] as u32];
    dims.contains(p).then_some(p)
}

/// Neighborhood used when growing connected components.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connectivity {
    /// Face neighbors only: 4 in 2-D, 6 in 3-D.
    Face,
    /// Faces, edges, and corners: 8 in 2-D, 26 in 3-D.
    Full,
}

impl Connectivity {
    /// Calls `visit` for every in-grid neighbor of `p`, in a fixed order.
    pub fn for_each_neighbor(self, dims: &GridDims, p: Point, mut visit: impl FnMut(Point)) {
        let sp = [p[0] as i64, p[1] as i64, p[2] as i64];
        match self {
            Connectivity::Face => {
                for ax in 0..dims.ndim() {
                    for step in [-1i64, 1] {
                        let mut q = sp;
                        q[ax] += step;
                        if let Some(q) = in_grid(dims, q) {
                            visit(q);
                        }
                    }
                }
            }
            Connectivity::Full => {
                let dk = if dims.ndim() == 3 { -1i64..=1 } else { 0..=0 };
                for di in -1i64..=1 {
                    for dj in -1i64..=1 {
                        for dk in dk.clone() {
                            if di == 0 && dj == 0 && dk == 0 {
                                continue;
                            }
                            if let Some(q) = in_grid(dims, [sp[0] + di, sp[1] + dj, sp[2] + dk]) {
                                visit(q);
                            }
                        }
                    }
                }
            }
        }
    }
}

impl std::str::FromStr for Connectivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "face" => Ok(Connectivity::Face),
            "full" => Ok(Connectivity::Full),
            other => Err(Error::InvalidParameter(format!(
                "unknown connectivity {other:?} (expected \"face\" or \"full\")"
            ))),
        }
    }
}

/// How tensor channels map to label values.
///
/// Labels are always 0 = background / discarded and 1..=num_classes for the
/// semantic classes. With `background_channel` the tensor carries an extra
/// channel 0 scoring the background label; without it, channel c scores
/// label c + 1 and a label map must not contain 0 anywhere the tensor is
/// meant to explain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSpace {
    num_classes: usize,
    background_channel: bool,
}

impl ClassSpace {
    pub fn new(num_classes: usize, background_channel: bool) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::InvalidParameter(
                "num_classes must be at least 1".into(),
            ));
        }
        Ok(Self {
            num_classes,
            background_channel,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn background_channel(&self) -> bool {
        self.background_channel
    }

    /// Channels a compatible probability tensor must carry.
    pub fn channels(&self) -> usize {
        self.num_classes + usize::from(self.background_channel)
    }

    /// Label scored by tensor channel `ch`.
    pub fn label_of_channel(&self, ch: usize) -> u32 {
        debug_assert!(ch < self.channels());
        if self.background_channel {
            ch as u32
        } else {
            ch as u32 + 1
        }
    }

    /// Tensor channel scoring class `class` (1-based).
    pub fn channel_of_class(&self, class: u32) -> usize {
        debug_assert!(class >= 1 && class as usize <= self.num_classes);
        if self.background_channel {
            class as usize
        } else {
            class as usize - 1
        }
    }

    /// Tensor channel scoring `label`, including background when the space
    /// carries a channel for it.
    pub fn channel_of_label(&self, label: u32) -> usize {
        debug_assert!(self.contains_label(label));
        if label == 0 {
            0
        } else {
            self.channel_of_class(label)
        }
    }

    /// Channel-space one-hot vector for `class`.
    pub fn one_hot(&self, class: u32) -> Vec<f64> {
        let mut v = vec![0.0; self.channels()];
        v[self.channel_of_class(class)] = 1.0;
        v
    }

    /// Whether a label map value is representable: classes 1..=N always,
    /// background 0 only when a background channel exists.
    pub fn contains_label(&self, label: u32) -> bool {
        if label == 0 {
            self.background_channel
        } else {
            (label as usize) <= self.num_classes
        }
    }
}
