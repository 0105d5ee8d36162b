//! Random-instance generators shared by the integration test targets.
#![allow(dead_code)]

use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

use structmatch::graph::{
    EdgeAttr, ModelGraph, RelationFamily, SceneGraph, TrainingMeta, VertexAttr,
};
use structmatch::grid::{ClassSpace, GridDims};
use structmatch::tensor::LabelMap;

/// Random point on the probability simplex with `len` coordinates.
pub fn simplex(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..len).map(|_| rng.random_range(1e-3..1.0)).collect();
    let sum: f64 = v.iter().sum();
    for x in &mut v {
        *x /= sum;
    }
    v
}

pub fn random_vertex(
    rng: &mut ChaCha8Rng,
    family: RelationFamily,
    channels: usize,
) -> VertexAttr {
    VertexAttr {
        prob: simplex(rng, channels),
        diameter: match family {
            RelationFamily::Distance => None,
            RelationFamily::Direction => Some(rng.random_range(0.0..1.0)),
        },
    }
}

pub fn random_edge(rng: &mut ChaCha8Rng, family: RelationFamily, ndim: usize) -> EdgeAttr {
    match family {
        RelationFamily::Distance => {
            let a: f64 = rng.random_range(0.0..1.0);
            let b: f64 = rng.random_range(0.0..1.0);
            EdgeAttr::Distance {
                d_min: a.min(b),
                d_max: a.max(b),
            }
        }
        RelationFamily::Direction => {
            let raw: Vec<f64> = (0..ndim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let len = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            let norm: f64 = rng.random_range(0.0..1.0);
            if len < 1e-9 {
                EdgeAttr::Direction {
                    v: vec![0.0; ndim],
                    norm: 0.0,
                }
            } else {
                EdgeAttr::Direction {
                    v: raw.iter().map(|x| x * norm / len).collect(),
                    norm,
                }
            }
        }
    }
}

pub fn zero_edge(family: RelationFamily, ndim: usize) -> EdgeAttr {
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

/// Dense row-major n x n edge table with zeroed diagonal entries.
pub fn dense_edges(
    rng: &mut ChaCha8Rng,
    family: RelationFamily,
    ndim: usize,
    n: usize,
) -> Vec<EdgeAttr> {
    let mut edges = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            edges.push(if i == j {
                zero_edge(family, ndim)
            } else {
                random_edge(rng, family, ndim)
            });
        }
    }
    edges
}

/// Random matching instance: a scene graph, a model graph, and feasible
/// candidate buckets (a distinct anchor region per class plus up to two
/// extras, at most three candidates per class).
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    max_regions: usize,
    max_classes: usize,
) -> (SceneGraph, ModelGraph, Vec<Vec<usize>>, usize) {
    let n_r = rng.random_range(2..=max_regions);
    let n_m = rng.random_range(1..=n_r.min(max_classes));
    let family = if rng.random_bool(0.5) {
        RelationFamily::Distance
    } else {
        RelationFamily::Direction
    };
    let ndim = if rng.random_bool(0.5) { 2 } else { 3 };
    let classes = ClassSpace::new(n_m, true).unwrap();
    let channels = classes.channels();

    let scene = SceneGraph::from_parts(
        family,
        (0..n_r).map(|_| random_vertex(rng, family, channels)).collect(),
        dense_edges(rng, family, ndim, n_r),
    )
    .unwrap();
    let model = ModelGraph::from_parts(
        family,
        classes,
        None,
        ndim,
        (0..n_m).map(|_| random_vertex(rng, family, channels)).collect(),
        dense_edges(rng, family, ndim, n_m),
        TrainingMeta { num_samples: 1 },
    )
    .unwrap();

    let mut order: Vec<usize> = (0..n_r).collect();
    for i in 0..n_m {
        let j = rng.random_range(i..n_r);
        order.swap(i, j);
    }
    let buckets: Vec<Vec<usize>> = (0..n_m)
        .map(|c| {
            let mut set = BTreeSet::from([order[c]]);
            for _ in 0..rng.random_range(0..=2usize) {
                if set.len() < 3 {
                    set.insert(rng.random_range(0..n_r));
                }
            }
            set.into_iter().collect()
        })
        .collect();

    (scene, model, buckets, ndim)
}

/// Label map with `cells_per_class` random cells set to classes 1 and 2.
pub fn scatter_map(rng: &mut ChaCha8Rng, dims: GridDims, cells_per_class: usize) -> LabelMap {
    let mut map = LabelMap::zeros(dims);
    for class in 1..=2u32 {
        for _ in 0..cells_per_class {
            let idx = rng.random_range(0..dims.num_cells());
            map.set(dims.point(idx), class);
        }
    }
    map
}
