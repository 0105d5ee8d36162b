//! Dice and Hausdorff evaluation of a predicted label map against ground
//! truth, per class and averaged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Connectivity, Point};
use crate::tensor::LabelMap;

/// Presence and sentinel markers for one class's report entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassFlags {
    pub present_in_pred: bool,
    pub present_in_gt: bool,
    /// True when the Hausdorff value is the missing-region sentinel (the
    /// grid diagonal) rather than a measured distance.
    pub hd_is_sentinel: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: u32,
    pub dice: f64,
    pub hd: f64,
    pub flags: ClassFlags,
}

/// Per-class metrics plus unweighted means. Sentinel Hausdorff values enter
/// the mean like any other; the per-class flag marks them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class: Vec<ClassReport>,
    pub mean_dice: f64,
    pub mean_hd: f64,
}

impl EvalReport {
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn check_dims(pred: &LabelMap, gt: &LabelMap) -> Result<()> {
    if pred.dims() != gt.dims() {
        return Err(Error::DimMismatch(format!(
            "prediction grid {:?} vs ground truth {:?}",
            pred.dims().shape(),
            gt.dims().shape()
        )));
    }
    Ok(())
}

/// Dice overlap of the class-`n` cells: 2|A∩B| / (|A|+|B|). Both sets
/// empty scores 1, exactly one empty scores 0.
pub fn dice(pred: &LabelMap, gt: &LabelMap, class: u32) -> Result<f64> {
    check_dims(pred, gt)?;
    let mut a = 0u64;
    let mut b = 0u64;
    let mut inter = 0u64;
    for (p, g) in pred.labels().iter().zip(gt.labels()) {
        let in_a = *p == class;
        let in_b = *g == class;
        a += in_a as u64;
        b += in_b as u64;
        inter += (in_a && in_b) as u64;
    }
    Ok(match (a, b) {
        (0, 0) => 1.0,
        (0, _) | (_, 0) => 0.0,
        _ => 2.0 * inter as f64 / (a + b) as f64,
    })
}

/// Symmetric Hausdorff distance between the class-`n` cell sets, in grid
/// units, with Euclidean point distances. Returns the value and a sentinel
/// flag: when exactly one set is empty the value is the grid diagonal and
/// the flag is set; two empty sets give 0.
pub fn hausdorff(pred: &LabelMap, gt: &LabelMap, class: u32) -> Result<(f64, bool)> {
    check_dims(pred, gt)?;
    let a = class_points(pred, class);
    let b = class_points(gt, class);
    match (a.is_empty(), b.is_empty()) {
        (true, true) => Ok((0.0, false)),
        (true, false) | (false, true) => Ok((pred.dims().diagonal(), true)),
        (false, false) => {
            let d = directed_sq(&a, &b).max(directed_sq(&b, &a));
            Ok((d.sqrt(), false))
        }
    }
}

/// Boundary-restricted Hausdorff. Ranges only over boundary cells of each
/// set, so it never exceeds [`hausdorff`] and can fall short of it when the
/// farthest cell sits in a set's interior (the nearest-point side stays
/// exact: for a cell outside the other set, the closest member is always a
/// boundary cell). Opt-in fast path; same sentinel conventions.
pub fn hausdorff_boundary(pred: &LabelMap, gt: &LabelMap, class: u32) -> Result<(f64, bool)> {
    check_dims(pred, gt)?;
    let (a, a_mask) = class_boundary(pred, class);
    let (b, b_mask) = class_boundary(gt, class);
    match (a.is_empty(), b.is_empty()) {
        (true, true) => Ok((0.0, false)),
        (true, false) | (false, true) => Ok((pred.dims().diagonal(), true)),
        (false, false) => {
            let ab = directed_sq_masked(&a, &b, &b_mask, pred);
            let ba = directed_sq_masked(&b, &a, &a_mask, gt);
            Ok((ab.max(ba).sqrt(), false))
        }
    }
}

/// Per-class reports plus unweighted means over the listed classes.
pub fn evaluate(pred: &LabelMap, gt: &LabelMap, classes: &[u32]) -> Result<EvalReport> {
    check_dims(pred, gt)?;
    if classes.is_empty() {
        return Err(Error::InvalidParameter(
            "evaluation needs at least one class".into(),
        ));
    }
    let mut per_class = Vec::with_capacity(classes.len());
    for &class in classes {
        let d = dice(pred, gt, class)?;
        let (hd, hd_is_sentinel) = hausdorff(pred, gt, class)?;
        per_class.push(ClassReport {
            class,
            dice: d,
            hd,
            flags: ClassFlags {
                present_in_pred: pred.labels().contains(&class),
                present_in_gt: gt.labels().contains(&class),
                hd_is_sentinel,
            },
        });
    }
    let n = per_class.len() as f64;
    let mean_dice = per_class.iter().map(|c| c.dice).sum::<f64>() / n;
    let mean_hd = per_class.iter().map(|c| c.hd).sum::<f64>() / n;
    Ok(EvalReport {
        per_class,
        mean_dice,
        mean_hd,
    })
}

fn class_points(map: &LabelMap, class: u32) -> Vec<Point> {
    map.labels()
        .iter()
        .enumerate()
        .filter(|(_, l)| **l == class)
        .map(|(idx, _)| map.dims().point(idx))
        .collect()
}

/// Boundary cells of the class set plus a full-set membership mask.
fn class_boundary(map: &LabelMap, class: u32) -> (Vec<Point>, Vec<bool>) {
    let dims = map.dims();
    let mask: Vec<bool> = map.labels().iter().map(|l| *l == class).collect();
    let mut boundary = Vec::new();
    for (idx, l) in map.labels().iter().enumerate() {
        if *l != class {
            continue;
        }
        let p = map.dims().point(idx);
        let mut inner_neighbors = 0;
        Connectivity::Face.for_each_neighbor(dims, p, |q| {
            if mask[dims.linear(q)] {
                inner_neighbors += 1;
            }
        });
        if inner_neighbors < 2 * dims.ndim() {
            boundary.push(p);
        }
    }
    (boundary, mask)
}

fn sq_dist(a: Point, b: Point) -> f64 {
    let mut s = 0.0;
    for ax in 0..3 {
        let d = a[ax] as f64 - b[ax] as f64;
        s += d * d;
    }
    s
}

/// Directed squared Hausdorff: max over `a` of the min squared distance to
/// `b`. The inner scan stops once it drops under the running max, which
/// cannot change the final value.
fn directed_sq(a: &[Point], b: &[Point]) -> f64 {
    let mut worst = 0.0f64;
    for &p in a {
        let mut nearest = f64::INFINITY;
        for &q in b {
            nearest = nearest.min(sq_dist(p, q));
            if nearest <= worst {
                break;
            }
        }
        if nearest > worst {
            worst = nearest;
        }
    }
    worst
}

/// Directed squared Hausdorff from boundary points `a` to boundary points
/// `b`, short-circuiting to 0 for points inside the full `b` set.
fn directed_sq_masked(a: &[Point], b: &[Point], b_mask: &[bool], b_map: &LabelMap) -> f64 {
    let mut worst = 0.0f64;
    for &p in a {
        if b_mask[b_map.dims().linear(p)] {
            continue;
        }
        let mut nearest = f64::INFINITY;
        for &q in b {
            nearest = nearest.min(sq_dist(p, q));
            if nearest <= worst {
                break;
            }
        }
        if nearest > worst {
            worst = nearest;
        }
    }
    worst
}
