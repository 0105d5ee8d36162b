//! From hard labels to connected regions and the geometry the graph stage
//! consumes.

use std::collections::{BTreeMap, VecDeque};

use crate::error::{Error, Result};
use crate::grid::{self, ClassSpace, Connectivity, GridDims, Point};
use crate::tensor::{LabelMap, ProbabilityTensor};

/// Boundaries larger than this are thinned by a deterministic stride before
/// any pairwise distance scan; affected results are flagged approximate.
pub const BOUNDARY_SAMPLE_CAP: usize = 4096;

/// Winner-take-all labels for every cell. Ties pick the lowest channel, and
/// channels map to labels through `classes` (so without a background channel
/// the winning channel c yields label c + 1).
pub fn argmax_labels(t: &ProbabilityTensor, classes: &ClassSpace) -> Result<LabelMap> {
    if t.num_classes() != classes.channels() {
        return Err(Error::DimMismatch(format!(
            "tensor has {} channels but the class space expects {}",
            t.num_classes(),
            classes.channels()
        )));
    }
    let mut labels = Vec::with_capacity(t.dims().num_cells());
    for idx in 0..t.dims().num_cells() {
        let el = t.element(idx);
        let mut best = 0usize;
        for (ch, &v) in el.iter().enumerate().skip(1) {
            if v > el[best] {
                best = ch;
            }
        }
        labels.push(classes.label_of_channel(best));
    }
    LabelMap::new(*t.dims(), labels)
}

/// One same-labeled cell set with cached geometry. Points and boundary are
/// sorted row-major. Produced by [`extract_regions`] (connected components)
/// or crate-internal class merging, never built ad hoc.
#[derive(Clone, Debug)]
pub struct Region {
    id: usize,
    class_hint: u32,
    points: Vec<Point>,
    boundary: Vec<Point>,
    centroid: [f64; 3],
    diameter: f64,
    diameter_is_exact: bool,
}

impl Region {
    /// Builds a region from raw cells, computing boundary, centroid, and
    /// diameter. The set may be disconnected (train-time class merging uses
    /// that); extraction only ever passes connected sets.
    pub(crate) fn from_points(
        id: usize,
        class_hint: u32,
        mut points: Vec<Point>,
        dims: &GridDims,
    ) -> Self {
        debug_assert!(!points.is_empty());
        points.sort_unstable();
        let boundary: Vec<Point> = points
            .iter()
            .copied()
            .filter(|&p| is_boundary(p, &points, dims))
            .collect();

        let n = points.len() as f64;
        let mut centroid = [0.0f64; 3];
        for p in &points {
            for ax in 0..3 {
                centroid[ax] += p[ax] as f64;
            }
        }
        for c in &mut centroid {
            *c /= n;
        }

        let c_s = dims.diagonal();
        debug_assert!(c_s > 0.0, "degenerate grid must be rejected upstream");
        let mut max_sq = 0.0f64;
        for (ai, a) in sampled(&boundary).enumerate() {
            for b in sampled(&boundary).skip(ai + 1) {
                max_sq = max_sq.max(grid::squared_distance(a, b));
            }
        }
        Self {
            id,
            class_hint,
            diameter: max_sq.sqrt() / c_s,
            diameter_is_exact: boundary.len() <= BOUNDARY_SAMPLE_CAP,
            points,
            boundary,
            centroid,
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    /// Label the region's cells carried in the source map.
    pub fn class_hint(&self) -> u32 {
        self.class_hint
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Cells with a face neighbor outside the region (or outside the grid).
    pub fn boundary(&self) -> &[Point] {
        &self.boundary
    }

    pub fn centroid(&self) -> [f64; 3] {
        self.centroid
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    /// Largest pairwise cell distance, divided by the scene diagonal.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// False when the boundary was subsampled before the diameter scan.
    pub fn diameter_is_exact(&self) -> bool {
        self.diameter_is_exact
    }
}

/// True when some face direction leaves the grid or the (sorted) point set.
fn is_boundary(p: Point, sorted_points: &[Point], dims: &GridDims) -> bool {
    let sp = [p[0] as i64, p[1] as i64, p[2] as i64];
    for ax in 0..dims.ndim() {
        for step in [-1i64, 1] {
            let mut q = sp;
            q[ax] += step;
            match grid::in_grid(dims, q) {
                None => return true,
                Some(q) => {
                    if sorted_points.binary_search(&q).is_err() {
                        return true;
                    }
                }
            }
        }
    }
    false
}

/// Deterministic stride subsample keeping at most [`BOUNDARY_SAMPLE_CAP`]
/// points of a sorted boundary.
fn sampled(points: &[Point]) -> impl Iterator<Item = Point> + Clone + '_ {
    let stride = points.len().div_ceil(BOUNDARY_SAMPLE_CAP).max(1);
    points.iter().copied().step_by(stride)
}

/// Regions of one label map, ids in scan order of each region's first cell.
#[derive(Clone, Debug)]
pub struct RegionSet {
    regions: Vec<Region>,
    by_class: BTreeMap<u32, Vec<usize>>,
    dims: GridDims,
    c_s: f64,
}

impl RegionSet {
    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn region(&self, id: usize) -> &Region {
        &self.regions[id]
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn dims(&self) -> &GridDims {
        &self.dims
    }

    /// The grid diagonal all distances in this set are normalized by.
    pub fn scene_diagonal(&self) -> f64 {
        self.c_s
    }

    /// Region ids whose class hint is `class`, ascending. Empty slice when
    /// the class never appears.
    pub fn bucket(&self, class: u32) -> &[usize] {
        self.by_class.get(&class).map_or(&[], Vec::as_slice)
    }

    /// Classes with at least one region, ascending.
    pub fn classes_present(&self) -> Vec<u32> {
        self.by_class.keys().copied().collect()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ExtractParams {
    pub connectivity: Connectivity,
    /// Regions smaller than this are dropped before ids are assigned.
    pub min_region_size: usize,
    pub classes: ClassSpace,
}

impl ExtractParams {
    pub fn new(classes: ClassSpace) -> Self {
        Self {
            connectivity: Connectivity::Face,
            min_region_size: 1,
            classes,
        }
    }
}

/// Connected components of the nonzero labels in `map`, one region each.
/// `t` is the tensor the map came from; shapes must agree.
pub fn extract_regions(
    map: &LabelMap,
    t: &ProbabilityTensor,
    params: &ExtractParams,
) -> Result<RegionSet> {
    let dims = *map.dims();
    if dims != *t.dims() {
        return Err(Error::DimMismatch(format!(
            "label map {:?} vs tensor {:?}",
            dims.shape(),
            t.dims().shape()
        )));
    }
    if t.num_classes() != params.classes.channels() {
        return Err(Error::DimMismatch(format!(
            "tensor has {} channels but the class space expects {}",
            t.num_classes(),
            params.classes.channels()
        )));
    }
    if dims.diagonal() == 0.0 {
        return Err(Error::DegenerateGrid);
    }
    for idx in 0..dims.num_cells() {
        let label = map.get(idx);
        if !params.classes.contains_label(label) {
            return Err(Error::ClassOutOfRange {
                label,
                num_classes: params.classes.num_classes(),
            });
        }
    }

    let mut visited = vec![false; dims.num_cells()];
    let mut components: Vec<(u32, Vec<usize>)> = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..dims.num_cells() {
        if visited[start] || map.get(start) == 0 {
            continue;
        }
        let class = map.get(start);
        let mut members = Vec::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            members.push(idx);
            params
                .connectivity
                .for_each_neighbor(&dims, dims.point(idx), |q| {
                    let qi = dims.linear(q);
                    if !visited[qi] && map.get(qi) == class {
                        visited[qi] = true;
                        queue.push_back(qi);
                    }
                });
        }
        components.push((class, members));
    }

    let mut regions = Vec::new();
    let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (class, members) in components {
        if members.len() < params.min_region_size {
            continue;
        }
        let points = members.iter().map(|&i| dims.point(i)).collect();
        let id = regions.len();
        regions.push(Region::from_points(id, class, points, &dims));
        by_class.entry(class).or_default().push(id);
    }

    Ok(RegionSet {
        regions,
        by_class,
        c_s: dims.diagonal(),
        dims,
    })
}

/// Mean channel vector over the region's cells, renormalized to sum to 1
/// (inputs may carry up to the tensor's admission tolerance).
pub fn region_mean_probability(r: &Region, t: &ProbabilityTensor) -> Result<Vec<f64>> {
    let dims = t.dims();
    let mut acc = vec![0.0f64; t.num_classes()];
    for &p in r.points() {
        if !dims.contains(p) {
            return Err(Error::DimMismatch(format!(
                "region cell {p:?} outside tensor {:?}",
                dims.shape()
            )));
        }
        for (ch, &v) in t.at(p).iter().enumerate() {
            acc[ch] += v as f64;
        }
    }
    let n = r.size() as f64;
    for a in &mut acc {
        *a /= n;
    }
    let sum: f64 = acc.iter().sum();
    debug_assert!(sum > 0.5, "tensor admission bounds the sum near 1");
    for a in &mut acc {
        *a /= sum;
    }
    Ok(acc)
}

/// Smallest and largest boundary-to-boundary distance between two distinct
/// regions, both divided by `c_s`.
///
/// Scanning boundaries only is exact for disjoint cell sets: any interior
/// cell has a face neighbor strictly closer to (resp. farther from) the
/// other set, so both extrema are attained on boundaries. Beyond
/// [`BOUNDARY_SAMPLE_CAP`] boundary cells the scan subsamples and the result
/// is approximate.
pub fn pairwise_region_distances(a: &Region, b: &Region, c_s: f64) -> Result<(f64, f64)> {
    if a.id() == b.id() {
        return Err(Error::InvalidParameter(format!(
            "pairwise distances need two distinct regions, got id {} twice",
            a.id()
        )));
    }
    let mut min_sq = f64::INFINITY;
    let mut max_sq = 0.0f64;
    for pa in sampled(a.boundary()) {
        for pb in sampled(b.boundary()) {
            let d = grid::squared_distance(pa, pb);
            min_sq = min_sq.min(d);
            max_sq = max_sq.max(d);
        }
    }
    Ok((min_sq.sqrt() / c_s, max_sq.sqrt() / c_s))
}

/// Displacement from `a`'s centroid to `b`'s, divided by `c_s`, with its
/// norm. The third component is 0 on 2-D grids.
pub fn centroid_vector(a: &Region, b: &Region, c_s: f64) -> ([f64; 3], f64) {
    let ca = a.centroid();
    let cb = b.centroid();
    let v = [
        (cb[0] - ca[0]) / c_s,
        (cb[1] - ca[1]) / c_s,
        (cb[2] - ca[2]) / c_s,
    ];
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    (v, norm)
}

/// Symmetric lookup tables of pairwise min/max boundary distances between
/// all regions of a set, used by refinement's merge folds.
#[derive(Clone, Debug)]
pub(crate) struct PairDistances {
    n: usize,
    d_min: Vec<f64>,
    d_max: Vec<f64>,
}

impl PairDistances {
    pub(crate) fn build(rs: &RegionSet) -> Result<Self> {
        let n = rs.len();
        let mut d_min = vec![0.0; n * n];
        let mut d_max = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let (lo, hi) =
                    pairwise_region_distances(rs.region(i), rs.region(j), rs.scene_diagonal())?;
                d_min[i * n + j] = lo;
                d_min[j * n + i] = lo;
                d_max[i * n + j] = hi;
                d_max[j * n + i] = hi;
            }
        }
        Ok(Self { n, d_min, d_max })
    }

    pub(crate) fn d_min(&self, i: usize, j: usize) -> f64 {
        self.d_min[i * self.n + j]
    }

    pub(crate) fn d_max(&self, i: usize, j: usize) -> f64 {
        self.d_max[i * self.n + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::distance;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform_tensor(dims: GridDims, channels: usize) -> ProbabilityTensor {
        let v = 1.0 / channels as f32;
        ProbabilityTensor::new(dims, channels, vec![v; dims.num_cells() * channels]).unwrap()
    }

    fn map_2d(rows: &[&[u32]]) -> LabelMap {
        let dims = GridDims::new_2d(rows.len(), rows[0].len()).unwrap();
        let labels = rows.iter().flat_map(|r| r.iter().copied()).collect();
        LabelMap::new(dims, labels).unwrap()
    }

    fn extract(map: &LabelMap, connectivity: Connectivity, num_classes: usize) -> RegionSet {
        let classes = ClassSpace::new(num_classes, true).unwrap();
        let t = uniform_tensor(*map.dims(), classes.channels());
        extract_regions(
            map,
            &t,
            &ExtractParams {
                connectivity,
                min_region_size: 1,
                classes,
            },
        )
        .unwrap()
    }

    #[test]
    fn argmax_takes_lowest_channel_on_ties() {
        let dims = GridDims::new_2d(1, 2).unwrap();
        let t = ProbabilityTensor::new(dims, 3, vec![0.4, 0.4, 0.2, 0.2, 0.4, 0.4]).unwrap();
        let classes = ClassSpace::new(2, true).unwrap();
        let m = argmax_labels(&t, &classes).unwrap();
        assert_eq!(m.labels(), &[0, 1]);
    }

    #[test]
    fn argmax_without_background_channel_shifts_labels() {
        let dims = GridDims::new_2d(1, 1).unwrap();
        let t = ProbabilityTensor::new(dims, 2, vec![0.3, 0.7]).unwrap();
        let classes = ClassSpace::new(2, false).unwrap();
        let m = argmax_labels(&t, &classes).unwrap();
        assert_eq!(m.labels(), &[2]);
    }

    #[test]
    fn plus_shape_is_one_region_with_four_boundary_cells() {
        let m = map_2d(&[
            &[0, 1, 0],
            &[1, 1, 1],
            &[0, 1, 0],
        ]);
        let rs = extract(&m, Connectivity::Face, 1);
        assert_eq!(rs.len(), 1);
        let r = rs.region(0);
        assert_eq!(r.size(), 5);
        assert_eq!(r.class_hint(), 1);
        // The center cell has all four face neighbors inside.
        assert_eq!(r.boundary().len(), 4);
        assert!(!r.boundary().contains(&[1, 1, 0]));
        assert_eq!(r.centroid(), [1.0, 1.0, 0.0]);
    }

    #[test]
    fn diagonal_cells_split_under_face_join_under_full() {
        let m = map_2d(&[&[1, 0], &[0, 1]]);
        assert_eq!(extract(&m, Connectivity::Face, 1).len(), 2);
        assert_eq!(extract(&m, Connectivity::Full, 1).len(), 1);
    }

    #[test]
    fn region_ids_follow_scan_order_after_size_filter() {
        let m = map_2d(&[
            &[2, 0, 1, 1],
            &[0, 0, 1, 1],
            &[3, 3, 0, 0],
        ]);
        let classes = ClassSpace::new(3, true).unwrap();
        let t = uniform_tensor(*m.dims(), classes.channels());
        let rs = extract_regions(
            &m,
            &t,
            &ExtractParams {
                connectivity: Connectivity::Face,
                min_region_size: 2,
                classes,
            },
        )
        .unwrap();
        // The singleton class-2 cell is dropped; remaining ids reindex.
        assert_eq!(rs.len(), 2);
        assert_eq!(rs.region(0).class_hint(), 1);
        assert_eq!(rs.region(1).class_hint(), 3);
        assert_eq!(rs.bucket(1), &[0]);
        assert_eq!(rs.bucket(2), &[] as &[usize]);
        assert_eq!(rs.bucket(3), &[1]);
    }

    #[test]
    fn rejects_labels_beyond_class_space() {
        let m = map_2d(&[&[0, 5]]);
        let classes = ClassSpace::new(3, true).unwrap();
        let t = uniform_tensor(*m.dims(), classes.channels());
        let err = extract_regions(&m, &t, &ExtractParams::new(classes)).unwrap_err();
        assert!(matches!(
            err,
            Error::ClassOutOfRange {
                label: 5,
                num_classes: 3
            }
        ));
    }

    #[test]
    fn rejects_single_cell_grid() {
        let dims = GridDims::new_2d(1, 1).unwrap();
        let m = LabelMap::new(dims, vec![1]).unwrap();
        let classes = ClassSpace::new(1, true).unwrap();
        let t = uniform_tensor(dims, 2);
        assert!(matches!(
            extract_regions(&m, &t, &ExtractParams::new(classes)),
            Err(Error::DegenerateGrid)
        ));
    }

    /// Independent component labeling: iterative stack-based fill scanning
    /// neighbors through a different code path than the production BFS.
    fn oracle_components(map: &LabelMap, connectivity: Connectivity) -> Vec<Vec<usize>> {
        let dims = *map.dims();
        let mut seen = vec![false; dims.num_cells()];
        let mut out = Vec::new();
        for start in 0..dims.num_cells() {
            if seen[start] || map.get(start) == 0 {
                continue;
            }
            let mut stack = vec![start];
            let mut comp = Vec::new();
            seen[start] = true;
            while let Some(idx) = stack.pop() {
                comp.push(idx);
                let p = dims.point(idx);
                connectivity.for_each_neighbor(&dims, p, |q| {
                    let qi = dims.linear(q);
                    if !seen[qi] && map.get(qi) == map.get(start) {
                        seen[qi] = true;
                        stack.push(qi);
                    }
                });
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out.sort();
        out
    }

    #[test]
    fn flood_fill_matches_independent_oracle_on_random_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for case in 0..200 {
            let dims = if case % 3 == 0 {
                GridDims::new_3d(
                    rng.random_range(1..7),
                    rng.random_range(1..7),
                    rng.random_range(2..5),
                )
                .unwrap()
            } else {
                GridDims::new_2d(rng.random_range(2..10), rng.random_range(2..10)).unwrap()
            };
            let labels: Vec<u32> = (0..dims.num_cells())
                .map(|_| rng.random_range(0..3))
                .collect();
            let map = LabelMap::new(dims, labels).unwrap();
            let connectivity = if rng.random_bool(0.5) {
                Connectivity::Face
            } else {
                Connectivity::Full
            };
            let rs = extract(&map, connectivity, 2);
            let mut got: Vec<Vec<usize>> = rs
                .regions()
                .iter()
                .map(|r| r.points().iter().map(|&p| dims.linear(p)).collect())
                .collect();
            got.sort();
            assert_eq!(got, oracle_components(&map, connectivity));
        }
    }

    #[test]
    fn centroid_and_diameter_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..100 {
            let dims = GridDims::new_2d(12, 12).unwrap();
            let mut labels = vec![0u32; dims.num_cells()];
            for idx in 0..labels.len() {
                if rng.random_bool(0.4) {
                    labels[idx] = 1;
                }
            }
            if labels.iter().all(|&l| l == 0) {
                labels[0] = 1;
            }
            let map = LabelMap::new(dims, labels).unwrap();
            let rs = extract(&map, Connectivity::Face, 1);
            for r in rs.regions() {
                let mut sum = [0.0f64; 3];
                let mut max_d = 0.0f64;
                for (i, &a) in r.points().iter().enumerate() {
                    for ax in 0..3 {
                        sum[ax] += a[ax] as f64;
                    }
                    for &b in &r.points()[i + 1..] {
                        max_d = max_d.max(distance(a, b));
                    }
                }
                let n = r.size() as f64;
                for (ax, s) in sum.iter().enumerate() {
                    assert!((r.centroid()[ax] - s / n).abs() < 1e-9);
                }
                assert!(r.diameter_is_exact());
                assert!((r.diameter() - max_d / dims.diagonal()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pairwise_distances_match_full_point_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for _ in 0..100 {
            let dims = GridDims::new_2d(14, 14).unwrap();
            let mut labels = vec![0u32; dims.num_cells()];
            // Two blobs in opposite halves so they never touch.
            for _ in 0..20 {
                let r = rng.random_range(0..6);
                let c = rng.random_range(0..14);
                labels[r * 14 + c] = 1;
            }
            for _ in 0..20 {
                let r = rng.random_range(8..14);
                let c = rng.random_range(0..14);
                labels[r * 14 + c] = 2;
            }
            let map = LabelMap::new(dims, labels).unwrap();
            let rs = extract(&map, Connectivity::Full, 2);
            let ones = rs.bucket(1);
            let twos = rs.bucket(2);
            if ones.is_empty() || twos.is_empty() {
                continue;
            }
            let (a, b) = (rs.region(ones[0]), rs.region(twos[0]));
            let (lo, hi) = pairwise_region_distances(a, b, rs.scene_diagonal()).unwrap();
            let mut lo_ref = f64::INFINITY;
            let mut hi_ref = 0.0f64;
            for &pa in a.points() {
                for &pb in b.points() {
                    let d = distance(pa, pb);
                    lo_ref = lo_ref.min(d);
                    hi_ref = hi_ref.max(d);
                }
            }
            assert!((lo - lo_ref / rs.scene_diagonal()).abs() < 1e-12);
            assert!((hi - hi_ref / rs.scene_diagonal()).abs() < 1e-12);
            assert!(lo <= hi);
        }
    }

    #[test]
    fn mean_probability_matches_naive_loop_and_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let dims = GridDims::new_2d(6, 6).unwrap();
        let channels = 4;
        let mut values = Vec::new();
        for _ in 0..dims.num_cells() {
            let raw: Vec<f32> = (0..channels).map(|_| rng.random::<f32>() + 0.01).collect();
            let sum: f32 = raw.iter().sum();
            values.extend(raw.iter().map(|v| v / sum));
        }
        let t = ProbabilityTensor::new(dims, channels, values).unwrap();
        let classes = ClassSpace::new(3, true).unwrap();
        let m = argmax_labels(&t, &classes).unwrap();
        let rs = extract_regions(&m, &t, &ExtractParams::new(classes)).unwrap();
        for r in rs.regions() {
            let got = region_mean_probability(r, &t).unwrap();
            let mut naive = vec![0.0f64; channels];
            for &p in r.points() {
                for ch in 0..channels {
                    naive[ch] += t.at(p)[ch] as f64;
                }
            }
            let total: f64 = naive.iter().sum();
            for ch in 0..channels {
                assert!((got[ch] - naive[ch] / total).abs() < 1e-9);
            }
            assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rectangle_boundary_is_its_perimeter() {
        let dims = GridDims::new_2d(8, 8).unwrap();
        let mut labels = vec![0u32; 64];
        for r in 1..6 {
            for c in 2..7 {
                labels[r * 8 + c] = 1;
            }
        }
        let map = LabelMap::new(dims, labels).unwrap();
        let rs = extract(&map, Connectivity::Face, 1);
        let r = rs.region(0);
        assert_eq!(r.size(), 25);
        assert_eq!(r.boundary().len(), 16);
    }

    #[test]
    fn oversized_boundary_is_subsampled_deterministically() {
        // A 1100x1100 hollow-free square has a 4396-cell perimeter, past the
        // cap, so the diameter is computed on a strided subsample.
        let n = 1100;
        let dims = GridDims::new_2d(n, n).unwrap();
        let map = LabelMap::new(dims, vec![1; n * n]).unwrap();
        let rs = extract(&map, Connectivity::Face, 1);
        let r = rs.region(0);
        assert_eq!(r.boundary().len(), 4 * n - 4);
        assert!(!r.diameter_is_exact());
        assert!(sampled(r.boundary()).count() <= BOUNDARY_SAMPLE_CAP);
        let again = extract(&map, Connectivity::Face, 1);
        assert_eq!(r.diameter(), again.region(0).diameter());
        assert!(r.diameter() <= 1.0);
    }

    #[test]
    fn singleton_region_geometry() {
        let m = map_2d(&[&[0, 0], &[0, 1]]);
        let rs = extract(&m, Connectivity::Face, 1);
        let r = rs.region(0);
        assert_eq!(r.size(), 1);
        assert_eq!(r.boundary(), &[[1, 1, 0]]);
        assert_eq!(r.diameter(), 0.0);
    }

    #[test]
    fn centroid_vector_points_from_a_to_b() {
        let m = map_2d(&[&[1, 0, 2]]);
        let rs = extract(&m, Connectivity::Face, 2);
        let (v, norm) = centroid_vector(rs.region(0), rs.region(1), rs.scene_diagonal());
        assert_eq!(v[0], 0.0);
        assert!((v[1] - 1.0).abs() < 1e-12);
        assert!((norm - 1.0).abs() < 1e-12);
        let (back, _) = centroid_vector(rs.region(1), rs.region(0), rs.scene_diagonal());
        assert!((back[1] + 1.0).abs() < 1e-12);
    }
}
