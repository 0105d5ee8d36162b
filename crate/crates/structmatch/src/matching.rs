//! Dissimilarity assembly, exact one-to-one candidate search, and
//! many-to-one-or-none refinement.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    edge_dissimilarity, vertex_dissimilarity, EdgeAttr, ModelGraph, RelationFamily, SceneGraph,
    VertexAttr,
};
use crate::regions::{PairDistances, RegionSet};
use crate::tensor::LabelMap;

/// Blend weights: `lambda` between vertex and edge terms of the assembled
/// matrix, `lambda_v` / `lambda_e` inside the direction-family vertex term
/// and both edge terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlendWeights {
    pub lambda: f64,
    pub lambda_v: f64,
    pub lambda_e: f64,
}

impl Default for BlendWeights {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            lambda_v: 0.5,
            lambda_e: 0.5,
        }
    }
}

impl BlendWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda", self.lambda),
            ("lambda_v", self.lambda_v),
            ("lambda_e", self.lambda_e),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Dense dissimilarity matrix over (scene vertex, model vertex) pairs. Pair
/// (i, j) maps to row/column i * n_m + j; diagonal entries carry weighted
/// vertex dissimilarities, compatible off-diagonal entries weighted edge
/// dissimilarities, conflicting ones 0.
#[derive(Clone, Debug)]
pub struct DissimilarityMatrix {
    n_r: usize,
    n_m: usize,
    lambda: f64,
    values: Vec<f64>,
}

impl DissimilarityMatrix {
    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_m(&self) -> usize {
        self.n_m
    }

    /// Rows/columns of the matrix: n_r * n_m.
    pub fn side(&self) -> usize {
        self.n_r * self.n_m
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Row/column of the pair (scene vertex i, model index j).
    pub fn pair_index(&self, i: usize, j: usize) -> usize {
        i * self.n_m + j
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.side() + col]
    }
}

/// Assembles the matching matrix from both graphs: diagonal entries are
/// `lambda * vertex_dissimilarity`, entries of pairs sharing neither scene
/// nor model vertex are `(1 - lambda) * edge_dissimilarity`, the rest 0.
pub fn assemble_k(
    gr: &SceneGraph,
    gm: &ModelGraph,
    w: &BlendWeights,
) -> Result<DissimilarityMatrix> {
    assemble(gr, gm, w, false)
}

/// Same as [`assemble_k`], but conflicting pairs (shared scene or model
/// vertex) get +inf instead of 0 so they stand out when inspecting the
/// matrix. Solvers never read those entries, so matching results are
/// identical under either assembly.
pub fn assemble_k_diagnostic(
    gr: &SceneGraph,
    gm: &ModelGraph,
    w: &BlendWeights,
) -> Result<DissimilarityMatrix> {
    assemble(gr, gm, w, true)
}

fn assemble(
    gr: &SceneGraph,
    gm: &ModelGraph,
    w: &BlendWeights,
    diagnostic: bool,
) -> Result<DissimilarityMatrix> {
    w.validate()?;
    if gr.family() != gm.family() {
        return Err(Error::FamilyMismatch {
            left: gr.family(),
            right: gm.family(),
        });
    }
    let family = gr.family();
    let n_r = gr.vertex_count();
    let n_m = gm.num_classes();
    let side = n_r * n_m;
    let mut values = vec![0.0f64; side * side];
    for i in 0..n_r {
        for j in 0..n_m {
            let p = i * n_m + j;
            values[p * side + p] = w.lambda
                * vertex_dissimilarity(family, gr.vertex(i), gm.vertex_by_index(j), w.lambda_v)?;
            for k in 0..n_r {
                for l in 0..n_m {
                    let q = k * n_m + l;
                    if p == q {
                        continue;
                    }
                    if i != k && j != l {
                        values[p * side + q] = (1.0 - w.lambda)
                            * edge_dissimilarity(gr.edge(i, k), gm.edge_by_index(j, l), w.lambda_e)?;
                    } else if diagnostic {
                        values[p * side + q] = f64::INFINITY;
                    }
                }
            }
        }
    }
    Ok(DissimilarityMatrix {
        n_r,
        n_m,
        lambda: w.lambda,
        values,
    })
}

/// Where a scene vertex ended up.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneLabel {
    /// Matched to this 1-based class id.
    Class(u32),
    /// Examined by refinement and dropped: no merge beat the threshold.
    Discarded,
    /// Left for refinement to decide.
    Pending,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchStage {
    Initial,
    Refined,
}

/// A (partial) mapping of scene vertices to classes with its cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub stage: MatchStage,
    /// One entry per scene vertex.
    pub labels: Vec<SceneLabel>,
    pub cost: f64,
}

impl Assignment {
    /// Matched (scene vertex, 0-based model index) pairs, by vertex id.
    pub fn assigned_pairs(&self) -> Vec<(usize, usize)> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(v, l)| match l {
                SceneLabel::Class(c) => Some((v, *c as usize - 1)),
                _ => None,
            })
            .collect()
    }

    pub fn class_of(&self, vertex: usize) -> Option<u32> {
        match self.labels[vertex] {
            SceneLabel::Class(c) => Some(c),
            _ => None,
        }
    }
}

/// Cost of an assignment under `k`: diagonal entries of matched pairs plus
/// both ordered cross entries of every two distinct matched pairs. Works for
/// many-to-one assignments too (their conflicting cross entries are 0).
pub fn qap_cost(x: &Assignment, k: &DissimilarityMatrix) -> Result<f64> {
    if x.labels.len() != k.n_r() {
        return Err(Error::DimMismatch(format!(
            "assignment covers {} vertices, matrix expects {}",
            x.labels.len(),
            k.n_r()
        )));
    }
    for l in &x.labels {
        if let SceneLabel::Class(c) = l {
            if *c == 0 || *c as usize > k.n_m() {
                return Err(Error::ClassOutOfRange {
                    label: *c,
                    num_classes: k.n_m(),
                });
            }
        }
    }
    let pairs = x.assigned_pairs();
    let mut cost = 0.0;
    for &(i, j) in &pairs {
        let p = k.pair_index(i, j);
        cost += k.get(p, p);
    }
    for &(i, j) in &pairs {
        let p = k.pair_index(i, j);
        for &(u, l) in &pairs {
            if i == u {
                continue;
            }
            cost += k.get(p, k.pair_index(u, l));
        }
    }
    Ok(cost)
}

/// Candidate scene vertices per model class (outer index = class - 1),
/// ascending ids. A class whose bucket would be empty is an error. With
/// `top_k`, buckets keep only the k regions scoring highest on the class's
/// own channel (ties prefer the lower id).
pub fn candidate_buckets(
    rs: &RegionSet,
    gm: &ModelGraph,
    gr: &SceneGraph,
    top_k: Option<usize>,
) -> Result<Vec<Vec<usize>>> {
    if gr.vertex_count() != rs.len() {
        return Err(Error::DimMismatch(format!(
            "scene graph has {} vertices, region set {}",
            gr.vertex_count(),
            rs.len()
        )));
    }
    let mut buckets = Vec::with_capacity(gm.num_classes());
    for class in 1..=gm.num_classes() as u32 {
        let mut ids = rs.bucket(class).to_vec();
        if ids.is_empty() {
            return Err(Error::EmptyCandidateClass { class });
        }
        if let Some(k) = top_k {
            if k == 0 {
                return Err(Error::InvalidParameter("top_k must be at least 1".into()));
            }
            if ids.len() > k {
                let ch = gm.class_space().channel_of_class(class);
                ids.sort_by(|&a, &b| {
                    let (pa, pb) = (gr.vertex(a).prob[ch], gr.vertex(b).prob[ch]);
                    pb.partial_cmp(&pa).unwrap().then(a.cmp(&b))
                });
                ids.truncate(k);
                ids.sort_unstable();
            }
        }
        buckets.push(ids);
    }
    Ok(buckets)
}

#[derive(Clone, Copy, Debug)]
pub struct SearchParams {
    /// Hard cap on the candidate product before enumeration starts.
    pub budget: u64,
    /// Allow splitting the search across the thread pool. Results are
    /// identical either way.
    pub parallel: bool,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            budget: 10_000_000,
            parallel: true,
        }
    }
}

/// Candidate products above this are worth farming out to rayon.
const PARALLEL_THRESHOLD: u128 = 4096;

/// Covers float drift between a prefix's running sum and the canonical leaf
/// cost; subtrees inside the margin are explored rather than pruned.
const PRUNE_MARGIN: f64 = 1e-9;

/// Exact search for the cheapest one-to-one assignment of one scene vertex
/// per class, restricted to the candidate buckets. Enumerates in
/// lexicographic bucket order with branch-and-bound pruning; among
/// equal-cost optima the lexicographically smallest tuple wins. Matrix
/// entries must be nonnegative and finite on all pair-compatible positions.
pub fn initial_matching(
    k: &DissimilarityMatrix,
    candidates: &[Vec<usize>],
    params: &SearchParams,
) -> Result<Assignment> {
    let buckets = normalize_buckets(k, candidates)?;
    let product = bucket_product(&buckets);
    if product > params.budget as u128 {
        return Err(Error::CandidateExplosion {
            product,
            budget: params.budget,
        });
    }

    let best = if params.parallel && product > PARALLEL_THRESHOLD && buckets[0].len() > 1 {
        buckets[0]
            .par_iter()
            .filter_map(|&v0| search_from(k, &buckets, v0))
            .min_by(|a, b| cmp_solution(a, b))
    } else {
        let mut search = Search::new(k, &buckets);
        search.go(0, 0.0);
        search.best
    };

    let (cost, tuple) = best.ok_or(Error::InfeasibleMatching)?;
    Ok(tuple_assignment(k, &tuple, cost))
}

/// Reference solver: walks the full candidate product without pruning and
/// scores every one-to-one tuple through [`qap_cost`]. Only for small
/// instances; the product is capped at [`BRUTE_FORCE_BUDGET`].
pub fn brute_force_qap(k: &DissimilarityMatrix, candidates: &[Vec<usize>]) -> Result<Assignment> {
    let buckets = normalize_buckets(k, candidates)?;
    let product = bucket_product(&buckets);
    if product > BRUTE_FORCE_BUDGET as u128 {
        return Err(Error::CandidateExplosion {
            product,
            budget: BRUTE_FORCE_BUDGET,
        });
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut indices = vec![0usize; buckets.len()];
    loop {
        let tuple: Vec<usize> = indices
            .iter()
            .enumerate()
            .map(|(c, &i)| buckets[c][i])
            .collect();
        if one_to_one(&tuple) {
            let x = tuple_assignment(k, &tuple, 0.0);
            let cost = qap_cost(&x, k)?;
            if best.as_ref().is_none_or(|(bc, _)| cost < *bc) {
                best = Some((cost, tuple));
            }
        }
        // Advance the odometer, last class fastest: lexicographic order.
        let mut level = buckets.len();
        loop {
            if level == 0 {
                let (cost, tuple) = best.ok_or(Error::InfeasibleMatching)?;
                return Ok(tuple_assignment(k, &tuple, cost));
            }
            level -= 1;
            indices[level] += 1;
            if indices[level] < buckets[level].len() {
                break;
            }
            indices[level] = 0;
        }
    }
}

pub const BRUTE_FORCE_BUDGET: u64 = 100_000;

fn normalize_buckets(k: &DissimilarityMatrix, candidates: &[Vec<usize>]) -> Result<Vec<Vec<usize>>> {
    if candidates.len() != k.n_m() {
        return Err(Error::DimMismatch(format!(
            "{} candidate buckets for {} model classes",
            candidates.len(),
            k.n_m()
        )));
    }
    let mut buckets = Vec::with_capacity(candidates.len());
    for (ci, bucket) in candidates.iter().enumerate() {
        if bucket.is_empty() {
            return Err(Error::EmptyCandidateClass {
                class: ci as u32 + 1,
            });
        }
        let mut ids = bucket.clone();
        ids.sort_unstable();
        for pair in ids.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::InvalidParameter(format!(
                    "duplicate candidate {} for class {}",
                    pair[0],
                    ci + 1
                )));
            }
        }
        if *ids.last().unwrap() >= k.n_r() {
            return Err(Error::DimMismatch(format!(
                "candidate {} beyond the {} scene vertices",
                ids.last().unwrap(),
                k.n_r()
            )));
        }
        buckets.push(ids);
    }
    Ok(buckets)
}

fn bucket_product(buckets: &[Vec<usize>]) -> u128 {
    buckets
        .iter()
        .map(|b| b.len() as u128)
        .try_fold(1u128, u128::checked_mul)
        .unwrap_or(u128::MAX)
}

fn one_to_one(tuple: &[usize]) -> bool {
    for (i, a) in tuple.iter().enumerate() {
        if tuple[i + 1..].contains(a) {
            return false;
        }
    }
    true
}

fn tuple_assignment(k: &DissimilarityMatrix, tuple: &[usize], cost: f64) -> Assignment {
    let mut labels = vec![SceneLabel::Pending; k.n_r()];
    for (class_idx, &v) in tuple.iter().enumerate() {
        labels[v] = SceneLabel::Class(class_idx as u32 + 1);
    }
    Assignment {
        stage: MatchStage::Initial,
        labels,
        cost,
    }
}

fn cmp_solution(a: &(f64, Vec<usize>), b: &(f64, Vec<usize>)) -> std::cmp::Ordering {
    a.0.partial_cmp(&b.0)
        .expect("costs are finite")
        .then_with(|| a.1.cmp(&b.1))
}

/// One branch of the parallel split: vertex `v0` fixed for class 0.
fn search_from(
    k: &DissimilarityMatrix,
    buckets: &[Vec<usize>],
    v0: usize,
) -> Option<(f64, Vec<usize>)> {
    let mut search = Search::new(k, buckets);
    let add = search.add_cost(v0, 0);
    search.used[v0] = true;
    search.chosen.push(v0);
    search.go(1, add);
    search.best
}

struct Search<'a> {
    k: &'a DissimilarityMatrix,
    buckets: &'a [Vec<usize>],
    used: Vec<bool>,
    chosen: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
}

impl<'a> Search<'a> {
    fn new(k: &'a DissimilarityMatrix, buckets: &'a [Vec<usize>]) -> Self {
        Self {
            k,
            buckets,
            used: vec![false; k.n_r()],
            chosen: Vec::with_capacity(buckets.len()),
            best: None,
        }
    }

    fn go(&mut self, class: usize, partial: f64) {
        if let Some((best_cost, _)) = &self.best {
            if partial >= best_cost + PRUNE_MARGIN {
                return;
            }
        }
        if class == self.buckets.len() {
            // Score the complete tuple canonically so ties and equality
            // semantics match the brute-force reference bit for bit.
            let x = tuple_assignment(self.k, &self.chosen, 0.0);
            let cost = qap_cost(&x, self.k).expect("validated dimensions");
            if self.best.as_ref().is_none_or(|(bc, _)| cost < *bc) {
                self.best = Some((cost, self.chosen.clone()));
            }
            return;
        }
        for bi in 0..self.buckets[class].len() {
            let v = self.buckets[class][bi];
            if self.used[v] {
                continue;
            }
            let add = self.add_cost(v, class);
            self.used[v] = true;
            self.chosen.push(v);
            self.go(class + 1, partial + add);
            self.chosen.pop();
            self.used[v] = false;
        }
    }

    /// Marginal cost of placing `v` on `class` given the current prefix.
    fn add_cost(&self, v: usize, class: usize) -> f64 {
        let p = self.k.pair_index(v, class);
        let mut add = self.k.get(p, p);
        for (c, &u) in self.chosen.iter().enumerate() {
            let q = self.k.pair_index(u, c);
            add += self.k.get(p, q) + self.k.get(q, p);
        }
        add
    }
}

/// Per-candidate outcome while refining one vertex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateCost {
    /// 1-based class id of the merge target.
    pub class: u32,
    /// Total cost of the working assignment with the merge applied.
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineStep {
    pub vertex: usize,
    /// All evaluated merge targets, ascending class id.
    pub candidates: Vec<CandidateCost>,
    /// Cheapest candidate (ties pick the lowest class id), if any target
    /// exists.
    pub best: Option<CandidateCost>,
    /// True when the best candidate beat the threshold and was merged.
    pub committed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineLog {
    pub threshold: f64,
    /// Working-graph cost before any pending vertex was visited.
    pub initial_cost: f64,
    /// Cost recomputed from scratch on the final merged graph; also the
    /// returned assignment's cost.
    pub final_cost: f64,
    pub steps: Vec<RefineStep>,
}

#[derive(Clone, Copy, Debug)]
pub struct RefineParams {
    /// Strict acceptance bound: a merge is kept only if the total cost with
    /// it applied stays below this.
    pub threshold: f64,
    pub weights: BlendWeights,
}

/// Many-to-one-or-none refinement of an initial one-to-one assignment.
///
/// Pending vertices are visited largest first (ties by ascending id). Each
/// one is tentatively merged into every matched class; the cheapest total
/// beats `threshold` or the vertex is discarded. Commits are permanent: later
/// evaluations see earlier merges. Running refine on its own output changes
/// nothing.
pub fn refine(
    x: &Assignment,
    gr: &SceneGraph,
    gm: &ModelGraph,
    rs: &RegionSet,
    params: &RefineParams,
) -> Result<(Assignment, RefineLog)> {
    params.weights.validate()?;
    if !(params.threshold.is_finite() && params.threshold > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold must be positive and finite, got {}",
            params.threshold
        )));
    }
    if gr.family() != gm.family() {
        return Err(Error::FamilyMismatch {
            left: gr.family(),
            right: gm.family(),
        });
    }
    if x.labels.len() != gr.vertex_count() || rs.len() != gr.vertex_count() {
        return Err(Error::DimMismatch(format!(
            "assignment covers {} vertices, scene graph {} and region set {}",
            x.labels.len(),
            gr.vertex_count(),
            rs.len()
        )));
    }
    let n_m = gm.num_classes();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_m];
    let mut pending = Vec::new();
    for (v, label) in x.labels.iter().enumerate() {
        match label {
            SceneLabel::Class(c) => {
                if *c == 0 || *c as usize > n_m {
                    return Err(Error::ClassOutOfRange {
                        label: *c,
                        num_classes: n_m,
                    });
                }
                members[*c as usize - 1].push(v);
            }
            SceneLabel::Pending => pending.push(v),
            SceneLabel::Discarded => {}
        }
    }

    let state = WorkingState {
        gr,
        gm,
        rs,
        weights: params.weights,
        pair: PairDistances::build(rs)?,
    };

    let mut labels = x.labels.clone();
    let initial_cost = state.eval(&members)?;
    let mut steps = Vec::with_capacity(pending.len());

    pending.sort_by(|&a, &b| {
        rs.region(b)
            .size()
            .cmp(&rs.region(a).size())
            .then(a.cmp(&b))
    });

    for v in pending {
        let mut candidates = Vec::new();
        let mut best: Option<CandidateCost> = None;
        for j in 0..n_m {
            if members[j].is_empty() {
                continue;
            }
            let pos = members[j].binary_search(&v).unwrap_err();
            members[j].insert(pos, v);
            let cost = state.eval(&members)?;
            members[j].remove(pos);
            let cand = CandidateCost {
                class: j as u32 + 1,
                cost,
            };
            candidates.push(cand);
            if best.is_none_or(|b| cand.cost < b.cost) {
                best = Some(cand);
            }
        }
        let committed = best.is_some_and(|b| b.cost < params.threshold);
        if let Some(b) = best {
            if committed {
                let j = b.class as usize - 1;
                let pos = members[j].binary_search(&v).unwrap_err();
                members[j].insert(pos, v);
                labels[v] = SceneLabel::Class(b.class);
            } else {
                labels[v] = SceneLabel::Discarded;
            }
        } else {
            labels[v] = SceneLabel::Discarded;
        }
        steps.push(RefineStep {
            vertex: v,
            candidates,
            best,
            committed,
        });
    }

    let final_cost = state.eval(&members)?;
    let log = RefineLog {
        threshold: params.threshold,
        initial_cost,
        final_cost,
        steps,
    };
    Ok((
        Assignment {
            stage: MatchStage::Refined,
            labels,
            cost: final_cost,
        },
        log,
    ))
}

/// Shared inputs for working-graph cost evaluation during refinement.
struct WorkingState<'a> {
    gr: &'a SceneGraph,
    gm: &'a ModelGraph,
    rs: &'a RegionSet,
    weights: BlendWeights,
    pair: PairDistances,
}

impl WorkingState<'_> {
    /// Total cost of the merged working graph against the model, recomputed
    /// from scratch. Fold order is fixed by the sorted member lists, so the
    /// same membership always yields bit-identical results.
    fn eval(&self, members: &[Vec<usize>]) -> Result<f64> {
        let family = self.gr.family();
        let w = &self.weights;
        let active: Vec<usize> = (0..members.len())
            .filter(|&j| !members[j].is_empty())
            .collect();
        let mut cost = 0.0;
        for &j in &active {
            let vattr = self.fold_vertex(&members[j]);
            cost += w.lambda
                * vertex_dissimilarity(family, &vattr, self.gm.vertex_by_index(j), w.lambda_v)?;
        }
        for &j in &active {
            for &l in &active {
                if j == l {
                    continue;
                }
                let eattr = self.fold_edge(&members[j], &members[l]);
                cost += (1.0 - w.lambda)
                    * edge_dissimilarity(&eattr, self.gm.edge_by_index(j, l), w.lambda_e)?;
            }
        }
        Ok(cost)
    }

    /// Merged vertex attributes: size-weighted mean score vector; in the
    /// direction family the diameter is the max of member diameters and
    /// cross-pair max distances.
    fn fold_vertex(&self, set: &[usize]) -> VertexAttr {
        if set.len() == 1 {
            let v = set[0];
            return VertexAttr {
                prob: self.gr.vertex(v).prob.clone(),
                diameter: self.gr.vertex(v).diameter,
            };
        }
        let mut total = 0.0f64;
        let mut prob = vec![0.0f64; self.gr.vertex(set[0]).prob.len()];
        for &v in set {
            let size = self.rs.region(v).size() as f64;
            total += size;
            for (acc, p) in prob.iter_mut().zip(&self.gr.vertex(v).prob) {
                *acc += size * p;
            }
        }
        for p in &mut prob {
            *p /= total;
        }
        let diameter = (self.gr.family() == RelationFamily::Direction).then(|| {
            let mut d = 0.0f64;
            for (i, &a) in set.iter().enumerate() {
                d = d.max(self.rs.region(a).diameter());
                for &b in &set[i + 1..] {
                    d = d.max(self.pair.d_max(a, b));
                }
            }
            d
        });
        VertexAttr { prob, diameter }
    }

    /// Merged edge attributes between two member sets.
    fn fold_edge(&self, a: &[usize], b: &[usize]) -> EdgeAttr {
        match self.gr.family() {
            RelationFamily::Distance => {
                if a.len() == 1 && b.len() == 1 {
                    return self.gr.edge(a[0], b[0]).clone();
                }
                let mut d_min = f64::INFINITY;
                let mut d_max = 0.0f64;
                for &i in a {
                    for &j in b {
                        d_min = d_min.min(self.pair.d_min(i, j));
                        d_max = d_max.max(self.pair.d_max(i, j));
                    }
                }
                EdgeAttr::Distance { d_min, d_max }
            }
            RelationFamily::Direction => {
                if a.len() == 1 && b.len() == 1 {
                    return self.gr.edge(a[0], b[0]).clone();
                }
                let ca = self.weighted_centroid(a);
                let cb = self.weighted_centroid(b);
                let c_s = self.rs.scene_diagonal();
                let ndim = self.rs.dims().ndim();
                let v: Vec<f64> = (0..ndim).map(|ax| (cb[ax] - ca[ax]) / c_s).collect();
                let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                EdgeAttr::Direction { v, norm }
            }
        }
    }

    fn weighted_centroid(&self, set: &[usize]) -> [f64; 3] {
        let mut acc = [0.0f64; 3];
        let mut total = 0.0f64;
        for &v in set {
            let r = self.rs.region(v);
            let size = r.size() as f64;
            total += size;
            for ax in 0..3 {
                acc[ax] += size * r.centroid()[ax];
            }
        }
        for c in &mut acc {
            *c /= total;
        }
        acc
    }
}

/// Paints a refined assignment back onto the grid: each region's cells get
/// its class, discarded regions (and cells outside every region) become
/// background.
pub fn relabel(map: &LabelMap, x: &Assignment, rs: &RegionSet) -> Result<LabelMap> {
    if x.stage != MatchStage::Refined {
        return Err(Error::StageMismatch { expected: "refined" });
    }
    if x.labels.len() != rs.len() {
        return Err(Error::DimMismatch(format!(
            "assignment covers {} vertices, region set has {}",
            x.labels.len(),
            rs.len()
        )));
    }
    if map.dims() != rs.dims() {
        return Err(Error::DimMismatch(format!(
            "label map {:?} vs region set {:?}",
            map.dims().shape(),
            rs.dims().shape()
        )));
    }
    let mut out = LabelMap::zeros(*map.dims());
    for (v, r) in rs.regions().iter().enumerate() {
        match x.labels[v] {
            SceneLabel::Class(c) => {
                for &p in r.points() {
                    out.set(p, c);
                }
            }
            SceneLabel::Discarded => {}
            SceneLabel::Pending => {
                return Err(Error::InvalidParameter(format!(
                    "vertex {v} is still pending in a refined assignment"
                )));
            }
        }
    }
    Ok(out)
}
