//! End-to-end refinement: probability tensor in, structurally consistent
//! label map out, with every intermediate stage exposed.

use crate::error::{Error, Result};
use crate::graph::{build_scene_graph, ModelGraph};
use crate::matching::{
    assemble_k, candidate_buckets, initial_matching, refine, relabel, Assignment, RefineLog,
    RefineParams, SearchParams,
};
use crate::profile::Profile;
use crate::regions::{argmax_labels, extract_regions, ExtractParams, RegionSet};
use crate::tensor::{LabelMap, ProbabilityTensor};

/// Everything produced along the way, for callers that want to inspect or
/// log intermediate stages.
#[derive(Clone, Debug)]
pub struct RefineOutcome {
    /// Plain per-element argmax segmentation the pipeline started from.
    pub argmax: LabelMap,
    pub regions: RegionSet,
    pub initial: Assignment,
    pub refined: Assignment,
    pub log: RefineLog,
    /// Refined segmentation: regions painted with their matched class,
    /// discarded regions cleared to background.
    pub output: LabelMap,
}

/// Runs the full chain: argmax, region extraction, scene-graph
/// construction, matrix assembly, initial one-to-one matching, refinement,
/// and relabeling. The model's class layout and relation family must agree
/// with the tensor and profile.
pub fn refine_tensor(
    tensor: &ProbabilityTensor,
    model: &ModelGraph,
    profile: &Profile,
) -> Result<RefineOutcome> {
    profile.validate()?;
    if profile.family != model.family() {
        return Err(Error::FamilyMismatch {
            left: profile.family,
            right: model.family(),
        });
    }
    let classes = *model.class_space();
    if classes.channels() != tensor.num_classes() {
        return Err(Error::DimMismatch(format!(
            "tensor has {} channels but the model expects {}",
            tensor.num_classes(),
            classes.channels()
        )));
    }
    if tensor.dims().ndim() != model.ndim() {
        return Err(Error::DimMismatch(format!(
            "tensor is {}-d but the model was trained on {}-d grids",
            tensor.dims().ndim(),
            model.ndim()
        )));
    }
    if profile.background_channel != classes.background_channel() {
        return Err(Error::DimMismatch(format!(
            "profile says background_channel = {} but the model was built with {}",
            profile.background_channel,
            classes.background_channel()
        )));
    }

    let argmax = argmax_labels(tensor, &classes)?;
    let params = ExtractParams {
        connectivity: profile.connectivity,
        min_region_size: profile.min_region_size,
        classes,
    };
    let regions = extract_regions(&argmax, tensor, &params)?;
    let gr = build_scene_graph(&regions, tensor, model.family())?;
    let k = assemble_k(&gr, model, &profile.weights)?;
    let buckets = candidate_buckets(&regions, model, &gr, profile.top_k)?;
    let initial = initial_matching(
        &k,
        &buckets,
        &SearchParams {
            budget: profile.budget,
            parallel: true,
        },
    )?;
    let (refined, log) = refine(
        &initial,
        &gr,
        model,
        &regions,
        &RefineParams {
            threshold: profile.threshold,
            weights: profile.weights,
        },
    )?;
    let output = relabel(&argmax, &refined, &regions)?;
    Ok(RefineOutcome {
        argmax,
        regions,
        initial,
        refined,
        log,
        output,
    })
}
