//! Structural post-processing for semantic segmentation.
//!
//! A segmentation network emits a per-element class probability tensor.
//! Taking the argmax of that tensor gives a label map that is usually close
//! to correct but structurally naive: spurious blobs appear, organs split
//! in two, symmetric parts get confused. This crate repairs such maps by
//! matching the scene against a small attributed graph of the layout that
//! was learned from annotations:
//!
//! 1. connected components of the argmax map become scene-graph vertices,
//!    with mean class scores (and optionally diameters) as attributes and
//!    pairwise spatial relations as edge attributes;
//! 2. a model graph with one vertex per class, trained by averaging the
//!    same attributes over annotated maps, is matched against the scene
//!    graph by exact search over a quadratic assignment objective;
//! 3. the remaining regions are merged into their best class or discarded
//!    under a total-cost threshold, and the result is painted back onto the
//!    grid.
//!
//! # Quickstart
//!
//! ```
//! use structmatch::graph::train_model_graph;
//! use structmatch::grid::ClassSpace;
//! use structmatch::pipeline::refine_tensor;
//! use structmatch::profile::Profile;
//! use structmatch::synth::{generate, SceneSpec};
//!
//! // A synthetic three-class scene stands in for network output.
//! let scene = generate(&SceneSpec::new(7, vec![48, 48], 3))?;
//!
//! // Train a model graph on the clean annotation, then refine the tensor.
//! let profile = Profile::distance();
//! let classes = ClassSpace::new(3, true)?;
//! let model = train_model_graph(
//!     std::slice::from_ref(&scene.ground_truth),
//!     profile.family,
//!     classes,
//!     None,
//! )?;
//! let out = refine_tensor(&scene.tensor, &model, &profile)?;
//! assert_eq!(out.output, scene.ground_truth);
//! # Ok::<(), structmatch::Error>(())
//! ```
//!
//! The `structmatch` binary exposes the same pipeline as `build-model`,
//! `refine`, `evaluate`, and `synth` subcommands; the book under `book/`
//! walks through each stage.

pub mod error;
pub mod graph;
pub mod grid;
pub mod matching;
pub mod metrics;
pub mod npy;
pub mod pipeline;
pub mod profile;
pub mod regions;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};

/// The book's code blocks double as doctests so the guide can never drift
/// from the library. The README's quickstart gets the same treatment.
#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}

#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $file:literal) => {
            #[doc = include_str!(concat!("../book/src/", $file))]
            mod $name {}
        };
    }

    chapter!(introduction, "introduction.md");
    chapter!(file_formats, "file-formats.md");
    chapter!(regions, "regions.md");
    chapter!(graphs, "graphs.md");
    chapter!(matching, "matching.md");
    chapter!(refinement, "refinement.md");
    chapter!(metrics, "metrics.md");
    chapter!(synthetic_scenes, "synthetic-scenes.md");
    chapter!(cli, "cli.md");
}
