//! Named parameter profiles and their override layering: preset, then
//! config file, then command-line flags.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::RelationFamily;
use crate::grid::Connectivity;
use crate::matching::BlendWeights;

/// Complete parameter set for training and refinement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub family: RelationFamily,
    pub weights: BlendWeights,
    /// Refinement acceptance threshold; a merge must keep the total cost
    /// strictly below this.
    pub threshold: f64,
    pub connectivity: Connectivity,
    /// Regions smaller than this many cells are dropped during extraction.
    pub min_region_size: usize,
    /// Cap on the candidate-tuple product before the initial search starts.
    pub budget: u64,
    /// Keep only the k best-scoring candidate regions per class.
    pub top_k: Option<usize>,
    /// Whether tensor channel 0 is background.
    pub background_channel: bool,
}

impl Profile {
    /// Distance-relation preset: min/max region distances, threshold 1.01.
    pub fn distance() -> Self {
        Self {
            family: RelationFamily::Distance,
            weights: BlendWeights::default(),
            threshold: 1.01,
            connectivity: Connectivity::Face,
            min_region_size: 1,
            budget: 10_000_000,
            top_k: None,
            background_channel: true,
        }
    }

    /// Direction-relation preset: diameters plus directional vectors,
    /// threshold 1.0.
    pub fn direction() -> Self {
        Self {
            family: RelationFamily::Direction,
            threshold: 1.0,
            ..Self::distance()
        }
    }

    pub fn named(name: &str) -> Result<Self> {
        match name {
            "distance" => Ok(Self::distance()),
            "direction" => Ok(Self::direction()),
            other => Err(Error::InvalidParameter(format!(
                "unknown profile '{other}', expected 'distance' or 'direction'"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold must be positive and finite, got {}",
                self.threshold
            )));
        }
        if self.budget == 0 {
            return Err(Error::InvalidParameter("budget must be at least 1".into()));
        }
        if self.top_k == Some(0) {
            return Err(Error::InvalidParameter("top_k must be at least 1".into()));
        }
        if self.min_region_size == 0 {
            return Err(Error::InvalidParameter(
                "min_region_size must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Partial profile, typically parsed from a flat TOML config or collected
/// from flags. Unset fields leave the base value alone.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileOverrides {
    pub family: Option<RelationFamily>,
    pub lambda: Option<f64>,
    pub lambda_v: Option<f64>,
    pub lambda_e: Option<f64>,
    pub threshold: Option<f64>,
    pub connectivity: Option<Connectivity>,
    pub min_region_size: Option<usize>,
    pub budget: Option<u64>,
    pub top_k: Option<usize>,
    pub background_channel: Option<bool>,
}

impl ProfileOverrides {
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

    /// Applies the set fields on top of `base` and validates the result.
    pub fn apply(&self, base: Profile) -> Result<Profile> {
        let mut p = base;
        if let Some(v) = self.family {
            p.family = v;
        }
        if let Some(v) = self.lambda {
            p.weights.lambda = v;
        }
        if let Some(v) = self.lambda_v {
            p.weights.lambda_v = v;
        }
        if let Some(v) = self.lambda_e {
            p.weights.lambda_e = v;
        }
        if let Some(v) = self.threshold {
            p.threshold = v;
        }
        if let Some(v) = self.connectivity {
            p.connectivity = v;
        }
        if let Some(v) = self.min_region_size {
            p.min_region_size = v;
        }
        if let Some(v) = self.budget {
            p.budget = v;
        }
        if let Some(v) = self.top_k {
            p.top_k = Some(v);
        }
        if let Some(v) = self.background_channel {
            p.background_channel = v;
        }
        p.validate()?;
        Ok(p)
    }
}
