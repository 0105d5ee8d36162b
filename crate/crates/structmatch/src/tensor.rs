//! In-memory containers for soft class scores and hard labels.

use crate::error::{Error, Result};
use crate::grid::{GridDims, Point};

/// Per-element channel sums may drift this far from 1 before a tensor is
/// rejected.
pub const SUM_TOLERANCE: f64 = 1e-5;

/// Soft class scores on a dense grid, channels last, row-major.
///
/// Values are kept exactly as given (no renormalization), so saving a loaded
/// tensor reproduces the input bytes. Every element's channel vector must lie
/// on the probability simplex within [`SUM_TOLERANCE`].
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityTensor {
    dims: GridDims,
    num_classes: usize,
    values: Vec<f32>,
}

impl ProbabilityTensor {
    pub fn new(dims: GridDims, num_classes: usize, values: Vec<f32>) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::Shape(format!(
                "a probability tensor needs at least 2 channels, got {num_classes}"
            )));
        }
        let expected = dims.num_cells() * num_classes;
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "value buffer holds {} floats, dims {:?} with {} channels need {}",
                values.len(),
                dims.shape(),
                num_classes,
                expected
            )));
        }
        let t = Self {
            dims,
            num_classes,
            values,
        };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        for idx in 0..self.dims.num_cells() {
            let mut sum = 0.0f64;
            for (ch, &v) in self.element(idx).iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::ProbabilityOutOfRange {
                        index: idx,
                        channel: ch,
                        value: v,
                    });
                }
                sum += v as f64;
            }
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(Error::UnnormalizedProbability { index: idx, sum });
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> &GridDims {
        &self.dims
    }

    /// Channel count, including the background channel when present.
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Channel vector of the element at linear index `idx`.
    pub fn element(&self, idx: usize) -> &[f32] {
        let base = idx * self.num_classes;
        &self.values[base..base + self.num_classes]
    }

    pub fn at(&self, p: Point) -> &[f32] {
        self.element(self.dims.linear(p))
    }
}

/// Hard labels on a dense grid. 0 is background / none.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    dims: GridDims,
    labels: Vec<u32>,
}

impl LabelMap {
    pub fn new(dims: GridDims, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != dims.num_cells() {
            return Err(Error::Shape(format!(
                "label buffer holds {} values, dims {:?} need {}",
                labels.len(),
                dims.shape(),
                dims.num_cells()
            )));
        }
        Ok(Self { dims, labels })
    }

    pub fn zeros(dims: GridDims) -> Self {
        let n = dims.num_cells();
        Self {
            dims,
            labels: vec![0; n],
        }
    }

    pub fn dims(&self) -> &GridDims {
        &self.dims
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn get(&self, idx: usize) -> u32 {
        self.labels[idx]
    }

    pub fn at(&self, p: Point) -> u32 {
        self.labels[self.dims.linear(p)]
    }

    pub fn set(&mut self, p: Point, label: u32) {
        let idx = self.dims.linear(p);
        self.labels[idx] = label;
    }

    pub fn max_label(&self) -> u32 {
        self.labels.iter().copied().max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> GridDims {
        GridDims::new_2d(2, 2).unwrap()
    }

    #[test]
    fn accepts_valid_simplex_vectors() {
        let t = ProbabilityTensor::new(dims(), 2, vec![0.5, 0.5, 1.0, 0.0, 0.25, 0.75, 0.0, 1.0]);
        assert!(t.is_ok());
    }

    #[test]
    fn rejects_out_of_range_component() {
        let err =
            ProbabilityTensor::new(dims(), 2, vec![1.5, -0.5, 1.0, 0.0, 0.5, 0.5, 0.5, 0.5])
                .unwrap_err();
        assert!(matches!(
            err,
            Error::ProbabilityOutOfRange {
                index: 0,
                channel: 0,
                ..
            }
        ));
    }

    #[test]
    fn rejects_unnormalized_vector() {
        let err =
            ProbabilityTensor::new(dims(), 2, vec![0.5, 0.5, 0.9, 0.0, 0.5, 0.5, 0.5, 0.5])
                .unwrap_err();
        match err {
            Error::UnnormalizedProbability { index, sum } => {
                assert_eq!(index, 1);
                assert!((sum - 0.9).abs() < 1e-6);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn tolerates_tiny_sum_drift() {
        let t = ProbabilityTensor::new(
            dims(),
            2,
            vec![0.5, 0.500001, 1.0, 0.0, 0.5, 0.5, 0.5, 0.5],
        );
        assert!(t.is_ok());
    }

    #[test]
    fn rejects_wrong_buffer_length() {
        assert!(matches!(
            ProbabilityTensor::new(dims(), 2, vec![1.0; 7]),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            LabelMap::new(dims(), vec![0; 3]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn element_returns_channel_slice() {
        let t = ProbabilityTensor::new(dims(), 2, vec![0.1, 0.9, 0.2, 0.8, 0.3, 0.7, 0.4, 0.6])
            .unwrap();
        assert_eq!(t.element(2), &[0.3, 0.7]);
        assert_eq!(t.at([1, 0, 0]), &[0.3, 0.7]);
    }
}
