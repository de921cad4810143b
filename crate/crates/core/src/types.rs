//! Domain value types shared across the pipeline.
//!
//! Conventions fixed here once: images are row-major `(y, x)` RGB in `[0,1]`
//! floats (8-bit files are divided by 255 on ingest), patches are square
//! grayscale grids in the same range, and descriptors are unit-norm vectors
//! of the experiment's dimensionality `C`.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Error;

/// Tolerance on `| ||d||_2 - 1 |` for descriptors flagged as normalized.
pub const NORM_TOL: f32 = 1e-5;

/// A local visual descriptor attached to a keypoint or patch.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub values: Vec<f32>,
    /// Whether the vector has been L2-normalized.
    pub norm_flag: bool,
}

impl Descriptor {
    /// Wrap raw values and L2-normalize them. A vector with near-zero energy
    /// becomes the uniform unit vector so downstream distances stay defined.
    pub fn normalized(mut values: Vec<f32>) -> Self {
        let norm = num_traits::Float::sqrt(values.iter().map(|v| v * v).sum::<f32>());
        if norm < 1e-12 {
            let c = values.len();
            let fill = 1.0 / num_traits::Float::sqrt(c as f32);
            values.iter_mut().for_each(|v| *v = fill);
        } else {
            values.iter_mut().for_each(|v| *v /= norm);
        }
        Descriptor { values, norm_flag: true }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn check(&self) -> Result<(), Error> {
        if !self.values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("descriptor"));
        }
        if self.norm_flag {
            let norm = num_traits::Float::sqrt(self.values.iter().map(|v| v * v).sum::<f32>());
            if (norm - 1.0).abs() > NORM_TOL {
                return Err(Error::InvalidValue {
                    key: String::from("descriptor"),
                    reason: alloc::format!("norm {norm} outside unit tolerance"),
                });
            }
        }
        Ok(())
    }
}

/// Detected interest point, 0-based pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: u32,
    pub y: u32,
    /// Detector response used for ranking and scatter conflicts.
    pub score: f32,
}

/// Square grayscale patch in `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub size: usize,
    pub data: Vec<f32>,
}

impl Patch {
    pub fn new(size: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), size * size);
        Patch { size, data }
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.size + x]
    }
}

/// RGB image in `[0,1]` with its detected keypoints.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSample {
    pub id: String,
    pub width: usize,
    pub height: usize,
    /// Row-major interleaved RGB, length `height * width * 3`.
    pub rgb: Vec<f32>,
    pub keypoints: Vec<Keypoint>,
}

impl ImageSample {
    pub fn new(id: String, width: usize, height: usize, rgb: Vec<f32>, keypoints: Vec<Keypoint>) -> Self {
        debug_assert_eq!(rgb.len(), width * height * 3);
        ImageSample { id, width, height, rgb, keypoints }
    }

    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> [f32; 3] {
        let o = (y * self.width + x) * 3;
        [self.rgb[o], self.rgb[o + 1], self.rgb[o + 2]]
    }
}

/// Matched anchor/positive patch pairs with distinct 3D-point labels,
/// the unit of utility training and in-batch hardest-negative mining.
#[derive(Debug, Clone)]
pub struct PatchTripletBatch {
    pub anchors: Vec<Patch>,
    pub positives: Vec<Patch>,
    pub labels: Vec<u64>,
}

impl PatchTripletBatch {
    pub fn new(anchors: Vec<Patch>, positives: Vec<Patch>, labels: Vec<u64>) -> Result<Self, Error> {
        if anchors.len() != positives.len() {
            return Err(Error::LengthMismatch { left: anchors.len(), right: positives.len() });
        }
        if anchors.len() != labels.len() {
            return Err(Error::LengthMismatch { left: anchors.len(), right: labels.len() });
        }
        let mut sorted = labels.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::DuplicateLabels);
        }
        Ok(PatchTripletBatch { anchors, positives, labels })
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn normalization_handles_zero_energy() {
        let d = Descriptor::normalized(vec![0.0; 4]);
        assert!(d.values.iter().all(|&v| (v - 0.5).abs() < 1e-7));
        d.check().unwrap();
    }

    #[test]
    fn normalization_unit_norm() {
        let d = Descriptor::normalized(vec![3.0, 4.0]);
        assert!((d.values[0] - 0.6).abs() < 1e-7);
        assert!((d.values[1] - 0.8).abs() < 1e-7);
        d.check().unwrap();
    }

    #[test]
    fn triplet_batch_rejects_duplicate_labels() {
        let p = Patch::new(2, vec![0.0; 4]);
        let err = PatchTripletBatch::new(
            vec![p.clone(), p.clone()],
            vec![p.clone(), p.clone()],
            vec![5, 5],
        )
        .unwrap_err();
        assert_eq!(err, Error::DuplicateLabels);
    }
}
