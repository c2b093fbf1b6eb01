//! Rally segmentation: per-frame HOG features, a linear classifier over the
//! chi-squared feature map, Kalman smoothing of the decision margins, and
//! extraction of rally spans.

pub mod chi2;
pub mod classifier;
pub mod hog;
pub mod smoothing;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chi2::{additive_chi2_kernel, chi2_feature_map, Chi2Map};
pub use classifier::{classify_frames, stack_descriptors, train_rally_classifier, RallyModel};
pub use hog::hog_descriptor;
pub use smoothing::{extract_rally_segments, kalman_smooth, Segment};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RallyError {
    #[error("bad dimensions: {0}")]
    BadDimensions(String),
    #[error("negative feature {value} at index {index}")]
    NegativeInput { index: usize, value: f64 },
    #[error("training data must contain both rally and non-rally examples")]
    DegenerateData,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty sequence")]
    EmptySequence,
    #[error("bad configuration: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub downscale_width: usize,
    pub downscale_height: usize,
    pub hog_bins: usize,
    pub cell_size: usize,
    pub block_size: usize,
    pub block_clip: f64,
    pub chi2_period: f64,
    pub c: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            downscale_width: 128,
            downscale_height: 72,
            hog_bins: 9,
            cell_size: 8,
            block_size: 2,
            block_clip: 0.2,
            chi2_period: 3.0,
            c: 0.05,
            epochs: 30,
            seed: 0,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<(), RallyError> {
        let bad = |msg: String| Err(RallyError::BadConfig(msg));
        if self.cell_size == 0 || self.block_size == 0 || self.hog_bins == 0 || self.epochs == 0 {
            return bad("cell, block, bin and epoch counts must be positive".into());
        }
        if !self.downscale_width.is_multiple_of(self.cell_size) || !self.downscale_height.is_multiple_of(self.cell_size) {
            return bad(format!(
                "{}x{} is not divisible into {}px cells",
                self.downscale_width, self.downscale_height, self.cell_size
            ));
        }
        if self.downscale_width / self.cell_size < self.block_size
            || self.downscale_height / self.cell_size < self.block_size
        {
            return bad("downscaled frame smaller than one block".into());
        }
        if !(self.block_clip > 0.0 && self.chi2_period > 0.0 && self.c > 0.0) {
            return bad("clip, period and C must be positive".into());
        }
        Ok(())
    }

    pub fn hog_len(&self) -> usize {
        let cells_x = self.downscale_width / self.cell_size;
        let cells_y = self.downscale_height / self.cell_size;
        (cells_x + 1 - self.block_size) * (cells_y + 1 - self.block_size) * self.block_size * self.block_size * self.hog_bins
    }
}

/// Smoothing and run-extraction parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentParams {
    pub process_variance: f64,
    pub measurement_variance: f64,
    pub threshold: f64,
    pub min_len: usize,
}

impl Default for SegmentParams {
    fn default() -> Self {
        SegmentParams {
            process_variance: smoothing::DEFAULT_PROCESS_VARIANCE,
            measurement_variance: smoothing::DEFAULT_MEASUREMENT_VARIANCE,
            threshold: 0.0,
            min_len: smoothing::DEFAULT_MIN_LEN,
        }
    }
}

/// Smooths per-frame margins and extracts rally spans.
pub fn segment_margins(margins: &[f64], params: &SegmentParams) -> Result<Vec<Segment>, RallyError> {
    let smoothed = kalman_smooth(margins, params.process_variance, params.measurement_variance)?;
    extract_rally_segments(&smoothed, params.threshold, params.min_len)
}
