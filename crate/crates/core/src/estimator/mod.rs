//! Two-head mask estimator.
//!
//! A frame-context dense trunk (two rectifier layers) feeds two sigmoid heads,
//! one for the ratio mask and one for the binary-mask probability. Forward and
//! backward passes, Adam and the training loop are written out by hand.

mod adam;
mod checkpoint;
mod features;
mod network;
mod train;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use features::{featurize, FeatureStats, STD_FLOOR};
pub use network::{backward, forward, EstimatorParams, ForwardCache, ForwardOutput, Gradients};
pub use train::{
    predict_masks, prepare_utterance, train, EpochRecord, PreparedUtterance, TrainConfig, TrainLog,
    TrainOutcome, TrainedModel,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EstimatorConfig {
    /// Bins per frame; also the width of each output head.
    pub input_bins: usize,
    /// Frames of context, centred on the current frame. Must be odd.
    pub context: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    /// Seeds weight initialisation only.
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            input_bins: 257,
            context: 5,
            hidden1: 200,
            hidden2: 300,
            seed: 0,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.context.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "context must be odd, got {}",
                self.context
            )));
        }
        if self.input_bins == 0 || self.hidden1 == 0 || self.hidden2 == 0 {
            return Err(Error::invalid("layer sizes must be at least 1"));
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        self.input_bins * self.context
    }

    /// (rows, cols) of each weight matrix: trunk 1, trunk 2, ratio head, binary head.
    pub fn layer_shapes(&self) -> [(usize, usize); 4] {
        [
            (self.hidden1, self.feature_dim()),
            (self.hidden2, self.hidden1),
            (self.input_bins, self.hidden2),
            (self.input_bins, self.hidden2),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|(r, c)| r * c + r).sum()
    }
}
