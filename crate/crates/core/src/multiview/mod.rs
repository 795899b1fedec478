//! Partial identification of shared parameter blocks from multiview trajectories.
//!
//! Views of one system agree on the parameters indexed by `S` and differ elsewhere. An
//! encoder maps each (standardized, DCT-truncated) trajectory to a latent vector whose
//! designated shared block is aligned across views, while a decoder must rebuild every
//! view from its latent and first few states.

mod dataset;
pub(crate) use model::median_of;
mod model;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dataset::{
    generate_multiview_dataset, generate_multiview_dataset_with, read_dataset, write_dataset, MultiviewPair,
    SynthOptions,
};
pub use model::{
    decode_forecast, encode, encode_batch, forecast_mse, block_distance_medians, multiview_loss, DecoderKind, DecoderParams,
    IdentifierModel, LossParts, Preprocessing, MODEL_FORMAT,
};
pub use train::{batch_loss_and_grad, train_identifier, EpochLoss, TrainConfig};

/// Partition of the latent coordinates into blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionLayout {
    pub latent_dim: usize,
    pub blocks: Vec<Vec<usize>>,
    /// Block aligned between views 0 and 1.
    pub shared_block: usize,
    /// Block aligned between views 0 and 2 in the three-view scheme.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secondary_block: Option<usize>,
}

impl PartitionLayout {
    /// Consecutive blocks of the given sizes; block 0 is shared.
    pub fn contiguous(sizes: &[usize]) -> Result<Self> {
        let mut blocks = Vec::new();
        let mut start = 0;
        for &s in sizes {
            blocks.push((start..start + s).collect());
            start += s;
        }
        let layout = Self {
            latent_dim: start,
            blocks,
            shared_block: 0,
            secondary_block: None,
        };
        layout.validate()?;
        Ok(layout)
    }

    /// Default for pairs: latent 8 split 4 + 4.
    pub fn pair_default() -> Self {
        Self::contiguous(&[4, 4]).expect("static layout")
    }

    /// Default for triples: latent 12 split 4/4/4, block 1 aligned between views 0 and 2.
    pub fn triple_default() -> Self {
        let mut l = Self::contiguous(&[4, 4, 4]).expect("static layout");
        l.secondary_block = Some(1);
        l
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.blocks.is_empty() {
            return Err(Error::config("layout", "latent_dim and blocks must be non-empty"));
        }
        let mut seen = vec![false; self.latent_dim];
        for (b, block) in self.blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::config(format!("layout.blocks[{b}]"), "block is empty"));
            }
            for &i in block {
                if i >= self.latent_dim || seen[i] {
                    return Err(Error::config(
                        format!("layout.blocks[{b}]"),
                        format!("index {i} is out of range or repeated"),
                    ));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::config("layout.blocks", "blocks do not cover the latent range"));
        }
        if self.shared_block >= self.blocks.len() {
            return Err(Error::config("layout.shared_block", "no such block"));
        }
        if let Some(s) = self.secondary_block {
            if s >= self.blocks.len() || s == self.shared_block {
                return Err(Error::config("layout.secondary_block", "must name a block other than shared_block"));
            }
        }
        Ok(())
    }

    /// Latent coordinates of block `b` picked out of `z`.
    pub fn block_values(&self, z: &[f64], b: usize) -> Vec<f64> {
        self.blocks[b].iter().map(|&i| z[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layouts_validate() {
        assert!(PartitionLayout::pair_default().validate().is_ok());
        assert!(PartitionLayout::triple_default().validate().is_ok());
        let mut bad = PartitionLayout::pair_default();
        bad.blocks[1] = vec![4, 5, 6];
        assert_eq!(bad.validate().unwrap_err().kind(), "config");
        let mut bad = PartitionLayout::pair_default();
        bad.shared_block = 2;
        assert!(bad.validate().is_err());
        let mut overlap = PartitionLayout::pair_default();
        overlap.blocks[1][0] = 0;
        assert!(overlap.validate().is_err());
    }
}
