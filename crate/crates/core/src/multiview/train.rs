use serde::{Deserialize, Serialize};

use super::dataset::MultiviewPair;
use super::model::{loss_graph, DecoderKind, IdentifierModel, LossParts, PreparedPair, Preprocessing};
use super::PartitionLayout;
use crate::error::{Error, Result};
use crate::nn::{adam_step, Activation, AdamState, Graph};
use crate::rng;

/// Training hyperparameters. Defaults are the desk-scale preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub reg_align: f64,
    pub layout: PartitionLayout,
    pub seed: u64,
    pub n_init: usize,
    pub keep_fraction: f64,
    pub hidden_dim: usize,
    pub depth: usize,
    pub activation: Activation,
    pub decoder: DecoderKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch: 64,
            lr: 1e-3,
            reg_align: 10.0,
            layout: PartitionLayout::pair_default(),
            seed: 0,
            n_init: 10,
            keep_fraction: 0.5,
            hidden_dim: 128,
            depth: 4,
            activation: Activation::Tanh,
            decoder: DecoderKind::Mlp,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::config("batch", "must be at least 1"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::config("lr", "must be finite and non-negative"));
        }
        if !(self.reg_align >= 0.0 && self.reg_align.is_finite()) {
            return Err(Error::config("reg_align", "must be finite and non-negative"));
        }
        if self.depth == 0 || self.hidden_dim == 0 {
            return Err(Error::config("depth", "depth and hidden_dim must be positive"));
        }
        if self.n_init == 0 {
            return Err(Error::config("n_init", "must be at least 1"));
        }
        if !(self.keep_fraction > 0.0 && self.keep_fraction <= 1.0) {
            return Err(Error::config("keep_fraction", "must lie in (0, 1]"));
        }
        self.layout.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub total: f64,
    pub alignment: f64,
    pub sufficiency: f64,
}

fn check_views(dataset: &[MultiviewPair], layout: &PartitionLayout) -> Result<usize> {
    let n_views = dataset.first().ok_or_else(|| Error::invalid("dataset is empty"))?.views.len();
    if dataset.iter().any(|p| p.views.len() != n_views) {
        return Err(Error::invalid("every record must have the same number of views"));
    }
    if n_views == 3 && layout.secondary_block.is_none() {
        return Err(Error::config("layout.secondary_block", "required for three-view data"));
    }
    Ok(n_views)
}

/// Batch loss and its gradient with respect to [`IdentifierModel::flat_params`].
pub fn batch_loss_and_grad(model: &IdentifierModel, pairs: &[MultiviewPair], reg_align: f64) -> Result<(LossParts, Vec<f64>)> {
    let basis = model.preprocessing.basis()?;
    let prepared = pairs.iter().map(|p| model.prepare(&basis, p)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&PreparedPair> = prepared.iter().collect();
    step_graph(model, &basis, &refs, reg_align)
}

fn step_graph(
    model: &IdentifierModel,
    basis: &crate::solver::DctBasis,
    batch: &[&PreparedPair],
    reg_align: f64,
) -> Result<(LossParts, Vec<f64>)> {
    let mut g = Graph::new();
    let bound = model.bind(&mut g, basis)?;
    let (total, align, suff) = loss_graph(model, &bound, &mut g, batch, reg_align)?;
    let parts = LossParts {
        total: g.scalar(total)?,
        alignment: g.scalar(align)?,
        sufficiency: g.scalar(suff)?,
    };
    if !parts.total.is_finite() {
        return Ok((parts, Vec::new()));
    }
    g.backward(total)?;
    Ok((parts, bound.flat_grad(&g)))
}

/// Adam on the multiview loss. Preprocessing statistics are fitted on the dataset;
/// initialization and batch order derive from `cfg.seed`, so runs are bit-reproducible.
pub fn train_identifier(dataset: &[MultiviewPair], cfg: &TrainConfig) -> Result<(IdentifierModel, Vec<EpochLoss>)> {
    cfg.validate()?;
    check_views(dataset, &cfg.layout)?;
    let system_id = dataset[0].views[0].system_id.clone();
    let pre = Preprocessing::fit(dataset.iter().flat_map(|p| &p.views), cfg.keep_fraction, cfg.n_init)?;
    let mut init_rng = rng::rng_from(rng::stage_seed(cfg.seed, "init"));
    let mut model = IdentifierModel::init(
        system_id,
        pre,
        cfg.layout.clone(),
        cfg.hidden_dim,
        cfg.depth,
        cfg.activation,
        cfg.decoder,
        &mut init_rng,
    )?;
    if cfg.epochs == 0 {
        return Ok((model, Vec::new()));
    }

    let basis = model.preprocessing.basis()?;
    let prepared = dataset.iter().map(|p| model.prepare(&basis, p)).collect::<Result<Vec<_>>>()?;
    let shuffle_stream = rng::stage_seed(cfg.seed, "shuffle");
    let mut params = model.flat_params();
    let mut adam = AdamState::new(params.len(), cfg.lr);
    let mut curve = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let order = rng::permutation(prepared.len(), &mut rng::rng_from(rng::item_seed(shuffle_stream, epoch as u64)));
        let mut acc = [0.0f64; 3];
        for (b, chunk) in order.chunks(cfg.batch).enumerate() {
            let batch: Vec<&PreparedPair> = chunk.iter().map(|&i| &prepared[i]).collect();
            let (parts, grad) = step_graph(&model, &basis, &batch, cfg.reg_align)?;
            if !parts.total.is_finite() || grad.iter().any(|v| !v.is_finite()) {
                return Err(Error::TrainingDiverged {
                    epoch,
                    batch: b,
                    alignment: parts.alignment,
                    sufficiency: parts.sufficiency,
                });
            }
            let w = chunk.len() as f64;
            acc[0] += w * parts.total;
            acc[1] += w * parts.alignment;
            acc[2] += w * parts.sufficiency;
            adam_step(&mut adam, &mut params, &grad)?;
            model.set_flat_params(&params)?;
        }
        let n = prepared.len() as f64;
        curve.push(EpochLoss {
            epoch,
            total: acc[0] / n,
            alignment: acc[1] / n,
            sufficiency: acc[2] / n,
        });
    }
    Ok((model, curve))
}
