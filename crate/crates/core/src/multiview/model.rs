use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::dataset::MultiviewPair;
use super::PartitionLayout;
use crate::error::{Error, Result};
use crate::json;
use crate::nn::{mlp_forward, Activation, BoundMlp, Graph, MlpParams, Tensor, Var};
use crate::rng::Rng;
use crate::solver::{DctBasis, TimeGrid, Trajectory};

pub const MODEL_FORMAT: &str = "dynident-identifier/1";

/// Per-channel standardization followed by a truncated DCT along time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preprocessing {
    pub keep_fraction: f64,
    pub t_len: usize,
    pub state_dim: usize,
    pub t0: f64,
    pub t_max: f64,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Number of leading states handed to the decoder.
    pub n_init: usize,
}

impl Preprocessing {
    /// Channel statistics over every state of every view.
    pub fn fit<'a>(views: impl IntoIterator<Item = &'a Trajectory>, keep_fraction: f64, n_init: usize) -> Result<Self> {
        let mut it = views.into_iter().peekable();
        let first = it.peek().ok_or_else(|| Error::invalid("cannot fit preprocessing on no data"))?;
        let (t_len, d) = (first.len(), first.state_dim());
        let (t0, t_max) = (first.grid().t0(), first.grid().t_max());
        if n_init == 0 || n_init > t_len {
            return Err(Error::invalid(format!("n_init must lie in 1..={t_len}")));
        }
        DctBasis::new(t_len, keep_fraction)?;
        let mut sum = vec![0.0; d];
        let mut sum_sq = vec![0.0; d];
        let mut count = 0usize;
        for v in it {
            if v.len() != t_len || v.state_dim() != d {
                return Err(Error::invalid("all views must share the grid length and state dimension"));
            }
            for t in 0..t_len {
                for (c, x) in v.state(t).iter().enumerate() {
                    sum[c] += x;
                    sum_sq[c] += x * x;
                }
            }
            count += t_len;
        }
        let n = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sum_sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| {
                let sd = (s / n - m * m).max(0.0).sqrt();
                if sd > 1e-12 { sd } else { 1.0 }
            })
            .collect();
        Ok(Self {
            keep_fraction,
            t_len,
            state_dim: d,
            t0,
            t_max,
            mean,
            std,
            n_init,
        })
    }

    pub fn basis(&self) -> Result<DctBasis> {
        DctBasis::new(self.t_len, self.keep_fraction)
    }

    /// Number of feature values per view: kept frequencies × state dimension.
    pub fn n_features(&self) -> Result<usize> {
        Ok(self.basis()?.kept() * self.state_dim)
    }

    fn check(&self, traj: &Trajectory) -> Result<()> {
        if traj.len() != self.t_len || traj.state_dim() != self.state_dim {
            return Err(Error::invalid(format!(
                "trajectory is {}x{}, model expects {}x{}",
                traj.len(),
                traj.state_dim(),
                self.t_len,
                self.state_dim
            )));
        }
        Ok(())
    }

    fn standardize(&self, raw: &[f64]) -> Vec<f64> {
        let d = self.state_dim;
        raw.iter()
            .enumerate()
            .map(|(i, x)| (x - self.mean[i % d]) / self.std[i % d])
            .collect()
    }

    pub(crate) fn features(&self, basis: &DctBasis, traj: &Trajectory) -> Result<Vec<f64>> {
        self.check(traj)?;
        let z = self.standardize(traj.states());
        let mut out = vec![0.0; basis.kept() * self.state_dim];
        basis.forward_flat(&z, self.state_dim, &mut out);
        Ok(out)
    }

    pub(crate) fn init_states(&self, traj: &Trajectory) -> Result<Vec<f64>> {
        self.check(traj)?;
        Ok(self.standardize(&traj.states()[..self.n_init * self.state_dim]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    /// MLP from (latent, first `n_init` states) to the DCT coefficients of the trajectory.
    Mlp,
    /// Latent-conditioned neural vector field integrated by RK4 from the first state.
    VectorField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecoderParams {
    Mlp { net: MlpParams },
    VectorField { net: MlpParams, dt: f64 },
}

impl DecoderParams {
    fn net(&self) -> &MlpParams {
        match self {
            DecoderParams::Mlp { net } | DecoderParams::VectorField { net, .. } => net,
        }
    }

    fn net_mut(&mut self) -> &mut MlpParams {
        match self {
            DecoderParams::Mlp { net } | DecoderParams::VectorField { net, .. } => net,
        }
    }
}

/// Encoder, decoder, latent layout and preprocessing statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentifierModel {
    pub format: String,
    pub system_id: String,
    pub encoder: MlpParams,
    pub decoder: DecoderParams,
    pub layout: PartitionLayout,
    pub preprocessing: Preprocessing,
}

/// Loss components; `total = reg_align · alignment + sufficiency`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub alignment: f64,
    pub sufficiency: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct PreparedView {
    pub feats: Vec<f64>,
    pub init: Vec<f64>,
}

pub(crate) type PreparedPair = Vec<PreparedView>;

enum BoundDecoder {
    Mlp(BoundMlp),
    Field { net: BoundMlp, dt: f64, dct: Var },
}

/// Model parameters registered on a graph.
pub(crate) struct Bound {
    pub enc: BoundMlp,
    dec: BoundDecoder,
}

impl Bound {
    pub fn flat_grad(&self, g: &Graph) -> Vec<f64> {
        let mut out = self.enc.flat_grad(g);
        match &self.dec {
            BoundDecoder::Mlp(net) | BoundDecoder::Field { net, .. } => out.extend(net.flat_grad(g)),
        }
        out
    }
}

impl IdentifierModel {
    /// Fresh model with Glorot-initialized encoder and decoder.
    #[allow(clippy::too_many_arguments)]
    pub fn init(
        system_id: impl Into<String>,
        preprocessing: Preprocessing,
        layout: PartitionLayout,
        hidden_dim: usize,
        depth: usize,
        activation: Activation,
        decoder: DecoderKind,
        rng: &mut Rng,
    ) -> Result<Self> {
        layout.validate()?;
        let n_feat = preprocessing.n_features()?;
        let d = preprocessing.state_dim;
        let encoder = MlpParams::new(n_feat, hidden_dim, layout.latent_dim, depth, activation, rng)?;
        let decoder = match decoder {
            DecoderKind::Mlp => DecoderParams::Mlp {
                net: MlpParams::new(
                    layout.latent_dim + preprocessing.n_init * d,
                    hidden_dim,
                    n_feat,
                    depth,
                    activation,
                    rng,
                )?,
            },
            DecoderKind::VectorField => {
                let grid = TimeGrid::uniform(preprocessing.t0, preprocessing.t_max, preprocessing.t_len)?;
                let dt = grid
                    .uniform_step()
                    .ok_or_else(|| Error::invalid("the vector-field decoder needs at least two grid points"))?;
                DecoderParams::VectorField {
                    net: MlpParams::new(layout.latent_dim + d, hidden_dim, d, depth, activation, rng)?,
                    dt,
                }
            }
        };
        Ok(Self {
            format: MODEL_FORMAT.to_string(),
            system_id: system_id.into(),
            encoder,
            decoder,
            layout,
            preprocessing,
        })
    }

    pub fn decoder_kind(&self) -> DecoderKind {
        match self.decoder {
            DecoderParams::Mlp { .. } => DecoderKind::Mlp,
            DecoderParams::VectorField { .. } => DecoderKind::VectorField,
        }
    }

    pub fn n_params(&self) -> usize {
        self.encoder.n_params() + self.decoder.net().n_params()
    }

    /// Encoder parameters followed by decoder parameters.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = self.encoder.flatten();
        out.extend(self.decoder.net().flatten());
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        let ne = self.encoder.n_params();
        if flat.len() != self.n_params() {
            return Err(Error::invalid("parameter vector length differs from the model"));
        }
        self.encoder.set_flat(&flat[..ne])?;
        self.decoder.net_mut().set_flat(&flat[ne..])
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != MODEL_FORMAT {
            return Err(Error::Format(format!(
                "unsupported model format `{}` (expected `{MODEL_FORMAT}`)",
                self.format
            )));
        }
        self.layout.validate()?;
        self.encoder.validate()?;
        self.decoder.net().validate()?;
        let n_feat = self.preprocessing.n_features()?;
        let d = self.preprocessing.state_dim;
        let dec_ok = match &self.decoder {
            DecoderParams::Mlp { net } => {
                net.in_dim == self.layout.latent_dim + self.preprocessing.n_init * d && net.out_dim == n_feat
            }
            DecoderParams::VectorField { net, dt } => {
                net.in_dim == self.layout.latent_dim + d && net.out_dim == d && *dt > 0.0
            }
        };
        if self.encoder.in_dim != n_feat || self.encoder.out_dim != self.layout.latent_dim || !dec_ok {
            return Err(Error::Format("model shapes are inconsistent with its preprocessing".into()));
        }
        if self.preprocessing.mean.len() != d || self.preprocessing.std.len() != d {
            return Err(Error::Format("normalization statistics have the wrong length".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        json::to_string(self)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    pub(crate) fn prepare(&self, basis: &DctBasis, pair: &MultiviewPair) -> Result<PreparedPair> {
        pair.views
            .iter()
            .map(|v| {
                Ok(PreparedView {
                    feats: self.preprocessing.features(basis, v)?,
                    init: self.preprocessing.init_states(v)?,
                })
            })
            .collect()
    }

    pub(crate) fn bind(&self, g: &mut Graph, basis: &DctBasis) -> Result<Bound> {
        let enc = self.encoder.bind(g)?;
        let dec = match &self.decoder {
            DecoderParams::Mlp { net } => BoundDecoder::Mlp(net.bind(g)?),
            DecoderParams::VectorField { net, dt } => {
                let d = self.preprocessing.state_dim;
                let (t_len, k) = (self.preprocessing.t_len, basis.kept());
                // maps time-major states (t·d + c) to coefficients (j·d + c)
                let mut m = vec![0.0; t_len * d * k * d];
                let forward = basis.forward(&DMatrix::identity(t_len, t_len))?;
                for t in 0..t_len {
                    for j in 0..k {
                        for c in 0..d {
                            m[(t * d + c) * (k * d) + j * d + c] = forward[(j, t)];
                        }
                    }
                }
                BoundDecoder::Field {
                    net: net.bind(g)?,
                    dt: *dt,
                    dct: g.constant(t_len * d, k * d, m)?,
                }
            }
        };
        Ok(Bound { enc, dec })
    }

    pub(crate) fn decode_graph(&self, g: &mut Graph, bound: &Bound, latent: Var, init: Var) -> Result<Var> {
        match &bound.dec {
            BoundDecoder::Mlp(net) => {
                let input = g.concat_cols(&[latent, init])?;
                net.forward(g, input)
            }
            BoundDecoder::Field { net, dt, dct } => {
                let d = self.preprocessing.state_dim;
                let h = *dt;
                let field = |g: &mut Graph, z: Var| -> Result<Var> {
                    let input = g.concat_cols(&[latent, z])?;
                    net.forward(g, input)
                };
                let mut z = g.slice_cols(init, 0, d)?;
                let mut states = vec![z];
                for _ in 1..self.preprocessing.t_len {
                    let k1 = field(g, z)?;
                    let s = g.scale(k1, 0.5 * h);
                    let z2 = g.add(z, s)?;
                    let k2 = field(g, z2)?;
                    let s = g.scale(k2, 0.5 * h);
                    let z3 = g.add(z, s)?;
                    let k3 = field(g, z3)?;
                    let s = g.scale(k3, h);
                    let z4 = g.add(z, s)?;
                    let k4 = field(g, z4)?;
                    let k23 = g.add(k2, k3)?;
                    let k23 = g.scale(k23, 2.0);
                    let k14 = g.add(k1, k4)?;
                    let incr = g.add(k14, k23)?;
                    let incr = g.scale(incr, h / 6.0);
                    z = g.add(z, incr)?;
                    states.push(z);
                }
                let traj = g.concat_cols(&states)?;
                g.matmul(traj, *dct)
            }
        }
    }

    /// Selection matrix picking block `b` out of a latent row.
    pub(crate) fn block_selector(&self, g: &mut Graph, b: usize) -> Result<Var> {
        let block = &self.layout.blocks[b];
        let mut m = vec![0.0; self.layout.latent_dim * block.len()];
        for (j, &i) in block.iter().enumerate() {
            m[i * block.len() + j] = 1.0;
        }
        g.constant(self.layout.latent_dim, block.len(), m)
    }
}

/// Stack one row per view into a `B × width` constant.
pub(crate) fn stack(g: &mut Graph, rows: &[&[f64]]) -> Result<Var> {
    let width = rows.first().map_or(0, |r| r.len());
    let mut data = Vec::with_capacity(rows.len() * width);
    for r in rows {
        data.extend_from_slice(r);
    }
    g.constant(rows.len(), width, data)
}

/// Record the batch loss on `g`. Every pair in the batch must have the same view count.
pub(crate) fn loss_graph(
    model: &IdentifierModel,
    bound: &Bound,
    g: &mut Graph,
    batch: &[&PreparedPair],
    reg_align: f64,
) -> Result<(Var, Var, Var)> {
    let n_views = batch.first().map_or(0, |p| p.len());
    if batch.is_empty() || batch.iter().any(|p| p.len() != n_views) {
        return Err(Error::invalid("a batch needs pairs with a common view count"));
    }
    if n_views == 3 && model.layout.secondary_block.is_none() {
        return Err(Error::invalid("three-view data needs layout.secondary_block"));
    }
    let inv_b = 1.0 / batch.len() as f64;
    let mut latents = Vec::new();
    let mut suff_terms = Vec::new();
    for v in 0..n_views {
        let feats: Vec<&[f64]> = batch.iter().map(|p| p[v].feats.as_slice()).collect();
        let inits: Vec<&[f64]> = batch.iter().map(|p| p[v].init.as_slice()).collect();
        let x = stack(g, &feats)?;
        let init = stack(g, &inits)?;
        let z = bound.enc.forward(g, x)?;
        let recon = model.decode_graph(g, bound, z, init)?;
        let diff = g.sub(recon, x)?;
        let sq = g.square(diff);
        suff_terms.push(g.sum(sq));
        latents.push(z);
    }
    let mut align_terms = Vec::new();
    let mut pairs = vec![(1, model.layout.shared_block)];
    if n_views == 3 {
        pairs.push((2, model.layout.secondary_block.unwrap_or(0)));
    }
    for (other, block) in pairs {
        let sel = model.block_selector(g, block)?;
        let a = g.matmul(latents[0], sel)?;
        let b = g.matmul(latents[other], sel)?;
        let diff = g.sub(a, b)?;
        let sq = g.square(diff);
        align_terms.push(g.sum(sq));
    }
    let mut suff = suff_terms[0];
    for t in &suff_terms[1..] {
        suff = g.add(suff, *t)?;
    }
    let suff = g.scale(suff, inv_b);
    let mut align = align_terms[0];
    for t in &align_terms[1..] {
        align = g.add(align, *t)?;
    }
    let align = g.scale(align, inv_b);
    let weighted = g.scale(align, reg_align);
    let total = g.add(weighted, suff)?;
    Ok((total, align, suff))
}

/// Loss of one pair (or triple): alignment of the shared block(s) plus reconstruction
/// error of every view, both in preprocessed units.
pub fn multiview_loss(model: &IdentifierModel, pair: &MultiviewPair, reg_align: f64) -> Result<LossParts> {
    let basis = model.preprocessing.basis()?;
    let prepared = model.prepare(&basis, pair)?;
    let mut g = Graph::new();
    let bound = model.bind(&mut g, &basis)?;
    let (total, align, suff) = loss_graph(model, &bound, &mut g, &[&prepared], reg_align)?;
    Ok(LossParts {
        total: g.scalar(total)?,
        alignment: g.scalar(align)?,
        sufficiency: g.scalar(suff)?,
    })
}

pub fn encode(model: &IdentifierModel, traj: &Trajectory) -> Result<Vec<f64>> {
    Ok(encode_batch(model, std::slice::from_ref(traj))?.remove(0))
}

/// Latents for many trajectories, one row each.
pub fn encode_batch(model: &IdentifierModel, trajs: &[Trajectory]) -> Result<Vec<Vec<f64>>> {
    let basis = model.preprocessing.basis()?;
    let n_feat = basis.kept() * model.preprocessing.state_dim;
    let mut data = Vec::with_capacity(trajs.len() * n_feat);
    for t in trajs {
        data.extend(model.preprocessing.features(&basis, t)?);
    }
    if trajs.is_empty() {
        return Ok(Vec::new());
    }
    let out = mlp_forward(&model.encoder, &Tensor::matrix(trajs.len(), n_feat, data)?)?;
    Ok(out.data.chunks(model.layout.latent_dim).map(<[f64]>::to_vec).collect())
}

/// Decode a latent and the first `n_init` raw states (row-major) into a trajectory on
/// the training grid, in original units.
pub fn decode_forecast(model: &IdentifierModel, latent: &[f64], initial_states: &[f64]) -> Result<Trajectory> {
    let p = &model.preprocessing;
    let d = p.state_dim;
    if latent.len() != model.layout.latent_dim || initial_states.len() != p.n_init * d {
        return Err(Error::invalid(format!(
            "decode_forecast needs a latent of length {} and {} initial values",
            model.layout.latent_dim,
            p.n_init * d
        )));
    }
    let basis = p.basis()?;
    let mut g = Graph::new();
    let bound = model.bind(&mut g, &basis)?;
    let z = g.constant(1, latent.len(), latent.to_vec())?;
    let init = g.constant(1, initial_states.len(), p.standardize(initial_states))?;
    let coeffs = model.decode_graph(&mut g, &bound, z, init)?;
    let series = basis.inverse(&DMatrix::from_row_slice(basis.kept(), d, g.value(coeffs)))?;
    let mut states = Vec::with_capacity(p.t_len * d);
    for t in 0..p.t_len {
        for c in 0..d {
            states.push(series[(t, c)] * p.std[c] + p.mean[c]);
        }
    }
    if states.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericDomain {
            system: model.system_id.clone(),
            detail: "decoder produced non-finite states".into(),
        });
    }
    Trajectory::new(model.system_id.clone(), None, TimeGrid::uniform(p.t0, p.t_max, p.t_len)?, states, d, None)
}

/// Mean squared error of the decoded forecast over grid indices `chunk_start..T`.
pub fn forecast_mse(model: &IdentifierModel, traj: &Trajectory, chunk_start: usize) -> Result<f64> {
    let p = &model.preprocessing;
    if chunk_start >= p.t_len {
        return Err(Error::invalid("forecast chunk must start inside the grid"));
    }
    let latent = encode(model, traj)?;
    let pred = decode_forecast(model, &latent, &traj.states()[..p.n_init * p.state_dim])?;
    let d = p.state_dim;
    let a = &pred.states()[chunk_start * d..];
    let b = &traj.states()[chunk_start * d..];
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64)
}

/// For each block, the median over pairs of `‖g(x)_B − g(x̃)_B‖` between views 0 and 1.
pub fn block_distance_medians(model: &IdentifierModel, pairs: &[MultiviewPair]) -> Result<Vec<f64>> {
    let first: Vec<Trajectory> = pairs.iter().map(|p| p.views[0].clone()).collect();
    let second: Vec<Trajectory> = pairs.iter().map(|p| p.views[1].clone()).collect();
    let za = encode_batch(model, &first)?;
    let zb = encode_batch(model, &second)?;
    Ok((0..model.layout.blocks.len())
        .map(|b| {
            let mut dists: Vec<f64> = za
                .iter()
                .zip(&zb)
                .map(|(a, c)| {
                    let (a, c) = (model.layout.block_values(a, b), model.layout.block_values(c, b));
                    a.iter().zip(&c).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
                })
                .collect();
            median_of(&mut dists)
        })
        .collect())
}

pub(crate) fn median_of(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}
