//! Sliding-window datasets, the joint training loop and checkpoint files.

mod checkpoint;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION,
};

use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::autograd::{Adam, Graph, Optimizer, Sgd, Tensor};
use crate::error::{Error, Result};
use crate::model::{condition_code, Model, ModelParams, ParamGroup};
use crate::normalize::{apply, NormStats};
use crate::raster_io::RasterSeries;
use crate::rng::SplitMix64;
use crate::tiling::TilePlan;

/// One training example: `j` consecutive normalized frames and the frame after.
#[derive(Debug, Clone)]
pub struct TileSample {
    pub inputs: Vec<Arc<[f64]>>,
    pub target: Arc<[f64]>,
    pub cond: Vec<f64>,
    pub tile_id: usize,
    pub band: usize,
    pub target_t: usize,
}

/// Number of samples [`make_dataset`] emits.
pub fn dataset_len(tiles: usize, bands: usize, range_len: usize, j: usize) -> usize {
    tiles * bands * range_len.saturating_sub(j)
}

/// Emits, for every tile, band and start `t` with `t..=t+j` inside
/// `t_range`, the normalized frames `t..t+j` and the target frame `t+j`.
/// Frames are shared between overlapping samples.
pub fn make_dataset(
    series: &RasterSeries,
    plan: &TilePlan,
    stats: &NormStats,
    j: usize,
    t_range: Range<usize>,
) -> Result<Vec<TileSample>> {
    if t_range.end > series.t_len() || t_range.is_empty() {
        return Err(Error::RangeTooShort(format!(
            "time range {t_range:?} is empty or exceeds {} steps",
            series.t_len()
        )));
    }
    if j == 0 || j >= t_range.len() {
        return Err(Error::RangeTooShort(format!(
            "need more than j={j} steps, range {t_range:?} has {}",
            t_range.len()
        )));
    }
    let bands = series.bands();
    let per_tile: Vec<Vec<TileSample>> = (0..plan.len() * bands)
        .into_par_iter()
        .map(|k| {
            let (tile, band) = (k / bands, k % bands);
            let cond = condition_code(tile, band, plan.len())?;
            let frames = t_range
                .clone()
                .map(|t| Ok(Arc::from(apply(series, plan, stats, tile, band, t)?.values)))
                .collect::<Result<Vec<Arc<[f64]>>>>()?;
            Ok((0..frames.len() - j)
                .map(|s| TileSample {
                    inputs: frames[s..s + j].to_vec(),
                    target: frames[s + j].clone(),
                    cond: cond.clone(),
                    tile_id: tile,
                    band,
                    target_t: t_range.start + s + j,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_tile.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            other => Err(Error::InvalidParameter(format!("unknown optimizer {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 10, batch: 16, lr: 1e-3, seed: 0, optimizer: OptimizerKind::Adam, shuffle: true }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch == 0 {
            return Err(Error::InvalidParameter("epochs and batch must be at least 1".into()));
        }
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(Error::InvalidParameter(format!("learning rate {} must be finite and >= 0", self.lr)));
        }
        Ok(())
    }

    fn optimizer(&self) -> Optimizer {
        match self.optimizer {
            OptimizerKind::Adam => Optimizer::Adam(Adam::new(self.lr)),
            OptimizerKind::Sgd => Optimizer::Sgd(Sgd { lr: self.lr }),
        }
    }
}

/// Loss and parameter gradients of one sample, in parameter storage order.
pub fn sample_gradient(model: &Model, sample: &TileSample) -> Result<(f64, Vec<Vec<f64>>)> {
    let mut g = Graph::new();
    let p = model.bind(&mut g, true);
    let frames: Vec<_> = sample.inputs.iter().map(|f| g.leaf(Tensor::vector(f.to_vec()), false)).collect();
    let cond = g.leaf(Tensor::vector(sample.cond.clone()), false);
    let target = g.leaf(Tensor::vector(sample.target.to_vec()), false);
    let pred = model.predict_on(&mut g, &p, &frames, cond)?;
    let loss = g.mse(pred, target)?;
    let value = g.value(loss).data()[0];
    g.backward(loss)?;
    let grads = p
        .vars
        .iter()
        .map(|&v| g.grad(v).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; g.value(v).len()]))
        .collect();
    Ok((value, grads))
}

pub fn sample_loss(model: &Model, sample: &TileSample) -> Result<f64> {
    let inputs: Vec<&[f64]> = sample.inputs.iter().map(|f| &f[..]).collect();
    let pred = model.predict(&inputs, &sample.cond)?;
    Ok(pred.iter().zip(sample.target.iter()).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len() as f64)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    /// Mean per-sample loss of each epoch, measured as the epoch ran.
    pub history: Vec<f64>,
}

/// Trains encoder, LSTM and generator jointly. See [`train_with`].
pub fn train(model: Model, dataset: &[TileSample], config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(model, dataset, config, |_, _| {})
}

/// Runs `config.epochs` passes over `dataset`, one optimizer step per batch
/// on the mean of per-sample gradients. Per-sample gradients are evaluated in
/// parallel and summed in sample order, so results depend only on inputs.
/// `on_epoch(epoch, mean_loss)` fires after each epoch.
pub fn train_with(
    mut model: Model,
    dataset: &[TileSample],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = SplitMix64::new(config.seed);
    let mut optimizer = config.optimizer();
    let mut params = model.params.tensors();
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        if config.shuffle {
            rng.shuffle(&mut order);
        }
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch) {
            let results = batch
                .par_iter()
                .map(|&i| sample_gradient(&model, &dataset[i]))
                .collect::<Result<Vec<_>>>()?;
            let mut sum: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.len()]).collect();
            for (&i, (loss, grads)) in batch.iter().zip(&results) {
                if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
                    return Err(Error::NonFiniteLoss { epoch, sample: i });
                }
                epoch_loss += loss;
                for (acc, g) in sum.iter_mut().zip(grads) {
                    for (a, v) in acc.iter_mut().zip(g) {
                        *a += v;
                    }
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for acc in &mut sum {
                acc.iter_mut().for_each(|a| *a *= scale);
            }
            optimizer.step(&mut params, &sum);
            for (named, p) in model.params.arrays.iter_mut().zip(&params) {
                named.tensor.data_mut().copy_from_slice(p.data());
            }
        }
        let mean = epoch_loss / dataset.len() as f64;
        history.push(mean);
        on_epoch(epoch, mean);
    }
    Ok(TrainOutcome { model, history })
}

/// Which parameter groups differ between two parameter sets.
pub fn changed_groups(model: &Model, before: &ModelParams) -> Vec<ParamGroup> {
    let mut out = Vec::new();
    for ((_, group, _), (a, b)) in model.config.param_layout().iter().zip(model.params.arrays.iter().zip(&before.arrays)) {
        if a.tensor != b.tensor && !out.contains(group) {
            out.push(*group);
        }
    }
    out
}
