use serde::{Deserialize, Serialize};

use super::{check_loss, shuffled_batches, stack, DownstreamModel, RepModel};
use crate::error::{Error, Result};
use crate::nn::{Encoder, EncoderConfig, Graph, LinearHead, OptimConfig, Optimizer, Tensor};
use crate::rng::{self, sub_seed};
use crate::signal::LabeledSegment;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinetuneMode {
    /// Frozen representation, head only.
    #[serde(rename = "linear")]
    LinearProbe,
    /// Encoder and head trained jointly.
    #[default]
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    pub mode: FinetuneMode,
    pub epochs: usize,
    pub batch: usize,
    /// Head learning rate.
    pub lr: f64,
    /// Encoder learning rate as a multiple of `lr` in full mode.
    pub encoder_lr_scale: f64,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig { mode: FinetuneMode::Full, epochs: 50, batch: 64, lr: 1e-3, encoder_lr_scale: 0.1, seed: 0 }
    }
}

impl FinetuneConfig {
    pub fn new(mode: FinetuneMode, seed: u64) -> Self {
        FinetuneConfig { mode, seed, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.batch == 0 || !(self.lr > 0.0) || !(self.encoder_lr_scale > 0.0) {
            return Err(Error::InvalidParameter(format!("invalid fine-tuning config {self:?}")));
        }
        Ok(())
    }
}

fn targets(data: &[LabeledSegment]) -> Result<Vec<f32>> {
    let t = data
        .iter()
        .map(|d| {
            d.label
                .target()
                .map(f32::from)
                .ok_or_else(|| Error::InvalidParameter(format!("segment {} has no class label", d.segment.key())))
        })
        .collect::<Result<Vec<_>>>()?;
    let pos = t.iter().filter(|&&v| v > 0.5).count();
    if pos == 0 || pos == t.len() {
        return Err(Error::SingleClass);
    }
    Ok(t)
}

/// Trains an AF classifier head on top of `model`; in full mode the
/// encoder is updated as well.
pub fn finetune(model: &RepModel, data: &[LabeledSegment], config: &FinetuneConfig) -> Result<DownstreamModel> {
    config.validate()?;
    let y = targets(data)?;
    let head = LinearHead::new(model.dim(), 1, sub_seed(config.seed, "classifier-head"));
    match (config.mode, model) {
        (FinetuneMode::LinearProbe, _) => linear_probe(model.clone(), head, data, &y, config),
        (FinetuneMode::Full, RepModel::Encoder { encoder, task }) => {
            let mut encoder = encoder.clone();
            let head = full(&mut encoder, head, data, &y, config, config.encoder_lr_scale)?;
            Ok(DownstreamModel { rep: RepModel::Encoder { encoder, task: *task }, head })
        }
        (FinetuneMode::Full, _) => Err(Error::InvalidParameter(format!(
            "full fine-tuning needs a trainable encoder; {} models support only linear probing",
            model.name()
        ))),
    }
}

/// Supervised training of a freshly initialized encoder and head.
pub fn train_from_scratch(
    data: &[LabeledSegment],
    encoder: EncoderConfig,
    config: &FinetuneConfig,
) -> Result<DownstreamModel> {
    config.validate()?;
    let y = targets(data)?;
    let mut enc = Encoder::new(encoder, config.seed)?;
    let head = LinearHead::new(encoder.rep_dim, 1, sub_seed(config.seed, "classifier-head"));
    let head = full(&mut enc, head, data, &y, config, 1.0)?;
    Ok(DownstreamModel { rep: RepModel::Encoder { encoder: enc, task: None }, head })
}

fn linear_probe(
    rep: RepModel,
    mut head: LinearHead<f32>,
    data: &[LabeledSegment],
    y: &[f32],
    config: &FinetuneConfig,
) -> Result<DownstreamModel> {
    let segments: Vec<_> = data.iter().map(|d| d.segment.clone()).collect();
    let z = rep.embed(&segments)?;
    let d = z.dim(1);
    let mut opt = Optimizer::new(OptimConfig::default().with_lr(config.lr))?;
    let mut shuffle_rng = rng::named_rng(config.seed, "finetune-batches");
    for epoch in 1..=config.epochs {
        for (bi, batch) in shuffled_batches(data.len(), config.batch, &mut shuffle_rng).iter().enumerate() {
            let rows: Vec<f32> = batch.iter().flat_map(|&i| z.row(i).iter().copied()).collect();
            let t: Vec<f32> = batch.iter().map(|&i| y[i]).collect();
            let mut g = Graph::new();
            let ph = g.bind(&head.params);
            let x = g.input(Tensor::new([batch.len(), d], rows)?, false);
            let logits = head.forward(&mut g, &ph, x)?;
            let loss = g.bce_with_logits(logits, &t)?;
            check_loss(g.value(loss).data()[0] as f64, "fine-tuning", epoch, bi)?;
            let mut grads = g.backward(loss)?;
            opt.step(&mut head.params, &grads.collect(&ph))?;
        }
    }
    Ok(DownstreamModel { rep, head })
}

fn full(
    encoder: &mut Encoder<f32>,
    mut head: LinearHead<f32>,
    data: &[LabeledSegment],
    y: &[f32],
    config: &FinetuneConfig,
    encoder_lr_scale: f64,
) -> Result<LinearHead<f32>> {
    let mut opt_h = Optimizer::new(OptimConfig::default().with_lr(config.lr))?;
    let mut opt_e = Optimizer::new(OptimConfig::default().with_lr(config.lr * encoder_lr_scale))?;
    let mut shuffle_rng = rng::named_rng(config.seed, "finetune-batches");
    for epoch in 1..=config.epochs {
        for (bi, batch) in shuffled_batches(data.len(), config.batch, &mut shuffle_rng).iter().enumerate() {
            let t: Vec<f32> = batch.iter().map(|&i| y[i]).collect();
            let mut g = Graph::new();
            let pe = g.bind(&encoder.params);
            let ph = g.bind(&head.params);
            let x = g.input(stack(batch.iter().map(|&i| &data[i].segment))?, false);
            let z = encoder.forward(&mut g, &pe, x)?;
            let logits = head.forward(&mut g, &ph, z)?;
            let loss = g.bce_with_logits(logits, &t)?;
            check_loss(g.value(loss).data()[0] as f64, "fine-tuning", epoch, bi)?;
            let mut grads = g.backward(loss)?;
            opt_e.step(&mut encoder.params, &grads.collect(&pe))?;
            opt_h.step(&mut head.params, &grads.collect(&ph))?;
        }
    }
    Ok(head)
}
