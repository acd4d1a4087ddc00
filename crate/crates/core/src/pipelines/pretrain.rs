use serde::{Deserialize, Serialize};

use super::{check_loss, shuffled_batches, stack, EpochLog, RepModel, TrainLog, EMBED_BATCH};
use crate::error::{Error, Result};
use crate::nn::{Decoder, Encoder, EncoderConfig, Graph, LinearHead, OptimConfig, Optimizer, Tensor};
use crate::rng::{self, indexed_seed, sub_seed};
use crate::signal::Segment;
use crate::transforms::{augment, AugmentSpec, PretextMode, PretextTarget, ReverseLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PretrainTask {
    #[serde(rename = "ts")]
    Ts,
    #[serde(rename = "temporal")]
    TemporalOnly,
    #[serde(rename = "spatial")]
    SpatialOnly,
    #[serde(rename = "simclr")]
    SimClr,
    #[serde(rename = "ae")]
    Ae,
}

impl PretrainTask {
    pub const ALL: [PretrainTask; 5] = [
        PretrainTask::Ts,
        PretrainTask::TemporalOnly,
        PretrainTask::SpatialOnly,
        PretrainTask::SimClr,
        PretrainTask::Ae,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PretrainTask::Ts => "ts",
            PretrainTask::TemporalOnly => "temporal",
            PretrainTask::SpatialOnly => "spatial",
            PretrainTask::SimClr => "simclr",
            PretrainTask::Ae => "ae",
        }
    }

    pub fn pretext_mode(self) -> Option<PretextMode> {
        match self {
            PretrainTask::Ts => Some(PretextMode::Ts),
            PretrainTask::TemporalOnly => Some(PretextMode::TemporalOnly),
            PretrainTask::SpatialOnly => Some(PretextMode::SpatialOnly),
            PretrainTask::SimClr | PretrainTask::Ae => None,
        }
    }
}

/// Output layer of the reverse-detection pretext classifier.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PretextHead {
    /// Two independent sigmoid bits `[spatial, temporal]`.
    #[default]
    TwoBit,
    /// One softmax over the four reverse classes.
    FourWay,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub task: PretrainTask,
    pub encoder: EncoderConfig,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    #[serde(default)]
    pub head: PretextHead,
    /// SimCLR view augmentations; their seeds are replaced per view.
    pub permutation: AugmentSpec,
    pub noise: AugmentSpec,
    /// SimCLR temperature.
    pub tau: f64,
    /// Share of segments whose pretext examples are held out for the
    /// logged accuracy.
    pub val_fraction: f64,
    /// Stop a reverse-detection run after the first epoch whose held-out
    /// pretext accuracy reaches this value.
    #[serde(default)]
    pub stop_at_accuracy: Option<f64>,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            task: PretrainTask::Ts,
            encoder: EncoderConfig::default(),
            epochs: 30,
            batch: 64,
            lr: 1e-3,
            seed: 0,
            head: PretextHead::TwoBit,
            permutation: AugmentSpec::permutation(0),
            noise: AugmentSpec::noise(0),
            tau: 0.5,
            val_fraction: 0.1,
            stop_at_accuracy: None,
        }
    }
}

impl PretrainConfig {
    pub fn new(task: PretrainTask, encoder: EncoderConfig, seed: u64) -> Self {
        PretrainConfig { task, encoder, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::InvalidParameter("batch size must be positive".into()));
        }
        if !(self.lr > 0.0) || !(self.tau > 0.0) {
            return Err(Error::InvalidParameter("learning rate and temperature must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::InvalidParameter(format!("validation fraction {} not in [0, 1)", self.val_fraction)));
        }
        self.encoder.validate()?;
        Ok(())
    }
}

/// A pretrained encoder and its per-epoch training log.
#[derive(Debug, Clone)]
pub struct Pretrained {
    pub model: RepModel,
    pub log: TrainLog,
}

impl Pretrained {
    pub fn encoder(&self) -> &Encoder<f32> {
        match &self.model {
            RepModel::Encoder { encoder, .. } => encoder,
            _ => unreachable!("pretraining always yields an encoder"),
        }
    }
}

/// Trains an encoder on unlabeled segments with the configured
/// self-supervised task. The pretext head (or decoder) is discarded.
pub fn pretrain(segments: &[Segment], config: &PretrainConfig) -> Result<Pretrained> {
    config.validate()?;
    if segments.is_empty() {
        return Err(Error::InsufficientData("no segments to pretrain on".into()));
    }
    if let Some(s) = segments.iter().find(|s| s.is_degenerate()) {
        return Err(Error::DegenerateSegment(s.key()));
    }
    let mut encoder = Encoder::new(config.encoder, config.seed)?;
    let log = match config.task.pretext_mode() {
        Some(mode) => reverse_pretext(&mut encoder, segments, mode, config)?,
        None if config.task == PretrainTask::SimClr => contrastive(&mut encoder, segments, config)?,
        None => reconstruction(&mut encoder, segments, config)?,
    };
    Ok(Pretrained { model: RepModel::Encoder { encoder, task: Some(config.task) }, log })
}

/// Autoencoder pretraining regardless of `config.task`.
pub fn train_autoencoder(segments: &[Segment], config: &PretrainConfig) -> Result<Pretrained> {
    pretrain(segments, &PretrainConfig { task: PretrainTask::Ae, ..*config })
}

fn targets(mode: PretextMode) -> Vec<PretextTarget> {
    match mode {
        PretextMode::Ts => ReverseLabel::ALL.iter().map(|&l| PretextTarget::Reverse(l)).collect(),
        _ => vec![PretextTarget::Binary(false), PretextTarget::Binary(true)],
    }
}

fn transformed(seg: &Segment, target: PretextTarget, mode: PretextMode) -> Segment {
    let label = match (target, mode) {
        (PretextTarget::Reverse(l), _) => l,
        (PretextTarget::Binary(false), _) => ReverseLabel::ORIGINAL,
        (PretextTarget::Binary(true), PretextMode::TemporalOnly) => ReverseLabel::TEMPORAL,
        (PretextTarget::Binary(true), _) => ReverseLabel::SPATIAL,
    };
    label.apply(seg)
}

fn reverse_pretext(
    encoder: &mut Encoder<f32>,
    segments: &[Segment],
    mode: PretextMode,
    config: &PretrainConfig,
) -> Result<TrainLog> {
    let four_way = mode == PretextMode::Ts && config.head == PretextHead::FourWay;
    let k = match mode {
        PretextMode::Ts if four_way => 4,
        PretextMode::Ts => 2,
        _ => 1,
    };
    let mut head = LinearHead::<f32>::new(encoder.rep_dim(), k, sub_seed(config.seed, "pretext-head"));

    // Hold out whole segments so that no view of a validation segment is trained on.
    let n = segments.len();
    let n_val = if n >= 2 && config.val_fraction > 0.0 {
        ((n as f64 * config.val_fraction).round() as usize).clamp(1, n - 1)
    } else {
        0
    };
    let mut order: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng::named_rng(config.seed, "pretext-split"));
    let (val_idx, train_idx) = order.split_at(n_val);
    let kinds = targets(mode);
    let expand = |idx: &[usize]| -> Vec<(usize, PretextTarget)> {
        idx.iter().flat_map(|&i| kinds.iter().map(move |&t| (i, t))).collect()
    };
    let (train, val) = (expand(train_idx), expand(val_idx));

    let opt = OptimConfig::default().with_lr(config.lr);
    let (mut opt_e, mut opt_h) = (Optimizer::new(opt)?, Optimizer::new(opt)?);
    let mut shuffle_rng = rng::named_rng(config.seed, "pretext-batches");
    let mut log = TrainLog::default();
    for epoch in 1..=config.epochs {
        let mut total = 0.0;
        for (bi, batch) in shuffled_batches(train.len(), config.batch, &mut shuffle_rng).iter().enumerate() {
            let views: Vec<Segment> = batch
                .iter()
                .map(|&j| transformed(&segments[train[j].0], train[j].1, mode))
                .collect();
            let mut g = Graph::new();
            let pe = g.bind(&encoder.params);
            let ph = g.bind(&head.params);
            let x = g.input(stack(&views)?, false);
            let z = encoder.forward(&mut g, &pe, x)?;
            let logits = head.forward(&mut g, &ph, z)?;
            let loss = if four_way {
                let classes: Vec<usize> = batch.iter().map(|&j| train[j].1.class()).collect();
                g.softmax_ce(logits, &classes)?
            } else {
                let bits: Vec<f32> = batch.iter().flat_map(|&j| train[j].1.bits()).collect();
                g.bce_with_logits(logits, &bits)?
            };
            let value = g.value(loss).data()[0] as f64;
            check_loss(value, "pretraining", epoch, bi)?;
            total += value * batch.len() as f64;
            let mut grads = g.backward(loss)?;
            opt_e.step(&mut encoder.params, &grads.collect(&pe))?;
            opt_h.step(&mut head.params, &grads.collect(&ph))?;
        }
        let accuracy = if val.is_empty() {
            None
        } else {
            Some(pretext_accuracy(encoder, &head, segments, &val, mode, four_way)?)
        };
        log.epochs.push(EpochLog { epoch, loss: total / train.len().max(1) as f64, pretext_accuracy: accuracy });
        if let (Some(acc), Some(stop)) = (accuracy, config.stop_at_accuracy) {
            if acc >= stop {
                break;
            }
        }
    }
    Ok(log)
}

/// Share of examples whose every output is right: argmax for the softmax
/// head, the sign of each logit for sigmoid bits.
fn pretext_accuracy(
    encoder: &Encoder<f32>,
    head: &LinearHead<f32>,
    segments: &[Segment],
    examples: &[(usize, PretextTarget)],
    mode: PretextMode,
    four_way: bool,
) -> Result<f64> {
    let mut correct = 0usize;
    for chunk in examples.chunks(EMBED_BATCH) {
        let views: Vec<Segment> = chunk.iter().map(|&(i, t)| transformed(&segments[i], t, mode)).collect();
        let mut g = Graph::new();
        let pe = g.bind_frozen(&encoder.params);
        let ph = g.bind_frozen(&head.params);
        let x = g.input(stack(&views)?, false);
        let z = encoder.forward(&mut g, &pe, x)?;
        let logits = head.forward(&mut g, &ph, z)?;
        let out = g.value(logits);
        for (r, &(_, t)) in chunk.iter().enumerate() {
            let row = out.row(r);
            let ok = if four_way {
                let argmax = (0..row.len()).fold(0, |best, c| if row[c] > row[best] { c } else { best });
                argmax == t.class()
            } else {
                row.iter().zip(t.bits()).all(|(&l, b)| (l > 0.0) == (b > 0.5))
            };
            correct += ok as usize;
        }
    }
    Ok(correct as f64 / examples.len() as f64)
}

fn contrastive(encoder: &mut Encoder<f32>, segments: &[Segment], config: &PretrainConfig) -> Result<TrainLog> {
    let mut opt = Optimizer::new(OptimConfig::default().with_lr(config.lr))?;
    let mut shuffle_rng = rng::named_rng(config.seed, "simclr-batches");
    let aug_seed = sub_seed(config.seed, "augment");
    let n = segments.len();
    let mut log = TrainLog::default();
    for epoch in 1..=config.epochs {
        let mut total = 0.0;
        for (bi, batch) in shuffled_batches(n, config.batch, &mut shuffle_rng).iter().enumerate() {
            // Rows 0..N are permuted views, rows N..2N the noisy views of the same segments.
            let mut views = Vec::with_capacity(2 * batch.len());
            for (spec, salt) in [(&config.permutation, 0u64), (&config.noise, 1)] {
                for &i in batch {
                    let s = indexed_seed(aug_seed, ((epoch * n + i) as u64) << 1 | salt);
                    views.push(augment(&segments[i], &spec.with_seed(s))?);
                }
            }
            let mut g = Graph::new();
            let pe = g.bind(&encoder.params);
            let x = g.input(stack(&views)?, false);
            let z = encoder.forward(&mut g, &pe, x)?;
            let loss = g.ntxent(z, config.tau)?;
            let value = g.value(loss).data()[0] as f64;
            check_loss(value, "contrastive pretraining", epoch, bi)?;
            total += value * batch.len() as f64;
            let mut grads = g.backward(loss)?;
            opt.step(&mut encoder.params, &grads.collect(&pe))?;
        }
        log.epochs.push(EpochLog { epoch, loss: total / n as f64, pretext_accuracy: None });
    }
    Ok(log)
}

fn reconstruction(encoder: &mut Encoder<f32>, segments: &[Segment], config: &PretrainConfig) -> Result<TrainLog> {
    let len = segments[0].len();
    let mut decoder = Decoder::<f32>::new(config.encoder, len, config.seed)?;
    let opt = OptimConfig::default().with_lr(config.lr);
    let (mut opt_e, mut opt_d) = (Optimizer::new(opt)?, Optimizer::new(opt)?);
    let mut shuffle_rng = rng::named_rng(config.seed, "ae-batches");
    let n = segments.len();
    let mut log = TrainLog::default();
    for epoch in 1..=config.epochs {
        let mut total = 0.0;
        for (bi, batch) in shuffled_batches(n, config.batch, &mut shuffle_rng).iter().enumerate() {
            let x: Tensor<f32> = stack(batch.iter().map(|&i| &segments[i]))?;
            let target = x.data().to_vec();
            let mut g = Graph::new();
            let pe = g.bind(&encoder.params);
            let pd = g.bind(&decoder.params);
            let xv = g.input(x, false);
            let z = encoder.forward(&mut g, &pe, xv)?;
            let rec = decoder.forward(&mut g, &pd, z)?;
            let loss = g.mse(rec, &target)?;
            let value = g.value(loss).data()[0] as f64;
            check_loss(value, "autoencoder pretraining", epoch, bi)?;
            total += value * batch.len() as f64;
            let mut grads = g.backward(loss)?;
            opt_e.step(&mut encoder.params, &grads.collect(&pe))?;
            opt_d.step(&mut decoder.params, &grads.collect(&pd))?;
        }
        log.epochs.push(EpochLog { epoch, loss: total / n as f64, pretext_accuracy: None });
    }
    Ok(log)
}
