//! The residual 1-D convolutional encoder, linear heads and the
//! autoencoder's transposed-convolution decoder.

use serde::{Deserialize, Serialize};

use super::conv::conv_len;
use super::graph::{Binding, Graph, Var};
use super::params::{he_normal, uniform, ParamId, ParamStore};
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};
use crate::rng;

pub const STANDARD_REP_DIMS: [usize; 3] = [64, 128, 256];

fn default_stem_stride() -> usize {
    2
}
fn default_groups() -> usize {
    1
}
fn default_gain_init() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub stages: usize,
    /// Stem channels; stage `s` has `base_width * 2^(s+1)` channels.
    pub base_width: usize,
    pub blocks_per_stage: usize,
    pub kernel: usize,
    pub rep_dim: usize,
    #[serde(default = "default_stem_stride")]
    pub stem_stride: usize,
    /// Cardinality of the residual-branch convolutions.
    #[serde(default = "default_groups")]
    pub groups: usize,
    /// Initial value of the per-stage residual-branch gain.
    #[serde(default = "default_gain_init")]
    pub gain_init: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            stages: 4,
            base_width: 16,
            blocks_per_stage: 2,
            kernel: 7,
            rep_dim: 128,
            stem_stride: default_stem_stride(),
            groups: default_groups(),
            gain_init: default_gain_init(),
        }
    }
}

impl EncoderConfig {
    /// Three narrow stages with an aggressive stem stride; sized for
    /// single-core CPU experiments on synthetic data.
    pub fn desk() -> Self {
        EncoderConfig {
            stages: 3,
            base_width: 4,
            blocks_per_stage: 1,
            kernel: 7,
            rep_dim: 128,
            stem_stride: 4,
            groups: 1,
            gain_init: 0.5,
        }
    }

    pub fn with_rep_dim(self, rep_dim: usize) -> Self {
        EncoderConfig { rep_dim, ..self }
    }

    pub fn stage_channels(&self, stage: usize) -> usize {
        self.base_width << (stage + 1)
    }

    pub fn out_channels(&self) -> usize {
        self.stage_channels(self.stages - 1)
    }

    /// Time lengths: input, after the stem, after each stage.
    pub fn lengths(&self, input_len: usize) -> Vec<usize> {
        let pad = self.kernel / 2;
        let mut out = vec![input_len, conv_len(input_len, self.kernel, self.stem_stride, pad)];
        for _ in 0..self.stages {
            let last = *out.last().unwrap();
            out.push(conv_len(last, self.kernel, 2, pad));
        }
        out
    }

    /// Weighted layers: stem, two per block, shortcut projections, final projection.
    pub fn weighted_layers(&self) -> usize {
        1 + 2 * self.stages * self.blocks_per_stage + self.stages + 1
    }

    /// Validates; returns warnings for non-fatal oddities.
    pub fn validate(&self) -> Result<Vec<String>> {
        let positive = [self.stages, self.base_width, self.blocks_per_stage, self.kernel, self.rep_dim, self.stem_stride, self.groups];
        if positive.contains(&0) {
            return Err(Error::InvalidParameter(format!("encoder config fields must be positive: {self:?}")));
        }
        if self.kernel.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("kernel must be odd, got {}", self.kernel)));
        }
        if !self.stage_channels(0).is_multiple_of(self.groups) {
            return Err(Error::InvalidParameter(format!(
                "groups {} must divide stage width {}",
                self.groups,
                self.stage_channels(0)
            )));
        }
        let mut warnings = Vec::new();
        if !STANDARD_REP_DIMS.contains(&self.rep_dim) {
            warnings.push(format!("representation dimension {} outside {:?}", self.rep_dim, STANDARD_REP_DIMS));
        }
        Ok(warnings)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ConvIds {
    w: ParamId,
    b: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
struct BlockIds {
    conv1: ConvIds,
    conv2: ConvIds,
    shortcut: Option<ConvIds>,
}

#[derive(Debug, Clone, PartialEq)]
struct StageIds {
    gain: ParamId,
    blocks: Vec<BlockIds>,
}

/// Stem conv, residual stages (conv-ReLU-conv, scaled by a per-stage gain,
/// plus shortcut; the first block of each stage halves time and doubles
/// channels), global average pooling, linear projection to `rep_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder<T> {
    config: EncoderConfig,
    pub params: ParamStore<T>,
    stem: ConvIds,
    stages: Vec<StageIds>,
    proj: ConvIds,
}

fn add_conv<T: Real>(
    p: &mut ParamStore<T>,
    name: &str,
    c_out: usize,
    c_in_g: usize,
    kernel: usize,
    rng: &mut rng::Rng,
) -> ConvIds {
    let w = p.add(format!("{name}.w"), he_normal(&[c_out, c_in_g, kernel], c_in_g * kernel, rng));
    let b = p.add(format!("{name}.b"), Tensor::zeros([c_out]));
    ConvIds { w, b }
}

impl<T: Real> Encoder<T> {
    pub fn new(config: EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::named_rng(seed, "encoder-init");
        let mut p = ParamStore::new();
        let k = config.kernel;
        let stem = add_conv(&mut p, "stem", config.base_width, 1, k, &mut rng);
        let mut stages = Vec::with_capacity(config.stages);
        let mut c_in = config.base_width;
        for s in 0..config.stages {
            let c = config.stage_channels(s);
            let gain = p.add(format!("stage{s}.gain"), Tensor::scalar(T::lit(config.gain_init)));
            let blocks = (0..config.blocks_per_stage)
                .map(|j| {
                    let name = format!("stage{s}.block{j}");
                    let cin = if j == 0 { c_in } else { c };
                    let groups = if cin % config.groups == 0 { config.groups } else { 1 };
                    let conv1 = add_conv(&mut p, &format!("{name}.conv1"), c, cin / groups, k, &mut rng);
                    let conv2 = add_conv(&mut p, &format!("{name}.conv2"), c, c / config.groups, k, &mut rng);
                    let shortcut = (j == 0).then(|| add_conv(&mut p, &format!("{name}.shortcut"), c, cin, 1, &mut rng));
                    BlockIds { conv1, conv2, shortcut }
                })
                .collect();
            stages.push(StageIds { gain, blocks });
            c_in = c;
        }
        let bound = 1.0 / (c_in as f64).sqrt();
        let proj = ConvIds {
            w: p.add("proj.w", uniform(&[config.rep_dim, c_in], bound, &mut rng)),
            b: p.add("proj.b", Tensor::zeros([config.rep_dim])),
        };
        Ok(Encoder { config, params: p, stem, stages, proj })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn rep_dim(&self) -> usize {
        self.config.rep_dim
    }

    pub fn cast<U: Real>(&self) -> Encoder<U> {
        Encoder {
            config: self.config,
            params: self.params.cast(),
            stem: self.stem,
            stages: self.stages.clone(),
            proj: self.proj,
        }
    }

    /// Zeroes every bias (used for exact relevance conservation checks).
    pub fn zero_biases(&mut self) {
        let ids: Vec<ParamId> = (0..self.params.len())
            .map(ParamId)
            .filter(|&id| self.params.name(id).ends_with(".b"))
            .collect();
        for id in ids {
            self.params.get_mut(id).data_mut().iter_mut().for_each(|v| *v = T::zero());
        }
    }

    /// `x [B, L]` -> representation `[B, rep_dim]`.
    pub fn forward(&self, g: &mut Graph<T>, p: &Binding, x: Var) -> Result<Var> {
        let xs = g.value(x).shape().to_vec();
        if xs.len() != 2 {
            return Err(Error::ShapeMismatch(format!("encoder input must be [B, L], got {xs:?}")));
        }
        if !g.value(x).is_finite() {
            return Err(Error::Numeric("encoder input contains non-finite values".into()));
        }
        let pad = self.config.kernel / 2;
        let x3 = g.reshape(x, &[xs[0], 1, xs[1]])?;
        let stem = g.conv1d(x3, p.var(self.stem.w), Some(p.var(self.stem.b)), self.config.stem_stride, pad, 1)?;
        let mut h = g.relu(stem);
        for stage in &self.stages {
            for (j, block) in stage.blocks.iter().enumerate() {
                let stride = if j == 0 { 2 } else { 1 };
                let cin = g.value(h).dim(1);
                let groups1 = if cin.is_multiple_of(self.config.groups) { self.config.groups } else { 1 };
                let a = g.conv1d(h, p.var(block.conv1.w), Some(p.var(block.conv1.b)), stride, pad, groups1)?;
                let a = g.relu(a);
                let a = g.conv1d(a, p.var(block.conv2.w), Some(p.var(block.conv2.b)), 1, pad, self.config.groups)?;
                let a = g.gain(a, p.var(stage.gain))?;
                let short = match &block.shortcut {
                    Some(sc) => g.conv1d(h, p.var(sc.w), Some(p.var(sc.b)), stride, 0, 1)?,
                    None => h,
                };
                let sum = g.add(short, a)?;
                h = g.relu(sum);
            }
        }
        let pooled = g.mean_time(h)?;
        g.linear(pooled, p.var(self.proj.w), Some(p.var(self.proj.b)))
    }

    /// Convenience inference: representations for `batch [B, L]`.
    pub fn embed(&self, batch: Tensor<T>) -> Result<Tensor<T>> {
        let mut g = Graph::new();
        let p = g.bind_frozen(&self.params);
        let x = g.input(batch, false);
        let z = self.forward(&mut g, &p, x)?;
        Ok(g.value(z).clone())
    }
}

/// Fully connected layer `in_dim -> out_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub params: ParamStore<T>,
    w: ParamId,
    b: ParamId,
}

impl<T: Real> LinearHead<T> {
    pub fn new(in_dim: usize, out_dim: usize, seed: u64) -> Self {
        let mut rng = rng::named_rng(seed, "head-init");
        let mut params = ParamStore::new();
        let bound = 1.0 / (in_dim.max(1) as f64).sqrt();
        let w = params.add("head.w", uniform(&[out_dim, in_dim], bound, &mut rng));
        let b = params.add("head.b", Tensor::zeros([out_dim]));
        LinearHead { in_dim, out_dim, params, w, b }
    }

    pub fn forward(&self, g: &mut Graph<T>, p: &Binding, z: Var) -> Result<Var> {
        g.linear(z, p.var(self.w), Some(p.var(self.b)))
    }

    pub fn weight(&self) -> &Tensor<T> {
        self.params.get(self.w)
    }

    pub fn bias(&self) -> &Tensor<T> {
        self.params.get(self.b)
    }

    pub fn zero_bias(&mut self) {
        self.params.get_mut(self.b).data_mut().iter_mut().for_each(|v| *v = T::zero());
    }

    pub fn cast<U: Real>(&self) -> LinearHead<U> {
        LinearHead { in_dim: self.in_dim, out_dim: self.out_dim, params: self.params.cast(), w: self.w, b: self.b }
    }
}

/// Mirror of the encoder for reconstruction: linear expansion to the last
/// stage's feature map, one stride-2 transposed convolution per stage, and a
/// final transposed convolution undoing the stem.
#[derive(Debug, Clone)]
pub struct Decoder<T> {
    config: EncoderConfig,
    input_len: usize,
    pub params: ParamStore<T>,
    fc: ConvIds,
    ups: Vec<ConvIds>,
}

impl<T: Real> Decoder<T> {
    pub fn new(config: EncoderConfig, input_len: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::named_rng(seed, "decoder-init");
        let lens = config.lengths(input_len);
        let (c_last, l_last) = (config.out_channels(), *lens.last().unwrap());
        let mut p = ParamStore::new();
        let bound = 1.0 / (config.rep_dim as f64).sqrt();
        let fc = ConvIds {
            w: p.add("dec.fc.w", uniform(&[c_last * l_last, config.rep_dim], bound, &mut rng)),
            b: p.add("dec.fc.b", Tensor::zeros([c_last * l_last])),
        };
        let k = config.kernel;
        let mut ups = Vec::new();
        for s in (0..config.stages).rev() {
            let c_in = config.stage_channels(s);
            let c_out = if s == 0 { config.base_width } else { config.stage_channels(s - 1) };
            ups.push(ConvIds {
                w: p.add(format!("dec.up{s}.w"), he_normal(&[c_in, c_out, k], c_in * k / 2, &mut rng)),
                b: p.add(format!("dec.up{s}.b"), Tensor::zeros([c_out])),
            });
        }
        let bw = config.base_width;
        ups.push(ConvIds {
            w: p.add("dec.stem.w", he_normal(&[bw, 1, k], bw * k / config.stem_stride, &mut rng)),
            b: p.add("dec.stem.b", Tensor::zeros([1])),
        });
        Ok(Decoder { config, input_len, params: p, fc, ups })
    }

    /// `z [B, rep_dim]` -> reconstruction `[B, input_len]`.
    pub fn forward(&self, g: &mut Graph<T>, p: &Binding, z: Var) -> Result<Var> {
        let lens = self.config.lengths(self.input_len);
        let batch = g.value(z).dim(0);
        let c_last = self.config.out_channels();
        let h = g.linear(z, p.var(self.fc.w), Some(p.var(self.fc.b)))?;
        let h = g.reshape(h, &[batch, c_last, lens[lens.len() - 1]])?;
        let mut h = g.relu(h);
        let pad = self.config.kernel / 2;
        let n = self.ups.len();
        for (i, up) in self.ups.iter().enumerate() {
            // Target length is the encoder length one level up.
            let target = lens[lens.len() - 2 - i];
            let stride = if i == n - 1 { self.config.stem_stride } else { 2 };
            let cur = g.value(h).dim(2);
            let base = (cur - 1) * stride + self.config.kernel - 2 * pad;
            let out_pad = target - base;
            h = g.conv_transpose1d(h, p.var(up.w), Some(p.var(up.b)), stride, pad, out_pad)?;
            if i + 1 < n {
                h = g.relu(h);
            }
        }
        g.reshape(h, &[batch, self.input_len])
    }
}
