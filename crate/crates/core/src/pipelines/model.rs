use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{stack, PretrainTask, EMBED_BATCH};
use crate::error::{Error, Result};
use crate::nn::{sigmoid, Checkpoint, Encoder, EncoderConfig, Graph, LinearHead, Real, Tensor, Var};
use crate::signal::Segment;

const FORMAT: &str = "tsrev-model";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepKind {
    Encoder,
    Rp,
    Pca,
}

/// A map from segments to `d`-dimensional representations.
#[derive(Debug, Clone)]
pub enum RepModel {
    /// `task` is `None` for an encoder trained only on the downstream labels.
    Encoder { encoder: Encoder<f32>, task: Option<PretrainTask> },
    /// `matrix [d, L]`.
    Rp { matrix: Tensor<f32> },
    /// `mean [L]`, orthonormal `components [d, L]`.
    Pca { mean: Tensor<f32>, components: Tensor<f32> },
}

impl RepModel {
    pub fn kind(&self) -> RepKind {
        match self {
            RepModel::Encoder { .. } => RepKind::Encoder,
            RepModel::Rp { .. } => RepKind::Rp,
            RepModel::Pca { .. } => RepKind::Pca,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            RepModel::Encoder { encoder, .. } => encoder.rep_dim(),
            RepModel::Rp { matrix } => matrix.dim(0),
            RepModel::Pca { components, .. } => components.dim(0),
        }
    }

    /// Required segment length, if the model fixes one.
    pub fn input_len(&self) -> Option<usize> {
        match self {
            RepModel::Encoder { .. } => None,
            RepModel::Rp { matrix } => Some(matrix.dim(1)),
            RepModel::Pca { components, .. } => Some(components.dim(1)),
        }
    }

    pub fn task(&self) -> Option<PretrainTask> {
        match self {
            RepModel::Encoder { task, .. } => *task,
            _ => None,
        }
    }

    /// Human-readable name used in reports: the pretext task, `scratch`,
    /// `rp` or `pca`.
    pub fn name(&self) -> String {
        match self {
            RepModel::Encoder { task: Some(t), .. } => t.to_string(),
            RepModel::Encoder { task: None, .. } => "scratch".into(),
            RepModel::Rp { .. } => "rp".into(),
            RepModel::Pca { .. } => "pca".into(),
        }
    }

    /// Frozen forward pass `x [B, L] -> [B, d]` recorded on `g`.
    pub fn forward<T: Real>(&self, g: &mut Graph<T>, x: Var) -> Result<Var> {
        if let Some(len) = self.input_len() {
            let shape = g.value(x).shape();
            if shape.len() != 2 || shape[1] != len {
                return Err(Error::ShapeMismatch(format!(
                    "{} model expects [B, {len}] input, got {shape:?}",
                    self.name()
                )));
            }
        }
        match self {
            RepModel::Encoder { encoder, .. } => {
                let encoder = encoder.cast::<T>();
                let p = g.bind_frozen(&encoder.params);
                encoder.forward(g, &p, x)
            }
            RepModel::Rp { matrix } => {
                let w = g.input(matrix.cast(), false);
                g.linear(x, w, None)
            }
            RepModel::Pca { mean, components } => {
                let w = g.input(components.cast(), false);
                let b = g.input(pca_offset(mean, components).cast(), false);
                g.linear(x, w, Some(b))
            }
        }
    }

    /// Representations `[B, d]`, computed in fixed-size chunks.
    pub fn embed(&self, segments: &[Segment]) -> Result<Tensor<f32>> {
        let d = self.dim();
        let mut out = Vec::with_capacity(segments.len() * d);
        let linear = match self {
            RepModel::Encoder { .. } => None,
            RepModel::Rp { matrix } => Some((matrix, None)),
            RepModel::Pca { mean, components } => Some((components, Some(mean))),
        };
        if let Some((w, mean)) = linear {
            // Centre before projecting, accumulating in f64.
            let l = w.dim(1);
            for s in segments {
                if s.len() != l {
                    return Err(Error::ShapeMismatch(format!("{} model expects length {l}, got {}", self.name(), s.len())));
                }
                let x: Vec<f64> = match mean {
                    Some(m) => s.samples().iter().zip(m.data()).map(|(&v, &m)| v as f64 - m as f64).collect(),
                    None => s.samples().iter().map(|&v| v as f64).collect(),
                };
                out.extend(w.data().chunks(l).map(|row| row.iter().zip(&x).map(|(&a, b)| a as f64 * b).sum::<f64>() as f32));
            }
            return Tensor::new([segments.len(), d], out);
        }
        for chunk in segments.chunks(EMBED_BATCH) {
            let mut g = Graph::<f32>::new();
            let x = g.input(stack(chunk)?, false);
            let z = self.forward(&mut g, x)?;
            out.extend_from_slice(g.value(z).data());
        }
        Tensor::new([segments.len(), d], out)
    }

    fn meta(&self) -> serde_json::Value {
        match self {
            RepModel::Encoder { encoder, task } => json!({
                "kind": RepKind::Encoder,
                "encoder": encoder.config(),
                "task": task,
            }),
            RepModel::Rp { matrix } => json!({ "kind": RepKind::Rp, "dim": matrix.dim(0), "input_len": matrix.dim(1) }),
            RepModel::Pca { components, .. } => {
                json!({ "kind": RepKind::Pca, "dim": components.dim(0), "input_len": components.dim(1) })
            }
        }
    }

    fn push_tensors(&self, ck: &mut Checkpoint, prefix: &str) {
        match self {
            RepModel::Encoder { encoder, .. } => ck.push_store(prefix, &encoder.params),
            RepModel::Rp { matrix } => ck.push(format!("{prefix}rp.matrix"), matrix.clone()),
            RepModel::Pca { mean, components } => {
                ck.push(format!("{prefix}pca.mean"), mean.clone());
                ck.push(format!("{prefix}pca.components"), components.clone());
            }
        }
    }

    fn from_parts(meta: &serde_json::Value, ck: &Checkpoint, prefix: &str) -> Result<Self> {
        let kind: RepKind = serde_json::from_value(meta["kind"].clone())?;
        Ok(match kind {
            RepKind::Encoder => {
                let config: EncoderConfig = serde_json::from_value(meta["encoder"].clone())?;
                let task: Option<PretrainTask> = serde_json::from_value(meta["task"].clone())?;
                let mut encoder = Encoder::new(config, 0)?;
                ck.load_store(prefix, &mut encoder.params)?;
                RepModel::Encoder { encoder, task }
            }
            RepKind::Rp => RepModel::Rp { matrix: ck.get(&format!("{prefix}rp.matrix"))?.clone() },
            RepKind::Pca => RepModel::Pca {
                mean: ck.get(&format!("{prefix}pca.mean"))?.clone(),
                components: ck.get(&format!("{prefix}pca.components"))?.clone(),
            },
        })
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(json!({ "format": FORMAT, "model": "representation", "rep": self.meta() }));
        self.push_tensors(&mut ck, "rep.");
        ck
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }

    /// Reads the representation part of either checkpoint kind.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        match ck.meta["model"].as_str() {
            Some("representation") | Some("downstream") => Self::from_parts(&ck.meta["rep"], ck, "rep."),
            other => Err(Error::Checkpoint(format!("not a model checkpoint: {other:?}"))),
        }
    }
}

/// `-components * mean`, the bias that centers before projecting.
fn pca_offset(mean: &Tensor<f32>, components: &Tensor<f32>) -> Tensor<f32> {
    let l = mean.len();
    let b = components
        .data()
        .chunks(l)
        .map(|row| -(row.iter().zip(mean.data()).map(|(&c, &m)| c as f64 * m as f64).sum::<f64>()) as f32)
        .collect();
    Tensor::new([components.dim(0)], b).expect("one offset per component")
}

/// Representation model plus a single-logit head; scores are `sigmoid(logit)`.
#[derive(Debug, Clone)]
pub struct DownstreamModel {
    pub rep: RepModel,
    pub head: LinearHead<f32>,
}

impl DownstreamModel {
    /// Frozen forward pass to the logits `[B, 1]`.
    pub fn forward<T: Real>(&self, g: &mut Graph<T>, x: Var) -> Result<Var> {
        let z = self.rep.forward(g, x)?;
        let head = self.head.cast::<T>();
        let p = g.bind_frozen(&head.params);
        head.forward(g, &p, z)
    }

    pub fn logits(&self, segments: &[Segment]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(segments.len());
        for chunk in segments.chunks(EMBED_BATCH) {
            let mut g = Graph::<f32>::new();
            let x = g.input(stack(chunk)?, false);
            let l = self.forward(&mut g, x)?;
            out.extend(g.value(l).data().iter().map(|&v| v as f64));
        }
        Ok(out)
    }

    pub fn scores(&self, segments: &[Segment]) -> Result<Vec<f64>> {
        Ok(self.logits(segments)?.into_iter().map(sigmoid).collect())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(json!({
            "format": FORMAT,
            "model": "downstream",
            "rep": self.rep.meta(),
            "head": { "in_dim": self.head.in_dim, "out_dim": self.head.out_dim },
        }));
        self.rep.push_tensors(&mut ck, "rep.");
        ck.push_store("", &self.head.params);
        ck
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.meta["model"].as_str() != Some("downstream") {
            return Err(Error::Checkpoint("not a fine-tuned model checkpoint".into()));
        }
        let rep = RepModel::from_parts(&ck.meta["rep"], ck, "rep.")?;
        let mut head = LinearHead::new(rep.dim(), 1, 0);
        ck.load_store("", &mut head.params)?;
        Ok(DownstreamModel { rep, head })
    }
}
