//! Two-stage workflow: self-supervised pretraining of an encoder, the
//! non-learned RP/PCA baselines, and supervised fine-tuning of a binary
//! AF classifier on top of any representation model.

mod baseline;
mod finetune;
mod model;
mod pretrain;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::rng::Rng;
use crate::signal::Segment;

pub use baseline::{fit_pca, fit_rp, fit_rp_len};
pub use finetune::{finetune, train_from_scratch, FinetuneConfig, FinetuneMode};
pub use model::{DownstreamModel, RepKind, RepModel};
pub use pretrain::{pretrain, train_autoencoder, PretextHead, PretrainConfig, PretrainTask, Pretrained};

/// Inference batch size for embedding and scoring.
pub const EMBED_BATCH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub pretext_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainLog {
    pub fn last(&self) -> Option<&EpochLog> {
        self.epochs.last()
    }

    pub fn best_accuracy(&self) -> Option<f64> {
        self.epochs.iter().filter_map(|e| e.pretext_accuracy).reduce(f64::max)
    }

    /// CSV with header `epoch,loss,pretext_accuracy`; the accuracy cell is
    /// empty for tasks without a classification pretext.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["epoch", "loss", "pretext_accuracy"])?;
        for e in &self.epochs {
            let acc = e.pretext_accuracy.map(|a| a.to_string()).unwrap_or_default();
            w.write_record([e.epoch.to_string(), e.loss.to_string(), acc])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl fmt::Display for PretrainTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PretrainTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PretrainTask::ALL
            .into_iter()
            .find(|t| t.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidParameter(format!("unknown pretraining task {s:?}")))
    }
}

/// Stacks equal-length segments into a `[B, L]` batch.
pub fn stack<'a>(segments: impl IntoIterator<Item = &'a Segment>) -> Result<Tensor<f32>> {
    let mut data = Vec::new();
    let mut rows = 0;
    let mut len = None;
    for s in segments {
        if *len.get_or_insert(s.len()) != s.len() {
            return Err(Error::ShapeMismatch(format!(
                "segment {} has length {}, expected {}",
                s.key(),
                s.len(),
                len.unwrap()
            )));
        }
        data.extend_from_slice(s.samples());
        rows += 1;
    }
    Tensor::new([rows, len.unwrap_or(0)], data)
}

pub(crate) fn shuffled_batches(n: usize, batch: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(batch.max(1)).map(<[usize]>::to_vec).collect()
}

pub(crate) fn check_loss(loss: f64, what: &str, epoch: usize, batch: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!("{what}: loss became {loss} at epoch {epoch}, batch {batch}")))
    }
}
