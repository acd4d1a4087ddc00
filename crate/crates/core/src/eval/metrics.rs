use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

fn check(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!("{} scores, {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numeric("score is NaN".into()));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::InvalidParameter("labels must be 0 or 1".into()));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((pos, neg))
}

/// Indices ordered by ascending score.
fn ascending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    idx
}

/// Groups of tied scores in ascending order, as `(score, positives, negatives)`.
fn tie_groups(scores: &[f64], labels: &[u8]) -> Vec<(f64, usize, usize)> {
    let mut groups: Vec<(f64, usize, usize)> = Vec::new();
    for i in ascending(scores) {
        let (s, l) = (scores[i], labels[i]);
        match groups.last_mut() {
            Some(g) if g.0 == s => {
                if l == 1 { g.1 += 1 } else { g.2 += 1 }
            }
            _ => groups.push((s, (l == 1) as usize, (l == 0) as usize)),
        }
    }
    groups
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = check(scores, labels)?;
    let mut below = 0usize;
    let mut twice = 0u128;
    for (_, p, n) in tie_groups(scores, labels) {
        twice += p as u128 * (2 * below + n) as u128;
        below += n;
    }
    Ok(twice as f64 / (2.0 * pos as f64 * neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub gmean: f64,
}

/// Threshold maximizing `sqrt(sensitivity * specificity)` among the
/// midpoints of consecutive distinct scores plus one candidate below the
/// minimum and one above the maximum. Ties go to the larger threshold.
pub fn gmean_threshold(scores: &[f64], labels: &[u8]) -> Result<ThresholdChoice> {
    let (pos, neg) = check(scores, labels)?;
    let groups = tie_groups(scores, labels);
    // Start below the minimum: everything predicted positive.
    let (mut tp, mut tn) = (pos, 0usize);
    let mut best: Option<ThresholdChoice> = None;
    for j in 0..=groups.len() {
        let threshold = match j {
            0 => groups[0].0 - 1.0,
            j if j == groups.len() => groups[j - 1].0 + 1.0,
            j => 0.5 * (groups[j - 1].0 + groups[j].0),
        };
        if j > 0 {
            tp -= groups[j - 1].1;
            tn += groups[j - 1].2;
        }
        let sensitivity = tp as f64 / pos as f64;
        let specificity = tn as f64 / neg as f64;
        let gmean = (sensitivity * specificity).sqrt();
        if best.is_none_or(|b| gmean >= b.gmean) {
            best = Some(ThresholdChoice { threshold, sensitivity, specificity, gmean });
        }
    }
    Ok(best.expect("at least two candidates"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    #[serde(rename = "TP")]
    pub tp: usize,
    #[serde(rename = "TN")]
    pub tn: usize,
    #[serde(rename = "FP")]
    pub fp: usize,
    #[serde(rename = "FN")]
    pub fn_: usize,
    pub sensitivity: f64,
    pub specificity: f64,
    pub accuracy: f64,
}

/// Counts with the rule "positive iff score > threshold". Ratios with an
/// empty denominator are NaN.
pub fn confusion_metrics(scores: &[f64], labels: &[u8], threshold: f64) -> Confusion {
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s > threshold, l == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { f64::NAN } else { a as f64 / b as f64 };
    Confusion {
        tp,
        tn,
        fp,
        fn_,
        sensitivity: ratio(tp, tp + fn_),
        specificity: ratio(tn, tn + fp),
        accuracy: ratio(tp + tn, tp + tn + fp + fn_),
    }
}

/// Identifies the run a report belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEcho {
    pub task: String,
    pub d: usize,
    pub n_train: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub auc: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub accuracy: f64,
    pub threshold: f64,
    #[serde(rename = "TP")]
    pub tp: usize,
    #[serde(rename = "TN")]
    pub tn: usize,
    #[serde(rename = "FP")]
    pub fp: usize,
    #[serde(rename = "FN")]
    pub fn_: usize,
    pub n_test: usize,
    pub task: String,
    pub d: usize,
    pub n_train: usize,
    pub seed: u64,
    /// Seconds since the Unix epoch; the only field that varies between reruns.
    pub timestamp: u64,
}

impl MetricsReport {
    /// AUC, then the G-mean threshold chosen on these same scores and the
    /// confusion counts at that threshold.
    pub fn evaluate(scores: &[f64], labels: &[u8], echo: RunEcho) -> Result<Self> {
        let auc = auc(scores, labels)?;
        let choice = gmean_threshold(scores, labels)?;
        let c = confusion_metrics(scores, labels, choice.threshold);
        Ok(MetricsReport {
            schema_version: REPORT_SCHEMA_VERSION,
            auc,
            sensitivity: c.sensitivity,
            specificity: c.specificity,
            accuracy: c.accuracy,
            threshold: choice.threshold,
            tp: c.tp,
            tn: c.tn,
            fp: c.fp,
            fn_: c.fn_,
            n_test: scores.len(),
            task: echo.task,
            d: echo.d,
            n_train: echo.n_train,
            seed: echo.seed,
            timestamp: unix_time(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

pub(crate) fn unix_time() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}
