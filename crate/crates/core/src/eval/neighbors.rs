use serde::{Deserialize, Serialize};

use super::metrics::unix_time;
use super::stats::{welch_t_test, Alternative, WelchResult};
use crate::error::{Error, Result};

/// Mean label of each point's `k` nearest neighbors (Euclidean, self
/// excluded, equal distances resolved by lower index).
pub fn knn_label_means<R: AsRef<[f64]>>(reps: &[R], labels: &[f64], k: usize) -> Result<Vec<f64>> {
    let n = reps.len();
    if labels.len() != n {
        return Err(Error::ShapeMismatch(format!("{n} representations, {} labels", labels.len())));
    }
    if k == 0 || n <= k {
        return Err(Error::InsufficientData(format!("k-NN needs more than k = {k} points, got {n}")));
    }
    let d = reps[0].as_ref().len();
    if reps.iter().any(|r| r.as_ref().len() != d) {
        return Err(Error::ShapeMismatch("representations differ in dimension".into()));
    }
    let mut out = Vec::with_capacity(n);
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        let q = reps[i].as_ref();
        dist.clear();
        dist.extend((0..n).filter(|&j| j != i).map(|j| {
            let s: f64 = q.iter().zip(reps[j].as_ref()).map(|(a, b)| (a - b) * (a - b)).sum();
            (s, j)
        }));
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        dist.select_nth_unstable_by(k - 1, cmp);
        let mean = dist[..k].iter().map(|&(_, j)| labels[j]).sum::<f64>() / k as f64;
        out.push(mean);
    }
    Ok(out)
}

/// Neighbor-label means split by the query's own class, with a Welch test
/// that AF means exceed Normal means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborReport {
    pub schema_version: u32,
    pub k: usize,
    pub n_af: usize,
    pub n_normal: usize,
    pub mean_af: f64,
    pub mean_normal: f64,
    pub test: String,
    pub alternative: Alternative,
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub timestamp: u64,
}

pub fn neighbor_study<R: AsRef<[f64]>>(reps: &[R], labels: &[u8], k: usize) -> Result<NeighborReport> {
    let lf: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let means = knn_label_means(reps, &lf, k)?;
    let pick = |class: u8| -> Vec<f64> {
        means.iter().zip(labels).filter(|(_, &l)| l == class).map(|(&m, _)| m).collect()
    };
    let (af, normal) = (pick(1), pick(0));
    let WelchResult { t, df, p } = welch_t_test(&af, &normal, Alternative::Greater)?;
    let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(NeighborReport {
        schema_version: super::REPORT_SCHEMA_VERSION,
        k,
        n_af: af.len(),
        n_normal: normal.len(),
        mean_af: avg(&af),
        mean_normal: avg(&normal),
        test: "welch".into(),
        alternative: Alternative::Greater,
        t,
        df,
        p,
        timestamp: unix_time(),
    })
}
