use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal};

use super::RepModel;
use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::rng;
use crate::signal::{Segment, SEGMENT_LEN};

/// Random projection with i.i.d. `N(0, 1/d)` entries, shape `[d, 3000]`.
pub fn fit_rp(d: usize, seed: u64) -> Result<RepModel> {
    fit_rp_len(d, SEGMENT_LEN, seed)
}

pub fn fit_rp_len(d: usize, input_len: usize, seed: u64) -> Result<RepModel> {
    if d == 0 || input_len == 0 {
        return Err(Error::InvalidParameter("projection dimensions must be positive".into()));
    }
    let normal = Normal::new(0.0, (1.0 / d as f64).sqrt()).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = rng::named_rng(seed, "rp");
    let data = (0..d * input_len).map(|_| normal.sample(&mut rng) as f32).collect();
    Ok(RepModel::Rp { matrix: Tensor::new([d, input_len], data)? })
}

/// Top-`d` principal axes from the SVD of the centered data matrix.
pub fn fit_pca(segments: &[Segment], d: usize) -> Result<RepModel> {
    let n = segments.len();
    if d == 0 {
        return Err(Error::InvalidParameter("PCA dimension must be positive".into()));
    }
    if n < 2 {
        return Err(Error::InsufficientData(format!("PCA needs at least 2 segments, got {n}")));
    }
    let l = segments[0].len();
    if let Some(s) = segments.iter().find(|s| s.len() != l) {
        return Err(Error::ShapeMismatch(format!("segment {} has length {}, expected {l}", s.key(), s.len())));
    }
    let mut mean = vec![0.0f64; l];
    for s in segments {
        for (m, &v) in mean.iter_mut().zip(s.samples()) {
            *m += v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let x = DMatrix::from_fn(n, l, |i, j| segments[i].samples()[j] as f64 - mean[j]);

    let svd = x.svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::Numeric("SVD did not produce right singular vectors".into()))?;
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));

    let top = order.first().map_or(0.0, |&i| sv[i]);
    // Samples are f32, so anything below f32 rounding is noise.
    let tol = top * n.max(l) as f64 * f32::EPSILON as f64;
    let rank = sv.iter().filter(|&&s| s > tol).count();
    if d > rank {
        return Err(Error::RankDeficient { requested: d, achievable: rank });
    }

    let mut components = Vec::with_capacity(d * l);
    for &i in &order[..d] {
        let row: Vec<f64> = vt.row(i).iter().copied().collect();
        let pivot = row.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        components.extend(row.iter().map(|v| (sign * v) as f32));
    }
    Ok(RepModel::Pca {
        mean: Tensor::new([l], mean.iter().map(|&m| m as f32).collect())?,
        components: Tensor::new([d, l], components)?,
    })
}
