use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Coordinates on the first two principal axes of the centered points.
/// Each axis is oriented so its largest-magnitude loading is positive.
pub fn project_2d<R: AsRef<[f64]>>(reps: &[R]) -> Result<Vec<[f64; 2]>> {
    let n = reps.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("projection needs at least 2 points, got {n}")));
    }
    let d = reps[0].as_ref().len();
    if d == 0 || reps.iter().any(|r| r.as_ref().len() != d) {
        return Err(Error::ShapeMismatch("representations differ in dimension".into()));
    }
    let mut mean = vec![0.0; d];
    for r in reps {
        for (m, v) in mean.iter_mut().zip(r.as_ref()) {
            *m += v / n as f64;
        }
    }
    let x = DMatrix::from_fn(n, d, |i, j| reps[i].as_ref()[j] - mean[j]);
    let svd = x.clone().svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::Numeric("SVD did not produce right singular vectors".into()))?;
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));

    let mut out = vec![[0.0; 2]; n];
    for (c, &k) in order.iter().take(2).enumerate() {
        let axis: Vec<f64> = vt.row(k).iter().copied().collect();
        let pivot = axis.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for (i, p) in out.iter_mut().enumerate() {
            p[c] = sign * x.row(i).iter().zip(&axis).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    Ok(out)
}

/// CSV `id,label,x,y`.
pub fn write_points_csv(path: &Path, ids: &[String], labels: &[String], points: &[[f64; 2]]) -> Result<()> {
    if ids.len() != points.len() || labels.len() != points.len() {
        return Err(Error::ShapeMismatch("ids, labels and points differ in length".into()));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["id", "label", "x", "y"])?;
    for ((id, label), p) in ids.iter().zip(labels).zip(points) {
        w.write_record([id.as_str(), label.as_str(), &p[0].to_string(), &p[1].to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dists(p: &[[f64; 2]]) -> Vec<f64> {
        let mut out = Vec::new();
        for a in p {
            for b in p {
                out.push(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
            }
        }
        out
    }

    #[test]
    fn collinear_points_have_flat_second_axis() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64, -(i as f64)]).collect();
        let p = project_2d(&pts).unwrap();
        assert!(p.iter().all(|q| q[1].abs() < 1e-5));
    }

    #[test]
    fn rotation_preserves_geometry() {
        let pts: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let t = i as f64;
                vec![3.0 * t.cos(), t.sin(), 0.01 * (t * 0.37).sin()]
            })
            .collect();
        let (c, s) = (0.6f64, 0.8f64);
        let rot: Vec<Vec<f64>> = pts.iter().map(|p| vec![c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]]).collect();
        let (a, b) = (dists(&project_2d(&pts).unwrap()), dists(&project_2d(&rot).unwrap()));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-5);
        }
    }

    #[test]
    fn duplicates_project_together() {
        let pts = vec![vec![1.0, 2.0], vec![1.0, 2.0], vec![0.0, 5.0], vec![3.0, -1.0]];
        let p = project_2d(&pts).unwrap();
        assert_eq!(p[0], p[1]);
        assert!(project_2d(&pts[..1]).is_err());
    }
}
