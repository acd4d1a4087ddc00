//! Layer-wise relevance propagation: redistributes a model's output logit
//! backwards onto the input samples.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::conv;
use crate::nn::graph::Op;
use crate::nn::{Graph, Real, Tensor, Var};
use crate::pipelines::DownstreamModel;
use crate::signal::Segment;

pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "epsilon", rename_all = "lowercase")]
pub enum LrpRule {
    /// Stabilized rule: denominators get `eps * sign(z)` added.
    Epsilon(f64),
    /// Unstabilized rule; exactly conservative on bias-free networks.
    Zero,
}

impl Default for LrpRule {
    fn default() -> Self {
        LrpRule::Epsilon(DEFAULT_EPSILON)
    }
}

impl LrpRule {
    fn eps(self) -> f64 {
        match self {
            LrpRule::Epsilon(e) => e,
            LrpRule::Zero => 0.0,
        }
    }
}

/// Per-sample relevance for one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceMap {
    pub segment_id: String,
    pub samples: Vec<f32>,
    pub scores: Vec<f64>,
    pub output_logit: f64,
    pub rule: LrpRule,
}

impl RelevanceMap {
    pub fn total(&self) -> f64 {
        self.scores.iter().sum()
    }

    /// `sum(R) - logit`: relevance absorbed by biases and stabilizers.
    pub fn residual(&self) -> f64 {
        self.total() - self.output_logit
    }
}

fn ratio(r: f64, z: f64, eps: f64) -> f64 {
    let den = z + if z >= 0.0 { eps } else { -eps };
    if den == 0.0 {
        0.0
    } else {
        r / den
    }
}

fn values<T: Real>(t: &Tensor<T>) -> Vec<f64> {
    t.data().iter().map(|v| v.f64()).collect()
}

fn give(rel: &mut [Option<Vec<f64>>], v: Var, r: Vec<f64>) {
    match &mut rel[v.0] {
        Some(acc) => acc.iter_mut().zip(r).for_each(|(a, b)| *a += b),
        slot => *slot = Some(r),
    }
}

/// Propagates relevance from `output` (seeded with its own values) back to
/// `input` through every op recorded on `g` in between.
///
/// Convolutions and linear layers use the epsilon/zero rule with biases
/// excluded from the denominator, ReLU passes relevance of active units,
/// average pooling is treated as a linear layer with uniform weights,
/// residual sums split relevance in proportion to each branch's value,
/// and gains and reshapes pass it through.
pub fn lrp_graph<T: Real>(g: &Graph<T>, input: Var, output: Var, rule: LrpRule) -> Result<Vec<f64>> {
    if output.0 >= g.len() || input.0 > output.0 {
        return Err(Error::NoForwardGraph);
    }
    let eps = rule.eps();
    let mut rel: Vec<Option<Vec<f64>>> = vec![None; output.0 + 1];
    rel[output.0] = Some(values(g.value(output)));
    for i in (input.0 + 1..=output.0).rev() {
        let Some(r) = rel[i].take() else { continue };
        let node = &g.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::Linear { x, w, .. } => {
                let a = values(g.value(*x));
                let wv = values(g.value(*w));
                let (batch, d) = (g.value(*x).dim(0), g.value(*x).dim(1));
                let k = g.value(*w).dim(0);
                let mut rx = vec![0.0; batch * d];
                for b in 0..batch {
                    let ab = &a[b * d..(b + 1) * d];
                    for kk in 0..k {
                        let wk = &wv[kk * d..(kk + 1) * d];
                        let z: f64 = ab.iter().zip(wk).map(|(p, q)| p * q).sum();
                        let s = ratio(r[b * k + kk], z, eps);
                        if s != 0.0 {
                            for ((o, &aj), &wj) in rx[b * d..(b + 1) * d].iter_mut().zip(ab).zip(wk) {
                                *o += aj * wj * s;
                            }
                        }
                    }
                }
                give(&mut rel, *x, rx);
            }
            Op::Conv1d { x, w, geom, .. } => {
                let a = g.value(*x).data();
                let z = conv::conv_forward(a, g.value(*w).data(), geom);
                let s: Vec<T> = z.iter().zip(&r).map(|(&z, &r)| T::lit(ratio(r, z.f64(), eps))).collect();
                let c = conv::conv_backward_data(&s, g.value(*w).data(), geom);
                give(&mut rel, *x, a.iter().zip(&c).map(|(&a, &c)| a.f64() * c.f64()).collect());
            }
            Op::MeanTime(x) => {
                let a = values(g.value(*x));
                let len = g.value(*x).dim(2);
                let rx = a
                    .chunks(len)
                    .zip(&r)
                    .flat_map(|(row, &rc)| {
                        let z = row.iter().sum::<f64>() / len as f64;
                        let s = ratio(rc, z, eps) / len as f64;
                        row.iter().map(move |&v| v * s)
                    })
                    .collect();
                give(&mut rel, *x, rx);
            }
            Op::Add(a, b) => {
                let (va, vb) = (values(g.value(*a)), values(g.value(*b)));
                let (mut ra, mut rb) = (Vec::with_capacity(r.len()), Vec::with_capacity(r.len()));
                for ((&p, &q), &rr) in va.iter().zip(&vb).zip(&r) {
                    let s = ratio(rr, p + q, eps);
                    ra.push(p * s);
                    rb.push(q * s);
                }
                give(&mut rel, *a, ra);
                give(&mut rel, *b, rb);
            }
            Op::Relu(x) => {
                let rx = r
                    .iter()
                    .zip(node.value.data())
                    .map(|(&rr, &y)| if y > T::zero() { rr } else { 0.0 })
                    .collect();
                give(&mut rel, *x, rx);
            }
            Op::Gain { x, .. } | Op::Reshape(x) => give(&mut rel, *x, r),
            other => return Err(Error::UnsupportedLayer(other.name().into())),
        }
    }
    Ok(rel[input.0].take().unwrap_or_else(|| vec![0.0; g.value(input).len()]))
}

/// Relevance of every sample of `segment` for the model's AF logit,
/// computed in double precision.
pub fn lrp(model: &DownstreamModel, segment: &Segment, rule: LrpRule) -> Result<RelevanceMap> {
    let mut g = Graph::<f64>::new();
    let samples: Vec<f64> = segment.samples().iter().map(|&v| v as f64).collect();
    let x = g.input(Tensor::new([1, segment.len()], samples)?, false);
    let logit = model.forward(&mut g, x)?;
    let scores = lrp_graph(&g, x, logit, rule)?;
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("relevance for {} is not finite", segment.key())));
    }
    Ok(RelevanceMap {
        segment_id: segment.key(),
        samples: segment.samples().to_vec(),
        scores,
        output_logit: g.value(logit).data()[0],
        rule,
    })
}

/// CSV with header `index,sample_value,R`.
pub fn heatmap_export(map: &RelevanceMap, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "sample_value", "R"])?;
    for (i, (s, r)) in map.samples.iter().zip(&map.scores).enumerate() {
        w.write_record([i.to_string(), s.to_string(), r.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Rows `(index, sample_value, R)` of a heatmap CSV.
pub fn read_heatmap_csv(path: &Path) -> Result<Vec<(usize, f32, f64)>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

fn ramp(t: f64) -> String {
    // Blue (low |R|) to red (high |R|).
    let (lo, hi) = ([44.0, 123.0, 182.0], [215.0, 25.0, 28.0]);
    let c: Vec<u8> = lo.iter().zip(hi).map(|(a, b)| (a + (b - a) * t).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// SVG line plot of the signal, each step colored by `|R| / max |R|`.
pub fn heatmap_svg(map: &RelevanceMap, path: &Path) -> Result<()> {
    let (w, h) = (1000.0, 200.0);
    let n = map.samples.len();
    let peak = map.scores.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let xs = |i: usize| i as f64 * w / (n.max(2) - 1) as f64;
    let ys = |v: f32| h - 10.0 - (h - 20.0) * v as f64;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <title>{}</title>\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        map.segment_id
    );
    for i in 1..n {
        let t = if peak > 0.0 { map.scores[i].abs().max(map.scores[i - 1].abs()) / peak } else { 0.0 };
        let _ = writeln!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{}\" stroke-width=\"1.5\"/>",
            xs(i - 1),
            ys(map.samples[i - 1]),
            xs(i),
            ys(map.samples[i]),
            ramp(t)
        );
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)?;
    Ok(())
}

/// Mean |R| within a window around given sample positions versus elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakFocus {
    pub near: f64,
    pub far: f64,
    pub ratio: f64,
}

/// `None` when either region is empty.
pub fn peak_focus(map: &RelevanceMap, peaks: &[usize], half_window: usize) -> Option<PeakFocus> {
    let n = map.scores.len();
    let mut near = vec![false; n];
    for &p in peaks {
        for flag in near.iter_mut().take((p + half_window + 1).min(n)).skip(p.saturating_sub(half_window)) {
            *flag = true;
        }
    }
    let (mut sn, mut cn, mut sf, mut cf) = (0.0, 0usize, 0.0, 0usize);
    for (r, &is_near) in map.scores.iter().zip(&near) {
        if is_near {
            sn += r.abs();
            cn += 1;
        } else {
            sf += r.abs();
            cf += 1;
        }
    }
    if cn == 0 || cf == 0 {
        return None;
    }
    let (near, far) = (sn / cn as f64, sf / cf as f64);
    Some(PeakFocus { near, far, ratio: near / far })
}

/// Sample positions inside a segment of `len` samples starting at
/// `offset` for beat times given in seconds.
pub fn peaks_in_segment(beat_times_s: &[f64], fs: u32, offset: usize, len: usize) -> Vec<usize> {
    beat_times_s
        .iter()
        .map(|t| (t * fs as f64).round())
        .filter(|&p| p >= offset as f64 && p < (offset + len) as f64)
        .map(|p| p as usize - offset)
        .collect()
}
