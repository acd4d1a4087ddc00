//! Shared helpers for integration tests: a finite-difference gradient
//! checker and brute-force oracles.
#![allow(dead_code)]

use rand::Rng as _;

use tsrev::nn::{Binding, Graph, ParamStore, Tensor, Var};
pub use tsrev::rng::Rng;

pub const FD_STEP: f64 = 1e-3;
pub const FD_MAX_REL_ERR: f64 = 1e-3;
/// Relative errors are taken against `max(|analytic|, |numeric|, REL_FLOOR)`.
pub const REL_FLOOR: f64 = 1e-6;

pub fn rng(seed: u64) -> Rng {
    tsrev::rng::rng(seed)
}

pub fn randn(r: &mut Rng, shape: &[usize], scale: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n).map(|_| r.random_range(-1.0..1.0) * scale).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

#[derive(Debug, Clone, Default)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub worst: String,
    pub checked: usize,
    /// Entries skipped because a perturbation crossed a ReLU kink.
    pub skipped: usize,
}

impl GradCheck {
    fn record(&mut self, what: String, analytic: f64, numeric: f64) {
        let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR);
        self.checked += 1;
        if err > self.max_rel_err {
            self.max_rel_err = err;
            self.worst = format!("{what}: analytic {analytic:e}, numeric {numeric:e}");
        }
    }

    pub fn passes(&self) -> bool {
        self.checked > 0 && self.max_rel_err < FD_MAX_REL_ERR
    }
}

/// Evenly spaced indices, at most `limit` of them.
fn sample(len: usize, limit: usize) -> Vec<usize> {
    if len <= limit {
        (0..len).collect()
    } else {
        (0..limit).map(|i| i * len / limit).collect()
    }
}

/// Compares the analytic gradients of the scalar `build` (with respect to
/// every parameter in `store` and to `input`) against central differences.
/// At most `per_tensor` entries of each tensor are probed.
pub fn grad_check<F>(store: &ParamStore<f64>, input: &Tensor<f64>, per_tensor: usize, build: F) -> GradCheck
where
    F: Fn(&mut Graph<f64>, &Binding, Var) -> tsrev::Result<Var>,
{
    let eval = |s: &ParamStore<f64>, x: &Tensor<f64>| -> (f64, Vec<bool>) {
        let mut g = Graph::new();
        let p = g.bind(s);
        let xv = g.input(x.clone(), true);
        let l = build(&mut g, &p, xv).unwrap();
        (g.value(l).data()[0], g.relu_pattern())
    };

    let mut g = Graph::new();
    let p = g.bind(store);
    let xv = g.input(input.clone(), true);
    let loss = build(&mut g, &p, xv).unwrap();
    assert_eq!(g.value(loss).len(), 1, "loss must be scalar");
    let pattern = g.relu_pattern();
    let mut grads = g.backward(loss).unwrap();
    let dx = grads.get(xv).cloned().unwrap_or_else(|| Tensor::zeros(input.shape().to_vec()));
    let dp = grads.collect(&p);

    let mut out = GradCheck::default();
    let probe = |what: String, analytic: f64, plus: (f64, Vec<bool>), minus: (f64, Vec<bool>), out: &mut GradCheck| {
        if plus.1 != pattern || minus.1 != pattern {
            out.skipped += 1;
            return;
        }
        out.record(what, analytic, (plus.0 - minus.0) / (2.0 * FD_STEP));
    };

    let names: Vec<String> = store.iter().map(|(n, _, _)| n.to_string()).collect();
    for (ti, name) in names.iter().enumerate() {
        let len = store.iter().nth(ti).unwrap().1.len();
        for i in sample(len, per_tensor) {
            let shifted = |delta: f64| {
                let mut s = store.clone();
                s.tensors_mut().nth(ti).unwrap().data_mut()[i] += delta;
                eval(&s, input)
            };
            let analytic = dp[ti].as_ref().map_or(0.0, |t| t.data()[i]);
            probe(format!("{name}[{i}]"), analytic, shifted(FD_STEP), shifted(-FD_STEP), &mut out);
        }
    }
    for i in sample(input.len(), per_tensor) {
        let shifted = |delta: f64| {
            let mut x = input.clone();
            x.data_mut()[i] += delta;
            eval(store, &x)
        };
        probe(format!("input[{i}]"), dx.data()[i], shifted(FD_STEP), shifted(-FD_STEP), &mut out);
    }
    out
}

/// AUC by counting every positive/negative pair; ties count one half.
pub fn auc_oracle(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut twice, mut pos, mut neg) = (0u64, 0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        if li == 1 {
            pos += 1;
        } else {
            neg += 1;
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj == 0 {
                twice += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
    }
    twice as f64 / (2.0 * pos as f64 * neg as f64)
}

/// Best `(sensitivity, specificity, gmean)` over every rule "positive iff
/// score > t", t ranging over minus infinity and each distinct score; ties
/// go to the larger t.
pub fn gmean_oracle(scores: &[f64], labels: &[u8]) -> (f64, f64, f64) {
    let mut ts: Vec<f64> = scores.to_vec();
    ts.push(f64::NEG_INFINITY);
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let neg = labels.len() as f64 - pos;
    let mut best = (0.0, 0.0, -1.0);
    for t in ts {
        let tp = scores.iter().zip(labels).filter(|(&s, &l)| s > t && l == 1).count() as f64;
        let tn = scores.iter().zip(labels).filter(|(&s, &l)| s <= t && l == 0).count() as f64;
        let (se, sp) = (tp / pos, tn / neg);
        let gm = (se * sp).sqrt();
        if gm >= best.2 {
            best = (se, sp, gm);
        }
    }
    best
}

/// Mean label of the `k` nearest others by full sort of all distances.
pub fn knn_oracle(reps: &[Vec<f64>], labels: &[f64], k: usize) -> Vec<f64> {
    (0..reps.len())
        .map(|i| {
            let mut d: Vec<(f64, usize)> = (0..reps.len())
                .filter(|&j| j != i)
                .map(|j| (reps[i].iter().zip(&reps[j]).map(|(a, b)| (a - b) * (a - b)).sum(), j))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d[..k].iter().map(|&(_, j)| labels[j]).sum::<f64>() / k as f64
        })
        .collect()
}

/// Random scores on a coarse grid so that ties are common.
pub fn tied_instance(r: &mut Rng, n: usize) -> (Vec<f64>, Vec<u8>) {
    loop {
        let levels = r.random_range(2..=n.max(2));
        let scores: Vec<f64> = (0..n).map(|_| r.random_range(0..levels) as f64 / levels as f64).collect();
        let labels: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
        if labels.contains(&0) && labels.contains(&1) {
            return (scores, labels);
        }
    }
}

pub mod cases {
    //! Gradient-check scenarios shared by the unit-level and acceptance suites.

    use tsrev::nn::{Encoder, EncoderConfig, ParamStore, Tensor};

    use super::{grad_check, randn, rng, GradCheck};

    const PROBES: usize = 24;

    pub fn conv_layer() -> GradCheck {
        let mut r = rng(101);
        let mut s = ParamStore::new();
        let w = s.add("w", randn(&mut r, &[6, 2, 5], 0.5));
        let b = s.add("b", randn(&mut r, &[6], 0.1));
        let x = randn(&mut r, &[2, 4, 20], 1.0);
        let target = randn(&mut r, &[2 * 6 * 10], 1.0).into_data();
        grad_check(&s, &x, PROBES, |g, p, x| {
            let y = g.conv1d(x, p.var(w), Some(p.var(b)), 2, 2, 2)?;
            g.mse(y, &target)
        })
    }

    pub fn conv_transpose_layer() -> GradCheck {
        let mut r = rng(102);
        let mut s = ParamStore::new();
        let w = s.add("w", randn(&mut r, &[3, 2, 4], 0.5));
        let b = s.add("b", randn(&mut r, &[2], 0.1));
        let x = randn(&mut r, &[2, 3, 7], 1.0);
        // (7 - 1) * 2 - 2 + 4 + 1 = 15
        let target = randn(&mut r, &[2 * 2 * 15], 1.0).into_data();
        grad_check(&s, &x, PROBES, |g, p, x| {
            let y = g.conv_transpose1d(x, p.var(w), Some(p.var(b)), 2, 1, 1)?;
            g.mse(y, &target)
        })
    }

    pub fn residual_block() -> GradCheck {
        let mut r = rng(103);
        let mut s = ParamStore::new();
        let c1w = s.add("conv1.w", randn(&mut r, &[4, 2, 3], 0.6));
        let c1b = s.add("conv1.b", randn(&mut r, &[4], 0.1));
        let c2w = s.add("conv2.w", randn(&mut r, &[4, 4, 3], 0.4));
        let c2b = s.add("conv2.b", randn(&mut r, &[4], 0.1));
        let gain = s.add("gain", Tensor::scalar(0.7));
        let scw = s.add("shortcut.w", randn(&mut r, &[4, 2, 1], 0.6));
        let scb = s.add("shortcut.b", randn(&mut r, &[4], 0.1));
        let x = randn(&mut r, &[2, 2, 16], 1.0);
        let target = randn(&mut r, &[2 * 4 * 8], 1.0).into_data();
        grad_check(&s, &x, PROBES, |g, p, x| {
            let a = g.conv1d(x, p.var(c1w), Some(p.var(c1b)), 2, 1, 1)?;
            let a = g.relu(a);
            let a = g.conv1d(a, p.var(c2w), Some(p.var(c2b)), 1, 1, 1)?;
            let a = g.gain(a, p.var(gain))?;
            let sc = g.conv1d(x, p.var(scw), Some(p.var(scb)), 2, 0, 1)?;
            let h = g.add(sc, a)?;
            let h = g.relu(h);
            g.mse(h, &target)
        })
    }

    pub fn tiny_encoder() -> GradCheck {
        let cfg = EncoderConfig {
            stages: 2,
            base_width: 2,
            blocks_per_stage: 2,
            kernel: 3,
            rep_dim: 3,
            stem_stride: 2,
            ..EncoderConfig::default()
        };
        let mut enc = Encoder::<f64>::new(cfg, 104).unwrap();
        let mut r = rng(104);
        for t in enc.params.tensors_mut() {
            if t.shape().len() == 1 && t.len() > 1 {
                *t = randn(&mut r, t.shape(), 0.1);
            }
        }
        let x = randn(&mut r, &[2, 48], 1.0);
        let target = randn(&mut r, &[2 * 3], 1.0).into_data();
        grad_check(&enc.params.clone(), &x, PROBES, |g, p, x| {
            let z = enc.forward(g, p, x)?;
            g.mse(z, &target)
        })
    }

    pub fn bce_loss() -> GradCheck {
        let mut r = rng(105);
        let mut s = ParamStore::new();
        let w = s.add("w", randn(&mut r, &[1, 5], 1.0));
        let b = s.add("b", randn(&mut r, &[1], 0.5));
        let x = randn(&mut r, &[6, 5], 1.5);
        let targets = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        grad_check(&s, &x, PROBES, |g, p, x| {
            let l = g.linear(x, p.var(w), Some(p.var(b)))?;
            g.bce_with_logits(l, &targets)
        })
    }

    pub fn softmax_ce_loss() -> GradCheck {
        let mut r = rng(106);
        let mut s = ParamStore::new();
        let w = s.add("w", randn(&mut r, &[4, 5], 1.0));
        let x = randn(&mut r, &[6, 5], 1.0);
        grad_check(&s, &x, PROBES, |g, p, x| {
            let l = g.linear(x, p.var(w), None)?;
            g.softmax_ce(l, &[0, 3, 2, 1, 1, 0])
        })
    }

    pub fn ntxent_loss() -> GradCheck {
        let mut r = rng(107);
        let mut s = ParamStore::new();
        let w = s.add("w", randn(&mut r, &[5, 5], 1.0));
        let x = randn(&mut r, &[8, 5], 1.0);
        grad_check(&s, &x, PROBES, |g, p, x| {
            let z = g.linear(x, p.var(w), None)?;
            g.ntxent(z, 0.5)
        })
    }
}
