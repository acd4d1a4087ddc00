//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. `ACCEPTANCE_ONLY=1,2,9` restricts the run to the listed criteria.

mod common;

use std::time::Instant;

use rand::Rng;

use common::{auc_oracle, cases, gmean_oracle, knn_oracle, rng, tied_instance};
use tsrev::eval::{auc, confusion_metrics, gmean_threshold, knn_label_means, neighbor_study, MetricsReport, RunEcho};
use tsrev::ingest::{holdout, read_manifest, split, write_corpus, SampleFormat, SplitSpec};
use tsrev::interpret::{lrp, LrpRule};
use tsrev::nn::{Encoder, EncoderConfig, Graph, LinearHead, Tensor};
use tsrev::pipelines::{
    finetune, fit_pca, fit_rp, pretrain, train_from_scratch, DownstreamModel, FinetuneConfig, FinetuneMode,
    PretrainConfig, PretrainTask, RepModel,
};
use tsrev::signal::{labeled_segments, normalize, DEFAULT_STRIDE};
use tsrev::synth::{synth_corpus, synth_corpus_varied, SynthParams, Variability};
use tsrev::transforms::{spatial_reverse, temporal_reverse, ts_reverse};
use tsrev::{LabeledSegment, Segment, SEGMENT_LEN};

// Deterministic criteria.
const INVOLUTION_SEGMENTS: usize = 1000;
/// One ulp at 1.0, the top of the normalized range.
const INVOLUTION_TOL: f32 = f32::EPSILON;
const ORACLE_INSTANCES: usize = 200;
const ORACLE_MAX_N: usize = 50;
const KNN_INSTANCES: usize = 50;
const KNN_MAX_N: usize = 200;
const LRP_SEGMENTS: usize = 100;
const LRP_MAX_REL_RESIDUAL: f64 = 1e-4;
const NTXENT_TOL: f64 = 1e-5;

// Learning criteria.
const SEEDS: [u64; 3] = [11, 12, 13];
const PRETRAIN_RECORDS_PER_CLASS: usize = 200;
const PRETRAIN_DATA_SEED: u64 = 9001;
const POOL_RECORDS_PER_CLASS: usize = 100;
const POOL_DATA_SEED: u64 = 9002;
const TEST_RECORDS_PER_CLASS: usize = 50;
const TEST_DATA_SEED: u64 = 9003;
const TEST_SEGMENTS: usize = 500;
const PRETRAIN_MAX_EPOCHS: usize = 30;
const PRETRAIN_STOP_AT: f64 = 0.98;
const PRETRAIN_LR: f64 = 3e-3;
const PRETRAIN_BATCH: usize = 32;
const PRETEXT_MIN_ACCURACY: f64 = 0.9;
const FT_BATCH: usize = 10;
const FT_EPOCHS: usize = 30;
const FEW_LABELS_FT_LR: f64 = 1e-2;
const BASELINE_FT_LR: f64 = 1e-3;
const FT_ENCODER_LR_SCALE: f64 = 0.1;
const PROBE_EPOCHS: usize = 100;
const PROBE_LR: f64 = 1e-2;
const FEW_LABELS: usize = 50;
const BENEFIT_MARGIN: f64 = 0.05;
const BENEFIT_MIN_AUC: f64 = 0.80;
const BASELINE_LABELS: usize = 200;
const BASELINE_DIM: usize = 128;
const NEIGHBOR_PER_CLASS: usize = 200;
const NEIGHBOR_K: usize = 3;
const NEIGHBOR_MAX_P: f64 = 0.01;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join("/")
}

fn random_segment(r: &mut common::Rng, len: usize, i: usize) -> Segment {
    let raw: Vec<f32> = (0..len).map(|_| r.random_range(-3.0f32..3.0)).collect();
    normalize(&raw, &format!("rand{i}"), 0)
}

fn c1_transforms() -> Outcome {
    let mut r = rng(1);
    let mut worst = 0.0f32;
    let mut exact = true;
    for i in 0..INVOLUTION_SEGMENTS {
        let s = random_segment(&mut r, SEGMENT_LEN, i);
        exact &= temporal_reverse(&temporal_reverse(&s)) == s;
        exact &= temporal_reverse(&spatial_reverse(&s)) == spatial_reverse(&temporal_reverse(&s));
        for twice in [spatial_reverse(&spatial_reverse(&s)), ts_reverse(&ts_reverse(&s))] {
            for (a, b) in twice.samples().iter().zip(s.samples()) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    outcome(
        exact && worst <= INVOLUTION_TOL,
        format!("{INVOLUTION_SEGMENTS} segments; temporal and commutation exact: {exact}; max |S(S(x)) - x| = {worst:e} (tol {INVOLUTION_TOL:e})"),
    )
}

fn c2_auc() -> Outcome {
    let mut r = rng(2);
    let mut mismatches = 0;
    for _ in 0..ORACLE_INSTANCES {
        let n = r.random_range(2..=ORACLE_MAX_N);
        let (s, l) = tied_instance(&mut r, n);
        if auc(&s, &l).unwrap() != auc_oracle(&s, &l) {
            mismatches += 1;
        }
    }
    let worked = auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap();
    outcome(
        mismatches == 0 && worked == 0.75,
        format!("{mismatches}/{ORACLE_INSTANCES} mismatches vs pair counting; worked example {worked}"),
    )
}

fn c3_gmean() -> Outcome {
    let mut r = rng(3);
    let mut mismatches = 0;
    for _ in 0..ORACLE_INSTANCES {
        let n = r.random_range(2..=ORACLE_MAX_N);
        let (s, l) = tied_instance(&mut r, n);
        let got = gmean_threshold(&s, &l).unwrap();
        let (se, sp, gm) = gmean_oracle(&s, &l);
        let at = confusion_metrics(&s, &l, got.threshold);
        if (got.sensitivity, got.specificity, got.gmean) != (se, sp, gm) || (at.sensitivity, at.specificity) != (se, sp) {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches}/{ORACLE_INSTANCES} mismatches vs exhaustive search"))
}

fn c4_knn() -> Outcome {
    let mut r = rng(4);
    let mut mismatches = 0;
    for _ in 0..KNN_INSTANCES {
        let n = r.random_range(5..=KNN_MAX_N);
        let d = r.random_range(1..=8);
        let k = r.random_range(1..=4.min(n - 1));
        // Integer coordinates make distance ties common.
        let reps: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| r.random_range(0..4) as f64).collect()).collect();
        let labels: Vec<f64> = (0..n).map(|_| r.random_range(0..2) as f64).collect();
        if knn_label_means(&reps, &labels, k).unwrap() != knn_oracle(&reps, &labels, k) {
            mismatches += 1;
        }
    }
    let reps = [vec![0.0], vec![1.0], vec![2.0], vec![3.0], vec![100.0]];
    let worked = knn_label_means(&reps, &[0.0, 1.0, 1.0, 0.0, 1.0], 3).unwrap()[0];
    outcome(
        mismatches == 0 && worked == 2.0 / 3.0,
        format!("{mismatches}/{KNN_INSTANCES} mismatches vs full sort; neighbours 1,1,0 -> {worked:.6}"),
    )
}

fn c5_gradients() -> Outcome {
    let checks = [
        ("conv", cases::conv_layer()),
        ("residual block", cases::residual_block()),
        ("encoder", cases::tiny_encoder()),
        ("BCE", cases::bce_loss()),
        ("NT-Xent", cases::ntxent_loss()),
    ];
    let pass = checks.iter().all(|(_, c)| c.passes());
    let detail = checks
        .iter()
        .map(|(n, c)| format!("{n} {:.1e} ({} probes)", c.max_rel_err, c.checked))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(pass, format!("h = {:e}, max rel err < {:e}: {detail}", common::FD_STEP, common::FD_MAX_REL_ERR))
}

fn c6_lrp() -> Outcome {
    let cfg = EncoderConfig { rep_dim: 16, ..EncoderConfig::desk() };
    let mut encoder = Encoder::<f32>::new(cfg, 6).unwrap();
    encoder.zero_biases();
    let mut head = LinearHead::<f32>::new(16, 1, 6);
    head.zero_bias();
    let model = DownstreamModel { rep: RepModel::Encoder { encoder, task: None }, head };
    let mut r = rng(6);
    let mut worst = 0.0f64;
    for i in 0..LRP_SEGMENTS {
        let s = random_segment(&mut r, SEGMENT_LEN, i);
        let map = lrp(&model, &s, LrpRule::Zero).unwrap();
        worst = worst.max(map.residual().abs() / map.output_logit.abs());
    }
    outcome(
        worst < LRP_MAX_REL_RESIDUAL,
        format!("{LRP_SEGMENTS} segments, max |sum R - logit| / |logit| = {worst:.2e} (tol {LRP_MAX_REL_RESIDUAL:e})"),
    )
}

fn tiny_encoder_config() -> EncoderConfig {
    EncoderConfig { stages: 2, base_width: 2, blocks_per_stage: 1, kernel: 3, rep_dim: 8, stem_stride: 4, ..EncoderConfig::default() }
}

/// Report JSON with the timestamp zeroed, as bytes.
fn report_bytes(mut r: MetricsReport) -> Vec<u8> {
    r.timestamp = 0;
    r.to_json().unwrap().into_bytes()
}

/// Every training pipeline run twice on the same seeds; reports and
/// checkpoints must agree byte for byte.
fn determinism_failures(data: &[LabeledSegment], test: &[LabeledSegment]) -> Vec<String> {
    let segs: Vec<Segment> = data.iter().map(|l| l.segment.clone()).collect();
    let test_segs: Vec<Segment> = test.iter().map(|l| l.segment.clone()).collect();
    let y: Vec<u8> = test.iter().filter_map(|l| l.label.target()).collect();
    let outputs = |m: &DownstreamModel| {
        let scores = m.scores(&test_segs).unwrap();
        let echo = RunEcho { task: m.rep.name(), d: m.rep.dim(), n_train: data.len(), seed: 5 };
        [report_bytes(MetricsReport::evaluate(&scores, &y, echo).unwrap()), m.to_checkpoint().to_bytes().unwrap()]
    };
    let ft = |mode| FinetuneConfig { epochs: 2, batch: 8, ..FinetuneConfig::new(mode, 5) };
    let run = |name: &str| -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        let rep = match name {
            "scratch" => {
                out.extend(outputs(&train_from_scratch(data, tiny_encoder_config(), &ft(FinetuneMode::Full)).unwrap()));
                return out;
            }
            "rp" => fit_rp(8, 5).unwrap(),
            "pca" => fit_pca(&segs, 4).unwrap(),
            _ => {
                let task: PretrainTask = name.parse().unwrap();
                let cfg = PretrainConfig { epochs: 1, batch: 8, ..PretrainConfig::new(task, tiny_encoder_config(), 5) };
                pretrain(&segs, &cfg).unwrap().model
            }
        };
        out.push(rep.to_checkpoint().to_bytes().unwrap());
        out.extend(outputs(&finetune(&rep, data, &ft(FinetuneMode::LinearProbe)).unwrap()));
        if matches!(rep, RepModel::Encoder { .. }) {
            out.extend(outputs(&finetune(&rep, data, &ft(FinetuneMode::Full)).unwrap()));
        }
        out
    };
    ["ts", "temporal", "spatial", "simclr", "ae", "rp", "pca", "scratch"]
        .into_iter()
        .filter(|name| run(name) != run(name))
        .map(String::from)
        .collect()
}

fn c7_ingest_split_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let recs = synth_corpus(4, 4, &SynthParams::default(), 7).unwrap();
    write_corpus(&recs, dir.path(), SampleFormat::F32Le).unwrap();
    let back = read_manifest(dir.path()).unwrap().load_all().unwrap();
    let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let roundtrip = recs.len() == back.len()
        && recs.iter().zip(&back).all(|(a, b)| {
            a.id == b.id && a.label == b.label && a.fs == b.fs && a.annotations == b.annotations && bits(&a.samples) == bits(&b.samples)
        });

    let data = labeled_segments(&recs, SEGMENT_LEN, DEFAULT_STRIDE).unwrap();
    let ids = |v: &[LabeledSegment]| v.iter().map(|l| l.segment.source_id.clone()).collect::<std::collections::HashSet<_>>();
    let mut leaks = 0;
    for seed in 0..20 {
        let (tr, te) = split(&data, &SplitSpec::balanced(10, seed)).unwrap();
        leaks += ids(&tr).intersection(&ids(&te)).count();
        let (tr, te) = holdout(&data, 0.25, seed).unwrap();
        leaks += ids(&tr).intersection(&ids(&te)).count();
    }

    let (train, test) = split(&data, &SplitSpec::balanced(20, 1)).unwrap();
    let failures = determinism_failures(&train, &test);
    outcome(
        roundtrip && leaks == 0 && failures.is_empty(),
        format!("round-trip bit-exact: {roundtrip}; records on both sides over 40 splits: {leaks}; non-reproducible pipelines: {failures:?}"),
    )
}

fn c8_ntxent() -> Outcome {
    let mut worst = 0.0f64;
    let mut values = Vec::new();
    for n in [2usize, 4, 8] {
        let rows = vec![vec![0.3, -1.2, 2.0, 0.7]; 2 * n];
        let mut g = Graph::<f64>::new();
        let x = g.input(Tensor::from_rows(&rows).unwrap(), false);
        let l = g.ntxent(x, 0.5).unwrap();
        let got = g.value(l).data()[0];
        worst = worst.max((got - ((2 * n - 1) as f64).ln()).abs());
        values.push(got);
    }
    outcome(
        worst <= NTXENT_TOL,
        format!("N = 2/4/8: loss {} vs ln(2N-1); max deviation {worst:.1e} (tol {NTXENT_TOL:e})", fmt_list(&values)),
    )
}

/// Corpora and pretrained encoders shared by the learning criteria.
struct Bench {
    pool: Vec<LabeledSegment>,
    test: Vec<LabeledSegment>,
    test_segs: Vec<Segment>,
    test_y: Vec<u8>,
    /// Per seed: (T-S, temporal-only, spatial-only) pretraining results.
    encoders: Vec<[tsrev::pipelines::Pretrained; 3]>,
}

fn corpus(per_class: usize, seed: u64) -> Vec<LabeledSegment> {
    let recs = synth_corpus_varied(per_class, per_class, &SynthParams::default(), &Variability::default(), seed).unwrap();
    labeled_segments(&recs, SEGMENT_LEN, DEFAULT_STRIDE).unwrap()
}

fn build_bench() -> Bench {
    let pre: Vec<Segment> = corpus(PRETRAIN_RECORDS_PER_CLASS, PRETRAIN_DATA_SEED).into_iter().map(|l| l.segment).collect();
    let pool = corpus(POOL_RECORDS_PER_CLASS, POOL_DATA_SEED);
    let mut test = corpus(TEST_RECORDS_PER_CLASS, TEST_DATA_SEED);
    test.truncate(TEST_SEGMENTS);
    let test_segs = test.iter().map(|l| l.segment.clone()).collect();
    let test_y = test.iter().filter_map(|l| l.label.target()).collect();
    let mut encoders = Vec::new();
    for &seed in &SEEDS {
        let train = |task| {
            let cfg = PretrainConfig {
                epochs: PRETRAIN_MAX_EPOCHS,
                batch: PRETRAIN_BATCH,
                lr: PRETRAIN_LR,
                stop_at_accuracy: Some(PRETRAIN_STOP_AT),
                ..PretrainConfig::new(task, EncoderConfig::desk(), seed)
            };
            let t = Instant::now();
            let p = pretrain(&pre, &cfg).unwrap();
            eprintln!(
                "  pretrained {task} seed {seed} on {} segments: {} epochs, accuracy {:.3}, {:.0}s",
                pre.len(),
                p.log.epochs.len(),
                p.log.last().and_then(|e| e.pretext_accuracy).unwrap_or(f64::NAN),
                t.elapsed().as_secs_f64()
            );
            p
        };
        encoders.push([train(PretrainTask::Ts), train(PretrainTask::TemporalOnly), train(PretrainTask::SpatialOnly)]);
    }
    Bench { pool, test, test_segs, test_y, encoders }
}

impl Bench {
    fn labels(&self, n: usize, seed: u64) -> Vec<LabeledSegment> {
        split(&self.pool, &SplitSpec::balanced(n, seed)).unwrap().0
    }

    fn auc(&self, m: &DownstreamModel) -> f64 {
        auc(&m.scores(&self.test_segs).unwrap(), &self.test_y).unwrap()
    }

    fn full(seed: u64, lr: f64) -> FinetuneConfig {
        FinetuneConfig {
            mode: FinetuneMode::Full,
            epochs: FT_EPOCHS,
            batch: FT_BATCH,
            lr,
            encoder_lr_scale: FT_ENCODER_LR_SCALE,
            seed,
        }
    }

    fn probe(seed: u64) -> FinetuneConfig {
        FinetuneConfig { mode: FinetuneMode::LinearProbe, epochs: PROBE_EPOCHS, lr: PROBE_LR, ..Self::full(seed, PROBE_LR) }
    }
}

fn c9_pretext(b: &Bench) -> Outcome {
    let acc: Vec<f64> = b.encoders.iter().map(|e| e[0].log.best_accuracy().unwrap_or(0.0)).collect();
    let epochs: Vec<usize> = b.encoders.iter().map(|e| e[0].log.epochs.len()).collect();
    let m = median(acc.clone());
    outcome(
        m > PRETEXT_MIN_ACCURACY && epochs.iter().all(|&e| e <= PRETRAIN_MAX_EPOCHS),
        format!("median held-out pretext accuracy {m:.3} (seeds {}) after {epochs:?} epochs; need > {PRETEXT_MIN_ACCURACY}", fmt_list(&acc)),
    )
}

fn c10_benefit(b: &Bench) -> Outcome {
    let (mut ts, mut scratch) = (Vec::new(), Vec::new());
    for (i, &seed) in SEEDS.iter().enumerate() {
        let labels = b.labels(FEW_LABELS, seed);
        ts.push(b.auc(&finetune(&b.encoders[i][0].model, &labels, &Bench::full(seed, FEW_LABELS_FT_LR)).unwrap()));
        scratch.push(b.auc(&train_from_scratch(&labels, EncoderConfig::desk(), &Bench::full(seed, FEW_LABELS_FT_LR)).unwrap()));
    }
    let (mt, ms) = (median(ts.clone()), median(scratch.clone()));
    outcome(
        mt >= ms + BENEFIT_MARGIN && mt >= BENEFIT_MIN_AUC,
        format!(
            "{FEW_LABELS} labels, {} test segments: T-S {mt:.3} ({}) vs scratch {ms:.3} ({}); need >= scratch + {BENEFIT_MARGIN} and >= {BENEFIT_MIN_AUC}",
            b.test.len(),
            fmt_list(&ts),
            fmt_list(&scratch)
        ),
    )
}

fn c11_ordering(b: &Bench) -> Outcome {
    let mut aucs = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    for (i, &seed) in SEEDS.iter().enumerate() {
        let labels = b.labels(BASELINE_LABELS, seed);
        for (j, p) in b.encoders[i].iter().enumerate() {
            aucs[j].push(b.auc(&finetune(&p.model, &labels, &Bench::full(seed, BASELINE_FT_LR)).unwrap()));
        }
        let rp = fit_rp(BASELINE_DIM, seed).unwrap();
        aucs[3].push(b.auc(&finetune(&rp, &labels, &Bench::probe(seed)).unwrap()));
    }
    let [ts, temporal, spatial, rp] = aucs.map(median);
    outcome(
        ts >= temporal && temporal > spatial && ts > rp,
        format!(
            "{BASELINE_LABELS} labels, d = {BASELINE_DIM}: T-S {ts:.3}, temporal {temporal:.3}, spatial {spatial:.3}, RP {rp:.3}; margins T-S - temporal {:+.3}, temporal - spatial {:+.3}, T-S - RP {:+.3}",
            ts - temporal,
            temporal - spatial,
            ts - rp
        ),
    )
}

fn c12_neighbors(b: &Bench) -> Outcome {
    let mut counts = [0usize; 2];
    let chosen: Vec<&LabeledSegment> = b
        .test
        .iter()
        .filter(|l| {
            let c = &mut counts[l.label.target().unwrap() as usize];
            *c += 1;
            *c <= NEIGHBOR_PER_CLASS
        })
        .collect();
    let segs: Vec<Segment> = chosen.iter().map(|l| l.segment.clone()).collect();
    let y: Vec<u8> = chosen.iter().map(|l| l.label.target().unwrap()).collect();
    let mut ps = Vec::new();
    for e in &b.encoders {
        let z = e[0].model.embed(&segs).unwrap();
        let reps: Vec<Vec<f64>> = z.data().chunks(z.dim(1)).map(|r| r.iter().map(|&v| v as f64).collect()).collect();
        ps.push(neighbor_study(&reps, &y, NEIGHBOR_K).unwrap().p);
    }
    let p = median(ps.clone());
    outcome(
        p < NEIGHBOR_MAX_P && y.len() == 2 * NEIGHBOR_PER_CLASS,
        format!("{} + {} segments, k = {NEIGHBOR_K}: median one-sided Welch p = {p:.2e} (seeds {}); need < {NEIGHBOR_MAX_P}", counts[1].min(NEIGHBOR_PER_CLASS), counts[0].min(NEIGHBOR_PER_CLASS), ps.iter().map(|p| format!("{p:.1e}")).collect::<Vec<_>>().join("/")),
    )
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |id: u32| only.as_ref().is_none_or(|o| o.contains(&id));

    type Check = fn() -> Outcome;
    let deterministic: [(u32, &str, Check); 8] = [
        (1, "transform involutions", c1_transforms),
        (2, "AUC vs pair counting", c2_auc),
        (3, "G-mean threshold vs exhaustive", c3_gmean),
        (4, "k-NN label means vs O(n^2)", c4_knn),
        (5, "gradient checks", c5_gradients),
        (6, "LRP conservation", c6_lrp),
        (7, "ingest, splits, determinism", c7_ingest_split_determinism),
        (8, "NT-Xent closed form", c8_ntxent),
    ];
    type Learn = fn(&Bench) -> Outcome;
    let learning: [(u32, &str, Learn); 4] = [
        (9, "pretext learnability", c9_pretext),
        (10, "downstream benefit", c10_benefit),
        (11, "baseline ordering", c11_ordering),
        (12, "neighbor study", c12_neighbors),
    ];

    let mut failed = Vec::new();
    let mut report = |id: u32, name: &str, o: Outcome, secs: f64| {
        println!("{} criterion {id:>2} {name}: {} [{secs:.1}s]", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(id);
        }
    };

    let t0 = Instant::now();
    for (id, name, f) in deterministic {
        if wanted(id) {
            let t = Instant::now();
            report(id, name, f(), t.elapsed().as_secs_f64());
        }
    }
    println!("deterministic criteria: {:.1}s", t0.elapsed().as_secs_f64());

    if learning.iter().any(|(id, ..)| wanted(*id)) {
        let t1 = Instant::now();
        let bench = build_bench();
        println!("shared pretraining: {:.1}s", t1.elapsed().as_secs_f64());
        for (id, name, f) in learning {
            if wanted(id) {
                let t = Instant::now();
                report(id, name, f(&bench), t.elapsed().as_secs_f64());
            }
        }
        println!("learning criteria: {:.1}s", t1.elapsed().as_secs_f64());
    }

    if failed.is_empty() {
        println!("acceptance: all selected criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
