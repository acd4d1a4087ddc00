use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

use tsrev::eval::{neighbor_study, project_2d, write_points_csv, MetricsReport, RunEcho};
use tsrev::ingest::{self, holdout, read_manifest, write_corpus, SampleFormat, SplitSpec};
use tsrev::interpret::{heatmap_export, heatmap_svg, lrp, peak_focus, peaks_in_segment, PeakFocus};
use tsrev::nn::{Checkpoint, EncoderConfig};
use tsrev::pipelines::{
    finetune, fit_pca, fit_rp, pretrain, train_from_scratch, DownstreamModel, FinetuneConfig, FinetuneMode,
    PretrainConfig, PretrainTask, RepKind, RepModel,
};
use tsrev::signal::{labeled_segments, record_segments, DEFAULT_STRIDE};
use tsrev::synth::{synth_corpus, synth_corpus_varied, SynthParams, Variability};
use tsrev::{LabeledSegment, Segment, SEGMENT_LEN};

use crate::args::*;

pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

/// Half-width of the window around annotated beats used for peak focus, in seconds.
const PEAK_HALF_WINDOW_S: f64 = 0.05;

/// Arguments that are individually valid but contradict each other or a model.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// The record-level holdout a model was trained against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Holdout {
    seed: u64,
    test_fraction: f64,
}

impl Holdout {
    fn apply(self, data: &[LabeledSegment]) -> Result<(Vec<LabeledSegment>, Vec<LabeledSegment>)> {
        Ok(holdout(data, self.test_fraction, self.seed)?)
    }
}

fn fresh_holdout(args: &SplitArgs, seed: u64) -> Holdout {
    Holdout {
        seed: args.split_seed.unwrap_or(seed),
        test_fraction: args.test_fraction.unwrap_or(DEFAULT_TEST_FRACTION),
    }
}

/// The model's recorded holdout; explicit flags may only repeat it.
fn recorded_holdout(args: &SplitArgs, ck: &Checkpoint) -> Result<Holdout> {
    let Some(rec) = serde_json::from_value::<Option<Holdout>>(ck.meta["split"].clone())? else {
        return Ok(fresh_holdout(args, 0));
    };
    if let Some(s) = args.split_seed.filter(|&s| s != rec.seed) {
        bail!(usage(format!("model was trained against split seed {}, got --split-seed {s}", rec.seed)));
    }
    if let Some(f) = args.test_fraction.filter(|&f| f != rec.test_fraction) {
        bail!(usage(format!("model was trained against test fraction {}, got --test-fraction {f}", rec.test_fraction)));
    }
    Ok(rec)
}

fn load_corpus(dir: &Path) -> Result<Vec<LabeledSegment>> {
    let records = read_manifest(dir)?.load_all()?;
    let segs = labeled_segments(&records, SEGMENT_LEN, DEFAULT_STRIDE)?;
    if segs.is_empty() {
        bail!(tsrev::Error::InsufficientData(format!("no {SEGMENT_LEN}-sample segments in {}", dir.display())));
    }
    Ok(segs)
}

fn labeled_only(data: Vec<LabeledSegment>) -> Vec<LabeledSegment> {
    data.into_iter().filter(|l| l.label.target().is_some()).collect()
}

fn segments_of(data: &[LabeledSegment]) -> Vec<Segment> {
    data.iter().map(|l| l.segment.clone()).collect()
}

fn targets_of(data: &[LabeledSegment]) -> Vec<u8> {
    data.iter().filter_map(|l| l.label.target()).collect()
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(p) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))?;
    }
    Ok(())
}

fn write_echo(cmd: &Command, path: &Path) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, serde_json::to_string_pretty(cmd)? + "\n").map_err(tsrev::Error::from)?;
    Ok(())
}

fn save(ck: &Checkpoint, path: &Path) -> Result<()> {
    ensure_parent(path)?;
    Ok(ck.save(path)?)
}

fn with_run_meta(mut ck: Checkpoint, split: Holdout, extra: serde_json::Value) -> Checkpoint {
    ck.meta["split"] = json!(split);
    if let (Some(obj), Some(extra)) = (ck.meta.as_object_mut(), extra.as_object()) {
        obj.extend(extra.clone());
    }
    ck
}

pub fn run(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(cmd, a),
        Command::Pretrain(a) => pretrain_cmd(cmd, a),
        Command::Baseline(a) => baseline(cmd, a),
        Command::Finetune(a) => finetune_cmd(cmd, a),
        Command::Scratch(a) => scratch(cmd, a),
        Command::Evaluate(a) => evaluate(cmd, a),
        Command::Sweep(a) => sweep(cmd, a),
        Command::Interpret(a) => interpret(cmd, a),
        Command::Neighbors(a) => neighbors(cmd, a),
        Command::Project2d(a) => project2d(cmd, a),
        Command::Replay(a) => {
            let text = fs::read_to_string(&a.config).map_err(tsrev::Error::from)?;
            let cmd: Command = serde_json::from_str(&text)
                .map_err(|e| usage(format!("{}: not a config echo: {e}", a.config.display())))?;
            run(&cmd)
        }
    }
}

fn synth(cmd: &Command, a: &SynthArgs) -> Result<()> {
    let params = SynthParams { fs: a.fs, duration_s: a.duration, ..SynthParams::default() };
    let records = if a.varied {
        synth_corpus_varied(a.normal, a.af, &params, &Variability::default(), a.seed)?
    } else {
        synth_corpus(a.normal, a.af, &params, a.seed)?
    };
    let format = match a.format {
        FormatArg::F32 => SampleFormat::F32Le,
        FormatArg::Text => SampleFormat::Text,
    };
    let m = write_corpus(&records, &a.out, format)?;
    write_echo(cmd, &a.out.join("config.json"))?;
    println!("wrote {} records to {}", m.len(), a.out.display());
    Ok(())
}

fn pretrain_config(task: PretrainTask, encoder: EncoderConfig, seed: u64, epochs: usize, batch: usize, lr: f64) -> PretrainConfig {
    PretrainConfig { epochs, batch, lr, ..PretrainConfig::new(task, encoder, seed) }
}

fn pretrain_cmd(cmd: &Command, a: &PretrainArgs) -> Result<()> {
    let split = fresh_holdout(&a.split, a.seed);
    let (train, _) = split.apply(&load_corpus(&a.data)?)?;
    let cfg = PretrainConfig {
        head: a.head.into(),
        tau: a.tau,
        stop_at_accuracy: a.stop_at_accuracy,
        ..pretrain_config(a.task.into(), a.arch.config(a.dim), a.seed, a.epochs, a.batch, a.lr)
    };
    let p = pretrain(&segments_of(&train), &cfg)?;
    let ck = with_run_meta(p.model.to_checkpoint(), split, json!({ "pretrain": cfg }));
    save(&ck, &a.out)?;
    let log = a.log.clone().unwrap_or_else(|| sidecar(&a.out, ".log.csv"));
    ensure_parent(&log)?;
    p.log.write_csv(&log)?;
    write_echo(cmd, &sidecar(&a.out, ".config.json"))?;
    for e in &p.log.epochs {
        match e.pretext_accuracy {
            Some(acc) => println!("epoch {:>3}  loss {:.5}  pretext accuracy {acc:.4}", e.epoch, e.loss),
            None => println!("epoch {:>3}  loss {:.5}", e.epoch, e.loss),
        }
    }
    println!("saved {} encoder (d={}) to {}", cfg.task, p.model.dim(), a.out.display());
    Ok(())
}

fn baseline(cmd: &Command, a: &BaselineArgs) -> Result<()> {
    let split = fresh_holdout(&a.split, a.seed);
    let model = match a.method {
        MethodArg::Rp => fit_rp(a.dim, a.seed)?,
        MethodArg::Pca => {
            let (train, _) = split.apply(&load_corpus(&a.data)?)?;
            fit_pca(&segments_of(&train), a.dim)?
        }
    };
    save(&with_run_meta(model.to_checkpoint(), split, json!({})), &a.out)?;
    write_echo(cmd, &sidecar(&a.out, ".config.json"))?;
    println!("saved {} baseline (d={}) to {}", model.name(), model.dim(), a.out.display());
    Ok(())
}

fn sample_train(pool: Vec<LabeledSegment>, n: usize, balanced: bool, seed: u64) -> Result<Vec<LabeledSegment>> {
    let spec = if balanced { SplitSpec::balanced(n, seed) } else { SplitSpec::new(n, seed) };
    Ok(ingest::split(&labeled_only(pool), &spec)?.0)
}

fn finetune_config(mode: FinetuneMode, t: &TrainArgs, seed: u64) -> FinetuneConfig {
    FinetuneConfig { epochs: t.epochs, batch: t.batch, lr: t.lr, ..FinetuneConfig::new(mode, seed) }
}

fn downstream_meta(model: &DownstreamModel, n_train: usize, seed: u64, split: Holdout, cfg: &FinetuneConfig) -> Checkpoint {
    with_run_meta(
        model.to_checkpoint(),
        split,
        json!({ "run": { "task": model.rep.name(), "n_train": n_train, "seed": seed }, "finetune": cfg }),
    )
}

fn finetune_cmd(cmd: &Command, a: &FinetuneArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.model)?;
    let rep = RepModel::from_checkpoint(&ck)?;
    let split = recorded_holdout(&a.split, &ck)?;
    let mode: FinetuneMode = a.mode.into();
    if mode == FinetuneMode::Full && rep.kind() != RepKind::Encoder {
        bail!(usage(format!("{} representations are fixed; use --mode linear", rep.name())));
    }
    let (pool, _) = split.apply(&load_corpus(&a.data)?)?;
    let train = sample_train(pool, a.n_train, a.balanced, a.seed)?;
    let cfg = FinetuneConfig { encoder_lr_scale: a.encoder_lr_scale, ..finetune_config(mode, &a.train, a.seed) };
    let model = finetune(&rep, &train, &cfg)?;
    save(&downstream_meta(&model, train.len(), a.seed, split, &cfg), &a.out)?;
    write_echo(cmd, &sidecar(&a.out, ".config.json"))?;
    println!("fine-tuned {} on {} segments, saved to {}", rep.name(), train.len(), a.out.display());
    Ok(())
}

fn scratch(cmd: &Command, a: &ScratchArgs) -> Result<()> {
    let split = fresh_holdout(&a.split, a.seed);
    let (pool, _) = split.apply(&load_corpus(&a.data)?)?;
    let train = sample_train(pool, a.n_train, a.balanced, a.seed)?;
    let cfg = finetune_config(FinetuneMode::Full, &a.train, a.seed);
    let model = train_from_scratch(&train, a.arch.config(a.dim), &cfg)?;
    save(&downstream_meta(&model, train.len(), a.seed, split, &cfg), &a.out)?;
    write_echo(cmd, &sidecar(&a.out, ".config.json"))?;
    println!("trained from scratch on {} segments, saved to {}", train.len(), a.out.display());
    Ok(())
}

fn report_for(model: &DownstreamModel, test: &[LabeledSegment], n_train: usize, seed: u64) -> Result<MetricsReport> {
    let scores = model.scores(&segments_of(test))?;
    let echo = RunEcho { task: model.rep.name(), d: model.rep.dim(), n_train, seed };
    Ok(MetricsReport::evaluate(&scores, &targets_of(test), echo)?)
}

fn evaluate(cmd: &Command, a: &EvaluateArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.model)?;
    let model = DownstreamModel::from_checkpoint(&ck)?;
    let split = recorded_holdout(&a.split, &ck)?;
    let (_, test) = split.apply(&load_corpus(&a.data)?)?;
    let test = labeled_only(test);
    let run = &ck.meta["run"];
    let n_train = run["n_train"].as_u64().unwrap_or(0) as usize;
    let seed = run["seed"].as_u64().unwrap_or(split.seed);
    let report = report_for(&model, &test, n_train, seed)?;
    ensure_parent(&a.report)?;
    report.write(&a.report)?;
    write_echo(cmd, &sidecar(&a.report, ".config.json"))?;
    println!(
        "AUC {:.4}  sensitivity {:.4}  specificity {:.4}  accuracy {:.4}  threshold {:.4}  (n_test {})",
        report.auc, report.sensitivity, report.specificity, report.accuracy, report.threshold, report.n_test
    );
    Ok(())
}

enum SweepTask {
    Pretext(PretrainTask),
    Rp,
    Pca,
    Scratch,
}

fn parse_sweep_task(s: &str) -> Result<SweepTask> {
    Ok(match s {
        "rp" => SweepTask::Rp,
        "pca" => SweepTask::Pca,
        "scratch" => SweepTask::Scratch,
        other => SweepTask::Pretext(
            other
                .parse::<PretrainTask>()
                .map_err(|_| usage(format!("unknown sweep task `{other}`")))?,
        ),
    })
}

fn sweep(cmd: &Command, a: &SweepArgs) -> Result<()> {
    let tasks = a.tasks.iter().map(|t| parse_sweep_task(t)).collect::<Result<Vec<_>>>()?;
    if a.dims.is_empty() || a.n_train.is_empty() || a.seeds == 0 {
        bail!(usage("sweep grid is empty"));
    }
    let data = load_corpus(&a.data)?;
    fs::create_dir_all(&a.out).map_err(tsrev::Error::from)?;
    write_echo(cmd, &a.out.join("config.json"))?;
    let mut summary = String::from("task,dim,n_train,seed,auc,sens,spec,acc\n");
    for seed in a.seed..a.seed + a.seeds {
        let split = Holdout { seed, test_fraction: a.test_fraction };
        let (pool, test) = split.apply(&data)?;
        let test = labeled_only(test);
        for (name, task) in a.tasks.iter().zip(&tasks) {
            for &dim in &a.dims {
                let rep = match task {
                    SweepTask::Pretext(t) => {
                        let cfg = pretrain_config(*t, a.arch.config(dim), seed, a.pretrain_epochs, a.train.batch, a.pretrain_lr);
                        eprintln!("[sweep] pretraining {name} d={dim} seed={seed}");
                        let p = pretrain(&segments_of(&pool), &cfg)?;
                        let dir = a.out.join(name).join(format!("d{dim}")).join(format!("seed{seed}"));
                        save(&with_run_meta(p.model.to_checkpoint(), split, json!({ "pretrain": cfg })), &dir.join("model.ckpt"))?;
                        p.log.write_csv(&dir.join("pretrain_log.csv"))?;
                        Some(p.model)
                    }
                    SweepTask::Rp => Some(fit_rp(dim, seed)?),
                    SweepTask::Pca => Some(fit_pca(&segments_of(&pool), dim)?),
                    SweepTask::Scratch => None,
                };
                for &n in &a.n_train {
                    let train = sample_train(pool.clone(), n, false, seed)?;
                    let model = match &rep {
                        Some(r) => {
                            let mode = if r.kind() == RepKind::Encoder { a.mode.into() } else { FinetuneMode::LinearProbe };
                            finetune(r, &train, &finetune_config(mode, &a.train, seed))?
                        }
                        None => train_from_scratch(&train, a.arch.config(dim), &finetune_config(FinetuneMode::Full, &a.train, seed))?,
                    };
                    let report = report_for(&model, &test, train.len(), seed)?;
                    let path = a.out.join(name).join(format!("d{dim}")).join(format!("n{n}")).join(format!("seed{seed}")).join("report.json");
                    ensure_parent(&path)?;
                    report.write(&path)?;
                    eprintln!("[sweep] {name} d={dim} n={n} seed={seed}: AUC {:.4}", report.auc);
                    writeln!(
                        summary,
                        "{name},{dim},{n},{seed},{},{},{},{}",
                        report.auc, report.sensitivity, report.specificity, report.accuracy
                    )?;
                }
            }
        }
    }
    fs::write(a.out.join("summary.csv"), summary).map_err(tsrev::Error::from)?;
    println!("sweep results in {}", a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct RelevanceSummary {
    segment: String,
    label: String,
    output_logit: f64,
    total_relevance: f64,
    residual: f64,
    peak_focus: Option<PeakFocus>,
    csv: String,
}

fn interpret(cmd: &Command, a: &InterpretArgs) -> Result<()> {
    if a.epsilon.is_nan() || a.epsilon < 0.0 {
        bail!(tsrev::Error::InvalidParameter(format!("epsilon must be non-negative, got {}", a.epsilon)));
    }
    let model = DownstreamModel::load(&a.model)?;
    let manifest = read_manifest(&a.data)?;
    let rule = a.rule.rule(a.epsilon);
    fs::create_dir_all(&a.out).map_err(tsrev::Error::from)?;
    let mut summary = Vec::new();
    for id in &a.ids {
        let rec = manifest.load_record(id)?;
        let half = (PEAK_HALF_WINDOW_S * rec.fs as f64).round() as usize;
        for seg in record_segments(&rec, SEGMENT_LEN, DEFAULT_STRIDE)? {
            let map = lrp(&model, &seg, rule)?;
            let stem = format!("{}_{}", seg.source_id, seg.offset);
            let csv = a.out.join(format!("{stem}.csv"));
            heatmap_export(&map, &csv)?;
            if a.svg {
                heatmap_svg(&map, &a.out.join(format!("{stem}.svg")))?;
            }
            let focus = rec
                .annotations
                .as_deref()
                .and_then(|t| peak_focus(&map, &peaks_in_segment(t, rec.fs, seg.offset, seg.len()), half));
            summary.push(RelevanceSummary {
                segment: seg.key(),
                label: rec.label.as_str().to_string(),
                output_logit: map.output_logit,
                total_relevance: map.total(),
                residual: map.residual(),
                peak_focus: focus,
                csv: csv.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
            });
        }
    }
    fs::write(a.out.join("relevance.json"), serde_json::to_string_pretty(&summary)? + "\n").map_err(tsrev::Error::from)?;
    write_echo(cmd, &a.out.join("config.json"))?;
    for s in &summary {
        let focus = s.peak_focus.map_or(String::new(), |f| format!("  peak focus {:.3}", f.ratio));
        println!("{}  logit {:.4}  residual {:.3e}{focus}", s.segment, s.output_logit, s.residual);
    }
    Ok(())
}

/// Held-out labelled segments and their representations.
fn held_out_reps(model_path: &Path, args: &SplitArgs, data: &Path, per_class: Option<usize>) -> Result<(Vec<LabeledSegment>, Vec<Vec<f64>>)> {
    let ck = Checkpoint::load(model_path)?;
    let rep = RepModel::from_checkpoint(&ck)?;
    let split = recorded_holdout(args, &ck)?;
    let (_, test) = split.apply(&load_corpus(data)?)?;
    let mut test = labeled_only(test);
    if let Some(k) = per_class {
        let mut counts = [0usize; 2];
        test.retain(|l| {
            let c = &mut counts[l.label.target().unwrap_or(0) as usize];
            *c += 1;
            *c <= k
        });
    }
    let z = rep.embed(&segments_of(&test))?;
    let d = rep.dim();
    let reps = z.data().chunks(d).map(|r| r.iter().map(|&v| v as f64).collect()).collect();
    Ok((test, reps))
}

fn neighbors(cmd: &Command, a: &NeighborsArgs) -> Result<()> {
    let (test, reps) = held_out_reps(&a.model, &a.split, &a.data, a.per_class)?;
    let report = neighbor_study(&reps, &targets_of(&test), a.k)?;
    ensure_parent(&a.report)?;
    fs::write(&a.report, serde_json::to_string_pretty(&report)? + "\n").map_err(tsrev::Error::from)?;
    write_echo(cmd, &sidecar(&a.report, ".config.json"))?;
    println!(
        "k={}  mean AF-neighbour share: AF {:.4} (n={}), Normal {:.4} (n={})  t {:.3}  df {:.1}  p {:.3e}",
        report.k, report.mean_af, report.n_af, report.mean_normal, report.n_normal, report.t, report.df, report.p
    );
    Ok(())
}

fn project2d(cmd: &Command, a: &Project2dArgs) -> Result<()> {
    let (test, reps) = held_out_reps(&a.model, &a.split, &a.data, None)?;
    let points = project_2d(&reps)?;
    let ids: Vec<String> = test.iter().map(|l| l.segment.key()).collect();
    let labels: Vec<String> = test.iter().map(|l| l.label.as_str().to_string()).collect();
    ensure_parent(&a.out)?;
    write_points_csv(&a.out, &ids, &labels, &points)?;
    write_echo(cmd, &sidecar(&a.out, ".config.json"))?;
    println!("wrote {} points to {}", points.len(), a.out.display());
    Ok(())
}
