//! Parametric synthetic ECG: per-beat Gaussian bumps (P, Q, R, S, T) at
//! jittered beat times, plus fibrillatory waves and white noise for AF.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::signal::{EcgRecord, Label, DEFAULT_FS};

/// Lower bound on annotated RR variability for AF records.
pub const AF_MIN_RR_CV: f64 = 0.15;
const NORMAL_RR_CV: f64 = 0.03;
const AF_RR_CV: f64 = 0.25;
const NORMAL_P_AMP: f64 = 0.15;
const AF_FWAVE_AMP: f64 = 0.05;
const NORMAL_AR_COEF: f64 = 0.8;
const MIN_RR_S: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    /// Centre relative to the R peak, seconds.
    pub offset_s: f64,
    /// Amplitude relative to the R wave.
    pub amp: f64,
    /// Gaussian standard deviation, seconds.
    pub width_s: f64,
}

/// Beat morphology. The P amplitude is taken from [`SynthParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeatShape {
    pub p_offset_s: f64,
    pub p_width_s: f64,
    pub q: Bump,
    pub r: Bump,
    pub s: Bump,
    pub t: Bump,
}

impl Default for BeatShape {
    fn default() -> Self {
        BeatShape {
            p_offset_s: -0.17,
            p_width_s: 0.022,
            q: Bump { offset_s: -0.035, amp: -0.12, width_s: 0.010 },
            r: Bump { offset_s: 0.0, amp: 1.0, width_s: 0.011 },
            s: Bump { offset_s: 0.035, amp: -0.22, width_s: 0.011 },
            t: Bump { offset_s: 0.27, amp: 0.30, width_s: 0.045 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RhythmKind {
    Normal,
    #[serde(rename = "AF")]
    Af,
}

impl RhythmKind {
    pub fn label(self) -> Label {
        match self {
            RhythmKind::Normal => Label::Normal,
            RhythmKind::Af => Label::Af,
        }
    }
}

/// Generator parameters. `None` for `rr_cv`, `p_amp` and `fwave_amp`
/// selects the per-kind default (Normal 0.03 / 0.15 / 0, AF 0.25 / 0 / 0.05).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub fs: u32,
    pub duration_s: f64,
    pub mean_hr_bpm: f64,
    pub rr_cv: Option<f64>,
    pub p_amp: Option<f64>,
    pub fwave_amp: Option<f64>,
    pub fwave_hz: f64,
    pub noise_amp: f64,
    /// Sinusoidal baseline wander amplitude and frequency.
    #[serde(default)]
    pub wander_amp: f64,
    #[serde(default = "default_wander_hz")]
    pub wander_hz: f64,
    pub seed: u64,
    pub shape: BeatShape,
}

fn default_wander_hz() -> f64 {
    0.25
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            fs: DEFAULT_FS,
            duration_s: 30.0,
            mean_hr_bpm: 70.0,
            rr_cv: None,
            p_amp: None,
            fwave_amp: None,
            fwave_hz: 6.0,
            noise_amp: 0.01,
            wander_amp: 0.0,
            wander_hz: default_wander_hz(),
            seed: 0,
            shape: BeatShape::default(),
        }
    }
}

/// Concrete per-kind values after defaults and AF constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolved {
    pub rr_cv: f64,
    pub p_amp: f64,
    pub fwave_amp: f64,
}

impl SynthParams {
    pub fn with_seed(&self, seed: u64) -> Self {
        SynthParams { seed, ..self.clone() }
    }

    pub fn resolve(&self, kind: RhythmKind) -> Resolved {
        match kind {
            RhythmKind::Normal => Resolved {
                rr_cv: self.rr_cv.unwrap_or(NORMAL_RR_CV),
                p_amp: self.p_amp.unwrap_or(NORMAL_P_AMP),
                fwave_amp: self.fwave_amp.unwrap_or(0.0),
            },
            RhythmKind::Af => Resolved {
                rr_cv: self.rr_cv.unwrap_or(AF_RR_CV).max(AF_MIN_RR_CV),
                p_amp: 0.0,
                fwave_amp: match self.fwave_amp {
                    Some(a) if a > 0.0 => a,
                    _ => AF_FWAVE_AMP,
                },
            },
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.fs > 0
            && self.duration_s > 0.0
            && self.mean_hr_bpm > 0.0
            && self.fwave_hz >= 0.0
            && self.noise_amp >= 0.0
            && self.wander_amp >= 0.0
            && self.wander_hz >= 0.0
            && [self.rr_cv, self.p_amp, self.fwave_amp]
                .iter()
                .all(|v| v.is_none_or(|v| v >= 0.0 && v.is_finite()));
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid synth parameters: {self:?}")))
        }
    }
}

pub(crate) fn coefficient_of_variation(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    var.sqrt() / mean
}

/// RR intervals between consecutive annotated beats.
pub fn annotated_rr(record: &EcgRecord) -> Vec<f64> {
    record
        .annotations
        .as_deref()
        .unwrap_or_default()
        .windows(2)
        .map(|w| w[1] - w[0])
        .collect()
}

fn beat_times(first: f64, rr: &[f64]) -> Vec<f64> {
    let mut times = Vec::with_capacity(rr.len() + 1);
    let mut t = first;
    times.push(t);
    for &r in rr {
        t += r;
        times.push(t);
    }
    times
}

fn in_record(times: &[f64], duration: f64) -> Vec<f64> {
    times.iter().copied().filter(|t| (0.0..duration).contains(t)).collect()
}

pub fn synth_record(kind: RhythmKind, params: &SynthParams) -> Result<EcgRecord> {
    params.validate()?;
    let mean_rr = 60.0 / params.mean_hr_bpm;
    if params.duration_s < mean_rr {
        return Err(Error::InvalidParameter(format!(
            "duration {} s is shorter than one beat ({mean_rr:.3} s)",
            params.duration_s
        )));
    }
    let res = params.resolve(kind);
    let mut rng = rng::rng(params.seed);

    // Log-normal multiplicative RR jitter with the requested CV.
    let sigma = (1.0 + res.rr_cv * res.rr_cv).ln().sqrt();
    let n_beats = ((params.duration_s + 2.0) / (mean_rr * 0.5)).ceil() as usize + 4;
    let mut eps_prev: f64 = 0.0;
    let mut rr: Vec<f64> = (0..n_beats)
        .map(|i| {
            let eta: f64 = StandardNormal.sample(&mut rng);
            let eps = match kind {
                RhythmKind::Af => eta,
                RhythmKind::Normal if i == 0 => eta,
                RhythmKind::Normal => {
                    NORMAL_AR_COEF * eps_prev + (1.0 - NORMAL_AR_COEF * NORMAL_AR_COEF).sqrt() * eta
                }
            };
            eps_prev = eps;
            (mean_rr * (sigma * eps - 0.5 * sigma * sigma).exp()).max(MIN_RR_S)
        })
        .collect();
    let first = rng.random_range(0.0..mean_rr) - mean_rr;
    let fwave_phase = rng.random_range(0.0..std::f64::consts::TAU);
    let wander_phase = rng.random_range(0.0..std::f64::consts::TAU);

    let mut times = beat_times(first, &rr);
    if kind == RhythmKind::Af {
        // Sample CV over a short record can fall under the floor; stretch
        // deviations about the mean until the annotated intervals clear it.
        for _ in 0..16 {
            let annotated = in_record(&times, params.duration_s);
            let intervals: Vec<f64> = annotated.windows(2).map(|w| w[1] - w[0]).collect();
            let cv = coefficient_of_variation(&intervals);
            if intervals.len() < 2 || cv >= AF_MIN_RR_CV * 1.001 {
                break;
            }
            let mean = intervals.iter().sum::<f64>() / intervals.len() as f64;
            let factor = if cv > 1e-9 { AF_MIN_RR_CV * 1.02 / cv } else { 2.0 };
            for r in rr.iter_mut() {
                *r = (mean + (*r - mean) * factor).max(MIN_RR_S);
            }
            times = beat_times(first, &rr);
        }
    }
    let annotations = in_record(&times, params.duration_s);
    if annotations.is_empty() {
        return Err(Error::InvalidParameter("no beat falls inside the record".into()));
    }

    let fs = params.fs as f64;
    let n = (params.duration_s * fs).round() as usize;
    let mut signal = vec![0.0f64; n];
    let shape = &params.shape;
    let bumps = [
        Bump { offset_s: shape.p_offset_s, amp: res.p_amp, width_s: shape.p_width_s },
        shape.q,
        shape.r,
        shape.s,
        shape.t,
    ];
    for &tb in times.iter().filter(|&&t| t < params.duration_s + 1.0) {
        for b in bumps.iter().filter(|b| b.amp != 0.0) {
            let centre = tb + b.offset_s;
            let reach = 5.0 * b.width_s;
            let lo = ((centre - reach) * fs).floor().max(0.0) as usize;
            let hi = (((centre + reach) * fs).ceil().max(0.0) as usize).min(n);
            for (i, v) in signal.iter_mut().enumerate().take(hi).skip(lo) {
                let dt = i as f64 / fs - centre;
                *v += b.amp * (-0.5 * dt * dt / (b.width_s * b.width_s)).exp();
            }
        }
    }
    if res.fwave_amp > 0.0 {
        let w = std::f64::consts::TAU * params.fwave_hz;
        for (i, v) in signal.iter_mut().enumerate() {
            *v += res.fwave_amp * (w * i as f64 / fs + fwave_phase).sin();
        }
    }
    if params.wander_amp > 0.0 {
        let w = std::f64::consts::TAU * params.wander_hz;
        for (i, v) in signal.iter_mut().enumerate() {
            *v += params.wander_amp * (w * i as f64 / fs + wander_phase).sin();
        }
    }
    if params.noise_amp > 0.0 {
        for v in signal.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += params.noise_amp * z;
        }
    }

    let id = format!("{}{:016x}", if kind == RhythmKind::Af { "A" } else { "N" }, params.seed);
    EcgRecord::new(id, params.fs, signal.into_iter().map(|v| v as f32).collect(), kind.label())?
        .with_annotations(annotations)
}

/// `n_normal` Normal records followed by `n_af` AF records, each with its
/// own seed derived from `seed`.
pub fn synth_corpus(
    n_normal: usize,
    n_af: usize,
    params: &SynthParams,
    seed: u64,
) -> Result<Vec<EcgRecord>> {
    let kinds = std::iter::repeat_n(RhythmKind::Normal, n_normal)
        .chain(std::iter::repeat_n(RhythmKind::Af, n_af));
    kinds
        .enumerate()
        .map(|(i, kind)| {
            let mut rec = synth_record(kind, &params.with_seed(rng::indexed_seed(seed, i as u64)))?;
            let prefix = if kind == RhythmKind::Af { "A" } else { "N" };
            rec.id = format!("{prefix}{i:05}");
            Ok(rec)
        })
        .collect()
}

/// Ranges from which each record of a varied corpus draws its own
/// generator parameters. Amplitudes and widths of the Q, R, S and T
/// bumps are scaled by independent factors in `1 ± shape_jitter`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variability {
    pub hr_bpm: (f64, f64),
    pub normal_rr_cv: (f64, f64),
    pub af_rr_cv: (f64, f64),
    pub p_amp: (f64, f64),
    pub fwave_amp: (f64, f64),
    pub noise_amp: (f64, f64),
    pub wander_amp: (f64, f64),
    pub shape_jitter: f64,
}

impl Default for Variability {
    fn default() -> Self {
        Variability {
            hr_bpm: (55.0, 110.0),
            normal_rr_cv: (0.02, 0.08),
            af_rr_cv: (AF_MIN_RR_CV, 0.30),
            p_amp: (0.08, 0.25),
            fwave_amp: (0.02, 0.05),
            noise_amp: (0.01, 0.04),
            wander_amp: (0.0, 0.3),
            shape_jitter: 0.4,
        }
    }
}

fn draw(rng: &mut rng::Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

impl Variability {
    /// Parameters for one record of the given kind.
    pub fn sample(&self, kind: RhythmKind, base: &SynthParams, seed: u64) -> SynthParams {
        let mut rng = rng::named_rng(seed, "variability");
        let mut p = base.with_seed(seed);
        p.mean_hr_bpm = draw(&mut rng, self.hr_bpm);
        match kind {
            RhythmKind::Normal => {
                p.rr_cv = Some(draw(&mut rng, self.normal_rr_cv));
                p.p_amp = Some(draw(&mut rng, self.p_amp));
            }
            RhythmKind::Af => {
                p.rr_cv = Some(draw(&mut rng, self.af_rr_cv));
                p.fwave_amp = Some(draw(&mut rng, self.fwave_amp));
            }
        }
        p.noise_amp = draw(&mut rng, self.noise_amp);
        p.wander_amp = draw(&mut rng, self.wander_amp);
        p.wander_hz = draw(&mut rng, (0.1, 0.5));
        let j = self.shape_jitter.clamp(0.0, 0.95);
        for b in [&mut p.shape.q, &mut p.shape.r, &mut p.shape.s, &mut p.shape.t] {
            b.amp *= draw(&mut rng, (1.0 - j, 1.0 + j));
            b.width_s *= draw(&mut rng, (1.0 - j / 2.0, 1.0 + j / 2.0));
        }
        p
    }
}

/// Like [`synth_corpus`], but every record draws heart rate, rhythm
/// variability, wave amplitudes, noise and baseline wander from `var`.
pub fn synth_corpus_varied(
    n_normal: usize,
    n_af: usize,
    params: &SynthParams,
    var: &Variability,
    seed: u64,
) -> Result<Vec<EcgRecord>> {
    let kinds = std::iter::repeat_n(RhythmKind::Normal, n_normal)
        .chain(std::iter::repeat_n(RhythmKind::Af, n_af));
    kinds
        .enumerate()
        .map(|(i, kind)| {
            let p = var.sample(kind, params, rng::indexed_seed(seed, i as u64));
            let mut rec = synth_record(kind, &p)?;
            let prefix = if kind == RhythmKind::Af { "A" } else { "N" };
            rec.id = format!("{prefix}{i:05}");
            Ok(rec)
        })
        .collect()
}
