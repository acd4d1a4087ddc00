//! Recordings, fixed-length segments, sliding-window segmentation and
//! min-max normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples per segment (10 s at 300 Hz).
pub const SEGMENT_LEN: usize = 3000;
/// Default sliding-window stride (5 s at 300 Hz).
pub const DEFAULT_STRIDE: usize = 1500;
pub const DEFAULT_FS: u32 = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Normal,
    #[serde(rename = "AF")]
    Af,
    Unlabeled,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Normal => "Normal",
            Label::Af => "AF",
            Label::Unlabeled => "Unlabeled",
        }
    }

    /// Downstream target: AF is the positive class.
    pub fn target(self) -> Option<u8> {
        match self {
            Label::Normal => Some(0),
            Label::Af => Some(1),
            Label::Unlabeled => None,
        }
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "Normal" | "N" => Ok(Label::Normal),
            "AF" | "A" => Ok(Label::Af),
            "Unlabeled" | "" => Ok(Label::Unlabeled),
            other => Err(Error::Manifest(format!("unknown label `{other}`"))),
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A raw single-lead recording.
#[derive(Debug, Clone, PartialEq)]
pub struct EcgRecord {
    pub id: String,
    pub fs: u32,
    pub samples: Vec<f32>,
    pub label: Label,
    /// Ground-truth R-peak times in seconds, when known.
    pub annotations: Option<Vec<f64>>,
}

impl EcgRecord {
    pub fn new(id: impl Into<String>, fs: u32, samples: Vec<f32>, label: Label) -> Result<Self> {
        let rec = EcgRecord {
            id: id.into(),
            fs,
            samples,
            label,
            annotations: None,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn with_annotations(mut self, times: Vec<f64>) -> Result<Self> {
        self.annotations = Some(times);
        self.validate()?;
        Ok(self)
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.fs as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.fs == 0 {
            return Err(Error::InvalidParameter(format!("{}: fs must be positive", self.id)));
        }
        if self.samples.is_empty() {
            return Err(Error::InvalidParameter(format!("{}: no samples", self.id)));
        }
        if let Some(times) = &self.annotations {
            let dur = self.duration_s();
            let increasing = times.windows(2).all(|w| w[0] < w[1]);
            let in_range = times.iter().all(|&t| (0.0..dur).contains(&t));
            if !increasing || !in_range {
                return Err(Error::InvalidParameter(format!(
                    "{}: annotations must be strictly increasing within [0, {dur})",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// A pre-normalization slice of a record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawWindow<'a> {
    pub offset: usize,
    pub samples: &'a [f32],
}

/// A normalized fixed-length window. Carries no class label; labelled
/// data is wrapped in [`LabeledSegment`].
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    samples: Vec<f32>,
    pub source_id: String,
    pub offset: usize,
    degenerate: bool,
}

impl Segment {
    /// Wraps already-normalized values. Values must lie in [0, 1].
    pub fn from_normalized(
        samples: Vec<f32>,
        source_id: impl Into<String>,
        offset: usize,
    ) -> Result<Self> {
        if samples.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter("segment values must lie in [0, 1]".into()));
        }
        let (lo, hi) = min_max(&samples);
        Ok(Segment {
            degenerate: samples.is_empty() || lo == hi,
            samples,
            source_id: source_id.into(),
            offset,
        })
    }

    pub(crate) fn from_parts(
        samples: Vec<f32>,
        source_id: String,
        offset: usize,
        degenerate: bool,
    ) -> Self {
        Segment {
            samples,
            source_id,
            offset,
            degenerate,
        }
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// True when the source window was constant.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// `source_id@offset`, unique within a corpus.
    pub fn key(&self) -> String {
        format!("{}@{}", self.source_id, self.offset)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSegment {
    pub segment: Segment,
    pub label: Label,
}

pub(crate) fn min_max(xs: &[f32]) -> (f32, f32) {
    xs.iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Sliding windows of `window` samples every `stride` samples. Trailing
/// windows that would run past the end are dropped.
pub fn segment(record: &EcgRecord, window: usize, stride: usize) -> Result<Vec<RawWindow<'_>>> {
    if window == 0 || stride == 0 {
        return Err(Error::InvalidParameter("window and stride must be positive".into()));
    }
    let n = record.samples.len();
    if n < window {
        return Ok(Vec::new());
    }
    Ok((0..=(n - window))
        .step_by(stride)
        .map(|offset| RawWindow {
            offset,
            samples: &record.samples[offset..offset + window],
        })
        .collect())
}

/// Min-max normalization to [0, 1]. A constant window maps to all zeros
/// and is flagged degenerate.
pub fn normalize(samples: &[f32], source_id: &str, offset: usize) -> Segment {
    let (lo, hi) = min_max(samples);
    if samples.is_empty() || !(hi > lo) {
        return Segment::from_parts(vec![0.0; samples.len()], source_id.to_owned(), offset, true);
    }
    let lo = lo as f64;
    let span = hi as f64 - lo;
    let out = samples
        .iter()
        .map(|&v| (((v as f64 - lo) / span) as f32).clamp(0.0, 1.0))
        .collect();
    Segment::from_parts(out, source_id.to_owned(), offset, false)
}

pub fn normalize_window(w: &RawWindow<'_>, source_id: &str) -> Segment {
    normalize(w.samples, source_id, w.offset)
}

/// Segments and normalizes a record, dropping degenerate windows.
pub fn record_segments(record: &EcgRecord, window: usize, stride: usize) -> Result<Vec<Segment>> {
    Ok(segment(record, window, stride)?
        .iter()
        .map(|w| normalize_window(w, &record.id))
        .filter(|s| !s.is_degenerate())
        .collect())
}

pub fn labeled_segments(
    records: &[EcgRecord],
    window: usize,
    stride: usize,
) -> Result<Vec<LabeledSegment>> {
    let mut out = Vec::new();
    for rec in records {
        for segment in record_segments(rec, window, stride)? {
            out.push(LabeledSegment {
                segment,
                label: rec.label,
            });
        }
    }
    Ok(out)
}
