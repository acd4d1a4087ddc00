//! Temporal, spatial and temporal-spatial reverses, pretext-set
//! construction, and the two contrastive augmentations.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::signal::{min_max, Segment};

/// Pretext target code `[spatial, temporal]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReverseLabel {
    pub spatial: bool,
    pub temporal: bool,
}

impl ReverseLabel {
    pub const ORIGINAL: Self = Self::new(false, false);
    pub const TEMPORAL: Self = Self::new(false, true);
    pub const SPATIAL: Self = Self::new(true, false);
    pub const BOTH: Self = Self::new(true, true);
    pub const ALL: [Self; 4] = [Self::ORIGINAL, Self::TEMPORAL, Self::SPATIAL, Self::BOTH];

    pub const fn new(spatial: bool, temporal: bool) -> Self {
        ReverseLabel { spatial, temporal }
    }

    pub fn bits(self) -> [u8; 2] {
        [self.spatial as u8, self.temporal as u8]
    }

    /// Class index for the 4-way softmax head: `2 * spatial + temporal`.
    pub fn class(self) -> usize {
        2 * self.spatial as usize + self.temporal as usize
    }

    pub fn from_class(c: usize) -> Self {
        Self::new(c & 2 != 0, c & 1 != 0)
    }

    pub fn apply(self, seg: &Segment) -> Segment {
        match (self.spatial, self.temporal) {
            (false, false) => seg.clone(),
            (false, true) => temporal_reverse(seg),
            (true, false) => spatial_reverse(seg),
            (true, true) => ts_reverse(seg),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PretextMode {
    #[serde(rename = "ts")]
    Ts,
    #[serde(rename = "temporal")]
    TemporalOnly,
    #[serde(rename = "spatial")]
    SpatialOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PretextTarget {
    Reverse(ReverseLabel),
    /// 0 = original, 1 = reversed (single-axis ablations).
    Binary(bool),
}

impl PretextTarget {
    pub fn bits(self) -> Vec<f32> {
        match self {
            PretextTarget::Reverse(l) => l.bits().iter().map(|&b| b as f32).collect(),
            PretextTarget::Binary(b) => vec![u8::from(b) as f32],
        }
    }

    pub fn class(self) -> usize {
        match self {
            PretextTarget::Reverse(l) => l.class(),
            PretextTarget::Binary(b) => b as usize,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PretextExample {
    pub segment: Segment,
    pub target: PretextTarget,
}

pub fn temporal_reverse(seg: &Segment) -> Segment {
    let mut samples = seg.samples().to_vec();
    samples.reverse();
    Segment::from_parts(samples, seg.source_id.clone(), seg.offset, seg.is_degenerate())
}

/// Negate and re-normalize: `(max - x) / (max - min)`, which is `1 - x`
/// on a normalized segment.
pub fn spatial_reverse(seg: &Segment) -> Segment {
    let (lo, hi) = min_max(seg.samples());
    if seg.is_empty() || !(hi > lo) {
        return Segment::from_parts(
            vec![0.0; seg.len()],
            seg.source_id.clone(),
            seg.offset,
            true,
        );
    }
    let span = hi as f64 - lo as f64;
    let samples = seg
        .samples()
        .iter()
        .map(|&v| (((hi as f64 - v as f64) / span) as f32).clamp(0.0, 1.0))
        .collect();
    Segment::from_parts(samples, seg.source_id.clone(), seg.offset, false)
}

pub fn ts_reverse(seg: &Segment) -> Segment {
    temporal_reverse(&spatial_reverse(seg))
}

pub fn make_pretext_set(segments: &[Segment], mode: PretextMode) -> Result<Vec<PretextExample>> {
    let per = match mode {
        PretextMode::Ts => 4,
        _ => 2,
    };
    let mut out = Vec::with_capacity(segments.len() * per);
    for seg in segments {
        if seg.is_degenerate() {
            return Err(Error::DegenerateSegment(seg.key()));
        }
        match mode {
            PretextMode::Ts => out.extend(ReverseLabel::ALL.iter().map(|&l| PretextExample {
                segment: l.apply(seg),
                target: PretextTarget::Reverse(l),
            })),
            PretextMode::TemporalOnly | PretextMode::SpatialOnly => {
                let flipped = if mode == PretextMode::TemporalOnly {
                    temporal_reverse(seg)
                } else {
                    spatial_reverse(seg)
                };
                out.push(PretextExample {
                    segment: seg.clone(),
                    target: PretextTarget::Binary(false),
                });
                out.push(PretextExample {
                    segment: flipped,
                    target: PretextTarget::Binary(true),
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AugmentKind {
    Permutation,
    GaussianNoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub kind: AugmentKind,
    pub pieces: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl AugmentSpec {
    pub fn permutation(seed: u64) -> Self {
        AugmentSpec {
            kind: AugmentKind::Permutation,
            pieces: 4,
            sigma: 0.01,
            seed,
        }
    }

    pub fn noise(seed: u64) -> Self {
        AugmentSpec {
            kind: AugmentKind::GaussianNoise,
            pieces: 4,
            sigma: 0.01,
            seed,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        AugmentSpec { seed, ..self }
    }
}

pub fn augment(seg: &Segment, spec: &AugmentSpec) -> Result<Segment> {
    let mut rng = rng::rng(spec.seed);
    let n = seg.len();
    let samples = match spec.kind {
        AugmentKind::Permutation => {
            if spec.pieces < 2 || !n.is_multiple_of(spec.pieces) {
                return Err(Error::InvalidParameter(format!(
                    "permutation pieces must be >= 2 and divide {n}, got {}",
                    spec.pieces
                )));
            }
            let chunk = n / spec.pieces;
            let mut order: Vec<usize> = (0..spec.pieces).collect();
            order.shuffle(&mut rng);
            order
                .iter()
                .flat_map(|&p| seg.samples()[p * chunk..(p + 1) * chunk].iter().copied())
                .collect()
        }
        AugmentKind::GaussianNoise => {
            if !(spec.sigma > 0.0) {
                return Err(Error::InvalidParameter("noise sigma must be positive".into()));
            }
            let normal = Normal::new(0.0, spec.sigma)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?;
            seg.samples()
                .iter()
                .map(|&v| ((v as f64 + normal.sample(&mut rng)) as f32).clamp(0.0, 1.0))
                .collect()
        }
    };
    Ok(Segment::from_parts(samples, seg.source_id.clone(), seg.offset, seg.is_degenerate()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seg(v: &[f32]) -> Segment {
        Segment::from_normalized(v.to_vec(), "t", 0).unwrap()
    }

    #[test]
    fn temporal_reverses_indices() {
        let s = seg(&[0.0, 0.2, 0.6, 1.0]);
        assert_eq!(temporal_reverse(&s).samples(), &[1.0, 0.6, 0.2, 0.0]);
        let pal = seg(&[0.0, 1.0, 0.3, 1.0, 0.0]);
        assert_eq!(temporal_reverse(&pal), pal);
    }

    #[test]
    fn spatial_is_one_minus() {
        let s = seg(&[0.0, 0.25, 1.0]);
        assert_eq!(spatial_reverse(&s).samples(), &[1.0, 0.75, 0.0]);
        assert_eq!(ts_reverse(&s).samples(), &[0.0, 0.75, 1.0]);
        assert_eq!(spatial_reverse(&temporal_reverse(&s)), ts_reverse(&s));
    }

    #[test]
    fn spatial_on_degenerate_is_zero() {
        let s = seg(&[0.0; 8]);
        let r = spatial_reverse(&s);
        assert!(r.is_degenerate());
        assert!(r.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ts_pretext_has_balanced_codes() {
        let a = seg(&[0.0, 0.1, 1.0, 0.4]);
        let b = seg(&[1.0, 0.0, 0.5, 0.2]);
        let set = make_pretext_set(&[a, b], PretextMode::Ts).unwrap();
        assert_eq!(set.len(), 8);
        for code in [[0u8, 0], [0, 1], [1, 0], [1, 1]] {
            let n = set
                .iter()
                .filter(|e| matches!(e.target, PretextTarget::Reverse(l) if l.bits() == code))
                .count();
            assert_eq!(n, 2, "{code:?}");
        }
    }

    #[test]
    fn ablation_sets() {
        let segs: Vec<_> = (0..3).map(|i| seg(&[0.0, 0.1 * i as f32, 1.0])).collect();
        let t = make_pretext_set(&segs, PretextMode::TemporalOnly).unwrap();
        assert_eq!(t.len(), 6);
        assert_eq!(t.iter().filter(|e| e.target == PretextTarget::Binary(true)).count(), 3);

        let s = make_pretext_set(&segs[..1], PretextMode::SpatialOnly).unwrap();
        assert_eq!(s.len(), 2);
        let flipped = s.iter().find(|e| e.target == PretextTarget::Binary(true)).unwrap();
        for (x, y) in flipped.segment.samples().iter().zip(segs[0].samples()) {
            assert_eq!(*x, 1.0 - y);
        }
    }

    #[test]
    fn pretext_rejects_degenerate() {
        let d = seg(&[0.3; 4]);
        assert!(matches!(
            make_pretext_set(&[d], PretextMode::Ts),
            Err(Error::DegenerateSegment(_))
        ));
    }

    #[test]
    fn class_roundtrip() {
        for l in ReverseLabel::ALL {
            assert_eq!(ReverseLabel::from_class(l.class()), l);
        }
    }

    #[test]
    fn two_piece_permutation_is_identity_or_swap() {
        let v: Vec<f32> = (0..3000).map(|i| i as f32 / 2999.0).collect();
        let s = seg(&v);
        let swapped: Vec<f32> = v[1500..].iter().chain(&v[..1500]).copied().collect();
        let mut seen_swap = false;
        for seed in 0..16 {
            let spec = AugmentSpec {
                pieces: 2,
                ..AugmentSpec::permutation(seed)
            };
            let out = augment(&s, &spec).unwrap();
            assert!(out.samples() == &v[..] || out.samples() == &swapped[..]);
            seen_swap |= out.samples() == &swapped[..];
        }
        assert!(seen_swap);
    }

    #[test]
    fn permutation_pieces_must_divide() {
        let s = seg(&vec![0.5; 3000]);
        let spec = AugmentSpec {
            pieces: 7,
            ..AugmentSpec::permutation(0)
        };
        assert!(matches!(augment(&s, &spec), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn tiny_noise_is_identity() {
        let v: Vec<f32> = (0..3000).map(|i| ((i % 10) as f32 + 1.0) / 11.0).collect();
        let s = seg(&v);
        let spec = AugmentSpec {
            sigma: 1e-12,
            ..AugmentSpec::noise(3)
        };
        assert_eq!(augment(&s, &spec).unwrap().samples(), s.samples());
    }

    #[test]
    fn noise_is_seeded_and_clipped() {
        let s = seg(&vec![0.5; 3000]);
        let spec = AugmentSpec {
            sigma: 0.4,
            ..AugmentSpec::noise(11)
        };
        let a = augment(&s, &spec).unwrap();
        let b = augment(&s, &spec).unwrap();
        assert_eq!(a, b);
        assert!(a.samples().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_ne!(a, augment(&s, &spec.with_seed(12)).unwrap());
    }

    fn normalized() -> impl Strategy<Value = Segment> {
        prop::collection::vec(0.0f32..=1.0, 3..200).prop_map(|mut v| {
            v[0] = 0.0;
            v[1] = 1.0;
            Segment::from_normalized(v, "p", 0).unwrap()
        })
    }

    proptest! {
        #[test]
        fn involutions_and_commutation(s in normalized()) {
            prop_assert_eq!(&temporal_reverse(&temporal_reverse(&s)), &s);
            for twice in [spatial_reverse(&spatial_reverse(&s)), ts_reverse(&ts_reverse(&s))] {
                for (x, y) in twice.samples().iter().zip(s.samples()) {
                    prop_assert!((x - y).abs() <= f32::EPSILON);
                }
            }
            prop_assert_eq!(
                temporal_reverse(&spatial_reverse(&s)),
                spatial_reverse(&temporal_reverse(&s))
            );
        }

        #[test]
        fn four_classes_distinct(s in normalized()) {
            // Anti-palindromes (s[i] = 1 - s[L-1-i]) are fixed points of ts_reverse.
            prop_assume!(temporal_reverse(&s) != s && ts_reverse(&s) != s);
            let variants: Vec<_> = ReverseLabel::ALL.iter().map(|l| l.apply(&s)).collect();
            for i in 0..4 {
                for j in i + 1..4 {
                    prop_assert_ne!(variants[i].samples(), variants[j].samples());
                }
            }
        }
    }
}
