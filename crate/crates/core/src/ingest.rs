//! On-disk corpus format and seeded train/test splitting.
//!
//! A corpus directory holds `manifest.csv` with header `id,label,fs,path`
//! and one sample file per record. `.f32le` files are header-free
//! little-endian `f32`; `.txt` files hold one decimal value per line.
//! Ground-truth R-peak times, when known, sit next to the samples in
//! `<id>.rpeaks.txt` (seconds, one per line).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::signal::{EcgRecord, Label, LabeledSegment};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const MANIFEST_HEADER: [&str; 4] = ["id", "label", "fs", "path"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub label: Label,
    pub fs: u32,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    /// Directory that entry paths are relative to.
    pub base_dir: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleFormat {
    #[default]
    F32Le,
    Text,
}

impl SampleFormat {
    pub fn extension(self) -> &'static str {
        match self {
            SampleFormat::F32Le => "f32le",
            SampleFormat::Text => "txt",
        }
    }
}

/// Reads a manifest; `path` may be the CSV itself or its directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let mut path = path.as_ref().to_path_buf();
    if path.is_dir() {
        path.push(MANIFEST_FILE);
    }
    if !path.exists() {
        return Err(Error::MissingFile(path));
    }
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(&path)?;
    let header = reader.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != MANIFEST_HEADER {
        return Err(Error::Manifest(format!(
            "expected header `{}`, found `{}`",
            MANIFEST_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for row in reader.records() {
        let row = row?;
        if row.len() != 4 {
            return Err(Error::Manifest(format!("expected 4 fields, got {}", row.len())));
        }
        let id = row[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        let fs: u32 = row[2]
            .parse()
            .map_err(|_| Error::Manifest(format!("{id}: bad fs `{}`", &row[2])))?;
        if fs == 0 {
            return Err(Error::Manifest(format!("{id}: fs must be positive")));
        }
        let entry = ManifestEntry {
            label: row[1].parse()?,
            fs,
            path: PathBuf::from(&row[3]),
            id,
        };
        let file = base_dir.join(&entry.path);
        if !file.exists() {
            return Err(Error::MissingFile(file));
        }
        entries.push(entry);
    }
    Ok(Manifest { base_dir, entries })
}

pub fn read_samples(path: &Path) -> Result<Vec<f32>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    if path.extension().is_some_and(|e| e == "txt") {
        let text = fs::read_to_string(path)?;
        return text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.trim().parse::<f32>().map_err(|_| Error::NonNumericLine {
                    path: path.to_path_buf(),
                    line: i + 1,
                    text: l.to_string(),
                })
            })
            .collect();
    }
    let bytes = fs::read(path)?;
    if bytes.len() % 4 != 0 {
        return Err(Error::BadSampleFileSize {
            path: path.to_path_buf(),
            size: bytes.len() as u64,
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn annotation_path(samples: &Path, id: &str) -> PathBuf {
    samples.with_file_name(format!("{id}.rpeaks.txt"))
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn load_record(&self, id: &str) -> Result<EcgRecord> {
        let entry = self.entry(id).ok_or_else(|| Error::UnknownId(id.to_string()))?;
        self.load_entry(entry)
    }

    fn load_entry(&self, entry: &ManifestEntry) -> Result<EcgRecord> {
        let file = self.base_dir.join(&entry.path);
        let samples = read_samples(&file)?;
        let record = EcgRecord::new(entry.id.clone(), entry.fs, samples, entry.label)?;
        let ann = annotation_path(&file, &entry.id);
        if ann.exists() {
            let times = fs::read_to_string(&ann)?
                .lines()
                .filter(|l| !l.trim().is_empty())
                .enumerate()
                .map(|(i, l)| {
                    l.trim().parse::<f64>().map_err(|_| Error::NonNumericLine {
                        path: ann.clone(),
                        line: i + 1,
                        text: l.to_string(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            return record.with_annotations(times);
        }
        Ok(record)
    }

    pub fn load_all(&self) -> Result<Vec<EcgRecord>> {
        self.entries.iter().map(|e| self.load_entry(e)).collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(MANIFEST_HEADER)?;
        for e in &self.entries {
            w.write_record([
                e.id.as_str(),
                e.label.as_str(),
                &e.fs.to_string(),
                &e.path.to_string_lossy(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Writes sample files plus `manifest.csv` into `dir` (created if needed).
pub fn write_corpus(records: &[EcgRecord], dir: &Path, format: SampleFormat) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut seen = HashSet::new();
    let mut entries = Vec::with_capacity(records.len());
    for rec in records {
        if !seen.insert(rec.id.as_str()) {
            return Err(Error::DuplicateId(rec.id.clone()));
        }
        let name = PathBuf::from(format!("{}.{}", rec.id, format.extension()));
        let file = dir.join(&name);
        match format {
            SampleFormat::F32Le => {
                let bytes: Vec<u8> = rec.samples.iter().flat_map(|v| v.to_le_bytes()).collect();
                fs::write(&file, bytes)?;
            }
            SampleFormat::Text => {
                let text: String = rec.samples.iter().map(|v| format!("{v}\n")).collect();
                fs::write(&file, text)?;
            }
        }
        if let Some(times) = &rec.annotations {
            let text: String = times.iter().map(|t| format!("{t}\n")).collect();
            fs::write(annotation_path(&file, &rec.id), text)?;
        }
        entries.push(ManifestEntry {
            id: rec.id.clone(),
            label: rec.label,
            fs: rec.fs,
            path: name,
        });
    }
    let manifest = Manifest {
        base_dir: dir.to_path_buf(),
        entries,
    };
    manifest.write(&dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SplitLevel {
    #[default]
    Record,
    Segment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Total training segments; ignored when `n_per_class` is set.
    pub n_train: usize,
    /// Exactly this many training segments of each of Normal and AF.
    pub n_per_class: Option<usize>,
    pub seed: u64,
    pub level: SplitLevel,
}

impl SplitSpec {
    pub fn new(n_train: usize, seed: u64) -> Self {
        SplitSpec {
            n_train,
            n_per_class: None,
            seed,
            level: SplitLevel::Record,
        }
    }

    /// Half Normal, half AF (an odd `n_train` rounds down).
    pub fn balanced(n_train: usize, seed: u64) -> Self {
        SplitSpec {
            n_per_class: Some(n_train / 2),
            ..Self::new(n_train, seed)
        }
    }

    fn quota(&self, label: Label) -> usize {
        match self.n_per_class {
            Some(k) if label != Label::Unlabeled => k,
            Some(_) => 0,
            None => usize::MAX,
        }
    }
}

/// Seeded train/test split. With [`SplitLevel::Record`], all segments of a
/// record land on one side; leftovers of the last record drawn into the
/// training side are dropped rather than leaked into the test side.
pub fn split(
    segments: &[LabeledSegment],
    spec: &SplitSpec,
) -> Result<(Vec<LabeledSegment>, Vec<LabeledSegment>)> {
    let mut rng = rng::named_rng(spec.seed, "split");
    let target_total = match spec.n_per_class {
        Some(k) => 2 * k,
        None => spec.n_train,
    };

    // Groups of segment indices; one group per record or per segment.
    let mut groups: Vec<Vec<usize>> = match spec.level {
        SplitLevel::Segment => (0..segments.len()).map(|i| vec![i]).collect(),
        SplitLevel::Record => {
            let mut by_record: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, s) in segments.iter().enumerate() {
                by_record.entry(s.segment.source_id.as_str()).or_default().push(i);
            }
            by_record.into_values().collect()
        }
    };
    groups.shuffle(&mut rng);

    let mut taken: HashMap<Label, usize> = HashMap::new();
    let mut total = 0usize;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for group in groups {
        let mut used = false;
        for &i in &group {
            let label = segments[i].label;
            let count = taken.entry(label).or_default();
            if total < target_total && *count < spec.quota(label) {
                *count += 1;
                total += 1;
                train.push(segments[i].clone());
                used = true;
            }
        }
        if !used {
            test.extend(group.iter().map(|&i| segments[i].clone()));
        }
    }

    let short = match spec.n_per_class {
        Some(k) => [Label::Normal, Label::Af]
            .iter()
            .any(|l| taken.get(l).copied().unwrap_or(0) < k),
        None => total < target_total,
    };
    if short {
        return Err(Error::InsufficientData(format!(
            "requested {target_total} training segments (per class: {:?}); got Normal {}, AF {}",
            spec.n_per_class,
            taken.get(&Label::Normal).copied().unwrap_or(0),
            taken.get(&Label::Af).copied().unwrap_or(0),
        )));
    }
    Ok((train, test))
}

/// Record-level holdout, stratified by record label: roughly `test_fraction`
/// of each class's records (at least one when the class has two or more) go
/// to the test side.
pub fn holdout(
    segments: &[LabeledSegment],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledSegment>, Vec<LabeledSegment>)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::InvalidParameter(format!("test fraction {test_fraction} not in [0, 1)")));
    }
    let mut by_label: BTreeMap<Label, Vec<&str>> = BTreeMap::new();
    for s in segments {
        by_label.entry(s.label).or_default().push(s.segment.source_id.as_str());
    }
    let mut rng = rng::named_rng(seed, "holdout");
    let mut test_ids: HashSet<&str> = HashSet::new();
    for ids in by_label.values_mut() {
        ids.sort_unstable();
        ids.dedup();
        ids.retain(|id| !test_ids.contains(id));
        ids.shuffle(&mut rng);
        let mut n_test = (ids.len() as f64 * test_fraction).round() as usize;
        if test_fraction > 0.0 && ids.len() >= 2 {
            n_test = n_test.clamp(1, ids.len() - 1);
        }
        test_ids.extend(ids[..n_test].iter().copied());
    }
    let (test, train): (Vec<_>, Vec<_>) = segments
        .iter()
        .cloned()
        .partition(|s| test_ids.contains(s.segment.source_id.as_str()));
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{labeled_segments, Segment};
    use crate::synth::{synth_corpus, SynthParams};

    fn fake_segments(n_records: usize, per_record: usize) -> Vec<LabeledSegment> {
        (0..n_records)
            .flat_map(|r| {
                (0..per_record).map(move |k| LabeledSegment {
                    segment: Segment::from_normalized(vec![0.0, 1.0], format!("rec{r}"), k * 1500)
                        .unwrap(),
                    label: if r % 2 == 0 { Label::Normal } else { Label::Af },
                })
            })
            .collect()
    }

    #[test]
    fn binary_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let recs = synth_corpus(2, 3, &SynthParams::default(), 5).unwrap();
        let m = write_corpus(&recs, dir.path(), SampleFormat::F32Le).unwrap();
        assert_eq!(m.len(), 5);
        let back = read_manifest(dir.path()).unwrap().load_all().unwrap();
        for (a, b) in recs.iter().zip(&back) {
            assert_eq!(a.samples.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                       b.samples.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            assert_eq!(a.label, b.label);
            assert_eq!(a.annotations, b.annotations);
        }
    }

    #[test]
    fn text_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let recs = synth_corpus(1, 1, &SynthParams::default(), 9).unwrap();
        write_corpus(&recs, dir.path(), SampleFormat::Text).unwrap();
        let back = read_manifest(dir.path().join(MANIFEST_FILE)).unwrap().load_all().unwrap();
        for (a, b) in recs.iter().zip(&back) {
            assert!(a.samples.iter().zip(&b.samples).all(|(x, y)| (x - y).abs() <= 1e-6));
        }
    }

    #[test]
    fn empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let m = write_corpus(&[], dir.path(), SampleFormat::F32Le).unwrap();
        assert!(m.is_empty());
        assert!(read_manifest(dir.path()).unwrap().is_empty());
    }

    #[test]
    fn manifest_row_parses() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("r1.f32le"), vec![0u8; 12000]).unwrap();
        fs::write(dir.path().join(MANIFEST_FILE), "id,label,fs,path\nr1,AF,300,r1.f32le\n").unwrap();
        let m = read_manifest(dir.path()).unwrap();
        let rec = m.load_record("r1").unwrap();
        assert_eq!(rec.label, Label::Af);
        assert_eq!(rec.samples.len(), 3000);
        assert_eq!(rec.duration_s(), 10.0);
        assert!(matches!(m.load_record("nope"), Err(Error::UnknownId(_))));
    }

    #[test]
    fn manifest_errors_are_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path();
        fs::write(p.join("a.f32le"), vec![0u8; 8]).unwrap();
        fs::write(p.join(MANIFEST_FILE), "id,label,fs,path\na,Normal,300,a.f32le\na,AF,300,a.f32le\n").unwrap();
        match read_manifest(p) {
            Err(Error::DuplicateId(id)) => assert_eq!(id, "a"),
            other => panic!("{other:?}"),
        }

        fs::write(p.join(MANIFEST_FILE), "id,label,fs,path\nb,Normal,300,b.f32le\n").unwrap();
        assert!(matches!(read_manifest(p), Err(Error::MissingFile(_))));

        fs::write(p.join("c.f32le"), vec![0u8; 7]).unwrap();
        assert!(matches!(read_samples(&p.join("c.f32le")), Err(Error::BadSampleFileSize { size: 7, .. })));

        fs::write(p.join("d.txt"), "0.5\nabc\n").unwrap();
        assert!(matches!(read_samples(&p.join("d.txt")), Err(Error::NonNumericLine { line: 2, .. })));
    }

    #[test]
    fn balanced_fine_tune_set() {
        let recs = synth_corpus(210, 210, &SynthParams::default(), 3).unwrap();
        let segs = labeled_segments(&recs, 3000, 1500).unwrap();
        let (train, test) = split(&segs, &SplitSpec::balanced(2000, 1)).unwrap();
        assert_eq!(train.iter().filter(|s| s.label == Label::Normal).count(), 1000);
        assert_eq!(train.iter().filter(|s| s.label == Label::Af).count(), 1000);
        let train_ids: HashSet<_> = train.iter().map(|s| &s.segment.source_id).collect();
        assert!(test.iter().all(|s| !train_ids.contains(&s.segment.source_id)));
    }

    #[test]
    fn split_is_deterministic_and_leak_free() {
        let segs = fake_segments(40, 5);
        let spec = SplitSpec::new(60, 9);
        let (a, b) = split(&segs, &spec).unwrap();
        let (a2, b2) = split(&segs, &spec).unwrap();
        assert_eq!(a, a2);
        assert_eq!(b, b2);
        assert_eq!(a.len(), 60);
        let ids: HashSet<_> = a.iter().map(|s| &s.segment.source_id).collect();
        assert!(b.iter().all(|s| !ids.contains(&s.segment.source_id)));
    }

    #[test]
    fn segment_level_split() {
        let segs = fake_segments(4, 5);
        let spec = SplitSpec { level: SplitLevel::Segment, ..SplitSpec::new(7, 1) };
        let (a, b) = split(&segs, &spec).unwrap();
        assert_eq!((a.len(), b.len()), (7, 13));
    }

    #[test]
    fn insufficient_data() {
        let segs = fake_segments(4, 2);
        assert!(matches!(split(&segs, &SplitSpec::new(9, 0)), Err(Error::InsufficientData(_))));
        assert!(matches!(split(&segs, &SplitSpec::balanced(10, 0)), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn holdout_partitions_records() {
        let segs = fake_segments(10, 3);
        let (train, test) = holdout(&segs, 0.2, 4).unwrap();
        assert_eq!(train.len() + test.len(), 30);
        assert_eq!(test.len(), 6);
        let ids: HashSet<_> = train.iter().map(|s| &s.segment.source_id).collect();
        assert!(test.iter().all(|s| !ids.contains(&s.segment.source_id)));
    }

    #[test]
    fn holdout_keeps_both_classes_on_both_sides() {
        let segs = fake_segments(6, 2);
        for seed in 0..20 {
            let (train, test) = holdout(&segs, 0.2, seed).unwrap();
            for side in [&train, &test] {
                assert!(side.iter().any(|s| s.label == Label::Normal));
                assert!(side.iter().any(|s| s.label == Label::Af));
            }
        }
    }
}
