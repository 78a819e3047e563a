//! Intra/extra-personal pair construction and the balanced sample matrix.
//!
//! Every unordered pair of training images yields one difference sample: the
//! elementwise absolute difference of the two images' Gabor feature vectors,
//! labelled intra-personal (same subject) or extra-personal (different
//! subjects). Extra pairs vastly outnumber intra pairs, so a seeded policy
//! subsamples them to a target intra:extra ratio before the signed augmented
//! matrix is assembled.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::gabor::GaborFeatureVector;
use crate::rng::SplitMix64;
use crate::shk::{make_margin, MarginPreset};
use crate::types::{
    AugmentedFeatureMatrix, AugmentedSample, FeatureVector, Label, MarginVector,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: String,
    pub subject: String,
}

/// Ordered list of (image path, subject) rows. Paths are unique; subjects
/// repeat across an individual's images.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::input("manifest has no entries"));
        }
        let mut seen = std::collections::HashSet::new();
        for e in &entries {
            if e.path.is_empty() || e.subject.is_empty() {
                return Err(Error::input("manifest entries need nonempty path and subject"));
            }
            if !seen.insert(e.path.as_str()) {
                return Err(Error::input(format!("duplicate manifest path {:?}", e.path)));
            }
        }
        Ok(DatasetManifest { entries })
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct subjects in first-appearance order.
    pub fn subjects(&self) -> Vec<&str> {
        let mut seen = std::collections::HashSet::new();
        self.entries
            .iter()
            .filter(|e| seen.insert(e.subject.as_str()))
            .map(|e| e.subject.as_str())
            .collect()
    }

    /// Headerless UTF-8 CSV, columns `path,subject`, RFC-4180 quoting, LF
    /// line endings.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(BufReader::new(File::open(path)?));
        let mut entries = Vec::new();
        for record in reader.records() {
            let record = record?;
            if record.len() != 2 {
                return Err(Error::format(
                    "manifest CSV",
                    format!("expected 2 columns, got {}", record.len()),
                ));
            }
            entries.push(ManifestEntry {
                path: record[0].to_string(),
                subject: record[1].to_string(),
            });
        }
        DatasetManifest::new(entries)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(BufWriter::new(File::create(path)?));
        for e in &self.entries {
            writer.write_record([e.path.as_str(), e.subject.as_str()])?;
        }
        writer.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairLabel {
    Intra,
    Extra,
}

impl PairLabel {
    pub fn to_class_label(self) -> Label {
        match self {
            PairLabel::Intra => Label::Positive,
            PairLabel::Extra => Label::Negative,
        }
    }
}

/// One difference sample: absolute feature difference plus pair label. All
/// entries are nonnegative by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSample {
    pub feature: FeatureVector,
    pub label: PairLabel,
}

impl PairSample {
    pub fn new(feature: FeatureVector, label: PairLabel) -> Result<Self> {
        if let Some(v) = feature.values().iter().find(|v| **v < 0.0) {
            return Err(Error::input(format!(
                "pair features are absolute differences; got negative entry {v}"
            )));
        }
        Ok(PairSample { feature, label })
    }
}

/// Elementwise `|a - b|`.
pub fn pair_feature(a: &[f64], b: &[f64]) -> Result<FeatureVector> {
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "pair members have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let diff = Array1::from_iter(a.iter().zip(b).map(|(x, y)| (x - y).abs()));
    FeatureVector::new(diff)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    pub total: u64,
    pub intra: u64,
    pub extra: u64,
}

/// Pair counts for C subjects with K images each: `total = CK(CK-1)/2`,
/// `intra = C K(K-1)/2`.
pub fn count_pairs(c: u64, k: u64) -> PairCounts {
    let n = c * k;
    let total = n * n.saturating_sub(1) / 2;
    let intra = c * k * k.saturating_sub(1) / 2;
    PairCounts { total, intra, extra: total - intra }
}

/// Pair counts of a concrete manifest (per-subject image counts may vary).
pub fn manifest_pair_counts(manifest: &DatasetManifest) -> PairCounts {
    let n = manifest.len() as u64;
    let total = n * (n - 1) / 2;
    let mut counts = std::collections::HashMap::new();
    for e in manifest.entries() {
        *counts.entry(e.subject.as_str()).or_insert(0u64) += 1;
    }
    let intra: u64 = counts.values().map(|&k| k * (k - 1) / 2).sum();
    PairCounts { total, intra, extra: total - intra }
}

/// Extra-pair subsampling policy. `ratio = (a, b)` targets `a` intra pairs
/// per `b` extra pairs, restricted to the practical band 1:1 ..= 1:10.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingPolicy {
    pub ratio: (u32, u32),
    pub seed: u64,
    pub keep_all_positives: bool,
}

impl SamplingPolicy {
    pub fn new(ratio: (u32, u32), seed: u64) -> Result<Self> {
        let policy = SamplingPolicy { ratio, seed, keep_all_positives: true };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.ratio;
        if a == 0 || b == 0 {
            return Err(Error::config("sampling ratio terms must be positive"));
        }
        if b < a || b > 10 * a {
            return Err(Error::config(format!(
                "sampling ratio {a}:{b} outside the supported 1:1 to 1:10 band"
            )));
        }
        Ok(())
    }
}

/// Built pair list plus bookkeeping. `extra_clamped` flags that fewer extra
/// pairs existed than the ratio asked for.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBuildOutcome {
    pub samples: Vec<PairSample>,
    pub intra_count: usize,
    pub extra_count: usize,
    pub extra_clamped: bool,
}

const STREAM_EXTRA: u64 = 1;
const STREAM_INTRA: u64 = 2;

/// Builds the labelled difference samples for one manifest.
///
/// All intra pairs are enumerated in lexicographic (i, j) order and kept
/// when `keep_all_positives` is set. Extra pairs are drawn uniformly without
/// replacement (partial Fisher-Yates over pair indices, seeded) to reach
/// `intra * b / a`, rounded down; if fewer exist the count clamps and the
/// outcome says so. With `keep_all_positives` unset a clamped draw also
/// subsamples the intra side back to the target ratio, so the realized
/// ratio stays at `a:b`. Features are only computed for kept pairs.
pub fn build_pairs(
    features: &[GaborFeatureVector],
    manifest: &DatasetManifest,
    policy: &SamplingPolicy,
) -> Result<PairBuildOutcome> {
    policy.validate()?;
    if features.len() != manifest.len() {
        return Err(Error::shape(format!(
            "{} feature vectors for {} manifest entries",
            features.len(),
            manifest.len()
        )));
    }
    let dim = features.first().map(|f| f.values.len()).unwrap_or(0);
    if dim == 0 {
        return Err(Error::input("feature vectors are empty"));
    }
    if let Some(f) = features.iter().find(|f| f.values.len() != dim) {
        return Err(Error::shape(format!(
            "inconsistent feature lengths {} vs {}",
            f.values.len(),
            dim
        )));
    }

    let n = manifest.len();
    let mut intra_idx = Vec::new();
    let mut extra_idx = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if manifest.entries[i].subject == manifest.entries[j].subject {
                intra_idx.push((i, j));
            } else {
                extra_idx.push((i, j));
            }
        }
    }
    if intra_idx.is_empty() {
        return Err(Error::input("manifest yields no intra-personal pairs"));
    }

    let (a, b) = policy.ratio;
    let extra_target = (intra_idx.len() as u64 * b as u64 / a as u64) as usize;
    let extra_clamped = extra_target > extra_idx.len();
    let extra_kept = extra_target.min(extra_idx.len());

    let kept_intra: Vec<(usize, usize)> = if extra_clamped && !policy.keep_all_positives {
        let target = ((extra_kept as u64 * a as u64) / b as u64) as usize;
        let target = target.min(intra_idx.len());
        let mut rng = SplitMix64::derive(policy.seed, STREAM_INTRA);
        let mut picked = rng.sample_indices(intra_idx.len(), target);
        // Positives keep their enumeration order even when subsampled.
        picked.sort_unstable();
        picked.into_iter().map(|i| intra_idx[i]).collect()
    } else {
        intra_idx
    };

    let mut rng = SplitMix64::derive(policy.seed, STREAM_EXTRA);
    let picked_extra = rng.sample_indices(extra_idx.len(), extra_kept);

    let mut samples = Vec::with_capacity(kept_intra.len() + extra_kept);
    for &(i, j) in &kept_intra {
        let feature = pair_feature(&features[i].values, &features[j].values)?;
        samples.push(PairSample::new(feature, PairLabel::Intra)?);
    }
    for &p in &picked_extra {
        let (i, j) = extra_idx[p];
        let feature = pair_feature(&features[i].values, &features[j].values)?;
        samples.push(PairSample::new(feature, PairLabel::Extra)?);
    }
    Ok(PairBuildOutcome {
        intra_count: kept_intra.len(),
        extra_count: extra_kept,
        extra_clamped,
        samples,
    })
}

/// Stacks samples into the signed augmented matrix: each row gains a leading
/// 1, then extra-personal rows are negated in full (leading entry included).
/// The margin follows the chosen preset over the resulting class labels.
pub fn assemble_matrix(
    samples: &[PairSample],
    margin: MarginPreset,
) -> Result<(AugmentedFeatureMatrix, MarginVector, Vec<Label>)> {
    if samples.is_empty() {
        return Err(Error::input("cannot assemble an empty sample list"));
    }
    let labels: Vec<Label> = samples.iter().map(|s| s.label.to_class_label()).collect();
    let rows: Vec<AugmentedSample> = samples
        .iter()
        .map(|s| AugmentedSample::signed(&s.feature, s.label.to_class_label()))
        .collect();
    let matrix = AugmentedFeatureMatrix::from_samples(rows)?;
    let margin = make_margin(margin, &labels)?;
    Ok((matrix, margin, labels))
}

const SPPM_MAGIC: &[u8; 4] = b"SPPM";
const SPPM_MAX_ELEMENTS: u64 = 1 << 26;

/// Writes the assembled matrix: magic `SPPM`, u32 row count, u32 augmented
/// dimension, row-major little-endian f64 data, then one label byte per row
/// (0 = extra, 1 = intra).
pub fn write_sppm<W: Write>(mut w: W, matrix: &AugmentedFeatureMatrix) -> Result<()> {
    let labels = matrix
        .labels()
        .ok_or_else(|| Error::input("pair matrix export needs row labels"))?;
    w.write_all(SPPM_MAGIC)?;
    w.write_all(&(matrix.n() as u32).to_le_bytes())?;
    // dim() already counts the bias column.
    w.write_all(&(matrix.dim() as u32).to_le_bytes())?;
    for v in matrix.data().iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    for label in labels {
        let byte = match label {
            Label::Positive => 1u8,
            Label::Negative => 0u8,
        };
        w.write_all(&[byte])?;
    }
    Ok(())
}

pub fn read_sppm<R: Read>(mut r: R) -> Result<AugmentedFeatureMatrix> {
    let mut header = [0u8; 12];
    r.read_exact(&mut header)
        .map_err(|_| Error::format("SPPM matrix", "truncated header"))?;
    if &header[0..4] != SPPM_MAGIC {
        return Err(Error::format("SPPM matrix", "bad magic"));
    }
    let n = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let d1 = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    if n == 0 || d1 < 2 {
        return Err(Error::format("SPPM matrix", format!("degenerate shape {n}x{d1}")));
    }
    if (n as u64) * (d1 as u64) > SPPM_MAX_ELEMENTS {
        return Err(Error::format("SPPM matrix", format!("implausible shape {n}x{d1}")));
    }
    let mut buf = vec![0u8; n * d1 * 8];
    r.read_exact(&mut buf)
        .map_err(|_| Error::format("SPPM matrix", "truncated data block"))?;
    let values: Vec<f64> = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mut label_bytes = vec![0u8; n];
    r.read_exact(&mut label_bytes)
        .map_err(|_| Error::format("SPPM matrix", "truncated label block"))?;
    let labels = label_bytes
        .iter()
        .map(|&b| match b {
            0 => Ok(Label::Negative),
            1 => Ok(Label::Positive),
            other => Err(Error::format("SPPM matrix", format!("bad label byte {other}"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let data = Array2::from_shape_vec((n, d1), values)
        .map_err(|e| Error::format("SPPM matrix", e.to_string()))?;
    AugmentedFeatureMatrix::from_raw_labeled(data, labels)
}

pub fn write_sppm_file(path: &Path, matrix: &AugmentedFeatureMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_sppm(&mut w, matrix)?;
    w.flush()?;
    Ok(())
}

pub fn read_sppm_file(path: &Path) -> Result<AugmentedFeatureMatrix> {
    read_sppm(BufReader::new(File::open(path)?))
}
