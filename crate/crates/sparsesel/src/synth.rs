//! Seeded synthetic instances and independent verification oracles.
//!
//! Everything here exists to test the rest of the crate from the outside:
//! planted-sparsity dictionary instances for the pursuit solvers, an l1
//! optimum computed by exhaustive sign/support enumeration, separable 2-D
//! blobs for the margin-adaptation loop, labelled Gaussian clouds for the
//! Fisher comparison, and a synthetic face set whose identity signal lives in
//! five known image patches.
//!
//! All generators are pure functions of their seed.

use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::gabor;
use crate::pairs::{DatasetManifest, ManifestEntry, PairLabel, PairSample};
use crate::pgm;
use crate::rng::SplitMix64;
use crate::solvers::coherence;
use crate::types::{AugmentedFeatureMatrix, FeatureVector, Label};

const STREAM_DICTIONARY: u64 = 1 << 40;
const STREAM_BLOBS: u64 = 2 << 40;
const STREAM_GAUSSIANS: u64 = 3 << 40;
const STREAM_TEXTURE: u64 = 4 << 40;
const STREAM_NOISE: u64 = 5 << 40;
const STREAM_RELEVANCE: u64 = 6 << 40;

/// Random `n x d` matrix with orthonormal columns (Gram-Schmidt on Gaussian
/// draws). Requires `n >= d >= 2`.
pub fn orthonormal_dictionary(seed: u64, n: usize, d: usize) -> AugmentedFeatureMatrix {
    assert!(n >= d && d >= 2, "need n >= d >= 2, got {n}x{d}");
    let mut rng = SplitMix64::derive(seed, STREAM_DICTIONARY);
    let mut cols: Vec<Array1<f64>> = Vec::with_capacity(d);
    while cols.len() < d {
        let mut v = Array1::from_shape_fn(n, |_| rng.normal());
        for q in &cols {
            let proj = q.dot(&v);
            v.scaled_add(-proj, q);
        }
        let nrm = v.dot(&v).sqrt();
        if nrm < 1e-8 {
            continue;
        }
        cols.push(v / nrm);
    }
    let mut data = Array2::zeros((n, d));
    for (j, c) in cols.iter().enumerate() {
        data.column_mut(j).assign(c);
    }
    AugmentedFeatureMatrix::from_raw(data).expect("valid dictionary shape")
}

/// A dictionary with a known sparse solution planted in the target.
#[derive(Debug, Clone)]
pub struct PlantedInstance {
    /// `n x d` matrix with unit-norm columns.
    pub dictionary: AugmentedFeatureMatrix,
    /// `b = Y a*` for the planted `a*`; pure noise when `k = 0`.
    pub target: Array1<f64>,
    /// Sorted support of the planted solution (empty for `k = 0`).
    pub support: Vec<usize>,
    /// Coefficients aligned with `support`, magnitudes in `[1, 2]`.
    pub coefficients: Vec<f64>,
    /// Achieved pairwise column coherence, below the requested limit.
    pub coherence: f64,
}

/// Builds a unit-norm random dictionary with pairwise coherence below
/// `coherence_limit` and plants a `k`-sparse solution in the target. Columns
/// are near-orthonormal (orthonormal basis plus a small Gaussian blend), so
/// the limit is met on the first attempt for reasonable sizes; failing
/// attempts redraw deterministically.
pub fn planted_instance(
    seed: u64,
    n: usize,
    d: usize,
    k: usize,
    coherence_limit: f64,
) -> PlantedInstance {
    assert!(k <= d, "planted sparsity {k} exceeds dimension {d}");
    // Blend amplitude scales with the limit: pairwise inner products land
    // near blend*sqrt(2)*N(0,1), so limit/4 keeps any pair's excursion past
    // the limit a ~3-sigma event regardless of the requested limit.
    let blend = coherence_limit / 4.0;
    for attempt in 0..1000u64 {
        let mut rng = SplitMix64::derive(seed, STREAM_DICTIONARY + 7919 * attempt);
        let base = orthonormal_dictionary(seed ^ (attempt << 20), n, d);
        let mut data = base.data().to_owned();
        for j in 0..d {
            let mut col = data.column(j).to_owned();
            for v in col.iter_mut() {
                *v += blend * rng.normal();
            }
            let nrm = col.dot(&col).sqrt();
            data.column_mut(j).assign(&(col / nrm));
        }
        let dictionary = AugmentedFeatureMatrix::from_raw(data).expect("valid shape");
        let mu = coherence(&dictionary);
        if mu >= coherence_limit {
            continue;
        }
        let mut support = rng.sample_indices(d, k);
        support.sort_unstable();
        let coefficients: Vec<f64> = support
            .iter()
            .map(|_| {
                let sign = if rng.next_u64() & 1 == 0 { 1.0 } else { -1.0 };
                sign * rng.range_f64(1.0, 2.0)
            })
            .collect();
        let mut target = Array1::<f64>::zeros(n);
        if k == 0 {
            for v in target.iter_mut() {
                *v = rng.normal();
            }
        } else {
            for (&j, &c) in support.iter().zip(&coefficients) {
                target.scaled_add(c, &dictionary.column(j));
            }
        }
        return PlantedInstance {
            dictionary,
            target,
            support,
            coefficients,
            coherence: mu,
        };
    }
    panic!("could not reach coherence {coherence_limit} for {n}x{d} after 1000 attempts");
}

/// Global optimum of `1/2 ||Ya - b||^2 + gamma ||a||_1` by enumerating every
/// support and sign pattern and solving the stationarity system of each.
/// Limited to 12 columns; intended for certifying [`crate::solvers::solve_l1`]
/// on small instances. The minimum over all candidates' true objectives is
/// exact because the optimizer's own sign/support pattern is among them.
pub fn l1_optimum_by_enumeration(
    y: &AugmentedFeatureMatrix,
    b: &Array1<f64>,
    gamma: f64,
) -> f64 {
    let d = y.dim();
    assert!(d <= 12, "enumeration limited to 12 columns, got {d}");
    assert!(gamma > 0.0, "gamma must be positive");
    let objective = |a: &Array1<f64>| {
        let r = y.data().dot(a) - b;
        0.5 * r.dot(&r) + gamma * a.iter().map(|v| v.abs()).sum::<f64>()
    };
    let mut best = 0.5 * b.dot(b);
    for mask in 1u32..(1 << d) {
        let support: Vec<usize> = (0..d).filter(|j| mask >> j & 1 == 1).collect();
        let k = support.len();
        let cols: Vec<ArrayView1<'_, f64>> = support.iter().map(|&j| y.column(j)).collect();
        let mut gram = Array2::<f64>::zeros((k, k));
        let mut proj = Array1::<f64>::zeros(k);
        for i in 0..k {
            for j in 0..k {
                gram[[i, j]] = cols[i].dot(&cols[j]);
            }
            proj[i] = cols[i].dot(b);
        }
        for signs in 0u32..(1 << k) {
            let mut rhs = proj.clone();
            for i in 0..k {
                let s = if signs >> i & 1 == 1 { -1.0 } else { 1.0 };
                rhs[i] -= gamma * s;
            }
            let Some(c) = crate::linalg::solve_spd(&gram, &rhs) else {
                continue;
            };
            let mut a = Array1::<f64>::zeros(d);
            for (&j, &v) in support.iter().zip(c.iter()) {
                a[j] = v;
            }
            best = best.min(objective(&a));
        }
    }
    best
}

/// Two linearly separable Gaussian blobs in the plane, returned as a signed
/// augmented matrix with labels. Means sit at `(-3, 0)` and `(3, 0)` with
/// unit noise clamped to `[-2.5, 2.5]`, so every positive sample keeps
/// `x >= 0.5` and every negative one `x <= -0.5`: separability holds by
/// construction, not by luck.
pub fn separable_blobs(seed: u64, per_class: usize) -> (AugmentedFeatureMatrix, Vec<Label>) {
    assert!(per_class >= 1);
    let mut rng = SplitMix64::derive(seed, STREAM_BLOBS);
    let mut clamped_normal = move || rng.normal().clamp(-2.5, 2.5);
    let mut samples = Vec::with_capacity(2 * per_class);
    let mut labels = Vec::with_capacity(2 * per_class);
    for i in 0..2 * per_class {
        let label = if i % 2 == 0 { Label::Positive } else { Label::Negative };
        let center = if label == Label::Positive { 3.0 } else { -3.0 };
        let x = FeatureVector::from_vec(vec![center + clamped_normal(), clamped_normal()])
            .expect("finite");
        samples.push(crate::types::AugmentedSample::signed(&x, label));
        labels.push(label);
    }
    let y = AugmentedFeatureMatrix::from_samples(samples).expect("valid samples");
    (y, labels)
}

/// Two labelled Gaussian clouds in `dim` dimensions with the given center
/// separation along a random direction. Raw (unsigned) features for
/// discriminant-fitting tests.
pub fn labelled_gaussians(
    seed: u64,
    dim: usize,
    n_a: usize,
    n_b: usize,
    separation: f64,
) -> Vec<(FeatureVector, Label)> {
    assert!(dim >= 1 && n_a >= 1 && n_b >= 1);
    let mut rng = SplitMix64::derive(seed, STREAM_GAUSSIANS);
    let mut dir = Array1::from_shape_fn(dim, |_| rng.normal());
    let nrm = dir.dot(&dir).sqrt();
    dir /= nrm;
    let mut out = Vec::with_capacity(n_a + n_b);
    for i in 0..n_a + n_b {
        let (label, sign) = if i < n_a {
            (Label::Positive, 0.5)
        } else {
            (Label::Negative, -0.5)
        };
        let mut v = Array1::from_shape_fn(dim, |_| rng.normal());
        v.scaled_add(sign * separation, &dir);
        out.push((FeatureVector::new(v).expect("finite"), label));
    }
    out
}

/// Pair samples where only the listed coordinates carry the intra/extra
/// signal: both classes share small nonnegative noise, and each extra pair
/// adds a strong offset on one relevant coordinate, cycling through the list
/// so that no single coordinate explains all the extras.
pub fn planted_relevance_pairs(
    seed: u64,
    dim: usize,
    relevant: &[usize],
    n_intra: usize,
    n_extra: usize,
) -> Vec<PairSample> {
    assert!(relevant.iter().all(|&j| j < dim));
    let mut rng = SplitMix64::derive(seed, STREAM_RELEVANCE);
    let mut out = Vec::with_capacity(n_intra + n_extra);
    for i in 0..n_intra + n_extra {
        let label = if i < n_intra { PairLabel::Intra } else { PairLabel::Extra };
        let mut v: Vec<f64> = (0..dim).map(|_| 0.05 * rng.normal().abs()).collect();
        if label == PairLabel::Extra {
            let j = relevant[(i - n_intra) % relevant.len()];
            v[j] += rng.range_f64(1.0, 2.0);
        }
        let feature = FeatureVector::from_vec(v).expect("finite");
        out.push(PairSample::new(feature, label).expect("nonnegative"));
    }
    out
}

/// Synthetic face geometry: five disjoint 20x20 patches of a 64x64 image
/// carry all subject identity; everything outside is flat background plus
/// noise. The corner patches sit flush with the image border so that filters
/// responding to them are centred on the patches, not on the surround.
pub const PATCH_SIZE: usize = 20;
pub const PATCH_ORIGINS: [(usize, usize); 5] = [(0, 0), (0, 44), (44, 0), (44, 44), (24, 24)];

pub fn in_discriminative_patch(row: usize, col: usize) -> bool {
    PATCH_ORIGINS.iter().any(|&(r0, c0)| {
        row >= r0 && row < r0 + PATCH_SIZE && col >= c0 && col < c0 + PATCH_SIZE
    })
}

/// Parameters of the synthetic face benchmark set.
#[derive(Debug, Clone)]
pub struct FaceSetSpec {
    pub subjects: usize,
    pub images_per_subject: usize,
    pub train_per_subject: usize,
    /// Per-pixel Gaussian noise level on top of the textures.
    pub noise: f64,
    pub seed: u64,
}

impl Default for FaceSetSpec {
    fn default() -> Self {
        FaceSetSpec {
            subjects: 10,
            images_per_subject: 6,
            train_per_subject: 4,
            // Roughly half the texture amplitude. Heavy noise is deliberate:
            // it swamps the attenuated patch signal that leaks into filters
            // centred outside the patches, so feature selection stays on
            // positions whose kernels sit on identity-bearing texture, while
            // in-patch responses keep a comfortable signal-to-noise ratio.
            noise: 0.16,
            seed: 42,
        }
    }
}

/// Renders one face image: flat 0.5 background, a subject-specific random
/// texture field in each discriminative patch, plus per-image pixel noise.
/// The texture depends only on (seed, subject, patch); noise only on
/// (seed, subject, image index). Independent per-pixel texture keeps every
/// filter position inside a patch informative about identity, so selection
/// has enough distinct in-patch structure to spend its whole atom budget on.
pub fn make_face_image(spec: &FaceSetSpec, subject: usize, image: usize) -> Array2<f64> {
    let size = gabor::IMAGE_SIZE;
    let mut img = Array2::from_elem((size, size), 0.5);
    let amp = 0.35;
    for (p, &(r0, c0)) in PATCH_ORIGINS.iter().enumerate() {
        let key = (subject as u64) * 64 + p as u64;
        let mut trng = SplitMix64::derive(spec.seed, STREAM_TEXTURE + key);
        for r in r0..r0 + PATCH_SIZE {
            for c in c0..c0 + PATCH_SIZE {
                img[[r, c]] += trng.range_f64(-amp, amp);
            }
        }
    }
    let key = (subject as u64) * 1024 + image as u64;
    let mut nrng = SplitMix64::derive(spec.seed, STREAM_NOISE + key);
    for v in img.iter_mut() {
        *v = (*v + spec.noise * nrng.normal()).clamp(0.0, 1.0);
    }
    img
}

/// File layout of a generated face set: PGM images plus train/gallery/probe
/// manifests. The gallery shares the training images.
#[derive(Debug, Clone)]
pub struct FaceDataset {
    pub train_manifest: PathBuf,
    pub gallery_manifest: PathBuf,
    pub probe_manifest: PathBuf,
    pub image_dir: PathBuf,
}

/// Writes the full face set under `dir` and returns the manifest paths.
/// Deterministic: same spec and dir content in, same bytes out.
pub fn write_face_dataset(dir: &Path, spec: &FaceSetSpec) -> Result<FaceDataset> {
    if spec.train_per_subject >= spec.images_per_subject {
        return Err(Error::config(format!(
            "train_per_subject {} must leave probe images (have {} per subject)",
            spec.train_per_subject, spec.images_per_subject
        )));
    }
    let image_dir = dir.join("images");
    std::fs::create_dir_all(&image_dir)?;
    let mut train = Vec::new();
    let mut probe = Vec::new();
    for s in 0..spec.subjects {
        for i in 0..spec.images_per_subject {
            let name = format!("s{s:02}_i{i}.pgm");
            pgm::write_pgm(&image_dir.join(&name), &make_face_image(spec, s, i))?;
            // Manifest paths stay relative to the manifest location so the
            // whole dataset is byte-identical wherever it is generated.
            let entry = ManifestEntry {
                path: format!("images/{name}"),
                subject: format!("s{s:02}"),
            };
            if i < spec.train_per_subject {
                train.push(entry);
            } else {
                probe.push(entry);
            }
        }
    }
    let train_manifest = dir.join("train.csv");
    let gallery_manifest = dir.join("gallery.csv");
    let probe_manifest = dir.join("probe.csv");
    DatasetManifest::new(train.clone())?.write_csv(&train_manifest)?;
    DatasetManifest::new(train)?.write_csv(&gallery_manifest)?;
    DatasetManifest::new(probe)?.write_csv(&probe_manifest)?;
    Ok(FaceDataset {
        train_manifest,
        gallery_manifest,
        probe_manifest,
        image_dir,
    })
}
