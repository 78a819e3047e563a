//! Recognition on selected features: the persisted selection model, nearest
//! neighbor and max-margin pair classifiers, and a regularized multi-class
//! Fisher discriminant baseline.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg;
use crate::types::SparseSolution;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Ssmes,
    Sfisher,
    Shk,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Ssmes => "ssmes",
            Method::Sfisher => "sfisher",
            Method::Shk => "shk",
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ssmes" => Ok(Method::Ssmes),
            "sfisher" => Ok(Method::Sfisher),
            "shk" => Ok(Method::Shk),
            other => Err(Error::config(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Mp,
    Omp,
    L1,
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Mp => "mp",
            SolverKind::Omp => "omp",
            SolverKind::L1 => "l1",
        })
    }
}

impl FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mp" => Ok(SolverKind::Mp),
            "omp" => Ok(SolverKind::Omp),
            "l1" => Ok(SolverKind::L1),
            other => Err(Error::config(format!("unknown solver {other:?}"))),
        }
    }
}

/// How a model was produced: sampling seed, intra:extra ratio, and an FNV-1a
/// digest of the training matrix bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Provenance {
    pub seed: u64,
    pub ratio: (u32, u32),
    pub digest: u64,
}

/// A fitted sparse discriminant: selected feature indices (into the
/// 8192-length Gabor vector), aligned weights, and the bias that absorbed
/// the augmented leading column.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionModel {
    pub method: Method,
    pub solver: SolverKind,
    /// Length of the full (un-augmented) feature vector.
    pub dim: usize,
    /// Sorted unique indices < `dim`.
    pub support: Vec<usize>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub provenance: Provenance,
}

impl SelectionModel {
    pub fn new(
        method: Method,
        solver: SolverKind,
        dim: usize,
        support: Vec<usize>,
        weights: Vec<f64>,
        bias: f64,
        provenance: Provenance,
    ) -> Result<Self> {
        if support.len() != weights.len() {
            return Err(Error::shape(format!(
                "{} support indices vs {} weights",
                support.len(),
                weights.len()
            )));
        }
        if !support.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::input("model support must be sorted and unique"));
        }
        if let Some(&i) = support.last() {
            if i >= dim {
                return Err(Error::input(format!("support index {i} >= dim {dim}")));
            }
        }
        if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::input("model weights must be finite"));
        }
        Ok(SelectionModel { method, solver, dim, support, weights, bias, provenance })
    }

    /// Splits a solver solution over augmented columns into bias (column 0)
    /// and feature weights (column j -> feature j-1).
    pub fn from_solution(
        solution: &SparseSolution,
        method: Method,
        solver: SolverKind,
        dim: usize,
        provenance: Provenance,
    ) -> Result<Self> {
        let mut bias = 0.0;
        let mut support = Vec::new();
        let mut weights = Vec::new();
        for (&idx, &w) in solution.support.iter().zip(&solution.coefficients) {
            if idx == 0 {
                bias = w;
            } else {
                support.push(idx - 1);
                weights.push(w);
            }
        }
        SelectionModel::new(method, solver, dim, support, weights, bias, provenance)
    }

    pub fn nnz(&self) -> usize {
        self.support.len()
    }

    /// Gathers the selected components of a full feature vector.
    pub fn reduce(&self, full: &[f64]) -> Result<Vec<f64>> {
        if full.len() != self.dim {
            return Err(Error::shape(format!(
                "feature vector has length {}, model dim is {}",
                full.len(),
                self.dim
            )));
        }
        Ok(self.support.iter().map(|&i| full[i]).collect())
    }

    /// Linear discriminant value on an already-reduced difference vector.
    pub fn score(&self, reduced: &[f64]) -> Result<f64> {
        if reduced.len() != self.support.len() {
            return Err(Error::shape(format!(
                "reduced vector has length {}, support size is {}",
                reduced.len(),
                self.support.len()
            )));
        }
        Ok(self.bias + self.weights.iter().zip(reduced).map(|(w, x)| w * x).sum::<f64>())
    }

    /// Line-oriented UTF-8 text; floats use shortest round-trip formatting,
    /// so `write` then `read` reproduces the model bit for bit.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "SPARSESEL v1")?;
        writeln!(w, "method {} solver {}", self.method, self.solver)?;
        writeln!(w, "dim {} nnz {} bias {}", self.dim, self.nnz(), self.bias)?;
        for (i, weight) in self.support.iter().zip(&self.weights) {
            writeln!(w, "{i} {weight}")?;
        }
        writeln!(
            w,
            "provenance seed={} ratio={}:{} digest={:016x}",
            self.provenance.seed, self.provenance.ratio.0, self.provenance.ratio.1,
            self.provenance.digest
        )?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let bad = |reason: String| Error::format("model file", reason);
        let mut lines = r.lines();
        let mut next = |what: &str| -> Result<String> {
            lines
                .next()
                .transpose()?
                .ok_or_else(|| bad(format!("missing {what} line")))
        };
        if next("header")? != "SPARSESEL v1" {
            return Err(bad("bad header line".into()));
        }
        let line = next("method")?;
        let parts: Vec<&str> = line.split(' ').collect();
        if parts.len() != 4 || parts[0] != "method" || parts[2] != "solver" {
            return Err(bad(format!("malformed method line {line:?}")));
        }
        let method: Method = parts[1].parse()?;
        let solver: SolverKind = parts[3].parse()?;
        let line = next("dim")?;
        let parts: Vec<&str> = line.split(' ').collect();
        if parts.len() != 6 || parts[0] != "dim" || parts[2] != "nnz" || parts[4] != "bias" {
            return Err(bad(format!("malformed dim line {line:?}")));
        }
        let dim: usize = parts[1].parse().map_err(|_| bad("bad dim value".into()))?;
        let nnz: usize = parts[3].parse().map_err(|_| bad("bad nnz value".into()))?;
        let bias: f64 = parts[5].parse().map_err(|_| bad("bad bias value".into()))?;
        let mut support = Vec::with_capacity(nnz);
        let mut weights = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            let line = next("weight")?;
            let (i, w) = line
                .split_once(' ')
                .ok_or_else(|| bad(format!("malformed weight line {line:?}")))?;
            support.push(i.parse::<usize>().map_err(|_| bad("bad support index".into()))?);
            weights.push(w.parse::<f64>().map_err(|_| bad("bad weight value".into()))?);
        }
        let line = next("provenance")?;
        let rest = line
            .strip_prefix("provenance seed=")
            .ok_or_else(|| bad(format!("malformed provenance line {line:?}")))?;
        let (seed_s, rest) = rest
            .split_once(" ratio=")
            .ok_or_else(|| bad("provenance missing ratio".into()))?;
        let (ratio_s, digest_s) = rest
            .split_once(" digest=")
            .ok_or_else(|| bad("provenance missing digest".into()))?;
        let (a_s, b_s) = ratio_s
            .split_once(':')
            .ok_or_else(|| bad("malformed ratio".into()))?;
        let provenance = Provenance {
            seed: seed_s.parse().map_err(|_| bad("bad seed".into()))?,
            ratio: (
                a_s.parse().map_err(|_| bad("bad ratio".into()))?,
                b_s.parse().map_err(|_| bad("bad ratio".into()))?,
            ),
            digest: u64::from_str_radix(digest_s, 16).map_err(|_| bad("bad digest".into()))?,
        };
        if let Some(extra) = lines.next().transpose()? {
            if !extra.is_empty() {
                return Err(bad(format!("trailing content {extra:?}")));
            }
        }
        SelectionModel::new(method, solver, dim, support, weights, bias, provenance)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        SelectionModel::read_from(BufReader::new(File::open(path)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    L1,
    L2,
    Cosine,
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceKind::L1 => "l1",
            DistanceKind::L2 => "l2",
            DistanceKind::Cosine => "cosine",
        })
    }
}

impl FromStr for DistanceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(DistanceKind::L1),
            "l2" => Ok(DistanceKind::L2),
            "cosine" => Ok(DistanceKind::Cosine),
            other => Err(Error::config(format!("unknown distance {other:?}"))),
        }
    }
}

/// Distance between equal-length vectors. Cosine distance is
/// `1 - u.v / (|u| |v|)` and rejects zero vectors.
pub fn distance(kind: DistanceKind, u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::shape(format!("vector lengths {} vs {}", u.len(), v.len())));
    }
    match kind {
        DistanceKind::L1 => Ok(u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum()),
        DistanceKind::L2 => {
            Ok(u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        }
        DistanceKind::Cosine => {
            let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
            let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if nu == 0.0 || nv == 0.0 {
                return Err(Error::input("cosine distance is undefined for zero vectors"));
            }
            let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
            Ok(1.0 - dot / (nu * nv))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

/// Index of the minimum-distance gallery vector; ties keep the lowest index.
pub fn nearest_neighbor(
    gallery: &[Vec<f64>],
    probe: &[f64],
    dist: DistanceKind,
) -> Result<Neighbor> {
    if gallery.is_empty() {
        return Err(Error::input("gallery is empty"));
    }
    let mut best = Neighbor { index: 0, distance: distance(dist, &gallery[0], probe)? };
    for (i, g) in gallery.iter().enumerate().skip(1) {
        let d = distance(dist, g, probe)?;
        if d < best.distance {
            best = Neighbor { index: i, distance: d };
        }
    }
    Ok(best)
}

/// Nearest-neighbor classification: returns the subject of the closest
/// gallery entry.
pub fn nnc_classify<'a>(
    gallery: &'a [(Vec<f64>, String)],
    probe: &[f64],
    dist: DistanceKind,
) -> Result<(&'a str, Neighbor)> {
    let features: Vec<Vec<f64>> = gallery.iter().map(|(f, _)| f.clone()).collect();
    let n = nearest_neighbor(&features, probe, dist)?;
    Ok((gallery[n.index].1.as_str(), n))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmcDecision {
    pub subject_index: usize,
    pub score: f64,
    /// False when even the winning score is non-positive, i.e. the model
    /// separates the probe from every candidate.
    pub confident: bool,
}

/// Max-margin pair classification. `per_subject_diffs[s]` holds the reduced
/// absolute-difference vectors between the probe and subject s's gallery
/// images; the winner maximizes the best discriminant value, ties keep the
/// lowest subject index.
pub fn mmc_classify(
    model: &SelectionModel,
    per_subject_diffs: &[Vec<Vec<f64>>],
) -> Result<MmcDecision> {
    if per_subject_diffs.is_empty() {
        return Err(Error::input("no candidate subjects"));
    }
    let mut best: Option<MmcDecision> = None;
    for (s, diffs) in per_subject_diffs.iter().enumerate() {
        if diffs.is_empty() {
            return Err(Error::input(format!("subject {s} has no gallery samples")));
        }
        let mut subject_best = f64::NEG_INFINITY;
        for d in diffs {
            subject_best = subject_best.max(model.score(d)?);
        }
        if best.map_or(true, |b| subject_best > b.score) {
            best = Some(MmcDecision {
                subject_index: s,
                score: subject_best,
                confident: subject_best > 0.0,
            });
        }
    }
    Ok(best.unwrap())
}

/// Multi-class Fisher discriminant with ridge-regularized within-class
/// scatter. Classification is nearest projected class mean under cosine
/// distance.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherModel {
    /// `out_dim x d`; rows are discriminant directions normalized so that
    /// `w^T S_w w = 1`.
    pub projection: Array2<f64>,
    /// `classes x out_dim` projected class means.
    pub class_means: Array2<f64>,
}

impl FisherModel {
    pub fn project(&self, x: &[f64]) -> Result<Array1<f64>> {
        if x.len() != self.projection.ncols() {
            return Err(Error::shape(format!(
                "vector length {} vs projection input {}",
                x.len(),
                self.projection.ncols()
            )));
        }
        let v = Array1::from_iter(x.iter().copied());
        Ok(self.projection.dot(&v))
    }

    /// Class index of the nearest projected mean (cosine distance, lowest
    /// index on ties).
    pub fn classify(&self, x: &[f64]) -> Result<usize> {
        let p = self.project(x)?;
        let means: Vec<Vec<f64>> = self
            .class_means
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect();
        Ok(nearest_neighbor(&means, p.as_slice().unwrap(), DistanceKind::Cosine)?.index)
    }
}

/// Fits the Fisher discriminant on labelled reduced vectors. Labels must be
/// class ids 0..C-1 with every class present; `out_dim <= C - 1`. The
/// within-class scatter is regularized by `1e-4 trace(S_w)/d` times the
/// identity, so duplicate features cannot break the factorization.
pub fn fisher_fit(x: &[Vec<f64>], y: &[usize], out_dim: usize) -> Result<FisherModel> {
    if x.len() != y.len() {
        return Err(Error::shape(format!("{} samples vs {} labels", x.len(), y.len())));
    }
    if x.is_empty() {
        return Err(Error::input("no training samples"));
    }
    let d = x[0].len();
    if d == 0 || x.iter().any(|v| v.len() != d) {
        return Err(Error::shape("inconsistent feature lengths"));
    }
    let classes = y.iter().max().unwrap() + 1;
    if classes < 2 {
        return Err(Error::input("Fisher fit needs at least two classes"));
    }
    if out_dim == 0 || out_dim > classes - 1 {
        return Err(Error::config(format!(
            "out_dim {out_dim} must be in 1..={}",
            classes - 1
        )));
    }
    let mut counts = vec![0usize; classes];
    for &c in y {
        counts[c] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::input(format!("class {empty} has no samples")));
    }

    let n = x.len();
    let mut class_mean = Array2::<f64>::zeros((classes, d));
    for (v, &c) in x.iter().zip(y) {
        for j in 0..d {
            class_mean[[c, j]] += v[j];
        }
    }
    for c in 0..classes {
        for j in 0..d {
            class_mean[[c, j]] /= counts[c] as f64;
        }
    }
    let mut global_mean = Array1::<f64>::zeros(d);
    for v in x {
        for j in 0..d {
            global_mean[j] += v[j];
        }
    }
    global_mean.mapv_inplace(|v| v / n as f64);

    let mut s_w = Array2::<f64>::zeros((d, d));
    for (v, &c) in x.iter().zip(y) {
        for i in 0..d {
            let di = v[i] - class_mean[[c, i]];
            for j in 0..=i {
                s_w[[i, j]] += di * (v[j] - class_mean[[c, j]]);
            }
        }
    }
    let mut s_b = Array2::<f64>::zeros((d, d));
    for c in 0..classes {
        let w = counts[c] as f64;
        for i in 0..d {
            let di = class_mean[[c, i]] - global_mean[i];
            for j in 0..=i {
                s_b[[i, j]] += w * di * (class_mean[[c, j]] - global_mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            s_w[[j, i]] = s_w[[i, j]];
            s_b[[j, i]] = s_b[[i, j]];
        }
    }
    let trace: f64 = (0..d).map(|i| s_w[[i, i]]).sum();
    let lambda = 1e-4 * trace / d as f64;
    // Degenerate case: all samples equal their class mean. Any positive
    // ridge keeps the factorization well-posed.
    let lambda = if lambda > 0.0 { lambda } else { 1e-12 };
    for i in 0..d {
        s_w[[i, i]] += lambda;
    }

    // Whiten: with S_w = L L^T the generalized problem becomes an ordinary
    // symmetric one on M = L^-1 S_b L^-T.
    let l = linalg::cholesky(&s_w)
        .ok_or_else(|| Error::input("within-class scatter is not positive definite"))?;
    let mut m = Array2::<f64>::zeros((d, d));
    for j in 0..d {
        let col = s_b.column(j).to_owned();
        let sol = linalg::forward_substitute(&l, &col);
        for i in 0..d {
            m[[i, j]] = sol[i];
        }
    }
    let mt = m.t().to_owned();
    for j in 0..d {
        let col = mt.column(j).to_owned();
        let sol = linalg::forward_substitute(&l, &col);
        for i in 0..d {
            m[[j, i]] = sol[i];
        }
    }
    // Symmetrize away the last floating-point asymmetry.
    let m = (&m + &m.t()) * 0.5;
    let (_, vectors) = linalg::symmetric_eigen(&m);

    let mut projection = Array2::<f64>::zeros((out_dim, d));
    for k in 0..out_dim {
        // u is unit-norm, so w = L^-T u satisfies w^T S_w w = 1. That
        // normalization transforms covariantly: rescaling the input features
        // rescales w the opposite way and the projected values are unchanged,
        // which keeps cosine decisions invariant to diagonal feature scaling.
        let u = vectors.column(k).to_owned();
        let mut w = linalg::back_substitute_transpose(&l, &u);
        // Fix the sign: the entry of largest magnitude is positive.
        let lead = w
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        if w[lead] < 0.0 {
            w.mapv_inplace(|v| -v);
        }
        for j in 0..d {
            projection[[k, j]] = w[j];
        }
    }
    let mut projected_means = Array2::<f64>::zeros((classes, out_dim));
    for c in 0..classes {
        let mean = class_mean.row(c).to_owned();
        let p = projection.dot(&mean);
        for k in 0..out_dim {
            projected_means[[c, k]] = p[k];
        }
    }
    Ok(FisherModel { projection, class_means: projected_means })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use approx::assert_abs_diff_eq;

    fn toy_model() -> SelectionModel {
        SelectionModel::new(
            Method::Shk,
            SolverKind::Omp,
            8192,
            vec![17, 4095],
            vec![0.25, -1.5],
            0.5,
            Provenance { seed: 42, ratio: (1, 7), digest: 0xdead_beef },
        )
        .unwrap()
    }

    #[test]
    fn enum_names_round_trip() {
        for m in [Method::Ssmes, Method::Sfisher, Method::Shk] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        for s in [SolverKind::Mp, SolverKind::Omp, SolverKind::L1] {
            assert_eq!(s.to_string().parse::<SolverKind>().unwrap(), s);
        }
        for d in [DistanceKind::L1, DistanceKind::L2, DistanceKind::Cosine] {
            assert_eq!(d.to_string().parse::<DistanceKind>().unwrap(), d);
        }
        assert!("sFisher".parse::<Method>().is_err());
        assert!("lasso".parse::<SolverKind>().is_err());
    }

    #[test]
    fn model_validation_rejects_bad_supports() {
        let p = Provenance { seed: 0, ratio: (1, 1), digest: 0 };
        let mk = |support: Vec<usize>, weights: Vec<f64>| {
            SelectionModel::new(Method::Shk, SolverKind::Mp, 10, support, weights, 0.0, p)
        };
        assert!(mk(vec![3, 1], vec![1.0, 2.0]).is_err());
        assert!(mk(vec![1, 1], vec![1.0, 2.0]).is_err());
        assert!(mk(vec![1, 10], vec![1.0, 2.0]).is_err());
        assert!(mk(vec![1], vec![1.0, 2.0]).is_err());
        assert!(mk(vec![1], vec![f64::NAN]).is_err());
        assert!(mk(vec![], vec![]).is_ok());
    }

    #[test]
    fn model_file_matches_the_golden_layout() {
        let mut buf = Vec::new();
        toy_model().write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let expected = "SPARSESEL v1\n\
                        method shk solver omp\n\
                        dim 8192 nnz 2 bias 0.5\n\
                        17 0.25\n\
                        4095 -1.5\n\
                        provenance seed=42 ratio=1:7 digest=00000000deadbeef\n";
        assert_eq!(text, expected);
    }

    #[test]
    fn awkward_floats_survive_the_text_round_trip() {
        let model = SelectionModel::new(
            Method::Sfisher,
            SolverKind::L1,
            100,
            vec![0, 7, 99],
            vec![0.1 + 0.2, 1.0 / 3.0, -2.5e-17],
            f64::MIN_POSITIVE,
            Provenance { seed: u64::MAX, ratio: (2, 19), digest: u64::MAX },
        )
        .unwrap();
        let mut buf = Vec::new();
        model.write_to(&mut buf).unwrap();
        let back = SelectionModel::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, model);
        for (a, b) in back.weights.iter().zip(&model.weights) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.bias.to_bits(), model.bias.to_bits());
    }

    #[test]
    fn model_save_load_via_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        let model = toy_model();
        model.save(&path).unwrap();
        assert_eq!(SelectionModel::load(&path).unwrap(), model);
    }

    #[test]
    fn malformed_model_files_are_rejected() {
        let good = {
            let mut buf = Vec::new();
            toy_model().write_to(&mut buf).unwrap();
            String::from_utf8(buf).unwrap()
        };
        let cases = [
            good.replacen("SPARSESEL v1", "SPARSESEL v2", 1),
            good.replacen("method shk", "method magic", 1),
            good.replacen("nnz 2", "nnz 3", 1),
            good.replacen("17 0.25", "banana 0.25", 1),
            good.replacen("provenance seed=", "seed=", 1),
            format!("{good}junk\n"),
        ];
        for text in &cases {
            assert!(
                SelectionModel::read_from(text.as_bytes()).is_err(),
                "accepted: {text}"
            );
        }
        // Support out of order fails the structural validation after parse.
        let swapped = good
            .replacen("17 0.25", "4095 0.25", 1)
            .replacen("4095 -1.5", "17 -1.5", 1);
        assert!(SelectionModel::read_from(swapped.as_bytes()).is_err());
    }

    #[test]
    fn reduce_gathers_support_components() {
        let model = SelectionModel::new(
            Method::Shk,
            SolverKind::Omp,
            5,
            vec![1, 4],
            vec![2.0, -1.0],
            0.25,
            Provenance { seed: 0, ratio: (1, 1), digest: 0 },
        )
        .unwrap();
        let full = [10.0, 11.0, 12.0, 13.0, 14.0];
        assert_eq!(model.reduce(&full).unwrap(), vec![11.0, 14.0]);
        assert!(model.reduce(&full[0..4]).is_err());
        // score = 0.25 + 2*11 - 14
        assert_abs_diff_eq!(model.score(&[11.0, 14.0]).unwrap(), 8.25, epsilon = 1e-15);
        assert!(model.score(&[1.0]).is_err());
    }

    #[test]
    fn distances_match_hand_values() {
        let u = [1.0, 2.0];
        let v = [4.0, -2.0];
        assert_abs_diff_eq!(distance(DistanceKind::L1, &u, &v).unwrap(), 7.0);
        assert_abs_diff_eq!(distance(DistanceKind::L2, &u, &v).unwrap(), 5.0);
        let w = [2.0, 4.0];
        assert_abs_diff_eq!(distance(DistanceKind::Cosine, &u, &w).unwrap(), 0.0, epsilon = 1e-15);
        assert!(distance(DistanceKind::Cosine, &u, &[0.0, 0.0]).is_err());
        assert!(distance(DistanceKind::L1, &u, &[1.0]).is_err());
    }

    #[test]
    fn nnc_basic_examples() {
        let gallery = vec![
            (vec![0.0], "A".to_string()),
            (vec![10.0], "B".to_string()),
        ];
        let (subject, n) = nnc_classify(&gallery, &[4.0], DistanceKind::L1).unwrap();
        assert_eq!(subject, "A");
        assert_abs_diff_eq!(n.distance, 4.0);

        let (subject, n) = nnc_classify(&gallery, &[10.0], DistanceKind::L2).unwrap();
        assert_eq!(subject, "B");
        assert_eq!(n.distance, 0.0);
    }

    #[test]
    fn nnc_tie_break_keeps_lowest_index() {
        let gallery = vec![
            (vec![1.0, 0.0], "first".to_string()),
            (vec![1.0, 0.0], "second".to_string()),
        ];
        for kind in [DistanceKind::L1, DistanceKind::L2, DistanceKind::Cosine] {
            let (subject, _) = nnc_classify(&gallery, &[1.0, 0.0], kind).unwrap();
            assert_eq!(subject, "first", "{kind}");
        }
    }

    #[test]
    fn nnc_noisy_probe_stays_with_its_subject() {
        let mut rng = SplitMix64::new(606);
        let d = 6;
        let gallery: Vec<(Vec<f64>, String)> = (0..5)
            .map(|s| {
                let v: Vec<f64> = (0..d).map(|_| rng.range_f64(1.0, 3.0)).collect();
                (v, format!("s{s}"))
            })
            .collect();
        // Smallest pairwise gap under each metric bounds tolerable noise.
        let mut min_gap = f64::INFINITY;
        for i in 0..5 {
            for j in (i + 1)..5 {
                for kind in [DistanceKind::L1, DistanceKind::L2, DistanceKind::Cosine] {
                    min_gap =
                        min_gap.min(distance(kind, &gallery[i].0, &gallery[j].0).unwrap());
                }
            }
        }
        assert!(min_gap > 0.0);
        let mut probe = gallery[3].0.clone();
        for v in probe.iter_mut() {
            *v += rng.range_f64(-1.0, 1.0) * 0.001 * min_gap;
        }
        for kind in [DistanceKind::L1, DistanceKind::L2, DistanceKind::Cosine] {
            let (subject, _) = nnc_classify(&gallery, &probe, kind).unwrap();
            assert_eq!(subject, "s3", "{kind}");
            // Cross-check with a direct exhaustive scan.
            let direct = gallery
                .iter()
                .enumerate()
                .map(|(i, (g, _))| (i, distance(kind, g, &probe).unwrap()))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(direct, 3);
        }
    }

    fn small_model() -> SelectionModel {
        SelectionModel::new(
            Method::Shk,
            SolverKind::Omp,
            4,
            vec![0, 2],
            vec![-1.0, -2.0],
            1.0,
            Provenance { seed: 0, ratio: (1, 1), digest: 0 },
        )
        .unwrap()
    }

    #[test]
    fn mmc_picks_the_max_scoring_subject() {
        let model = small_model();
        // Subject 0 diffs score 1-0.5-2*0.1=0.3; subject 1 scores are lower.
        let subjects = vec![
            vec![vec![0.5, 0.1], vec![2.0, 2.0]],
            vec![vec![1.5, 1.0]],
        ];
        let d = mmc_classify(&model, &subjects).unwrap();
        assert_eq!(d.subject_index, 0);
        assert_abs_diff_eq!(d.score, 0.3, epsilon = 1e-12);
        assert!(d.confident);
    }

    #[test]
    fn mmc_single_candidate_and_below_zero_flag() {
        let model = small_model();
        let subjects = vec![vec![vec![5.0, 5.0]]];
        let d = mmc_classify(&model, &subjects).unwrap();
        assert_eq!(d.subject_index, 0);
        assert!(!d.confident);
        assert!(d.score < 0.0);
    }

    #[test]
    fn mmc_argmax_is_shift_invariant() {
        let mut rng = SplitMix64::new(2024);
        let model = small_model();
        let subjects: Vec<Vec<Vec<f64>>> = (0..4)
            .map(|_| {
                (0..3)
                    .map(|_| vec![rng.range_f64(0.0, 2.0), rng.range_f64(0.0, 2.0)])
                    .collect()
            })
            .collect();
        let base = mmc_classify(&model, &subjects).unwrap();
        let mut shifted = model.clone();
        shifted.bias += 5.0;
        let moved = mmc_classify(&shifted, &subjects).unwrap();
        assert_eq!(base.subject_index, moved.subject_index);
        assert_abs_diff_eq!(moved.score, base.score + 5.0, epsilon = 1e-12);
    }

    #[test]
    fn mmc_matches_brute_force_oracle() {
        let mut rng = SplitMix64::new(7551);
        let model = SelectionModel::new(
            Method::Sfisher,
            SolverKind::Mp,
            8,
            vec![1, 3, 6],
            vec![1.5, -0.75, 0.25],
            -0.1,
            Provenance { seed: 0, ratio: (1, 1), digest: 0 },
        )
        .unwrap();
        for _ in 0..20 {
            let subjects: Vec<Vec<Vec<f64>>> = (0..3)
                .map(|_| {
                    (0..4)
                        .map(|_| (0..3).map(|_| rng.range_f64(0.0, 1.0)).collect())
                        .collect()
                })
                .collect();
            let got = mmc_classify(&model, &subjects).unwrap();
            let mut best = (0usize, f64::NEG_INFINITY);
            for (s, diffs) in subjects.iter().enumerate() {
                for d in diffs {
                    let g = model.bias
                        + model.weights.iter().zip(d).map(|(w, x)| w * x).sum::<f64>();
                    if g > best.1 {
                        best = (s, g);
                    }
                }
            }
            assert_eq!(got.subject_index, best.0);
            assert_abs_diff_eq!(got.score, best.1, epsilon = 1e-12);
        }
    }

    #[test]
    fn fisher_separates_two_gaussian_blobs() {
        let mut rng = SplitMix64::new(909);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..60 {
            let c = i % 2;
            let center = if c == 0 { -4.0 } else { 4.0 };
            x.push(vec![center + rng.normal(), 0.5 * rng.normal()]);
            y.push(c);
        }
        let model = fisher_fit(&x, &y, 1).unwrap();
        let mean_gap = (model.class_means[[0, 0]] - model.class_means[[1, 0]]).abs();
        let mut pooled = 0.0;
        for (v, &c) in x.iter().zip(&y) {
            let p = model.project(v).unwrap()[0];
            let diff = p - model.class_means[[c, 0]];
            pooled += diff * diff;
        }
        let pooled_std = (pooled / x.len() as f64).sqrt();
        assert!(
            mean_gap > 5.0 * pooled_std,
            "gap {mean_gap:.3} vs std {pooled_std:.3}"
        );
        // Classification recovers every training label.
        for (v, &c) in x.iter().zip(&y) {
            assert_eq!(model.classify(v).unwrap(), c);
        }
    }

    #[test]
    fn duplicate_features_do_not_break_the_fit() {
        let mut rng = SplitMix64::new(515);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let c = i % 2;
            let base = if c == 0 { -2.0 } else { 2.0 } + rng.normal();
            // Second coordinate duplicates the first: S_w is rank deficient.
            x.push(vec![base, base, rng.normal()]);
            y.push(c);
        }
        let model = fisher_fit(&x, &y, 1).unwrap();
        let correct = x
            .iter()
            .zip(&y)
            .filter(|(v, &c)| model.classify(v).unwrap() == c)
            .count();
        assert!(correct >= 38, "{correct}/40");
    }

    #[test]
    fn fisher_rejects_degenerate_setups() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(fisher_fit(&x, &[0, 0], 1).is_err());
        assert!(fisher_fit(&x, &[0, 1], 2).is_err());
        assert!(fisher_fit(&x, &[0], 1).is_err());
    }

    #[test]
    fn two_class_direction_is_collinear_with_the_mse_solution() {
        use crate::shk::{dense_least_squares, make_margin, MarginPreset};
        use crate::types::{AugmentedFeatureMatrix, AugmentedSample, FeatureVector, Label};
        let mut rng = SplitMix64::new(3433);
        let d = 4;
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut samples = Vec::new();
        let mut labels = Vec::new();
        for i in 0..50 {
            let c = i % 3 != 0; // unbalanced: 17 vs 33
            let shift = if c { 1.5 } else { -1.5 };
            let v: Vec<f64> = (0..d)
                .map(|j| if j == 0 { shift + rng.normal() } else { rng.normal() })
                .collect();
            x.push(v.clone());
            y.push(c as usize);
            let label = if c { Label::Positive } else { Label::Negative };
            let fv = FeatureVector::new(Array1::from_vec(v)).unwrap();
            samples.push(AugmentedSample::signed(&fv, label));
            labels.push(label);
        }
        let fisher = fisher_fit(&x, &y, 1).unwrap();
        let matrix = AugmentedFeatureMatrix::from_samples(samples).unwrap();
        let margin = make_margin(MarginPreset::Sfisher, &labels).unwrap();
        let mse = dense_least_squares(&matrix, margin.values(), &[]).unwrap();
        let mse_dir = mse.densify(d + 1).unwrap().weights;
        let fisher_dir = fisher.projection.row(0).to_vec();
        let dot: f64 = mse_dir.iter().zip(&fisher_dir).map(|(a, b)| a * b).sum();
        let nm: f64 = mse_dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nf: f64 = fisher_dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let cos = (dot / (nm * nf)).abs();
        assert!(cos > 0.999, "|cos| = {cos:.6}");
    }

    #[test]
    fn fisher_decisions_survive_positive_diagonal_scaling() {
        let mut rng = SplitMix64::new(8881);
        let d = 5;
        let scales: Vec<f64> = (0..d).map(|_| rng.range_f64(0.5, 2.0)).collect();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..90 {
            let c = i % 3;
            let v: Vec<f64> = (0..d)
                .map(|j| if j == c { 3.0 + rng.normal() } else { rng.normal() })
                .collect();
            x.push(v);
            y.push(c);
        }
        let scaled: Vec<Vec<f64>> = x
            .iter()
            .map(|v| v.iter().zip(&scales).map(|(a, s)| a * s).collect())
            .collect();
        let plain = fisher_fit(&x, &y, 2).unwrap();
        let scaled_model = fisher_fit(&scaled, &y, 2).unwrap();
        for _ in 0..30 {
            let c = rng.below(3) as usize;
            let v: Vec<f64> = (0..d)
                .map(|j| if j == c { 3.0 + rng.normal() } else { rng.normal() })
                .collect();
            let vs: Vec<f64> = v.iter().zip(&scales).map(|(a, s)| a * s).collect();
            assert_eq!(
                plain.classify(&v).unwrap(),
                scaled_model.classify(&vs).unwrap()
            );
        }
    }

    #[test]
    fn gather_then_classify_equals_classify_gathered() {
        let model = SelectionModel::new(
            Method::Shk,
            SolverKind::Omp,
            6,
            vec![0, 3, 5],
            vec![1.0, -1.0, 0.5],
            0.0,
            Provenance { seed: 0, ratio: (1, 1), digest: 0 },
        )
        .unwrap();
        let mut rng = SplitMix64::new(112);
        let full_gallery: Vec<(Vec<f64>, String)> = (0..4)
            .map(|s| {
                let v: Vec<f64> = (0..6).map(|_| rng.range_f64(0.0, 1.0)).collect();
                (v, format!("g{s}"))
            })
            .collect();
        let probe_full: Vec<f64> = (0..6).map(|_| rng.range_f64(0.0, 1.0)).collect();
        let reduced_gallery: Vec<(Vec<f64>, String)> = full_gallery
            .iter()
            .map(|(v, s)| (model.reduce(v).unwrap(), s.clone()))
            .collect();
        let probe_reduced = model.reduce(&probe_full).unwrap();
        let (a, _) = nnc_classify(&reduced_gallery, &probe_reduced, DistanceKind::L1).unwrap();
        // Reducing first must agree with reducing inline.
        let inline: Vec<(Vec<f64>, String)> = full_gallery
            .iter()
            .map(|(v, s)| (model.support.iter().map(|&i| v[i]).collect(), s.clone()))
            .collect();
        let probe_inline: Vec<f64> = model.support.iter().map(|&i| probe_full[i]).collect();
        let (b, _) = nnc_classify(&inline, &probe_inline, DistanceKind::L1).unwrap();
        assert_eq!(a, b);
    }
}
