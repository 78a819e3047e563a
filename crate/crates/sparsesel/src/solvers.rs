//! Sparse approximation solvers for the margin-fit system `Y a ~ b`.
//!
//! Three routes to a sparse coefficient vector:
//! * [`solve_mp`]: plain matching pursuit, one coefficient nudged per step;
//! * [`solve_omp`]: orthogonal matching pursuit, full least-squares re-solve
//!   on the growing support each step;
//! * [`solve_l1`]: proximal gradient descent (ISTA) on the l1-penalized
//!   objective `1/2 ||Ya - b||^2 + gamma ||a||_1`.
//!
//! [`oracle_l0`] finds the exact minimizer of `||Ya - b||^2 + tau^2 ||a||_0`
//! by support enumeration on small instances; the test suites use it to
//! certify the greedy solvers.
//!
//! Solvers are deterministic and RNG-free. Atom scores normalize columns on
//! the fly; the stored matrix stays unnormalized. The target `b` is a plain
//! real vector here: margin presets produce strictly positive targets, but
//! synthetic dictionary instances legitimately use targets with zero or
//! negative entries.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::linalg;
use crate::types::{l2_norm, AugmentedFeatureMatrix, SparseSolution};

/// Relative tie window for atom selection: a later column replaces the
/// incumbent only if its score beats it by more than this factor, so equal
/// scores resolve to the lowest column index.
const TIE_REL: f64 = 1e-12;

/// Pursuit stalls when the best selection score drops below this fraction of
/// the current residual norm; one more step would reduce the squared residual
/// by less than 1e-12 relative, which is noise at f64 precision.
const STALL_REL: f64 = 1e-6;

/// Coefficients with magnitude below this are pruned from l1 supports.
const L1_PRUNE: f64 = 1e-12;

/// Termination rule for the greedy pursuits. At least one criterion must be
/// active: a residual-norm threshold, a cap on distinct selected atoms, or
/// both.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingRule {
    pub residual_threshold: Option<f64>,
    pub max_atoms: Option<usize>,
}

impl StoppingRule {
    pub fn max_atoms(k: usize) -> Self {
        StoppingRule {
            residual_threshold: None,
            max_atoms: Some(k),
        }
    }

    pub fn residual(threshold: f64) -> Self {
        StoppingRule {
            residual_threshold: Some(threshold),
            max_atoms: None,
        }
    }

    pub fn both(threshold: f64, k: usize) -> Self {
        StoppingRule {
            residual_threshold: Some(threshold),
            max_atoms: Some(k),
        }
    }

    fn validate(&self) -> Result<()> {
        match (self.residual_threshold, self.max_atoms) {
            (None, None) => Err(Error::config(
                "stopping rule needs a residual threshold or an atom cap",
            )),
            (Some(t), _) if !(t >= 0.0) || !t.is_finite() => Err(Error::config(format!(
                "residual threshold must be finite and nonnegative, got {t}"
            ))),
            (_, Some(0)) => Err(Error::config("max_atoms must be at least 1")),
            _ => Ok(()),
        }
    }

    fn threshold_met(&self, rnorm: f64) -> bool {
        self.residual_threshold.map_or(false, |t| rnorm <= t)
    }

    fn atoms_full(&self, support_size: usize) -> bool {
        self.max_atoms.map_or(false, |k| support_size >= k)
    }
}

/// Configuration for [`solve_l1`]. `step_size = None` selects `1/L` with `L`
/// estimated by 30 power iterations on `Y^T Y` times a 1.01 safety factor.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Config {
    pub gamma: f64,
    pub max_iterations: usize,
    pub convergence_tol: f64,
    pub step_size: Option<f64>,
}

impl L1Config {
    pub fn new(gamma: f64) -> Self {
        L1Config {
            gamma,
            max_iterations: 10_000,
            convergence_tol: 1e-10,
            step_size: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::config(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations must be at least 1"));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::config("convergence_tol must be positive"));
        }
        if let Some(s) = self.step_size {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::config(format!("step size must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

fn candidate_columns(dim: usize, excluded: &[usize]) -> Vec<usize> {
    (0..dim).filter(|j| !excluded.contains(j)).collect()
}

struct PursuitSetup {
    candidates: Vec<usize>,
    norms_sq: Vec<f64>,
    norms: Vec<f64>,
    bnorm: f64,
}

fn prepare_pursuit(
    y: &AugmentedFeatureMatrix,
    b: &Array1<f64>,
    excluded: &[usize],
) -> Result<PursuitSetup> {
    if b.len() != y.n() {
        return Err(Error::shape(format!(
            "target length {} does not match row count {}",
            b.len(),
            y.n()
        )));
    }
    let candidates = candidate_columns(y.dim(), excluded);
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let mut norms_sq = Vec::with_capacity(candidates.len());
    for &j in &candidates {
        let col = y.column(j);
        let nsq = col.dot(&col);
        if nsq == 0.0 {
            return Err(Error::ZeroNormColumn(j));
        }
        norms_sq.push(nsq);
    }
    let norms = norms_sq.iter().map(|v| v.sqrt()).collect();
    Ok(PursuitSetup {
        candidates,
        norms_sq,
        norms,
        bnorm: l2_norm(b.view()),
    })
}

/// All column correlations `Y^T r` in one pass over the rows. Each entry is
/// the same increasing-row-index sum a per-column dot would produce, but the
/// matrix is touched sequentially, which is what makes pursuit affordable on
/// wide row-major data.
fn correlations(y: &AugmentedFeatureMatrix, r: &Array1<f64>) -> Array1<f64> {
    let mut corr = Array1::<f64>::zeros(y.dim());
    for (i, row) in y.data().rows().into_iter().enumerate() {
        let ri = r[i];
        if ri != 0.0 {
            corr.scaled_add(ri, &row);
        }
    }
    corr
}

/// Best-correlated candidate: maximizes `|<col, r>| / ||col||`, lowest index
/// on ties within [`TIE_REL`]. Returns `(candidate position, score, <col,r>)`.
fn select_atom(
    setup: &PursuitSetup,
    corr: &Array1<f64>,
    skip: &[bool],
) -> Option<(usize, f64, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for (pos, &j) in setup.candidates.iter().enumerate() {
        if skip.get(pos).copied().unwrap_or(false) {
            continue;
        }
        let c = corr[j];
        let score = c.abs() / setup.norms[pos];
        match best {
            None => best = Some((pos, score, c)),
            Some((_, bs, _)) if score > bs * (1.0 + TIE_REL) => {
                best = Some((pos, score, c));
            }
            _ => {}
        }
    }
    best
}

fn sorted_solution(
    pairs: Vec<(usize, f64)>,
    residual_norm: f64,
    iterations: usize,
) -> SparseSolution {
    let mut pairs = pairs;
    pairs.sort_by_key(|&(j, _)| j);
    let (support, coefficients) = pairs.into_iter().unzip();
    SparseSolution {
        support,
        coefficients,
        residual_norm,
        iterations,
        converged: true,
    }
}

/// Matching pursuit. Per step, adds `<col, r> / ||col||^2` to the selected
/// column's coefficient; the residual norm never increases. Halts when a
/// stopping criterion fires or no candidate correlates with the residual.
pub fn solve_mp(
    y: &AugmentedFeatureMatrix,
    b: &Array1<f64>,
    stop: &StoppingRule,
    excluded: &[usize],
) -> Result<SparseSolution> {
    solve_mp_traced(y, b, stop, excluded).map(|(sol, _)| sol)
}

/// As [`solve_mp`], also returning the residual-norm history (first entry is
/// the pre-iteration norm `||b||`).
pub fn solve_mp_traced(
    y: &AugmentedFeatureMatrix,
    b: &Array1<f64>,
    stop: &StoppingRule,
    excluded: &[usize],
) -> Result<(SparseSolution, Vec<f64>)> {
    stop.validate()?;
    let setup = prepare_pursuit(y, b, excluded)?;
    let no_skip = vec![false; setup.candidates.len()];
    let mut coeff = vec![0.0_f64; setup.candidates.len()];
    let mut selected = vec![false; setup.candidates.len()];
    let mut support_size = 0usize;
    let mut r = b.clone();
    let mut rnorm = setup.bnorm;
    let mut history = vec![rnorm];
    let mut iterations = 0usize;

    loop {
        if stop.threshold_met(rnorm) || stop.atoms_full(support_size) {
            break;
        }
        let corr = correlations(y, &r);
        let Some((pos, score, c)) = select_atom(&setup, &corr, &no_skip) else {
            break;
        };
        if score <= STALL_REL * rnorm {
            break;
        }
        let j = setup.candidates[pos];
        let delta = c / setup.norms_sq[pos];
        coeff[pos] += delta;
        r.scaled_add(-delta, &y.column(j));
        rnorm = l2_norm(r.view());
        iterations += 1;
        history.push(rnorm);
        if !selected[pos] {
            selected[pos] = true;
            support_size += 1;
        }
    }

    let pairs: Vec<(usize, f64)> = setup
        .candidates
        .iter()
        .zip(&coeff)
        .filter(|&(_, &c)| c != 0.0)
        .map(|(&j, &c)| (j, c))
        .collect();
    Ok((sorted_solution(pairs, rnorm, iterations), history))
}

/// Maps a failed support least-squares solve to the offending-atom error.
pub(crate) fn support_least_squares(
    y: &AugmentedFeatureMatrix,
    b: &Array1<f64>,
    support: &[usize],
) -> Result<(Array1<f64>, Array1<f64>)> {
    let cols: Vec<ArrayView1<'_, f64>> = support.iter().map(|&j| y.column(j)).collect();
    linalg::least_squares_columns(&cols, b).ok_or(Error::RankDeficient {
        atom: *support.last().expect("nonempty support"),
    })
}

/// Orthogonal matching pursuit. Same selection rule as MP, but every step
/// re-solves least squares on the support, so the residual stays orthogonal
/// to all selected columns and strictly shrinks while atoms are added.
pub fn solve_omp(
    y: &AugmentedFeatureMatrix,
    b: &Array1<f64>,
    stop: &StoppingRule,
    excluded: &[usize],
) -> Result<SparseSolution> {
    solve_omp_traced(y, b, stop, excluded).map(|(sol, _)| sol)
}

/// As [`solve_omp`], also returning the residual-norm history.
pub fn solve_omp_traced(
    y: &AugmentedFeatureMatrix,
    b: &Array1<f64>,
    stop: &StoppingRule,
    excluded: &[usize],
) -> Result<(SparseSolution, Vec<f64>)> {
    stop.validate()?;
    let setup = prepare_pursuit(y, b, excluded)?;
    let mut in_support = vec![false; setup.candidates.len()];
    let mut support: Vec<usize> = Vec::new();
    // Contiguous copies of the selected columns. The Gram and the projected
    // target grow one row per atom, so each step only pays for dots against
    // the newest column instead of rebuilding everything from strided views.
    let mut picked: Vec<Array1<f64>> = Vec::new();
    let mut gram_lower: Vec<Vec<f64>> = Vec::new();
    let mut proj: Vec<f64> = Vec::new();
    let mut coeff = Array1::<f64>::zeros(0);
    let mut r = b.clone();
    let mut rnorm = setup.bnorm;
    let mut history = vec![rnorm];
    let mut iterations = 0usize;

    loop {
        if stop.threshold_met(rnorm) || stop.atoms_full(support.len()) {
            break;
        }
        let corr = correlations(y, &r);
        let Some((pos, score, _)) = select_atom(&setup, &corr, &in_support) else {
            break;
        };
        if score <= STALL_REL * rnorm {
            break;
        }
        let j = setup.candidates[pos];
        support.push(j);
        in_support[pos] = true;
        let cj = y.column(j).to_owned();
        let mut row: Vec<f64> = picked.iter().map(|c| c.dot(&cj)).collect();
        row.push(cj.dot(&cj));
        proj.push(cj.dot(b));
        picked.push(cj);
        gram_lower.push(row);

        let k = support.len();
        let mut gram = Array2::<f64>::zeros((k, k));
        for (i, row) in gram_lower.iter().enumerate() {
            for (l, &g) in row.iter().enumerate() {
                gram[[i, l]] = g;
                gram[[l, i]] = g;
            }
        }
        let c = linalg::solve_spd(&gram, &Array1::from_vec(proj.clone()))
            .ok_or(Error::RankDeficient { atom: j })?;
        r = b.clone();
        for (ci, col) in c.iter().zip(&picked) {
            r.scaled_add(-ci, col);
        }
        coeff = c;
        rnorm = l2_norm(r.view());
        iterations += 1;
        history.push(rnorm);
    }

    let pairs: Vec<(usize, f64)> = support.iter().copied().zip(coeff.iter().copied()).collect();
    Ok((sorted_solution(pairs, rnorm, iterations), history))
}

/// Largest-eigenvalue bound for `Y^T Y` by 30 power iterations, padded by 1%.
fn lipschitz_bound(y: &AugmentedFeatureMatrix) -> f64 {
    let dim = y.dim();
    let mut v = Array1::<f64>::from_elem(dim, 1.0 / (dim as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..30 {
        let w = y.data().t().dot(&y.data().dot(&v));
        let nrm = l2_norm(w.view());
        if nrm == 0.0 {
            return 0.0;
        }
        lambda = nrm;
        v = w / nrm;
    }
    lambda * 1.01
}

pub(crate) fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

fn l1_objective(y: &AugmentedFeatureMatrix, b: &Array1<f64>, a: &Array1<f64>, gamma: f64) -> f64 {
    let r = y.data().dot(a) - b;
    0.5 * r.dot(&r) + gamma * a.iter().map(|v| v.abs()).sum::<f64>()
}

/// ISTA on `1/2 ||Ya - b||^2 + gamma ||a||_1`: gradient step then
/// soft-thresholding at `step * gamma`. Starts from zero; with the automatic
/// step the objective is non-increasing. Hitting `max_iterations` before the
/// iterate change drops under `convergence_tol` returns the last iterate with
/// `converged = false` rather than an error.
pub fn solve_l1(
    y: &AugmentedFeatureMatrix,
    b: &Array1<f64>,
    cfg: &L1Config,
    excluded: &[usize],
) -> Result<SparseSolution> {
    solve_l1_traced(y, b, cfg, excluded).map(|(sol, _)| sol)
}

/// As [`solve_l1`], also returning per-iteration objective values (first
/// entry is the zero-vector objective `1/2 ||b||^2`).
pub fn solve_l1_traced(
    y: &AugmentedFeatureMatrix,
    b: &Array1<f64>,
    cfg: &L1Config,
    excluded: &[usize],
) -> Result<(SparseSolution, Vec<f64>)> {
    cfg.validate()?;
    if b.len() != y.n() {
        return Err(Error::shape(format!(
            "target length {} does not match row count {}",
            b.len(),
            y.n()
        )));
    }
    let dim = y.dim();
    let candidates = candidate_columns(dim, excluded);
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let step = match cfg.step_size {
        Some(s) => s,
        None => {
            let l = lipschitz_bound(y);
            if l > 0.0 {
                1.0 / l
            } else {
                1.0
            }
        }
    };

    let mut a = Array1::<f64>::zeros(dim);
    let mut objectives = vec![l1_objective(y, b, &a, cfg.gamma)];
    let mut converged = false;
    let mut iterations = 0usize;
    for t in 1..=cfg.max_iterations {
        let grad = y.data().t().dot(&(y.data().dot(&a) - b));
        let mut a_next = Array1::<f64>::zeros(dim);
        for &j in &candidates {
            a_next[j] = soft_threshold(a[j] - step * grad[j], step * cfg.gamma);
        }
        let mut delta_sq = 0.0;
        for j in 0..dim {
            let d = a_next[j] - a[j];
            delta_sq += d * d;
        }
        a = a_next;
        iterations = t;
        objectives.push(l1_objective(y, b, &a, cfg.gamma));
        if delta_sq.sqrt() < cfg.convergence_tol {
            converged = true;
            break;
        }
    }

    let mut pairs = Vec::new();
    for &j in &candidates {
        if a[j].abs() >= L1_PRUNE {
            pairs.push((j, a[j]));
        } else {
            a[j] = 0.0;
        }
    }
    let rnorm = l2_norm((y.data().dot(&a) - b).view());
    let mut sol = sorted_solution(pairs, rnorm, iterations);
    sol.converged = converged;
    Ok((sol, objectives))
}

fn for_each_combination(pool: &[usize], k: usize, f: &mut impl FnMut(&[usize])) {
    fn recurse(
        pool: &[usize],
        k: usize,
        start: usize,
        current: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize]),
    ) {
        if current.len() == k {
            f(current);
            return;
        }
        let needed = k - current.len();
        for i in start..=pool.len().saturating_sub(needed) {
            current.push(pool[i]);
            recurse(pool, k, i + 1, current, f);
            current.pop();
        }
    }
    let mut current = Vec::with_capacity(k);
    recurse(pool, k, 0, &mut current, f);
}

/// Exact minimizer of `||Ya - b||^2 + tau^2 ||a||_0` by enumerating every
/// support of size at most `max_support`. Guarded to `d+1 <= 24` columns and
/// `max_support <= 12`; rank-deficient supports are skipped; ties resolve to
/// the lexicographically smallest support. `iterations` reports the number
/// of supports evaluated.
pub fn oracle_l0(
    y: &AugmentedFeatureMatrix,
    b: &Array1<f64>,
    tau: f64,
    max_support: usize,
    excluded: &[usize],
) -> Result<SparseSolution> {
    if y.dim() > 24 || max_support > 12 {
        return Err(Error::EnumerationBound(format!(
            "enumeration allows at most 24 columns and support 12, got {} columns, support {}",
            y.dim(),
            max_support
        )));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::config(format!("tau must be positive, got {tau}")));
    }
    if b.len() != y.n() {
        return Err(Error::shape(format!(
            "target length {} does not match row count {}",
            b.len(),
            y.n()
        )));
    }
    let candidates = candidate_columns(y.dim(), excluded);
    let bnorm = l2_norm(b.view());
    let mut best_support: Vec<usize> = Vec::new();
    let mut best_coeff: Vec<f64> = Vec::new();
    let mut best_rnorm = bnorm;
    let mut best_obj = bnorm * bnorm;
    let mut evaluated = 1usize;

    for k in 1..=max_support.min(candidates.len()) {
        for_each_combination(&candidates, k, &mut |support| {
            evaluated += 1;
            let cols: Vec<ArrayView1<'_, f64>> =
                support.iter().map(|&j| y.column(j)).collect();
            let Some((coeff, res)) = linalg::least_squares_columns(&cols, b) else {
                return;
            };
            let rnorm = l2_norm(res.view());
            let obj = rnorm * rnorm + tau * tau * k as f64;
            let better = obj < best_obj
                || (obj == best_obj && support < best_support.as_slice());
            if better {
                best_obj = obj;
                best_support = support.to_vec();
                best_coeff = coeff.to_vec();
                best_rnorm = rnorm;
            }
        });
    }

    SparseSolution::new(best_support, best_coeff, best_rnorm, evaluated, true)
}

/// Maximum absolute cosine between distinct columns. Zero-norm columns are
/// ignored.
pub fn coherence(y: &AugmentedFeatureMatrix) -> f64 {
    let dim = y.dim();
    let norms: Vec<f64> = (0..dim).map(|j| l2_norm(y.column(j))).collect();
    let mut worst = 0.0_f64;
    for i in 0..dim {
        if norms[i] == 0.0 {
            continue;
        }
        for j in i + 1..dim {
            if norms[j] == 0.0 {
                continue;
            }
            let c = y.column(i).dot(&y.column(j)).abs() / (norms[i] * norms[j]);
            worst = worst.max(c);
        }
    }
    worst
}
