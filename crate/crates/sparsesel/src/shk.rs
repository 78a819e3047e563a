//! The sparse Ho-Kashyap loop and the fixed-margin presets.
//!
//! [`run_shk`] alternates two stages: a sparse solve of `Y a ~ b(t)` with a
//! frozen margin, then the margin update `b(t+1) = b(t) + 2 eta(t) e+(t)`
//! where `e+ = (e + |e|)/2` keeps only positive errors, so no margin entry
//! ever shrinks. The learn rate decays as `eta(t) = eta1 / t`. The loop stops
//! when `||b(t+1) - b(t)|| < epsilon` or the iteration cap is hit (reported
//! via a flag, not an error).
//!
//! [`MarginPreset`] covers the fixed-margin regimes: all-ones margins with
//! the bias column excluded from selection, and class-ratio margins whose
//! two-class minimum-squared-error solution is collinear with the Fisher
//! discriminant direction.

use std::io::Write;

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::solvers::{
    solve_l1, solve_mp, solve_omp, support_least_squares, L1Config, StoppingRule,
};
use crate::types::{l2_norm, AugmentedFeatureMatrix, Label, MarginVector, SparseSolution};

/// Inner sparse-approximation stage of the loop. `DenseLeastSquares` solves
/// the unconstrained least-squares problem over all candidate columns, which
/// turns the loop into the classic (non-sparse) procedure.
#[derive(Debug, Clone)]
pub enum InnerSolver {
    Mp(StoppingRule),
    Omp(StoppingRule),
    L1(L1Config),
    DenseLeastSquares,
}

#[derive(Debug, Clone)]
pub struct ShkConfig {
    /// Initial learn rate `eta(1)`, in (0, 1).
    pub eta1: f64,
    /// Stop when the margin moves less than this in l2 norm.
    pub epsilon: f64,
    pub max_outer_iterations: usize,
    /// Uniform value of the starting margin `b(0) > 0`.
    pub initial_margin: f64,
    pub inner: InnerSolver,
}

impl ShkConfig {
    /// Defaults: `eta1 = 0.5`, `epsilon = 1e-4`, 200 outer iterations,
    /// starting margin 1.
    pub fn new(inner: InnerSolver) -> Self {
        ShkConfig {
            eta1: 0.5,
            epsilon: 1e-4,
            max_outer_iterations: 200,
            initial_margin: 1.0,
            inner,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eta1 > 0.0 && self.eta1 < 1.0) {
            return Err(Error::config(format!(
                "eta1 must lie in (0, 1), got {}",
                self.eta1
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::config("epsilon must be positive"));
        }
        if self.max_outer_iterations == 0 {
            return Err(Error::config("max_outer_iterations must be at least 1"));
        }
        if !(self.initial_margin > 0.0) || !self.initial_margin.is_finite() {
            return Err(Error::config("initial_margin must be positive and finite"));
        }
        Ok(())
    }
}

/// One outer iteration of the loop, as recorded in the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ShkIterate {
    pub t: usize,
    /// Learn rate `eta1 / t` used at this iteration.
    pub eta: f64,
    /// Norm of the margin the inner solve saw, `||b(t)||`.
    pub margin_norm: f64,
    /// `||Y a(t) - b(t)||`.
    pub residual_norm: f64,
    /// `||e+(t)||`.
    pub eplus_norm: f64,
    pub support_size: usize,
}

/// Full history of a [`run_shk`] call: per-iteration scalars plus the margin
/// vectors `b(0), b(1), ...` for componentwise monotonicity checks.
#[derive(Debug, Clone, PartialEq)]
pub struct ShkTrace {
    pub iterates: Vec<ShkIterate>,
    pub margins: Vec<Array1<f64>>,
}

impl ShkTrace {
    /// CSV with columns `t,margin_norm,residual_norm,eplus_norm,support_size`
    /// and LF line endings.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(b"t,margin_norm,residual_norm,eplus_norm,support_size\n")?;
        for row in &self.iterates {
            writeln!(
                w,
                "{},{},{},{},{}",
                row.t, row.margin_norm, row.residual_norm, row.eplus_norm, row.support_size
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ShkOutcome {
    /// Sparse solution from the final inner solve.
    pub solution: SparseSolution,
    /// Final margin vector.
    pub margin: MarginVector,
    pub trace: ShkTrace,
    /// True when the loop stopped via the margin-change rule rather than the
    /// iteration cap.
    pub converged: bool,
}

/// `e+ = (e + |e|) / 2`, the elementwise positive part.
pub fn positive_part(e: &Array1<f64>) -> Array1<f64> {
    e.mapv(|v| 0.5 * (v + v.abs()))
}

/// `b + 2 eta e+`. Never decreases any component; the result stays strictly
/// positive.
pub fn margin_update(b: &MarginVector, e: &Array1<f64>, eta: f64) -> Result<MarginVector> {
    if e.len() != b.len() {
        return Err(Error::shape(format!(
            "error vector length {} does not match margin length {}",
            e.len(),
            b.len()
        )));
    }
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::config(format!("eta must be positive, got {eta}")));
    }
    for (i, &v) in b.values().iter().enumerate() {
        if !(v > 0.0) {
            return Err(Error::NonPositiveMargin { index: i, value: v });
        }
    }
    let next = b.values() + &(2.0 * eta * positive_part(e));
    MarginVector::new(next)
}

/// Fixed-margin regimes for the one-shot (non-adaptive) solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarginPreset {
    /// All-ones margin; pair it with excluding the bias column from
    /// candidacy so the hyperplane passes through the origin.
    Ssmes,
    /// Class-ratio margins: entry i equals (size of i's class) / n.
    Sfisher,
    /// Constant margin of the given value.
    Uniform(f64),
}

/// Builds the margin vector for a labelled sample set.
pub fn make_margin(preset: MarginPreset, labels: &[Label]) -> Result<MarginVector> {
    if labels.is_empty() {
        return Err(Error::input("make_margin needs at least one label"));
    }
    let n = labels.len() as f64;
    let values = match preset {
        MarginPreset::Ssmes => Array1::from_elem(labels.len(), 1.0),
        MarginPreset::Sfisher => {
            let pos = labels.iter().filter(|&&l| l == Label::Positive).count() as f64;
            let neg = labels.len() as f64 - pos;
            Array1::from_shape_fn(labels.len(), |i| match labels[i] {
                Label::Positive => pos / n,
                Label::Negative => neg / n,
            })
        }
        MarginPreset::Uniform(v) => Array1::from_elem(labels.len(), v),
    };
    MarginVector::new(values)
}

/// Columns eligible for selection under a preset: SSMES fixes the bias weight
/// to zero by excluding column 0.
pub fn preset_excluded_columns(preset: MarginPreset) -> &'static [usize] {
    match preset {
        MarginPreset::Ssmes => &[0],
        _ => &[],
    }
}

/// Unpenalized least squares `min_a ||Y a - b||` over all non-excluded
/// columns, reported in the same sparse-solution shape the staged solvers
/// use. Errors if the Gram matrix is singular.
pub fn dense_least_squares(
    y: &AugmentedFeatureMatrix,
    b: &Array1<f64>,
    excluded: &[usize],
) -> Result<SparseSolution> {
    let candidates: Vec<usize> = (0..y.dim()).filter(|j| !excluded.contains(j)).collect();
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let (coeff, res) = support_least_squares(y, b, &candidates)?;
    SparseSolution::new(candidates, coeff.to_vec(), l2_norm(res.view()), 1, true)
}

fn inner_solve(
    y: &AugmentedFeatureMatrix,
    b: &MarginVector,
    inner: &InnerSolver,
    excluded: &[usize],
) -> Result<SparseSolution> {
    match inner {
        InnerSolver::Mp(stop) => solve_mp(y, b.values(), stop, excluded),
        InnerSolver::Omp(stop) => solve_omp(y, b.values(), stop, excluded),
        InnerSolver::L1(cfg) => solve_l1(y, b.values(), cfg, excluded),
        InnerSolver::DenseLeastSquares => dense_least_squares(y, b.values(), excluded),
    }
}

/// Runs the margin-adaptation loop. Each outer iteration solves the sparse
/// stage from scratch against the current margin (no warm start), then grows
/// the margins by the positive errors. Inner-solver failures carry the outer
/// iteration number.
pub fn run_shk(
    y: &AugmentedFeatureMatrix,
    cfg: &ShkConfig,
    excluded: &[usize],
) -> Result<ShkOutcome> {
    cfg.validate()?;
    let mut b = MarginVector::uniform(y.n(), cfg.initial_margin)?;
    let mut trace = ShkTrace {
        iterates: Vec::new(),
        margins: vec![b.values().clone()],
    };
    let mut last: Option<SparseSolution> = None;
    let mut converged = false;

    for t in 1..=cfg.max_outer_iterations {
        let sol = inner_solve(y, &b, &cfg.inner, excluded).map_err(|e| Error::MarginLoop {
            iteration: t,
            source: Box::new(e),
        })?;
        let a = sol.augmented_vector(y.dim())?;
        let e = y.product(&a)? - b.values();
        let eplus = positive_part(&e);
        let eta = cfg.eta1 / t as f64;
        let b_next = margin_update(&b, &e, eta)?;
        let delta = l2_norm((b_next.values() - b.values()).view());
        trace.iterates.push(ShkIterate {
            t,
            eta,
            margin_norm: b.norm(),
            residual_norm: l2_norm(e.view()),
            eplus_norm: l2_norm(eplus.view()),
            support_size: sol.nnz(),
        });
        trace.margins.push(b_next.values().clone());
        last = Some(sol);
        b = b_next;
        if delta < cfg.epsilon {
            converged = true;
            break;
        }
    }

    Ok(ShkOutcome {
        solution: last.expect("at least one outer iteration"),
        margin: b,
        trace,
        converged,
    })
}

/// True when the discriminant classifies every signed row positively.
pub fn separates(y: &AugmentedFeatureMatrix, a: &Array1<f64>) -> Result<bool> {
    Ok(y.product(a)?.iter().all(|&s| s > 0.0))
}
