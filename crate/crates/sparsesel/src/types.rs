//! Linear-model data types shared by the solvers and the discriminant
//! evaluation.
//!
//! Samples are augmented with a leading constant 1 so the bias folds into the
//! weight vector; negative samples are stored negated, which turns "classify
//! both classes correctly" into the single-sided system `Y a > 0`. Column 0
//! of the augmented matrix is always the bias column.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Positive,
    Negative,
}

/// Raw feature vector of length `d >= 1`, all entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Array1<f64>,
}

impl FeatureVector {
    pub fn new(values: Array1<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::input("feature vector must have length >= 1"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite feature entry {v}")));
        }
        Ok(FeatureVector { values })
    }

    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        FeatureVector::new(Array1::from_vec(values))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> ArrayView1<'_, f64> {
        self.values.view()
    }

    /// `[1, x_1, ..., x_d]`.
    pub fn augmented(&self) -> Array1<f64> {
        let mut out = Array1::zeros(self.len() + 1);
        out[0] = 1.0;
        out.slice_mut(ndarray::s![1..]).assign(&self.values);
        out
    }
}

/// One augmented sample. Construction leaves the raw `[1, x...]` layout in
/// place; [`AugmentedSample::apply_sign`] negates negative-labelled samples so
/// the matrix can demand `Y a > 0` uniformly.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSample {
    values: Array1<f64>,
    label: Label,
    sign_applied: bool,
}

impl AugmentedSample {
    pub fn new(x: &FeatureVector, label: Label) -> Self {
        AugmentedSample {
            values: x.augmented(),
            label,
            sign_applied: false,
        }
    }

    /// Convenience: construct and apply the class sign in one step.
    pub fn signed(x: &FeatureVector, label: Label) -> Self {
        AugmentedSample::new(x, label).apply_sign()
    }

    pub fn apply_sign(mut self) -> Self {
        if !self.sign_applied {
            if self.label == Label::Negative {
                self.values.mapv_inplace(|v| -v);
            }
            self.sign_applied = true;
        }
        self
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn sign_applied(&self) -> bool {
        self.sign_applied
    }

    pub fn values(&self) -> ArrayView1<'_, f64> {
        self.values.view()
    }
}

/// Stacked signed augmented samples, `n x (d+1)`. The label list is retained
/// when rows come from labelled samples; raw dictionaries carry none.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedFeatureMatrix {
    data: Array2<f64>,
    labels: Option<Vec<Label>>,
}

impl AugmentedFeatureMatrix {
    pub fn from_samples(samples: Vec<AugmentedSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::input("need at least one sample"));
        }
        let dim = samples[0].values.len();
        if dim < 2 {
            return Err(Error::input("augmented dimension must be >= 2"));
        }
        let mut data = Array2::zeros((samples.len(), dim));
        let mut labels = Vec::with_capacity(samples.len());
        for (i, s) in samples.iter().enumerate() {
            if !s.sign_applied {
                return Err(Error::input(format!(
                    "sample {i} has not had its class sign applied"
                )));
            }
            if s.values.len() != dim {
                return Err(Error::shape(format!(
                    "sample {i} has dimension {} but expected {dim}",
                    s.values.len()
                )));
            }
            data.row_mut(i).assign(&s.values);
            labels.push(s.label);
        }
        Ok(AugmentedFeatureMatrix {
            data,
            labels: Some(labels),
        })
    }

    /// Wraps an arbitrary dense matrix as a dictionary (no labels). Used for
    /// synthetic solver instances where rows are not classed samples.
    pub fn from_raw(data: Array2<f64>) -> Result<Self> {
        if data.nrows() < 1 || data.ncols() < 2 {
            return Err(Error::shape(format!(
                "matrix must be at least 1x2, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(AugmentedFeatureMatrix { data, labels: None })
    }

    pub fn from_raw_labeled(data: Array2<f64>, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != data.nrows() {
            return Err(Error::shape(format!(
                "{} labels for {} rows",
                labels.len(),
                data.nrows()
            )));
        }
        let mut m = AugmentedFeatureMatrix::from_raw(data)?;
        m.labels = Some(labels);
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// Column count `d + 1` (bias column included).
    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.data.column(j)
    }

    pub fn labels(&self) -> Option<&[Label]> {
        self.labels.as_deref()
    }

    /// `Y a` for an augmented coefficient vector of length `dim()`.
    pub fn product(&self, a: &Array1<f64>) -> Result<Array1<f64>> {
        if a.len() != self.dim() {
            return Err(Error::shape(format!(
                "coefficient vector has length {} but matrix has {} columns",
                a.len(),
                self.dim()
            )));
        }
        Ok(self.data.dot(a))
    }
}

/// Bias plus weight vector, the dense form of a discriminant.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub bias: f64,
    pub weights: Array1<f64>,
}

impl WeightVector {
    pub fn new(bias: f64, weights: Array1<f64>) -> Result<Self> {
        if !bias.is_finite() || weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("weight entries must be finite"));
        }
        Ok(WeightVector { bias, weights })
    }

    pub fn zeros(d: usize) -> Self {
        WeightVector {
            bias: 0.0,
            weights: Array1::zeros(d),
        }
    }

    /// `[bias, w_1, ..., w_d]`, aligned with augmented matrix columns.
    pub fn augmented(&self) -> Array1<f64> {
        let mut out = Array1::zeros(self.weights.len() + 1);
        out[0] = self.bias;
        out.slice_mut(ndarray::s![1..]).assign(&self.weights);
        out
    }

    pub fn from_augmented(a: ArrayView1<'_, f64>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::shape("augmented vector must be nonempty"));
        }
        WeightVector::new(a[0], a.slice(ndarray::s![1..]).to_owned())
    }
}

/// Strictly positive per-sample targets for `Y a = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginVector {
    values: Array1<f64>,
}

impl MarginVector {
    pub fn new(values: Array1<f64>) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::NonPositiveMargin { index: i, value: v });
            }
        }
        if values.is_empty() {
            return Err(Error::input("margin vector must be nonempty"));
        }
        Ok(MarginVector { values })
    }

    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        MarginVector::new(Array1::from_elem(n, value))
    }

    pub fn ones(n: usize) -> Result<Self> {
        MarginVector::uniform(n, 1.0)
    }

    #[cfg(test)]
    pub(crate) fn unchecked(values: Array1<f64>) -> Self {
        MarginVector { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.dot(&self.values).sqrt()
    }
}

/// Sparse coefficient vector over augmented columns: sorted unique support
/// indices in `[0, d]` with aligned values, plus the solver's final residual
/// norm, iteration count, and convergence flag.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSolution {
    pub support: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SparseSolution {
    pub fn new(
        support: Vec<usize>,
        coefficients: Vec<f64>,
        residual_norm: f64,
        iterations: usize,
        converged: bool,
    ) -> Result<Self> {
        if support.len() != coefficients.len() {
            return Err(Error::shape(format!(
                "{} support indices but {} coefficients",
                support.len(),
                coefficients.len()
            )));
        }
        if !support.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::input("support must be strictly increasing"));
        }
        if !(residual_norm >= 0.0) {
            return Err(Error::input(format!("negative residual norm {residual_norm}")));
        }
        Ok(SparseSolution {
            support,
            coefficients,
            residual_norm,
            iterations,
            converged,
        })
    }

    pub fn nnz(&self) -> usize {
        self.support.len()
    }

    /// Dense augmented vector of the given total dimension `d + 1`.
    pub fn augmented_vector(&self, dim: usize) -> Result<Array1<f64>> {
        let mut out = Array1::zeros(dim);
        for (&j, &c) in self.support.iter().zip(&self.coefficients) {
            if j >= dim {
                return Err(Error::shape(format!(
                    "support index {j} out of range for dimension {dim}"
                )));
            }
            out[j] = c;
        }
        Ok(out)
    }

    /// Dense `WeightVector` for a model with `d = dim - 1` raw features.
    pub fn densify(&self, dim: usize) -> Result<WeightVector> {
        WeightVector::from_augmented(self.augmented_vector(dim)?.view())
    }

    /// Rebuilds the sparse form from a dense weight vector, dropping entries
    /// with `|value| <= tol`. Residual metadata is supplied by the caller.
    pub fn from_dense(
        w: &WeightVector,
        tol: f64,
        residual_norm: f64,
        iterations: usize,
        converged: bool,
    ) -> Self {
        let a = w.augmented();
        let mut support = Vec::new();
        let mut coefficients = Vec::new();
        for (j, &v) in a.iter().enumerate() {
            if v.abs() > tol {
                support.push(j);
                coefficients.push(v);
            }
        }
        SparseSolution {
            support,
            coefficients,
            residual_norm,
            iterations,
            converged,
        }
    }
}

/// `g(x) = w0 + w . x`.
pub fn discriminant(w: &WeightVector, x: &FeatureVector) -> Result<f64> {
    if w.weights.len() != x.len() {
        return Err(Error::shape(format!(
            "weight dimension {} does not match feature dimension {}",
            w.weights.len(),
            x.len()
        )));
    }
    Ok(w.bias + w.weights.dot(&x.values()))
}

/// Error vector `e = Y a - b`.
pub fn residual(
    y: &AugmentedFeatureMatrix,
    a: &WeightVector,
    b: &MarginVector,
) -> Result<Array1<f64>> {
    if b.len() != y.n() {
        return Err(Error::shape(format!(
            "margin length {} does not match sample count {}",
            b.len(),
            y.n()
        )));
    }
    let scores = y.product(&a.augmented())?;
    Ok(scores - b.values())
}

pub(crate) fn l2_norm(v: ArrayView1<'_, f64>) -> f64 {
    v.dot(&v).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn feature_vector_rejects_empty_and_nonfinite() {
        assert!(FeatureVector::from_vec(vec![]).is_err());
        assert!(FeatureVector::from_vec(vec![1.0, f64::NAN]).is_err());
        assert!(FeatureVector::from_vec(vec![1.0, f64::INFINITY]).is_err());
        assert!(FeatureVector::from_vec(vec![0.0]).is_ok());
    }

    #[test]
    fn augmentation_prepends_one() {
        let x = FeatureVector::from_vec(vec![2.0, 3.0]).unwrap();
        assert_eq!(x.augmented(), array![1.0, 2.0, 3.0]);
    }

    #[test]
    fn sample_sign_negates_negative_class_in_full() {
        let x = FeatureVector::from_vec(vec![2.0, 3.0]).unwrap();
        let raw = AugmentedSample::new(&x, Label::Negative);
        assert_eq!(raw.values()[0], 1.0);
        assert!(!raw.sign_applied());
        let signed = raw.apply_sign();
        assert_eq!(signed.values().to_owned(), array![-1.0, -2.0, -3.0]);
        let pos = AugmentedSample::signed(&x, Label::Positive);
        assert_eq!(pos.values().to_owned(), array![1.0, 2.0, 3.0]);
    }

    #[test]
    fn sign_application_is_idempotent() {
        let x = FeatureVector::from_vec(vec![1.5]).unwrap();
        let s = AugmentedSample::signed(&x, Label::Negative);
        let twice = s.clone().apply_sign();
        assert_eq!(s, twice);
    }

    #[test]
    fn matrix_rejects_unsigned_rows_and_ragged_dims() {
        let x = FeatureVector::from_vec(vec![1.0]).unwrap();
        let unsigned = AugmentedSample::new(&x, Label::Negative);
        assert!(AugmentedFeatureMatrix::from_samples(vec![unsigned]).is_err());

        let a = AugmentedSample::signed(&x, Label::Positive);
        let y = FeatureVector::from_vec(vec![1.0, 2.0]).unwrap();
        let b = AugmentedSample::signed(&y, Label::Positive);
        assert!(AugmentedFeatureMatrix::from_samples(vec![a, b]).is_err());

        assert!(AugmentedFeatureMatrix::from_samples(vec![]).is_err());
    }

    #[test]
    fn matrix_keeps_labels_and_shape() {
        let x = FeatureVector::from_vec(vec![0.5, 0.2]).unwrap();
        let rows = vec![
            AugmentedSample::signed(&x, Label::Positive),
            AugmentedSample::signed(&x, Label::Negative),
        ];
        let m = AugmentedFeatureMatrix::from_samples(rows).unwrap();
        assert_eq!((m.n(), m.dim()), (2, 3));
        assert_eq!(m.labels().unwrap(), &[Label::Positive, Label::Negative]);
        assert_eq!(m.data().row(1).to_owned(), array![-1.0, -0.5, -0.2]);
    }

    #[test]
    fn discriminant_zero_model_is_zero() {
        let w = WeightVector::zeros(3);
        let x = FeatureVector::from_vec(vec![4.0, -1.0, 9.0]).unwrap();
        assert_eq!(discriminant(&w, &x).unwrap(), 0.0);
    }

    #[test]
    fn discriminant_small_example() {
        let w = WeightVector::new(1.0, array![2.0]).unwrap();
        let x = FeatureVector::from_vec(vec![3.0]).unwrap();
        assert_eq!(discriminant(&w, &x).unwrap(), 7.0);
    }

    #[test]
    fn discriminant_rejects_dimension_mismatch() {
        let w = WeightVector::new(0.0, array![1.0, 2.0]).unwrap();
        let x = FeatureVector::from_vec(vec![1.0]).unwrap();
        assert!(discriminant(&w, &x).is_err());
    }

    #[test]
    fn discriminant_matches_dense_dot_on_random_sparse_model() {
        let mut rng = SplitMix64::new(17);
        let d = 5;
        let sol = SparseSolution::new(vec![0, 2, 4], vec![0.7, -1.3, 2.2], 0.0, 3, true).unwrap();
        let w = sol.densify(d + 1).unwrap();
        for _ in 0..20 {
            let x =
                FeatureVector::new(Array1::from_shape_fn(d, |_| rng.normal())).unwrap();
            let aug = x.augmented();
            let dense: f64 = sol
                .augmented_vector(d + 1)
                .unwrap()
                .iter()
                .zip(aug.iter())
                .map(|(a, y)| a * y)
                .sum();
            assert_abs_diff_eq!(discriminant(&w, &x).unwrap(), dense, epsilon = 1e-12);
        }
    }

    #[test]
    fn residual_zero_model_gives_negated_margin() {
        let data = array![[1.0, 2.0], [1.0, -1.0], [1.0, 0.5]];
        let y = AugmentedFeatureMatrix::from_raw(data).unwrap();
        let a = WeightVector::zeros(1);
        let b = MarginVector::ones(3).unwrap();
        let e = residual(&y, &a, &b).unwrap();
        assert_eq!(e, array![-1.0, -1.0, -1.0]);
    }

    #[test]
    fn residual_vanishes_on_exact_solution() {
        let data = array![[1.0, 0.0], [0.0, 1.0]];
        let y = AugmentedFeatureMatrix::from_raw(data).unwrap();
        let a = WeightVector::new(2.0, array![3.0]).unwrap();
        let b = MarginVector::new(array![2.0, 3.0]).unwrap();
        let e = residual(&y, &a, &b).unwrap();
        assert!(e.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn residual_matches_hand_computation_on_random_instance() {
        let mut rng = SplitMix64::new(23);
        let data = Array2::from_shape_fn((6, 4), |_| rng.normal());
        let y = AugmentedFeatureMatrix::from_raw(data.clone()).unwrap();
        let w = WeightVector::new(rng.normal(), Array1::from_shape_fn(3, |_| rng.normal()))
            .unwrap();
        let b =
            MarginVector::new(Array1::from_shape_fn(6, |_| rng.range_f64(0.1, 2.0))).unwrap();
        let e = residual(&y, &w, &b).unwrap();
        let a = w.augmented();
        for i in 0..6 {
            let mut row = 0.0;
            for j in 0..4 {
                row += data[[i, j]] * a[j];
            }
            assert_abs_diff_eq!(e[i], row - b.values()[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn residual_rejects_margin_length_mismatch() {
        let y = AugmentedFeatureMatrix::from_raw(array![[1.0, 0.0]]).unwrap();
        let a = WeightVector::zeros(1);
        let b = MarginVector::ones(2).unwrap();
        assert!(residual(&y, &a, &b).is_err());
    }

    #[test]
    fn margin_vector_requires_strict_positivity() {
        assert!(MarginVector::new(array![1.0, 0.0]).is_err());
        assert!(MarginVector::new(array![1.0, -2.0]).is_err());
        assert!(MarginVector::new(array![f64::NAN]).is_err());
        assert!(MarginVector::new(array![0.5, 2.0]).is_ok());
    }

    #[test]
    fn sparse_solution_validates_support() {
        assert!(SparseSolution::new(vec![0, 0], vec![1.0, 2.0], 0.0, 0, true).is_err());
        assert!(SparseSolution::new(vec![2, 1], vec![1.0, 2.0], 0.0, 0, true).is_err());
        assert!(SparseSolution::new(vec![1], vec![1.0, 2.0], 0.0, 0, true).is_err());
        assert!(SparseSolution::new(vec![1], vec![1.0], -1.0, 0, true).is_err());
    }

    #[test]
    fn densify_sparsify_round_trip_is_identity() {
        let sol = SparseSolution::new(vec![0, 3], vec![0.5, -2.0], 0.25, 7, true).unwrap();
        let dense = sol.densify(5).unwrap();
        assert_eq!(dense.bias, 0.5);
        assert_eq!(dense.weights, array![0.0, 0.0, -2.0, 0.0]);
        let back = SparseSolution::from_dense(&dense, 0.0, 0.25, 7, true);
        assert_eq!(back.support, sol.support);
        assert_eq!(back.coefficients, sol.coefficients);
    }

    #[test]
    fn augmented_vector_rejects_out_of_range_support() {
        let sol = SparseSolution::new(vec![4], vec![1.0], 0.0, 1, true).unwrap();
        assert!(sol.augmented_vector(3).is_err());
    }
}
