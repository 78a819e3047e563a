//! Small dense linear algebra: Cholesky solves for SPD normal equations and
//! a cyclic Jacobi eigensolver for symmetric matrices. Problem sizes here are
//! at most a few hundred, so hand-rolled O(n^3) routines are plenty and keep
//! results bit-reproducible across platforms.

use ndarray::{Array1, Array2, ArrayView1};

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
/// Returns `None` when a pivot falls below `tol` times the largest diagonal
/// entry, i.e. the matrix is numerically singular. No regularization is
/// applied here; callers decide how to react.
pub(crate) fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let scale = (0..n).map(|i| a[[i, i]].abs()).fold(0.0_f64, f64::max);
    if scale == 0.0 {
        return None;
    }
    let tol = 1e-12 * scale;
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= tol {
                    return None;
                }
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Some(l)
}

/// Solves `L y = rhs` for lower-triangular `L`.
pub(crate) fn forward_substitute(l: &Array2<f64>, rhs: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut sum = rhs[i];
        for k in 0..i {
            sum -= l[[i, k]] * y[k];
        }
        y[i] = sum / l[[i, i]];
    }
    y
}

/// Solves `L^T x = rhs` for lower-triangular `L`.
pub(crate) fn back_substitute_transpose(l: &Array2<f64>, rhs: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let mut sum = rhs[i];
        for k in i + 1..n {
            sum -= l[[k, i]] * x[k];
        }
        x[i] = sum / l[[i, i]];
    }
    x
}

/// Solves `L L^T x = rhs` given the lower factor `L`.
pub(crate) fn cholesky_solve(l: &Array2<f64>, rhs: &Array1<f64>) -> Array1<f64> {
    back_substitute_transpose(l, &forward_substitute(l, rhs))
}

pub(crate) fn solve_spd(a: &Array2<f64>, rhs: &Array1<f64>) -> Option<Array1<f64>> {
    cholesky(a).map(|l| cholesky_solve(&l, rhs))
}

/// Least squares `min_c || A c - rhs ||` over the given columns, via normal
/// equations. Returns the coefficients and the residual vector, or `None`
/// when the Gram matrix is numerically singular.
pub(crate) fn least_squares_columns(
    cols: &[ArrayView1<f64>],
    rhs: &Array1<f64>,
) -> Option<(Array1<f64>, Array1<f64>)> {
    let k = cols.len();
    let mut gram = Array2::<f64>::zeros((k, k));
    let mut proj = Array1::<f64>::zeros(k);
    for i in 0..k {
        for j in 0..=i {
            let g = cols[i].dot(&cols[j]);
            gram[[i, j]] = g;
            gram[[j, i]] = g;
        }
        proj[i] = cols[i].dot(rhs);
    }
    let coeff = solve_spd(&gram, &proj)?;
    let mut residual = rhs.clone();
    for (c, col) in coeff.iter().zip(cols) {
        residual.scaled_add(-c, col);
    }
    Some((coeff, residual))
}

/// Eigen decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order with matching unit eigenvectors
/// as columns. Convergence to ~1e-14 relative off-diagonal mass.
pub(crate) fn symmetric_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    let scale = m.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[[p, q]] * m[[p, q]];
            }
        }
        if (2.0 * off).sqrt() < 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].partial_cmp(&m[[i, i]]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| m[[i, i]]).collect();
    let mut vectors = Array2::<f64>::zeros((n, n));
    for (out, &src) in order.iter().enumerate() {
        for r in 0..n {
            vectors[[r, out]] = v[[r, src]];
        }
    }
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn cholesky_reproduces_matrix() {
        let a = array![[4.0, 2.0, 0.6], [2.0, 5.0, 1.0], [0.6, 1.0, 3.0]];
        let l = cholesky(&a).unwrap();
        let back = l.dot(&l.t());
        for (x, y) in back.iter().zip(a.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_singular() {
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        assert!(cholesky(&a).is_none());
        let zero = Array2::<f64>::zeros((2, 2));
        assert!(cholesky(&zero).is_none());
    }

    #[test]
    fn spd_solve_matches_known_solution() {
        let a = array![[4.0, 1.0], [1.0, 3.0]];
        let x_true = array![2.0, -1.0];
        let rhs = a.dot(&x_true);
        let x = solve_spd(&a, &rhs).unwrap();
        assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn least_squares_residual_is_orthogonal_to_columns() {
        let y = array![
            [1.0, 0.5],
            [0.0, 1.0],
            [1.0, -0.5],
            [0.5, 0.25],
        ];
        let rhs = array![1.0, 2.0, 3.0, 4.0];
        let cols: Vec<_> = (0..2).map(|j| y.column(j)).collect();
        let (_, residual) = least_squares_columns(&cols, &rhs).unwrap();
        for col in &cols {
            assert_abs_diff_eq!(col.dot(&residual), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn least_squares_exact_when_rhs_in_span() {
        let y = array![[1.0, 0.0], [0.0, 2.0], [0.0, 0.0]];
        let rhs = array![3.0, 4.0, 0.0];
        let cols: Vec<_> = (0..2).map(|j| y.column(j)).collect();
        let (coeff, residual) = least_squares_columns(&cols, &rhs).unwrap();
        assert_abs_diff_eq!(coeff[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(coeff[1], 2.0, epsilon = 1e-12);
        let rnorm = residual.dot(&residual).sqrt();
        assert!(rnorm < 1e-12);
    }

    #[test]
    fn triangular_solves_agree_with_direct_inverse() {
        let a = array![[4.0, 2.0], [2.0, 5.0]];
        let l = cholesky(&a).unwrap();
        let rhs = array![1.0, -2.0];
        let y = forward_substitute(&l, &rhs);
        assert_abs_diff_eq!(l.dot(&y)[0], rhs[0], epsilon = 1e-14);
        assert_abs_diff_eq!(l.dot(&y)[1], rhs[1], epsilon = 1e-14);
        let x = back_substitute_transpose(&l, &rhs);
        let lt_x = l.t().dot(&x);
        assert_abs_diff_eq!(lt_x[0], rhs[0], epsilon = 1e-14);
        assert_abs_diff_eq!(lt_x[1], rhs[1], epsilon = 1e-14);
    }

    #[test]
    fn jacobi_diagonalizes_known_matrix() {
        // Eigenvalues of [[2,1],[1,2]] are 3 and 1.
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let (vals, vecs) = symmetric_eigen(&a);
        assert_abs_diff_eq!(vals[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], 1.0, epsilon = 1e-12);
        let v0 = vecs.column(0);
        assert_abs_diff_eq!(v0[0].abs(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-10);
    }

    #[test]
    fn jacobi_recovers_random_spectrum() {
        use crate::rng::SplitMix64;
        let mut rng = SplitMix64::new(31);
        let n = 8;
        let mut base = Array2::<f64>::zeros((n, n));
        for v in base.iter_mut() {
            *v = rng.normal();
        }
        let sym = &base + &base.t();
        let (vals, vecs) = symmetric_eigen(&sym);
        for i in 0..n {
            let v = vecs.column(i).to_owned();
            let av = sym.dot(&v);
            for k in 0..n {
                assert_abs_diff_eq!(av[k], vals[i] * v[k], epsilon = 1e-9);
            }
        }
        for i in 1..n {
            assert!(vals[i - 1] >= vals[i]);
        }
    }
}
