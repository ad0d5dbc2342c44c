//! Small dense linear-algebra helpers shared by the estimators.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Relative tolerance on singular values of a design matrix.
pub const DESIGN_REL_TOL: f64 = 1e-10;

/// Relative tolerance on eigenvalues of a diagonally scaled Gram matrix.
///
/// A Gram matrix squares the condition number of its design, so this
/// corresponds to a design condition of roughly `3e6`.
pub const GRAM_REL_TOL: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct SpdSolution {
    pub x: DVector<f64>,
    /// Condition number of the diagonally scaled Gram matrix.
    pub condition: f64,
}

/// Solve `gram * x = rhs` for a symmetric positive semi-definite `gram`.
///
/// The matrix is equilibrated by its diagonal before the eigen solve; the
/// `Err` value carries the scaled condition number when the smallest
/// eigenvalue falls below `rel_tol` times the largest.
pub fn solve_gram(gram: &DMatrix<f64>, rhs: &DVector<f64>, rel_tol: f64) -> Result<SpdSolution, f64> {
    let p = gram.nrows();
    debug_assert_eq!(gram.ncols(), p);
    debug_assert_eq!(rhs.len(), p);
    if p == 0 {
        return Ok(SpdSolution { x: DVector::zeros(0), condition: 1.0 });
    }
    let mut scale = DVector::zeros(p);
    for j in 0..p {
        let g = gram[(j, j)];
        if !(g > 0.0) || !g.is_finite() {
            return Err(f64::INFINITY);
        }
        scale[j] = 1.0 / g.sqrt();
    }
    let scaled = DMatrix::from_fn(p, p, |i, j| gram[(i, j)] * scale[i] * scale[j]);
    let eig = SymmetricEigen::new(scaled);
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(max > 0.0) || min <= rel_tol * max {
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        return Err(condition);
    }
    let b = rhs.component_mul(&scale);
    let mut coords = eig.eigenvectors.tr_mul(&b);
    for (c, lambda) in coords.iter_mut().zip(eig.eigenvalues.iter()) {
        *c /= lambda;
    }
    let y = &eig.eigenvectors * coords;
    Ok(SpdSolution { x: y.component_mul(&scale), condition: max / min })
}

/// Equilibrated Cholesky factor of a small symmetric positive definite matrix
/// held in a flat row-major buffer.
///
/// Rank is judged from the Cholesky pivots of the diagonally scaled matrix:
/// the smallest eigenvalue never exceeds the smallest pivot, so a pivot below
/// `rel_tol` times the largest flags an (almost) exact collinearity.
#[derive(Debug, Clone, Default)]
pub struct SmallCholesky {
    m: usize,
    l: Vec<f64>,
    scale: Vec<f64>,
    /// Ratio of the largest to the smallest squared pivot.
    pub pivot_ratio: f64,
}

impl SmallCholesky {
    pub fn factor(&mut self, a: &[f64], m: usize, rel_tol: f64) -> Result<(), f64> {
        debug_assert_eq!(a.len(), m * m);
        self.m = m;
        self.l.clear();
        self.l.resize(m * m, 0.0);
        self.scale.clear();
        for j in 0..m {
            let g = a[j * m + j];
            if !(g > 0.0) || !g.is_finite() {
                return Err(f64::INFINITY);
            }
            self.scale.push(1.0 / g.sqrt());
        }
        let (mut max_p, mut min_p) = (0.0f64, f64::INFINITY);
        for j in 0..m {
            let mut diag = a[j * m + j] * self.scale[j] * self.scale[j];
            for k in 0..j {
                diag -= self.l[j * m + k] * self.l[j * m + k];
            }
            max_p = max_p.max(diag);
            min_p = min_p.min(diag);
            if !(diag > rel_tol * max_p) {
                return Err(if diag > 0.0 { max_p / diag } else { f64::INFINITY });
            }
            let ljj = diag.sqrt();
            self.l[j * m + j] = ljj;
            for i in j + 1..m {
                let mut v = a[i * m + j] * self.scale[i] * self.scale[j];
                for k in 0..j {
                    v -= self.l[i * m + k] * self.l[j * m + k];
                }
                self.l[i * m + j] = v / ljj;
            }
        }
        self.pivot_ratio = max_p / min_p;
        Ok(())
    }

    /// Solve in place for one right-hand side.
    pub fn solve(&self, b: &mut [f64]) {
        let m = self.m;
        for i in 0..m {
            b[i] *= self.scale[i];
        }
        for i in 0..m {
            let mut v = b[i];
            for k in 0..i {
                v -= self.l[i * m + k] * b[k];
            }
            b[i] = v / self.l[i * m + i];
        }
        for i in (0..m).rev() {
            let mut v = b[i];
            for k in i + 1..m {
                v -= self.l[k * m + i] * b[k];
            }
            b[i] = v / self.l[i * m + i];
        }
        for i in 0..m {
            b[i] *= self.scale[i];
        }
    }
}

/// Ratio of the largest to the smallest singular value.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 1.0;
    }
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Gather the listed columns of `m` into a new matrix.
pub fn select_columns(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])])
}

/// Gather the listed rows of `m` into a new matrix.
pub fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Linear-interpolation quantile (type 7) of `values`; `q` in `[0, 1]`.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn solves_well_conditioned_system() {
        let g = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let rhs = DVector::from_vec(vec![1.0, 2.0]);
        let sol = solve_gram(&g, &rhs, GRAM_REL_TOL).unwrap();
        let back = &g * &sol.x;
        assert_relative_eq!(back, rhs, epsilon = 1e-12);
        assert!(sol.condition >= 1.0);
    }

    #[test]
    fn rejects_singular_gram() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let rhs = DVector::from_vec(vec![1.0, 2.0]);
        assert!(solve_gram(&g, &rhs, GRAM_REL_TOL).is_err());
        let zero_col = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(solve_gram(&zero_col, &rhs, GRAM_REL_TOL).is_err());
    }

    #[test]
    fn small_cholesky_matches_eigen_solve() {
        let g = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, -0.2, 0.5, -0.2, 9.0]);
        let rhs = DVector::from_vec(vec![1.0, 2.0, -3.0]);
        let reference = solve_gram(&g, &rhs, GRAM_REL_TOL).unwrap().x;
        let mut chol = SmallCholesky::default();
        let flat: Vec<f64> = g.transpose().iter().copied().collect();
        chol.factor(&flat, 3, GRAM_REL_TOL).unwrap();
        let mut b = rhs.as_slice().to_vec();
        chol.solve(&mut b);
        assert_relative_eq!(DVector::from_vec(b), reference, epsilon = 1e-12);
        assert!(chol.factor(&[1.0, 2.0, 2.0, 4.0], 2, GRAM_REL_TOL).is_err());
    }

    #[test]
    fn quantiles() {
        let v = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(median(&v), 2.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_relative_eq!(quantile(&v, 0.9), 3.7, epsilon = 1e-12);
    }
}
