use crate::error::EstimationError;
use crate::linalg::DESIGN_REL_TOL;
use nalgebra::{DMatrix, DVector};

/// Ordinary least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coefficients: DVector<f64>,
    pub intercept: Option<f64>,
    pub residuals: DVector<f64>,
    /// Condition number of the column-equilibrated design (intercept included).
    pub condition: f64,
}

impl OlsFit {
    pub fn predict(&self, design: &DMatrix<f64>) -> DVector<f64> {
        let mut out = design * &self.coefficients;
        if let Some(b) = self.intercept {
            out.add_scalar_mut(b);
        }
        out
    }

    pub fn rss(&self) -> f64 {
        self.residuals.norm_squared()
    }
}

/// Condition number of `design` after scaling every column to unit norm.
///
/// A zero column gives infinity.
pub fn design_condition(design: &DMatrix<f64>) -> f64 {
    let p = design.ncols();
    if p == 0 {
        return 1.0;
    }
    let mut scaled = design.clone();
    for mut col in scaled.column_iter_mut() {
        let norm = col.norm();
        if !(norm > 0.0) {
            return f64::INFINITY;
        }
        col /= norm;
    }
    crate::linalg::condition_number(&scaled)
}

/// Least squares of `response` on `design` (plus a constant column when
/// `with_intercept`), solved by Householder QR.
///
/// The design is rejected when its equilibrated condition number exceeds
/// `1 / DESIGN_REL_TOL`.
pub fn ols_fit(design: &DMatrix<f64>, response: &DVector<f64>, with_intercept: bool) -> Result<OlsFit, EstimationError> {
    let n = design.nrows();
    let p = design.ncols();
    if response.len() != n {
        return Err(EstimationError::Dimension(format!(
            "design has {n} rows but response has {}",
            response.len()
        )));
    }
    let cols = p + usize::from(with_intercept);
    if n <= cols {
        return Err(EstimationError::InsufficientData { needed: cols, available: n });
    }
    let full = if with_intercept {
        let mut m = design.clone().insert_column(p, 1.0);
        m.set_column(p, &DVector::from_element(n, 1.0));
        m
    } else {
        design.clone()
    };
    if cols == 0 {
        return Ok(OlsFit {
            coefficients: DVector::zeros(0),
            intercept: None,
            residuals: response.clone(),
            condition: 1.0,
        });
    }

    // Equilibrate columns so the rank decision does not depend on units.
    let mut scale = DVector::zeros(cols);
    let mut scaled = full.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        let norm = col.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(EstimationError::RankDeficient { condition: f64::INFINITY });
        }
        scale[j] = 1.0 / norm;
        col /= norm;
    }
    let qr = scaled.qr();
    let r = qr.r();
    let sv = r.singular_values();
    let (max, min) = (sv.max(), sv.min());
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(min > DESIGN_REL_TOL * max) {
        return Err(EstimationError::RankDeficient { condition });
    }
    let mut qty = response.clone();
    qr.q_tr_mul(&mut qty);
    let rhs = qty.rows(0, cols).into_owned();
    let z = r
        .solve_upper_triangular(&rhs)
        .ok_or(EstimationError::RankDeficient { condition })?;
    let beta = z.component_mul(&scale);
    let residuals = response - &full * &beta;
    let (coefficients, intercept) = if with_intercept {
        (beta.rows(0, p).into_owned(), Some(beta[p]))
    } else {
        (beta, None)
    };
    Ok(OlsFit { coefficients, intercept, residuals, condition })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn orthonormal_design_recovers_first_column() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let y = x.column(0).into_owned();
        let fit = ols_fit(&x, &y, false).unwrap();
        assert_relative_eq!(fit.coefficients, DVector::from_vec(vec![1.0, 0.0]), epsilon = 1e-14);
        assert!(fit.rss() < 1e-28);
    }

    #[test]
    fn zero_response_gives_zero_fit() {
        let x = DMatrix::from_fn(10, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 + j as f64);
        let fit = ols_fit(&x, &DVector::zeros(10), true).unwrap();
        assert!(fit.coefficients.iter().all(|c| c.abs() < 1e-14));
        assert!(fit.intercept.unwrap().abs() < 1e-14);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-14));
    }

    #[test]
    fn collinear_design_is_rejected_with_condition() {
        let x = DMatrix::from_fn(20, 2, |i, j| (i as f64) * (j as f64 + 1.0));
        let err = ols_fit(&x, &DVector::from_element(20, 1.0), false).unwrap_err();
        assert!(matches!(err, EstimationError::RankDeficient { condition } if condition > 1e10));
        let x = DMatrix::from_element(5, 1, 1.0);
        assert!(ols_fit(&x, &DVector::zeros(5), true).is_err());
    }

    #[test]
    fn too_few_rows() {
        let x = DMatrix::zeros(3, 3);
        assert!(matches!(
            ols_fit(&x, &DVector::zeros(3), false),
            Err(EstimationError::InsufficientData { .. })
        ));
    }

    proptest! {
        #[test]
        fn normal_equations_hold(seed in 0u64..1000, n in 8usize..40, p in 1usize..5) {
            use rand::Rng;
            let mut rng = crate::scm::rng_for(seed, 1);
            let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-3.0..3.0) + 0.5);
            let y = DVector::from_fn(n, |_, _| rng.random_range(-10.0..10.0));
            let fit = ols_fit(&x, &y, true).unwrap();
            let grad = x.transpose() * &fit.residuals;
            let scale = x.norm() * y.norm();
            prop_assert!(grad.amax() <= 1e-8 * scale);
            prop_assert!(fit.residuals.sum().abs() <= 1e-8 * scale);
        }
    }
}
