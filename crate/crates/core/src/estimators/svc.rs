//! Profile least squares for the semi-varying coefficient model
//! `Y = a(U)ᵀW + βᵀZ + ε`, with local-linear smoothing in `U`.
//!
//! The smoother matrix is stored row-sparse: after sorting by `U` every
//! row's kernel neighbourhood is a contiguous range.

use super::kernel::epanechnikov_h;
use super::ols::ols_fit;
use crate::error::EstimationError;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// Local Gram matrices with condition above this get a small ridge.
pub const LOCAL_CONDITION_LIMIT: f64 = 1e12;
const RIDGE_FACTOR: f64 = 1e-10;

#[derive(Debug, Clone)]
struct LocalRow {
    /// Start of the neighbourhood in sorted order.
    start: usize,
    /// Smoother weights for sorted positions `start..start + weights.len()`.
    weights: Vec<f64>,
    /// Inverse local Gram, used to recover the varying coefficients.
    gram_inv: DMatrix<f64>,
}

/// Local-linear smoother `A` for a varying-coefficient design `W`.
#[derive(Debug, Clone)]
pub struct Smoother {
    u: Vec<f64>,
    w: DMatrix<f64>,
    h: f64,
    order: Vec<usize>,
    rows: Vec<LocalRow>,
    ridged: Vec<usize>,
}

impl Smoother {
    /// Build the smoother for environment values `u`, design `w` (n × p) and bandwidth `h`.
    pub fn new(u: &[f64], w: &DMatrix<f64>, h: f64) -> Result<Self, EstimationError> {
        let n = u.len();
        let p = w.ncols();
        if !(h > 0.0) || !h.is_finite() {
            return Err(EstimationError::InvalidParameter(format!("bandwidth must be positive, got {h}")));
        }
        if w.nrows() != n {
            return Err(EstimationError::Dimension(format!("u has {n} entries but W has {} rows", w.nrows())));
        }
        if p == 0 {
            return Err(EstimationError::Dimension("W has no columns".into()));
        }
        if let Some(i) = u.iter().position(|v| !v.is_finite()) {
            return Err(EstimationError::InvalidParameter(format!("u[{i}] is not finite")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| u[a].total_cmp(&u[b]).then(a.cmp(&b)));
        let sorted_u: Vec<f64> = order.iter().map(|&i| u[i]).collect();

        let built: Vec<Result<(LocalRow, bool), EstimationError>> = (0..n)
            .into_par_iter()
            .map(|i| local_row(i, u[i], &sorted_u, &order, w, h))
            .collect();
        let mut rows = Vec::with_capacity(n);
        let mut ridged = Vec::new();
        for (i, r) in built.into_iter().enumerate() {
            let (row, flagged) = r?;
            if flagged {
                ridged.push(i);
            }
            rows.push(row);
        }
        if !ridged.is_empty() {
            log::warn!("{} local designs were ill-conditioned and ridged", ridged.len());
        }
        Ok(Smoother { u: u.to_vec(), w: w.clone(), h, order, rows, ridged })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    /// Indices whose local Gram needed a ridge.
    pub fn ridged_points(&self) -> &[usize] {
        &self.ridged
    }

    /// `A v`.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.rows.iter().map(|row| {
                row.weights
                    .iter()
                    .enumerate()
                    .map(|(t, wt)| wt * v[self.order[row.start + t]])
                    .sum::<f64>()
            }),
        )
    }

    /// `A M` column by column.
    pub fn apply_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for j in 0..m.ncols() {
            out.set_column(j, &self.apply(&m.column(j).into_owned()));
        }
        out
    }

    /// Dense n × n copy of `A`.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut a = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for (t, wt) in row.weights.iter().enumerate() {
                a[(i, self.order[row.start + t])] = *wt;
            }
        }
        a
    }

    /// Local-linear estimate of the varying coefficients at every point for response `r`.
    pub fn varying_coefficients(&self, r: &DVector<f64>) -> DMatrix<f64> {
        let p = self.w.ncols();
        let mut out = DMatrix::zeros(self.len(), p);
        for (i, row) in self.rows.iter().enumerate() {
            let mut rhs = DVector::zeros(2 * p);
            for t in 0..row.weights.len() {
                let j = self.order[row.start + t];
                let s = (self.u[j] - self.u[i]) / self.h;
                let k = epanechnikov_h(self.u[j] - self.u[i], self.h);
                for c in 0..p {
                    let wc = self.w[(j, c)] * k * r[j];
                    rhs[c] += wc;
                    rhs[p + c] += s * wc;
                }
            }
            let coef = &row.gram_inv * rhs;
            for c in 0..p {
                out[(i, c)] = coef[c];
            }
        }
        out
    }
}

fn local_row(
    i: usize,
    u0: f64,
    sorted_u: &[f64],
    order: &[usize],
    w: &DMatrix<f64>,
    h: f64,
) -> Result<(LocalRow, bool), EstimationError> {
    let p = w.ncols();
    // Strict inequality: the kernel vanishes on the boundary |t| = h.
    let start = sorted_u.partition_point(|&v| v <= u0 - h);
    let end = sorted_u.partition_point(|&v| v < u0 + h);
    let count = end - start;
    let distinct = count > 0 && sorted_u[start] != sorted_u[end - 1];
    if !distinct {
        return Err(EstimationError::Bandwidth { index: i, u: u0, h, count });
    }
    let mut gram = DMatrix::zeros(2 * p, 2 * p);
    let mut wt = DVector::zeros(2 * p);
    for pos in start..end {
        let j = order[pos];
        let s = (sorted_u[pos] - u0) / h;
        let k = epanechnikov_h(sorted_u[pos] - u0, h);
        for c in 0..p {
            wt[c] = w[(j, c)];
            wt[p + c] = s * w[(j, c)];
        }
        gram.ger(k, &wt, &wt, 1.0);
    }
    let trace = gram.trace();
    if !(trace > 0.0) || !trace.is_finite() {
        return Err(EstimationError::SingularLocalGram { index: i, u: u0 });
    }
    let eig = gram.clone().symmetric_eigen();
    let (lmax, lmin) = (eig.eigenvalues.max(), eig.eigenvalues.min());
    let flagged = !(lmin > 0.0 && lmax / lmin <= LOCAL_CONDITION_LIMIT);
    if flagged {
        let ridge = RIDGE_FACTOR * trace / (2 * p) as f64;
        for c in 0..2 * p {
            gram[(c, c)] += ridge;
        }
    }
    let gram_inv = gram
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(EstimationError::SingularLocalGram { index: i, u: u0 })?;
    // Row i of A: [W_i, 0] G⁻¹ W̃ᵀ K.
    let mut e = DVector::zeros(2 * p);
    for c in 0..p {
        e[c] = w[(i, c)];
    }
    let coef = &gram_inv * e;
    let weights = (start..end)
        .map(|pos| {
            let j = order[pos];
            let s = (sorted_u[pos] - u0) / h;
            let k = epanechnikov_h(sorted_u[pos] - u0, h);
            let mut v = 0.0;
            for c in 0..p {
                v += coef[c] * w[(j, c)] + coef[p + c] * s * w[(j, c)];
            }
            k * v
        })
        .collect();
    Ok((LocalRow { start, weights, gram_inv }, flagged))
}

/// Result of a profile least-squares fit.
#[derive(Debug, Clone)]
pub struct SvcFit {
    pub smoother: Smoother,
    /// Constant coefficients on `Z`.
    pub beta_hat: DVector<f64>,
    /// Fitted varying part `a(U_i)ᵀW_i`.
    pub m_hat: DVector<f64>,
    /// Varying coefficients `a(U_i)`, one row per point.
    pub varying: DMatrix<f64>,
}

impl SvcFit {
    /// Profile fit reusing an already built smoother.
    pub fn with_smoother(smoother: Smoother, z: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self, EstimationError> {
        let n = smoother.len();
        if y.len() != n || z.nrows() != n {
            return Err(EstimationError::Dimension(format!(
                "smoother has {n} points, Z has {} rows and y has {}",
                z.nrows(),
                y.len()
            )));
        }
        let beta_hat = if z.ncols() == 0 {
            DVector::zeros(0)
        } else {
            let ry = y - smoother.apply(y);
            let rz = z - smoother.apply_matrix(z);
            ols_fit(&rz, &ry, false)?.coefficients
        };
        let partial = y - z * &beta_hat;
        let m_hat = smoother.apply(&partial);
        let varying = smoother.varying_coefficients(&partial);
        Ok(SvcFit { smoother, beta_hat, m_hat, varying })
    }
}

/// Profile least-squares fit of `y` on varying design `w` and constant design `z`.
pub fn svc_profile_fit(
    u: &[f64],
    w: &DMatrix<f64>,
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    h: f64,
) -> Result<SvcFit, EstimationError> {
    SvcFit::with_smoother(Smoother::new(u, w, h)?, z, y)
}

/// Fitted varying part `M̂` for a fresh sample.
pub fn svc_predict_m(
    u: &[f64],
    w: &DMatrix<f64>,
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    h: f64,
) -> Result<DVector<f64>, EstimationError> {
    Ok(svc_profile_fit(u, w, z, y, h)?.m_hat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::rng_for;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn design(n: usize, seed: u64) -> (Vec<f64>, DMatrix<f64>, DMatrix<f64>) {
        let mut rng = rng_for(seed, 0);
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let w = DMatrix::from_fn(n, 2, |_, j| if j == 0 { 1.0 } else { rng.sample(StandardNormal) });
        let z = DMatrix::from_fn(n, 1, |_, _| rng.sample(StandardNormal));
        (u, w, z)
    }

    #[test]
    fn sparse_matches_dense_application() {
        let (u, w, _) = design(120, 1);
        let s = Smoother::new(&u, &w, 0.2).unwrap();
        let v = DVector::from_fn(120, |i, _| (i as f64).sin());
        let dense = s.to_dense() * &v;
        assert!((dense - s.apply(&v)).amax() < 1e-12);
    }

    #[test]
    fn smoother_reproduces_locally_linear_signals() {
        // Local-linear smoothing is exact for coefficients linear in u.
        let (u, w, _) = design(200, 2);
        let s = Smoother::new(&u, &w, 0.3).unwrap();
        let y = DVector::from_fn(200, |i, _| (1.0 + 2.0 * u[i]) * w[(i, 0)] + (0.5 - u[i]) * w[(i, 1)]);
        assert!((s.apply(&y) - &y).amax() < 1e-9);
        let a = s.varying_coefficients(&y);
        for i in 0..200 {
            assert!((a[(i, 1)] - (0.5 - u[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn recovers_constant_coefficient() {
        let n = 1500;
        let (u, w, z) = design(n, 3);
        let mut rng = rng_for(3, 1);
        let y = DVector::from_fn(n, |i, _| {
            let a = (2.0 * std::f64::consts::PI * u[i]).sin();
            a * w[(i, 1)] + 1.5 * z[(i, 0)] + 0.1 * rng.sample::<f64, _>(StandardNormal)
        });
        let fit = svc_profile_fit(&u, &w, &z, &y, 0.1).unwrap();
        assert!((fit.beta_hat[0] - 1.5).abs() < 0.02, "{}", fit.beta_hat[0]);
        assert!(fit.smoother.ridged_points().is_empty());
    }

    #[test]
    fn tiny_bandwidth_is_reported() {
        let u = vec![0.0, 1.0, 2.0, 3.0];
        let w = DMatrix::from_element(4, 1, 1.0);
        let err = Smoother::new(&u, &w, 0.1).unwrap_err();
        assert!(matches!(err, EstimationError::Bandwidth { index: 0, count: 1, .. }));
        assert!(Smoother::new(&u, &w, 0.0).is_err());
    }

    #[test]
    fn duplicated_design_columns_are_ridged() {
        let u: Vec<f64> = (0..50).map(|i| i as f64 / 50.0).collect();
        let w = DMatrix::from_element(50, 2, 1.0);
        let s = Smoother::new(&u, &w, 0.2).unwrap();
        assert_eq!(s.ridged_points().len(), 50);
    }
}
