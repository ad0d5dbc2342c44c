//! Direct fit of one candidate on materialised data matrices.
//!
//! This is the readable route: it forms `L̂_1`, `L̂_2` and the pooled design
//! explicitly. The search uses the Gram scorer, which must agree with it.

use super::candidates::Candidate;
use crate::data::Panel;
use crate::error::EstimationError;
use crate::estimators::{design_condition, ols_fit, residual_invariance_pvalue};
use crate::linalg::select_columns;
use nalgebra::{DMatrix, DVector};

/// Full fit of one `(k, R, S)` candidate.
#[derive(Debug, Clone)]
pub struct DiscreteImpFit {
    pub candidate: Candidate,
    /// `η̂` zero-padded to length `d`.
    pub eta: DVector<f64>,
    pub lambda: f64,
    pub intercept: f64,
    /// Per-environment fitted values of `Y` on `[X_S, 1]`.
    pub l1: Vec<DVector<f64>>,
    /// Per-environment fitted values of `X_k` on `[X_R, 1]`.
    pub l2: Vec<DVector<f64>>,
    /// `L̂_1 − λ̂ L̂_2 − X_S η̂ − b̂`, stacked over environments.
    pub residual: DVector<f64>,
    pub t: f64,
    pub p_inv: f64,
    pub s_pred: f64,
    /// Predictor `f`: coefficients of `Y` on `[X_S, L̂_2, 1]`, `η` zero-padded.
    pub f_eta: DVector<f64>,
    pub f_lambda: f64,
    pub f_intercept: f64,
    /// Equilibrated condition number of the pooled design `[X_S, L̂_2, 1]`.
    pub condition: f64,
}

/// Per-environment `L̂_2` and the stacked design `[X_S, L̂_2, 1]`.
fn matching_design(panel: &Panel, cand: &Candidate) -> Result<(DMatrix<f64>, Vec<DVector<f64>>), EstimationError> {
    let s = cand.s.to_vec();
    let r = cand.r.to_vec();
    let n = panel.n_total();
    let mut design = DMatrix::zeros(n, s.len() + 2);
    let mut l2s = Vec::new();
    let mut row = 0;
    for env in &panel.envs {
        let xr = select_columns(&env.x, &r);
        let xk = env.x.column(cand.k).into_owned();
        let fit = ols_fit(&xr, &xk, true)?;
        let l2 = &xk - &fit.residuals;
        let ne = env.n();
        design.view_mut((row, 0), (ne, s.len())).copy_from(&select_columns(&env.x, &s));
        design.view_mut((row, s.len()), (ne, 1)).copy_from(&l2);
        design.view_mut((row, s.len() + 1), (ne, 1)).fill(1.0);
        l2s.push(l2);
        row += ne;
    }
    Ok((design, l2s))
}

/// The pooled design `[X_S, L̂_2, 1]` used to estimate the matching parameter.
pub fn pooled_matching_design(panel: &Panel, cand: &Candidate) -> Result<DMatrix<f64>, EstimationError> {
    Ok(matching_design(panel, cand)?.0)
}

fn unpack(cand: &Candidate, d: usize, coef: &DVector<f64>) -> (DVector<f64>, f64, f64) {
    let s = cand.s.to_vec();
    let mut eta = DVector::zeros(d);
    for (i, &j) in s.iter().enumerate() {
        eta[j] = coef[i];
    }
    (eta, coef[s.len()], coef[s.len() + 1])
}

/// Fit candidate `cand` on `panel` with explicit regressions.
pub fn fit_candidate_discrete(panel: &Panel, cand: &Candidate) -> Result<DiscreteImpFit, EstimationError> {
    if panel.envs.len() < 2 {
        return Err(EstimationError::TooFewEnvironments(panel.envs.len()));
    }
    let need = cand.s.len().max(cand.r.len()) + 2;
    if let Some(env) = panel.envs.iter().find(|e| e.n() <= need) {
        return Err(EstimationError::SmallEnvironment { env: env.label.clone(), count: env.n() });
    }
    let s = cand.s.to_vec();
    let l1: Vec<DVector<f64>> = panel
        .envs
        .iter()
        .map(|env| ols_fit(&select_columns(&env.x, &s), &env.y, true).map(|f| &env.y - f.residuals))
        .collect::<Result<_, _>>()?;
    let (design, l2) = matching_design(panel, cand)?;
    let condition = design_condition(&design);
    let l1_stacked = DVector::from_iterator(design.nrows(), l1.iter().flat_map(|v| v.iter().copied()));
    let (_, y, labels) = panel.pooled();

    let zero_cols = design.columns(0, design.ncols() - 1).into_owned();
    let matching = ols_fit(&zero_cols, &l1_stacked, true)?;
    let mut theta = matching.coefficients.clone().insert_row(s.len() + 1, 0.0);
    theta[s.len() + 1] = matching.intercept.unwrap();
    let (eta, lambda, intercept) = unpack(cand, panel.d(), &theta);
    let residual = &l1_stacked - &design * &theta;
    let n = residual.len() as f64;
    let t = residual.norm_squared() / n;

    let f = ols_fit(&zero_cols, &y, true)?;
    let mut phi = f.coefficients.clone().insert_row(s.len() + 1, 0.0);
    phi[s.len() + 1] = f.intercept.unwrap();
    let (f_eta, f_lambda, f_intercept) = unpack(cand, panel.d(), &phi);
    let s_pred = f.residuals.norm_squared() / n;
    let p_inv = residual_invariance_pvalue(f.residuals.as_slice(), &labels)?;

    Ok(DiscreteImpFit {
        candidate: *cand,
        eta,
        lambda,
        intercept,
        l1,
        l2,
        residual,
        t,
        p_inv,
        s_pred,
        f_eta,
        f_lambda,
        f_intercept,
        condition,
    })
}
