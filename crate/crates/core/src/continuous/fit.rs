use super::candidates::ContCandidate;
use crate::data::ContinuousData;
use crate::discrete::Scored;
use crate::error::EstimationError;
use crate::estimators::{ols_fit, Smoother};
use crate::linalg::select_columns;
use crate::nodeset::NodeSet;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Minimum sample size for kernel fits.
pub const MIN_CONTINUOUS_N: usize = 50;

/// Varying-coefficient design `[X_P, 1]`.
pub fn varying_design(x: &DMatrix<f64>, p: NodeSet) -> DMatrix<f64> {
    let cols = p.to_vec();
    let mut w = DMatrix::from_element(x.nrows(), cols.len() + 1, 1.0);
    for (c, &j) in cols.iter().enumerate() {
        w.set_column(c, &x.column(j));
    }
    w
}

/// Smoother for one varying set `P`, with every predictor column and the
/// response already smoothed.
#[derive(Debug, Clone)]
pub struct SmoothedColumns {
    pub smoother: Smoother,
    pub w: DMatrix<f64>,
    pub ax: DMatrix<f64>,
    pub ay: DVector<f64>,
}

impl SmoothedColumns {
    pub fn new(data: &ContinuousData, p: NodeSet, h: f64) -> Result<Self, EstimationError> {
        let w = varying_design(&data.x, p);
        let smoother = Smoother::new(&data.u, &w, h)?;
        let ax = smoother.apply_matrix(&data.x);
        let ay = smoother.apply(&data.y);
        Ok(SmoothedColumns { smoother, w, ax, ay })
    }
}

/// Full fit of one continuous candidate.
#[derive(Debug, Clone)]
pub struct ContImpFit {
    pub candidate: ContCandidate,
    /// Matching parameter over `[X_P, 1, M̂_V]`.
    pub w_hat: DVector<f64>,
    /// Constant coefficients on `X_{S\P}`.
    pub beta_hat: DVector<f64>,
    /// Constant coefficients on `X_{R\P}` in the prediction module.
    pub beta_v_hat: DVector<f64>,
    pub m_hat: DVector<f64>,
    pub m_v_hat: DVector<f64>,
    pub residual: DVector<f64>,
    pub t_c: f64,
    pub s_pred: f64,
    pub h: f64,
}

/// Profile least squares of `target` on `(W, Z = X_cols)` through the cached smoother.
fn profile(cache: &SmoothedColumns, x: &DMatrix<f64>, target: &DVector<f64>, a_target: &DVector<f64>, cols: &[usize]) -> Result<(DVector<f64>, DVector<f64>), EstimationError> {
    if cols.is_empty() {
        return Ok((DVector::zeros(0), a_target.clone()));
    }
    let z = select_columns(x, cols);
    let az = select_columns(&cache.ax, cols);
    let beta = ols_fit(&(&z - &az), &(target - a_target), false)?.coefficients;
    let m = a_target - az * &beta;
    Ok((beta, m))
}

pub(crate) fn fit_with_cache(data: &ContinuousData, cache: &SmoothedColumns, cand: &ContCandidate, h: f64) -> Result<ContImpFit, EstimationError> {
    let z_cols = cand.z().to_vec();
    let (beta_hat, m_hat) = profile(cache, &data.x, &data.y, &cache.ay, &z_cols)?;
    let xk = data.x.column(cand.k).into_owned();
    let axk = cache.ax.column(cand.k).into_owned();
    let (beta_v_hat, m_v_hat) = profile(cache, &data.x, &xk, &axk, &cand.z_v().to_vec())?;

    let mut design = cache.w.clone().insert_column(cache.w.ncols(), 0.0);
    design.set_column(cache.w.ncols(), &m_v_hat);
    let matching = ols_fit(&design, &m_hat, false)?;
    let n = data.n() as f64;
    let t_c = matching.residuals.norm_squared() / n;
    let fitted = &design * &matching.coefficients + select_columns(&data.x, &z_cols) * &beta_hat;
    let s_pred = (&data.y - fitted).norm_squared() / n;
    Ok(ContImpFit {
        candidate: *cand,
        w_hat: matching.coefficients,
        beta_hat,
        beta_v_hat,
        m_hat,
        m_v_hat,
        residual: matching.residuals,
        t_c,
        s_pred,
        h,
    })
}

/// Fit one candidate: profile least squares for `Y` on `(X_P, X_{S\P})` and
/// for `X_k` on `(X_P, X_{R\P})`, then OLS of `M̂` on `[X_P, 1, M̂_V]`.
pub fn fit_candidate_continuous(data: &ContinuousData, cand: &ContCandidate, h: f64) -> Result<ContImpFit, EstimationError> {
    if !cand.is_valid() {
        return Err(EstimationError::InvalidParameter(format!("candidate {cand} violates P ⊆ R ⊆ S \\ k")));
    }
    if data.n() < MIN_CONTINUOUS_N {
        return Err(EstimationError::InsufficientData { needed: MIN_CONTINUOUS_N, available: data.n() });
    }
    let cache = SmoothedColumns::new(data, cand.p, h)?;
    fit_with_cache(data, &cache, cand, h)
}

/// Scores of one continuous candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContScore {
    pub candidate: ContCandidate,
    pub feasible: bool,
    pub t_c: f64,
    pub s_pred: f64,
    pub w_hat: Vec<f64>,
    pub beta_hat: Vec<f64>,
}

impl ContScore {
    fn from_fit(fit: Result<ContImpFit, EstimationError>, candidate: ContCandidate) -> Self {
        match fit {
            Ok(f) => ContScore {
                candidate,
                feasible: true,
                t_c: f.t_c,
                s_pred: f.s_pred,
                w_hat: f.w_hat.as_slice().to_vec(),
                beta_hat: f.beta_hat.as_slice().to_vec(),
            },
            Err(_) => ContScore {
                candidate,
                feasible: false,
                t_c: f64::NAN,
                s_pred: f64::NAN,
                w_hat: Vec::new(),
                beta_hat: Vec::new(),
            },
        }
    }
}

impl Scored for ContScore {
    fn feasible(&self) -> bool {
        self.feasible
    }
    fn imp_score(&self) -> f64 {
        self.t_c
    }
    fn p_value(&self) -> f64 {
        f64::NAN
    }
    fn s_pred(&self) -> f64 {
        self.s_pred
    }
}

/// Score every candidate, building one smoother per distinct `P`.
pub fn score_candidates_cont(data: &ContinuousData, candidates: &[ContCandidate], h: f64) -> Vec<ContScore> {
    if data.n() < MIN_CONTINUOUS_N {
        return candidates.iter().map(|c| ContScore::from_fit(Err(EstimationError::InsufficientData { needed: MIN_CONTINUOUS_N, available: data.n() }), *c)).collect();
    }
    let mut ps: Vec<NodeSet> = candidates.iter().map(|c| c.p).collect();
    ps.sort();
    ps.dedup();
    let caches: BTreeMap<NodeSet, Result<SmoothedColumns, EstimationError>> = ps
        .par_iter()
        .map(|&p| (p, SmoothedColumns::new(data, p, h)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    candidates
        .par_iter()
        .map(|c| {
            let fit = match &caches[&c.p] {
                Ok(cache) if c.is_valid() => fit_with_cache(data, cache, c, h),
                Ok(_) => Err(EstimationError::InvalidParameter(format!("invalid candidate {c}"))),
                Err(e) => Err(e.clone()),
            };
            ContScore::from_fit(fit, *c)
        })
        .collect()
}
