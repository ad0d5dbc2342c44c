use super::candidates::{enumerate_candidates_cont, ContCandidate};
use super::fit::{score_candidates_cont, varying_design, ContImpFit, ContScore, MIN_CONTINUOUS_N};
use crate::data::ContinuousData;
use crate::discrete::{preselect, round_minima, select_imps, Cutoffs, ScoreKind, SearchLimits, Selection, SelectionConfig};
use crate::error::{Error, EstimationError};
use crate::estimators::{Smoother, SvcFit};
use crate::linalg::{quantile, select_columns};
use crate::nodeset::NodeSet;
use crate::scm::rng_for;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Default bandwidth in the units of `U`.
pub const DEFAULT_BANDWIDTH: f64 = 0.1;

/// A selected continuous predictor `[X_P, 1, M̂_V] ŵ + X_{S\P} β̂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContPredictor {
    pub p: NodeSet,
    pub k: usize,
    pub r: NodeSet,
    pub s: NodeSet,
    pub w_hat: Vec<f64>,
    pub beta_hat: Vec<f64>,
    pub h: f64,
}

impl ContPredictor {
    pub fn from_score(score: &ContScore, h: f64) -> Self {
        let c = score.candidate;
        ContPredictor { p: c.p, k: c.k, r: c.r, s: c.s, w_hat: score.w_hat.clone(), beta_hat: score.beta_hat.clone(), h }
    }

    pub fn from_fit(fit: &ContImpFit) -> Self {
        let c = fit.candidate;
        ContPredictor {
            p: c.p,
            k: c.k,
            r: c.r,
            s: c.s,
            w_hat: fit.w_hat.as_slice().to_vec(),
            beta_hat: fit.beta_hat.as_slice().to_vec(),
            h: fit.h,
        }
    }

    pub fn candidate(&self) -> ContCandidate {
        ContCandidate::new(self.p, self.k, self.r, self.s)
    }

    /// Predict on a test sample; `M̂_V` is re-estimated from the test data alone.
    pub fn predict(&self, u: &[f64], x: &DMatrix<f64>) -> Result<DVector<f64>, EstimationError> {
        if u.len() < MIN_CONTINUOUS_N {
            return Err(EstimationError::InsufficientData { needed: MIN_CONTINUOUS_N, available: u.len() });
        }
        let c = self.candidate();
        let w = varying_design(x, self.p);
        let smoother = Smoother::new(u, &w, self.h)?;
        let xk = x.column(self.k).into_owned();
        let m_v = SvcFit::with_smoother(smoother, &select_columns(x, &c.z_v().to_vec()), &xk)?.m_hat;
        let mut design = w.insert_column(self.p.len() + 1, 0.0);
        design.set_column(self.p.len() + 1, &m_v);
        let beta = DVector::from_column_slice(&self.beta_hat);
        Ok(design * DVector::from_column_slice(&self.w_hat) + select_columns(x, &c.z().to_vec()) * beta)
    }
}

/// Average of `predictors` on a test sample, dropping those that fail.
pub fn predict_continuous(predictors: &[ContPredictor], u: &[f64], x: &DMatrix<f64>) -> Result<DVector<f64>, Error> {
    let mut sum = DVector::zeros(x.nrows());
    let mut used = 0usize;
    let mut last_err = None;
    for pr in predictors {
        match pr.predict(u, x) {
            Ok(v) => {
                sum += v;
                used += 1;
            }
            Err(e) => {
                log::warn!("dropping predictor {}: {e}", pr.candidate());
                last_err = Some(e);
            }
        }
    }
    match (used, last_err) {
        (0, Some(e @ (EstimationError::Bandwidth { .. } | EstimationError::SingularLocalGram { .. }))) => Err(e.into()),
        (0, _) => Err(Error::AllPredictorsDropped),
        _ => Ok(sum / used as f64),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContImpModel {
    pub d: usize,
    pub h: f64,
    pub cutoffs: Cutoffs,
    pub predictors: Vec<ContPredictor>,
    pub used_fallback: bool,
}

impl ContImpModel {
    pub fn predict(&self, u: &[f64], x: &DMatrix<f64>) -> Result<DVector<f64>, Error> {
        if x.ncols() != self.d {
            return Err(EstimationError::Dimension(format!("model has {} predictors, data has {}", self.d, x.ncols())).into());
        }
        predict_continuous(&self.predictors, u, x)
    }
}

#[derive(Debug, Clone)]
pub struct ContFitReport {
    pub scores: Vec<ContScore>,
    pub cutoffs: Cutoffs,
    pub selection: Option<Selection>,
    pub model: Option<ContImpModel>,
}

impl ContFitReport {
    pub fn model(&self) -> Result<&ContImpModel, Error> {
        self.model.as_ref().ok_or(Error::NoImpFound)
    }

    pub fn write_score_table<W: Write>(&self, out: W) -> Result<(), Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["P", "k", "R", "S", "feasible", "T_c", "s_pred", "selected_I", "selected_Ipred"])?;
        let (mut in_i, mut in_pred) = (vec![false; self.scores.len()], vec![false; self.scores.len()]);
        if let Some(sel) = &self.selection {
            sel.imp.iter().for_each(|&i| in_i[i] = true);
            sel.imp_pred.iter().for_each(|&i| in_pred[i] = true);
        }
        let num = |v: f64| if v.is_nan() { String::new() } else { v.to_string() };
        for (i, s) in self.scores.iter().enumerate() {
            let c = s.candidate;
            w.write_record([
                c.p.to_string(),
                c.k.to_string(),
                c.r.to_string(),
                c.s.to_string(),
                s.feasible.to_string(),
                num(s.t_c),
                num(s.s_pred),
                in_i[i].to_string(),
                in_pred[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Bootstrap cutoffs for continuous data by resampling rows i.i.d.
pub fn bootstrap_cutoffs_cont(data: &ContinuousData, candidates: &[ContCandidate], h: f64, config: &SelectionConfig) -> Cutoffs {
    let mut min_t = Vec::new();
    let mut min_pred = Vec::new();
    if config.c_imp.is_none() || config.c_pred.is_none() {
        for b in 0..config.bootstrap_rounds {
            let mut rng = rng_for(config.seed, b as u64 + 1);
            let rows: Vec<usize> = (0..data.n()).map(|_| rng.random_range(0..data.n())).collect();
            let scores = score_candidates_cont(&data.select_rows(&rows), candidates, h);
            if let Some((t, sp)) = round_minima(&scores) {
                min_t.push(t);
                min_pred.push(sp);
            }
        }
    }
    Cutoffs {
        c_imp: config.c_imp.unwrap_or_else(|| quantile(&min_t, config.quantile)),
        c_pred: config.c_pred.unwrap_or_else(|| quantile(&min_pred, config.quantile)),
    }
}

/// Enumerate, score, bootstrap and select on continuous training data.
pub fn fit_continuous(data: &ContinuousData, limits: SearchLimits, h: f64, config: &SelectionConfig) -> Result<ContFitReport, Error> {
    let candidates = enumerate_candidates_cont(data.d(), limits);
    fit_continuous_candidates(data, &candidates, h, config)
}

pub fn fit_continuous_candidates(data: &ContinuousData, candidates: &[ContCandidate], h: f64, config: &SelectionConfig) -> Result<ContFitReport, Error> {
    config.validate()?;
    if config.score_kind != ScoreKind::Residual {
        return Err(EstimationError::InvalidParameter("continuous environments support only the residual score".into()).into());
    }
    if data.n() < MIN_CONTINUOUS_N {
        return Err(EstimationError::InsufficientData { needed: MIN_CONTINUOUS_N, available: data.n() }.into());
    }
    let scores = score_candidates_cont(data, candidates, h);
    let pre: Vec<ContCandidate> = preselect(&scores, config.median_preselect).into_iter().map(|i| candidates[i]).collect();
    let cutoffs = bootstrap_cutoffs_cont(data, &pre, h, config);
    let (selection, model) = match select_imps(&scores, cutoffs, config) {
        Ok(sel) => {
            let predictors = sel.imp_pred.iter().map(|&i| ContPredictor::from_score(&scores[i], h)).collect();
            let model = ContImpModel { d: data.d(), h, cutoffs, predictors, used_fallback: sel.fallback };
            (Some(sel), Some(model))
        }
        Err(Error::NoImpFound) => {
            log::warn!("no invariant matching candidate passed the cutoffs");
            (None, None)
        }
        Err(e) => return Err(e),
    };
    Ok(ContFitReport { scores, cutoffs, selection, model })
}

/// Fit on `train` and predict on `test`, as one call.
pub fn select_and_predict_cont(
    train: &ContinuousData,
    test_u: &[f64],
    test_x: &DMatrix<f64>,
    limits: SearchLimits,
    h: f64,
    config: &SelectionConfig,
) -> Result<(DVector<f64>, ContFitReport), Error> {
    let report = fit_continuous(train, limits, h, config)?;
    let pred = report.model()?.predict(test_u, test_x)?;
    Ok((pred, report))
}
