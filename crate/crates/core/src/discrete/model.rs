use super::candidates::{enumerate_candidates, Candidate, SearchLimits};
use super::scorer::{CandidateScore, GramScorer};
use super::select::{bootstrap_cutoffs, select_imps, Cutoffs, ScoreKind, Selection, SelectionConfig};
use crate::data::Panel;
use crate::error::{Error, EstimationError};
use crate::estimators::ols_fit;
use crate::linalg::select_columns;
use crate::nodeset::NodeSet;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// A selected linear predictor `f(X_S, L̂_2) = X_S η + λ L̂_2 + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpPredictor {
    pub k: usize,
    pub r: NodeSet,
    pub s: NodeSet,
    /// Coefficients on `X_S`, in increasing index order.
    pub eta: Vec<f64>,
    pub lambda: f64,
    pub intercept: f64,
}

impl ImpPredictor {
    pub fn from_score(score: &CandidateScore) -> Self {
        let ns = score.candidate.s.len();
        ImpPredictor {
            k: score.candidate.k,
            r: score.candidate.r,
            s: score.candidate.s,
            eta: score.phi[..ns].to_vec(),
            lambda: score.phi[ns],
            intercept: score.phi[ns + 1],
        }
    }

    pub fn candidate(&self) -> Candidate {
        Candidate::new(self.k, self.r, self.s)
    }

    /// Predict for one environment; the prediction module is refitted on `x`.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>, EstimationError> {
        let xk = x.column(self.k).into_owned();
        let fit = ols_fit(&select_columns(x, &self.r.to_vec()), &xk, true)?;
        let l2 = &xk - &fit.residuals;
        let eta = DVector::from_column_slice(&self.eta);
        let mut out = select_columns(x, &self.s.to_vec()) * eta + l2 * self.lambda;
        out.add_scalar_mut(self.intercept);
        Ok(out)
    }
}

/// Average of `predictors` on one test environment.
///
/// A predictor whose prediction module cannot be fitted on `x` is dropped
/// with a warning; the call fails only when all are dropped.
pub fn predict_discrete(predictors: &[ImpPredictor], x: &DMatrix<f64>) -> Result<DVector<f64>, Error> {
    let mut sum = DVector::zeros(x.nrows());
    let mut used = 0usize;
    for pr in predictors {
        match pr.predict(x) {
            Ok(v) => {
                sum += v;
                used += 1;
            }
            Err(e) => log::warn!("dropping predictor {}: {e}", pr.candidate()),
        }
    }
    if used == 0 {
        return Err(Error::AllPredictorsDropped);
    }
    Ok(sum / used as f64)
}

/// The fitted discrete IMP estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteImpModel {
    pub d: usize,
    pub score_kind: ScoreKind,
    pub cutoffs: Cutoffs,
    pub predictors: Vec<ImpPredictor>,
    pub used_fallback: bool,
}

impl DiscreteImpModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>, Error> {
        if x.ncols() != self.d {
            return Err(EstimationError::Dimension(format!("model has {} predictors, data has {}", self.d, x.ncols())).into());
        }
        predict_discrete(&self.predictors, x)
    }
}

/// Everything produced by a discrete search.
#[derive(Debug, Clone)]
pub struct DiscreteFitReport {
    pub scores: Vec<CandidateScore>,
    pub cutoffs: Cutoffs,
    /// `None` when no candidate passed the IMP cutoff.
    pub selection: Option<Selection>,
    pub model: Option<DiscreteImpModel>,
}

impl DiscreteFitReport {
    pub fn model(&self) -> Result<&DiscreteImpModel, Error> {
        self.model.as_ref().ok_or(Error::NoImpFound)
    }

    /// Score table with one row per candidate.
    pub fn write_score_table<W: Write>(&self, out: W) -> Result<(), Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "R", "S", "feasible", "T", "p_inv", "s_pred", "selected_I", "selected_Ipred"])?;
        let (mut in_i, mut in_pred) = (vec![false; self.scores.len()], vec![false; self.scores.len()]);
        if let Some(sel) = &self.selection {
            sel.imp.iter().for_each(|&i| in_i[i] = true);
            sel.imp_pred.iter().for_each(|&i| in_pred[i] = true);
        }
        let num = |v: f64| if v.is_nan() { String::new() } else { v.to_string() };
        for (i, s) in self.scores.iter().enumerate() {
            w.write_record([
                s.candidate.k.to_string(),
                s.candidate.r.to_string(),
                s.candidate.s.to_string(),
                s.feasible.to_string(),
                num(s.t),
                num(s.p_inv),
                num(s.s_pred),
                in_i[i].to_string(),
                in_pred[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Enumerate, score, bootstrap cutoffs and select on a training panel.
pub fn fit_discrete(panel: &Panel, limits: SearchLimits, config: &SelectionConfig) -> Result<DiscreteFitReport, Error> {
    config.validate()?;
    if panel.envs.len() < 2 {
        return Err(EstimationError::TooFewEnvironments(panel.envs.len()).into());
    }
    let candidates = enumerate_candidates(panel.d(), limits);
    fit_discrete_candidates(panel, &candidates, config)
}

/// As [`fit_discrete`] over an explicit candidate list.
pub fn fit_discrete_candidates(panel: &Panel, candidates: &[Candidate], config: &SelectionConfig) -> Result<DiscreteFitReport, Error> {
    let with_pinv = config.score_kind == ScoreKind::Invariance;
    let scores = GramScorer::new(panel, candidates).score_all(candidates, with_pinv);
    let infeasible = scores.iter().filter(|s| !s.feasible).count();
    if infeasible > 0 {
        log::info!("{infeasible} of {} candidates are rank deficient", scores.len());
    }
    let pre = super::select::preselect(&scores, config.median_preselect);
    let pre_candidates: Vec<Candidate> = pre.iter().map(|&i| candidates[i]).collect();
    let cutoffs = bootstrap_cutoffs(panel, &pre_candidates, config);
    let (selection, model) = match select_imps(&scores, cutoffs, config) {
        Ok(sel) => {
            let predictors = sel.imp_pred.iter().map(|&i| ImpPredictor::from_score(&scores[i])).collect();
            let model = DiscreteImpModel {
                d: panel.d(),
                score_kind: config.score_kind,
                cutoffs,
                predictors,
                used_fallback: sel.fallback,
            };
            (Some(sel), Some(model))
        }
        Err(Error::NoImpFound) => {
            log::warn!("no invariant matching candidate passed the cutoffs");
            (None, None)
        }
        Err(e) => return Err(e),
    };
    Ok(DiscreteFitReport { scores, cutoffs, selection, model })
}
