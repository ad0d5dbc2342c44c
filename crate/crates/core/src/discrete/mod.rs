//! Invariant matching search over discrete training environments.

pub mod candidates;
pub mod model;
pub mod reference;
pub mod scorer;
pub mod select;

#[cfg(test)]
mod tests;

pub use candidates::{enumerate_candidates, Candidate, SearchLimits};
pub use model::{fit_discrete, fit_discrete_candidates, predict_discrete, DiscreteFitReport, DiscreteImpModel, ImpPredictor};
pub use reference::{fit_candidate_discrete, pooled_matching_design, DiscreteImpFit};
pub use scorer::{score_candidates, CandidateScore, GramScorer};
pub use select::{bootstrap_cutoffs, preselect, round_minima, select_imps, Cutoffs, ScoreKind, Scored, Selection, SelectionConfig};

/// In-sample pooled MSE of the candidate's predictor on `panel`.
pub fn prediction_score(fit: &DiscreteImpFit) -> f64 {
    fit.s_pred
}
