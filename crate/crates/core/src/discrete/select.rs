use super::candidates::Candidate;
use super::scorer::{CandidateScore, GramScorer};
use crate::data::Panel;
use crate::error::{EstimationError, Error};
use crate::linalg::{median, quantile};
use crate::scm::rng_for;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Which IMP score drives the selection of `Î`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    /// Mean squared matching residual `T`, cut at a bootstrapped `c_imp`.
    Residual,
    /// Invariance p-value, accepted above the significance level.
    Invariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub score_kind: ScoreKind,
    /// Fixed IMP cutoff; bootstrapped when absent (residual score only).
    pub c_imp: Option<f64>,
    /// Fixed prediction cutoff; bootstrapped when absent.
    pub c_pred: Option<f64>,
    pub bootstrap_rounds: usize,
    pub quantile: f64,
    pub median_preselect: bool,
    pub significance: f64,
    pub seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            score_kind: ScoreKind::Residual,
            c_imp: None,
            c_pred: None,
            bootstrap_rounds: 50,
            quantile: 0.9,
            median_preselect: true,
            significance: 0.05,
            seed: 0,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<(), EstimationError> {
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return Err(EstimationError::InvalidParameter(format!("quantile must lie in (0, 1), got {}", self.quantile)));
        }
        if self.bootstrap_rounds == 0 && (self.c_pred.is_none() || (self.c_imp.is_none() && self.score_kind == ScoreKind::Residual)) {
            return Err(EstimationError::InvalidParameter("bootstrap_rounds must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoffs {
    pub c_imp: f64,
    pub c_pred: f64,
}

/// Indices of the candidates retained at each stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub preselected: Vec<usize>,
    pub imp: Vec<usize>,
    pub imp_pred: Vec<usize>,
    /// True when `Î_pred` was empty and the best member of `Î` was used instead.
    pub fallback: bool,
}

/// Scores consumed by the selection rules.
pub trait Scored {
    fn feasible(&self) -> bool;
    /// Residual IMP score.
    fn imp_score(&self) -> f64;
    /// Invariance p-value, NaN when not computed.
    fn p_value(&self) -> f64;
    fn s_pred(&self) -> f64;
}

impl Scored for CandidateScore {
    fn feasible(&self) -> bool {
        self.feasible
    }
    fn imp_score(&self) -> f64 {
        self.t
    }
    fn p_value(&self) -> f64 {
        self.p_inv
    }
    fn s_pred(&self) -> f64 {
        self.s_pred
    }
}

/// Feasible candidates whose prediction score does not exceed the median.
pub fn preselect<S: Scored>(scores: &[S], use_median: bool) -> Vec<usize> {
    let feasible: Vec<usize> = (0..scores.len()).filter(|&i| scores[i].feasible()).collect();
    if !use_median {
        return feasible;
    }
    let med = median(&feasible.iter().map(|&i| scores[i].s_pred()).collect::<Vec<_>>());
    feasible.into_iter().filter(|&i| scores[i].s_pred() <= med).collect()
}

/// Resample `min_e n_e` rows with replacement from every environment.
pub fn bootstrap_rows<R: Rng>(panel: &Panel, rng: &mut R) -> Vec<Vec<usize>> {
    let m = panel.min_n();
    panel
        .envs
        .iter()
        .map(|env| (0..m).map(|_| rng.random_range(0..env.n())).collect())
        .collect()
}

/// Bootstrap the cutoffs: per round, the minimum `T` and minimum `s_pred`
/// over `candidates`; each cutoff is the configured quantile of those minima.
///
/// Fixed cutoffs in `config` are passed through; under the invariance score
/// `c_imp` is the significance level.
pub fn bootstrap_cutoffs(panel: &Panel, candidates: &[Candidate], config: &SelectionConfig) -> Cutoffs {
    let need_imp = config.c_imp.is_none() && config.score_kind == ScoreKind::Residual;
    let need_pred = config.c_pred.is_none();
    let mut min_t = Vec::new();
    let mut min_pred = Vec::new();
    if need_imp || need_pred {
        for b in 0..config.bootstrap_rounds {
            let mut rng = rng_for(config.seed, b as u64 + 1);
            let rows = bootstrap_rows(panel, &mut rng);
            if let Some((t, sp)) = GramScorer::from_rows(panel, &rows, candidates).minima(candidates) {
                min_t.push(t);
                min_pred.push(sp);
            }
        }
    }
    let c_imp = match (config.score_kind, config.c_imp) {
        (_, Some(c)) => c,
        (ScoreKind::Invariance, None) => config.significance,
        (ScoreKind::Residual, None) => quantile(&min_t, config.quantile),
    };
    let c_pred = config.c_pred.unwrap_or_else(|| quantile(&min_pred, config.quantile));
    Cutoffs { c_imp, c_pred }
}

/// Per-round minima of the residual and prediction scores, skipping rounds without a feasible candidate.
pub fn round_minima<S: Scored>(scores: &[S]) -> Option<(f64, f64)> {
    let (t, sp) = scores
        .iter()
        .filter(|s| s.feasible())
        .fold((f64::INFINITY, f64::INFINITY), |(t, sp), s| (t.min(s.imp_score()), sp.min(s.s_pred())));
    t.is_finite().then_some((t, sp))
}

/// Apply the median pre-selection, the IMP cutoff and the prediction cutoff.
pub fn select_imps<S: Scored>(scores: &[S], cutoffs: Cutoffs, config: &SelectionConfig) -> Result<Selection, Error> {
    let preselected = preselect(scores, config.median_preselect);
    let passes = |s: &S| match config.score_kind {
        ScoreKind::Residual => s.imp_score() < cutoffs.c_imp,
        ScoreKind::Invariance => s.p_value() > cutoffs.c_imp,
    };
    let imp: Vec<usize> = preselected.iter().copied().filter(|&i| passes(&scores[i])).collect();
    if imp.is_empty() {
        return Err(Error::NoImpFound);
    }
    let mut imp_pred: Vec<usize> = imp.iter().copied().filter(|&i| scores[i].s_pred() < cutoffs.c_pred).collect();
    let fallback = imp_pred.is_empty();
    if fallback {
        let best = imp
            .iter()
            .copied()
            .min_by(|&a, &b| scores[a].s_pred().total_cmp(&scores[b].s_pred()))
            .expect("non-empty");
        imp_pred.push(best);
    }
    Ok(Selection { preselected, imp, imp_pred, fallback })
}
