//! Invariant matching with a continuous environment variable `U`.

pub mod candidates;
pub mod fit;
pub mod model;


pub use candidates::{enumerate_candidates_cont, ContCandidate};
pub use fit::{fit_candidate_continuous, score_candidates_cont, varying_design, ContImpFit, ContScore, SmoothedColumns, MIN_CONTINUOUS_N};
pub use model::{
    bootstrap_cutoffs_cont, fit_continuous, fit_continuous_candidates, predict_continuous, select_and_predict_cont, ContFitReport,
    ContImpModel, ContPredictor, DEFAULT_BANDWIDTH,
};

use crate::data::ContinuousData;
use crate::error::ScmError;
use crate::scm::{rng_for, sample_continuous, Edit, LinearScm};
use rand::Rng;

/// Draw `n` rows with `U ~ Unif[lo, hi]`, applying `edits` at each row's `U`.
pub fn sample_uniform_u(scm: &LinearScm, edits: &[Edit], (lo, hi): (f64, f64), n: usize, seed: u64) -> Result<ContinuousData, ScmError> {
    let mut rng = rng_for(seed, 1);
    let u: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    let joint = sample_continuous(scm, edits, &u, seed)?;
    Ok(ContinuousData::new(u, &joint))
}
