//! Comparison methods: pooled OLS and anchor regression with environment
//! dummies as anchors.

use crate::data::{Environment, Panel};
use crate::error::EstimationError;
use crate::estimators::ols_fit;
use crate::linalg::select_rows;
use crate::scm::rng_for;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    Ols,
    Anchor { gamma: f64 },
}

/// A fitted linear predictor `X β + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub method: Method,
}

impl LinearModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        x * DVector::from_column_slice(&self.coefficients) + DVector::from_element(x.nrows(), self.intercept)
    }
}

/// OLS with intercept on all environments stacked.
pub fn pooled_ols(panel: &Panel) -> Result<LinearModel, EstimationError> {
    let (x, y, _) = panel.pooled();
    let fit = ols_fit(&x, &y, true)?;
    Ok(LinearModel {
        coefficients: fit.coefficients.as_slice().to_vec(),
        intercept: fit.intercept.unwrap_or(0.0),
        method: Method::Ols,
    })
}

/// Anchor regression: OLS after mapping the centred data through
/// `I + (√γ − 1) Π_A`, where `Π_A` replaces each row by its environment mean.
pub fn anchor_regression(panel: &Panel, gamma: f64) -> Result<LinearModel, EstimationError> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(EstimationError::InvalidParameter(format!("gamma must be non-negative, got {gamma}")));
    }
    let (x, y, labels) = panel.pooled();
    let (n, d) = (x.nrows(), x.ncols());
    if n == 0 {
        return Err(EstimationError::InsufficientData { needed: 1, available: 0 });
    }
    // Centre [X | y] globally.
    let mut z = x.insert_column(d, 0.0);
    z.set_column(d, &y);
    let means = z.row_mean();
    for mut row in z.row_iter_mut() {
        row -= &means;
    }

    let shrink = gamma.sqrt() - 1.0;
    if shrink != 0.0 {
        let k = panel.envs.len();
        let mut env_means = DMatrix::zeros(k, d + 1);
        let mut counts = vec![0.0; k];
        for (i, &e) in labels.iter().enumerate() {
            counts[e] += 1.0;
            let mut r = env_means.row_mut(e);
            r += z.row(i);
        }
        for (e, &c) in counts.iter().enumerate() {
            if c > 0.0 {
                let mut r = env_means.row_mut(e);
                r /= c;
            }
        }
        for (i, &e) in labels.iter().enumerate() {
            let mut r = z.row_mut(i);
            r += env_means.row(e) * shrink;
        }
    }

    let fit = ols_fit(&z.columns(0, d).into_owned(), &z.column(d).into_owned(), false)?;
    let intercept = means[d] - (means.columns(0, d) * &fit.coefficients)[0];
    Ok(LinearModel {
        coefficients: fit.coefficients.as_slice().to_vec(),
        intercept,
        method: Method::Anchor { gamma },
    })
}

/// The tuning grid `{0, 0.05, …, 0.5}`.
pub fn default_gamma_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 * 0.05).collect()
}

/// Assign every row of every environment to one of `folds` folds, after a
/// seeded shuffle within the environment.
pub fn stratified_folds(panel: &Panel, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    panel
        .envs
        .iter()
        .enumerate()
        .map(|(e, env)| {
            let mut idx: Vec<usize> = (0..env.n()).collect();
            idx.shuffle(&mut rng_for(seed, e as u64));
            let mut fold = vec![0; env.n()];
            for (pos, &i) in idx.iter().enumerate() {
                fold[i] = pos % folds;
            }
            fold
        })
        .collect()
}

fn split(panel: &Panel, assignment: &[Vec<usize>], fold: usize) -> (Panel, Vec<Environment>) {
    let mut train = Vec::new();
    let mut held = Vec::new();
    for (env, fa) in panel.envs.iter().zip(assignment) {
        let (inside, outside): (Vec<usize>, Vec<usize>) = (0..env.n()).partition(|&i| fa[i] == fold);
        let part = |rows: &[usize]| Environment {
            label: env.label.clone(),
            x: select_rows(&env.x, rows),
            y: DVector::from_iterator(rows.len(), rows.iter().map(|&i| env.y[i])),
        };
        if !outside.is_empty() {
            train.push(part(&outside));
        }
        if !inside.is_empty() {
            held.push(part(&inside));
        }
    }
    let mut p = Panel::new(train);
    p.feature_names = panel.feature_names.clone();
    (p, held)
}

/// Mean squared error of anchor regression with `gamma` under k-fold cross-validation.
pub fn anchor_cv_error(panel: &Panel, gamma: f64, assignment: &[Vec<usize>], folds: usize) -> f64 {
    let mut sse = 0.0;
    let mut count = 0usize;
    for f in 0..folds {
        let (train, held) = split(panel, assignment, f);
        if held.is_empty() {
            continue;
        }
        let Ok(model) = anchor_regression(&train, gamma) else {
            return f64::INFINITY;
        };
        for env in &held {
            sse += (model.predict(&env.x) - &env.y).norm_squared();
            count += env.n();
        }
    }
    if count == 0 {
        f64::INFINITY
    } else {
        sse / count as f64
    }
}

/// Anchor regression with `γ` chosen by stratified k-fold cross-validation.
/// Ties go to the smaller `γ`; the final model is refit on the whole panel.
pub fn anchor_cv(panel: &Panel, grid: &[f64], folds: usize, seed: u64) -> Result<LinearModel, EstimationError> {
    if grid.is_empty() {
        return Err(EstimationError::InvalidParameter("gamma grid is empty".into()));
    }
    if folds < 2 {
        return Err(EstimationError::InvalidParameter(format!("need at least 2 folds, got {folds}")));
    }
    let assignment = stratified_folds(panel, folds, seed);
    let errors: Vec<f64> = grid.par_iter().map(|&g| anchor_cv_error(panel, g, &assignment, folds)).collect();
    let best = (0..grid.len())
        .min_by(|&a, &b| errors[a].total_cmp(&errors[b]).then(grid[a].total_cmp(&grid[b])))
        .expect("non-empty grid");
    log::debug!("anchor CV picked gamma {} with error {}", grid[best], errors[best]);
    anchor_regression(panel, grid[best])
}
