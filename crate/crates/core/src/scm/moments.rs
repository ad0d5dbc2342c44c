use super::{apply_interventions, InterventionSpec, LinearScm, Node};
use crate::error::ScmError;
use crate::linalg::{solve_gram, DESIGN_REL_TOL};
use crate::NodeSet;
use nalgebra::{DMatrix, DVector};

/// Exact first and second moments of the joint vector `(X, Y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl Moments {
    /// Solve `V = A V + eps` for the materialised model `scm`.
    pub fn of(scm: &LinearScm) -> Result<Moments, ScmError> {
        scm.check()?;
        let d = scm.d();
        let a = scm.joint_matrix();
        let i_minus_a = DMatrix::identity(d + 1, d + 1) - a;
        // Acyclic systems are unit-triangular up to permutation, so this cannot fail.
        let inv = i_minus_a
            .try_inverse()
            .expect("I - A is invertible for an acyclic model");
        let noises: Vec<_> = (0..d).map(Node::X).chain([Node::Y]).map(|n| scm.noise(n)).collect();
        let mu = DVector::from_iterator(d + 1, noises.iter().map(|n| n.mean));
        let var = DVector::from_iterator(d + 1, noises.iter().map(|n| n.variance));
        let mean = &inv * mu;
        let scaled = DMatrix::from_fn(d + 1, d + 1, |i, j| inv[(i, j)] * var[j]);
        let mut cov = &scaled * inv.transpose();
        // Symmetrise rounding noise.
        for i in 0..=d {
            for j in 0..i {
                let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        Ok(Moments { mean, cov })
    }

    fn index(&self, node: Node) -> usize {
        match node {
            Node::X(j) => j,
            Node::Y => self.mean.len() - 1,
        }
    }

    pub fn var(&self, node: Node) -> f64 {
        let i = self.index(node);
        self.cov[(i, i)]
    }

    pub fn covariance(&self, a: Node, b: Node) -> f64 {
        self.cov[(self.index(a), self.index(b))]
    }

    /// Best linear predictor of `target` from the predictors in `set`.
    pub fn lmmse(&self, target: Node, set: NodeSet) -> Result<Lmmse, ScmError> {
        let d = self.mean.len() - 1;
        if set.iter().any(|j| j >= d) {
            return Err(ScmError::NoSuchNode(set.iter().find(|&j| j >= d).unwrap()));
        }
        if let Node::X(t) = target {
            if t >= d {
                return Err(ScmError::NoSuchNode(t));
            }
            if set.contains(t) {
                return Err(ScmError::Invalid(format!("target {target} is among its own predictors")));
            }
        }
        let idx = set.to_vec();
        let t = self.index(target);
        let sxx = DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.cov[(idx[a], idx[b])]);
        let sxy = DVector::from_iterator(idx.len(), idx.iter().map(|&j| self.cov[(j, t)]));
        let coef = solve_gram(&sxx, &sxy, DESIGN_REL_TOL)
            .map_err(|condition| ScmError::RankDeficient { set, condition })?
            .x;
        let intercept = self.mean[t] - idx.iter().zip(coef.iter()).map(|(&j, c)| c * self.mean[j]).sum::<f64>();
        let residual_variance = self.cov[(t, t)] - coef.dot(&sxy);
        Ok(Lmmse {
            predictors: set,
            coefficients: coef.iter().copied().collect(),
            intercept,
            residual_variance,
        })
    }
}

/// Linear minimum mean-squared-error predictor `intercept + coefficients' X_set`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lmmse {
    pub predictors: NodeSet,
    /// One entry per member of `predictors`, in increasing index order.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Variance of the prediction error.
    pub residual_variance: f64,
}

impl Lmmse {
    /// Coefficients padded to length `d`.
    pub fn dense(&self, d: usize) -> Vec<f64> {
        let mut out = vec![0.0; d];
        for (j, c) in self.predictors.iter().zip(&self.coefficients) {
            out[j] = *c;
        }
        out
    }

    /// Evaluate on a row of predictor values (length `d`).
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept + self.predictors.iter().zip(&self.coefficients).map(|(j, c)| c * x[j]).sum::<f64>()
    }
}

pub fn population_moments(scm: &LinearScm, env: &InterventionSpec) -> Result<Moments, ScmError> {
    Moments::of(&apply_interventions(scm, std::slice::from_ref(env))?)
}

pub fn population_lmmse(
    scm: &LinearScm,
    env: &InterventionSpec,
    target: Node,
    predictors: NodeSet,
) -> Result<Lmmse, ScmError> {
    population_moments(scm, env)?.lmmse(target, predictors)
}
