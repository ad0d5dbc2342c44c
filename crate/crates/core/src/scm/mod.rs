//! Acyclic linear structural causal models over predictors `X` and a response `Y`.
//!
//! A model is stored in the split form
//!
//! ```text
//! X = gamma * Y + B X + eps_X
//! Y = (beta + alpha)' X + eps_Y
//! ```
//!
//! where `alpha` is the environment-dependent part of the response
//! coefficients. Predictor indices are zero-based; the response occupies
//! index `d` of the joint `(X, Y)` vector.

mod document;
mod graph;
mod intervention;
mod moments;
mod random;
mod sample;

pub use document::ScmDocument;
pub use graph::GraphView;
pub use intervention::{apply_interventions, Edit, EditKind, EnvId, InterventionSpec, Value};
pub use moments::{population_lmmse, population_moments, Lmmse, Moments};
pub use random::{random_scm, RandomScm, RandomScmConfig};
pub use sample::{rng_for, sample, sample_continuous, sample_with_rng};

use crate::error::ScmError;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fmt;

/// A variable of the joint system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    X(usize),
    Y,
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::X(j) => write!(f, "X{j}"),
            Node::Y => f.write_str("Y"),
        }
    }
}

/// Gaussian noise law given by its first two moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Noise {
    pub mean: f64,
    pub variance: f64,
}

impl Noise {
    pub const STANDARD: Noise = Noise { mean: 0.0, variance: 1.0 };

    pub fn new(mean: f64, variance: f64) -> Self {
        Noise { mean, variance }
    }
}

impl Default for Noise {
    fn default() -> Self {
        Noise::STANDARD
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearScm {
    /// Edge weights `Y -> X_i`.
    pub gamma: Vec<f64>,
    /// `b[i][j]` is the weight of `X_j -> X_i`.
    pub b: Vec<Vec<f64>>,
    /// Invariant part of the response coefficients.
    pub beta: Vec<f64>,
    /// Environment-dependent part of the response coefficients.
    pub alpha: Vec<f64>,
    pub noise_x: Vec<Noise>,
    pub noise_y: Noise,
}

impl LinearScm {
    /// Model with `d` predictors, no edges and standard normal noises.
    pub fn empty(d: usize) -> Self {
        LinearScm {
            gamma: vec![0.0; d],
            b: vec![vec![0.0; d]; d],
            beta: vec![0.0; d],
            alpha: vec![0.0; d],
            noise_x: vec![Noise::STANDARD; d],
            noise_y: Noise::STANDARD,
        }
    }

    /// Number of predictors.
    pub fn d(&self) -> usize {
        self.gamma.len()
    }

    /// Coefficient of `X_j` in the response assignment for this environment.
    pub fn response_coef(&self, j: usize) -> f64 {
        self.beta[j] + self.alpha[j]
    }

    /// Joint `(d+1) x (d+1)` coefficient matrix; row `i` holds the parents of node `i`.
    pub fn joint_matrix(&self) -> DMatrix<f64> {
        let d = self.d();
        DMatrix::from_fn(d + 1, d + 1, |i, j| match (i < d, j < d) {
            (true, true) => self.b[i][j],
            (true, false) => self.gamma[i],
            (false, true) => self.response_coef(j),
            (false, false) => 0.0,
        })
    }

    pub fn noise(&self, node: Node) -> Noise {
        match node {
            Node::X(j) => self.noise_x[j],
            Node::Y => self.noise_y,
        }
    }

    /// Predictors whose response coefficient varies with the environment.
    pub fn varying_parents(&self) -> crate::NodeSet {
        (0..self.d()).filter(|&j| self.alpha[j] != 0.0).collect()
    }

    /// Topological order of the joint nodes (`d` denotes `Y`), or `None` if cyclic.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        topological_order(&self.joint_matrix())
    }

    pub fn check(&self) -> Result<(), ScmError> {
        let report = validate_scm(self);
        if report.is_ok() {
            Ok(())
        } else {
            Err(ScmError::Invalid(report.to_string()))
        }
    }
}

/// Kahn's algorithm on the support of `joint`; ties broken by lowest index.
pub(crate) fn topological_order(joint: &DMatrix<f64>) -> Option<Vec<usize>> {
    let n = joint.nrows();
    let mut indegree: Vec<usize> = (0..n)
        .map(|i| (0..n).filter(|&j| joint[(i, j)] != 0.0).count())
        .collect();
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let next = (0..n).find(|&i| !done[i] && indegree[i] == 0)?;
        done[next] = true;
        order.push(next);
        for (i, deg) in indegree.iter_mut().enumerate() {
            if joint[(i, next)] != 0.0 {
                *deg -= 1;
            }
        }
    }
    Some(order)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Dimension(String),
    NonFinite(String),
    Cycle(Vec<Node>),
    NonPositiveVariance(Node, f64),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Dimension(msg) => write!(f, "dimension mismatch: {msg}"),
            Violation::NonFinite(what) => write!(f, "non-finite entry in {what}"),
            Violation::Cycle(nodes) => {
                let names: Vec<String> = nodes.iter().map(Node::to_string).collect();
                write!(f, "cycle among {{{}}}", names.join(", "))
            }
            Violation::NonPositiveVariance(node, v) => {
                write!(f, "noise variance of {node} is {v}, must be positive")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        let parts: Vec<String> = self.violations.iter().map(Violation::to_string).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Check dimensions, finiteness, acyclicity and noise variances.
pub fn validate_scm(scm: &LinearScm) -> ValidationReport {
    let mut violations = Vec::new();
    let d = scm.d();
    let dims = [
        ("beta", scm.beta.len()),
        ("alpha", scm.alpha.len()),
        ("noise_x", scm.noise_x.len()),
        ("B rows", scm.b.len()),
    ];
    for (name, len) in dims {
        if len != d {
            violations.push(Violation::Dimension(format!("{name} has length {len}, expected {d}")));
        }
    }
    if let Some(i) = scm.b.iter().position(|row| row.len() != d) {
        violations.push(Violation::Dimension(format!("B row {i} has length {}, expected {d}", scm.b[i].len())));
    }
    if !violations.is_empty() {
        return ValidationReport { violations };
    }

    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
    if !finite(&scm.gamma) {
        violations.push(Violation::NonFinite("gamma".into()));
    }
    if !scm.b.iter().all(|row| finite(row)) {
        violations.push(Violation::NonFinite("B".into()));
    }
    if !finite(&scm.beta) || !finite(&scm.alpha) {
        violations.push(Violation::NonFinite("response coefficients".into()));
    }
    let nodes = (0..d).map(Node::X).chain(std::iter::once(Node::Y));
    for node in nodes {
        let noise = scm.noise(node);
        if !noise.mean.is_finite() {
            violations.push(Violation::NonFinite(format!("noise mean of {node}")));
        }
        if !(noise.variance > 0.0) || !noise.variance.is_finite() {
            violations.push(Violation::NonPositiveVariance(node, noise.variance));
        }
    }

    let joint = scm.joint_matrix();
    if topological_order(&joint).is_none() {
        violations.push(Violation::Cycle(cyclic_nodes(&joint, d)));
    }
    ValidationReport { violations }
}

/// Nodes left after repeatedly peeling sources and sinks: every cycle lives there.
fn cyclic_nodes(joint: &DMatrix<f64>, d: usize) -> Vec<Node> {
    let n = joint.nrows();
    let mut alive = vec![true; n];
    loop {
        let mut changed = false;
        for i in 0..n {
            if !alive[i] {
                continue;
            }
            let has_parent = (0..n).any(|j| alive[j] && joint[(i, j)] != 0.0);
            let has_child = (0..n).any(|j| alive[j] && joint[(j, i)] != 0.0);
            if !has_parent || !has_child {
                alive[i] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (0..n)
        .filter(|&i| alive[i])
        .map(|i| if i == d { Node::Y } else { Node::X(i) })
        .collect()
}

/// The three-predictor model `Y = a X1 + X2 + N_Y`, `X3 = Y + X1 + N3`
/// (zero-based: `X0`, `X1`, `X2`) with standard normal noises.
pub fn toy_scm(a: f64) -> LinearScm {
    let mut scm = LinearScm::empty(3);
    scm.beta = vec![a, 1.0, 0.0];
    scm.gamma = vec![0.0, 0.0, 1.0];
    scm.b[2][0] = 1.0;
    scm
}
