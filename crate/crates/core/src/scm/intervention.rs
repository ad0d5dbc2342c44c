use super::{LinearScm, Node};
use crate::error::ScmError;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

/// Identifier of an environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvId {
    Discrete(String),
    Continuous(f64),
}

impl EnvId {
    pub fn discrete(label: impl Into<String>) -> Self {
        EnvId::Discrete(label.into())
    }

    /// The environment value `u`, for continuous environments.
    pub fn u(&self) -> Option<f64> {
        match self {
            EnvId::Discrete(_) => None,
            EnvId::Continuous(u) => Some(*u),
        }
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvId::Discrete(label) => f.write_str(label),
            EnvId::Continuous(u) => write!(f, "u={u}"),
        }
    }
}

/// Edit payload, possibly a function of the environment value `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Value {
    Const(f64),
    /// `amplitude * sin(2 pi frequency u)`.
    Sinusoid { amplitude: f64, frequency: f64 },
    /// `intercept + slope * u`.
    Affine { intercept: f64, slope: f64 },
}

impl Value {
    pub fn eval(&self, u: Option<f64>) -> Result<f64, ScmError> {
        match *self {
            Value::Const(v) => Ok(v),
            Value::Sinusoid { amplitude, frequency } => {
                let u = u.ok_or(ScmError::MissingEnvironmentValue)?;
                Ok(amplitude * (2.0 * PI * frequency * u).sin())
            }
            Value::Affine { intercept, slope } => {
                let u = u.ok_or(ScmError::MissingEnvironmentValue)?;
                Ok(intercept + slope * u)
            }
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Const(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    /// Adds to the mean of the target's noise.
    Shift(Value),
    /// Adds to the weight of an existing edge `parent -> target`.
    Coefficient { parent: Node, delta: Value },
    /// Replaces the variance of the target's noise.
    NoiseVariance(Value),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edit {
    pub target: Node,
    pub kind: EditKind,
}

impl Edit {
    pub fn shift(target: Node, v: impl Into<Value>) -> Self {
        Edit { target, kind: EditKind::Shift(v.into()) }
    }

    pub fn coefficient(target: Node, parent: Node, delta: impl Into<Value>) -> Self {
        Edit { target, kind: EditKind::Coefficient { parent, delta: delta.into() } }
    }

    pub fn noise_variance(target: Node, v: impl Into<Value>) -> Self {
        Edit { target, kind: EditKind::NoiseVariance(v.into()) }
    }

    /// Apply this edit in place, evaluating functional payloads at `u`.
    pub fn apply(&self, scm: &mut LinearScm, u: Option<f64>) -> Result<(), ScmError> {
        let d = scm.d();
        let check = |node: Node| match node {
            Node::X(j) if j >= d => Err(ScmError::NoSuchNode(j)),
            _ => Ok(()),
        };
        check(self.target)?;
        match self.kind {
            EditKind::Shift(v) => {
                let v = v.eval(u)?;
                match self.target {
                    Node::X(j) => scm.noise_x[j].mean += v,
                    Node::Y => scm.noise_y.mean += v,
                }
            }
            EditKind::NoiseVariance(v) => {
                let v = v.eval(u)?;
                if !(v > 0.0) || !v.is_finite() {
                    return Err(ScmError::NonPositiveVariance(v));
                }
                match self.target {
                    Node::X(j) => scm.noise_x[j].variance = v,
                    Node::Y => scm.noise_y.variance = v,
                }
            }
            EditKind::Coefficient { parent, delta } => {
                check(parent)?;
                let delta = delta.eval(u)?;
                let missing = || ScmError::MissingEdge {
                    target: self.target.to_string(),
                    parent: parent.to_string(),
                };
                match (self.target, parent) {
                    (Node::Y, Node::X(j)) => {
                        if scm.beta[j] == 0.0 && scm.alpha[j] == 0.0 {
                            return Err(missing());
                        }
                        scm.alpha[j] += delta;
                    }
                    (Node::X(i), Node::X(j)) => {
                        if scm.b[i][j] == 0.0 {
                            return Err(missing());
                        }
                        scm.b[i][j] += delta;
                    }
                    (Node::X(i), Node::Y) => {
                        if scm.gamma[i] == 0.0 {
                            return Err(missing());
                        }
                        scm.gamma[i] += delta;
                    }
                    (Node::Y, Node::Y) => return Err(missing()),
                }
            }
        }
        Ok(())
    }
}

/// Per-environment list of parameter edits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionSpec {
    pub env: EnvId,
    pub edits: Vec<Edit>,
}

impl InterventionSpec {
    pub fn new(env: EnvId, edits: Vec<Edit>) -> Self {
        InterventionSpec { env, edits }
    }

    /// An environment with no edits.
    pub fn observational(env: EnvId) -> Self {
        InterventionSpec { env, edits: Vec::new() }
    }

    /// The same edits placed at continuous environment value `u`.
    pub fn at(&self, u: f64) -> Self {
        InterventionSpec { env: EnvId::Continuous(u), edits: self.edits.clone() }
    }
}

/// Materialise the model after applying every spec in order.
pub fn apply_interventions(scm: &LinearScm, specs: &[InterventionSpec]) -> Result<LinearScm, ScmError> {
    let mut out = scm.clone();
    for spec in specs {
        let u = spec.env.u();
        for edit in &spec.edits {
            edit.apply(&mut out, u)?;
        }
    }
    Ok(out)
}
