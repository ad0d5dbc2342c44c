use super::{apply_interventions, EnvId, InterventionSpec, LinearScm, Noise};
use crate::error::ScmError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// JSON form of a model together with its environments.
///
/// `alpha_by_env` holds the varying part of the response coefficients per
/// environment label; `interventions` holds the remaining parameter edits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmDocument {
    pub d: usize,
    pub gamma: Vec<f64>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    #[serde(default)]
    pub alpha_by_env: BTreeMap<String, Vec<f64>>,
    pub noise_x: Vec<Noise>,
    pub noise_y: Noise,
    #[serde(default)]
    pub interventions: Vec<InterventionSpec>,
}

impl ScmDocument {
    pub fn new(base: &LinearScm, interventions: Vec<InterventionSpec>) -> Self {
        ScmDocument {
            d: base.d(),
            gamma: base.gamma.clone(),
            b: base.b.clone(),
            beta: base.beta.clone(),
            alpha_by_env: BTreeMap::new(),
            noise_x: base.noise_x.clone(),
            noise_y: base.noise_y,
            interventions,
        }
    }

    /// The base model, with no environment-specific edits.
    pub fn base(&self) -> Result<LinearScm, ScmError> {
        let scm = LinearScm {
            gamma: self.gamma.clone(),
            b: self.b.clone(),
            beta: self.beta.clone(),
            alpha: vec![0.0; self.d],
            noise_x: self.noise_x.clone(),
            noise_y: self.noise_y,
        };
        if scm.d() != self.d {
            return Err(ScmError::Invalid(format!("d = {} but gamma has length {}", self.d, scm.d())));
        }
        scm.check()?;
        Ok(scm)
    }

    /// Environment labels, in document order without duplicates.
    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for spec in &self.interventions {
            if let EnvId::Discrete(label) = &spec.env {
                if !out.contains(label) {
                    out.push(label.clone());
                }
            }
        }
        for label in self.alpha_by_env.keys() {
            if !out.contains(label) {
                out.push(label.clone());
            }
        }
        out
    }

    /// Materialise the discrete environment `label`.
    pub fn environment(&self, label: &str) -> Result<LinearScm, ScmError> {
        let mut scm = self.base()?;
        if let Some(alpha) = self.alpha_by_env.get(label) {
            if alpha.len() != self.d {
                return Err(ScmError::Invalid(format!("alpha for {label} has length {}", alpha.len())));
            }
            scm.alpha = alpha.clone();
        }
        let specs: Vec<InterventionSpec> = self
            .interventions
            .iter()
            .filter(|s| matches!(&s.env, EnvId::Discrete(l) if l == label))
            .cloned()
            .collect();
        let scm = apply_interventions(&scm, &specs)?;
        scm.check()?;
        Ok(scm)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serialises")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::{toy_scm, Edit, Node, Value};

    fn doc() -> ScmDocument {
        let mut doc = ScmDocument::new(
            &toy_scm(1.0),
            vec![
                InterventionSpec::new(EnvId::discrete("train-1"), vec![Edit::shift(Node::X(0), 0.1 + 0.2)]),
                InterventionSpec::new(
                    EnvId::discrete("train-2"),
                    vec![
                        Edit::coefficient(Node::Y, Node::X(0), 1.0),
                        Edit::noise_variance(Node::Y, 1.0 / 3.0),
                    ],
                ),
                InterventionSpec::new(
                    EnvId::Continuous(0.5),
                    vec![Edit::shift(Node::Y, Value::Sinusoid { amplitude: 2.0, frequency: 0.7 })],
                ),
            ],
        );
        doc.alpha_by_env.insert("train-3".into(), vec![-0.3, 0.0, 0.0]);
        doc
    }

    #[test]
    fn json_round_trip_is_exact() {
        let d = doc();
        let json = d.to_json();
        let back = ScmDocument::from_json(&json).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.to_json(), json);
    }

    #[test]
    fn environments_materialise() {
        let d = doc();
        assert_eq!(d.labels(), vec!["train-1", "train-2", "train-3"]);
        assert_eq!(d.environment("train-1").unwrap().noise_x[0].mean, 0.1 + 0.2);
        let e2 = d.environment("train-2").unwrap();
        assert_eq!(e2.response_coef(0), 2.0);
        assert_eq!(d.environment("train-3").unwrap().alpha[0], -0.3);
        assert_eq!(d.environment("unknown").unwrap(), d.base().unwrap());
    }
}
