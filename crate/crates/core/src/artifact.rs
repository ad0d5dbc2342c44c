//! JSON model files: a fitted estimator bundled with the CSV schema it was
//! trained on, so prediction needs only the model file and the test data.

use crate::continuous::ContImpModel;
use crate::data::{PanelDataset, Schema};
use crate::discrete::DiscreteImpModel;
use crate::error::{EstimationError, Error};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ModelArtifact {
    Discrete { schema: Schema, model: DiscreteImpModel },
    Continuous { schema: Schema, model: ContImpModel },
}

/// Predictions for one test group: a discrete environment, or the whole
/// continuous sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPrediction {
    pub label: String,
    pub u: Option<Vec<f64>>,
    pub y: DVector<f64>,
    pub y_hat: DVector<f64>,
}

impl GroupPrediction {
    /// `None` when the test file carried no response.
    pub fn mean_rss(&self) -> Option<f64> {
        if self.y.iter().any(|v| v.is_nan()) {
            return None;
        }
        Some((&self.y_hat - &self.y).norm_squared() / self.y.len() as f64)
    }
}

impl ModelArtifact {
    pub fn schema(&self) -> &Schema {
        match self {
            ModelArtifact::Discrete { schema, .. } | ModelArtifact::Continuous { schema, .. } => schema,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), Error> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, Error> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn predict(&self, data: &PanelDataset) -> Result<Vec<GroupPrediction>, Error> {
        match (self, data) {
            (ModelArtifact::Discrete { model, .. }, PanelDataset::Discrete(panel)) => panel
                .envs
                .iter()
                .map(|e| Ok(GroupPrediction { label: e.label.clone(), u: None, y: e.y.clone(), y_hat: model.predict(&e.x)? }))
                .collect(),
            (ModelArtifact::Continuous { model, .. }, PanelDataset::Continuous(c)) => Ok(vec![GroupPrediction {
                label: "test".into(),
                u: Some(c.u.clone()),
                y: c.y.clone(),
                y_hat: model.predict(&c.u, &c.x)?,
            }]),
            _ => Err(EstimationError::InvalidParameter("test data layout does not match the model mode".into()).into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::toy_panel;
    use crate::discrete::{fit_discrete, SearchLimits, SelectionConfig};

    #[test]
    fn discrete_artifact_round_trips_and_predicts() {
        let panel = toy_panel(&[1.0, 2.0], 400, 3);
        let config = SelectionConfig { bootstrap_rounds: 5, ..Default::default() };
        let model = fit_discrete(&panel, SearchLimits::NONE, &config).unwrap().model().unwrap().clone();
        let schema = Schema { env_col: Some("env".into()), u_col: None, y_col: "y".into(), feature_cols: panel.feature_names.clone() };
        let art = ModelArtifact::Discrete { schema, model };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        art.save(&path).unwrap();
        let back = ModelArtifact::load(&path).unwrap();
        assert_eq!(back, art);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"mode\": \"discrete\""));
        let preds = back.predict(&PanelDataset::Discrete(toy_panel(&[3.0], 200, 4))).unwrap();
        assert_eq!(preds.len(), 1);
        assert!(preds[0].mean_rss().unwrap() < 2.0);
    }

    #[test]
    fn missing_response_gives_no_rss() {
        let g = GroupPrediction { label: "a".into(), u: None, y: DVector::from_element(2, f64::NAN), y_hat: DVector::zeros(2) };
        assert_eq!(g.mean_rss(), None);
    }
}
