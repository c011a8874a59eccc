use serde::{Deserialize, Serialize};

use crate::corpus::VeracityLabel;

/// Model output for one graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Probabilities indexed by [`VeracityLabel::index`].
    pub label_dist: [f64; 3],
    /// Across-node importance distribution.
    pub importance: Vec<f64>,
    /// Selected node indices, ascending.
    pub evidence: Vec<usize>,
    /// One node x node matrix per hop layer, when the model has hop layers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hop_attention: Option<Vec<Vec<Vec<f64>>>>,
}

impl Prediction {
    /// Arg-max label; ties go to the earlier label.
    pub fn label(&self) -> VeracityLabel {
        let mut best = 0;
        for i in 1..3 {
            if self.label_dist[i] > self.label_dist[best] {
                best = i;
            }
        }
        VeracityLabel::ALL[best]
    }

    pub fn confidence(&self) -> f64 {
        self.label_dist
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// One line of a predictions file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub label: VeracityLabel,
    pub label_dist: [f64; 3],
    pub evidence: Vec<usize>,
    pub importance: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hop_attention: Option<Vec<Vec<Vec<f64>>>>,
}

impl PredictionRecord {
    pub fn new(id: impl Into<String>, p: &Prediction) -> Self {
        PredictionRecord {
            id: id.into(),
            label: p.label(),
            label_dist: p.label_dist,
            evidence: p.evidence.clone(),
            importance: p.importance.clone(),
            hop_attention: p.hop_attention.clone(),
        }
    }

    pub fn prediction(&self) -> Prediction {
        Prediction {
            label_dist: self.label_dist,
            importance: self.importance.clone(),
            evidence: self.evidence.clone(),
            hop_attention: self.hop_attention.clone(),
        }
    }
}
