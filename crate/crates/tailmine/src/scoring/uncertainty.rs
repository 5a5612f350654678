//! Model-uncertainty acquisition signals computed from user-supplied
//! prediction files. No model runs in-process.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ScoringError;

pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

/// Per-object detection record: class name plus confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRecord {
    pub class: String,
    pub score: f64,
}

/// One prediction record. Classification records carry `probs` (a
/// distribution over classes); detection-style records carry `boxes`.
/// Ensemble files repeat ids across `member` indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    #[serde(rename = "id")]
    pub example_id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub member: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxes: Option<Vec<BoxRecord>>,
}

impl Prediction {
    pub fn from_probs(example_id: impl Into<String>, probs: Vec<f64>) -> Self {
        Self {
            example_id: example_id.into(),
            probs,
            member: None,
            boxes: None,
        }
    }
}

/// Check the class-probability simplex invariants: entries in [0, 1] and
/// summing to 1 within tolerance. Violations name the offending example.
pub fn validate_probs(pred: &Prediction) -> Result<(), ScoringError> {
    if pred.probs.is_empty() {
        return Err(ScoringError::InvalidProbs {
            id: pred.example_id.clone(),
            message: "no class probabilities".into(),
        });
    }
    for &p in &pred.probs {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(ScoringError::InvalidProbs {
                id: pred.example_id.clone(),
                message: format!("probability {p} outside [0, 1]"),
            });
        }
    }
    let sum: f64 = pred.probs.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(ScoringError::InvalidProbs {
            id: pred.example_id.clone(),
            message: format!("probabilities sum to {sum}, not 1"),
        });
    }
    Ok(())
}

/// Entropy of the predicted class distribution, in nats; higher means more
/// novel. `0 * ln 0` contributes nothing.
pub fn predictive_entropy(pred: &Prediction) -> Result<f64, ScoringError> {
    validate_probs(pred)?;
    let entropy = pred
        .probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    Ok(entropy)
}

/// Lack of confidence in the top prediction: one minus the max class
/// probability; in [0, 1 - 1/C].
pub fn variation_ratio(pred: &Prediction) -> Result<f64, ScoringError> {
    validate_probs(pred)?;
    let max = pred.probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(1.0 - max)
}

fn population_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Disagreement across ensemble members for one example.
///
/// Classification records: mean over classes of the across-member variance
/// of the class probability. Detection-style records: variance across
/// members of each member's mean box confidence. This is a documented
/// approximation for ensembles whose native uncertainty statistic is defined
/// elsewhere; it is not a reimplementation of any particular one.
pub fn ensemble_variance(preds: &[Prediction]) -> Result<f64, ScoringError> {
    let id = preds
        .first()
        .map(|p| p.example_id.clone())
        .unwrap_or_default();
    if preds.len() < 2 {
        return Err(ScoringError::TooFewMembers {
            id,
            members: preds.len(),
        });
    }

    let detection_style = preds.iter().any(|p| p.boxes.is_some());
    if detection_style {
        if preds.iter().any(|p| p.boxes.is_none()) {
            return Err(ScoringError::MixedPredictionShapes { id });
        }
        let member_means: Vec<f64> = preds
            .iter()
            .map(|p| {
                let boxes = p.boxes.as_ref().expect("checked above");
                if boxes.is_empty() {
                    0.0
                } else {
                    boxes.iter().map(|b| b.score).sum::<f64>() / boxes.len() as f64
                }
            })
            .collect();
        return Ok(population_variance(&member_means));
    }

    let classes = preds[0].probs.len();
    for pred in preds {
        validate_probs(pred)?;
        if pred.probs.len() != classes {
            return Err(ScoringError::InvalidProbs {
                id: pred.example_id.clone(),
                message: format!(
                    "member has {} classes, expected {classes}",
                    pred.probs.len()
                ),
            });
        }
    }
    let mean_class_variance = (0..classes)
        .map(|c| {
            let column: Vec<f64> = preds.iter().map(|p| p.probs[c]).collect();
            population_variance(&column)
        })
        .sum::<f64>()
        / classes as f64;
    Ok(mean_class_variance)
}

/// Load a line-delimited prediction file, validating classification records
/// as they are read. Errors carry the line number and example id.
pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<Prediction>, ScoringError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let file = fs::File::open(path).map_err(|e| ScoringError::PredictionFile {
        path: shown.clone(),
        line: 0,
        message: e.to_string(),
    })?;
    let mut predictions = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| ScoringError::PredictionFile {
            path: shown.clone(),
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let pred: Prediction =
            serde_json::from_str(&line).map_err(|e| ScoringError::PredictionFile {
                path: shown.clone(),
                line: line_no,
                message: e.to_string(),
            })?;
        if pred.boxes.is_none() {
            validate_probs(&pred).map_err(|e| ScoringError::PredictionFile {
                path: shown.clone(),
                line: line_no,
                message: e.to_string(),
            })?;
        }
        predictions.push(pred);
    }
    Ok(predictions)
}

/// Group ensemble predictions by example id, preserving first-seen order and
/// sorting members within each group.
pub fn group_by_example(preds: Vec<Prediction>) -> Vec<(String, Vec<Prediction>)> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<Prediction>> = BTreeMap::new();
    for pred in preds {
        if !groups.contains_key(&pred.example_id) {
            order.push(pred.example_id.clone());
        }
        groups.entry(pred.example_id.clone()).or_default().push(pred);
    }
    order
        .into_iter()
        .map(|id| {
            let mut members = groups.remove(&id).expect("grouped");
            members.sort_by_key(|p| p.member.unwrap_or(0));
            (id, members)
        })
        .collect()
}
