//! Confidence gating of network predictions.

use rand_chacha::ChaCha8Rng;

use super::model::PointSetModel;
use super::taxonomy::{CoarseClass, FineClass};
use super::train::{argmax, prepare};
use super::ClassifierError;
use crate::depthio::PointCloud;

/// Default acceptance threshold; a prediction is kept only when its
/// confidence is strictly greater.
pub const DEFAULT_THRESHOLD: f64 = 0.85;

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probabilities: Vec<f64>,
    pub class_index: usize,
    pub confidence: f64,
    pub accepted: bool,
}

impl Prediction {
    pub fn from_probabilities(probabilities: Vec<f64>, threshold: f64) -> Self {
        let class_index = argmax(&probabilities);
        let confidence = probabilities[class_index];
        Self { accepted: confidence > threshold, probabilities, class_index, confidence }
    }
}

/// Outcome of gating: the class survives only when accepted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gated {
    pub class: Option<CoarseClass>,
    pub confidence: f64,
    /// The argmax class whether or not it was accepted.
    pub candidate: Option<CoarseClass>,
}

/// Maps a model class name to the training taxonomy; fine-class models are
/// merged on the fly.
pub fn coarse_of(name: &str) -> Option<CoarseClass> {
    name.parse::<CoarseClass>().ok().or_else(|| name.parse::<FineClass>().ok().and_then(FineClass::coarse))
}

pub fn gate(model_classes: &[String], probabilities: Vec<f64>, threshold: f64) -> Gated {
    let p = Prediction::from_probabilities(probabilities, threshold);
    let candidate = model_classes.get(p.class_index).and_then(|n| coarse_of(n));
    Gated { class: if p.accepted { candidate } else { None }, confidence: p.confidence, candidate }
}

pub fn predict(model: &PointSetModel, cloud: &PointCloud, threshold: f64, rng: &mut ChaCha8Rng) -> Result<Prediction, ClassifierError> {
    if cloud.is_empty() {
        return Err(ClassifierError::EmptyCloud);
    }
    let pts = prepare(cloud, model.n_points, rng);
    Ok(Prediction::from_probabilities(model.forward(&pts)?, threshold))
}

pub fn predict_gated(model: &PointSetModel, cloud: &PointCloud, threshold: f64, rng: &mut ChaCha8Rng) -> Result<Gated, ClassifierError> {
    let p = predict(model, cloud, threshold, rng)?;
    Ok(gate(&model.classes, p.probabilities, threshold))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classes() -> Vec<String> {
        CoarseClass::ALL.iter().map(|c| c.name().to_string()).collect()
    }

    fn forced(top: usize, confidence: f64) -> Vec<f64> {
        let rest = (1.0 - confidence) / 5.0;
        (0..6).map(|i| if i == top { confidence } else { rest }).collect()
    }

    #[test]
    fn low_confidence_is_rejected() {
        let g = gate(&classes(), forced(1, 0.53), DEFAULT_THRESHOLD);
        assert_eq!(g.class, None);
        assert_eq!(g.candidate, Some(CoarseClass::PutOn));
        assert!((g.confidence - 0.53).abs() < 1e-12);
    }

    #[test]
    fn high_confidence_is_accepted() {
        assert_eq!(gate(&classes(), forced(1, 0.90), DEFAULT_THRESHOLD).class, Some(CoarseClass::PutOn));
    }

    #[test]
    fn threshold_is_strict() {
        assert_eq!(gate(&classes(), forced(0, 0.85), 0.85).class, None);
    }

    #[test]
    fn uniform_output_is_rejected() {
        assert_eq!(gate(&classes(), vec![1.0 / 6.0; 6], DEFAULT_THRESHOLD).class, None);
    }

    #[test]
    fn fine_model_names_merge() {
        assert_eq!(coarse_of("night_stand"), Some(CoarseClass::PutOn));
        assert_eq!(coarse_of("store_in"), Some(CoarseClass::StoreIn));
        assert_eq!(coarse_of("door"), None);
    }
}
