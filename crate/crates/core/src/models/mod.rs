//! Classifiers over [`DocumentVector`]s and their persisted form.
//!
//! Scores are raw margins (SVM), vote shares (forest) or one-hot indicators
//! (majority). They are ranking scores, not calibrated probabilities.

mod bundle;
mod external;
mod forest;
mod majority;
mod svm;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::DocumentVector;

pub use bundle::{load_bundle, save_bundle, ModelBundle, TrainingMetadata, FORMAT_VERSION};
pub use external::{external_scores, parse_external_scores, ScoredRow};
pub use forest::{train_forest, DecisionTree, ForestModel, ForestParams, MaxFeatures, TreeNode};
pub use majority::{train_majority, MajorityModel};
pub use svm::{train_svm, train_svm_with_history, LinearSvmModel, SvmParams};
pub use train::{train_bundle, train_with_reruns, ModelKind, RerunLog, RerunRecord, TrainConfig};

/// Ordered class names; the position of a name is its class index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelMap {
    names: Vec<String>,
}

impl LabelMap {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::Config("a label map needs at least one class".into()));
        }
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() || name.chars().any(|c| c.is_whitespace() || c == ',') {
                return Err(Error::Config(format!("invalid class name {name:?}")));
            }
            if names[..i].contains(name) {
                return Err(Error::Config(format!("duplicate class name {name:?}")));
            }
        }
        Ok(LabelMap { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name).ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }
}

impl TryFrom<Vec<String>> for LabelMap {
    type Error = Error;

    fn try_from(names: Vec<String>) -> Result<Self> {
        LabelMap::new(names)
    }
}

impl From<LabelMap> for Vec<String> {
    fn from(map: LabelMap) -> Self {
        map.names
    }
}

/// A predicted label with one score per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    pub label_index: usize,
    pub scores: Vec<f64>,
}

impl Prediction {
    /// Picks the highest score; ties go to the lowest class index.
    pub fn from_scores(scores: Vec<f64>, labels: &LabelMap) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                found: scores.len(),
            });
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("prediction scores must be finite".into()));
        }
        let label_index = argmax(&scores);
        Ok(Prediction {
            label: labels.name(label_index).to_string(),
            label_index,
            scores,
        })
    }

    pub fn score(&self) -> f64 {
        self.scores[self.label_index]
    }
}

pub(crate) fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Optional per-class reweighting of training examples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    #[default]
    Uniform,
    /// Weight `n / (k * n_c)` for class `c`, with `k` the number of classes
    /// present in the training data.
    InverseFrequency,
}

impl ClassWeighting {
    pub(crate) fn weights(self, labels: &[usize], n_classes: usize) -> Vec<f64> {
        match self {
            ClassWeighting::Uniform => vec![1.0; n_classes],
            ClassWeighting::InverseFrequency => {
                let mut counts = vec![0usize; n_classes];
                for &y in labels {
                    counts[y] += 1;
                }
                let present = counts.iter().filter(|&&c| c > 0).count() as f64;
                let n = labels.len() as f64;
                counts
                    .iter()
                    .map(|&c| if c == 0 { 0.0 } else { n / (present * c as f64) })
                    .collect()
            }
        }
    }
}

/// Any trained classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelVariant {
    Majority(MajorityModel),
    LinearSvm(LinearSvmModel),
    Forest(ForestModel),
}

impl ModelVariant {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelVariant::Majority(_) => ModelKind::Majority,
            ModelVariant::LinearSvm(_) => ModelKind::Svm,
            ModelVariant::Forest(_) => ModelKind::Forest,
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            ModelVariant::Majority(m) => m.class_counts.len(),
            ModelVariant::LinearSvm(m) => m.n_classes(),
            ModelVariant::Forest(m) => m.n_classes(),
        }
    }

    /// Input dimension, or `None` for models that ignore their input.
    pub fn dim(&self) -> Option<usize> {
        match self {
            ModelVariant::Majority(_) => None,
            ModelVariant::LinearSvm(m) => Some(m.dim()),
            ModelVariant::Forest(m) => Some(m.dim()),
        }
    }

    pub fn scores(&self, x: &DocumentVector) -> Result<Vec<f64>> {
        if let Some(dim) = self.dim() {
            if x.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: x.dim(),
                });
            }
        }
        Ok(match self {
            ModelVariant::Majority(m) => m.scores(),
            ModelVariant::LinearSvm(m) => m.scores(x),
            ModelVariant::Forest(m) => m.scores(x),
        })
    }

    pub fn predict(&self, x: &DocumentVector, labels: &LabelMap) -> Result<Prediction> {
        Prediction::from_scores(self.scores(x)?, labels)
    }
}

pub(crate) fn check_training_set(vectors: &[DocumentVector], labels: &[usize], n_classes: usize) -> Result<usize> {
    if vectors.len() != labels.len() {
        return Err(Error::LengthMismatch {
            gold: labels.len(),
            predicted: vectors.len(),
        });
    }
    if vectors.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= n_classes) {
        return Err(Error::Training(format!("class index {bad} out of range for {n_classes} classes")));
    }
    let dim = vectors[0].dim();
    if let Some(v) = vectors.iter().find(|v| v.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: v.dim(),
        });
    }
    let mut present = vec![false; n_classes];
    for &y in labels {
        present[y] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::Training("training data contains a single class".into()));
    }
    Ok(dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_lowest_index_on_ties() {
        let labels = LabelMap::new(["a", "b", "c"]).unwrap();
        let p = Prediction::from_scores(vec![0.2, 0.5, 0.5], &labels).unwrap();
        assert_eq!(p.label, "b");
        let p = Prediction::from_scores(vec![0.0, 0.0, 0.0], &labels).unwrap();
        assert_eq!(p.label, "a");
        assert!(Prediction::from_scores(vec![f64::NAN, 0.0, 0.0], &labels).is_err());
        assert!(Prediction::from_scores(vec![0.0], &labels).is_err());
    }

    #[test]
    fn label_map_rules() {
        assert!(LabelMap::new(["a", "a"]).is_err());
        assert!(LabelMap::new(Vec::<String>::new()).is_err());
        assert!(LabelMap::new(["has space"]).is_err());
        let m = LabelMap::new(["x", "y"]).unwrap();
        assert_eq!(m.require("y").unwrap(), 1);
        assert!(matches!(m.require("z"), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn inverse_frequency_weights() {
        let w = ClassWeighting::InverseFrequency.weights(&[0, 0, 0, 1], 3);
        assert!((w[0] - 4.0 / 6.0).abs() < 1e-12);
        assert!((w[1] - 2.0).abs() < 1e-12);
        assert_eq!(w[2], 0.0);
    }

    proptest::proptest! {
        #[test]
        fn argmax_scale_invariant(scores in proptest::collection::vec(-100.0f64..100.0, 1..6), c in 0.001f64..1000.0) {
            let labels = LabelMap::new((0..scores.len()).map(|i| format!("c{i}"))).unwrap();
            let a = Prediction::from_scores(scores.clone(), &labels).unwrap();
            let b = Prediction::from_scores(scores.iter().map(|s| s * c).collect(), &labels).unwrap();
            proptest::prop_assert_eq!(a.label, b.label);
        }
    }
}
