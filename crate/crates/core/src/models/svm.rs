//! Linear SVM trained by stochastic subgradient descent on the
//! L2-regularized hinge loss.
//!
//! Each separator minimizes
//!
//! ```text
//! λ/2 (‖w‖² + b²) + 1/n Σ c_i · max(0, 1 − y_i (w·x_i + b))
//! ```
//!
//! with step size `η_t = 1 / (λ t)`, `t` counting updates from 1 across all
//! epochs. The bias is treated as the weight of a constant feature and is
//! regularized with the rest. Examples are visited in a fresh ChaCha8
//! permutation each epoch; all separators share the same visiting order.
//!
//! At the end of every epoch the objective is measured on the whole
//! training set. If the epoch made it worse, the weights fall back to the
//! best end-of-epoch weights so far and training continues from there with
//! the step counter still advancing. The returned separator is therefore
//! the best end-of-epoch iterate, and the recorded objective never
//! increases.
//!
//! Two classes use a single separator whose positive side is class 0.
//! More classes use one separator per class (one-vs-rest).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_training_set, ClassWeighting};
use crate::error::{Error, Result};
use crate::features::DocumentVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    pub class_weight: ClassWeighting,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            lambda: 1e-4,
            epochs: 10,
            seed: 0,
            class_weight: ClassWeighting::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvmModel {
    dim: usize,
    n_classes: usize,
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
    pub params: SvmParams,
}

impl LinearSvmModel {
    /// Assembles a model from explicit separators: one for two classes,
    /// otherwise one per class.
    pub fn from_parts(
        dim: usize,
        n_classes: usize,
        weights: Vec<Vec<f64>>,
        biases: Vec<f64>,
        params: SvmParams,
    ) -> Result<Self> {
        let expected = separator_count(n_classes);
        if n_classes < 2 || weights.len() != expected || biases.len() != expected {
            return Err(Error::Bundle(format!(
                "{n_classes} classes need {expected} separators, found {} weight vectors and {} biases",
                weights.len(),
                biases.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| w.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: w.len(),
            });
        }
        if weights.iter().flatten().chain(&biases).any(|v| !v.is_finite()) {
            return Err(Error::Bundle("non-finite SVM weight".into()));
        }
        Ok(LinearSvmModel {
            dim,
            n_classes,
            weights,
            biases,
            params,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    /// Per-class margins. With two classes the scores are `[m, -m]`.
    pub fn scores(&self, x: &DocumentVector) -> Vec<f64> {
        let margins: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| x.dot(w) + b)
            .collect();
        if self.n_classes == 2 {
            vec![margins[0], -margins[0]]
        } else {
            margins
        }
    }
}

fn separator_count(n_classes: usize) -> usize {
    if n_classes == 2 {
        1
    } else {
        n_classes
    }
}

/// Weight vector stored as `scale * v` so the per-step shrink is O(1).
#[derive(Clone)]
struct ScaledWeights {
    v: Vec<f64>,
    bias: f64,
    scale: f64,
}

impl ScaledWeights {
    fn new(dim: usize) -> Self {
        ScaledWeights {
            v: vec![0.0; dim],
            bias: 0.0,
            scale: 1.0,
        }
    }

    fn margin(&self, x: &DocumentVector) -> f64 {
        self.scale * (x.dot(&self.v) + self.bias)
    }

    fn shrink(&mut self, factor: f64) {
        if factor <= 0.0 {
            self.v.iter_mut().for_each(|w| *w = 0.0);
            self.bias = 0.0;
            self.scale = 1.0;
            return;
        }
        self.scale *= factor;
        if self.scale < 1e-9 {
            self.v.iter_mut().for_each(|w| *w *= self.scale);
            self.bias *= self.scale;
            self.scale = 1.0;
        }
    }

    fn add(&mut self, x: &DocumentVector, step: f64) {
        let s = step / self.scale;
        for &(i, v) in x.entries() {
            self.v[i as usize] += s * v;
        }
        self.bias += s;
    }

    fn finish(self) -> (Vec<f64>, f64) {
        let scale = self.scale;
        (self.v.into_iter().map(|w| w * scale).collect(), self.bias * scale)
    }

    fn squared_norm(&self) -> f64 {
        self.scale * self.scale * (self.v.iter().map(|w| w * w).sum::<f64>() + self.bias * self.bias)
    }
}

pub fn train_svm(
    vectors: &[DocumentVector],
    labels: &[usize],
    n_classes: usize,
    params: &SvmParams,
) -> Result<LinearSvmModel> {
    train_svm_with_history(vectors, labels, n_classes, params).map(|(m, _)| m)
}

/// Like [`train_svm`], also returning the regularized objective of every
/// separator measured at the end of each epoch (`history[separator][epoch]`).
pub fn train_svm_with_history(
    vectors: &[DocumentVector],
    labels: &[usize],
    n_classes: usize,
    params: &SvmParams,
) -> Result<(LinearSvmModel, Vec<Vec<f64>>)> {
    let dim = check_training_set(vectors, labels, n_classes)?;
    if !(params.lambda > 0.0 && params.lambda.is_finite()) {
        return Err(Error::Config(format!("lambda must be positive, got {}", params.lambda)));
    }
    if params.epochs == 0 {
        return Err(Error::Config("epochs must be at least 1".into()));
    }

    let class_weights = params.class_weight.weights(labels, n_classes);
    let n = vectors.len();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let orders: Vec<Vec<usize>> = (0..params.epochs)
        .map(|_| {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            order
        })
        .collect();

    let mut weights = Vec::new();
    let mut biases = Vec::new();
    let mut history = Vec::new();
    for sep in 0..separator_count(n_classes) {
        let target = |i: usize| if labels[i] == sep { 1.0 } else { -1.0 };
        let mut w = ScaledWeights::new(dim);
        let mut epochs = Vec::with_capacity(params.epochs);
        let mut best: Option<(ScaledWeights, f64)> = None;
        let mut t = 0u64;
        for order in &orders {
            for &i in order {
                t += 1;
                let eta = 1.0 / (params.lambda * t as f64);
                let y = target(i);
                let violated = y * w.margin(&vectors[i]) < 1.0;
                w.shrink(1.0 - eta * params.lambda);
                if violated {
                    w.add(&vectors[i], eta * y * class_weights[labels[i]]);
                }
            }
            let loss: f64 = (0..n)
                .map(|i| class_weights[labels[i]] * (1.0 - target(i) * w.margin(&vectors[i])).max(0.0))
                .sum::<f64>()
                / n as f64;
            let objective = 0.5 * params.lambda * w.squared_norm() + loss;
            match &best {
                Some((_, best_objective)) if objective > *best_objective => {
                    w = best.as_ref().unwrap().0.clone();
                }
                _ => best = Some((w.clone(), objective)),
            }
            epochs.push(best.as_ref().unwrap().1);
        }
        let (wv, b) = w.finish();
        weights.push(wv);
        biases.push(b);
        history.push(epochs);
    }

    let model = LinearSvmModel::from_parts(dim, n_classes, weights, biases, *params)
        .map_err(|e| Error::Training(format!("training diverged: {e}")))?;
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;

    fn point(x: f64, y: f64) -> DocumentVector {
        DocumentVector::new(2, vec![(0, x), (1, y)]).unwrap()
    }

    /// (1,0) -> class 0 and (0,1) -> class 1 with jitter well inside the
    /// margin, so the classes are separated by the line x = y.
    fn toy(seed: u64) -> (Vec<DocumentVector>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..100 {
            let (jx, jy) = (rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2));
            if i % 2 == 0 {
                xs.push(point(1.0 + jx, jy));
                ys.push(0);
            } else {
                xs.push(point(jx, 1.0 + jy));
                ys.push(1);
            }
        }
        (xs, ys)
    }

    #[test]
    fn separable_toy_set() {
        let (xs, ys) = toy(3);
        let params = SvmParams {
            lambda: 1e-2,
            ..Default::default()
        };
        let m = train_svm(&xs, &ys, 2, &params).unwrap();
        let labels = crate::models::LabelMap::new(["a", "b"]).unwrap();
        for (x, &y) in xs.iter().zip(&ys) {
            let p = crate::models::Prediction::from_scores(m.scores(x), &labels).unwrap();
            assert_eq!(p.label_index, y);
        }
    }

    #[test]
    fn deterministic() {
        let (xs, ys) = toy(5);
        let p = SvmParams {
            seed: 11,
            ..Default::default()
        };
        assert_eq!(train_svm(&xs, &ys, 2, &p).unwrap(), train_svm(&xs, &ys, 2, &p).unwrap());
    }

    #[test]
    fn objective_non_increasing_across_epochs() {
        let (xs, ys) = toy(9);
        for lambda in [1e-4, 1e-3, 1e-2] {
            let p = SvmParams {
                lambda,
                epochs: 10,
                ..Default::default()
            };
            let (_, history) = train_svm_with_history(&xs, &ys, 2, &p).unwrap();
            for pair in history[0].windows(2) {
                assert!(pair[1] <= pair[0] + 1e-12, "lambda {lambda}: {:?}", history[0]);
            }
        }
    }

    #[test]
    fn objective_still_falls() {
        let (xs, ys) = toy(9);
        let (_, history) = train_svm_with_history(&xs, &ys, 2, &SvmParams::default()).unwrap();
        assert!(history[0][9] < history[0][0], "{:?}", history[0]);
    }

    #[test]
    fn binary_sign_rule_and_zero_vector() {
        let m = LinearSvmModel::from_parts(2, 2, vec![vec![1.0, -1.0]], vec![-0.5], SvmParams::default()).unwrap();
        assert_eq!(m.scores(&point(1.0, 0.0)), vec![0.5, -0.5]);
        assert_eq!(m.scores(&DocumentVector::zeros(2)), vec![-0.5, 0.5]);
        let ovr = LinearSvmModel::from_parts(
            2,
            3,
            vec![vec![0.0, 0.0]; 3],
            vec![0.1, 0.3, 0.2],
            SvmParams::default(),
        )
        .unwrap();
        assert_eq!(ovr.scores(&DocumentVector::zeros(2)), vec![0.1, 0.3, 0.2]);
    }

    #[test]
    fn rejects_single_class() {
        let xs = vec![point(1.0, 0.0), point(0.0, 1.0)];
        assert!(matches!(train_svm(&xs, &[1, 1], 2, &SvmParams::default()), Err(Error::Training(_))));
    }
}
