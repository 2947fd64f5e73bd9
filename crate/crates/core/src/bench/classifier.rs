//! Multinomial logistic regression, trained only on clean embeddings.

use crate::error::{Error, Result};
use crate::types::LabeledDataset;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub epochs: usize,
    pub lr: f64,
    /// L2 penalty on non-bias weights.
    pub l2: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            epochs: 500,
            lr: 0.5,
            l2: 1e-4,
        }
    }
}

/// Weights of shape `num_classes x (dim + 1)`, last column the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    num_classes: usize,
    dim: usize,
    weights: Vec<f64>,
}

impl ClassifierModel {
    pub fn zeros(num_classes: usize, dim: usize) -> Self {
        ClassifierModel {
            num_classes,
            dim,
            weights: vec![0.0; num_classes * (dim + 1)],
        }
    }

    pub fn from_weights(num_classes: usize, dim: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != num_classes * (dim + 1) {
            return Err(Error::LengthMismatch {
                expected: num_classes * (dim + 1),
                actual: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter("classifier weights must be finite".into()));
        }
        Ok(ClassifierModel {
            num_classes,
            dim,
            weights,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let stride = self.dim + 1;
        self.weights
            .chunks_exact(stride)
            .map(|w| w[..self.dim].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[self.dim])
            .collect()
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(x))
    }

    /// Argmax class; the lowest index wins ties.
    pub fn predict(&self, x: &[f64]) -> usize {
        let logits = self.logits(x);
        let mut best = 0;
        for (c, &z) in logits.iter().enumerate() {
            if z > logits[best] {
                best = c;
            }
        }
        best
    }

    fn check_shape(&self, ds: &LabeledDataset) -> Result<()> {
        if ds.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: ds.dim(),
            });
        }
        if ds.num_classes() != self.num_classes {
            return Err(Error::InvalidParameter(format!(
                "model has {} classes, dataset {}",
                self.num_classes,
                ds.num_classes()
            )));
        }
        Ok(())
    }

    /// Mean cross-entropy plus `l2/2 * |W|^2` (bias excluded), and its
    /// gradient in the same layout as the weights.
    pub fn loss_and_gradient(&self, data: &LabeledDataset, l2: f64) -> Result<(f64, Vec<f64>)> {
        self.check_shape(data)?;
        if data.is_empty() {
            return Err(Error::Empty);
        }
        let stride = self.dim + 1;
        let n = data.len() as f64;
        let mut grad = vec![0.0; self.weights.len()];
        let mut loss = 0.0;
        for (e, y) in data.iter() {
            let x = e.values();
            let p = self.probabilities(x);
            loss -= p[y].max(f64::MIN_POSITIVE).ln();
            for (c, &pc) in p.iter().enumerate() {
                let r = (pc - if c == y { 1.0 } else { 0.0 }) / n;
                let g = &mut grad[c * stride..(c + 1) * stride];
                for (gj, xj) in g[..self.dim].iter_mut().zip(x) {
                    *gj += r * xj;
                }
                g[self.dim] += r;
            }
        }
        loss /= n;
        for c in 0..self.num_classes {
            for j in 0..self.dim {
                let w = self.weights[c * stride + j];
                loss += 0.5 * l2 * w * w;
                grad[c * stride + j] += l2 * w;
            }
        }
        Ok((loss, grad))
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Full-batch gradient descent from zero weights.
pub fn train_classifier(train: &LabeledDataset, params: &TrainParams) -> Result<ClassifierModel> {
    if train.is_empty() {
        return Err(Error::Empty);
    }
    if let Some(c) = train.class_counts().iter().position(|&n| n == 0) {
        return Err(Error::InvalidParameter(format!("class {c} missing from training data")));
    }
    let mut model = ClassifierModel::zeros(train.num_classes(), train.dim());
    for epoch in 0..params.epochs {
        let (loss, grad) = model.loss_and_gradient(train, params.l2)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss(epoch));
        }
        for (w, g) in model.weights.iter_mut().zip(&grad) {
            *w -= params.lr * g;
        }
        if model.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFiniteLoss(epoch));
        }
    }
    Ok(model)
}

/// Fraction of argmax-correct predictions.
pub fn evaluate(model: &ClassifierModel, test: &LabeledDataset) -> Result<f64> {
    model.check_shape(test)?;
    if test.is_empty() {
        return Err(Error::Empty);
    }
    let correct = test.iter().filter(|(e, y)| model.predict(e.values()) == *y).count();
    Ok(correct as f64 / test.len() as f64)
}
