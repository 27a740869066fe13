//! Additive gradient boosting with second-order logistic objectives, and the
//! softmax mapping from per-sample losses to uncertainty targets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::FeatureSource;
use crate::error::{Error, Result};
use crate::tree::{fit_regression_tree, RegTree, TreeRegularization};

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Binary logistic primitives on a raw score and a 0/1 target.
pub mod logistic {
    use super::softplus;

    pub fn sigmoid(raw: f64) -> f64 {
        1.0 / (1.0 + (-raw).exp())
    }

    /// Negative log-likelihood of target `y` under score `raw`.
    pub fn loss(raw: f64, y: f64) -> f64 {
        softplus(raw) - y * raw
    }

    pub fn grad(raw: f64, y: f64) -> f64 {
        sigmoid(raw) - y
    }

    pub fn hess(raw: f64) -> f64 {
        let p = sigmoid(raw);
        p * (1.0 - p)
    }
}

/// Which logistic objective the booster optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    /// One score slot; class 1 iff the raw score is positive.
    BinaryLogistic,
    /// One-vs-rest with the given class count; prediction is the argmax slot.
    OneVsRestLogistic(usize),
}

impl LossKind {
    pub fn for_class_count(class_count: usize) -> LossKind {
        if class_count <= 2 {
            LossKind::BinaryLogistic
        } else {
            LossKind::OneVsRestLogistic(class_count)
        }
    }

    pub fn slots(&self) -> usize {
        match self {
            LossKind::BinaryLogistic => 1,
            LossKind::OneVsRestLogistic(c) => *c,
        }
    }
}

/// Objective plus shrinkage settings for a booster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    pub learning_rate: f64,
    pub base_score: f64,
}

impl LossSpec {
    pub fn binary() -> Self {
        LossSpec {
            kind: LossKind::BinaryLogistic,
            learning_rate: 0.1,
            base_score: 0.0,
        }
    }
}

/// An additive ensemble of regression trees, one score slot per objective
/// component. `trees` keeps `(slot, tree)` pairs in training order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    pub loss: LossSpec,
    pub reg: TreeRegularization,
    pub trees: Vec<(usize, RegTree)>,
    pub n_features: usize,
}

// Hessians this small carry no curvature signal and would blow up leaf
// values, so fitting clamps them.
const MIN_HESSIAN: f64 = 1e-16;

impl BoostModel {
    pub fn new(loss: LossSpec, reg: TreeRegularization, n_features: usize) -> Self {
        BoostModel {
            loss,
            reg,
            trees: Vec::new(),
            n_features,
        }
    }

    pub fn rounds_trained(&self) -> usize {
        self.trees.len() / self.loss.kind.slots()
    }

    /// Raw score per slot: `base_score + learning_rate * sum(tree values)`,
    /// accumulated in training order so repeated evaluation is bit-stable.
    pub fn predict_score(&self, x: &[f64]) -> Vec<f64> {
        let mut scores = vec![self.loss.base_score; self.loss.kind.slots()];
        for (slot, tree) in &self.trees {
            scores[*slot] += self.loss.learning_rate * tree.evaluate(x);
        }
        scores
    }

    /// Predicted class: sign of the single slot for the binary objective,
    /// otherwise the argmax slot with ties to the lower class id.
    pub fn classify(&self, x: &[f64]) -> u32 {
        let scores = self.predict_score(x);
        match self.loss.kind {
            LossKind::BinaryLogistic => u32::from(scores[0] > 0.0),
            LossKind::OneVsRestLogistic(_) => {
                let mut best = 0usize;
                for (k, &s) in scores.iter().enumerate() {
                    if s > scores[best] {
                        best = k;
                    }
                }
                best as u32
            }
        }
    }

    fn slot_target(&self, label: u32, slot: usize) -> f64 {
        match self.loss.kind {
            LossKind::BinaryLogistic => f64::from(label),
            LossKind::OneVsRestLogistic(_) => f64::from(label as usize == slot),
        }
    }

    /// Append `rounds` boosting rounds fit to the labeled set. Each round
    /// adds one tree per slot; existing trees stay untouched, so training is
    /// additive across calls.
    pub fn train_round<F: FeatureSource + ?Sized>(
        &mut self,
        features: &F,
        labeled: &[(usize, u32)],
        rounds: usize,
    ) -> Result<()> {
        if labeled.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let slots = self.loss.kind.slots();
        let rows: Vec<usize> = labeled.iter().map(|&(id, _)| id).collect();
        // Score cache per row and slot, accumulated in the same order as
        // predict_score so incremental updates stay bit-identical to a
        // from-scratch evaluation.
        let mut scores: Vec<Vec<f64>> = rows
            .iter()
            .map(|&id| self.predict_score(features.features(id)))
            .collect();

        let mut grad = vec![0.0f64; rows.len()];
        let mut hess = vec![0.0f64; rows.len()];
        for _ in 0..rounds {
            for slot in 0..slots {
                for (i, &(_, label)) in labeled.iter().enumerate() {
                    let y = self.slot_target(label, slot);
                    grad[i] = logistic::grad(scores[i][slot], y);
                    hess[i] = logistic::hess(scores[i][slot]).max(MIN_HESSIAN);
                }
                let tree = fit_regression_tree(features, &rows, &grad, &hess, &self.reg);
                for (i, &id) in rows.iter().enumerate() {
                    scores[i][slot] +=
                        self.loss.learning_rate * tree.evaluate(features.features(id));
                }
                self.trees.push((slot, tree));
            }
        }
        Ok(())
    }

    /// Per-sample objective value, summed over slots for one-vs-rest.
    pub fn per_sample_loss<F: FeatureSource + ?Sized>(
        &self,
        features: &F,
        labeled: &[(usize, u32)],
    ) -> Vec<f64> {
        labeled
            .iter()
            .map(|&(id, label)| {
                let scores = self.predict_score(features.features(id));
                scores
                    .iter()
                    .enumerate()
                    .map(|(slot, &s)| logistic::loss(s, self.slot_target(label, slot)))
                    .sum()
            })
            .collect()
    }

    /// Mean of [`Self::per_sample_loss`] over the labeled set.
    pub fn mean_loss<F: FeatureSource + ?Sized>(
        &self,
        features: &F,
        labeled: &[(usize, u32)],
    ) -> f64 {
        let losses = self.per_sample_loss(features, labeled);
        losses.iter().sum::<f64>() / losses.len() as f64
    }
}

/// Softmax of a loss vector: each sample's share of the total exponentiated
/// loss. The maximum is subtracted before exponentiation so large losses
/// cannot overflow.
pub fn softmax_uncertainty(losses: &[f64]) -> Result<Vec<f64>> {
    for (i, &l) in losses.iter().enumerate() {
        if l.is_nan() {
            return Err(Error::NonFiniteLoss(i));
        }
    }
    if losses.is_empty() {
        return Ok(Vec::new());
    }
    let max = losses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = losses.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// Uncertainty targets for the labeled set at one iteration: the softmax of
/// per-sample training losses, keyed by instance id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyLabels {
    pub iteration: usize,
    pub targets: BTreeMap<usize, f64>,
}

/// Compute uncertainty targets for `labeled` under the current model.
pub fn compute_uncertainty_labels<F: FeatureSource + ?Sized>(
    model: &BoostModel,
    features: &F,
    labeled: &[(usize, u32)],
    iteration: usize,
) -> Result<UncertaintyLabels> {
    let losses = model.per_sample_loss(features, labeled);
    let z = softmax_uncertainty(&losses)?;
    let targets = labeled
        .iter()
        .map(|&(id, _)| id)
        .zip(z)
        .collect::<BTreeMap<usize, f64>>();
    Ok(UncertaintyLabels { iteration, targets })
}
