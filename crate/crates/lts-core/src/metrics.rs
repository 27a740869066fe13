//! Classification metrics over a prediction/truth pair: accuracy, per-class
//! precision and recall, and the f-measure of a designated positive class.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Metrics of one evaluation pass. Precision and recall are indexed by class
/// id; the confusion counts are taken against `positive_class`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSnapshot {
    pub accuracy: f64,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    /// Harmonic mean of precision and recall of the positive class; 0 when
    /// both are 0.
    pub fm: f64,
    pub positive_class: u32,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
}

/// Compute metrics for `predictions` against `truth`.
///
/// A class that is never predicted gets precision 0; a class with no true
/// instances gets recall 0.
pub fn compute_metrics(
    predictions: &[u32],
    truth: &[u32],
    class_count: usize,
    positive_class: u32,
) -> Result<MetricsSnapshot> {
    if predictions.len() != truth.len() {
        return Err(Error::LengthMismatch {
            predictions: predictions.len(),
            truth: truth.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyDataset("no predictions to score".into()));
    }

    let mut confusion = vec![vec![0usize; class_count]; class_count];
    let mut correct = 0usize;
    for (&p, &t) in predictions.iter().zip(truth) {
        confusion[t as usize][p as usize] += 1;
        if p == t {
            correct += 1;
        }
    }
    let accuracy = correct as f64 / predictions.len() as f64;

    let mut precision = vec![0.0f64; class_count];
    let mut recall = vec![0.0f64; class_count];
    for c in 0..class_count {
        let tp = confusion[c][c];
        let predicted: usize = (0..class_count).map(|t| confusion[t][c]).sum();
        let actual: usize = confusion[c].iter().sum();
        if predicted > 0 {
            precision[c] = tp as f64 / predicted as f64;
        }
        if actual > 0 {
            recall[c] = tp as f64 / actual as f64;
        }
    }

    let pos = positive_class as usize;
    let p = precision[pos];
    let r = recall[pos];
    let fm = if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    };

    let true_positives = confusion[pos][pos];
    let false_positives: usize = (0..class_count)
        .filter(|&t| t != pos)
        .map(|t| confusion[t][pos])
        .sum();
    let false_negatives: usize = (0..class_count)
        .filter(|&c| c != pos)
        .map(|c| confusion[pos][c])
        .sum();
    let true_negatives = predictions.len() - true_positives - false_positives - false_negatives;

    Ok(MetricsSnapshot {
        accuracy,
        precision,
        recall,
        fm,
        positive_class,
        true_positives,
        false_positives,
        false_negatives,
        true_negatives,
    })
}
