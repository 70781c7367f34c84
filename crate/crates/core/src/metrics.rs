//! Single-head evaluation metrics: top-1 accuracy over all seen classes,
//! confusion matrices, the average incremental accuracy, the first-task
//! curve, and a column-mass bias statistic for confusion matrices.
//!
//! Argmax ties break to the lowest index everywhere.

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::{forward_logits, Model};

/// Prediction counts; `labels[i]` is the global class id of row/column `i`
/// (rows = true class, columns = predicted class).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<u32>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }
}

/// Everything recorded after one session of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub run: usize,
    pub session: usize,
    pub seen_classes: Vec<u32>,
    /// Aligned with `seen_classes`.
    pub per_class_accuracy: Vec<f32>,
    pub top1: f32,
    pub confusion: ConfusionMatrix,
    /// Accuracy restricted to the classes of the first session.
    pub first_group_accuracy: f32,
}

/// Predicted global class ids, lowest-index tie break.
pub fn predict(model: &Model, features: &crate::tensor::Matrix) -> Result<Vec<u32>> {
    let logits = forward_logits(model, features)?;
    Ok((0..logits.rows())
        .map(|i| {
            let row = logits.row(i);
            let mut best = 0usize;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            model.class_labels[best]
        })
        .collect())
}

fn check_covered(model: &Model, test: &LabeledDataset) -> Result<()> {
    for &l in &test.labels {
        if model.class_index(l).is_none() {
            return Err(Error::input(format!(
                "test sample of class {} not served by the model",
                l
            )));
        }
    }
    Ok(())
}

/// Fraction of samples whose argmax logit maps to the true global class.
pub fn top1_accuracy(model: &Model, test: &LabeledDataset) -> Result<f32> {
    check_covered(model, test)?;
    let preds = predict(model, &test.features)?;
    let correct = preds
        .iter()
        .zip(&test.labels)
        .filter(|(p, t)| p == t)
        .count();
    Ok(correct as f32 / test.len() as f32)
}

/// Confusion counts over the sorted set of classes present in the model.
pub fn confusion_matrix(model: &Model, test: &LabeledDataset) -> Result<ConfusionMatrix> {
    check_covered(model, test)?;
    let mut labels = model.class_labels.clone();
    labels.sort_unstable();
    let index = |l: u32| labels.binary_search(&l).unwrap();
    let mut counts = vec![vec![0u64; labels.len()]; labels.len()];
    let preds = predict(model, &test.features)?;
    for (p, &t) in preds.iter().zip(&test.labels) {
        counts[index(t)][index(*p)] += 1;
    }
    Ok(ConfusionMatrix { labels, counts })
}

/// Mean of per-session top-1 accuracies, excluding the first session.
pub fn avg_incremental_accuracy(records: &[MetricsRecord]) -> Result<f32> {
    if records.len() < 2 {
        return Err(Error::input(
            "average incremental accuracy needs at least two sessions",
        ));
    }
    let sum: f64 = records[1..].iter().map(|r| r.top1 as f64).sum();
    Ok((sum / (records.len() - 1) as f64) as f32)
}

/// First-session-class accuracy after each session.
pub fn first_task_curve(records: &[MetricsRecord]) -> Vec<f32> {
    records.iter().map(|r| r.first_group_accuracy).collect()
}

/// Max column mass over mean column mass; 1.0 iff column-uniform.
pub fn column_bias_statistic(confusion: &ConfusionMatrix) -> Result<f32> {
    let total = confusion.total();
    if total == 0 {
        return Err(Error::input("confusion matrix is empty"));
    }
    let c = confusion.labels.len();
    let col_sums: Vec<u64> = (0..c)
        .map(|j| confusion.counts.iter().map(|row| row[j]).sum())
        .collect();
    let max = *col_sums.iter().max().unwrap() as f64;
    let mean = total as f64 / c as f64;
    Ok((max / mean) as f32)
}
