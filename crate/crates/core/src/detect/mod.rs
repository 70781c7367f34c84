//! Anchor-level distillation math for one-stage detector heads: objectness
//! scoring over both teachers' class probabilities, top-k anchor selection,
//! regression-target choice, smooth-L1 box loss, the combined
//! classification+localization objective, and the inference-twice merge
//! baseline.
//!
//! Class probabilities are per-class sigmoids of the logits, so per-model
//! argmax agrees between the probability and logit views.

pub mod toy;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distill::{double_distillation_loss, normalize_concat, ConsolidationTarget, LogitBlockPair};
use crate::error::{Error, Result};

/// Per-anchor outputs of the two specialist heads: class logits and box
/// offsets `(t_x, t_y, t_h, t_w)` in anchor-relative parameterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorPrediction {
    pub logits_old: Vec<f32>,
    pub logits_new: Vec<f32>,
    pub box_old: [f32; 4],
    pub box_new: [f32; 4],
}

fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f32) -> f32 {
    (p / (1.0 - p)).ln()
}

impl AnchorPrediction {
    /// Build from probabilities in (0, 1); logits are the inverse sigmoid.
    pub fn from_probs(
        probs_old: &[f32],
        probs_new: &[f32],
        box_old: [f32; 4],
        box_new: [f32; 4],
    ) -> Result<Self> {
        for &p in probs_old.iter().chain(probs_new) {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::input(format!("probability {} outside (0, 1)", p)));
            }
        }
        Ok(AnchorPrediction {
            logits_old: probs_old.iter().map(|&p| logit(p)).collect(),
            logits_new: probs_new.iter().map(|&p| logit(p)).collect(),
            box_old,
            box_new,
        })
    }

    pub fn probs_old(&self) -> Vec<f32> {
        self.logits_old.iter().map(|&z| sigmoid(z)).collect()
    }

    pub fn probs_new(&self) -> Vec<f32> {
        self.logits_new.iter().map(|&z| sigmoid(z)).collect()
    }

    pub fn num_classes(&self) -> usize {
        self.logits_old.len() + self.logits_new.len()
    }
}

/// Which teacher supplied a regression target or a merged box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    Old,
    New,
}

/// Distillation target for one selected anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionTarget {
    pub y_ring: ConsolidationTarget,
    pub box_target: [f32; 4],
    pub source: Source,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// Anchors distilled per image.
    pub k: usize,
    /// Balance between classification and localization terms.
    pub lambda: f32,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig { k: 64, lambda: 1.0 }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("k must be >= 1"));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::config("lambda must be >= 0"));
        }
        Ok(())
    }
}

/// Objectness score: max over the concatenated class probabilities.
pub fn objectness(a: &AnchorPrediction) -> f32 {
    a.probs_old()
        .into_iter()
        .chain(a.probs_new())
        .fold(f32::NEG_INFINITY, f32::max)
}

/// Indices of the `min(k, n)` anchors with the highest objectness, sorted by
/// descending score then ascending index; ties go to the lower index.
pub fn select_anchors(anchors: &[AnchorPrediction], k: usize) -> Vec<usize> {
    let mut scored: Vec<(usize, f32)> = anchors
        .iter()
        .enumerate()
        .map(|(i, a)| (i, objectness(a)))
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(k.min(anchors.len()));
    scored.into_iter().map(|(i, _)| i).collect()
}

/// Pick the box target: the old head's box iff its max logit strictly
/// exceeds the new head's max logit, otherwise the new head's box.
pub fn regression_target(a: &AnchorPrediction) -> ([f32; 4], Source) {
    let max_old = a.logits_old.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    let max_new = a.logits_new.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    if max_old > max_new {
        (a.box_old, Source::Old)
    } else {
        (a.box_new, Source::New)
    }
}

/// Full distillation target for an anchor: calibrated class logits plus the
/// chosen box.
pub fn build_target(a: &AnchorPrediction) -> Result<DetectionTarget> {
    let y_ring = normalize_concat(&LogitBlockPair {
        y_old: a.logits_old.clone(),
        y_new: a.logits_new.clone(),
    })?;
    let (box_target, source) = regression_target(a);
    Ok(DetectionTarget {
        y_ring,
        box_target,
        source,
    })
}

fn smooth_l1(d: f32) -> (f32, f32) {
    if d.abs() < 1.0 {
        (0.5 * d * d, d)
    } else {
        (d.abs() - 0.5, d.signum())
    }
}

/// Elementwise smooth-L1 over the four offsets, with the gradient w.r.t.
/// the predicted tuple.
pub fn smooth_l1_loss(pred: &[f32; 4], target: &[f32; 4]) -> (f32, [f32; 4]) {
    let mut loss = 0.0f32;
    let mut grad = [0.0f32; 4];
    for i in 0..4 {
        let (l, g) = smooth_l1(pred[i] - target[i]);
        loss += l;
        grad[i] = g;
    }
    (loss, grad)
}

/// Combined anchor loss `L_cls + lambda * L_loc`, with gradients w.r.t. the
/// student's class logits and box tuple.
pub fn detection_consolidation_loss(
    student_logits: &[f32],
    student_box: &[f32; 4],
    target: &DetectionTarget,
    cfg: &DetectionConfig,
) -> Result<(f32, Vec<f32>, [f32; 4])> {
    let (cls_loss, cls_grad) = double_distillation_loss(student_logits, &target.y_ring)?;
    let (loc_loss, loc_grad) = smooth_l1_loss(student_box, &target.box_target);
    let mut box_grad = [0.0f32; 4];
    for i in 0..4 {
        box_grad[i] = cfg.lambda * loc_grad[i];
    }
    Ok((cls_loss + cfg.lambda * loc_loss, cls_grad, box_grad))
}

/// Inference-twice merge of one anchor: winning class is the argmax over the
/// concatenated probabilities; the box comes from the winning model. Ties
/// break to the lower class index (old block first).
#[derive(Debug, Clone, PartialEq)]
pub struct MergedPrediction {
    pub class_index: usize,
    pub prob: f32,
    pub box_pred: [f32; 4],
    pub source: Source,
}

pub fn inference_twice_aggregate(a: &AnchorPrediction) -> MergedPrediction {
    let probs: Vec<f32> = a.probs_old().into_iter().chain(a.probs_new()).collect();
    let mut best = 0usize;
    for (j, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = j;
        }
    }
    let source = if best < a.logits_old.len() {
        Source::Old
    } else {
        Source::New
    };
    MergedPrediction {
        class_index: best,
        prob: probs[best],
        box_pred: match source {
            Source::Old => a.box_old,
            Source::New => a.box_new,
        },
        source,
    }
}

/// A replayable synthetic scene fixture: grid geometry plus per-anchor
/// teacher outputs, stored as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFixture {
    pub grid: [usize; 2],
    pub anchors_per_cell: usize,
    pub anchors: Vec<AnchorPrediction>,
}

impl SceneFixture {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
