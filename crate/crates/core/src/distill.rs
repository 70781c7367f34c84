//! Logit-space model consolidation: per-model bias calibration of teacher
//! logits, the double distillation loss and its distance-metric variants,
//! and the training loop that fits a fresh student to two teachers on an
//! unlabeled auxiliary pool.

use serde::{Deserialize, Serialize};

use crate::data::AuxiliaryPool;
use crate::error::{Error, Result};
use crate::nn::{backward, forward_logits, init_model, sgd_step, MlpSpec, Model, OptimizerState, TrainConfig};
use crate::rng::{derive_seed, rng_from};
use crate::tensor::Matrix;
use rand::Rng;

/// Logits of one sample from the two specialist models: old classes first.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitBlockPair {
    pub y_old: Vec<f32>,
    pub y_new: Vec<f32>,
}

/// Concatenated teacher logits after per-model mean subtraction.
/// `split` is the old-block length.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsolidationTarget {
    pub y_ring: Vec<f32>,
    pub split: usize,
}

/// Distance metric between student logits and the calibrated target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum LossKind {
    L2,
    L1,
    /// Temperature-softened cross-entropy between target and student
    /// distributions, scaled by T^2.
    Kd { temperature: f32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsolidationConfig {
    pub train: TrainConfig,
    pub loss: LossKind,
    pub aux_batch_size: usize,
}

impl ConsolidationConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.aux_batch_size == 0 {
            return Err(Error::config("aux_batch_size must be >= 1"));
        }
        if let LossKind::Kd { temperature } = self.loss {
            if !(temperature > 0.0) {
                return Err(Error::config("KD temperature must be > 0"));
            }
        }
        Ok(())
    }
}

/// Subtract each block's own mean and concatenate old-then-new.
pub fn normalize_concat(pair: &LogitBlockPair) -> Result<ConsolidationTarget> {
    if pair.y_old.is_empty() || pair.y_new.is_empty() {
        return Err(Error::input("both logit blocks must be nonempty"));
    }
    let mut y_ring = Vec::with_capacity(pair.y_old.len() + pair.y_new.len());
    for block in [&pair.y_old, &pair.y_new] {
        let mean = (block.iter().map(|&v| v as f64).sum::<f64>() / block.len() as f64) as f32;
        y_ring.extend(block.iter().map(|&v| v - mean));
    }
    Ok(ConsolidationTarget {
        y_ring,
        split: pair.y_old.len(),
    })
}

/// Mean squared difference over classes: `(1/t) sum_j (y_j - ring_j)^2`,
/// with gradient `(2/t)(y - ring)`.
pub fn double_distillation_loss(y: &[f32], target: &ConsolidationTarget) -> Result<(f32, Vec<f32>)> {
    let t = target.y_ring.len();
    if y.len() != t {
        return Err(Error::shape(format!(
            "student logits length {} vs target length {}",
            y.len(),
            t
        )));
    }
    let mut loss = 0.0f64;
    let mut grad = Vec::with_capacity(t);
    for j in 0..t {
        let d = (y[j] - target.y_ring[j]) as f64;
        loss += d * d;
        grad.push((2.0 * d / t as f64) as f32);
    }
    Ok(((loss / t as f64) as f32, grad))
}

fn softmax_scaled(v: &[f32], temperature: f32) -> Vec<f64> {
    let max = v.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    let t = temperature as f64;
    let exps: Vec<f64> = v.iter().map(|&x| ((x as f64 - max) / t).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// The Table-1 distance-metric variants of the distillation loss.
pub fn distillation_loss_variant(
    kind: LossKind,
    y: &[f32],
    target: &ConsolidationTarget,
) -> Result<(f32, Vec<f32>)> {
    let t = target.y_ring.len();
    if y.len() != t {
        return Err(Error::shape(format!(
            "student logits length {} vs target length {}",
            y.len(),
            t
        )));
    }
    match kind {
        LossKind::L2 => double_distillation_loss(y, target),
        LossKind::L1 => {
            let mut loss = 0.0f64;
            let mut grad = Vec::with_capacity(t);
            for j in 0..t {
                let d = (y[j] - target.y_ring[j]) as f64;
                loss += d.abs();
                grad.push((d.signum() / t as f64) as f32);
            }
            Ok(((loss / t as f64) as f32, grad))
        }
        LossKind::Kd { temperature } => {
            let p_target = softmax_scaled(&target.y_ring, temperature);
            let p_student = softmax_scaled(y, temperature);
            let t2 = (temperature * temperature) as f64;
            let mut loss = 0.0f64;
            let mut grad = Vec::with_capacity(t);
            for j in 0..t {
                loss -= p_target[j] * p_student[j].max(f64::MIN_POSITIVE).ln();
                // d/dy_j of T^2 * CE = T * (p_student_j - p_target_j)
                grad.push((temperature as f64 * (p_student[j] - p_target[j])) as f32);
            }
            Ok(((t2 * loss) as f32, grad))
        }
    }
}

/// Outcome of a consolidation run: the trained student plus the mean
/// distillation loss per epoch.
#[derive(Debug, Clone)]
pub struct Consolidation {
    pub student: Model,
    pub epoch_loss: Vec<f32>,
}

fn check_disjoint(old: &Model, new: &Model) -> Result<()> {
    for l in &new.class_labels {
        if old.class_labels.contains(l) {
            return Err(Error::config(format!(
                "class label {} served by both models; use the common-class target instead",
                l
            )));
        }
    }
    Ok(())
}

/// Train a fresh student to match both teachers on the auxiliary pool.
///
/// The student is never initialized from either teacher and the pool
/// carries no labels; teachers run forward-only.
pub fn consolidate(
    old: &Model,
    new: &Model,
    aux: &AuxiliaryPool,
    cfg: &ConsolidationConfig,
    student_spec: &MlpSpec,
    seed: u64,
) -> Result<Consolidation> {
    cfg.validate()?;
    check_disjoint(old, new)?;
    let total = old.num_classes() + new.num_classes();
    if student_spec.output_dim() != total {
        return Err(Error::config(format!(
            "student output width {} vs {} teacher classes",
            student_spec.output_dim(),
            total
        )));
    }
    if aux.dim() != student_spec.input_dim()
        || aux.dim() != old.spec.input_dim()
        || aux.dim() != new.spec.input_dim()
    {
        return Err(Error::shape("auxiliary pool dimensionality mismatch"));
    }

    let labels: Vec<u32> = old
        .class_labels
        .iter()
        .chain(new.class_labels.iter())
        .copied()
        .collect();
    let mut student = init_model(student_spec, &labels, seed)?;
    let mut state = OptimizerState::new(&student);
    let n = aux.len();
    let mut epoch_loss = Vec::with_capacity(cfg.train.epochs);
    for epoch in 0..cfg.train.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = rng_from(derive_seed(cfg.train.seed, epoch as u64, 0xAB));
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut loss_sum = 0.0f64;
        for chunk in order.chunks(cfg.aux_batch_size) {
            let x = aux.features.select_rows(chunk);
            let old_logits = forward_logits(old, &x)?;
            let new_logits = forward_logits(new, &x)?;
            let student_logits = forward_logits(&student, &x)?;
            let b = chunk.len();
            let mut dlogits = Matrix::zeros(b, total);
            for i in 0..b {
                let target = normalize_concat(&LogitBlockPair {
                    y_old: old_logits.row(i).to_vec(),
                    y_new: new_logits.row(i).to_vec(),
                })?;
                let (loss, grad) = distillation_loss_variant(cfg.loss, student_logits.row(i), &target)?;
                loss_sum += loss as f64;
                for (j, g) in grad.iter().enumerate() {
                    dlogits.set(i, j, g / b as f32);
                }
            }
            let grads = backward(&student, &x, &dlogits)?;
            sgd_step(&mut student, &grads, &mut state, &cfg.train, epoch)?;
        }
        epoch_loss.push((loss_sum / n as f64) as f32);
    }
    Ok(Consolidation {
        student,
        epoch_loss,
    })
}

/// Distillation target for two models with possibly overlapping class sets:
/// normalize each model's logits by its own mean; average where a class is
/// served by both. Output classes are the sorted union of global ids.
pub fn common_class_target(
    labels_a: &[u32],
    y_a: &[f32],
    labels_b: &[u32],
    y_b: &[f32],
) -> Result<(Vec<u32>, Vec<f32>)> {
    if labels_a.len() != y_a.len() || labels_b.len() != y_b.len() {
        return Err(Error::shape("labels and logits must have equal length"));
    }
    if y_a.is_empty() || y_b.is_empty() {
        return Err(Error::input("both logit blocks must be nonempty"));
    }
    let norm = |v: &[f32]| -> Vec<f32> {
        let mean = (v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64) as f32;
        v.iter().map(|&x| x - mean).collect()
    };
    let na = norm(y_a);
    let nb = norm(y_b);
    let mut union: Vec<u32> = labels_a.iter().chain(labels_b.iter()).copied().collect();
    union.sort_unstable();
    union.dedup();
    let mut out = Vec::with_capacity(union.len());
    for &c in &union {
        let a = labels_a.iter().position(|&l| l == c).map(|i| na[i]);
        let b = labels_b.iter().position(|&l| l == c).map(|i| nb[i]);
        out.push(match (a, b) {
            (Some(x), Some(y)) => (x + y) / 2.0,
            (Some(x), None) => x,
            (None, Some(y)) => y,
            (None, None) => unreachable!(),
        });
    }
    Ok((union, out))
}
