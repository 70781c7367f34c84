//! A desk-scale detection test bed: synthetic scenes on a fixed anchor
//! grid, per-anchor MLP heads, and the consolidation loop that distills two
//! specialist heads into one student over unlabeled scenes.

use rand::Rng;

use super::{
    build_target, detection_consolidation_loss, inference_twice_aggregate, select_anchors,
    AnchorPrediction, DetectionConfig,
};
use crate::error::{Error, Result};
use crate::nn::{backward, forward_logits, init_model, sgd_step, MlpSpec, Model, OptimizerState, TrainConfig};
use crate::rng::{derive_seed, rng_from};
use crate::tensor::Matrix;

/// Geometry and statistics of the synthetic box world.
#[derive(Debug, Clone)]
pub struct BoxWorldSpec {
    pub grid: (usize, usize),
    pub anchors_per_cell: usize,
    pub num_types: u32,
    /// Probability that an anchor holds an object.
    pub object_rate: f32,
    pub noise: f32,
    pub seed: u64,
}

impl BoxWorldSpec {
    pub fn num_anchors(&self) -> usize {
        self.grid.0 * self.grid.1 * self.anchors_per_cell
    }

    /// Type channels, one presence channel, four offset channels.
    pub fn feature_dim(&self) -> usize {
        self.num_types as usize + 5
    }
}

/// One scene: per-anchor features plus ground truth (type and box offsets)
/// for anchors that hold an object.
#[derive(Debug, Clone)]
pub struct Scene {
    pub features: Matrix,
    pub gt: Vec<Option<(u32, [f32; 4])>>,
}

/// Generate scenes containing only objects of `allowed_types`.
pub fn generate_scenes(
    spec: &BoxWorldSpec,
    count: usize,
    allowed_types: &[u32],
    stream: u64,
) -> Result<Vec<Scene>> {
    if allowed_types.iter().any(|&t| t >= spec.num_types) {
        return Err(Error::config("object type outside the world's type range"));
    }
    if allowed_types.is_empty() {
        return Err(Error::config("need at least one allowed object type"));
    }
    let d = spec.feature_dim();
    let n = spec.num_anchors();
    let mut scenes = Vec::with_capacity(count);
    for s in 0..count {
        let mut rng = rng_from(derive_seed(spec.seed, stream, s as u64));
        let mut feats = Matrix::zeros(n, d);
        let mut gt = Vec::with_capacity(n);
        for a in 0..n {
            let row = feats.row_mut(a);
            for v in row.iter_mut() {
                *v = spec.noise * (rng.gen_range(-1.0f32..1.0));
            }
            if rng.gen_range(0.0f32..1.0) < spec.object_rate {
                let ty = allowed_types[rng.gen_range(0..allowed_types.len())];
                let offsets: [f32; 4] = std::array::from_fn(|_| rng.gen_range(-0.8f32..0.8));
                row[ty as usize] += 2.0;
                row[spec.num_types as usize] += 1.5;
                for (i, &o) in offsets.iter().enumerate() {
                    row[spec.num_types as usize + 1 + i] += o;
                }
                gt.push(Some((ty, offsets)));
            } else {
                gt.push(None);
            }
        }
        scenes.push(Scene { features: feats, gt });
    }
    Ok(scenes)
}

/// A per-anchor MLP head emitting class logits followed by four box
/// offsets. `classes` are the global object-type ids the logit slice
/// stands for.
#[derive(Debug, Clone)]
pub struct DetectorHead {
    pub model: Model,
    pub classes: Vec<u32>,
}

impl DetectorHead {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Per-anchor class logits and box offsets.
    pub fn forward(&self, features: &Matrix) -> Result<(Matrix, Vec<[f32; 4]>)> {
        let out = forward_logits(&self.model, features)?;
        let c = self.num_classes();
        let mut logits = Matrix::zeros(out.rows(), c);
        let mut boxes = Vec::with_capacity(out.rows());
        for i in 0..out.rows() {
            let row = out.row(i);
            logits.row_mut(i).copy_from_slice(&row[..c]);
            boxes.push([row[c], row[c + 1], row[c + 2], row[c + 3]]);
        }
        Ok((logits, boxes))
    }
}

fn head_spec(input_dim: usize, hidden: &[usize], classes: usize) -> Result<MlpSpec> {
    let mut widths = vec![input_dim];
    widths.extend_from_slice(hidden);
    widths.push(classes + 4);
    MlpSpec::new(widths)
}

fn dummy_labels(n: usize) -> Vec<u32> {
    (0..n as u32).collect()
}

/// Supervised training of a specialist head: per-class sigmoid logistic
/// loss on every anchor, smooth-L1 on the box offsets of object anchors.
pub fn train_head(
    world: &BoxWorldSpec,
    scenes: &[Scene],
    classes: &[u32],
    hidden: &[usize],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<DetectorHead> {
    cfg.validate()?;
    if scenes.is_empty() {
        return Err(Error::input("no training scenes"));
    }
    let c = classes.len();
    let spec = head_spec(world.feature_dim(), hidden, c)?;
    let mut model = init_model(&spec, &dummy_labels(c + 4), seed)?;
    let mut state = OptimizerState::new(&model);

    // flatten scenes into anchor-level samples
    let mut rows = Vec::new();
    let mut targets: Vec<(Vec<f32>, Option<[f32; 4]>)> = Vec::new();
    for scene in scenes {
        for a in 0..scene.features.rows() {
            rows.push(scene.features.row(a).to_vec());
            let mut y = vec![0.0f32; c];
            let mut gt_box = None;
            if let Some((ty, offsets)) = scene.gt[a] {
                if let Some(local) = classes.iter().position(|&cl| cl == ty) {
                    y[local] = 1.0;
                    gt_box = Some(offsets);
                }
            }
            targets.push((y, gt_box));
        }
    }
    let features = Matrix::from_rows(&rows)?;
    let n = features.rows();

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = rng_from(derive_seed(cfg.seed, epoch as u64, 0xDE7));
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for chunk in order.chunks(cfg.batch_size) {
            let x = features.select_rows(chunk);
            let out = forward_logits(&model, &x)?;
            let b = chunk.len();
            let mut dout = Matrix::zeros(b, c + 4);
            for (bi, &si) in chunk.iter().enumerate() {
                let (y, gt_box) = &targets[si];
                let row = out.row(bi);
                for j in 0..c {
                    let p = 1.0 / (1.0 + (-row[j]).exp());
                    dout.set(bi, j, (p - y[j]) / b as f32);
                }
                if let Some(gt) = gt_box {
                    let pred = [row[c], row[c + 1], row[c + 2], row[c + 3]];
                    let (_, g) = super::smooth_l1_loss(&pred, gt);
                    for j in 0..4 {
                        dout.set(bi, c + j, g[j] / b as f32);
                    }
                }
            }
            let grads = backward(&model, &x, &dout)?;
            sgd_step(&mut model, &grads, &mut state, cfg, epoch)?;
        }
    }
    Ok(DetectorHead {
        model,
        classes: classes.to_vec(),
    })
}

/// Per-anchor teacher outputs for one scene.
pub fn teacher_predictions(
    old: &DetectorHead,
    new: &DetectorHead,
    scene: &Scene,
) -> Result<Vec<AnchorPrediction>> {
    let (lo, bo) = old.forward(&scene.features)?;
    let (ln, bn) = new.forward(&scene.features)?;
    Ok((0..scene.features.rows())
        .map(|a| AnchorPrediction {
            logits_old: lo.row(a).to_vec(),
            logits_new: ln.row(a).to_vec(),
            box_old: bo[a],
            box_new: bn[a],
        })
        .collect())
}

/// Distill both specialist heads into a fresh student: per scene, score all
/// anchors with both teachers, keep the top-k by objectness, and train the
/// student on the combined classification + localization loss. Teachers are
/// not modified.
pub fn consolidate_toy_detector(
    old: &DetectorHead,
    new: &DetectorHead,
    aux_scenes: &[Scene],
    dcfg: &DetectionConfig,
    train_cfg: &TrainConfig,
    seed: u64,
) -> Result<DetectorHead> {
    dcfg.validate()?;
    train_cfg.validate()?;
    if aux_scenes.is_empty() {
        return Err(Error::input("no auxiliary scenes"));
    }
    for cl in &new.classes {
        if old.classes.contains(cl) {
            return Err(Error::config(format!("class {} served by both heads", cl)));
        }
    }

    // build the distillation set: selected anchors with their targets
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for scene in aux_scenes {
        let anchors = teacher_predictions(old, new, scene)?;
        for idx in select_anchors(&anchors, dcfg.k) {
            rows.push(scene.features.row(idx).to_vec());
            targets.push(build_target(&anchors[idx])?);
        }
    }
    let features = Matrix::from_rows(&rows)?;
    let n = features.rows();
    let c = old.num_classes() + new.num_classes();

    let hidden = &old.model.spec.layer_widths[1..old.model.spec.layer_widths.len() - 1];
    let spec = head_spec(features.cols(), hidden, c)?;
    let mut student = init_model(&spec, &dummy_labels(c + 4), derive_seed(seed, 0, 0x57))?;
    let mut state = OptimizerState::new(&student);

    for epoch in 0..train_cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = rng_from(derive_seed(train_cfg.seed, epoch as u64, 0xDD7));
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for chunk in order.chunks(train_cfg.batch_size) {
            let x = features.select_rows(chunk);
            let out = forward_logits(&student, &x)?;
            let b = chunk.len();
            let mut dout = Matrix::zeros(b, c + 4);
            for (bi, &si) in chunk.iter().enumerate() {
                let row = out.row(bi);
                let logits = &row[..c];
                let pred_box = [row[c], row[c + 1], row[c + 2], row[c + 3]];
                let (_, cls_grad, box_grad) =
                    detection_consolidation_loss(logits, &pred_box, &targets[si], dcfg)?;
                for (j, g) in cls_grad.iter().enumerate() {
                    dout.set(bi, j, g / b as f32);
                }
                for j in 0..4 {
                    dout.set(bi, c + j, box_grad[j] / b as f32);
                }
            }
            let grads = backward(&student, &x, &dout)?;
            sgd_step(&mut student, &grads, &mut state, train_cfg, epoch)?;
        }
    }
    let mut classes = old.classes.clone();
    classes.extend_from_slice(&new.classes);
    Ok(DetectorHead {
        model: student,
        classes,
    })
}

/// Fraction of selected anchors on which the student's argmax class agrees
/// with the inference-twice merge of the two teachers.
pub fn student_teacher_agreement(
    student: &DetectorHead,
    old: &DetectorHead,
    new: &DetectorHead,
    scenes: &[Scene],
    k: usize,
) -> Result<f32> {
    let mut agree = 0usize;
    let mut total = 0usize;
    for scene in scenes {
        let anchors = teacher_predictions(old, new, scene)?;
        let (logits, _) = student.forward(&scene.features)?;
        for idx in select_anchors(&anchors, k) {
            let row = logits.row(idx);
            let mut best = 0usize;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            let merged = inference_twice_aggregate(&anchors[idx]);
            if best == merged.class_index {
                agree += 1;
            }
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::input("no anchors selected"));
    }
    Ok(agree as f32 / total as f32)
}
