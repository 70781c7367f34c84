use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::{backward, forward_logits, softmax_ce_loss, Model};
use crate::rng::{derive_seed, rng_from};
use crate::tensor::Matrix;
use rand::Rng;

/// SGD-with-momentum hyperparameters and schedule.
///
/// The learning rate starts at `lr0` and multiplies by 0.1 each time a drop
/// point (a fraction of the total epochs) is passed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f32,
    pub momentum: f32,
    pub weight_decay: f32,
    pub lr_drop_points: Vec<f32>,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        if !(self.lr0 > 0.0) {
            return Err(Error::config("lr0 must be > 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum must be in [0, 1)"));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::config("weight_decay must be >= 0"));
        }
        let mut prev = 0.0f32;
        for &p in &self.lr_drop_points {
            if !(p > prev && p < 1.0) {
                return Err(Error::config(
                    "lr_drop_points must be strictly increasing, each in (0, 1)",
                ));
            }
            prev = p;
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig { seed, ..self.clone() }
    }

    /// Learning rate for a given epoch index (0-based).
    pub fn effective_lr(&self, epoch: usize) -> f32 {
        let drops = self
            .lr_drop_points
            .iter()
            .filter(|&&p| epoch as f32 >= p * self.epochs as f32)
            .count();
        self.lr0 * 0.1f32.powi(drops as i32)
    }
}

/// Momentum buffers, one per parameter tensor.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub velocity: Vec<Matrix>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(model: &Model) -> Self {
        OptimizerState {
            velocity: model.zero_like_params(),
            step: 0,
        }
    }
}

/// One SGD-with-momentum update:
/// `v <- momentum*v + (grad + weight_decay*param)`, `param <- param - lr*v`.
///
/// `mask`, when given, multiplies the combined gradient entry-wise; masked-out
/// entries (mask 0) are left byte-identical.
pub fn sgd_step_masked(
    model: &mut Model,
    grads: &[Matrix],
    state: &mut OptimizerState,
    cfg: &TrainConfig,
    epoch: usize,
    mask: Option<&[Matrix]>,
) -> Result<()> {
    if grads.len() != model.params.len() {
        return Err(Error::shape("gradient list length mismatch"));
    }
    let lr = cfg.effective_lr(epoch);
    for (t, param) in model.params.iter_mut().enumerate() {
        if grads[t].shape() != param.shape() {
            return Err(Error::shape(format!("gradient tensor {} shape mismatch", t)));
        }
        let v = &mut state.velocity[t];
        let g = &grads[t];
        let m = mask.map(|m| &m[t]);
        for i in 0..param.data().len() {
            let masked = m.map(|mm| mm.data()[i] != 0.0).unwrap_or(true);
            if !masked {
                continue;
            }
            let p = param.data()[i];
            let combined = g.data()[i] + cfg.weight_decay * p;
            let nv = cfg.momentum * v.data()[i] + combined;
            v.data_mut()[i] = nv;
            param.data_mut()[i] = p - lr * nv;
        }
    }
    state.step += 1;
    Ok(())
}

pub fn sgd_step(
    model: &mut Model,
    grads: &[Matrix],
    state: &mut OptimizerState,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<()> {
    sgd_step_masked(model, grads, state, cfg, epoch, None)
}

/// Softmax-CE training over shuffled mini-batches; deterministic per
/// `cfg.seed`. Dataset labels must all be present in `model.class_labels`.
pub fn train_supervised(model: &Model, data: &LabeledDataset, cfg: &TrainConfig) -> Result<Model> {
    train_supervised_masked(model, data, cfg, None)
}

/// As [`train_supervised`] with an optional per-parameter update mask
/// (1 = trainable, 0 = frozen).
pub fn train_supervised_masked(
    model: &Model,
    data: &LabeledDataset,
    cfg: &TrainConfig,
    mask: Option<&[Matrix]>,
) -> Result<Model> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::input("training dataset is empty"));
    }
    let local_labels: Vec<usize> = data
        .labels
        .iter()
        .map(|&l| {
            model
                .class_index(l)
                .ok_or_else(|| Error::input(format!("label {} not served by the model", l)))
        })
        .collect::<Result<_>>()?;

    let mut model = model.clone();
    let mut state = OptimizerState::new(&model);
    let n = data.len();
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = rng_from(derive_seed(cfg.seed, epoch as u64, 0xF15));
        // Fisher-Yates
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for chunk in order.chunks(cfg.batch_size) {
            let x = data.features.select_rows(chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| local_labels[i]).collect();
            let logits = forward_logits(&model, &x)?;
            let (_, dlogits) = softmax_ce_loss(&logits, &y)?;
            let grads = backward(&model, &x, &dlogits)?;
            sgd_step_masked(&mut model, &grads, &mut state, cfg, epoch, mask)?;
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, AuxKind, GeneratorKind, GeneratorSpec, Split};
    use crate::nn::{init_model, MlpSpec};

    fn cfg(epochs: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 8,
            lr0: 0.1,
            momentum: 0.9,
            weight_decay: 1e-4,
            lr_drop_points: vec![0.7, 0.9],
            seed,
        }
    }

    #[test]
    fn config_validation() {
        assert!(cfg(1, 0).validate().is_ok());
        let mut bad = cfg(1, 0);
        bad.lr_drop_points = vec![0.9, 0.7];
        assert!(bad.validate().is_err());
        let mut bad = cfg(1, 0);
        bad.momentum = 1.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn schedule_is_monotone_nonincreasing() {
        let c = cfg(20, 0);
        let mut prev = f32::INFINITY;
        for e in 0..20 {
            let lr = c.effective_lr(e);
            assert!(lr <= prev);
            prev = lr;
        }
        assert!((c.effective_lr(0) - 0.1).abs() < 1e-9);
        assert!((c.effective_lr(19) - 0.001).abs() < 1e-7);
    }

    #[test]
    fn zero_grads_leave_params_and_velocity_unchanged() {
        let spec = MlpSpec::new(vec![2, 3, 2]).unwrap();
        let mut m = init_model(&spec, &[0, 1], 5).unwrap();
        let before = m.params.clone();
        let mut st = OptimizerState::new(&m);
        let mut c = cfg(10, 0);
        c.weight_decay = 0.0;
        let zeros = m.zero_like_params();
        sgd_step(&mut m, &zeros, &mut st, &c, 0).unwrap();
        assert_eq!(m.params, before);
        assert!(st.velocity.iter().all(|v| v.data().iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn first_step_from_zero_velocity_is_closed_form() {
        let spec = MlpSpec::new(vec![2, 2]).unwrap();
        let mut m = init_model(&spec, &[0, 1], 5).unwrap();
        let before = m.params.clone();
        let mut st = OptimizerState::new(&m);
        let c = cfg(10, 7);
        let mut grads = m.zero_like_params();
        for g in &mut grads {
            for (i, v) in g.data_mut().iter_mut().enumerate() {
                *v = 0.01 * (i as f32 + 1.0);
            }
        }
        sgd_step(&mut m, &grads, &mut st, &c, 0).unwrap();
        for t in 0..m.params.len() {
            for i in 0..m.params[t].data().len() {
                let p0 = before[t].data()[i];
                let want = p0 - c.lr0 * (grads[t].data()[i] + c.weight_decay * p0);
                assert!((m.params[t].data()[i] - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn trajectory_matches_scalar_recurrence() {
        // 1-d quadratic bowl L = 0.5*w^2, grad = w; compare 10 steps of the
        // tensor update against a scalar reimplementation of the recurrence
        let spec = MlpSpec::new(vec![1, 1]).unwrap();
        let mut m = init_model(&spec, &[0], 1).unwrap();
        m.params[0].set(0, 0, 1.0);
        m.params[1].set(0, 0, 0.0);
        let mut st = OptimizerState::new(&m);
        let c = TrainConfig {
            epochs: 10,
            batch_size: 1,
            lr0: 0.1,
            momentum: 0.9,
            weight_decay: 1e-2,
            lr_drop_points: vec![0.5],
            seed: 0,
        };
        let mut w = 1.0f32;
        let mut v = 0.0f32;
        for e in 0..10 {
            let mut grads = m.zero_like_params();
            grads[0].set(0, 0, m.params[0].get(0, 0));
            sgd_step(&mut m, &grads, &mut st, &c, e).unwrap();

            let lr = if e >= 5 { 0.01 } else { 0.1 };
            v = 0.9 * v + (w + 0.01 * w);
            w -= lr * v;
            assert!((m.params[0].get(0, 0) - w).abs() < 1e-6, "epoch {}", e);
        }
    }

    fn blobs(seed: u64) -> crate::data::LabeledDataset {
        let spec = GeneratorSpec {
            kind: GeneratorKind::GaussianBlobs,
            classes: 2,
            samples_per_class: 40,
            test_samples_per_class: 10,
            dim: 2,
            dispersion: 0.2,
            seed,
            aux_kind: AuxKind::BroadUniform,
            aux_size: 10,
        };
        let (train, _, _) = generate(&spec).unwrap();
        LabeledDataset::new(train.features, train.labels, Split::Train).unwrap()
    }

    #[test]
    fn separable_blobs_reach_high_training_accuracy() {
        let data = blobs(3);
        let spec = MlpSpec::new(vec![2, 8, 2]).unwrap();
        let m = init_model(&spec, &[0, 1], 11).unwrap();
        let trained = train_supervised(&m, &data, &cfg(50, 21)).unwrap();
        let logits = forward_logits(&trained, &data.features).unwrap();
        let correct = (0..data.len())
            .filter(|&i| {
                let row = logits.row(i);
                let pred = row
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
                    .unwrap()
                    .0;
                pred as u32 == data.labels[i]
            })
            .count();
        assert!(correct as f32 / data.len() as f32 >= 0.99);
    }

    #[test]
    fn zero_epochs_returns_init_unchanged() {
        let data = blobs(4);
        let spec = MlpSpec::new(vec![2, 4, 2]).unwrap();
        let m = init_model(&spec, &[0, 1], 11).unwrap();
        let out = train_supervised(&m, &data, &cfg(0, 5)).unwrap();
        assert_eq!(out.params, m.params);
    }

    #[test]
    fn training_is_deterministic() {
        let data = blobs(5);
        let spec = MlpSpec::new(vec![2, 6, 2]).unwrap();
        let m = init_model(&spec, &[0, 1], 2).unwrap();
        let a = train_supervised(&m, &data, &cfg(20, 9)).unwrap();
        let b = train_supervised(&m, &data, &cfg(20, 9)).unwrap();
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let spec = MlpSpec::new(vec![2, 2]).unwrap();
        let m = init_model(&spec, &[0, 1], 0).unwrap();
        let data = blobs(1);
        let empty = crate::data::LabeledDataset::new(
            data.features.clone(),
            data.labels.clone(),
            Split::Train,
        );
        // construction enforces nonemptiness; drive the error through a label
        // the model does not serve instead
        let mut bad = empty.unwrap();
        bad.labels[0] = 99;
        assert!(train_supervised(&m, &bad, &cfg(1, 0)).is_err());
    }
}
