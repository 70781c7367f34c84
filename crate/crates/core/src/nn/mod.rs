//! Minimal differentiable classifier: dense ReLU MLP with exact analytic
//! gradients. Parameters are `f32`; dot products accumulate in `f64`.

mod loss;
mod train;

pub use loss::softmax_ce_loss;
pub use train::{
    sgd_step, train_supervised, train_supervised_masked, OptimizerState, TrainConfig,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from;
use crate::tensor::Matrix;

/// Layer widths of a rectifier MLP: input dim, hidden dims, output dim.
/// Hidden layers use ReLU; the output layer is linear (logits).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_widths: Vec<usize>,
}

impl MlpSpec {
    pub fn new(layer_widths: Vec<usize>) -> Result<Self> {
        if layer_widths.len() < 2 {
            return Err(Error::config("an MLP needs at least input and output widths"));
        }
        if layer_widths.iter().any(|&w| w == 0) {
            return Err(Error::config("all layer widths must be >= 1"));
        }
        Ok(MlpSpec { layer_widths })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_widths.len() - 1
    }

    /// Same hidden layout with a different output width.
    pub fn with_output_dim(&self, out: usize) -> Result<MlpSpec> {
        let mut widths = self.layer_widths.clone();
        *widths.last_mut().unwrap() = out;
        MlpSpec::new(widths)
    }
}

/// A classifier: spec, flat parameter list, and the global class id each
/// output neuron stands for.
///
/// Parameters alternate weight and bias per layer: weights are `(out, in)`
/// row-major, biases are `(1, out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: MlpSpec,
    pub params: Vec<Matrix>,
    pub class_labels: Vec<u32>,
}

impl Model {
    /// Index of a global class id in the output layer.
    pub fn class_index(&self, label: u32) -> Option<usize> {
        self.class_labels.iter().position(|&l| l == label)
    }

    pub fn num_classes(&self) -> usize {
        self.class_labels.len()
    }

    /// Zero-valued gradients/velocities with parameter shapes.
    pub fn zero_like_params(&self) -> Vec<Matrix> {
        self.params
            .iter()
            .map(|p| Matrix::zeros(p.rows(), p.cols()))
            .collect()
    }
}

/// Fresh model with fan-in-scaled uniform weights (bound `sqrt(6/fan_in)`)
/// and zero biases, deterministic per seed.
pub fn init_model(spec: &MlpSpec, class_labels: &[u32], seed: u64) -> Result<Model> {
    if class_labels.len() != spec.output_dim() {
        return Err(Error::config(format!(
            "{} class labels for an output width of {}",
            class_labels.len(),
            spec.output_dim()
        )));
    }
    let mut seen = std::collections::BTreeSet::new();
    for &l in class_labels {
        if !seen.insert(l) {
            return Err(Error::config(format!("duplicate class label {}", l)));
        }
    }
    let mut rng = rng_from(seed);
    let mut params = Vec::with_capacity(2 * spec.num_layers());
    for l in 0..spec.num_layers() {
        let fan_in = spec.layer_widths[l];
        let fan_out = spec.layer_widths[l + 1];
        let bound = (6.0 / fan_in as f64).sqrt();
        let mut w = Matrix::zeros(fan_out, fan_in);
        for v in w.data_mut() {
            *v = rng.gen_range(-bound..bound) as f32;
        }
        params.push(w);
        params.push(Matrix::zeros(1, fan_out));
    }
    Ok(Model {
        spec: spec.clone(),
        params,
        class_labels: class_labels.to_vec(),
    })
}

fn check_input(model: &Model, inputs: &Matrix) -> Result<()> {
    if inputs.cols() != model.spec.input_dim() {
        return Err(Error::shape(format!(
            "input dim {} vs model input width {}",
            inputs.cols(),
            model.spec.input_dim()
        )));
    }
    Ok(())
}

/// One layer: `z = a W^T + b`, optionally rectified.
fn affine(a: &Matrix, w: &Matrix, b: &Matrix, relu: bool) -> Matrix {
    let mut out = Matrix::zeros(a.rows(), w.rows());
    for i in 0..a.rows() {
        let ai = a.row(i);
        for o in 0..w.rows() {
            let wr = w.row(o);
            let mut acc = b.get(0, o) as f64;
            for k in 0..a.cols() {
                acc += ai[k] as f64 * wr[k] as f64;
            }
            let v = acc as f32;
            out.set(i, o, if relu && v < 0.0 { 0.0 } else { v });
        }
    }
    out
}

/// Post-activation values per layer: `[inputs, h1, ..., logits]`.
fn forward_activations(model: &Model, inputs: &Matrix) -> Vec<Matrix> {
    let n_layers = model.spec.num_layers();
    let mut acts = Vec::with_capacity(n_layers + 1);
    acts.push(inputs.clone());
    for l in 0..n_layers {
        let relu = l + 1 < n_layers;
        let next = affine(&acts[l], &model.params[2 * l], &model.params[2 * l + 1], relu);
        acts.push(next);
    }
    acts
}

/// Logits for a batch of inputs; no softmax applied.
pub fn forward_logits(model: &Model, inputs: &Matrix) -> Result<Matrix> {
    check_input(model, inputs)?;
    Ok(forward_activations(model, inputs).pop().unwrap())
}

/// Backpropagate an upstream `dL/dlogits` to parameter gradients.
/// Activations are recomputed from the inputs.
pub fn backward(model: &Model, inputs: &Matrix, dlogits: &Matrix) -> Result<Vec<Matrix>> {
    check_input(model, inputs)?;
    if dlogits.shape() != (inputs.rows(), model.spec.output_dim()) {
        return Err(Error::shape(format!(
            "upstream gradient {:?} vs expected {:?}",
            dlogits.shape(),
            (inputs.rows(), model.spec.output_dim())
        )));
    }
    let acts = forward_activations(model, inputs);
    let n_layers = model.spec.num_layers();
    let mut grads = model.zero_like_params();
    let mut delta = dlogits.clone();
    for l in (0..n_layers).rev() {
        let a_prev = &acts[l];
        let w = &model.params[2 * l];
        // dW[o][k] = sum_i delta[i][o] * a_prev[i][k]
        {
            let gw = &mut grads[2 * l];
            for o in 0..w.rows() {
                for k in 0..w.cols() {
                    let mut acc = 0.0f64;
                    for i in 0..delta.rows() {
                        acc += delta.get(i, o) as f64 * a_prev.get(i, k) as f64;
                    }
                    gw.set(o, k, acc as f32);
                }
            }
        }
        {
            let gb = &mut grads[2 * l + 1];
            for o in 0..w.rows() {
                let mut acc = 0.0f64;
                for i in 0..delta.rows() {
                    acc += delta.get(i, o) as f64;
                }
                gb.set(0, o, acc as f32);
            }
        }
        if l > 0 {
            // delta_prev = (delta W) .* relu'(a_prev); a_prev is post-ReLU so
            // the mask is a_prev > 0
            let mut prev = Matrix::zeros(delta.rows(), w.cols());
            for i in 0..delta.rows() {
                for k in 0..w.cols() {
                    if a_prev.get(i, k) > 0.0 {
                        let mut acc = 0.0f64;
                        for o in 0..w.rows() {
                            acc += delta.get(i, o) as f64 * w.get(o, k) as f64;
                        }
                        prev.set(i, k, acc as f32);
                    }
                }
            }
            delta = prev;
        }
    }
    Ok(grads)
}
