use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Mean softmax cross-entropy over a batch, with the gradient w.r.t. the
/// logits: `(softmax - onehot) / n`.
pub fn softmax_ce_loss(logits: &Matrix, labels: &[usize]) -> Result<(f32, Matrix)> {
    let (n, t) = logits.shape();
    if labels.len() != n {
        return Err(Error::shape(format!(
            "{} labels for {} logit rows",
            labels.len(),
            n
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= t) {
        return Err(Error::input(format!(
            "label {} out of range for {} classes",
            bad, t
        )));
    }
    let mut grad = Matrix::zeros(n, t);
    let mut loss = 0.0f64;
    for i in 0..n {
        let row = logits.row(i);
        let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
        let mut z = 0.0f64;
        for &v in row {
            z += (v as f64 - max).exp();
        }
        let log_z = z.ln() + max;
        loss += log_z - row[labels[i]] as f64;
        for (j, &v) in row.iter().enumerate() {
            let p = (v as f64 - log_z).exp();
            let onehot = if j == labels[i] { 1.0 } else { 0.0 };
            grad.set(i, j, ((p - onehot) / n as f64) as f32);
        }
    }
    Ok(((loss / n as f64) as f32, grad))
}
