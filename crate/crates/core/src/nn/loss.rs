use crate::tensor::Tensor;

/// Floor applied to probabilities before taking logarithms.
pub const LOG_CLAMP: f64 = 1e-12;

/// Per-sample error function. Networks emit raw logits; the loss applies the
/// softmax (multi-class) or sigmoid (single binary output) itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    CrossEntropy,
    BinaryCrossEntropy,
}

impl LossKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LossKind::CrossEntropy => "ce",
            LossKind::BinaryCrossEntropy => "bce",
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Sum of per-sample losses and, optionally, the gradient of the *mean* loss
/// with respect to the logits (scaled by `grad_scale`).
pub(crate) fn loss_sum(
    kind: LossKind,
    logits: &Tensor,
    labels: &[usize],
    grad_scale: Option<f64>,
) -> (f64, Option<Tensor>) {
    let k = logits.sample_len();
    let mut total = 0.0;
    let mut grad = grad_scale.map(|_| vec![0.0; logits.len()]);
    for (i, (&y, z)) in labels.iter().zip(logits.data().chunks(k)).enumerate() {
        match kind {
            LossKind::CrossEntropy => {
                let p = softmax(z);
                total -= p[y].max(LOG_CLAMP).ln();
                if let (Some(g), Some(s)) = (grad.as_mut(), grad_scale) {
                    for (j, &pj) in p.iter().enumerate() {
                        let t = if j == y { 1.0 } else { 0.0 };
                        g[i * k + j] = s * (pj - t);
                    }
                }
            }
            LossKind::BinaryCrossEntropy => {
                let p = sigmoid(z[0]);
                let t = if y == 1 { 1.0 } else { 0.0 };
                total -= t * p.max(LOG_CLAMP).ln() + (1.0 - t) * (1.0 - p).max(LOG_CLAMP).ln();
                if let (Some(g), Some(s)) = (grad.as_mut(), grad_scale) {
                    g[i] = s * (p - t);
                }
            }
        }
    }
    (
        total,
        grad.map(|g| Tensor::from_parts(logits.shape().to_vec(), g)),
    )
}

/// Mean loss of a batch of logits against class labels. For binary
/// cross-entropy, label `1` is the positive class.
pub fn mean_loss(kind: LossKind, logits: &Tensor, labels: &[usize]) -> f64 {
    loss_sum(kind, logits, labels, None).0 / labels.len() as f64
}

pub(crate) fn predict(kind: LossKind, logits: &Tensor) -> Vec<usize> {
    let k = logits.sample_len();
    logits
        .data()
        .chunks(k)
        .map(|z| match kind {
            LossKind::BinaryCrossEntropy => usize::from(z[0] > 0.0),
            LossKind::CrossEntropy => {
                let mut best = 0;
                for (j, &v) in z.iter().enumerate() {
                    if v > z[best] {
                        best = j;
                    }
                }
                best
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_ten_class_predictor_costs_ln10() {
        let logits = Tensor::new(vec![1, 10], vec![0.3; 10]).unwrap();
        assert_abs_diff_eq!(
            mean_loss(LossKind::CrossEntropy, &logits, &[4]),
            10f64.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn sigmoid_half_against_positive_costs_ln2() {
        let logits = Tensor::new(vec![1, 1], vec![0.0]).unwrap();
        assert_abs_diff_eq!(
            mean_loss(LossKind::BinaryCrossEntropy, &logits, &[1]),
            2f64.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn confident_correct_predictions_cost_nothing() {
        let logits = Tensor::new(vec![2, 3], vec![80.0, 0.0, 0.0, 0.0, 0.0, 80.0]).unwrap();
        assert!(mean_loss(LossKind::CrossEntropy, &logits, &[0, 2]) < 1e-9);
        let logits = Tensor::new(vec![2, 1], vec![-80.0, 80.0]).unwrap();
        assert!(mean_loss(LossKind::BinaryCrossEntropy, &logits, &[0, 1]) < 1e-9);
    }

    #[test]
    fn log_is_clamped() {
        let logits = Tensor::new(vec![1, 1], vec![-1e4]).unwrap();
        let l = mean_loss(LossKind::BinaryCrossEntropy, &logits, &[1]);
        assert_abs_diff_eq!(l, -(LOG_CLAMP.ln()), epsilon = 1e-9);
    }
}
