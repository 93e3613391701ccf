use alloc::format;
use alloc::vec::Vec;

use super::{NnError, Real, Tensor};

/// Row-wise softmax of `N × K` logits.
pub fn softmax<T: Real>(logits: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    if logits.rank() != 2 {
        return Err(NnError::shape("softmax", format!("expected N x K, got {:?}", logits.dims())));
    }
    let k = logits.dim(1);
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.data().chunks_exact(k) {
        let max = row.iter().fold(f64::NEG_INFINITY, |a, v| a.max(v.as_f64()));
        let exps: Vec<f64> = row.iter().map(|v| libm::exp(v.as_f64() - max)).collect();
        let total: f64 = exps.iter().sum();
        out.extend(exps.iter().map(|e| T::from_f64_lossy(e / total)));
    }
    Tensor::from_vec(logits.dims(), out)
}

/// Mean negative log-likelihood over the batch and its gradient
/// `(softmax − onehot) / N`, using log-sum-exp for stability.
pub fn softmax_cross_entropy<T: Real>(logits: &Tensor<T>, labels: &[usize]) -> Result<(f64, Tensor<T>), NnError> {
    if logits.rank() != 2 || logits.dim(0) != labels.len() {
        return Err(NnError::shape(
            "softmax_cross_entropy",
            format!("logits {:?} for {} labels", logits.dims(), labels.len()),
        ));
    }
    let (n, k) = (logits.dim(0), logits.dim(1));
    if let Some(&label) = labels.iter().find(|&&l| l >= k) {
        return Err(NnError::LabelOutOfRange { label, n_classes: k });
    }
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(n * k);
    for (row, &label) in logits.data().chunks_exact(k).zip(labels) {
        let max = row.iter().fold(f64::NEG_INFINITY, |a, v| a.max(v.as_f64()));
        let sum: f64 = row.iter().map(|v| libm::exp(v.as_f64() - max)).sum();
        let log_z = max + libm::log(sum);
        loss += log_z - row[label].as_f64();
        for (j, v) in row.iter().enumerate() {
            let p = libm::exp(v.as_f64() - log_z);
            let target = if j == label { 1.0 } else { 0.0 };
            grad.push(T::from_f64_lossy((p - target) / n as f64));
        }
    }
    Ok((loss / n as f64, Tensor::from_vec(&[n, k], grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn uniform_logits_give_ln_k() {
        let logits = Tensor::filled(&[3, 5], 0.3f64);
        let (loss, _) = softmax_cross_entropy(&logits, &[0, 2, 4]).unwrap();
        assert!((loss - libm::log(5.0)).abs() < 1e-15);
    }

    #[test]
    fn extreme_logits_are_stable() {
        let logits = Tensor::from_vec(&[1, 2], vec![100.0f32, -100.0]).unwrap();
        let (loss, grad) = softmax_cross_entropy(&logits, &[0]).unwrap();
        assert!(loss.is_finite() && loss < 1e-80);
        assert!(grad.is_finite());
        let (loss, _) = softmax_cross_entropy(&logits, &[1]).unwrap();
        assert!((loss - 200.0).abs() < 1e-9);
    }

    #[test]
    fn label_out_of_range() {
        let logits = Tensor::filled(&[1, 2], 0.0f64);
        assert_eq!(
            softmax_cross_entropy(&logits, &[2]),
            Err(NnError::LabelOutOfRange { label: 2, n_classes: 2 })
        );
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let logits = Tensor::from_vec(&[2, 3], vec![1.0f64, 2.0, 3.0, -1.0, 0.0, 1000.0]).unwrap();
        let p = softmax(&logits).unwrap();
        for row in p.data().chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }
}
