use super::{Scalar, Tensor};
use crate::error::{dim_err, Error, Result};

/// Row-wise softmax of a `batch x classes` tensor, max-subtracted.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    if logits.rank() != 2 {
        return dim_err(format!("softmax expects batch x classes, got {:?}", logits.shape()));
    }
    let k = logits.shape()[1];
    let mut out = logits.data().to_vec();
    for row in out.chunks_mut(k) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v = *v / sum);
    }
    Tensor::new(logits.shape(), out)
}

/// Mean negative log-likelihood of `labels` under the row softmax, and its
/// gradient `(softmax - onehot) / batch`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>)> {
    if logits.rank() != 2 {
        return dim_err(format!("cross entropy expects batch x classes, got {:?}", logits.shape()));
    }
    let (n, k) = (logits.shape()[0], logits.shape()[1]);
    if labels.len() != n {
        return dim_err(format!("{} labels for a batch of {n}", labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::Index(format!("label {bad} outside [0, {k})")));
    }
    let inv_n = T::one() / T::from_usize(n).unwrap();
    let mut grad = Vec::with_capacity(n * k);
    let mut loss = T::zero();
    for (row, &label) in logits.data().chunks(k).zip(labels) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let sum: T = row.iter().map(|&v| (v - max).exp()).sum();
        let log_sum = sum.ln();
        loss += log_sum - (row[label] - max);
        for (j, &v) in row.iter().enumerate() {
            let p = (v - max).exp() / sum;
            let onehot = if j == label { T::one() } else { T::zero() };
            grad.push((p - onehot) * inv_n);
        }
    }
    Ok((loss * inv_n, Tensor::new(&[n, k], grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_classes() {
        let logits = Tensor::<f64>::full(&[1, 10], 0.3);
        for label in [0, 4, 9] {
            let (loss, _) = softmax_cross_entropy(&logits, &[label]).unwrap();
            assert!((loss - 10f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_true_class() {
        let mut logits = Tensor::<f64>::zeros(&[1, 5]);
        logits.data_mut()[2] = 1000.0;
        let (loss, _) = softmax_cross_entropy(&logits, &[2]).unwrap();
        assert!(loss < 1e-6);
    }

    #[test]
    fn label_out_of_range() {
        let logits = Tensor::<f32>::zeros(&[2, 3]);
        assert!(matches!(softmax_cross_entropy(&logits, &[0, 3]), Err(Error::Index(_))));
    }

    #[test]
    fn rows_sum_to_one() {
        let logits = Tensor::<f64>::from_fn(&[4, 7], |i| (i as f64 * 1.7).sin() * 30.0);
        let p = softmax(&logits).unwrap();
        for row in p.data().chunks(7) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
