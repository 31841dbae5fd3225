//! Central-difference gradient checking in 64-bit arithmetic.
//!
//! Each check builds seeded random operands, contracts the op's output with
//! a random upstream tensor to get a scalar loss, and compares the analytic
//! gradients against central differences. The reported error is
//! `max |analytic - numeric| / max(1, |analytic|)` over every checked value.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    conv_backward, conv_forward, linear_backward, linear_forward, maxpool_backward, maxpool_forward,
    prelu_backward, prelu_forward, softmax_cross_entropy, ConvParams, PReluParams, Tensor,
};

/// Default finite-difference step.
pub const STEP: f64 = 1e-4;

/// Operation under test, with the operand sizes to draw.
#[derive(Clone, Debug)]
pub enum GradCheckOp {
    /// `input` is rank 4 or 5; `kernel` is `[out, in, (kD,) kH, kW]`.
    Conv { input: Vec<usize>, kernel: Vec<usize>, stride: [usize; 3], padding: [usize; 3] },
    MaxPool { input: Vec<usize>, window: [usize; 3], stride: [usize; 3] },
    /// Inputs within `1e-3` of zero are redrawn to stay off the kink.
    PRelu { input: Vec<usize> },
    Linear { batch: usize, inputs: usize, outputs: usize },
    SoftmaxCrossEntropy { batch: usize, classes: usize },
}

/// `|a - n| / max(1, |a|)`, maximised over paired entries.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Central differences of `f` at `x`, one coordinate at a time.
pub fn numeric_gradient(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn with_data(like: &Tensor<f64>, data: &[f64]) -> Tensor<f64> {
    Tensor::new(like.shape(), data.to_vec()).expect("same shape")
}

/// Runs the check for `op` with operands drawn from `seed`.
pub fn grad_check(op: &GradCheckOp, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match op {
        GradCheckOp::Conv { input, kernel, stride, padding } => {
            let x = Tensor::<f64>::randn(input, 1.0, &mut rng);
            let k = Tensor::<f64>::randn(kernel, 0.5, &mut rng);
            let b = Tensor::<f64>::randn(&[kernel[0]], 0.5, &mut rng);
            let p = ConvParams::new(k, b, *stride, *padding).expect("valid conv operands");
            let y = conv_forward(&x, &p).expect("valid conv geometry");
            let r = Tensor::<f64>::randn(y.shape(), 1.0, &mut rng);
            let g = conv_backward(&x, &p, &r).expect("valid upstream");

            let loss_x = |d: &[f64]| dot(&conv_forward(&with_data(&x, d), &p).unwrap(), &r);
            let e_x = max_relative_error(g.input.data(), &numeric_gradient(x.data(), STEP, loss_x));
            let loss_k = |d: &[f64]| {
                let q = ConvParams { kernel: with_data(&p.kernel, d), ..p.clone() };
                dot(&conv_forward(&x, &q).unwrap(), &r)
            };
            let e_k = max_relative_error(g.kernel.data(), &numeric_gradient(p.kernel.data(), STEP, loss_k));
            let loss_b = |d: &[f64]| {
                let q = ConvParams { bias: with_data(&p.bias, d), ..p.clone() };
                dot(&conv_forward(&x, &q).unwrap(), &r)
            };
            let e_b = max_relative_error(g.bias.data(), &numeric_gradient(p.bias.data(), STEP, loss_b));
            e_x.max(e_k).max(e_b)
        }
        GradCheckOp::MaxPool { input, window, stride } => {
            // Distinct, well-separated values keep every window free of ties.
            let len: usize = input.iter().product();
            let mut values: Vec<f64> = (0..len).map(|i| i as f64 * 0.01).collect();
            for i in (1..len).rev() {
                values.swap(i, rng.gen_range(0..=i));
            }
            let x = Tensor::new(input, values).unwrap();
            let pooled = maxpool_forward(&x, *window, *stride).expect("valid pool geometry");
            let r = Tensor::<f64>::randn(pooled.output.shape(), 1.0, &mut rng);
            let dx = maxpool_backward(x.shape(), &pooled.argmax, &r).unwrap();
            let loss = |d: &[f64]| dot(&maxpool_forward(&with_data(&x, d), *window, *stride).unwrap().output, &r);
            max_relative_error(dx.data(), &numeric_gradient(x.data(), STEP, loss))
        }
        GradCheckOp::PRelu { input } => {
            let x = Tensor::<f64>::from_fn(input, |_| loop {
                let v: f64 = rng.gen_range(-2.0..2.0);
                if v.abs() >= 1e-3 {
                    break v;
                }
            });
            let p = PReluParams { a: Tensor::uniform(&[input[1]], 0.05, 0.5, &mut rng) };
            let r = Tensor::<f64>::randn(input, 1.0, &mut rng);
            let g = prelu_backward(&x, &p, &r).unwrap();
            let loss_x = |d: &[f64]| dot(&prelu_forward(&with_data(&x, d), &p).unwrap(), &r);
            let e_x = max_relative_error(g.input.data(), &numeric_gradient(x.data(), STEP, loss_x));
            let loss_a = |d: &[f64]| dot(&prelu_forward(&x, &PReluParams { a: with_data(&p.a, d) }).unwrap(), &r);
            let e_a = max_relative_error(g.a.data(), &numeric_gradient(p.a.data(), STEP, loss_a));
            e_x.max(e_a)
        }
        GradCheckOp::Linear { batch, inputs, outputs } => {
            let x = Tensor::<f64>::randn(&[*batch, *inputs], 1.0, &mut rng);
            let w = Tensor::<f64>::randn(&[*outputs, *inputs], 0.5, &mut rng);
            let b = Tensor::<f64>::randn(&[*outputs], 0.5, &mut rng);
            let r = Tensor::<f64>::randn(&[*batch, *outputs], 1.0, &mut rng);
            let g = linear_backward(&x, &w, &b, &r).unwrap();
            let e_x = max_relative_error(
                g.input.data(),
                &numeric_gradient(x.data(), STEP, |d| dot(&linear_forward(&with_data(&x, d), &w, &b).unwrap(), &r)),
            );
            let e_w = max_relative_error(
                g.weights.data(),
                &numeric_gradient(w.data(), STEP, |d| dot(&linear_forward(&x, &with_data(&w, d), &b).unwrap(), &r)),
            );
            let e_b = max_relative_error(
                g.bias.data(),
                &numeric_gradient(b.data(), STEP, |d| dot(&linear_forward(&x, &w, &with_data(&b, d)).unwrap(), &r)),
            );
            e_x.max(e_w).max(e_b)
        }
        GradCheckOp::SoftmaxCrossEntropy { batch, classes } => {
            let logits = Tensor::<f64>::randn(&[*batch, *classes], 2.0, &mut rng);
            let labels: Vec<usize> = (0..*batch).map(|_| rng.gen_range(0..*classes)).collect();
            let (_, g) = softmax_cross_entropy(&logits, &labels).unwrap();
            let loss = |d: &[f64]| softmax_cross_entropy(&with_data(&logits, d), &labels).unwrap().0;
            max_relative_error(g.data(), &numeric_gradient(logits.data(), STEP, loss))
        }
    }
}
