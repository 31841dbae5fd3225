use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Network, NetworkSpec};
use crate::error::Result;
use crate::tensor::gradcheck::max_relative_error;
use crate::tensor::{softmax_cross_entropy, Tensor};

/// Finite-difference step for whole-network checks. Kept small so a step
/// rarely straddles a PReLU kink or flips a pooling winner somewhere in the
/// ~10^5 downstream activations; rounding error stays far below 1e-4 in f64.
pub const NETWORK_STEP: f64 = 1e-7;

/// End-to-end gradient check of a freshly initialized network in 64-bit
/// arithmetic: cross-entropy over a random batch of two, with up to
/// `per_tensor` randomly chosen coordinates of every parameter tensor and of
/// the input compared against central differences. Returns the largest
/// relative error (see [`max_relative_error`]).
pub fn network_grad_check(spec: &NetworkSpec, seed: u64, per_tensor: usize) -> Result<f64> {
    let mut net = Network::<f64>::new(spec, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    // Perturb biases and slopes off their initial constants so every path
    // carries a distinct gradient.
    for p in net.params_mut() {
        if p.rank() == 1 {
            p.data_mut().iter_mut().for_each(|v| *v += rng.gen_range(-0.1..0.1));
        }
    }
    let x = Tensor::<f64>::uniform(&spec.batch_shape(2), -1.0, 1.0, &mut rng);
    let labels: Vec<usize> = (0..2).map(|_| rng.gen_range(0..spec.num_classes)).collect();

    let (logits, trace) = net.forward_trace(&x)?;
    let (_, dlogits) = softmax_cross_entropy(&logits, &labels)?;
    net.zero_grads();
    let dx = net.backward(&trace, &dlogits)?;

    let loss = |n: &Network<f64>, x: &Tensor<f64>| -> f64 {
        let l = n.forward(x).expect("shapes fixed by the spec");
        softmax_cross_entropy(&l, &labels).expect("labels in range").0
    };

    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    let count = net.params().len();
    for t in 0..count {
        let len = net.params()[t].1.len();
        let picks = sample(&mut rng, len, per_tensor.min(len));
        for i in picks {
            analytic.push(net.params()[t].1.grad().expect("backward filled every slot")[i]);
            let orig = net.params()[t].1.data()[i];
            net.params_mut()[t].data_mut()[i] = orig + NETWORK_STEP;
            let up = loss(&net, &x);
            net.params_mut()[t].data_mut()[i] = orig - NETWORK_STEP;
            let down = loss(&net, &x);
            net.params_mut()[t].data_mut()[i] = orig;
            numeric.push((up - down) / (2.0 * NETWORK_STEP));
        }
    }
    let mut probe = x.clone();
    for i in sample(&mut rng, x.len(), per_tensor.min(x.len())) {
        analytic.push(dx.data()[i]);
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + NETWORK_STEP;
        let up = loss(&net, &probe);
        probe.data_mut()[i] = orig - NETWORK_STEP;
        let down = loss(&net, &probe);
        probe.data_mut()[i] = orig;
        numeric.push((up - down) / (2.0 * NETWORK_STEP));
    }
    Ok(max_relative_error(&analytic, &numeric))
}

/// The small spec used for whole-network gradient checks.
pub fn tiny_spec(skip_connections: bool) -> NetworkSpec {
    NetworkSpec {
        frames: 8,
        height: 16,
        width: 16,
        encoder_channels: [2, 4],
        head_channels: [4, 4, 4],
        fc_hidden: 8,
        num_classes: 3,
        skip_connections,
        ..NetworkSpec::default()
    }
}
