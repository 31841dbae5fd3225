use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::spec::{Mode, NetworkSpec};
use crate::error::{Error, Result};
use crate::tensor::{
    concat_channels, conv_backward, conv_forward, linear_backward, linear_forward, maxpool_backward,
    maxpool_forward, prelu_backward, prelu_forward, split_channels, upsample_nearest, upsample_nearest_backward,
    ConvParams, PReluParams, Scalar, Tensor,
};

/// Conv layers in forward order. The decoder stages read skips from
/// `ENC1B` and `ENC2B`.
const UNIT_NAMES: [&str; 13] = [
    "enc1a", "enc1b", "enc2a", "enc2b", "dec2", "dec1", "mix", "head1a", "head1b", "head2a", "head2b", "head3a",
    "head3b",
];
const ENC1A: usize = 0;
const ENC2A: usize = 2;
const DEC2: usize = 4;
const DEC1: usize = 5;
const MIX: usize = 6;
const HEAD: usize = 7;

/// A convolution followed by a PReLU.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvUnit<T: Scalar = f32> {
    pub conv: ConvParams<T>,
    pub act: PReluParams<T>,
}

#[derive(Clone, Debug)]
struct UnitCache<T> {
    input: Tensor<T>,
    pre: Tensor<T>,
}

#[derive(Clone, Debug)]
struct PoolCache {
    input_shape: Vec<usize>,
    argmax: Vec<usize>,
}

/// Intermediate values recorded by [`Network::forward_trace`] for backprop.
#[derive(Clone, Debug)]
pub struct Trace<T> {
    units: Vec<UnitCache<T>>,
    pools: Vec<PoolCache>,
    up_shapes: [Vec<usize>; 2],
    head_shape: Vec<usize>,
    fc1_in: Tensor<T>,
    fc1_pre: Tensor<T>,
    fc2_in: Tensor<T>,
}

/// The encoder-decoder feature extractor and convolutional classifier head.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T: Scalar = f32> {
    spec: NetworkSpec,
    units: Vec<ConvUnit<T>>,
    fc1_w: Tensor<T>,
    fc1_b: Tensor<T>,
    fc_act: PReluParams<T>,
    fc2_w: Tensor<T>,
    fc2_b: Tensor<T>,
}

fn in_layer<V>(layer: &str, r: Result<V>) -> Result<V> {
    r.map_err(|e| match e {
        Error::Dimension(m) => Error::Dimension(format!("layer {layer}: {m}")),
        other => other,
    })
}

/// `(in, out)` channels of every conv unit, in forward order.
fn unit_channels(spec: &NetworkSpec) -> Vec<(usize, usize)> {
    let [e1, e2] = spec.encoder_channels;
    let [h1, h2, h3] = spec.head_channels;
    vec![
        (spec.in_channels, e1),
        (e1, e1),
        (e1, e2),
        (e2, e2),
        (e2 + e2, e2),
        (e2 + e1, e1),
        (e1, e1),
        (e1, h1),
        (h1, h1),
        (h1, h2),
        (h2, h2),
        (h2, h3),
        (h3, h3),
    ]
}

fn kernel_shape(spec: &NetworkSpec, cin: usize, cout: usize) -> Vec<usize> {
    let k = spec.kernel;
    match spec.mode {
        Mode::ThreeD => vec![cout, cin, k, k, k],
        Mode::TwoD => vec![cout, cin, k, k],
    }
}

fn padding(spec: &NetworkSpec) -> [usize; 3] {
    let p = spec.kernel / 2;
    match spec.mode {
        Mode::ThreeD => [p, p, p],
        Mode::TwoD => [0, p, p],
    }
}

/// Number of trainable values, counted layer by layer from the spec.
pub fn parameter_count(spec: &NetworkSpec) -> usize {
    let taps = match spec.mode {
        Mode::ThreeD => spec.kernel.pow(3),
        Mode::TwoD => spec.kernel.pow(2),
    };
    let convs: usize = unit_channels(spec).iter().map(|&(i, o)| o * i * taps + 2 * o).sum();
    let fc1 = spec.fc_hidden * spec.flat_features() + 2 * spec.fc_hidden;
    let fc2 = spec.num_classes * spec.fc_hidden + spec.num_classes;
    convs + fc1 + fc2
}

impl<T: Scalar> Network<T> {
    /// Allocates parameters with He-normal weights (`std = sqrt(2 / fan_in)`),
    /// zero biases and PReLU slopes of 0.25, drawn from `seed`.
    pub fn new(spec: &NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let he = |fan_in: usize| (2.0 / fan_in as f64).sqrt();
        let mut units = Vec::with_capacity(UNIT_NAMES.len());
        for (cin, cout) in unit_channels(spec) {
            let shape = kernel_shape(spec, cin, cout);
            let fan_in: usize = shape[1..].iter().product();
            let kernel = Tensor::randn(&shape, he(fan_in), &mut rng);
            let conv = ConvParams::new(kernel, Tensor::zeros(&[cout]), [1, 1, 1], padding(spec))?;
            units.push(ConvUnit { conv, act: PReluParams::new(cout) });
        }
        let flat = spec.flat_features();
        Ok(Network {
            spec: spec.clone(),
            units,
            fc1_w: Tensor::randn(&[spec.fc_hidden, flat], he(flat), &mut rng),
            fc1_b: Tensor::zeros(&[spec.fc_hidden]),
            fc_act: PReluParams::new(spec.fc_hidden),
            fc2_w: Tensor::randn(&[spec.num_classes, spec.fc_hidden], he(spec.fc_hidden), &mut rng),
            fc2_b: Tensor::zeros(&[spec.num_classes]),
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    /// Conv units in forward order, paired with their layer names.
    pub fn units(&self) -> impl Iterator<Item = (&'static str, &ConvUnit<T>)> {
        UNIT_NAMES.iter().copied().zip(&self.units)
    }

    /// Named parameters in a fixed order shared with [`Network::params_mut`].
    pub fn params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::with_capacity(3 * self.units.len() + 5);
        for (name, u) in self.units() {
            out.push((format!("{name}.weight"), &u.conv.kernel));
            out.push((format!("{name}.bias"), &u.conv.bias));
            out.push((format!("{name}.prelu"), &u.act.a));
        }
        out.push(("fc1.weight".into(), &self.fc1_w));
        out.push(("fc1.bias".into(), &self.fc1_b));
        out.push(("fc1.prelu".into(), &self.fc_act.a));
        out.push(("fc2.weight".into(), &self.fc2_w));
        out.push(("fc2.bias".into(), &self.fc2_b));
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::with_capacity(3 * self.units.len() + 5);
        for u in &mut self.units {
            out.push(&mut u.conv.kernel);
            out.push(&mut u.conv.bias);
            out.push(&mut u.act.a);
        }
        out.push(&mut self.fc1_w);
        out.push(&mut self.fc1_b);
        out.push(&mut self.fc_act.a);
        out.push(&mut self.fc2_w);
        out.push(&mut self.fc2_b);
        out
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }

    /// Replaces every parameter value; `values` follows [`Network::params`] order.
    pub fn set_params(&mut self, values: Vec<Tensor<T>>) -> Result<()> {
        let mut slots = self.params_mut();
        if values.len() != slots.len() {
            return Err(Error::Dimension(format!("expected {} parameter tensors, got {}", slots.len(), values.len())));
        }
        for (i, v) in values.iter().enumerate() {
            if v.shape() != slots[i].shape() {
                return Err(Error::Dimension(format!(
                    "parameter {i}: shape {:?} does not match {:?}",
                    v.shape(),
                    slots[i].shape()
                )));
            }
        }
        for (slot, v) in slots.iter_mut().zip(values) {
            **slot = v;
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Same network in another float type.
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            spec: self.spec.clone(),
            units: self
                .units
                .iter()
                .map(|u| ConvUnit {
                    conv: ConvParams {
                        kernel: u.conv.kernel.cast(),
                        bias: u.conv.bias.cast(),
                        stride: u.conv.stride,
                        padding: u.conv.padding,
                    },
                    act: PReluParams { a: u.act.a.cast() },
                })
                .collect(),
            fc1_w: self.fc1_w.cast(),
            fc1_b: self.fc1_b.cast(),
            fc_act: PReluParams { a: self.fc_act.a.cast() },
            fc2_w: self.fc2_w.cast(),
            fc2_b: self.fc2_b.cast(),
        }
    }

    /// Copy of this network with the skip connections switched on or off.
    pub fn with_skips(&self, enabled: bool) -> Self {
        let mut n = self.clone();
        n.spec.skip_connections = enabled;
        n
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let want = &self.spec.sample_shape();
        if x.rank() != want.len() + 1 || &x.shape()[1..] != want.as_slice() {
            return Err(Error::Dimension(format!(
                "layer input: batch shape {:?} does not match the network input N x {want:?}",
                x.shape()
            )));
        }
        Ok(())
    }

    fn unit_forward(&self, i: usize, x: Tensor<T>, trace: &mut Vec<UnitCache<T>>) -> Result<Tensor<T>> {
        let u = &self.units[i];
        let pre = in_layer(UNIT_NAMES[i], conv_forward(&x, &u.conv))?;
        let y = in_layer(UNIT_NAMES[i], prelu_forward(&pre, &u.act))?;
        trace.push(UnitCache { input: x, pre });
        Ok(y)
    }

    fn unit_backward(&mut self, i: usize, cache: &UnitCache<T>, upstream: &Tensor<T>) -> Result<Tensor<T>> {
        let u = &mut self.units[i];
        let g = in_layer(UNIT_NAMES[i], prelu_backward(&cache.pre, &u.act, upstream))?;
        u.act.a.accumulate_grad(g.a.data());
        let c = in_layer(UNIT_NAMES[i], conv_backward(&cache.input, &u.conv, &g.input))?;
        u.conv.kernel.accumulate_grad(c.kernel.data());
        u.conv.bias.accumulate_grad(c.bias.data());
        Ok(c.input)
    }

    fn pool(&self, layer: &str, x: &Tensor<T>, pools: &mut Vec<PoolCache>) -> Result<Tensor<T>> {
        let f = self.spec.pool_factor();
        let out = in_layer(layer, maxpool_forward(x, f, f))?;
        pools.push(PoolCache { input_shape: x.shape().to_vec(), argmax: out.argmax });
        Ok(out.output)
    }

    fn skip(&self, s: &Tensor<T>) -> Tensor<T> {
        if self.spec.skip_connections {
            s.clone()
        } else {
            Tensor::zeros(s.shape())
        }
    }

    /// Logits for a batch, keeping everything needed by [`Network::backward`].
    pub fn forward_trace(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Trace<T>)> {
        self.check_input(x)?;
        let f = self.spec.pool_factor();
        let mut units = Vec::with_capacity(self.units.len());
        let mut pools = Vec::with_capacity(5);

        let h = self.unit_forward(ENC1A, x.clone(), &mut units)?;
        let s1 = self.unit_forward(ENC1A + 1, h, &mut units)?;
        let p1 = self.pool("pool1", &s1, &mut pools)?;
        let h = self.unit_forward(ENC2A, p1, &mut units)?;
        let s2 = self.unit_forward(ENC2A + 1, h, &mut units)?;
        let p2 = self.pool("pool2", &s2, &mut pools)?;

        let up2 = in_layer("up2", upsample_nearest(&p2, f))?;
        let c2 = in_layer("dec2", concat_channels(&up2, &self.skip(&s2)))?;
        let d2 = self.unit_forward(DEC2, c2, &mut units)?;
        let up1 = in_layer("up1", upsample_nearest(&d2, f))?;
        let c1 = in_layer("dec1", concat_channels(&up1, &self.skip(&s1)))?;
        let d1 = self.unit_forward(DEC1, c1, &mut units)?;
        let up_shapes = [p2.shape().to_vec(), d2.shape().to_vec()];

        let mut h = self.unit_forward(MIX, d1, &mut units)?;
        for stage in 0..3 {
            h = self.unit_forward(HEAD + 2 * stage, h, &mut units)?;
            h = self.unit_forward(HEAD + 2 * stage + 1, h, &mut units)?;
            h = self.pool(["head1.pool", "head2.pool", "head3.pool"][stage], &h, &mut pools)?;
        }
        let head_shape = h.shape().to_vec();
        let n = head_shape[0];
        let fc1_in = in_layer("flatten", h.reshape(&[n, self.spec.flat_features()]))?;
        let fc1_pre = in_layer("fc1", linear_forward(&fc1_in, &self.fc1_w, &self.fc1_b))?;
        let fc2_in = in_layer("fc1", prelu_forward(&fc1_pre, &self.fc_act))?;
        let logits = in_layer("fc2", linear_forward(&fc2_in, &self.fc2_w, &self.fc2_b))?;
        Ok((logits, Trace { units, pools, up_shapes, head_shape, fc1_in, fc1_pre, fc2_in }))
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward_trace(x)?.0)
    }

    /// Accumulates parameter gradients for `dlogits` into each parameter's
    /// gradient slot and returns the gradient with respect to the input.
    pub fn backward(&mut self, trace: &Trace<T>, dlogits: &Tensor<T>) -> Result<Tensor<T>> {
        let f = self.spec.pool_factor();
        let g2 = in_layer("fc2", linear_backward(&trace.fc2_in, &self.fc2_w, &self.fc2_b, dlogits))?;
        self.fc2_w.accumulate_grad(g2.weights.data());
        self.fc2_b.accumulate_grad(g2.bias.data());
        let ga = in_layer("fc1", prelu_backward(&trace.fc1_pre, &self.fc_act, &g2.input))?;
        self.fc_act.a.accumulate_grad(ga.a.data());
        let g1 = in_layer("fc1", linear_backward(&trace.fc1_in, &self.fc1_w, &self.fc1_b, &ga.input))?;
        self.fc1_w.accumulate_grad(g1.weights.data());
        self.fc1_b.accumulate_grad(g1.bias.data());

        let mut g = in_layer("flatten", g1.input.reshape(&trace.head_shape))?;
        for stage in (0..3).rev() {
            let pc = &trace.pools[2 + stage];
            g = in_layer("head.pool", maxpool_backward(&pc.input_shape, &pc.argmax, &g))?;
            for j in [1, 0] {
                let i = HEAD + 2 * stage + j;
                g = self.unit_backward(i, &trace.units[i], &g)?;
            }
        }
        g = self.unit_backward(MIX, &trace.units[MIX], &g)?;

        let [e1, e2] = self.spec.encoder_channels;
        g = self.unit_backward(DEC1, &trace.units[DEC1], &g)?;
        let (g_up1, g_s1) = in_layer("dec1", split_channels(&g, e2))?;
        debug_assert_eq!(g_s1.shape()[1], e1);
        g = in_layer("up1", upsample_nearest_backward(&trace.up_shapes[1], f, &g_up1))?;
        g = self.unit_backward(DEC2, &trace.units[DEC2], &g)?;
        let (g_up2, g_s2) = in_layer("dec2", split_channels(&g, e2))?;
        let g_p2 = in_layer("up2", upsample_nearest_backward(&trace.up_shapes[0], f, &g_up2))?;

        let pc = &trace.pools[1];
        let mut g = in_layer("pool2", maxpool_backward(&pc.input_shape, &pc.argmax, &g_p2))?;
        if self.spec.skip_connections {
            add_into(&mut g, &g_s2);
        }
        g = self.unit_backward(ENC2A + 1, &trace.units[ENC2A + 1], &g)?;
        g = self.unit_backward(ENC2A, &trace.units[ENC2A], &g)?;
        let pc = &trace.pools[0];
        let mut g = in_layer("pool1", maxpool_backward(&pc.input_shape, &pc.argmax, &g))?;
        if self.spec.skip_connections {
            add_into(&mut g, &g_s1);
        }
        g = self.unit_backward(ENC1A + 1, &trace.units[ENC1A + 1], &g)?;
        self.unit_backward(ENC1A, &trace.units[ENC1A], &g)
    }

    /// Euclidean norm of every parameter, for divergence diagnostics.
    pub fn layer_norms(&self) -> Vec<(String, f64)> {
        self.params().into_iter().map(|(n, t)| (n, t.norm())).collect()
    }
}

fn add_into<T: Scalar>(dst: &mut Tensor<T>, src: &Tensor<T>) {
    for (d, &s) in dst.data_mut().iter_mut().zip(src.data()) {
        *d += s;
    }
}
