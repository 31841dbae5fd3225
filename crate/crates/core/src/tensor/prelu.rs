use super::{Scalar, Tensor};
use crate::error::{dim_err, Result};

/// Default negative-branch slope for freshly built layers.
pub const PRELU_INIT: f64 = 0.25;

/// Learnable negative slopes, one per channel (axis 1 of the activation).
#[derive(Clone, Debug, PartialEq)]
pub struct PReluParams<T = f32> {
    pub a: Tensor<T>,
}

impl<T: Scalar> PReluParams<T> {
    pub fn new(channels: usize) -> Self {
        PReluParams { a: Tensor::full(&[channels], T::from_f64_lossy(PRELU_INIT)) }
    }

    pub fn with_slope(channels: usize, slope: T) -> Self {
        PReluParams { a: Tensor::full(&[channels], slope) }
    }

    pub fn channels(&self) -> usize {
        self.a.len()
    }
}

#[derive(Clone, Debug)]
pub struct PReluGrads<T = f32> {
    pub input: Tensor<T>,
    pub a: Tensor<T>,
}

fn layout<T: Scalar>(input: &Tensor<T>, params: &PReluParams<T>) -> Result<(usize, usize, usize)> {
    if input.rank() < 2 {
        return dim_err(format!("prelu input needs a channel axis, got shape {:?}", input.shape()));
    }
    let (n, c) = (input.shape()[0], input.shape()[1]);
    if c != params.channels() {
        return dim_err(format!("prelu input has {c} channels, slopes cover {}", params.channels()));
    }
    Ok((n, c, input.len() / (n * c)))
}

/// `f(y) = y` for `y > 0`, `a_c * y` otherwise.
pub fn prelu_forward<T: Scalar>(input: &Tensor<T>, params: &PReluParams<T>) -> Result<Tensor<T>> {
    let (n, c, inner) = layout(input, params)?;
    let a = params.a.data();
    let mut out = input.clone();
    out.clear_grad();
    for (i, chunk) in out.data_mut().chunks_mut(inner).enumerate() {
        let slope = a[i % c];
        for v in chunk.iter_mut().filter(|v| **v <= T::zero()) {
            *v *= slope;
        }
    }
    debug_assert_eq!(out.len(), n * c * inner);
    Ok(out)
}

/// Input gradient and per-channel slope gradient (`sum(dy * y)` over `y <= 0`).
pub fn prelu_backward<T: Scalar>(input: &Tensor<T>, params: &PReluParams<T>, upstream: &Tensor<T>) -> Result<PReluGrads<T>> {
    let (_, c, inner) = layout(input, params)?;
    if upstream.shape() != input.shape() {
        return dim_err(format!(
            "prelu upstream shape {:?} differs from input {:?}",
            upstream.shape(),
            input.shape()
        ));
    }
    let a = params.a.data();
    let mut dx = vec![T::zero(); input.len()];
    let mut da = vec![T::zero(); c];
    for (i, ((x, dy), g)) in input
        .data()
        .chunks(inner)
        .zip(upstream.data().chunks(inner))
        .zip(dx.chunks_mut(inner))
        .enumerate()
    {
        let ch = i % c;
        for ((&y, &d), gi) in x.iter().zip(dy).zip(g.iter_mut()) {
            if y > T::zero() {
                *gi = d;
            } else {
                *gi = d * a[ch];
                da[ch] += d * y;
            }
        }
    }
    Ok(PReluGrads { input: Tensor::new(input.shape(), dx)?, a: Tensor::new(&[c], da)? })
}
