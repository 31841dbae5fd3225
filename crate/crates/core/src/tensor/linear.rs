use super::{Scalar, Tensor};
use crate::error::{dim_err, Result};

#[derive(Clone, Debug)]
pub struct LinearGrads<T = f32> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

fn check<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<(usize, usize, usize)> {
    if input.rank() != 2 || weights.rank() != 2 {
        return dim_err(format!(
            "linear expects rank-2 input and weights, got {:?} and {:?}",
            input.shape(),
            weights.shape()
        ));
    }
    let (n, i) = (input.shape()[0], input.shape()[1]);
    let (o, wi) = (weights.shape()[0], weights.shape()[1]);
    if wi != i {
        return dim_err(format!("linear input width {i} does not match weight input width {wi}"));
    }
    if bias.len() != o {
        return dim_err(format!("linear bias has {} entries for {o} outputs", bias.len()));
    }
    Ok((n, i, o))
}

/// `y = x W^T + b` with `x: N x I`, `W: O x I`, `b: O`.
pub fn linear_forward<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, i, o) = check(input, weights, bias)?;
    let (x, w, b) = (input.data(), weights.data(), bias.data());
    let mut y = Vec::with_capacity(n * o);
    for row in x.chunks(i) {
        for (wr, &bias) in w.chunks(i).zip(b) {
            y.push(row.iter().zip(wr).map(|(&a, &b)| a * b).sum::<T>() + bias);
        }
    }
    Tensor::new(&[n, o], y)
}

pub fn linear_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    upstream: &Tensor<T>,
) -> Result<LinearGrads<T>> {
    let (n, i, o) = check(input, weights, bias)?;
    if upstream.shape() != [n, o] {
        return dim_err(format!("linear upstream shape {:?}, expected [{n}, {o}]", upstream.shape()));
    }
    let (x, w, dy) = (input.data(), weights.data(), upstream.data());
    let mut dx = vec![T::zero(); n * i];
    let mut dw = vec![T::zero(); o * i];
    let mut db = vec![T::zero(); o];
    for r in 0..n {
        let xr = &x[r * i..(r + 1) * i];
        let dxr = &mut dx[r * i..(r + 1) * i];
        for k in 0..o {
            let g = dy[r * o + k];
            db[k] += g;
            let wr = &w[k * i..(k + 1) * i];
            let dwr = &mut dw[k * i..(k + 1) * i];
            for j in 0..i {
                dxr[j] += g * wr[j];
                dwr[j] += g * xr[j];
            }
        }
    }
    Ok(LinearGrads {
        input: Tensor::new(&[n, i], dx)?,
        weights: Tensor::new(&[o, i], dw)?,
        bias: Tensor::new(&[o], db)?,
    })
}
