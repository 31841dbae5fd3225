use super::{as_5d, Scalar, Tensor};
use crate::error::{dim_err, Result};

fn reshaped(rank: usize, n: usize, c: usize, s: [usize; 3]) -> Vec<usize> {
    if rank == 4 {
        vec![n, c, s[1], s[2]]
    } else {
        vec![n, c, s[0], s[1], s[2]]
    }
}

/// Nearest-neighbour upsampling by an integer factor per `[depth, height, width]`.
pub fn upsample_nearest<T: Scalar>(input: &Tensor<T>, factor: [usize; 3]) -> Result<Tensor<T>> {
    let [n, c, d, h, w] = as_5d(input.shape(), "upsample input")?;
    if factor.iter().any(|&f| f == 0) || (input.rank() == 4 && factor[0] != 1) {
        return dim_err(format!("invalid upsample factor {factor:?} for shape {:?}", input.shape()));
    }
    let out = [d * factor[0], h * factor[1], w * factor[2]];
    let x = input.data();
    let mut y = Vec::with_capacity(n * c * out.iter().product::<usize>());
    for nc in 0..n * c {
        for od in 0..out[0] {
            for oh in 0..out[1] {
                let row = ((nc * d + od / factor[0]) * h + oh / factor[1]) * w;
                y.extend((0..out[2]).map(|ow| x[row + ow / factor[2]]));
            }
        }
    }
    Tensor::new(&reshaped(input.rank(), n, c, out), y)
}

/// Adjoint of [`upsample_nearest`]: sums each upsampled block.
pub fn upsample_nearest_backward<T: Scalar>(
    input_shape: &[usize],
    factor: [usize; 3],
    upstream: &Tensor<T>,
) -> Result<Tensor<T>> {
    let [n, c, d, h, w] = as_5d(input_shape, "upsample input")?;
    let out = [d * factor[0], h * factor[1], w * factor[2]];
    if upstream.len() != n * c * out.iter().product::<usize>() {
        return dim_err(format!(
            "upsample upstream {:?} does not match input {input_shape:?} x {factor:?}",
            upstream.shape()
        ));
    }
    let mut dx = Tensor::zeros(input_shape);
    let g = dx.data_mut();
    let dy = upstream.data();
    let mut i = 0;
    for nc in 0..n * c {
        for od in 0..out[0] {
            for oh in 0..out[1] {
                let row = ((nc * d + od / factor[0]) * h + oh / factor[1]) * w;
                for ow in 0..out[2] {
                    g[row + ow / factor[2]] += dy[i];
                    i += 1;
                }
            }
        }
    }
    Ok(dx)
}

/// Concatenates two activations along the channel axis.
pub fn concat_channels<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let sa = as_5d(a.shape(), "concat lhs")?;
    let sb = as_5d(b.shape(), "concat rhs")?;
    if a.rank() != b.rank() || sa[0] != sb[0] || sa[2..] != sb[2..] {
        return dim_err(format!("cannot concatenate {:?} and {:?} along channels", a.shape(), b.shape()));
    }
    let inner: usize = sa[2..].iter().product();
    let (la, lb) = (sa[1] * inner, sb[1] * inner);
    let mut data = Vec::with_capacity(a.len() + b.len());
    for n in 0..sa[0] {
        data.extend_from_slice(&a.data()[n * la..(n + 1) * la]);
        data.extend_from_slice(&b.data()[n * lb..(n + 1) * lb]);
    }
    let mut shape = a.shape().to_vec();
    shape[1] = sa[1] + sb[1];
    Tensor::new(&shape, data)
}

/// Splits a channel-concatenated tensor back into its first `channels` and the rest.
pub fn split_channels<T: Scalar>(t: &Tensor<T>, channels: usize) -> Result<(Tensor<T>, Tensor<T>)> {
    let s = as_5d(t.shape(), "split input")?;
    if channels == 0 || channels >= s[1] {
        return dim_err(format!("cannot split {} channels at {channels}", s[1]));
    }
    let inner: usize = s[2..].iter().product();
    let (la, lb) = (channels * inner, (s[1] - channels) * inner);
    let mut a = Vec::with_capacity(s[0] * la);
    let mut b = Vec::with_capacity(s[0] * lb);
    for chunk in t.data().chunks(la + lb) {
        a.extend_from_slice(&chunk[..la]);
        b.extend_from_slice(&chunk[la..]);
    }
    let mut sa = t.shape().to_vec();
    sa[1] = channels;
    let mut sb = t.shape().to_vec();
    sb[1] = s[1] - channels;
    Ok((Tensor::new(&sa, a)?, Tensor::new(&sb, b)?))
}
