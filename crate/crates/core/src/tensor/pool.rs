use super::{as_5d, Scalar, Tensor};
use crate::error::{dim_err, Result};

/// Pooled values plus, for every output cell, the flat input index that won.
#[derive(Clone, Debug)]
pub struct PoolOutput<T = f32> {
    pub output: Tensor<T>,
    pub argmax: Vec<usize>,
}

/// Max pooling over `[depth, height, width]` windows. Ties go to the first
/// (lowest flat index) element of the window.
pub fn maxpool_forward<T: Scalar>(input: &Tensor<T>, window: [usize; 3], stride: [usize; 3]) -> Result<PoolOutput<T>> {
    let [n, c, d, h, w] = as_5d(input.shape(), "maxpool input")?;
    if input.rank() == 4 && window[0] != 1 {
        return dim_err("2-D max pooling needs a depth window of 1");
    }
    if window.iter().chain(&stride).any(|&v| v == 0) {
        return dim_err(format!("pool window {window:?} and stride {stride:?} must be positive"));
    }
    let inp = [d, h, w];
    let mut out = [0; 3];
    for axis in 0..3 {
        if window[axis] > inp[axis] {
            return dim_err(format!(
                "pool window {window:?} is larger than input extents {inp:?} on axis {axis}"
            ));
        }
        out[axis] = (inp[axis] - window[axis]) / stride[axis] + 1;
    }
    let x = input.data();
    let plane = d * h * w;
    let out_plane: usize = out.iter().product();
    let mut values = Vec::with_capacity(n * c * out_plane);
    let mut argmax = Vec::with_capacity(n * c * out_plane);
    for nc in 0..n * c {
        let base = nc * plane;
        for od in 0..out[0] {
            for oh in 0..out[1] {
                for ow in 0..out[2] {
                    let mut best = base + ((od * stride[0]) * h + oh * stride[1]) * w + ow * stride[2];
                    let mut best_val = x[best];
                    for a in 0..window[0] {
                        for b in 0..window[1] {
                            let row = base + ((od * stride[0] + a) * h + oh * stride[1] + b) * w + ow * stride[2];
                            for (cc, &v) in x[row..row + window[2]].iter().enumerate() {
                                if v > best_val {
                                    best_val = v;
                                    best = row + cc;
                                }
                            }
                        }
                    }
                    values.push(best_val);
                    argmax.push(best);
                }
            }
        }
    }
    let shape = if input.rank() == 4 { vec![n, c, out[1], out[2]] } else { vec![n, c, out[0], out[1], out[2]] };
    Ok(PoolOutput { output: Tensor::new(&shape, values)?, argmax })
}

/// Routes the upstream gradient back to the recorded argmax positions.
pub fn maxpool_backward<T: Scalar>(input_shape: &[usize], argmax: &[usize], upstream: &Tensor<T>) -> Result<Tensor<T>> {
    if upstream.len() != argmax.len() {
        return dim_err(format!(
            "pool upstream has {} values but the argmax map has {}",
            upstream.len(),
            argmax.len()
        ));
    }
    let mut dx = Tensor::zeros(input_shape);
    let g = dx.data_mut();
    for (&idx, &dy) in argmax.iter().zip(upstream.data()) {
        g[idx] += dy;
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_input_pools_to_constant() {
        let x = Tensor::<f32>::full(&[2, 3, 4, 6, 6], 0.75);
        let p = maxpool_forward(&x, [2, 2, 2], [2, 2, 2]).unwrap();
        assert_eq!(p.output.shape(), &[2, 3, 2, 3, 3]);
        assert!(p.output.data().iter().all(|&v| v == 0.75));
    }

    #[test]
    fn two_by_two_picks_maximum() {
        let x = Tensor::<f32>::new(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let p = maxpool_forward(&x, [1, 2, 2], [1, 2, 2]).unwrap();
        assert_eq!(p.output.data(), &[4.0]);
        assert_eq!(p.argmax, vec![3]);
    }

    #[test]
    fn ties_go_to_first_occurrence() {
        let x = Tensor::<f32>::new(&[1, 1, 2, 2], vec![5.0, 5.0, 5.0, 5.0]).unwrap();
        assert_eq!(maxpool_forward(&x, [1, 2, 2], [1, 2, 2]).unwrap().argmax, vec![0]);
    }

    #[test]
    fn oversized_window_is_rejected() {
        let x = Tensor::<f32>::zeros(&[1, 1, 3, 3]);
        assert!(maxpool_forward(&x, [1, 4, 2], [1, 1, 1]).is_err());
    }

    #[test]
    fn backward_routes_to_winners() {
        let x = Tensor::<f64>::new(&[1, 1, 2, 4], vec![1.0, 9.0, 3.0, 2.0, 0.0, 4.0, 8.0, 7.0]).unwrap();
        let p = maxpool_forward(&x, [1, 2, 2], [1, 2, 2]).unwrap();
        let dy = Tensor::new(&[1, 1, 1, 2], vec![10.0, 20.0]).unwrap();
        let dx = maxpool_backward(x.shape(), &p.argmax, &dy).unwrap();
        assert_eq!(dx.data(), &[0.0, 10.0, 0.0, 0.0, 0.0, 0.0, 20.0, 0.0]);
    }
}
