use super::{as_5d, gemm, Scalar, Tensor, View};
use crate::error::{dim_err, Result};

/// Upper bound on the number of lowered-column elements held at once.
const COLUMN_BUDGET: usize = 1 << 20;

/// Weights and geometry of a 2-D or 3-D convolution.
///
/// The kernel is `O x I x kD x kH x kW` for 3-D or `O x I x kH x kW` for 2-D.
/// `stride` and `padding` are always given as `[depth, height, width]`; the
/// depth entries must be `1` and `0` for 2-D kernels.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams<T = f32> {
    pub kernel: Tensor<T>,
    pub bias: Tensor<T>,
    pub stride: [usize; 3],
    pub padding: [usize; 3],
}

impl<T: Scalar> ConvParams<T> {
    pub fn new(kernel: Tensor<T>, bias: Tensor<T>, stride: [usize; 3], padding: [usize; 3]) -> Result<Self> {
        let k = as_5d(kernel.shape(), "conv kernel")?;
        if bias.rank() != 1 || bias.len() != k[0] {
            return dim_err(format!(
                "conv bias has shape {:?} but kernel has {} output channels",
                bias.shape(),
                k[0]
            ));
        }
        if stride.iter().any(|&s| s == 0) {
            return dim_err(format!("conv stride must be positive, got {stride:?}"));
        }
        if kernel.rank() == 4 && (stride[0] != 1 || padding[0] != 0) {
            return dim_err("2-D conv kernels take depth stride 1 and depth padding 0");
        }
        Ok(ConvParams { kernel, bias, stride, padding })
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.kernel.shape()[1]
    }
}

/// Gradients of a convolution with respect to its input, kernel and bias.
#[derive(Clone, Debug)]
pub struct ConvGrads<T = f32> {
    pub input: Tensor<T>,
    pub kernel: Tensor<T>,
    pub bias: Tensor<T>,
}

#[derive(Clone, Copy, Debug)]
struct Geometry {
    n: usize,
    c: usize,
    inp: [usize; 3],
    o: usize,
    k: [usize; 3],
    out: [usize; 3],
    stride: [usize; 3],
    pad: [usize; 3],
}

impl Geometry {
    fn in_len(&self) -> usize {
        self.c * self.inp.iter().product::<usize>()
    }

    fn out_spatial(&self) -> usize {
        self.out.iter().product()
    }

    fn patch(&self) -> usize {
        self.c * self.k.iter().product::<usize>()
    }

    /// Output rows (fixed depth and height) per lowered chunk.
    fn rows_per_chunk(&self) -> usize {
        let per_row = self.patch() * self.out[2];
        (COLUMN_BUDGET / per_row.max(1)).max(1)
    }

    fn out_shape(&self, rank: usize) -> Vec<usize> {
        if rank == 4 {
            vec![self.n, self.o, self.out[1], self.out[2]]
        } else {
            vec![self.n, self.o, self.out[0], self.out[1], self.out[2]]
        }
    }
}

fn geometry<T: Scalar>(input: &Tensor<T>, params: &ConvParams<T>) -> Result<Geometry> {
    if input.rank() != params.kernel.rank() {
        return dim_err(format!(
            "conv input rank {} does not match kernel rank {} (input {:?}, kernel {:?})",
            input.rank(),
            params.kernel.rank(),
            input.shape(),
            params.kernel.shape()
        ));
    }
    let [n, c, d, h, w] = as_5d(input.shape(), "conv input")?;
    let [o, i, kd, kh, kw] = as_5d(params.kernel.shape(), "conv kernel")?;
    if c != i {
        return dim_err(format!("conv input has {c} channels but kernel expects {i}"));
    }
    let inp = [d, h, w];
    let k = [kd, kh, kw];
    let mut out = [0; 3];
    for axis in 0..3 {
        let padded = inp[axis] + 2 * params.padding[axis];
        if padded < k[axis] {
            return dim_err(format!(
                "conv axis {axis}: padded extent {padded} is smaller than kernel extent {}",
                k[axis]
            ));
        }
        out[axis] = (padded - k[axis]) / params.stride[axis] + 1;
    }
    Ok(Geometry { n, c, inp, o, k, out, stride: params.stride, pad: params.padding })
}

/// Range of output columns `[lo, hi)` whose input column `ow * s + off - p`
/// falls inside `[0, w)`.
fn valid_cols(out: usize, w: usize, s: usize, off: usize, p: usize) -> (usize, usize) {
    let lo = if p > off { (p - off).div_ceil(s) } else { 0 };
    let hi = if w + p > off { ((w + p - off - 1) / s + 1).min(out) } else { 0 };
    (lo.min(hi), hi)
}

/// Input row start for output row `r` and kernel offsets `(a, b)`, or `None`
/// when that row lies in the padding.
fn input_row(g: &Geometry, ci: usize, r: usize, a: usize, b: usize) -> Option<usize> {
    let (od, oh) = (r / g.out[1], r % g.out[1]);
    let id = (od * g.stride[0] + a).checked_sub(g.pad[0]).filter(|&v| v < g.inp[0])?;
    let ih = (oh * g.stride[1] + b).checked_sub(g.pad[1]).filter(|&v| v < g.inp[1])?;
    Some(((ci * g.inp[0] + id) * g.inp[1] + ih) * g.inp[2])
}

/// Lowers output rows `[row0, row1)` of one sample into a `patch x cols` matrix.
fn im2col<T: Scalar>(x: &[T], g: &Geometry, row0: usize, row1: usize, cols: &mut [T]) {
    let ow_n = g.out[2];
    let ncols = (row1 - row0) * ow_n;
    let [_, kh, kw] = g.k;
    let (s, p) = (g.stride[2], g.pad[2]);
    let mut krow = 0;
    for ci in 0..g.c {
        for a in 0..g.k[0] {
            for b in 0..kh {
                for cc in 0..kw {
                    let (lo, hi) = valid_cols(ow_n, g.inp[2], s, cc, p);
                    let dst = &mut cols[krow * ncols..(krow + 1) * ncols];
                    for (ri, r) in (row0..row1).enumerate() {
                        let seg = &mut dst[ri * ow_n..(ri + 1) * ow_n];
                        let Some(base) = input_row(g, ci, r, a, b) else {
                            seg.fill(T::zero());
                            continue;
                        };
                        seg[..lo].fill(T::zero());
                        seg[hi..].fill(T::zero());
                        if lo < hi {
                            let first = base + lo * s + cc - p;
                            if s == 1 {
                                seg[lo..hi].copy_from_slice(&x[first..first + hi - lo]);
                            } else {
                                for (k, v) in seg[lo..hi].iter_mut().enumerate() {
                                    *v = x[first + k * s];
                                }
                            }
                        }
                    }
                    krow += 1;
                }
            }
        }
    }
}

/// Scatter-adds a lowered gradient matrix back onto one sample's input grid.
fn col2im<T: Scalar>(cols: &[T], g: &Geometry, row0: usize, row1: usize, dx: &mut [T]) {
    let ow_n = g.out[2];
    let ncols = (row1 - row0) * ow_n;
    let [_, kh, kw] = g.k;
    let (s, p) = (g.stride[2], g.pad[2]);
    let mut krow = 0;
    for ci in 0..g.c {
        for a in 0..g.k[0] {
            for b in 0..kh {
                for cc in 0..kw {
                    let (lo, hi) = valid_cols(ow_n, g.inp[2], s, cc, p);
                    let src = &cols[krow * ncols..(krow + 1) * ncols];
                    for (ri, r) in (row0..row1).enumerate() {
                        let Some(base) = input_row(g, ci, r, a, b) else { continue };
                        if lo >= hi {
                            continue;
                        }
                        let seg = &src[ri * ow_n + lo..ri * ow_n + hi];
                        let first = base + lo * s + cc - p;
                        if s == 1 {
                            for (d, &v) in dx[first..first + seg.len()].iter_mut().zip(seg) {
                                *d += v;
                            }
                        } else {
                            for (k, &v) in seg.iter().enumerate() {
                                dx[first + k * s] += v;
                            }
                        }
                    }
                    krow += 1;
                }
            }
        }
    }
}

/// Batched 2-D/3-D convolution (cross-correlation: the kernel is not flipped).
///
/// Each spatial output extent is `floor((in + 2 * pad - k) / stride) + 1`.
pub fn conv_forward<T: Scalar>(input: &Tensor<T>, params: &ConvParams<T>) -> Result<Tensor<T>> {
    let g = geometry(input, params)?;
    input.ensure_finite("conv input")?;
    let (patch, spatial) = (g.patch(), g.out_spatial());
    let rows_total = g.out[0] * g.out[1];
    let step = g.rows_per_chunk();
    let mut out = vec![T::zero(); g.n * g.o * spatial];
    let mut cols = vec![T::zero(); patch * step.min(rows_total) * g.out[2]];
    let x = input.data();
    let wk = params.kernel.data();

    for n in 0..g.n {
        let xs = &x[n * g.in_len()..(n + 1) * g.in_len()];
        let mut row0 = 0;
        while row0 < rows_total {
            let row1 = (row0 + step).min(rows_total);
            let ncols = (row1 - row0) * g.out[2];
            im2col(xs, &g, row0, row1, &mut cols);
            gemm(
                wk,
                View::row_major(0, g.o, patch),
                &cols,
                View::row_major(0, patch, ncols),
                &mut out,
                View::row_major(n * g.o * spatial + row0 * g.out[2], g.o, ncols).with_row_stride(spatial),
                false,
            );
            row0 = row1;
        }
        for (oc, &b) in params.bias.data().iter().enumerate() {
            let start = (n * g.o + oc) * spatial;
            out[start..start + spatial].iter_mut().for_each(|v| *v += b);
        }
    }
    Tensor::new(&g.out_shape(input.rank()), out)
}

/// Exact gradients of [`conv_forward`] given the upstream gradient.
pub fn conv_backward<T: Scalar>(
    input: &Tensor<T>,
    params: &ConvParams<T>,
    upstream: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let g = geometry(input, params)?;
    let want = g.out_shape(input.rank());
    if upstream.shape() != want.as_slice() {
        return dim_err(format!(
            "conv upstream gradient has shape {:?}, forward output is {want:?}",
            upstream.shape()
        ));
    }
    let (patch, spatial) = (g.patch(), g.out_spatial());
    let rows_total = g.out[0] * g.out[1];
    let step = g.rows_per_chunk();
    let chunk_len = patch * step.min(rows_total) * g.out[2];
    let mut cols = vec![T::zero(); chunk_len];
    let mut dcols = vec![T::zero(); chunk_len];
    let mut dx = vec![T::zero(); input.len()];
    let mut dw = vec![T::zero(); params.kernel.len()];
    let mut db = vec![T::zero(); g.o];
    let x = input.data();
    let dy = upstream.data();
    let wk = params.kernel.data();

    for n in 0..g.n {
        for oc in 0..g.o {
            let start = (n * g.o + oc) * spatial;
            db[oc] += dy[start..start + spatial].iter().copied().sum::<T>();
        }
        let xs = &x[n * g.in_len()..(n + 1) * g.in_len()];
        let dxs = &mut dx[n * g.in_len()..(n + 1) * g.in_len()];
        let mut row0 = 0;
        while row0 < rows_total {
            let row1 = (row0 + step).min(rows_total);
            let ncols = (row1 - row0) * g.out[2];
            let dy_view =
                View::row_major(n * g.o * spatial + row0 * g.out[2], g.o, ncols).with_row_stride(spatial);
            im2col(xs, &g, row0, row1, &mut cols);
            // dW (O x K) += dY (O x L) * cols^T (L x K)
            gemm(
                dy,
                dy_view,
                &cols,
                View::row_major(0, patch, ncols).transposed(),
                &mut dw,
                View::row_major(0, g.o, patch),
                true,
            );
            // dcols (K x L) = W^T (K x O) * dY (O x L)
            gemm(
                wk,
                View::row_major(0, g.o, patch).transposed(),
                dy,
                dy_view,
                &mut dcols,
                View::row_major(0, patch, ncols),
                false,
            );
            col2im(&dcols, &g, row0, row1, dxs);
            row0 = row1;
        }
    }
    Ok(ConvGrads {
        input: Tensor::new(input.shape(), dx)?,
        kernel: Tensor::new(params.kernel.shape(), dw)?,
        bias: Tensor::new(&[g.o], db)?,
    })
}
