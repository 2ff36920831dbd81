//! Forward and backward kernels for the layer set.
//!
//! Each forward returns its output together with the context its backward
//! needs; backward functions take that context as an `Option` and fail with
//! a state error when it is missing.

use rand::Rng;

use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

fn missing_ctx(op: &str) -> Error {
    Error::State(format!("{op} backward called without a retained forward context"))
}

/// Saved im2col buffers of a convolution forward pass.
#[derive(Debug, Clone)]
pub struct Conv2dCtx<T> {
    input_dims: [usize; 4],
    kernel: [usize; 2],
    /// `N` stacked `[C*kh*kw, H*W]` column matrices.
    cols: Vec<T>,
}

/// Rows above/left and below/right padded for a stride-1 "same" convolution.
/// Even kernels put the extra row/column at the bottom/right.
fn same_padding(k: usize) -> (usize, usize) {
    let before = (k - 1) / 2;
    (before, k - 1 - before)
}

fn im2col<T: Scalar>(x: &[T], c: usize, h: usize, w: usize, kh: usize, kw: usize, cols: &mut [T]) {
    let hw = h * w;
    let (pt, _) = same_padding(kh);
    let (pl, _) = same_padding(kw);
    for ci in 0..c {
        let plane = &x[ci * hw..(ci + 1) * hw];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = (ci * kh + ky) * kw + kx;
                let dst = &mut cols[row * hw..(row + 1) * hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - pt as isize;
                    let out_row = &mut dst[y * w..(y + 1) * w];
                    if sy < 0 || sy >= h as isize {
                        out_row.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    for (xo, v) in out_row.iter_mut().enumerate() {
                        let sx = xo as isize + kx as isize - pl as isize;
                        *v = if sx < 0 || sx >= w as isize {
                            T::zero()
                        } else {
                            src[sx as usize]
                        };
                    }
                }
            }
        }
    }
}

fn col2im_add<T: Scalar>(cols: &[T], c: usize, h: usize, w: usize, kh: usize, kw: usize, gx: &mut [T]) {
    let hw = h * w;
    let (pt, _) = same_padding(kh);
    let (pl, _) = same_padding(kw);
    for ci in 0..c {
        let plane = &mut gx[ci * hw..(ci + 1) * hw];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = (ci * kh + ky) * kw + kx;
                let src = &cols[row * hw..(row + 1) * hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - pt as isize;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[sy as usize * w..(sy as usize + 1) * w];
                    for xo in 0..w {
                        let sx = xo as isize + kx as isize - pl as isize;
                        if sx >= 0 && sx < w as isize {
                            dst[sx as usize] = dst[sx as usize] + src[y * w + xo];
                        }
                    }
                }
            }
        }
    }
}

/// Stride-1 "same" cross-correlation: `x[N,C,H,W]`, `w[F,C,kh,kw]`, `b[F]`.
pub fn conv2d_forward<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<(Tensor<T>, Conv2dCtx<T>)> {
    let [n, c, h, wd] = x.dims4("conv2d input")?;
    let [f, wc, kh, kw] = w.dims4("conv2d weight")?;
    if wc != c {
        return Err(Error::Shape(format!(
            "conv2d weight expects {wc} input channels, input has {c}"
        )));
    }
    if b.shape() != [f] {
        return Err(Error::Shape(format!(
            "conv2d bias shape {:?} does not match {f} filters",
            b.shape()
        )));
    }
    let k = c * kh * kw;
    let hw = h * wd;
    let mut cols = vec![T::zero(); n * k * hw];
    let mut out = vec![T::zero(); n * f * hw];
    for ni in 0..n {
        let cols_n = &mut cols[ni * k * hw..(ni + 1) * k * hw];
        im2col(&x.data()[ni * c * hw..(ni + 1) * c * hw], c, h, wd, kh, kw, cols_n);
        let out_n = &mut out[ni * f * hw..(ni + 1) * f * hw];
        for (fi, row) in out_n.chunks_exact_mut(hw).enumerate() {
            row.iter_mut().for_each(|v| *v = b.data()[fi]);
        }
        T::gemm(
            f,
            k,
            hw,
            T::one(),
            w.data(),
            k as isize,
            1,
            cols_n,
            hw as isize,
            1,
            T::one(),
            out_n,
            hw as isize,
            1,
        );
    }
    let ctx = Conv2dCtx {
        input_dims: [n, c, h, wd],
        kernel: [kh, kw],
        cols,
    };
    Ok((Tensor::new(vec![n, f, h, wd], out)?, ctx))
}

/// Gradients of [`conv2d_forward`] with respect to input, weight and bias.
pub fn conv2d_backward<T: Scalar>(
    ctx: Option<&Conv2dCtx<T>>,
    w: &Tensor<T>,
    upstream: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let ctx = ctx.ok_or_else(|| missing_ctx("conv2d"))?;
    let [n, c, h, wd] = ctx.input_dims;
    let [kh, kw] = ctx.kernel;
    let [f, ..] = w.dims4("conv2d weight")?;
    if upstream.shape() != [n, f, h, wd] {
        return Err(Error::Shape(format!(
            "conv2d upstream gradient {:?} does not match output [{n}, {f}, {h}, {wd}]",
            upstream.shape()
        )));
    }
    let k = c * kh * kw;
    let hw = h * wd;
    let mut gw = vec![T::zero(); f * k];
    let mut gb = vec![T::zero(); f];
    let mut gx = vec![T::zero(); n * c * hw];
    let mut gcols = vec![T::zero(); k * hw];
    for ni in 0..n {
        let g_n = &upstream.data()[ni * f * hw..(ni + 1) * f * hw];
        let cols_n = &ctx.cols[ni * k * hw..(ni + 1) * k * hw];
        for (fi, row) in g_n.chunks_exact(hw).enumerate() {
            gb[fi] = gb[fi] + row.iter().copied().sum::<T>();
        }
        // gW[F,K] += g[F,HW] * cols^T[HW,K]
        T::gemm(
            f,
            hw,
            k,
            T::one(),
            g_n,
            hw as isize,
            1,
            cols_n,
            1,
            hw as isize,
            T::one(),
            &mut gw,
            k as isize,
            1,
        );
        // gcols[K,HW] = W^T[K,F] * g[F,HW]
        T::gemm(
            k,
            f,
            hw,
            T::one(),
            w.data(),
            1,
            k as isize,
            g_n,
            hw as isize,
            1,
            T::zero(),
            &mut gcols,
            hw as isize,
            1,
        );
        col2im_add(&gcols, c, h, wd, kh, kw, &mut gx[ni * c * hw..(ni + 1) * c * hw]);
    }
    Ok((
        Tensor::new(vec![n, c, h, wd], gx)?,
        Tensor::new(w.shape().to_vec(), gw)?,
        Tensor::new(vec![f], gb)?,
    ))
}

#[derive(Debug, Clone)]
pub struct MaxPoolCtx {
    input_shape: Vec<usize>,
    /// Flat input index of each output's maximum.
    argmax: Vec<usize>,
}

/// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
pub fn maxpool2d_forward<T: Scalar>(x: &Tensor<T>) -> Result<(Tensor<T>, MaxPoolCtx)> {
    let [n, c, h, w] = x.dims4("maxpool2d input")?;
    if h < 2 || w < 2 {
        return Err(Error::Shape(format!("maxpool2d needs spatial dims >= 2, got {h}x{w}")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    let data = x.data();
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + 2 * oy * w + 2 * ox;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                    if data[idx] > data[best] {
                        best = idx;
                    }
                }
                out.push(data[best]);
                argmax.push(best);
            }
        }
    }
    let ctx = MaxPoolCtx {
        input_shape: x.shape().to_vec(),
        argmax,
    };
    Ok((Tensor::new(vec![n, c, oh, ow], out)?, ctx))
}

pub fn maxpool2d_backward<T: Scalar>(ctx: Option<&MaxPoolCtx>, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    let ctx = ctx.ok_or_else(|| missing_ctx("maxpool2d"))?;
    if upstream.len() != ctx.argmax.len() {
        return Err(Error::Shape("maxpool2d upstream gradient has the wrong size".into()));
    }
    let mut gx = Tensor::zeros(ctx.input_shape.clone());
    let g = gx.data_mut();
    for (&idx, &v) in ctx.argmax.iter().zip(upstream.data()) {
        g[idx] = g[idx] + v;
    }
    Ok(gx)
}

/// Inverted dropout. Returns the output and the per-element multiplier used
/// (`None` when the op was the identity).
pub fn dropout_forward<T: Scalar, R: Rng + ?Sized>(
    x: &Tensor<T>,
    rate: f64,
    training: bool,
    rng: &mut R,
) -> Result<(Tensor<T>, Option<Vec<T>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
    }
    if !training || rate == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep_scale = T::from_f64_lossy(1.0 / (1.0 - rate));
    let mask: Vec<T> = (0..x.len())
        .map(|_| if rng.gen::<f64>() < rate { T::zero() } else { keep_scale })
        .collect();
    let out = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
    Ok((Tensor::new(x.shape().to_vec(), out)?, Some(mask)))
}

pub fn dropout_backward<T: Scalar>(mask: Option<&[T]>, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    match mask {
        None => Ok(upstream.clone()),
        Some(m) => {
            if m.len() != upstream.len() {
                return Err(Error::Shape("dropout mask and gradient differ in size".into()));
            }
            let g = upstream.data().iter().zip(m).map(|(&g, &m)| g * m).collect();
            Tensor::new(upstream.shape().to_vec(), g)
        }
    }
}

pub fn relu_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let data = x
        .data()
        .iter()
        .map(|&v| if v > T::zero() { v } else { T::zero() })
        .collect();
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}

/// `input` is the forward input of the ReLU.
pub fn relu_backward<T: Scalar>(input: Option<&Tensor<T>>, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    let input = input.ok_or_else(|| missing_ctx("relu"))?;
    if input.len() != upstream.len() {
        return Err(Error::Shape("relu gradient has the wrong size".into()));
    }
    let g = input
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(upstream.shape().to_vec(), g)
}

/// Mean over the spatial dims: `[N,C,H,W] -> [N,C]`.
pub fn global_avg_pool_forward<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, c, h, w] = x.dims4("global average pool input")?;
    if h == 0 || w == 0 {
        return Err(Error::Shape("global average pool over an empty plane".into()));
    }
    let hw = h * w;
    let denom = T::from_usize(hw).expect("plane size fits");
    let out = x
        .data()
        .chunks_exact(hw)
        .map(|p| p.iter().copied().sum::<T>() / denom)
        .collect();
    Tensor::new(vec![n, c], out)
}

pub fn global_avg_pool_backward<T: Scalar>(input_shape: Option<&[usize]>, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    let shape = input_shape.ok_or_else(|| missing_ctx("global average pool"))?;
    let hw = shape[2] * shape[3];
    if upstream.len() * hw != shape.iter().product::<usize>() {
        return Err(Error::Shape("global average pool gradient has the wrong size".into()));
    }
    let denom = T::from_usize(hw).expect("plane size fits");
    let mut g = Vec::with_capacity(upstream.len() * hw);
    for &v in upstream.data() {
        g.extend(std::iter::repeat_n(v / denom, hw));
    }
    Tensor::new(shape.to_vec(), g)
}

/// `x[N,D] * w[D,U] + b[U]`.
pub fn dense_forward<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, d] = x.dims2("dense input")?;
    let [wd, u] = w.dims2("dense weight")?;
    if wd != d {
        return Err(Error::Shape(format!("dense weight expects {wd} inputs, got {d}")));
    }
    if b.shape() != [u] {
        return Err(Error::Shape(format!(
            "dense bias shape {:?} does not match {u} units",
            b.shape()
        )));
    }
    let mut out: Vec<T> = (0..n).flat_map(|_| b.data().iter().copied()).collect();
    T::gemm(
        n,
        d,
        u,
        T::one(),
        x.data(),
        d as isize,
        1,
        w.data(),
        u as isize,
        1,
        T::one(),
        &mut out,
        u as isize,
        1,
    );
    Tensor::new(vec![n, u], out)
}

/// Returns `(grad_x, grad_w, grad_b)`.
pub fn dense_backward<T: Scalar>(
    input: Option<&Tensor<T>>,
    w: &Tensor<T>,
    upstream: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let x = input.ok_or_else(|| missing_ctx("dense"))?;
    let [n, d] = x.dims2("dense input")?;
    let [_, u] = w.dims2("dense weight")?;
    if upstream.shape() != [n, u] {
        return Err(Error::Shape(format!(
            "dense upstream gradient {:?} is not [{n}, {u}]",
            upstream.shape()
        )));
    }
    let g = upstream.data();
    let mut gx = vec![T::zero(); n * d];
    T::gemm(
        n,
        u,
        d,
        T::one(),
        g,
        u as isize,
        1,
        w.data(),
        1,
        u as isize,
        T::zero(),
        &mut gx,
        d as isize,
        1,
    );
    let mut gw = vec![T::zero(); d * u];
    T::gemm(
        d,
        n,
        u,
        T::one(),
        x.data(),
        1,
        d as isize,
        g,
        u as isize,
        1,
        T::zero(),
        &mut gw,
        u as isize,
        1,
    );
    let mut gb = vec![T::zero(); u];
    for row in g.chunks_exact(u) {
        gb.iter_mut().zip(row).for_each(|(a, &b)| *a = *a + b);
    }
    Ok((
        Tensor::new(vec![n, d], gx)?,
        Tensor::new(vec![d, u], gw)?,
        Tensor::new(vec![u], gb)?,
    ))
}

/// Row-wise softmax with max subtraction.
pub fn softmax<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let [_, k] = x.dims2("softmax input")?;
    let mut out = Vec::with_capacity(x.len());
    for row in x.data().chunks_exact(k) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = row.iter().map(|&v| (v - max).exp()).collect();
        let total: T = exps.iter().copied().sum();
        out.extend(exps.into_iter().map(|e| e / total));
    }
    Tensor::new(x.shape().to_vec(), out)
}

pub const PROB_FLOOR: f64 = 1e-12;

fn check_labels(n: usize, k: usize, labels: &[usize]) -> Result<()> {
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} rows", labels.len())));
    }
    if let Some(bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::Shape(format!("label {bad} outside 0..{k}")));
    }
    Ok(())
}

/// `-mean(log p[label])` with probabilities floored at 1e-12.
pub fn cross_entropy<T: Scalar>(probs: &Tensor<T>, labels: &[usize]) -> Result<T> {
    let [n, k] = probs.dims2("cross entropy input")?;
    check_labels(n, k, labels)?;
    let floor = T::from_f64_lossy(PROB_FLOOR);
    let total: T = probs
        .data()
        .chunks_exact(k)
        .zip(labels)
        .map(|(row, &l)| -row[l].max(floor).ln())
        .sum();
    Ok(total / T::from_usize(n).expect("batch size fits"))
}

/// Gradient of `cross_entropy(softmax(logits))` w.r.t. the logits:
/// `(p - onehot) / N`.
pub fn softmax_cross_entropy_backward<T: Scalar>(probs: &Tensor<T>, labels: &[usize]) -> Result<Tensor<T>> {
    let [n, k] = probs.dims2("cross entropy input")?;
    check_labels(n, k, labels)?;
    let inv_n = T::one() / T::from_usize(n).expect("batch size fits");
    let mut g = probs.data().to_vec();
    for (row, &l) in g.chunks_exact_mut(k).zip(labels) {
        row[l] = row[l] - T::one();
        row.iter_mut().for_each(|v| *v = *v * inv_n);
    }
    Tensor::new(vec![n, k], g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn conv_of_ones_sums_window() {
        let x = Tensor::filled(vec![1, 1, 2, 2], 1.0f64);
        let w = Tensor::filled(vec![1, 1, 2, 2], 1.0f64);
        let b = Tensor::zeros(vec![1]);
        let (y, _) = conv2d_forward(&x, &w, &b).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        // Padding below/right: only the top-left output sees all four ones.
        assert_eq!(y.data(), &[4.0, 2.0, 2.0, 1.0]);
    }

    #[test]
    fn delta_kernel_is_identity() {
        let x = t(
            &[1, 2, 3, 3],
            &(0..18).map(|v| v as f64 * 0.5 - 3.0).collect::<Vec<_>>(),
        );
        let mut w = Tensor::zeros(vec![2, 2, 2, 2]);
        // filter 0 picks channel 0, filter 1 picks channel 1, both at (0,0)
        w.data_mut()[0] = 1.0;
        w.data_mut()[8 + 4] = 1.0;
        let (y, _) = conv2d_forward(&x, &w, &Tensor::zeros(vec![2])).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn conv_channel_mismatch_is_shape_error() {
        let x = Tensor::<f64>::zeros(vec![1, 3, 4, 4]);
        let w = Tensor::zeros(vec![2, 1, 2, 2]);
        assert!(matches!(
            conv2d_forward(&x, &w, &Tensor::zeros(vec![2])),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn conv_backward_zero_upstream_and_bias_identity() {
        let x = t(&[2, 1, 3, 4], &(0..24).map(|v| (v as f64).sin()).collect::<Vec<_>>());
        let w = t(&[3, 1, 2, 2], &(0..12).map(|v| (v as f64).cos()).collect::<Vec<_>>());
        let (y, ctx) = conv2d_forward(&x, &w, &Tensor::zeros(vec![3])).unwrap();
        let (gx, gw, gb) = conv2d_backward(Some(&ctx), &w, &Tensor::zeros(y.shape().to_vec())).unwrap();
        assert!(gx.data().iter().chain(gw.data()).chain(gb.data()).all(|&v| v == 0.0));

        let up = t(y.shape(), &(0..y.len()).map(|v| v as f64 * 0.01).collect::<Vec<_>>());
        let (_, _, gb) = conv2d_backward(Some(&ctx), &w, &up).unwrap();
        for f in 0..3 {
            let expected: f64 = (0..2)
                .flat_map(|n| (0..12).map(move |i| (n * 3 + f) * 12 + i))
                .map(|i| up.data()[i])
                .sum();
            assert!((gb.data()[f] - expected).abs() < 1e-12);
        }
        assert!(matches!(conv2d_backward(None, &w, &up), Err(Error::State(_))));
    }

    #[test]
    fn maxpool_basics() {
        let (y, ctx) = maxpool2d_forward(&t(&[1, 1, 2, 2], &[1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_eq!(y.data(), &[4.0]);
        let g = maxpool2d_backward(Some(&ctx), &t(&[1, 1, 1, 1], &[1.0])).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 0.0, 1.0]);

        let (y, _) = maxpool2d_forward(&Tensor::<f64>::zeros(vec![1, 1, 5, 4])).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert!(maxpool2d_forward(&Tensor::<f64>::zeros(vec![1, 1, 1, 4])).is_err());
    }

    #[test]
    fn maxpool_ties_go_to_first_element() {
        let (_, ctx) = maxpool2d_forward(&t(&[1, 1, 2, 2], &[5.0, 5.0, 5.0, 5.0])).unwrap();
        let g = maxpool2d_backward(Some(&ctx), &t(&[1, 1, 1, 1], &[1.0])).unwrap();
        assert_eq!(g.data(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn dropout_identity_cases() {
        let x = t(&[1, 5], &[1.0, -2.0, 3.0, 0.5, 9.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (y, m) = dropout_forward(&x, 0.15, false, &mut rng).unwrap();
        assert_eq!(y, x);
        assert!(m.is_none());
        let (y, _) = dropout_forward(&x, 0.0, true, &mut rng).unwrap();
        assert_eq!(y, x);
        assert!(dropout_forward(&x, 1.0, true, &mut rng).is_err());
    }

    #[test]
    fn dropout_survivors_are_rescaled() {
        let x = Tensor::filled(vec![1, 1000], 1.0f64);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (y, _) = dropout_forward(&x, 0.5, true, &mut rng).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0 || v == 2.0));
    }

    #[test]
    fn global_average_pool() {
        let x = Tensor::filled(vec![2, 3, 4, 5], 2.5f64);
        let y = global_avg_pool_forward(&x).unwrap();
        assert_eq!(y.shape(), &[2, 3]);
        assert!(y.data().iter().all(|&v| (v - 2.5).abs() < 1e-15));
        let x1 = t(&[1, 2, 1, 1], &[7.0, -1.0]);
        assert_eq!(global_avg_pool_forward(&x1).unwrap().data(), &[7.0, -1.0]);
    }

    #[test]
    fn softmax_uniform_and_stable() {
        let p = softmax(&Tensor::<f64>::zeros(vec![1, 5])).unwrap();
        assert!(p.data().iter().all(|&v| (v - 0.2).abs() < 1e-15));
        let p = softmax(&t(&[1, 5], &[1000.0, 0.0, 0.0, 0.0, 0.0])).unwrap();
        assert!(p.all_finite());
        assert!((p.data()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_checks_labels() {
        let p = softmax(&Tensor::<f64>::zeros(vec![2, 5])).unwrap();
        let loss = cross_entropy(&p, &[0, 4]).unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-12);
        assert!(cross_entropy(&p, &[0, 5]).is_err());
        assert!(cross_entropy(&p, &[0]).is_err());
    }

    #[test]
    fn dense_shapes() {
        let x = t(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let w = t(&[3, 1], &[1.0, 0.0, -1.0]);
        let b = t(&[1], &[0.5]);
        let y = dense_forward(&x, &w, &b).unwrap();
        assert_eq!(y.data(), &[-1.5, -1.5]);
        assert!(dense_forward(&x, &t(&[2, 1], &[1.0, 1.0]), &b).is_err());
    }
}
