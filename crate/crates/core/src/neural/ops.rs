//! Layer primitives on `[channels, ...]` tensors.
//!
//! Convolutions accumulate whole shifted rows at a time; the direct
//! per-output summations they are tested against live in the test suites.

use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[inline]
pub fn relu<T: Scalar>(x: T) -> T {
    x.max(T::zero())
}

fn expect_dims(what: &str, t: &Tensor<impl Scalar>, rank: usize) -> Result<()> {
    if t.rank() != rank {
        return Err(Error::DimensionMismatch(format!(
            "{what}: expected rank {rank}, got dims {:?}",
            t.dims()
        )));
    }
    Ok(())
}

fn check_bias<T: Scalar>(what: &str, bias: &Tensor<T>, channels: usize) -> Result<()> {
    if bias.dims() != [channels] {
        return Err(Error::DimensionMismatch(format!(
            "{what}: bias dims {:?}, expected [{channels}]",
            bias.dims()
        )));
    }
    Ok(())
}

/// Stride-1 2-D convolution of `[C, H, W]` with `[O, C, kh, kw]` weights and
/// symmetric zero padding.
pub fn conv2d<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    pad: usize,
) -> Result<Tensor<T>> {
    expect_dims("conv2d input", x, 3)?;
    expect_dims("conv2d weight", weight, 4)?;
    let (c_in, h, w) = (x.dims()[0], x.dims()[1], x.dims()[2]);
    let (c_out, wc, kh, kw) = (
        weight.dims()[0],
        weight.dims()[1],
        weight.dims()[2],
        weight.dims()[3],
    );
    if wc != c_in {
        return Err(Error::DimensionMismatch(format!(
            "conv2d: input has {c_in} channels, weight expects {wc}"
        )));
    }
    check_bias("conv2d", bias, c_out)?;
    if h + 2 * pad < kh || w + 2 * pad < kw {
        return Err(Error::DimensionMismatch(
            "conv2d: kernel larger than padded input".into(),
        ));
    }
    let (oh, ow) = (h + 2 * pad - kh + 1, w + 2 * pad - kw + 1);
    let mut out = vec![T::zero(); c_out * oh * ow];
    let xd = x.data();
    let wd = weight.data();
    for o in 0..c_out {
        let plane = &mut out[o * oh * ow..(o + 1) * oh * ow];
        plane.iter_mut().for_each(|v| *v = bias.data()[o]);
        for c in 0..c_in {
            let src = &xd[c * h * w..(c + 1) * h * w];
            for ky in 0..kh {
                for kx in 0..kw {
                    let wv = wd[((o * c_in + c) * kh + ky) * kw + kx];
                    if wv == T::zero() {
                        continue;
                    }
                    // Output column range whose input column x + kx - pad is valid.
                    let x_lo = pad.saturating_sub(kx);
                    let x_hi = (w + pad).saturating_sub(kx).min(ow);
                    if x_lo >= x_hi {
                        continue;
                    }
                    for y in 0..oh {
                        let iy = y + ky;
                        if iy < pad || iy - pad >= h {
                            continue;
                        }
                        let row = &src[(iy - pad) * w..(iy - pad + 1) * w];
                        let dst = &mut plane[y * ow + x_lo..y * ow + x_hi];
                        let ix0 = x_lo + kx - pad;
                        for (d, &s) in dst.iter_mut().zip(&row[ix0..ix0 + (x_hi - x_lo)]) {
                            *d += wv * s;
                        }
                    }
                }
            }
        }
    }
    Ok(Tensor::from_raw(vec![c_out, oh, ow], out))
}

/// 2x2 max pooling with stride 2 on `[C, H, W]`; H and W must be even.
pub fn max_pool2<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    expect_dims("max_pool2", x, 3)?;
    let (c, h, w) = (x.dims()[0], x.dims()[1], x.dims()[2]);
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::DimensionMismatch(format!(
            "max_pool2: odd spatial dims {h}x{w}"
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let xd = x.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let base = ch * h * w;
        for y in 0..oh {
            let r0 = &xd[base + 2 * y * w..base + (2 * y + 1) * w];
            let r1 = &xd[base + (2 * y + 1) * w..base + (2 * y + 2) * w];
            for xx in 0..ow {
                out.push(
                    r0[2 * xx]
                        .max(r0[2 * xx + 1])
                        .max(r1[2 * xx])
                        .max(r1[2 * xx + 1]),
                );
            }
        }
    }
    Ok(Tensor::from_raw(vec![c, oh, ow], out))
}

/// Transposed 2-D convolution of `[C, H, W]` with `[C, O, kh, kw]` weights,
/// equal stride on both axes and no padding.
pub fn conv_transpose2d<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
) -> Result<Tensor<T>> {
    expect_dims("conv_transpose2d input", x, 3)?;
    expect_dims("conv_transpose2d weight", weight, 4)?;
    let (c_in, h, w) = (x.dims()[0], x.dims()[1], x.dims()[2]);
    let (wc, c_out, kh, kw) = (
        weight.dims()[0],
        weight.dims()[1],
        weight.dims()[2],
        weight.dims()[3],
    );
    if wc != c_in {
        return Err(Error::DimensionMismatch(format!(
            "conv_transpose2d: input has {c_in} channels, weight expects {wc}"
        )));
    }
    check_bias("conv_transpose2d", bias, c_out)?;
    let (oh, ow) = ((h - 1) * stride + kh, (w - 1) * stride + kw);
    let mut out = vec![T::zero(); c_out * oh * ow];
    for o in 0..c_out {
        out[o * oh * ow..(o + 1) * oh * ow]
            .iter_mut()
            .for_each(|v| *v = bias.data()[o]);
    }
    let xd = x.data();
    let wd = weight.data();
    for c in 0..c_in {
        let src = &xd[c * h * w..(c + 1) * h * w];
        for o in 0..c_out {
            let plane = &mut out[o * oh * ow..(o + 1) * oh * ow];
            for ky in 0..kh {
                for kx in 0..kw {
                    let wv = wd[((c * c_out + o) * kh + ky) * kw + kx];
                    for i in 0..h {
                        let dst_row = (i * stride + ky) * ow;
                        for (j, &s) in src[i * w..(i + 1) * w].iter().enumerate() {
                            plane[dst_row + j * stride + kx] += wv * s;
                        }
                    }
                }
            }
        }
    }
    Ok(Tensor::from_raw(vec![c_out, oh, ow], out))
}

/// Concatenates `[Ca, H, W]` and `[Cb, H, W]` along channels.
pub fn concat_channels<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    expect_dims("concat", a, 3)?;
    expect_dims("concat", b, 3)?;
    if a.dims()[1..] != b.dims()[1..] {
        return Err(Error::DimensionMismatch(format!(
            "concat: spatial dims {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    let mut data = a.data().to_vec();
    data.extend_from_slice(b.data());
    Ok(Tensor::from_raw(
        vec![a.dims()[0] + b.dims()[0], a.dims()[1], a.dims()[2]],
        data,
    ))
}

/// Output length of a 1-D convolution.
pub fn conv1d_len(len: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    (len + 2 * pad).checked_sub(kernel).map(|v| v / stride + 1)
}

/// Output length of a 1-D transposed convolution.
pub fn conv_transpose1d_len(len: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    ((len.checked_sub(1)?) * stride + kernel).checked_sub(2 * pad)
}

/// 1-D convolution of `[C, L]` with `[O, C, k]` weights.
pub fn conv1d<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<Tensor<T>> {
    expect_dims("conv1d input", x, 2)?;
    expect_dims("conv1d weight", weight, 3)?;
    let (c_in, len) = (x.dims()[0], x.dims()[1]);
    let (c_out, wc, k) = (weight.dims()[0], weight.dims()[1], weight.dims()[2]);
    if wc != c_in {
        return Err(Error::DimensionMismatch(format!(
            "conv1d: input has {c_in} channels, weight expects {wc}"
        )));
    }
    check_bias("conv1d", bias, c_out)?;
    let out_len = conv1d_len(len, k, stride, pad).ok_or_else(|| {
        Error::DimensionMismatch("conv1d: kernel longer than padded input".into())
    })?;
    // Zero-padded copy of the input so the inner loop needs no bounds checks.
    let padded_len = len + 2 * pad;
    let mut padded = vec![T::zero(); c_in * padded_len];
    for c in 0..c_in {
        padded[c * padded_len + pad..c * padded_len + pad + len]
            .copy_from_slice(&x.data()[c * len..(c + 1) * len]);
    }
    let mut out = vec![T::zero(); c_out * out_len];
    for o in 0..c_out {
        let dst = &mut out[o * out_len..(o + 1) * out_len];
        dst.iter_mut().for_each(|v| *v = bias.data()[o]);
        for c in 0..c_in {
            let src = &padded[c * padded_len..(c + 1) * padded_len];
            for kk in 0..k {
                let wv = weight.data()[(o * c_in + c) * k + kk];
                for (t, d) in dst.iter_mut().enumerate() {
                    *d += wv * src[t * stride + kk];
                }
            }
        }
    }
    Ok(Tensor::from_raw(vec![c_out, out_len], out))
}

/// 1-D transposed convolution of `[C, L]` with `[C, O, k]` weights.
pub fn conv_transpose1d<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<Tensor<T>> {
    expect_dims("conv_transpose1d input", x, 2)?;
    expect_dims("conv_transpose1d weight", weight, 3)?;
    let (c_in, len) = (x.dims()[0], x.dims()[1]);
    let (wc, c_out, k) = (weight.dims()[0], weight.dims()[1], weight.dims()[2]);
    if wc != c_in {
        return Err(Error::DimensionMismatch(format!(
            "conv_transpose1d: input has {c_in} channels, weight expects {wc}"
        )));
    }
    check_bias("conv_transpose1d", bias, c_out)?;
    let out_len = conv_transpose1d_len(len, k, stride, pad)
        .filter(|&l| l > 0)
        .ok_or_else(|| Error::DimensionMismatch("conv_transpose1d: empty output".into()))?;
    // Scatter into an unpadded buffer, then drop `pad` positions at each end.
    let full_len = (len - 1) * stride + k;
    let mut full = vec![T::zero(); c_out * full_len];
    for c in 0..c_in {
        let src = &x.data()[c * len..(c + 1) * len];
        for o in 0..c_out {
            let dst = &mut full[o * full_len..(o + 1) * full_len];
            for kk in 0..k {
                let wv = weight.data()[(c * c_out + o) * k + kk];
                for (i, &s) in src.iter().enumerate() {
                    dst[i * stride + kk] += wv * s;
                }
            }
        }
    }
    let mut out = Vec::with_capacity(c_out * out_len);
    for o in 0..c_out {
        let b = bias.data()[o];
        out.extend(
            full[o * full_len + pad..o * full_len + pad + out_len]
                .iter()
                .map(|&v| v + b),
        );
    }
    Ok(Tensor::from_raw(vec![c_out, out_len], out))
}
