//! Learned segmentation: a U-Net that turns a page into a system map and a
//! 1-D cut network that turns that map into a row profile.
//!
//! Both networks run on the page resized to the spec's input size and with
//! ink as high values. Decoder stages concatenate the skip connection first,
//! then the upsampled features.

mod ops;
mod spec;
mod tensor;
mod weights;

use std::path::Path;

pub use ops::{
    concat_channels, conv1d, conv1d_len, conv2d, conv_transpose1d, conv_transpose1d_len,
    conv_transpose2d, max_pool2, relu, sigmoid,
};
pub use spec::{Conv1dLayer, NetSpec, TensorSpec};
pub use tensor::Tensor;
pub use weights::{random_weights, zero_weights, WeightStore, MAGIC};

use crate::error::{Error, Result};
use crate::imaging::{self, Image};
use crate::profileseg::{self, PageSegmentation, RowProfile, ThresholdParams};
use crate::scalar::Scalar;

fn conv_relu<T: Scalar>(x: &Tensor<T>, w: &WeightStore<T>, name: &str) -> Result<Tensor<T>> {
    let weight = w.require(&format!("unet.{name}.weight"))?;
    let bias = w.require(&format!("unet.{name}.bias"))?;
    Ok(conv2d(x, weight, bias, 1)?.map(relu))
}

fn block<T: Scalar>(x: &Tensor<T>, w: &WeightStore<T>, name: &str) -> Result<Tensor<T>> {
    let h = conv_relu(x, w, &format!("{name}.conv1"))?;
    conv_relu(&h, w, &format!("{name}.conv2"))
}

fn up<T: Scalar>(x: &Tensor<T>, w: &WeightStore<T>, name: &str) -> Result<Tensor<T>> {
    conv_transpose2d(
        x,
        w.require(&format!("unet.{name}.weight"))?,
        w.require(&format!("unet.{name}.bias"))?,
        2,
    )
}

/// Per-pixel logits `[H, W]` of the three-level U-Net.
///
/// Height and width must be divisible by 4.
pub fn unet_forward<T: Scalar>(img: &Image<T>, w: &WeightStore<T>) -> Result<Tensor<T>> {
    let (h, wd) = (img.height(), img.width());
    if h % 4 != 0 || wd % 4 != 0 {
        return Err(Error::DimensionMismatch(format!(
            "U-Net input {h}x{wd} not divisible by 4"
        )));
    }
    let x = Tensor::from_raw(vec![1, h, wd], img.data().to_vec());
    let e1 = block(&x, w, "enc1")?;
    let e2 = block(&max_pool2(&e1)?, w, "enc2")?;
    let e3 = block(&max_pool2(&e2)?, w, "enc3")?;
    let d2 = block(&concat_channels(&e2, &up(&e3, w, "up2")?)?, w, "dec2")?;
    let d1 = block(&concat_channels(&e1, &up(&d2, w, "up1")?)?, w, "dec1")?;
    let out = conv2d(
        &d1,
        w.require("unet.out.weight")?,
        w.require("unet.out.bias")?,
        0,
    )?;
    out.reshape(vec![h, wd])
}

/// Removes a learned global offset from the U-Net map: with row sums `r`,
/// `s = relu(r . w1 + b1)` and `y = sigmoid(x - s)`.
pub fn cutnet_subtract<T: Scalar>(x: &Tensor<T>, w: &WeightStore<T>) -> Result<Tensor<T>> {
    if x.rank() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "expected [H, W], got {:?}",
            x.dims()
        )));
    }
    let (h, wd) = (x.dims()[0], x.dims()[1]);
    let w1 = w.require("cutnet.w1")?;
    let b1 = w.require("cutnet.b1")?;
    if w1.dims() != [h] || b1.dims() != [1] {
        return Err(Error::DimensionMismatch(format!(
            "cutnet.w1 {:?} / cutnet.b1 {:?} do not fit input height {h}",
            w1.dims(),
            b1.dims()
        )));
    }
    let mut acc = b1.data()[0];
    for (row, &wr) in x.data().chunks_exact(wd).zip(w1.data()) {
        acc += wr * row.iter().copied().sum::<T>();
    }
    let s = relu(acc);
    Ok(x.map(|v| sigmoid(v - s)))
}

/// Maps the subtracted map `[H, W]` to a row profile in `(0, 1)`.
pub fn cutnet_classify<T: Scalar>(
    y: &Tensor<T>,
    w: &WeightStore<T>,
    spec: &NetSpec,
) -> Result<RowProfile<T>> {
    if y.rank() != 2 || y.dims()[0] != spec.input_height {
        return Err(Error::DimensionMismatch(format!(
            "expected [{}, W], got {:?}",
            spec.input_height,
            y.dims()
        )));
    }
    let (h, wd) = (y.dims()[0], y.dims()[1]);
    let sums: Vec<T> = y
        .data()
        .chunks_exact(wd)
        .map(|r| r.iter().copied().sum())
        .collect();
    let mut x = Tensor::from_raw(vec![1, h], sums);

    let layer = |x: &Tensor<T>, l: &Conv1dLayer, transposed: bool| -> Result<Tensor<T>> {
        let weight = w.require(&format!("cutnet.{}.weight", l.name))?;
        let bias = w.require(&format!("cutnet.{}.bias", l.name))?;
        if transposed {
            conv_transpose1d(x, weight, bias, l.stride, l.padding)
        } else {
            conv1d(x, weight, bias, l.stride, l.padding)
        }
    };
    for l in &spec.cutnet_down {
        x = layer(&x, l, false)?;
    }
    x = x.map(|v| v.tanh());
    x = channel_mix(&x, w.require("cutnet.w2")?, w.require("cutnet.b2")?)?;
    x = layer(&x, &spec.cutnet_mid, false)?;
    for l in &spec.cutnet_up {
        x = layer(&x, l, true)?;
    }
    if x.dims() != [1, h] {
        return Err(Error::DimensionMismatch(format!(
            "cut network produced {:?}, expected [1, {h}]",
            x.dims()
        )));
    }
    RowProfile::new(x.data().iter().map(|&v| sigmoid(v)).collect())
}

/// Pointwise channel mixing `out[o, l] = b[o] + sum_c x[c, l] * w[c, o]`.
fn channel_mix<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (c_in, len) = (x.dims()[0], x.dims()[1]);
    if weight.rank() != 2 || weight.dims()[0] != c_in || bias.dims() != [weight.dims()[1]] {
        return Err(Error::DimensionMismatch(format!(
            "channel mix: input {:?}, weight {:?}, bias {:?}",
            x.dims(),
            weight.dims(),
            bias.dims()
        )));
    }
    let c_out = weight.dims()[1];
    let mut out = Vec::with_capacity(c_out * len);
    for o in 0..c_out {
        let start = out.len();
        out.resize(start + len, bias.data()[o]);
        let dst = &mut out[start..];
        for c in 0..c_in {
            let wv = weight.data()[c * c_out + o];
            for (d, &s) in dst.iter_mut().zip(&x.data()[c * len..(c + 1) * len]) {
                *d += wv * s;
            }
        }
    }
    Ok(Tensor::from_raw(vec![c_out, len], out))
}

/// A validated spec together with its weights.
#[derive(Clone, Debug)]
pub struct SegmentationNet<T> {
    spec: NetSpec,
    weights: WeightStore<T>,
}

/// Outputs of one forward pass at network resolution.
#[derive(Clone, Debug)]
pub struct NetOutput<T> {
    /// U-Net logits.
    pub logits: Tensor<T>,
    /// Map after subtraction.
    pub subtracted: Tensor<T>,
    /// Per-row system likelihood.
    pub profile: RowProfile<T>,
}

impl<T: Scalar> SegmentationNet<T> {
    pub fn new(spec: NetSpec, weights: WeightStore<T>) -> Result<Self> {
        spec.validate(&weights)?;
        Ok(Self { spec, weights })
    }

    pub fn load(path: impl AsRef<Path>, spec: NetSpec) -> Result<Self> {
        let weights = WeightStore::<f32>::load(path)?;
        Self::new(spec, weights.cast())
    }

    pub fn spec(&self) -> &NetSpec {
        &self.spec
    }

    pub fn weights(&self) -> &WeightStore<T> {
        &self.weights
    }

    /// Runs both networks on a page loaded with dark ink on light paper.
    pub fn forward(&self, page: &Image<T>) -> Result<NetOutput<T>> {
        let resized =
            imaging::resize_bilinear(page, self.spec.input_height, self.spec.input_width)?;
        let logits = unet_forward(&imaging::invert(&resized), &self.weights)?;
        let subtracted = cutnet_subtract(&logits, &self.weights)?;
        let profile = cutnet_classify(&subtracted, &self.weights, &self.spec)?;
        Ok(NetOutput {
            logits,
            subtracted,
            profile,
        })
    }
}

/// Learned segmentation of a page: the network profile goes through the same
/// cut selection as the threshold method.
pub fn cutnet_segment<T: Scalar>(
    page: &Image<T>,
    net: &SegmentationNet<T>,
    params: &ThresholdParams<T>,
) -> Result<PageSegmentation> {
    params.validate()?;
    let out = net.forward(page)?;
    segment_with_profile(page, &out.profile, params)
}

/// Segments `page` from a system-likelihood profile of any length, high inside
/// systems. Cut rows are rescaled to page rows before regions are extracted
/// from the inverted page.
pub fn segment_with_profile<T: Scalar>(
    page: &Image<T>,
    profile: &RowProfile<T>,
    params: &ThresholdParams<T>,
) -> Result<PageSegmentation> {
    params.validate()?;
    let height = page.height();
    if profile.len() < 3 {
        return Err(Error::ProfileTooShort(profile.len()));
    }
    let cp = profileseg::critical_points(profile)?;
    let sel = profileseg::select_cuts(profile, &cp, params);
    let scale = |r: usize| ((r as f64) * height as f64 / profile.len() as f64).round() as usize;
    let mut cuts: Vec<usize> = sel
        .cuts
        .iter()
        .map(|&r| scale(r))
        .filter(|&r| r > 0 && r < height)
        .collect();
    cuts.dedup();
    let maxima: Vec<usize> = sel
        .selected_maxima
        .iter()
        .map(|&r| scale(r).min(height - 1))
        .collect();
    profileseg::extract_regions(&imaging::invert(page), &cuts, &maxima, params)
}
