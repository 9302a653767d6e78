//! Raster types and the page preprocessing chain.
//!
//! Pages are loaded with ink dark (`0.0`) and paper light (`1.0`). The
//! segmentation chain inverts them so ink carries mass, binarizes, thins the
//! strokes to one pixel and smooths the result before any profile is taken.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma};

use crate::error::{io_err, Error, Result};
use crate::scalar::Scalar;

/// Grayscale raster, row-major, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Scalar> Image<T> {
    pub fn new(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Dimensions { height, width });
        }
        if data.len() != height * width {
            return Err(Error::DataLength {
                len: data.len(),
                height,
                width,
            });
        }
        if let Some(bad) = data.iter().find(|v| !(**v >= T::zero() && **v <= T::one())) {
            return Err(Error::PixelRange(bad.as_f64()));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: T) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> T,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self::new(height, width, data)
    }

    /// Caller guarantees the shape and value range.
    pub(crate) fn from_raw(height: usize, width: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), height * width);
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.width + col]
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.data[row * self.width..(row + 1) * self.width]
    }

    /// Multiplies every value by `factor`, clamping into `[0, 1]`.
    pub fn scaled(&self, factor: T) -> Self {
        let data = self
            .data
            .iter()
            .map(|&v| (v * factor).max(T::zero()).min(T::one()))
            .collect();
        Self::from_raw(self.height, self.width, data)
    }

    /// Rows `[row_start, row_end)`, columns `[col_start, col_end)`.
    pub fn crop(
        &self,
        row_start: usize,
        row_end: usize,
        col_start: usize,
        col_end: usize,
    ) -> Result<Self> {
        if row_start >= row_end
            || col_start >= col_end
            || row_end > self.height
            || col_end > self.width
        {
            return Err(Error::RegionOutOfBounds(format!(
                "crop rows [{row_start},{row_end}) cols [{col_start},{col_end}) of {}x{}",
                self.height, self.width
            )));
        }
        let w = col_end - col_start;
        let mut data = Vec::with_capacity((row_end - row_start) * w);
        for r in row_start..row_end {
            data.extend_from_slice(&self.row(r)[col_start..col_end]);
        }
        Ok(Self::from_raw(row_end - row_start, w, data))
    }

    pub fn cast<U: Scalar>(&self) -> Image<U> {
        Image::from_raw(
            self.height,
            self.width,
            self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        )
    }

    /// 8-bit quantization, `round(v * 255)`.
    pub fn to_luma8(&self) -> ImageBuffer<Luma<u8>, Vec<u8>> {
        let bytes = self
            .data
            .iter()
            .map(|v| (v.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        ImageBuffer::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer length matches dimensions")
    }

    pub fn from_luma8(buf: &ImageBuffer<Luma<u8>, Vec<u8>>) -> Result<Self> {
        let (w, h) = buf.dimensions();
        let data = buf
            .as_raw()
            .iter()
            .map(|&b| T::of(b as f64 / 255.0))
            .collect();
        Self::new(h as usize, w as usize, data)
    }
}

/// Binary raster; `1` marks foreground (ink or mask).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl BinaryImage {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Dimensions { height, width });
        }
        if data.len() != height * width {
            return Err(Error::DataLength {
                len: data.len(),
                height,
                width,
            });
        }
        if let Some(&bad) = data.iter().find(|&&v| v > 1) {
            return Err(Error::PixelRange(bad as f64));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![0; height * width])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c) as u8);
            }
        }
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col] != 0
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, on: bool) {
        self.data[row * self.width + col] = on as u8;
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    /// Fills rows `[row_start, row_end)` x cols `[col_start, col_end)` with 1.
    pub fn fill_box(&mut self, row_start: usize, row_end: usize, col_start: usize, col_end: usize) {
        for r in row_start..row_end.min(self.height) {
            let base = r * self.width;
            for v in
                &mut self.data[base + col_start.min(self.width)..base + col_end.min(self.width)]
            {
                *v = 1;
            }
        }
    }

    /// Mask encoding: 0 and 255.
    pub fn to_luma8(&self) -> ImageBuffer<Luma<u8>, Vec<u8>> {
        let bytes = self.data.iter().map(|&v| v * 255).collect();
        ImageBuffer::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer length matches dimensions")
    }
}

fn decode(path: &Path) -> Result<DynamicImage> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let img = image::load_from_memory(&bytes).map_err(|source| Error::Decode {
        path: path.to_path_buf(),
        source,
    })?;
    if img.width() == 0 || img.height() == 0 {
        return Err(Error::Dimensions {
            height: img.height() as usize,
            width: img.width() as usize,
        });
    }
    Ok(img)
}

/// Decodes a PNG or JPEG page as luminance in `[0, 1]` (white = 1).
pub fn load_gray<T: Scalar>(path: impl AsRef<Path>) -> Result<Image<T>> {
    let img = decode(path.as_ref())?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let wide = img.color().bits_per_pixel() / img.color().channel_count() as u16 > 8;
    let data = if wide {
        img.to_luma16()
            .into_raw()
            .into_iter()
            .map(|v| T::of(v as f64 / 65535.0))
            .collect()
    } else {
        img.to_luma8()
            .into_raw()
            .into_iter()
            .map(|v| T::of(v as f64 / 255.0))
            .collect()
    };
    Image::new(h, w, data)
}

/// `(height, width)` of an image file, read from its header.
pub fn image_dimensions(path: impl AsRef<Path>) -> Result<(usize, usize)> {
    let path = path.as_ref();
    let (w, h) = image::image_dimensions(path).map_err(|source| Error::Decode {
        path: path.to_path_buf(),
        source,
    })?;
    Ok((h as usize, w as usize))
}

/// Decodes a mask image; pixels `>= 128` are foreground.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryImage> {
    let img = decode(path.as_ref())?.to_luma8();
    let (w, h) = img.dimensions();
    BinaryImage::new(
        h as usize,
        w as usize,
        img.into_raw()
            .into_iter()
            .map(|v| (v >= 128) as u8)
            .collect(),
    )
}

fn write_png(buf: &ImageBuffer<Luma<u8>, Vec<u8>>, path: &Path) -> Result<()> {
    let mut bytes = Vec::new();
    buf.write_to(&mut Cursor::new(&mut bytes), ImageFormat::Png)
        .map_err(Error::Encode)?;
    std::fs::write(path, bytes).map_err(io_err(path))
}

/// Encodes as 8-bit grayscale PNG.
pub fn save_gray_png<T: Scalar>(img: &Image<T>, path: impl AsRef<Path>) -> Result<()> {
    write_png(&img.to_luma8(), path.as_ref())
}

pub fn save_mask_png(mask: &BinaryImage, path: impl AsRef<Path>) -> Result<()> {
    write_png(&mask.to_luma8(), path.as_ref())
}

/// `1 - v` per pixel; ink becomes high-valued.
pub fn invert<T: Scalar>(img: &Image<T>) -> Image<T> {
    Image::from_raw(
        img.height,
        img.width,
        img.data.iter().map(|&v| T::one() - v).collect(),
    )
}

const OTSU_BINS: usize = 256;

/// Otsu's threshold over a 256-bin histogram of `[0, 1]`.
///
/// Returns the boundary between the two classes, i.e. pixels `>= t` fall in
/// the upper class. When several splits share the maximal between-class
/// variance the middle one of the first tied run is chosen.
pub fn otsu_threshold<T: Scalar>(img: &Image<T>) -> Result<T> {
    let mut hist = [0u64; OTSU_BINS];
    for &v in &img.data {
        hist[histogram_bin(v.as_f64())] += 1;
    }
    if hist.iter().filter(|&&n| n > 0).count() < 2 {
        return Err(Error::DegenerateHistogram);
    }
    let total = img.data.len() as f64;
    let center = |i: usize| (i as f64 + 0.5) / OTSU_BINS as f64;
    let total_mass: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &n)| n as f64 * center(i))
        .sum();

    let mut variances = [f64::NEG_INFINITY; OTSU_BINS - 1];
    let (mut w0, mut mass0) = (0.0, 0.0);
    for k in 0..OTSU_BINS - 1 {
        w0 += hist[k] as f64;
        mass0 += hist[k] as f64 * center(k);
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = mass0 / w0;
        let m1 = (total_mass - mass0) / w1;
        variances[k] = w0 * w1 * (m0 - m1) * (m0 - m1) / (total * total);
    }
    let best = variances.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let first = variances.iter().position(|&v| v == best).unwrap();
    let last = first
        + variances[first..]
            .iter()
            .take_while(|&&v| v == best)
            .count()
        - 1;
    let k = (first + last) / 2;
    Ok(T::of((k + 1) as f64 / OTSU_BINS as f64))
}

fn histogram_bin(v: f64) -> usize {
    ((v * OTSU_BINS as f64).floor() as usize).min(OTSU_BINS - 1)
}

/// Foreground where `value >= threshold`; Otsu's method picks the threshold
/// when none is given.
pub fn binarize<T: Scalar>(img: &Image<T>, threshold: Option<T>) -> Result<BinaryImage> {
    let t = match threshold {
        Some(t) if t > T::zero() && t < T::one() => t,
        Some(t) => {
            return Err(Error::InvalidParameter(format!(
                "binarization threshold {t} must lie in (0, 1)"
            )))
        }
        None => otsu_threshold(img)?,
    };
    Ok(BinaryImage {
        height: img.height,
        width: img.width,
        data: img.data.iter().map(|&v| (v >= t) as u8).collect(),
    })
}

/// Carries a binary image as `0.0` / `1.0`.
pub fn to_gray<T: Scalar>(img: &BinaryImage) -> Image<T> {
    Image::from_raw(
        img.height,
        img.width,
        img.data
            .iter()
            .map(|&v| if v != 0 { T::one() } else { T::zero() })
            .collect(),
    )
}

/// Zhang–Suen thinning to a fixed point.
///
/// Each sub-iteration flags pixels against the state at its start, as in the
/// classic parallel formulation. Flagged pixels are then removed in raster
/// order, re-testing the sub-iteration conditions against the current state;
/// this keeps two-pixel-thick diagonals and 2x2 blocks from vanishing, so
/// every 8-connected component survives.
pub fn skeletonize(img: &BinaryImage) -> BinaryImage {
    let (h, w) = (img.height, img.width);
    let mut out = img.clone();
    let mut flagged = Vec::new();
    let mut foreground: Vec<usize> = (0..h * w).filter(|&i| img.data[i] != 0).collect();

    loop {
        let mut changed = false;
        for pass in 0..2 {
            flagged.clear();
            flagged.extend(
                foreground
                    .iter()
                    .copied()
                    .filter(|&i| out.data[i] != 0 && deletable(&out, i / w, i % w, pass)),
            );
            for &i in &flagged {
                if deletable(&out, i / w, i % w, pass) {
                    out.data[i] = 0;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
        foreground.retain(|&i| out.data[i] != 0);
    }
    out
}

/// Neighbours P2..P9 clockwise from north.
#[inline]
fn neighbours(img: &BinaryImage, r: usize, c: usize) -> [u8; 8] {
    let (h, w) = (img.height as isize, img.width as isize);
    let at = |dr: isize, dc: isize| {
        let (rr, cc) = (r as isize + dr, c as isize + dc);
        if rr < 0 || cc < 0 || rr >= h || cc >= w {
            0
        } else {
            img.data[(rr * w + cc) as usize]
        }
    };
    [
        at(-1, 0),
        at(-1, 1),
        at(0, 1),
        at(1, 1),
        at(1, 0),
        at(1, -1),
        at(0, -1),
        at(-1, -1),
    ]
}

#[inline]
fn deletable(img: &BinaryImage, r: usize, c: usize, pass: usize) -> bool {
    let p = neighbours(img, r, c);
    let b: u8 = p.iter().sum();
    if !(2..=6).contains(&b) {
        return false;
    }
    let a = (0..8).filter(|&i| p[i] == 0 && p[(i + 1) % 8] == 1).count();
    if a != 1 {
        return false;
    }
    let [p2, _, p4, _, p6, _, p8, _] = p;
    if pass == 0 {
        p2 * p4 * p6 == 0 && p4 * p6 * p8 == 0
    } else {
        p2 * p4 * p8 == 0 && p2 * p6 * p8 == 0
    }
}

/// Normalized Gaussian taps for offsets `-radius..=radius`, `radius = ceil(3 sigma)`.
pub fn gaussian_kernel<T: Scalar>(sigma: T) -> Result<Vec<T>> {
    if !(sigma > T::zero()) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "gaussian sigma must be positive, got {sigma}"
        )));
    }
    let radius = (T::of(3.0) * sigma).ceil().to_usize().unwrap_or(0);
    let two_var = T::of(2.0) * sigma * sigma;
    let mut taps: Vec<T> = (0..=2 * radius)
        .map(|i| {
            let k = T::of_usize(i) - T::of_usize(radius);
            (-(k * k) / two_var).exp()
        })
        .collect();
    let total: T = taps.iter().copied().sum();
    for t in &mut taps {
        *t /= total;
    }
    Ok(taps)
}

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`).
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period) as usize;
    if m < n {
        m
    } else {
        2 * n - 1 - m
    }
}

/// Separable 2-D Gaussian smoothing with reflected borders.
pub fn gaussian_blur<T: Scalar>(img: &Image<T>, sigma: T) -> Result<Image<T>> {
    let taps = gaussian_kernel(sigma)?;
    let radius = (taps.len() / 2) as isize;
    let (h, w) = (img.height, img.width);

    let mut horizontal = vec![T::zero(); h * w];
    let mut padded = vec![T::zero(); w + 2 * radius as usize];
    for r in 0..h {
        let src = img.row(r);
        for (j, p) in padded.iter_mut().enumerate() {
            *p = src[reflect(j as isize - radius, w)];
        }
        let dst = &mut horizontal[r * w..(r + 1) * w];
        for (k, &tap) in taps.iter().enumerate() {
            for (d, &s) in dst.iter_mut().zip(&padded[k..k + w]) {
                *d += tap * s;
            }
        }
    }

    let mut out = vec![T::zero(); h * w];
    for r in 0..h {
        let dst = &mut out[r * w..(r + 1) * w];
        for (k, &tap) in taps.iter().enumerate() {
            let sr = reflect(r as isize + k as isize - radius, h);
            for (d, &s) in dst.iter_mut().zip(&horizontal[sr * w..(sr + 1) * w]) {
                *d += tap * s;
            }
        }
        for d in dst.iter_mut() {
            *d = d.max(T::zero()).min(T::one());
        }
    }
    Ok(Image::from_raw(h, w, out))
}

/// Smoothing scale used when none is configured: `height / 150`.
pub fn default_sigma<T: Scalar>(height: usize) -> T {
    T::of_usize(height) / T::of(150.0)
}

/// Bilinear resampling with pixel-centre alignment.
pub fn resize_bilinear<T: Scalar>(img: &Image<T>, height: usize, width: usize) -> Result<Image<T>> {
    if height == 0 || width == 0 {
        return Err(Error::Dimensions { height, width });
    }
    if height == img.height && width == img.width {
        return Ok(img.clone());
    }
    let rows = sample_positions(img.height, height);
    let cols = sample_positions(img.width, width);
    let mut data = Vec::with_capacity(height * width);
    for &(r0, r1, fr) in &rows {
        let (top, bottom) = (img.row(r0), img.row(r1));
        for &(c0, c1, fc) in &cols {
            let t = top[c0] + (top[c1] - top[c0]) * fc;
            let b = bottom[c0] + (bottom[c1] - bottom[c0]) * fc;
            data.push((t + (b - t) * fr).max(T::zero()).min(T::one()));
        }
    }
    Ok(Image::from_raw(height, width, data))
}

fn sample_positions<T: Scalar>(src: usize, dst: usize) -> Vec<(usize, usize, T)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let x = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let x0 = x.floor() as usize;
            let x1 = (x0 + 1).min(src - 1);
            (x0, x1, T::of(x - x0 as f64))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn components(img: &BinaryImage) -> usize {
        let (h, w) = (img.height() as isize, img.width() as isize);
        let mut seen = vec![false; (h * w) as usize];
        let mut count = 0;
        for start in 0..(h * w) as usize {
            if img.data()[start] == 0 || seen[start] {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                let (r, c) = (i as isize / w, i as isize % w);
                for dr in -1..=1 {
                    for dc in -1..=1 {
                        let (rr, cc) = (r + dr, c + dc);
                        if rr < 0 || cc < 0 || rr >= h || cc >= w {
                            continue;
                        }
                        let j = (rr * w + cc) as usize;
                        if img.data()[j] != 0 && !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        count
    }

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(Image::<f64>::new(0, 3, vec![]).is_err());
        assert!(Image::<f64>::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Image::<f64>::new(1, 1, vec![1.5]).is_err());
        assert!(BinaryImage::new(1, 2, vec![0, 2]).is_err());
    }

    #[test]
    fn invert_examples() {
        let zeros = Image::<f64>::filled(3, 4, 0.0).unwrap();
        assert!(invert(&zeros).data().iter().all(|&v| v == 1.0));
        let q = Image::new(1, 1, vec![0.25f64]).unwrap();
        assert_eq!(invert(&q).data(), &[0.75]);
    }

    #[test]
    fn binarize_examples() {
        let blank = Image::<f64>::filled(4, 4, 0.0).unwrap();
        assert_eq!(binarize(&blank, Some(0.5)).unwrap().count_ones(), 0);
        let two = Image::new(1, 2, vec![0.2f64, 0.8]).unwrap();
        assert_eq!(binarize(&two, Some(0.5)).unwrap().data(), &[0, 1]);
        assert!(matches!(
            binarize(&blank, None),
            Err(Error::DegenerateHistogram)
        ));
        assert!(binarize(&two, Some(1.0)).is_err());
    }

    /// Exhaustive scan of every bin boundary for the maximal between-class variance.
    fn otsu_oracle(values: &[f64]) -> (f64, Vec<usize>) {
        let bins: Vec<usize> = values.iter().map(|&v| histogram_bin(v)).collect();
        let centre = |b: usize| (b as f64 + 0.5) / 256.0;
        let mut best = f64::NEG_INFINITY;
        let mut arg = Vec::new();
        for k in 0..255 {
            let lo: Vec<f64> = bins
                .iter()
                .filter(|&&b| b <= k)
                .map(|&b| centre(b))
                .collect();
            let hi: Vec<f64> = bins
                .iter()
                .filter(|&&b| b > k)
                .map(|&b| centre(b))
                .collect();
            if lo.is_empty() || hi.is_empty() {
                continue;
            }
            let n = values.len() as f64;
            let (w0, w1) = (lo.len() as f64 / n, hi.len() as f64 / n);
            let m0 = lo.iter().sum::<f64>() / lo.len() as f64;
            let m1 = hi.iter().sum::<f64>() / hi.len() as f64;
            let v = w0 * w1 * (m0 - m1).powi(2);
            if v > best + 1e-12 {
                best = v;
                arg = vec![k];
            } else if (v - best).abs() <= 1e-12 {
                arg.push(k);
            }
        }
        (best, arg)
    }

    #[test]
    fn otsu_splits_bimodal_histogram() {
        let values: Vec<f64> = (0..64)
            .map(|i| if i % 2 == 0 { 0.1 } else { 0.9 })
            .collect();
        let img = Image::new(8, 8, values.clone()).unwrap();
        let t = otsu_threshold(&img).unwrap();
        assert!(t > 0.1 && t < 0.9, "threshold {t}");
        let (_, args) = otsu_oracle(&values);
        let chosen_split = (t * 256.0).round() as usize - 1;
        assert!(args.contains(&chosen_split));
    }

    #[test]
    fn otsu_matches_exhaustive_scan_on_skewed_histogram() {
        let values: Vec<f64> = (0..100)
            .map(|i| match i % 10 {
                0..=5 => 0.15 + 0.01 * (i % 3) as f64,
                6..=7 => 0.55,
                _ => 0.95,
            })
            .collect();
        let img = Image::new(10, 10, values.clone()).unwrap();
        let t = otsu_threshold(&img).unwrap();
        let (_, args) = otsu_oracle(&values);
        let chosen_split = (t * 256.0).round() as usize - 1;
        assert!(
            args.contains(&chosen_split),
            "{chosen_split} not in {args:?}"
        );
    }

    #[test]
    fn skeleton_fixed_points() {
        let empty = BinaryImage::zeros(6, 6).unwrap();
        assert_eq!(skeletonize(&empty), empty);
        let line = BinaryImage::from_fn(5, 20, |r, c| r == 2 && (2..18).contains(&c)).unwrap();
        assert_eq!(skeletonize(&line), line);
    }

    #[test]
    fn skeleton_of_solid_rectangle() {
        let rect = BinaryImage::from_fn(9, 24, |r, c| (2..7).contains(&r) && (2..22).contains(&c))
            .unwrap();
        let skel = skeletonize(&rect);
        assert!(skel.count_ones() < rect.count_ones());
        assert!(skel.count_ones() > 0);
        assert_eq!(components(&skel), components(&rect));
        for i in 0..rect.data().len() {
            assert!(skel.data()[i] <= rect.data()[i]);
        }
    }

    #[test]
    fn skeleton_keeps_small_blocks() {
        let block =
            BinaryImage::from_fn(4, 4, |r, c| (1..3).contains(&r) && (1..3).contains(&c)).unwrap();
        let skel = skeletonize(&block);
        assert!(skel.count_ones() >= 1);
        assert_eq!(components(&skel), 1);
    }

    #[test]
    fn blur_rejects_non_positive_sigma() {
        let img = Image::<f64>::filled(4, 4, 0.5).unwrap();
        assert!(gaussian_blur(&img, 0.0).is_err());
        assert!(gaussian_blur(&img, -1.0).is_err());
    }

    #[test]
    fn blur_keeps_constant_image() {
        let img = Image::<f64>::filled(10, 13, 0.37).unwrap();
        let out = gaussian_blur(&img, 1.7).unwrap();
        assert!(out.data().iter().all(|&v| (v - 0.37).abs() < 1e-9));
    }

    /// Direct 2-D convolution with the outer-product kernel.
    fn dense_blur(img: &Image<f64>, sigma: f64) -> Vec<f64> {
        let radius = (3.0 * sigma).ceil() as isize;
        let g: Vec<f64> = (-radius..=radius)
            .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
            .collect();
        let norm: f64 = g.iter().sum();
        let (h, w) = (img.height(), img.width());
        let mut out = vec![0.0; h * w];
        for r in 0..h {
            for c in 0..w {
                let mut acc = 0.0;
                for dy in -radius..=radius {
                    for dx in -radius..=radius {
                        let rr = reflect(r as isize + dy, h);
                        let cc = reflect(c as isize + dx, w);
                        acc +=
                            g[(dy + radius) as usize] * g[(dx + radius) as usize] * img.get(rr, cc);
                    }
                }
                out[r * w + c] = acc / (norm * norm);
            }
        }
        out
    }

    #[test]
    fn blur_matches_dense_convolution_and_preserves_mass() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let img = Image::from_fn(32, 32, |_, _| rng.gen::<f64>()).unwrap();
        let out = gaussian_blur(&img, 2.0).unwrap();
        let dense = dense_blur(&img, 2.0);
        for (a, b) in out.data().iter().zip(&dense) {
            assert!((a - b).abs() < 1e-9);
        }
        let before: f64 = img.data().iter().sum();
        let after: f64 = out.data().iter().sum();
        assert!(((after - before) / before).abs() < 1e-6);
    }

    #[test]
    fn blur_impulse_peak() {
        let sigma = 1.5;
        let mut data = vec![0.0f64; 41 * 41];
        data[20 * 41 + 20] = 1.0;
        let img = Image::new(41, 41, data).unwrap();
        let out = gaussian_blur(&img, sigma).unwrap();
        let radius = (3.0f64 * sigma).ceil() as i32;
        let norm: f64 = (-radius..=radius)
            .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
            .sum();
        let peak = 1.0 / (norm * norm);
        assert!((out.get(20, 20) - peak).abs() < 1e-9);
        assert!((peak - 1.0 / (2.0 * std::f64::consts::PI * sigma * sigma)).abs() < 1e-3);
        assert!((out.get(20, 20) - dense_blur(&img, sigma)[20 * 41 + 20]).abs() < 1e-9);
    }

    #[test]
    fn to_gray_round_trip() {
        let b = BinaryImage::new(2, 3, vec![0, 1, 1, 0, 0, 1]).unwrap();
        let g: Image<f64> = to_gray(&b);
        assert_eq!((g.height(), g.width()), (2, 3));
        assert_eq!(g.data(), &[0.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
        assert_eq!(binarize(&g, Some(0.5)).unwrap(), b);
    }

    #[test]
    fn resize_identity_and_constant() {
        let img = Image::<f64>::from_fn(5, 7, |r, c| (r * 7 + c) as f64 / 35.0).unwrap();
        assert_eq!(resize_bilinear(&img, 5, 7).unwrap(), img);
        let flat = Image::<f32>::filled(9, 4, 0.25).unwrap();
        let up = resize_bilinear(&flat, 20, 11).unwrap();
        assert!(up.data().iter().all(|&v| (v - 0.25).abs() < 1e-6));
    }

    fn binary_strategy() -> impl Strategy<Value = BinaryImage> {
        (3usize..14, 3usize..14).prop_flat_map(|(h, w)| {
            proptest::collection::vec(prop::bool::weighted(0.45), h * w).prop_map(move |bits| {
                BinaryImage::new(h, w, bits.into_iter().map(|b| b as u8).collect()).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn invert_is_an_involution(values in proptest::collection::vec(0.0f64..=1.0, 1..64)) {
            let img = Image::new(1, values.len(), values).unwrap();
            let back = invert(&invert(&img));
            for (a, b) in back.data().iter().zip(img.data()) {
                prop_assert!((a - b).abs() <= f64::EPSILON);
            }
        }

        #[test]
        fn invert_is_exact_on_dyadic_values(ks in proptest::collection::vec(0u32..=65536, 1..64)) {
            let values: Vec<f64> = ks.iter().map(|&k| k as f64 / 65536.0).collect();
            let img = Image::new(1, values.len(), values).unwrap();
            let back = invert(&invert(&img));
            prop_assert_eq!(back.data(), img.data());
        }

        #[test]
        fn skeleton_is_idempotent_subset_and_connected(img in binary_strategy()) {
            let skel = skeletonize(&img);
            prop_assert_eq!(skeletonize(&skel), skel.clone());
            for i in 0..img.data().len() {
                prop_assert!(skel.data()[i] <= img.data()[i]);
            }
            prop_assert_eq!(components(&skel), components(&img));
        }

        #[test]
        fn blur_stays_in_unit_range(values in proptest::collection::vec(0.0f64..=1.0, 36), sigma in 0.3f64..4.0) {
            let img = Image::new(6, 6, values).unwrap();
            let out = gaussian_blur(&img, sigma).unwrap();
            prop_assert!(out.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }

        #[test]
        fn raising_threshold_never_adds_foreground(
            values in proptest::collection::vec(0.0f64..=1.0, 30),
            t1 in 0.01f64..0.99,
            t2 in 0.01f64..0.99,
        ) {
            let img = Image::new(5, 6, values).unwrap();
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let a = binarize(&img, Some(lo)).unwrap();
            let b = binarize(&img, Some(hi)).unwrap();
            for i in 0..30 {
                prop_assert!(b.data()[i] <= a.data()[i]);
            }
        }
    }
}
