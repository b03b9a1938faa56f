//! Raster containers and deterministic raster primitives.
//!
//! Multi-channel buffers are stored planar: channel `c` occupies
//! `data[c * h * w..(c + 1) * h * w]`, each plane row-major. Every operation
//! here is a pure function of its inputs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{dim_err, param_err, Error, Result};

/// Default sampling pitch of the PLI scans, micrometers per pixel.
pub const DEFAULT_PIXEL_PITCH: f64 = 1.3;

/// Fractional sampling offsets closer than this to an integer are snapped,
/// so axis-aligned rotations resample without interpolation.
const SNAP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
    pixel_pitch: f64,
}

impl ImageBuffer {
    /// Single-channel image from row-major data.
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        Self::with_channels(height, width, 1, data)
    }

    /// Planar multi-channel image.
    pub fn with_channels(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(dim_err!(
                "image dimensions must be positive, got {height}x{width}x{channels}"
            ));
        }
        if data.len() != height * width * channels {
            return Err(dim_err!(
                "data length {} does not match {height}x{width}x{channels}",
                data.len()
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("image contains non-finite values".into()));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
            pixel_pitch: DEFAULT_PIXEL_PITCH,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "image dimensions must be positive");
        Self {
            height,
            width,
            channels: 1,
            data: vec![value; height * width],
            pixel_pitch: DEFAULT_PIXEL_PITCH,
        }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut img = Self::zeros(height, width);
        for r in 0..height {
            for c in 0..width {
                img.data[r * width + c] = f(r, c);
            }
        }
        img
    }

    /// Stacks equally sized single-channel planes into one planar image.
    pub fn from_planes(planes: &[ImageBuffer]) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| dim_err!("cannot stack zero planes"))?;
        let mut data = Vec::with_capacity(first.plane_len() * planes.len());
        let mut channels = 0;
        for p in planes {
            if p.height != first.height || p.width != first.width {
                return Err(dim_err!(
                    "plane shape {}x{} differs from {}x{}",
                    p.height,
                    p.width,
                    first.height,
                    first.width
                ));
            }
            data.extend_from_slice(&p.data);
            channels += p.channels;
        }
        let mut out = Self::with_channels(first.height, first.width, channels, data)?;
        out.pixel_pitch = first.pixel_pitch;
        Ok(out)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn pixel_pitch(&self) -> f64 {
        self.pixel_pitch
    }

    pub fn with_pixel_pitch(mut self, pitch: f64) -> Self {
        self.pixel_pitch = pitch;
        self
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn plane_mut(&mut self, channel: usize) -> &mut [f64] {
        let n = self.plane_len();
        &mut self.data[channel * n..(channel + 1) * n]
    }

    /// Copy of one channel as a single-channel image.
    pub fn channel(&self, channel: usize) -> ImageBuffer {
        Self {
            height: self.height,
            width: self.width,
            channels: 1,
            data: self.plane(channel).to_vec(),
            pixel_pitch: self.pixel_pitch,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn get_c(&self, channel: usize, row: usize, col: usize) -> f64 {
        self.data[channel * self.plane_len() + row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImageBuffer {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v = f(*v));
        out
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Luminance (Rec. 601 weights) for 3-channel input, channel mean otherwise.
    pub fn to_gray(&self) -> ImageBuffer {
        match self.channels {
            1 => self.clone(),
            3 => {
                let (r, g, b) = (self.plane(0), self.plane(1), self.plane(2));
                let data = (0..self.plane_len())
                    .map(|i| 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i])
                    .collect();
                self.same_geometry(1, data)
            }
            n => {
                let data = (0..self.plane_len())
                    .map(|i| (0..n).map(|c| self.plane(c)[i]).sum::<f64>() / n as f64)
                    .collect();
                self.same_geometry(1, data)
            }
        }
    }

    fn same_geometry(&self, channels: usize, data: Vec<f64>) -> ImageBuffer {
        Self {
            height: self.height,
            width: self.width,
            channels,
            data,
            pixel_pitch: self.pixel_pitch,
        }
    }

    fn with_shape(&self, height: usize, width: usize, data: Vec<f64>) -> ImageBuffer {
        Self {
            height,
            width,
            channels: self.channels,
            data,
            pixel_pitch: self.pixel_pitch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(dim_err!("mask dimensions must be positive"));
        }
        if data.len() != height * width {
            return Err(dim_err!(
                "mask length {} does not match {height}x{width}",
                data.len()
            ));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// All-ones mask.
    pub fn full(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![true; height * width],
        }
    }

    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![false; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.width + col] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn all(&self) -> bool {
        self.data.iter().all(|&b| b)
    }

    pub fn and(&self, other: &BinaryMask) -> Result<BinaryMask> {
        if self.shape() != other.shape() {
            return Err(dim_err!("mask shapes differ"));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| *a && *b).collect();
        Ok(Self {
            height: self.height,
            width: self.width,
            data,
        })
    }

    pub fn to_image(&self) -> ImageBuffer {
        let data = self.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        ImageBuffer {
            height: self.height,
            width: self.width,
            channels: 1,
            data,
            pixel_pitch: DEFAULT_PIXEL_PITCH,
        }
    }
}

/// Places `img` at the top-left of a zero raster of the target shape.
pub fn zero_pad(
    img: &ImageBuffer,
    target_h: usize,
    target_w: usize,
) -> Result<(ImageBuffer, BinaryMask)> {
    if target_h < img.height || target_w < img.width {
        return Err(dim_err!(
            "pad target {target_h}x{target_w} smaller than source {}x{}",
            img.height,
            img.width
        ));
    }
    let padded = embed(img, target_h, target_w, 0, 0)?;
    let mut mask = BinaryMask::empty(target_h, target_w);
    for r in 0..img.height {
        for c in 0..img.width {
            mask.set(r, c, true);
        }
    }
    Ok((padded, mask))
}

/// Writes `img` into a zero raster of shape `h x w` with its origin at `(top, left)`.
pub fn embed(img: &ImageBuffer, h: usize, w: usize, top: usize, left: usize) -> Result<ImageBuffer> {
    if top + img.height > h || left + img.width > w {
        return Err(dim_err!(
            "{}x{} image at ({top},{left}) does not fit in {h}x{w}",
            img.height,
            img.width
        ));
    }
    let mut data = vec![0.0; h * w * img.channels];
    for c in 0..img.channels {
        let src = img.plane(c);
        let dst = &mut data[c * h * w..(c + 1) * h * w];
        for r in 0..img.height {
            let s = &src[r * img.width..(r + 1) * img.width];
            dst[(top + r) * w + left..(top + r) * w + left + img.width].copy_from_slice(s);
        }
    }
    Ok(img.with_shape(h, w, data))
}

pub fn embed_mask(
    mask: &BinaryMask,
    h: usize,
    w: usize,
    top: usize,
    left: usize,
) -> Result<BinaryMask> {
    if top + mask.height > h || left + mask.width > w {
        return Err(dim_err!("mask does not fit in {h}x{w}"));
    }
    let mut out = BinaryMask::empty(h, w);
    for r in 0..mask.height {
        for c in 0..mask.width {
            out.set(top + r, left + c, mask.get(r, c));
        }
    }
    Ok(out)
}

fn hann_1d(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|k| {
            let s = (std::f64::consts::PI * k as f64 / (n - 1) as f64).sin();
            s * s
        })
        .collect()
}

/// Separable 2D Hann window, `sin²(πk/(N−1))` per axis.
pub fn hann_window(h: usize, w: usize) -> Result<ImageBuffer> {
    if h == 0 || w == 0 {
        return Err(dim_err!("window dimensions must be positive"));
    }
    let (wr, wc) = (hann_1d(h), hann_1d(w));
    Ok(ImageBuffer::from_fn(h, w, |r, c| wr[r] * wc[c]))
}

/// Rotation about the image center with bilinear interpolation.
///
/// Positive angles rotate counter-clockwise as displayed (rows pointing
/// down), so `90°` matches a quarter turn that moves the right edge to the
/// top. The returned mask is set where all contributing neighbors were inside
/// the source; every other pixel receives `fill`.
pub fn rotate_bilinear(img: &ImageBuffer, angle_deg: f64, fill: f64) -> (ImageBuffer, BinaryMask) {
    rotate_bilinear_masked(img, None, angle_deg, fill)
}

/// As [`rotate_bilinear`], additionally requiring every contributing source
/// pixel to be set in `mask`.
pub fn rotate_bilinear_masked(
    img: &ImageBuffer,
    mask: Option<&BinaryMask>,
    angle_deg: f64,
    fill: f64,
) -> (ImageBuffer, BinaryMask) {
    let (h, w) = img.shape();
    let theta = angle_deg.to_radians();
    let (sin, cos) = theta.sin_cos();
    let cr = (h as f64 - 1.0) / 2.0;
    let cc = (w as f64 - 1.0) / 2.0;
    let n = h * w;
    let mut data = vec![fill; n * img.channels];
    let mut out_mask = BinaryMask::empty(h, w);

    let src_ok = |r: isize, c: isize| -> bool {
        r >= 0
            && c >= 0
            && (r as usize) < h
            && (c as usize) < w
            && mask.is_none_or(|m| m.get(r as usize, c as usize))
    };

    for r in 0..h {
        let dr = r as f64 - cr;
        for c in 0..w {
            let dc = c as f64 - cc;
            let mut sr = cr + cos * dr + sin * dc;
            let mut sc = cc - sin * dr + cos * dc;
            if (sr - sr.round()).abs() < SNAP_EPS {
                sr = sr.round();
            }
            if (sc - sc.round()).abs() < SNAP_EPS {
                sc = sc.round();
            }
            let r0 = sr.floor();
            let c0 = sc.floor();
            let fr = sr - r0;
            let fc = sc - c0;
            let (r0, c0) = (r0 as isize, c0 as isize);
            let needs_r1 = fr > 0.0;
            let needs_c1 = fc > 0.0;
            let ok = src_ok(r0, c0)
                && (!needs_r1 || src_ok(r0 + 1, c0))
                && (!needs_c1 || src_ok(r0, c0 + 1))
                && (!(needs_r1 && needs_c1) || src_ok(r0 + 1, c0 + 1));
            if !ok {
                continue;
            }
            out_mask.set(r, c, true);
            let (r0, c0) = (r0 as usize, c0 as usize);
            let r1 = if needs_r1 { r0 + 1 } else { r0 };
            let c1 = if needs_c1 { c0 + 1 } else { c0 };
            for ch in 0..img.channels {
                let p = img.plane(ch);
                let v00 = p[r0 * w + c0];
                let v = if !needs_r1 && !needs_c1 {
                    v00
                } else {
                    let v01 = p[r0 * w + c1];
                    let v10 = p[r1 * w + c0];
                    let v11 = p[r1 * w + c1];
                    (1.0 - fr) * ((1.0 - fc) * v00 + fc * v01) + fr * ((1.0 - fc) * v10 + fc * v11)
                };
                data[ch * n + r * w + c] = v;
            }
        }
    }
    (img.with_shape(h, w, data), out_mask)
}

/// Index into a signal of length `n` under half-sample symmetric reflection
/// (`d c b a | a b c d`), periodic with `2n`.
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// Normalized discrete Gaussian taps for offsets `-r..=r`.
pub fn gaussian_kernel(sigma: f64, kernel_size: usize) -> Vec<f64> {
    let r = (kernel_size / 2) as isize;
    let mut taps: Vec<f64> = (-r..=r)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    taps
}

fn convolve_rows(plane: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let r = (taps.len() / 2) as isize;
    let mut out = vec![0.0; h * w];
    for row in 0..h {
        let src = &plane[row * w..(row + 1) * w];
        for c in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                acc += t * src[reflect_index(c as isize + k as isize - r, w)];
            }
            out[row * w + c] = acc;
        }
    }
    out
}

fn convolve_cols(plane: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let r = (taps.len() / 2) as isize;
    let mut out = vec![0.0; h * w];
    for (k, t) in taps.iter().enumerate() {
        for row in 0..h {
            let src_row = reflect_index(row as isize + k as isize - r, h);
            let src = &plane[src_row * w..(src_row + 1) * w];
            let dst = &mut out[row * w..(row + 1) * w];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += t * s;
            }
        }
    }
    out
}

/// Separable Gaussian blur with reflected borders.
pub fn gaussian_blur(img: &ImageBuffer, sigma: f64, kernel_size: usize) -> Result<ImageBuffer> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(param_err!("sigma must be finite and >= 0, got {sigma}"));
    }
    if kernel_size % 2 == 0 {
        return Err(param_err!("kernel size must be odd, got {kernel_size}"));
    }
    if sigma == 0.0 || kernel_size == 1 {
        return Ok(img.clone());
    }
    let taps = gaussian_kernel(sigma, kernel_size);
    let (h, w) = img.shape();
    let mut out = img.clone();
    for ch in 0..img.channels {
        let tmp = convolve_rows(img.plane(ch), h, w, &taps);
        let res = convolve_cols(&tmp, h, w, &taps);
        out.plane_mut(ch).copy_from_slice(&res);
    }
    Ok(out)
}

/// Additive i.i.d. zero-mean Gaussian noise, deterministic per seed.
///
/// Values are clipped to `clip` when given; no clipping otherwise.
pub fn add_gaussian_noise(
    img: &ImageBuffer,
    sigma: f64,
    seed: u64,
    clip: Option<(f64, f64)>,
) -> Result<ImageBuffer> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(param_err!("noise sigma must be finite and >= 0, got {sigma}"));
    }
    let mut out = img.clone();
    if sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma).map_err(|e| param_err!("{e}"))?;
        for v in out.data.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    if let Some((lo, hi)) = clip {
        out.data.iter_mut().for_each(|v| *v = v.clamp(lo, hi));
    }
    Ok(out)
}

pub fn crop(img: &ImageBuffer, top: usize, left: usize, h: usize, w: usize) -> Result<ImageBuffer> {
    if h == 0 || w == 0 || top + h > img.height || left + w > img.width {
        return Err(dim_err!(
            "crop window ({top},{left}) {h}x{w} outside {}x{} image",
            img.height,
            img.width
        ));
    }
    let mut data = Vec::with_capacity(h * w * img.channels);
    for c in 0..img.channels {
        let p = img.plane(c);
        for r in top..top + h {
            data.extend_from_slice(&p[r * img.width + left..r * img.width + left + w]);
        }
    }
    Ok(img.with_shape(h, w, data))
}

pub fn crop_mask(mask: &BinaryMask, top: usize, left: usize, h: usize, w: usize) -> Result<BinaryMask> {
    if top + h > mask.height || left + w > mask.width {
        return Err(dim_err!("crop window outside mask"));
    }
    let mut out = BinaryMask::empty(h, w);
    for r in 0..h {
        for c in 0..w {
            out.set(r, c, mask.get(top + r, left + c));
        }
    }
    Ok(out)
}

/// Block-mean downscaling. Trailing rows/columns that do not fill a whole
/// block are dropped.
pub fn downscale_mean(img: &ImageBuffer, factor: usize) -> Result<ImageBuffer> {
    if factor == 0 {
        return Err(param_err!("downscale factor must be >= 1"));
    }
    if factor == 1 {
        return Ok(img.clone());
    }
    let (oh, ow) = (img.height / factor, img.width / factor);
    if oh == 0 || ow == 0 {
        return Err(dim_err!(
            "{}x{} image smaller than one {factor}x{factor} block",
            img.height,
            img.width
        ));
    }
    let area = (factor * factor) as f64;
    let mut data = Vec::with_capacity(oh * ow * img.channels);
    for ch in 0..img.channels {
        let p = img.plane(ch);
        for br in 0..oh {
            for bc in 0..ow {
                let mut acc = 0.0;
                for r in br * factor..(br + 1) * factor {
                    acc += p[r * img.width + bc * factor..r * img.width + (bc + 1) * factor]
                        .iter()
                        .sum::<f64>();
                }
                data.push(acc / area);
            }
        }
    }
    Ok(img.with_shape(oh, ow, data))
}

/// Mirror left-right.
pub fn flip_horizontal(img: &ImageBuffer) -> ImageBuffer {
    let (h, w) = img.shape();
    let mut out = img.clone();
    for ch in 0..img.channels {
        let src = img.plane(ch);
        let dst = out.plane_mut(ch);
        for r in 0..h {
            for c in 0..w {
                dst[r * w + c] = src[r * w + (w - 1 - c)];
            }
        }
    }
    out
}

/// Mirror top-bottom.
pub fn flip_vertical(img: &ImageBuffer) -> ImageBuffer {
    let (h, w) = img.shape();
    let mut out = img.clone();
    for ch in 0..img.channels {
        let src = img.plane(ch);
        let dst = out.plane_mut(ch);
        for r in 0..h {
            dst[r * w..(r + 1) * w].copy_from_slice(&src[(h - 1 - r) * w..(h - r) * w]);
        }
    }
    out
}
