//! Image similarity metrics, instance matching and GLI analysis.

mod gli;
mod instances;

pub use gli::{gli_image, gli_profiles, segment_cells, GliConfig, GliProfile};
pub use instances::{
    apply_shrinkage, f1_by_size_bins, match_instances, match_pairs, AreaBin, BinResult,
    InstanceMask, MatchOptions, MatchResult, MatchedPair,
};

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::image::{gaussian_kernel, BinaryMask, ImageBuffer};
use crate::numeric::{pairwise_mean, pairwise_sum};

pub const DEFAULT_MI_BINS: usize = 64;

fn check_pair(a: &ImageBuffer, b: &ImageBuffer, mask: &BinaryMask) -> Result<()> {
    if a.shape() != b.shape() || a.channels() != b.channels() {
        return Err(dim_err!(
            "images differ: {:?}x{} vs {:?}x{}",
            a.shape(),
            a.channels(),
            b.shape(),
            b.channels()
        ));
    }
    if mask.shape() != a.shape() {
        return Err(dim_err!("mask {:?} does not match image {:?}", mask.shape(), a.shape()));
    }
    if mask.count() == 0 {
        return Err(Error::DegenerateInput("empty evaluation mask".into()));
    }
    Ok(())
}

/// Masked root-mean-square difference per channel, averaged over channels.
pub fn rmse(a: &ImageBuffer, b: &ImageBuffer, mask: &BinaryMask) -> Result<f64> {
    check_pair(a, b, mask)?;
    let per_channel: Vec<f64> = (0..a.channels())
        .map(|c| {
            let sq: Vec<f64> = a
                .plane(c)
                .iter()
                .zip(b.plane(c))
                .zip(mask.data())
                .filter(|(_, &m)| m)
                .map(|((x, y), _)| (x - y).powi(2))
                .collect();
            pairwise_mean(&sq).sqrt()
        })
        .collect();
    Ok(pairwise_mean(&per_channel))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    /// Float rasters in `[0, 1]`.
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl SsimParams {
    pub fn eight_bit() -> Self {
        Self {
            dynamic_range: 255.0,
            ..Self::default()
        }
    }
}

/// Gaussian-weighted sums over every window that fits entirely inside the
/// image; output is `(h - k + 1) x (w - k + 1)`.
fn valid_filter(plane: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        let src = &plane[r * w..(r + 1) * w];
        for c in 0..ow {
            rows[r * ow + c] = taps.iter().zip(&src[c..c + k]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for (t_idx, t) in taps.iter().enumerate() {
            let src = &rows[(r + t_idx) * ow..(r + t_idx + 1) * ow];
            for (o, v) in out[r * ow..(r + 1) * ow].iter_mut().zip(src) {
                *o += t * v;
            }
        }
    }
    out
}

/// Local SSIM map over interior window centers of one plane.
fn ssim_plane(a: &[f64], b: &[f64], h: usize, w: usize, p: &SsimParams) -> Vec<f64> {
    let taps = gaussian_kernel(p.sigma, p.window);
    let prod = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
        a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
    };
    let mx = valid_filter(a, h, w, &taps);
    let my = valid_filter(b, h, w, &taps);
    let mxx = valid_filter(&prod(&|x, _| x * x), h, w, &taps);
    let myy = valid_filter(&prod(&|_, y| y * y), h, w, &taps);
    let mxy = valid_filter(&prod(&|x, y| x * y), h, w, &taps);
    let c1 = (p.k1 * p.dynamic_range).powi(2);
    let c2 = (p.k2 * p.dynamic_range).powi(2);
    (0..mx.len())
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = mxx[i] - ux * ux;
            let vy = myy[i] - uy * uy;
            let vxy = mxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * vxy + c2))
                / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .collect()
}

/// Mean local SSIM over window centers that lie in `mask` and whose window
/// fits inside the image. Multi-channel inputs average the per-channel means.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer, mask: &BinaryMask, p: &SsimParams) -> Result<f64> {
    check_pair(a, b, mask)?;
    if !(p.dynamic_range > 0.0) || !(p.sigma > 0.0) || p.window % 2 == 0 {
        return Err(Error::Parameter(format!(
            "invalid SSIM parameters: window {}, sigma {}, range {}",
            p.window, p.sigma, p.dynamic_range
        )));
    }
    let (h, w) = a.shape();
    if h < p.window || w < p.window {
        return Err(dim_err!("{h}x{w} image smaller than the {} px SSIM window", p.window));
    }
    let r = p.window / 2;
    let ow = w - p.window + 1;
    let centers: Vec<usize> = (0..(h - p.window + 1) * ow)
        .filter(|&i| mask.get(i / ow + r, i % ow + r))
        .collect();
    if centers.is_empty() {
        return Err(Error::DegenerateInput("no SSIM window center inside the mask".into()));
    }
    let per_channel: Vec<f64> = (0..a.channels())
        .map(|c| {
            let map = ssim_plane(a.plane(c), b.plane(c), h, w, p);
            let vals: Vec<f64> = centers.iter().map(|&i| map[i]).collect();
            pairwise_mean(&vals)
        })
        .collect();
    Ok(pairwise_mean(&per_channel))
}

fn bin_indices(values: &[f64], bins: usize) -> Vec<usize> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    values
        .iter()
        .map(|&v| {
            if span > 0.0 {
                (((v - lo) / span * bins as f64) as usize).min(bins - 1)
            } else {
                0
            }
        })
        .collect()
}

/// Mutual information (nats) of the joint histogram of masked pixels. Each
/// image is binned uniformly over its own masked value range. Multi-channel
/// inputs are converted to luminance first.
pub fn mutual_information(
    a: &ImageBuffer,
    b: &ImageBuffer,
    bins: usize,
    mask: &BinaryMask,
) -> Result<f64> {
    check_pair(a, b, mask)?;
    if bins < 2 {
        return Err(Error::Parameter(format!("need at least 2 bins, got {bins}")));
    }
    let (ga, gb) = (a.to_gray(), b.to_gray());
    let pick = |img: &ImageBuffer| -> Vec<f64> {
        img.data()
            .iter()
            .zip(mask.data())
            .filter(|(_, &m)| m)
            .map(|(v, _)| *v)
            .collect()
    };
    let ia = bin_indices(&pick(&ga), bins);
    let ib = bin_indices(&pick(&gb), bins);
    let n = ia.len() as f64;
    let mut joint = vec![0u64; bins * bins];
    let mut pa = vec![0u64; bins];
    let mut pb = vec![0u64; bins];
    for (&x, &y) in ia.iter().zip(&ib) {
        joint[x * bins + y] += 1;
        pa[x] += 1;
        pb[y] += 1;
    }
    let terms: Vec<f64> = joint
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(k, &c)| {
            let pxy = c as f64 / n;
            let px = pa[k / bins] as f64 / n;
            let py = pb[k % bins] as f64 / n;
            pxy * (pxy / (px * py)).ln()
        })
        .collect();
    Ok(pairwise_sum(&terms).max(0.0))
}
