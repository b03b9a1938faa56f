//! Polarized-light signal model: sinusoid synthesis, harmonic fitting,
//! triplet encoding and direction-aware geometric transforms.
//!
//! Parameter rasters are 3-channel [`ImageBuffer`]s holding transmittance,
//! retardation (`sin δ`) and direction (`φ`, radians in `[0, π)`), in that
//! channel order. Directions are measured counter-clockwise as displayed
//! (rows pointing down), matching [`rotate_bilinear`].

use std::f64::consts::PI;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::image::{flip_horizontal, flip_vertical, rotate_bilinear, BinaryMask, ImageBuffer};

/// Below this retardation the direction is not defined.
pub const DIRECTION_EPS: f64 = 1e-6;
pub const DEFAULT_ANGLE_COUNT: usize = 9;

const EQUIDISTANT_TOL: f64 = 1e-9;
const CLAMP_TOL: f64 = 1e-9;

pub const TRANSMITTANCE: usize = 0;
pub const RETARDATION: usize = 1;
pub const DIRECTION: usize = 2;

/// Maps an angle into `[0, π)`.
pub fn wrap_pi(x: f64) -> f64 {
    let r = x.rem_euclid(PI);
    // rem_euclid can round up to exactly π
    if r >= PI {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PliParams {
    pub transmittance: f64,
    pub retardation: f64,
    pub direction: f64,
}

impl PliParams {
    pub fn new(transmittance: f64, retardation: f64, direction: f64) -> Result<Self> {
        let p = Self {
            transmittance,
            retardation,
            direction,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.transmittance >= 0.0 && self.transmittance.is_finite()) {
            return Err(Error::Parameter(format!(
                "transmittance {} must be finite and >= 0",
                self.transmittance
            )));
        }
        if !(0.0..=1.0).contains(&self.retardation) {
            return Err(Error::Parameter(format!(
                "retardation {} outside [0, 1]",
                self.retardation
            )));
        }
        if !(0.0..PI).contains(&self.direction) {
            return Err(Error::Parameter(format!(
                "direction {} outside [0, pi)",
                self.direction
            )));
        }
        Ok(())
    }

    pub fn direction_defined(&self) -> bool {
        self.retardation >= DIRECTION_EPS
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PliSeries {
    pub angles: Vec<f64>,
    pub intensities: Vec<f64>,
}

/// `n` equidistant polarizer angles `kπ/n` covering half a turn.
pub fn equidistant_angles(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 * PI / n as f64).collect()
}

pub fn default_angles() -> Vec<f64> {
    equidistant_angles(DEFAULT_ANGLE_COUNT)
}

fn intensity(p: &PliParams, rho: f64) -> f64 {
    0.5 * p.transmittance * (1.0 + (2.0 * rho - 2.0 * p.direction).sin() * p.retardation)
}

/// `I_ρ = (I_T / 2)(1 + sin(2ρ − 2φ) sin δ)` at every angle.
pub fn synthesize_series(p: &PliParams, angles: &[f64]) -> PliSeries {
    PliSeries {
        angles: angles.to_vec(),
        intensities: angles.iter().map(|&rho| intensity(p, rho)).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PliFit {
    pub params: PliParams,
    /// Retardation too small for a meaningful direction; `direction` is 0.
    pub direction_undefined: bool,
    /// The fitted amplitude exceeded the model bound and was clamped to 1.
    pub retardation_clamped: bool,
}

/// Checks that `angles` are `a0 + kπ/n` for `k = 0..n`, `n >= 3`.
pub fn check_angles(angles: &[f64]) -> Result<()> {
    let n = angles.len();
    if n < 3 {
        return Err(Error::Parameter(format!("need at least 3 angles, got {n}")));
    }
    let step = PI / n as f64;
    for (k, &a) in angles.iter().enumerate() {
        if (a - angles[0] - k as f64 * step).abs() > EQUIDISTANT_TOL {
            return Err(Error::Parameter(format!(
                "angle {k} = {a} is not equidistant over half a turn"
            )));
        }
    }
    Ok(())
}

/// Harmonic coefficients of the second polarizer harmonic plus the mean.
fn harmonics(angles: &[f64], intensities: &[f64]) -> (f64, f64, f64) {
    let n = angles.len() as f64;
    let mut mean = 0.0;
    let mut a_sin = 0.0;
    let mut a_cos = 0.0;
    for (&rho, &v) in angles.iter().zip(intensities) {
        let (s, c) = (2.0 * rho).sin_cos();
        mean += v;
        a_sin += v * s;
        a_cos += v * c;
    }
    (mean / n, 2.0 * a_sin / n, 2.0 * a_cos / n)
}

fn fit_harmonics(mean: f64, a_sin: f64, a_cos: f64) -> Result<PliFit> {
    let transmittance = 2.0 * mean;
    if !(transmittance > 0.0) {
        return Err(Error::DegenerateInput(format!(
            "transmittance {transmittance} leaves retardation undefined"
        )));
    }
    let mut retardation = 2.0 * a_sin.hypot(a_cos) / transmittance;
    // rounding alone can push a noiseless fit marginally past 1
    let retardation_clamped = retardation > 1.0 + CLAMP_TOL;
    retardation = retardation.min(1.0);
    let direction_undefined = retardation < DIRECTION_EPS;
    let direction = if direction_undefined {
        0.0
    } else {
        wrap_pi(0.5 * (-a_cos).atan2(a_sin))
    };
    Ok(PliFit {
        params: PliParams {
            transmittance,
            retardation,
            direction,
        },
        direction_undefined,
        retardation_clamped,
    })
}

pub fn fit_params(s: &PliSeries) -> Result<PliFit> {
    if s.angles.len() != s.intensities.len() {
        return Err(dim_err!(
            "{} angles but {} intensities",
            s.angles.len(),
            s.intensities.len()
        ));
    }
    check_angles(&s.angles)?;
    let (mean, a_sin, a_cos) = harmonics(&s.angles, &s.intensities);
    let fit = fit_harmonics(mean, a_sin, a_cos)?;
    if fit.retardation_clamped {
        warn!("fitted retardation exceeds 1, clamped");
    }
    Ok(fit)
}

/// `(I_T, sin δ cos 2φ, sin δ sin 2φ)`.
pub fn to_triplet(p: &PliParams) -> [f64; 3] {
    let (s, c) = (2.0 * p.direction).sin_cos();
    [p.transmittance, p.retardation * c, p.retardation * s]
}

pub fn from_triplet(t: [f64; 3]) -> PliParams {
    let retardation = t[1].hypot(t[2]);
    let direction = if retardation > 0.0 {
        wrap_pi(0.5 * t[2].atan2(t[1]))
    } else {
        0.0
    };
    PliParams {
        transmittance: t[0],
        retardation,
        direction,
    }
}

fn require_maps(maps: &ImageBuffer) -> Result<()> {
    if maps.channels() != 3 {
        return Err(dim_err!(
            "parameter raster needs 3 channels, got {}",
            maps.channels()
        ));
    }
    Ok(())
}

fn map_pixels(maps: &ImageBuffer, f: impl Fn(PliParams) -> PliParams) -> Result<ImageBuffer> {
    require_maps(maps)?;
    let mut out = maps.clone();
    let n = maps.height() * maps.width();
    let mut data = out.data().to_vec();
    for i in 0..n {
        let p = f(PliParams {
            transmittance: data[i],
            retardation: data[n + i],
            direction: data[2 * n + i],
        });
        data[i] = p.transmittance;
        data[n + i] = p.retardation;
        data[2 * n + i] = p.direction;
    }
    out.data_mut().copy_from_slice(&data);
    Ok(out)
}

/// Parameter raster from one image per polarizer angle.
pub fn fit_stack(images: &[ImageBuffer], angles: &[f64]) -> Result<(ImageBuffer, BinaryMask)> {
    if images.len() != angles.len() {
        return Err(dim_err!("{} images for {} angles", images.len(), angles.len()));
    }
    check_angles(angles)?;
    let (h, w) = images[0].shape();
    if images.iter().any(|im| im.shape() != (h, w) || im.channels() != 1) {
        return Err(dim_err!("polarizer images must be single-channel {h}x{w}"));
    }
    let n = h * w;
    let mut data = vec![0.0; 3 * n];
    let mut defined = BinaryMask::full(h, w);
    let mut clamped = 0usize;
    let mut series = vec![0.0; angles.len()];
    for i in 0..n {
        for (s, im) in series.iter_mut().zip(images) {
            *s = im.data()[i];
        }
        let (mean, a_sin, a_cos) = harmonics(angles, &series);
        let fit = fit_harmonics(mean, a_sin, a_cos)
            .map_err(|e| Error::DegenerateInput(format!("pixel ({}, {}): {e}", i / w, i % w)))?;
        data[i] = fit.params.transmittance;
        data[n + i] = fit.params.retardation;
        data[2 * n + i] = fit.params.direction;
        if fit.direction_undefined {
            defined.set(i / w, i % w, false);
        }
        clamped += fit.retardation_clamped as usize;
    }
    if clamped > 0 {
        warn!("retardation clamped at {clamped} pixels");
    }
    let out = ImageBuffer::with_channels(h, w, 3, data)?.with_pixel_pitch(images[0].pixel_pitch());
    Ok((out, defined))
}

/// One intensity image per polarizer angle.
pub fn synthesize_stack(maps: &ImageBuffer, angles: &[f64]) -> Result<Vec<ImageBuffer>> {
    require_maps(maps)?;
    let (h, w) = maps.shape();
    let n = h * w;
    let d = maps.data();
    angles
        .iter()
        .map(|&rho| {
            let plane = (0..n)
                .map(|i| {
                    let p = PliParams {
                        transmittance: d[i],
                        retardation: d[n + i],
                        direction: d[2 * n + i],
                    };
                    intensity(&p, rho)
                })
                .collect();
            Ok(ImageBuffer::new(h, w, plane)?.with_pixel_pitch(maps.pixel_pitch()))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionOp {
    /// Degrees, counter-clockwise as displayed.
    Rotate(f64),
    FlipH,
    FlipV,
}

impl DirectionOp {
    pub fn inverse(self) -> Self {
        match self {
            DirectionOp::Rotate(a) => DirectionOp::Rotate(-a),
            other => other,
        }
    }
}

/// Geometric transform of a parameter raster that keeps directions
/// consistent with the moved image content.
///
/// Rotation resamples the triplet channels bilinearly (directions are
/// interpolated as doubled-angle vectors) and the returned mask marks pixels
/// with full source support. Flips are exact and return a full mask.
pub fn transform_with_direction(
    maps: &ImageBuffer,
    op: DirectionOp,
) -> Result<(ImageBuffer, BinaryMask)> {
    require_maps(maps)?;
    let (h, w) = maps.shape();
    match op {
        DirectionOp::FlipH => Ok((
            map_pixels(&flip_horizontal(maps), |p| PliParams {
                direction: wrap_pi(PI - p.direction),
                ..p
            })?,
            BinaryMask::full(h, w),
        )),
        DirectionOp::FlipV => Ok((
            map_pixels(&flip_vertical(maps), |p| PliParams {
                direction: wrap_pi(-p.direction),
                ..p
            })?,
            BinaryMask::full(h, w),
        )),
        DirectionOp::Rotate(deg) => {
            let triplets = map_pixels(maps, |p| {
                let t = to_triplet(&p);
                PliParams {
                    transmittance: t[0],
                    retardation: t[1],
                    direction: t[2],
                }
            })?;
            let (rot, mask) = rotate_bilinear(&triplets, deg, 0.0);
            let alpha = deg.to_radians();
            let out = map_pixels(&rot, |q| {
                let p = from_triplet([q.transmittance, q.retardation, q.direction]);
                if p.retardation > 0.0 {
                    PliParams {
                        direction: wrap_pi(p.direction + alpha),
                        ..p
                    }
                } else {
                    p
                }
            })?;
            Ok((out, mask))
        }
    }
}

/// Thickness/attenuation augmentation: `δ' = clamp(s·δ, 0, π/2)` and
/// `I_T' = I_T^s`.
pub fn scale_thickness_attenuation(maps: &ImageBuffer, s: f64) -> Result<ImageBuffer> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Parameter(format!("scale {s} must be > 0")));
    }
    if !(0.5..=2.0).contains(&s) {
        warn!("thickness scale {s} outside the usual [0.5, 2] range");
    }
    map_pixels(maps, |p| {
        let delta = (s * p.retardation.clamp(0.0, 1.0).asin()).clamp(0.0, PI / 2.0);
        PliParams {
            transmittance: p.transmittance.max(0.0).powf(s),
            retardation: delta.sin(),
            direction: p.direction,
        }
    })
}

fn hsv_to_rgb(h_deg: f64, s: f64, v: f64) -> [f64; 3] {
    let h = h_deg.rem_euclid(360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

/// Fiber orientation map: hue from direction, saturation and value from
/// retardation. Output is RGB in `[0, 1]`.
pub fn render_fom(maps: &ImageBuffer) -> Result<ImageBuffer> {
    require_maps(maps)?;
    let (h, w) = maps.shape();
    let n = h * w;
    let d = maps.data();
    let mut data = vec![0.0; 3 * n];
    for i in 0..n {
        let sd = d[n + i].clamp(0.0, 1.0);
        let hue = wrap_pi(d[2 * n + i]) / PI * 360.0;
        let rgb = hsv_to_rgb(hue, sd, sd);
        for c in 0..3 {
            data[c * n + i] = rgb[c];
        }
    }
    Ok(ImageBuffer::with_channels(h, w, 3, data)?.with_pixel_pitch(maps.pixel_pitch()))
}

/// `v ↦ v^gamma` for values in `[0, 1]`.
pub fn gamma_scale(img: &ImageBuffer, gamma: f64) -> Result<ImageBuffer> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Parameter(format!("gamma {gamma} must be > 0")));
    }
    if let Some(v) = img.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Parameter(format!("value {v} outside [0, 1]")));
    }
    Ok(img.map(|v| v.powf(gamma)))
}
