use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::numeric::pairwise_mean;
use crate::image::{embed, hann_window, rotate_bilinear_masked, BinaryMask, ImageBuffer};

use super::maps::{bipc_resolved, circular_metric_map, require_gray, FixedSpectra};
use super::peak::shift_order;
use super::{find_peak, AngleGrid, Metric, OverlapPolicy, Peak, RigidTransform, ScoreMap, ShiftRegion};

/// Placement of the smaller image when a circular metric needs equal shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Embedding {
    Center,
    TopLeft,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationConfig {
    pub metric: Metric,
    pub angles: AngleGrid,
    pub overlap: OverlapPolicy,
    pub region: Option<ShiftRegion>,
    /// Hann-window PC/BIPC inputs (each at its native size).
    pub windowed: bool,
    pub embedding: Embedding,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self {
            metric: Metric::Mse,
            angles: AngleGrid::default(),
            overlap: OverlapPolicy::Full,
            region: None,
            windowed: true,
            embedding: Embedding::Center,
        }
    }
}

impl RegistrationConfig {
    pub fn translation(metric: Metric) -> Self {
        Self {
            metric,
            angles: AngleGrid::zero(),
            ..Self::default()
        }
    }
}

impl FixedSpectra {
    /// Overlap counts `M_f ⋆ M_g` laid out like a masked map.
    fn overlap_map(&self, mg: &BinaryMask) -> Result<ScoreMap> {
        let zeros = ImageBuffer::zeros(mg.height(), mg.width());
        self.masked_map(&zeros, mg, Metric::Cc, 1)
    }
}

fn check_pair(img: &ImageBuffer, mask: &BinaryMask, what: &str) -> Result<()> {
    require_gray(img)?;
    if img.shape() != mask.shape() {
        return Err(dim_err!(
            "{what} image {:?} and mask {:?} differ in shape",
            img.shape(),
            mask.shape()
        ));
    }
    Ok(())
}

/// Masked copy; when windowed, the masked mean is removed before tapering so
/// the window does not smear the DC term across the spectrum.
fn masked_copy(img: &ImageBuffer, mask: &BinaryMask, window: bool) -> Result<ImageBuffer> {
    let win = if window {
        let inside: Vec<f64> = img
            .data()
            .iter()
            .zip(mask.data())
            .filter_map(|(&v, &m)| m.then_some(v))
            .collect();
        let mean = if inside.is_empty() { 0.0 } else { pairwise_mean(&inside) };
        Some((hann_window(img.height(), img.width())?, mean))
    } else {
        None
    };
    let data = img
        .data()
        .iter()
        .zip(mask.data())
        .enumerate()
        .map(|(k, (v, &m))| {
            if !m {
                0.0
            } else {
                win.as_ref().map_or(*v, |(w, mean)| (v - mean) * w.data()[k])
            }
        })
        .collect();
    ImageBuffer::new(img.height(), img.width(), data)
}

fn embed_offset(outer: usize, inner: usize, embedding: Embedding) -> usize {
    match embedding {
        Embedding::Center => (outer - inner) / 2,
        Embedding::TopLeft => 0,
    }
}

/// Score map of one metric for one moving image, validity restricted by
/// `min_overlap` (raw, non-circular mask overlap).
fn evaluate(
    spectra: &FixedSpectra,
    fixed: &ImageBuffer,
    fm: &BinaryMask,
    moving: &ImageBuffer,
    mm: &BinaryMask,
    cfg: &RegistrationConfig,
    min_overlap: usize,
) -> Result<ScoreMap> {
    if !cfg.metric.is_circular() {
        return spectra.masked_map(moving, mm, cfg.metric, min_overlap);
    }

    let (hf, wf) = fixed.shape();
    let (hg, wg) = moving.shape();
    let (h, w) = (hf.max(hg), wf.max(wg));
    let ef = (embed_offset(h, hf, cfg.embedding), embed_offset(w, wf, cfg.embedding));
    let eg = (embed_offset(h, hg, cfg.embedding), embed_offset(w, wg, cfg.embedding));
    let window = cfg.windowed && matches!(cfg.metric, Metric::Pc | Metric::Bipc);
    let fe = embed(&masked_copy(fixed, fm, window)?, h, w, ef.0, ef.1)?;
    let ge = embed(&masked_copy(moving, mm, window)?, h, w, eg.0, eg.1)?;
    let raw_offset = (
        eg.0 as isize - ef.0 as isize,
        eg.1 as isize - ef.1 as isize,
    );

    let mut map = match cfg.metric {
        Metric::Bipc => bipc_resolved(&fe, &ge, fixed, fm, moving, mm, raw_offset)?,
        m => {
            let mut map = circular_metric_map(m, &fe, &ge)?;
            map.origin = (map.origin.0 - raw_offset.0, map.origin.1 - raw_offset.1);
            map
        }
    };

    let overlap = spectra.overlap_map(mm)?;
    for i in 0..map.rows {
        for j in 0..map.cols {
            let (du, dv) = map.shift_of(i, j);
            let k = i * map.cols + j;
            let n = overlap.overlap_at(du, dv).unwrap_or(0.0);
            map.overlap_counts[k] = n;
            if n < min_overlap as f64 {
                map.valid[k] = false;
            }
        }
    }
    Ok(map)
}

/// Translation-only score map in the raw shift frame, with the configured
/// overlap policy applied to its validity mask.
pub fn score_map(
    fixed: &ImageBuffer,
    fm: &BinaryMask,
    moving: &ImageBuffer,
    mm: &BinaryMask,
    cfg: &RegistrationConfig,
) -> Result<ScoreMap> {
    check_pair(fixed, fm, "fixed")?;
    check_pair(moving, mm, "moving")?;
    let (af, am) = (fm.count(), mm.count());
    if af == 0 || am == 0 {
        return Err(Error::DegenerateInput("empty registration mask".into()));
    }
    let spectra = FixedSpectra::new(fixed, fm, moving.shape())?;
    evaluate(&spectra, fixed, fm, moving, mm, cfg, cfg.overlap.threshold(af, am))
}

/// Best integer shift with zero rotation.
pub fn register_translation(
    fixed: &ImageBuffer,
    fm: &BinaryMask,
    moving: &ImageBuffer,
    mm: &BinaryMask,
    cfg: &RegistrationConfig,
) -> Result<RigidTransform> {
    let cfg = RegistrationConfig {
        angles: AngleGrid::zero(),
        ..cfg.clone()
    };
    register_rigid(fixed, fm, moving, mm, &cfg)
}

fn candidate_order(metric: Metric, a: &(f64, Peak), b: &(f64, Peak)) -> Ordering {
    let obj = metric.objective();
    if obj.better(a.1.score, b.1.score) {
        return Ordering::Less;
    }
    if obj.better(b.1.score, a.1.score) {
        return Ordering::Greater;
    }
    a.0.abs()
        .total_cmp(&b.0.abs())
        .then(a.0.total_cmp(&b.0))
        .then(shift_order((a.1.du, a.1.dv), (b.1.du, b.1.dv)))
}

/// Exhaustive rotation search: each grid angle rotates the moving image and
/// its mask, the translation optimum is found per angle, and the globally
/// best (angle, shift) pair is returned. Angles are evaluated in parallel;
/// the reduction is order-independent.
pub fn register_rigid(
    fixed: &ImageBuffer,
    fm: &BinaryMask,
    moving: &ImageBuffer,
    mm: &BinaryMask,
    cfg: &RegistrationConfig,
) -> Result<RigidTransform> {
    check_pair(fixed, fm, "fixed")?;
    check_pair(moving, mm, "moving")?;
    let angles = cfg.angles.angles();
    if angles.is_empty() {
        return Err(Error::Parameter("empty angle grid".into()));
    }
    let (af, am) = (fm.count(), mm.count());
    if af == 0 || am == 0 {
        return Err(Error::DegenerateInput("empty registration mask".into()));
    }
    let min_overlap = cfg.overlap.threshold(af, am);
    let spectra = FixedSpectra::new(fixed, fm, moving.shape())?;

    let per_angle: Vec<Result<Option<(f64, Peak)>>> = angles
        .par_iter()
        .map(|&theta| {
            let rotated;
            let (g, m) = if theta == 0.0 {
                (moving, mm)
            } else {
                rotated = rotate_bilinear_masked(moving, Some(mm), theta, 0.0);
                (&rotated.0, &rotated.1)
            };
            if m.count() == 0 {
                return Ok(None);
            }
            let map = evaluate(&spectra, fixed, fm, g, m, cfg, min_overlap)?;
            match find_peak(&map, cfg.region.as_ref()) {
                Ok(p) => Ok(Some((theta, p))),
                Err(Error::NoSolution(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut best: Option<(f64, Peak)> = None;
    for r in per_angle {
        if let Some(c) = r? {
            if best
                .as_ref()
                .is_none_or(|b| candidate_order(cfg.metric, &c, b) == Ordering::Less)
            {
                best = Some(c);
            }
        }
    }
    let (theta, peak) = best.ok_or_else(|| {
        Error::NoSolution(format!(
            "no feasible placement under {:?} overlap policy",
            cfg.overlap
        ))
    })?;
    Ok(RigidTransform {
        du: peak.du,
        dv: peak.dv,
        theta,
        score: peak.score,
        metric: cfg.metric,
    })
}

/// Resamples `img` into an `out_h x out_w` window of the fixed frame:
/// rotate by `t.theta` about the image center, then read pixel `x` of the
/// fixed frame from `x - (du, dv)` of the rotated image.
///
/// Every output pixel must come from a valid rotated pixel (and from inside
/// `mask` when given), otherwise a coverage error is returned.
pub fn apply_rigid(
    img: &ImageBuffer,
    mask: Option<&BinaryMask>,
    t: &RigidTransform,
    out_h: usize,
    out_w: usize,
) -> Result<ImageBuffer> {
    if let Some(m) = mask {
        if m.shape() != img.shape() {
            return Err(dim_err!("image and mask shapes differ"));
        }
    }
    if out_h == 0 || out_w == 0 {
        return Err(dim_err!("output window must be non-empty"));
    }
    let (rot, valid) = rotate_bilinear_masked(img, mask, t.theta, 0.0);
    let (h, w) = img.shape();
    let top = -t.du;
    let left = -t.dv;
    if top < 0 || left < 0 || top as usize + out_h > h || left as usize + out_w > w {
        return Err(Error::Coverage(format!(
            "{out_h}x{out_w} window at ({top},{left}) leaves the {h}x{w} image"
        )));
    }
    let (top, left) = (top as usize, left as usize);
    for r in top..top + out_h {
        for c in left..left + out_w {
            if !valid.get(r, c) {
                return Err(Error::Coverage(format!(
                    "output pixel ({}, {}) falls outside the valid rotated footprint",
                    r - top,
                    c - left
                )));
            }
        }
    }
    crate::image::crop(&rot, top, left, out_h, out_w)
}
