use crate::error::{dim_err, Error, Result};
use crate::fft::{fast_len, plan, Spectrum};
use crate::image::{hann_window, BinaryMask, ImageBuffer};

use super::{Metric, ScoreMap};

/// Cross-power bins with magnitude below this are zeroed in PC and BIPC.
pub const SPECTRAL_FLOOR: f64 = 1e-12;

pub(crate) fn require_gray(img: &ImageBuffer) -> Result<()> {
    if img.channels() != 1 {
        return Err(dim_err!(
            "registration expects single-channel images, got {} channels",
            img.channels()
        ));
    }
    Ok(())
}

fn require_same_shape(f: &ImageBuffer, g: &ImageBuffer) -> Result<()> {
    require_gray(f)?;
    require_gray(g)?;
    if f.shape() != g.shape() {
        return Err(dim_err!(
            "circular metrics need equal shapes, got {:?} and {:?}",
            f.shape(),
            g.shape()
        ));
    }
    Ok(())
}

fn masked_values(img: &ImageBuffer, mask: &BinaryMask) -> Vec<f64> {
    img.data()
        .iter()
        .zip(mask.data())
        .map(|(v, &m)| if m { *v } else { 0.0 })
        .collect()
}

fn pad_into(src: &[f64], h: usize, w: usize, rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for r in 0..h {
        out[r * cols..r * cols + w].copy_from_slice(&src[r * w..(r + 1) * w]);
    }
    out
}

/// Spectra of a fixed image reused across many moving images of one shape,
/// e.g. the 31 rotated targets of a rigid sweep.
pub struct FixedSpectra {
    grid: (usize, usize),
    fixed_shape: (usize, usize),
    moving_shape: (usize, usize),
    f_hat: Spectrum,
    f2_hat: Spectrum,
    mf_hat: Spectrum,
    fixed_area: usize,
}

impl FixedSpectra {
    pub fn new(f: &ImageBuffer, mf: &BinaryMask, moving_shape: (usize, usize)) -> Result<Self> {
        require_gray(f)?;
        if f.shape() != mf.shape() {
            return Err(dim_err!("fixed image and mask shapes differ"));
        }
        let (hf, wf) = f.shape();
        let (hg, wg) = moving_shape;
        let grid = (fast_len(hf + hg - 1), fast_len(wf + wg - 1));
        let p = plan(grid.0, grid.1);
        let f0 = masked_values(f, mf);
        let f2: Vec<f64> = f0.iter().map(|v| v * v).collect();
        let m: Vec<f64> = mf.data().iter().map(|&b| b as u8 as f64).collect();
        Ok(Self {
            grid,
            fixed_shape: (hf, wf),
            moving_shape,
            f_hat: p.forward(&pad_into(&f0, hf, wf, grid.0, grid.1)),
            f2_hat: p.forward(&pad_into(&f2, hf, wf, grid.0, grid.1)),
            mf_hat: p.forward(&pad_into(&m, hf, wf, grid.0, grid.1)),
            fixed_area: mf.count(),
        })
    }

    pub fn fixed_area(&self) -> usize {
        self.fixed_area
    }

    /// Reorders a padded-grid correlation into the shift raster.
    fn extract(&self, raw: &[f64]) -> (usize, usize, Vec<f64>) {
        let (hf, wf) = self.fixed_shape;
        let (hg, wg) = self.moving_shape;
        let (pr, pc) = self.grid;
        let rows = hf + hg - 1;
        let cols = wf + wg - 1;
        let mut out = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            let gr = (i as isize - (hg as isize - 1)).rem_euclid(pr as isize) as usize;
            for j in 0..cols {
                let gc = (j as isize - (wg as isize - 1)).rem_euclid(pc as isize) as usize;
                out.push(raw[gr * pc + gc]);
            }
        }
        (rows, cols, out)
    }

    /// Overlap-normalized CC or MSE of `moving` against the fixed image.
    pub fn masked_map(
        &self,
        g: &ImageBuffer,
        mg: &BinaryMask,
        metric: Metric,
        min_overlap: usize,
    ) -> Result<ScoreMap> {
        require_gray(g)?;
        if g.shape() != self.moving_shape || mg.shape() != self.moving_shape {
            return Err(dim_err!(
                "moving image {:?} / mask {:?} do not match planned shape {:?}",
                g.shape(),
                mg.shape(),
                self.moving_shape
            ));
        }
        if !matches!(metric, Metric::Cc | Metric::Mse) {
            return Err(Error::Parameter(format!(
                "{metric} is not a masked metric"
            )));
        }
        if min_overlap == 0 {
            return Err(Error::Parameter("min_overlap must be >= 1".into()));
        }
        let moving_area = mg.count();
        if self.fixed_area == 0 || moving_area == 0 {
            return Err(Error::DegenerateInput("empty registration mask".into()));
        }
        let (hg, wg) = self.moving_shape;
        let (pr, pc) = self.grid;
        let p = plan(pr, pc);
        let g0 = masked_values(g, mg);
        let m: Vec<f64> = mg.data().iter().map(|&b| b as u8 as f64).collect();
        let mg_hat = p.forward(&pad_into(&m, hg, wg, pr, pc));
        let g_hat = p.forward(&pad_into(&g0, hg, wg, pr, pc));

        let overlap_raw = p.inverse(self.mf_hat.cross(&mg_hat));
        let numerator_raw = match metric {
            Metric::Cc => p.inverse(self.f_hat.cross(&g_hat)),
            _ => {
                let g2: Vec<f64> = g0.iter().map(|v| v * v).collect();
                let g2_hat = p.forward(&pad_into(&g2, hg, wg, pr, pc));
                let mut s = self.f2_hat.cross(&mg_hat);
                s.scale_add(-2.0, &self.f_hat.cross(&g_hat));
                s.scale_add(1.0, &self.mf_hat.cross(&g2_hat));
                p.inverse(s)
            }
        };
        let (rows, cols, overlap) = self.extract(&overlap_raw);
        let (_, _, numerator) = self.extract(&numerator_raw);

        let mut values = Vec::with_capacity(rows * cols);
        let mut valid = Vec::with_capacity(rows * cols);
        let mut counts = Vec::with_capacity(rows * cols);
        for (num, ov) in numerator.iter().zip(&overlap) {
            // mask correlations are integer valued; rounding removes FFT noise
            let n = ov.round().max(0.0);
            counts.push(n);
            if n < 1.0 {
                values.push(0.0);
                valid.push(false);
                continue;
            }
            let v = num / n;
            let v = if metric == Metric::Mse { v.max(0.0) } else { v };
            values.push(v);
            valid.push(n >= min_overlap as f64 && v.is_finite());
        }
        Ok(ScoreMap {
            rows,
            cols,
            origin: (hg as isize - 1, wg as isize - 1),
            values,
            valid,
            overlap_counts: counts,
            objective: metric.objective(),
            metric,
        })
    }
}

/// Non-circular, overlap-normalized MSE over zero-padded inputs.
pub fn masked_mse(
    f: &ImageBuffer,
    mf: &BinaryMask,
    g: &ImageBuffer,
    mg: &BinaryMask,
    min_overlap: usize,
) -> Result<ScoreMap> {
    FixedSpectra::new(f, mf, g.shape())?.masked_map(g, mg, Metric::Mse, min_overlap)
}

/// Non-circular cross-correlation divided by the overlap count.
pub fn masked_cc(
    f: &ImageBuffer,
    mf: &BinaryMask,
    g: &ImageBuffer,
    mg: &BinaryMask,
    min_overlap: usize,
) -> Result<ScoreMap> {
    FixedSpectra::new(f, mf, g.shape())?.masked_map(g, mg, Metric::Cc, min_overlap)
}

/// Lays out a periodic `h x w` correlation with shifts `-h/2..h-h/2`.
fn circular_map(raw: &[f64], h: usize, w: usize, metric: Metric) -> ScoreMap {
    let (oh, ow) = ((h / 2) as isize, (w / 2) as isize);
    let mut values = Vec::with_capacity(h * w);
    for i in 0..h {
        let r = (i as isize - oh).rem_euclid(h as isize) as usize;
        for j in 0..w {
            let c = (j as isize - ow).rem_euclid(w as isize) as usize;
            values.push(raw[r * w + c]);
        }
    }
    ScoreMap {
        rows: h,
        cols: w,
        origin: (oh, ow),
        valid: values.iter().map(|v: &f64| v.is_finite()).collect(),
        values,
        overlap_counts: vec![(h * w) as f64; h * w],
        objective: metric.objective(),
        metric,
    }
}

fn circular_cc_raw(f: &ImageBuffer, g: &ImageBuffer) -> Vec<f64> {
    let (h, w) = f.shape();
    let p = plan(h, w);
    p.inverse(p.forward(f.data()).cross(&p.forward(g.data())))
}

/// Periodic cross-correlation `Σ f(u + a, v + b) g(u, v)`.
pub fn circular_cross_correlation(f: &ImageBuffer, g: &ImageBuffer) -> Result<ScoreMap> {
    require_same_shape(f, g)?;
    let (h, w) = f.shape();
    Ok(circular_map(&circular_cc_raw(f, g), h, w, Metric::CcCirc))
}

/// Periodic mean squared error over all shifts, derived from the circular
/// cross-correlation and the two image energies.
pub fn circular_mse(f: &ImageBuffer, g: &ImageBuffer) -> Result<ScoreMap> {
    require_same_shape(f, g)?;
    let (h, w) = f.shape();
    let energy: f64 = f
        .data()
        .iter()
        .zip(g.data())
        .map(|(a, b)| a * a + b * b)
        .sum();
    let n = (h * w) as f64;
    let raw: Vec<f64> = circular_cc_raw(f, g)
        .into_iter()
        .map(|cc| (energy - 2.0 * cc) / n)
        .collect();
    Ok(circular_map(&raw, h, w, Metric::MseCirc))
}

fn windowed(img: &ImageBuffer) -> Result<ImageBuffer> {
    let win = hann_window(img.height(), img.width())?;
    let data = img.data().iter().zip(win.data()).map(|(a, b)| a * b).collect();
    ImageBuffer::new(img.height(), img.width(), data)
}

/// Unit-magnitude cross-power spectrum of two equal-shape images.
fn normalized_cross_power(f: &ImageBuffer, g: &ImageBuffer) -> Spectrum {
    let (h, w) = f.shape();
    let p = plan(h, w);
    let mut r = p.forward(f.data()).cross(&p.forward(g.data()));
    for z in r.data.iter_mut() {
        let m = z.norm();
        *z = if m < SPECTRAL_FLOOR { 0.0.into() } else { *z / m };
    }
    r
}

/// Phase correlation; optionally Hann-windows both inputs first.
pub fn phase_correlation(f: &ImageBuffer, g: &ImageBuffer, windowed_input: bool) -> Result<ScoreMap> {
    require_same_shape(f, g)?;
    let (h, w) = f.shape();
    let (fw, gw) = if windowed_input {
        (windowed(f)?, windowed(g)?)
    } else {
        (f.clone(), g.clone())
    };
    let raw = plan(h, w).inverse(normalized_cross_power(&fw, &gw));
    Ok(circular_map(&raw, h, w, Metric::Pc))
}

/// Blur-invariant phase correlation on equal-shape inputs.
///
/// Squaring the normalized cross-power spectrum cancels the 0/π phase of
/// any centrally symmetric blur, at the price of a peak at twice the shift.
/// Each doubled peak has up to two preimages per axis; the returned map
/// keeps, per alias group, only the shift with the best mean-centered
/// masked cross-correlation valid.
pub fn bipc(f: &ImageBuffer, g: &ImageBuffer, windowed_input: bool) -> Result<ScoreMap> {
    require_same_shape(f, g)?;
    let (fw, gw) = if windowed_input {
        (windowed(f)?, windowed(g)?)
    } else {
        (f.clone(), g.clone())
    };
    let mf = BinaryMask::full(f.height(), f.width());
    let mg = BinaryMask::full(g.height(), g.width());
    bipc_resolved(&fw, &gw, f, &mf, g, &mg, (0, 0))
}

/// BIPC map over the circular window of `spec_f`/`spec_g`, with shifts
/// reported in the raw frame of `f`/`g` (`raw = circular + raw_offset`).
pub(crate) fn bipc_resolved(
    spec_f: &ImageBuffer,
    spec_g: &ImageBuffer,
    f: &ImageBuffer,
    mf: &BinaryMask,
    g: &ImageBuffer,
    mg: &BinaryMask,
    raw_offset: (isize, isize),
) -> Result<ScoreMap> {
    let (h, w) = spec_f.shape();
    let p = plan(h, w);
    let mut r = normalized_cross_power(spec_f, spec_g);
    r.data.iter_mut().for_each(|z| *z = *z * *z);
    let doubled = p.inverse(r);

    let centered = |img: &ImageBuffer, m: &BinaryMask| -> Result<ImageBuffer> {
        let n = m.count().max(1) as f64;
        let mu = img
            .data()
            .iter()
            .zip(m.data())
            .filter(|(_, &b)| b)
            .map(|(v, _)| v)
            .sum::<f64>()
            / n;
        let data = img
            .data()
            .iter()
            .zip(m.data())
            .map(|(v, &b)| if b { v - mu } else { 0.0 })
            .collect();
        ImageBuffer::new(img.height(), img.width(), data)
    };
    let cc = FixedSpectra::new(&centered(f, mf)?, mf, g.shape())?.masked_map(
        &centered(g, mg)?,
        mg,
        Metric::Cc,
        1,
    )?;

    let (oh, ow) = ((h / 2) as isize, (w / 2) as isize);
    let mut values = Vec::with_capacity(h * w);
    let mut groups = Vec::with_capacity(h * w);
    for i in 0..h {
        let d_r = i as isize - oh;
        let pr = (2 * d_r).rem_euclid(h as isize) as usize;
        for j in 0..w {
            let d_c = j as isize - ow;
            let pc = (2 * d_c).rem_euclid(w as isize) as usize;
            values.push(doubled[pr * w + pc]);
            groups.push(pr * w + pc);
        }
    }

    // per alias group keep the shift with the highest centered correlation,
    // ties going to the smaller |du| + |dv|
    let disambiguation = |k: usize| -> (f64, i64) {
        let (i, j) = (k / w, k % w);
        let du = i as isize - oh + raw_offset.0;
        let dv = j as isize - ow + raw_offset.1;
        let c = cc
            .index_of(du as i64, dv as i64)
            .filter(|&idx| cc.valid[idx])
            .map_or(f64::NEG_INFINITY, |idx| cc.values[idx]);
        (c, (du.abs() + dv.abs()) as i64)
    };
    let mut best: Vec<Option<(usize, f64, i64)>> = vec![None; h * w];
    for (k, &grp) in groups.iter().enumerate() {
        let (c, l1) = disambiguation(k);
        let replace = match best[grp] {
            None => true,
            Some((_, bc, bl)) => c > bc || (c == bc && l1 < bl),
        };
        if replace {
            best[grp] = Some((k, c, l1));
        }
    }
    let valid = groups
        .iter()
        .enumerate()
        .map(|(k, &grp)| best[grp].is_some_and(|(b, _, _)| b == k) && values[k].is_finite())
        .collect();

    Ok(ScoreMap {
        rows: h,
        cols: w,
        origin: (oh - raw_offset.0, ow - raw_offset.1),
        values,
        valid,
        overlap_counts: vec![(h * w) as f64; h * w],
        objective: Metric::Bipc.objective(),
        metric: Metric::Bipc,
    })
}

/// Circular map of one metric for equal-shape, already-prepared inputs.
pub(crate) fn circular_metric_map(
    metric: Metric,
    spec_f: &ImageBuffer,
    spec_g: &ImageBuffer,
) -> Result<ScoreMap> {
    match metric {
        Metric::CcCirc => circular_cross_correlation(spec_f, spec_g),
        Metric::MseCirc => circular_mse(spec_f, spec_g),
        Metric::Pc => phase_correlation(spec_f, spec_g, false),
        other => Err(Error::Parameter(format!("{other} is not handled here"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{crop, zero_pad};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(h: usize, w: usize, rng: &mut ChaCha8Rng) -> ImageBuffer {
        ImageBuffer::from_fn(h, w, |_, _| rng.random::<f64>())
    }

    fn roll(img: &ImageBuffer, a: usize, b: usize) -> ImageBuffer {
        // g(u) = f(u + a): periodic crop of f at offset (a, b)
        let (h, w) = img.shape();
        ImageBuffer::from_fn(h, w, |r, c| img.get((r + a) % h, (c + b) % w))
    }

    #[test]
    fn delta_correlation() {
        let mut f = ImageBuffer::zeros(2, 2);
        f.set(0, 0, 1.0);
        let m = circular_cross_correlation(&f, &f).unwrap();
        for du in -1..=0 {
            for dv in -1..=0 {
                let v = m.value_at(du, dv).unwrap();
                let expect = if du == 0 && dv == 0 { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_shift_is_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random(7, 9, &mut rng);
        let e: f64 = f.data().iter().map(|v| v * v).sum();
        let m = circular_cross_correlation(&f, &f).unwrap();
        assert!((m.value_at(0, 0).unwrap() - e).abs() < 1e-12 * e);
    }

    #[test]
    fn circular_mse_zero_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random(8, 8, &mut rng);
        let g = random(8, 8, &mut rng);
        let m = circular_mse(&f, &f).unwrap();
        assert!(m.value_at(0, 0).unwrap().abs() < 1e-14);
        let direct: f64 = f
            .data()
            .iter()
            .zip(g.data())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / 64.0;
        let m = circular_mse(&f, &g).unwrap();
        assert!((m.value_at(0, 0).unwrap() - direct).abs() <= 1e-12 * direct);
        assert!(circular_mse(&f, &random(8, 7, &mut rng)).is_err());
    }

    #[test]
    fn phase_correlation_pure_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random(16, 20, &mut rng);
        let g = roll(&f, 3, 5);
        let m = phase_correlation(&f, &g, false).unwrap();
        let pk = crate::registration::find_peak(&m, None).unwrap();
        assert_eq!((pk.du, pk.dv), (3, 5));
        assert!((pk.score - 1.0).abs() < 1e-9);
        let same = phase_correlation(&f, &f, true).unwrap();
        let pk = crate::registration::find_peak(&same, None).unwrap();
        assert_eq!((pk.du, pk.dv), (0, 0));
    }

    #[test]
    fn phase_correlation_constant_images_are_finite() {
        let f = ImageBuffer::filled(8, 8, 2.0);
        let m = phase_correlation(&f, &f, false).unwrap();
        assert!(m.values.iter().all(|v| v.is_finite()));
        let m = bipc(&f, &f, true).unwrap();
        assert!(m.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn bipc_identity_and_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f = random(32, 32, &mut rng);
        let m = bipc(&f, &f, false).unwrap();
        let pk = crate::registration::find_peak(&m, None).unwrap();
        assert_eq!((pk.du, pk.dv), (0, 0));
        let g = roll(&f, 2, 0);
        let m = bipc(&f, &g, false).unwrap();
        let pk = crate::registration::find_peak(&m, None).unwrap();
        assert_eq!((pk.du, pk.dv), (2, 0));
    }

    #[test]
    fn masked_mse_exact_crop_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = random(12, 10, &mut rng);
        let g = crop(&f, 3, 2, 5, 4).unwrap();
        let m = masked_mse(
            &f,
            &BinaryMask::full(12, 10),
            &g,
            &BinaryMask::full(5, 4),
            20,
        )
        .unwrap();
        let pk = crate::registration::find_peak(&m, None).unwrap();
        assert_eq!((pk.du, pk.dv), (3, 2));
        assert!(pk.score < 1e-12);
    }

    #[test]
    fn overlap_counts_rectangles() {
        let f = ImageBuffer::filled(3, 3, 1.0);
        let g = ImageBuffer::filled(2, 2, 1.0);
        let m = masked_cc(&f, &BinaryMask::full(3, 3), &g, &BinaryMask::full(2, 2), 1).unwrap();
        assert_eq!(m.rows, 4);
        for du in -1..=2i64 {
            for dv in -1..=2i64 {
                let rows = (du + 2).min(3) - du.max(0);
                let cols = (dv + 2).min(3) - dv.max(0);
                assert_eq!(m.overlap_at(du, dv).unwrap(), (rows * cols) as f64);
            }
        }
        for (du, dv) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert_eq!(m.overlap_at(du, dv).unwrap(), 4.0);
        }
    }

    #[test]
    fn masked_cc_zero_and_mean_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = random(6, 6, &mut rng);
        let z = ImageBuffer::zeros(4, 4);
        let full6 = BinaryMask::full(6, 6);
        let m = masked_cc(&f, &full6, &z, &BinaryMask::full(4, 4), 1).unwrap();
        assert!(m.values.iter().all(|v| v.abs() < 1e-14));

        let g = random(6, 6, &mut rng);
        let m = masked_cc(&f, &full6, &g, &full6, 1).unwrap();
        let mean: f64 = f.data().iter().zip(g.data()).map(|(a, b)| a * b).sum::<f64>() / 36.0;
        assert!((m.value_at(0, 0).unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn masked_maps_reject_empty_masks() {
        let f = ImageBuffer::filled(4, 4, 1.0);
        let r = masked_mse(&f, &BinaryMask::empty(4, 4), &f, &BinaryMask::full(4, 4), 1);
        assert!(matches!(r, Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn padded_masks_match_unpadded() {
        // zero-padded inputs with their masks give the same valid scores
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = random(6, 6, &mut rng);
        let g = random(3, 3, &mut rng);
        let (fp, mfp) = zero_pad(&f, 8, 7).unwrap();
        let a = masked_mse(&f, &BinaryMask::full(6, 6), &g, &BinaryMask::full(3, 3), 1).unwrap();
        let b = masked_mse(&fp, &mfp, &g, &BinaryMask::full(3, 3), 1).unwrap();
        for du in -2..=5 {
            for dv in -2..=5 {
                let va = a.value_at(du, dv).unwrap();
                let vb = b.value_at(du, dv).unwrap();
                assert!((va - vb).abs() < 1e-12);
            }
        }
    }
}
