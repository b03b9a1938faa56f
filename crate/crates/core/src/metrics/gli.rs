use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{downscale_mean, reflect_index, BinaryMask, ImageBuffer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GliConfig {
    /// Side of the square local-mean window, odd.
    pub window: usize,
    /// Pixels darker than the local mean by more than this are cells.
    pub offset: f64,
    pub block: usize,
}

impl Default for GliConfig {
    /// Intensities scaled to `[0, 1]`.
    fn default() -> Self {
        Self {
            window: 101,
            offset: 10.0 / 255.0,
            block: 16,
        }
    }
}

/// Box-filter mean with reflected borders, separable.
fn local_mean(plane: &[f64], h: usize, w: usize, window: usize) -> Vec<f64> {
    let r = (window / 2) as isize;
    let box_1d = |get: &dyn Fn(usize) -> f64, n: usize| -> Vec<f64> {
        // prefix sums over the reflected extension [-r, n + r)
        let mut prefix = Vec::with_capacity(n + 2 * r as usize + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for i in -r..n as isize + r {
            acc += get(reflect_index(i, n));
            prefix.push(acc);
        }
        (0..n).map(|i| prefix[i + window] - prefix[i]).collect()
    };
    let mut rows = vec![0.0; h * w];
    for row in 0..h {
        let src = &plane[row * w..(row + 1) * w];
        rows[row * w..(row + 1) * w].copy_from_slice(&box_1d(&|c| src[c], w));
    }
    let mut out = vec![0.0; h * w];
    let area = (window * window) as f64;
    for col in 0..w {
        let sums = box_1d(&|r| rows[r * w + col], h);
        for (row, s) in sums.into_iter().enumerate() {
            out[row * w + col] = s / area;
        }
    }
    out
}

/// Adaptive-threshold cell segmentation of a stain image (dark cells on a
/// bright background). Color input is reduced to luminance.
pub fn segment_cells(stain: &ImageBuffer, cfg: &GliConfig) -> Result<BinaryMask> {
    if cfg.window % 2 == 0 {
        return Err(Error::Parameter(format!("window {} must be odd", cfg.window)));
    }
    let gray = stain.to_gray();
    let (h, w) = gray.shape();
    let mean = local_mean(gray.data(), h, w, cfg.window);
    let data = gray
        .data()
        .iter()
        .zip(&mean)
        .map(|(&v, &m)| v < m - cfg.offset)
        .collect();
    BinaryMask::new(h, w, data)
}

/// Fraction of cell pixels per `block x block` tile.
pub fn gli_image(stain: &ImageBuffer, cfg: &GliConfig) -> Result<ImageBuffer> {
    let cells = segment_cells(stain, cfg)?;
    Ok(downscale_mean(&cells.to_image(), cfg.block)?
        .with_pixel_pitch(stain.pixel_pitch() * cfg.block as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GliProfile {
    #[serde(skip)]
    pub gli_image: Option<ImageBuffer>,
    /// Sampled columns, top to bottom.
    pub profiles: Vec<Vec<f64>>,
    pub columns: Vec<usize>,
    pub average_profile: Vec<f64>,
}

/// Centered moving average; the window shrinks symmetrically at the ends.
fn mean_filter(xs: &[f64], k: usize) -> Vec<f64> {
    let r = k / 2;
    let n = xs.len();
    (0..n)
        .map(|i| {
            let half = r.min(i).min(n - 1 - i);
            let s = &xs[i - half..=i + half];
            s.iter().sum::<f64>() / s.len() as f64
        })
        .collect()
}

/// Equally spaced vertical profiles through a GLI image, their average, and
/// the mean-filtered average.
pub fn gli_profiles(gli: &ImageBuffer, n_profiles: usize, smooth: usize) -> Result<GliProfile> {
    let (h, w) = gli.shape();
    if n_profiles == 0 || w < n_profiles {
        return Err(Error::Parameter(format!(
            "cannot sample {n_profiles} profiles from {w} columns"
        )));
    }
    if smooth == 0 || smooth % 2 == 0 {
        return Err(Error::Parameter(format!("smoothing kernel {smooth} must be odd")));
    }
    let gray = gli.to_gray();
    let columns: Vec<usize> = if n_profiles == 1 {
        vec![(w - 1) / 2]
    } else {
        (0..n_profiles)
            .map(|k| ((k * (w - 1)) as f64 / (n_profiles - 1) as f64).round() as usize)
            .collect()
    };
    let profiles: Vec<Vec<f64>> = columns
        .iter()
        .map(|&c| (0..h).map(|r| gray.get(r, c)).collect())
        .collect();
    let mean: Vec<f64> = (0..h)
        .map(|r| profiles.iter().map(|p| p[r]).sum::<f64>() / n_profiles as f64)
        .collect();
    Ok(GliProfile {
        gli_image: Some(gli.clone()),
        profiles,
        columns,
        average_profile: mean_filter(&mean, smooth),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_fractions() {
        let mut stain = ImageBuffer::filled(32, 48, 0.9);
        // block (0,0) all cells, block (0,1) empty, block (1,2) half filled
        for r in 0..16 {
            for c in 0..16 {
                stain.set(r, c, 0.1);
            }
        }
        for r in 16..24 {
            for c in 32..48 {
                stain.set(r, c, 0.1);
            }
        }
        let cfg = GliConfig {
            window: 101,
            offset: 10.0 / 255.0,
            block: 16,
        };
        let gli = gli_image(&stain, &cfg).unwrap();
        assert_eq!(gli.shape(), (2, 3));
        assert_eq!(gli.get(0, 0), 1.0);
        assert_eq!(gli.get(0, 1), 0.0);
        assert_eq!(gli.get(1, 2), 0.5);
        assert!((gli.pixel_pitch() - 20.8).abs() < 1e-12);

        let cells = segment_cells(&stain, &cfg).unwrap();
        let total: f64 = gli.data().iter().sum::<f64>() * 256.0;
        assert_eq!(total, cells.count() as f64);
    }

    #[test]
    fn local_mean_of_constant() {
        let m = local_mean(&[2.0; 30], 5, 6, 7);
        assert!(m.iter().all(|&v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn local_mean_matches_direct_reflection() {
        let plane: Vec<f64> = (0..35).map(|i| ((i * 7) % 11) as f64).collect();
        let (h, w, k) = (5, 7, 3);
        let got = local_mean(&plane, h, w, k);
        for r in 0..h {
            for c in 0..w {
                let mut acc = 0.0;
                for dr in -1..=1isize {
                    for dc in -1..=1isize {
                        let rr = reflect_index(r as isize + dr, h);
                        let cc = reflect_index(c as isize + dc, w);
                        acc += plane[rr * w + cc];
                    }
                }
                assert!((got[r * w + c] - acc / 9.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_profile() {
        let gli = ImageBuffer::filled(20, 40, 0.3);
        let p = gli_profiles(&gli, 31, 3).unwrap();
        assert_eq!(p.profiles.len(), 31);
        assert_eq!(p.columns[0], 0);
        assert_eq!(p.columns[30], 39);
        assert!(p.average_profile.iter().all(|&v| (v - 0.3).abs() < 1e-12));
        assert!(gli_profiles(&ImageBuffer::filled(5, 10, 0.0), 31, 3).is_err());
    }

    #[test]
    fn column_invariant_image_gives_smoothed_column() {
        let col = [0.0, 0.5, 1.0, 0.2, 0.4];
        let gli = ImageBuffer::from_fn(5, 40, |r, _| col[r]);
        let p = gli_profiles(&gli, 31, 3).unwrap();
        let expected = [0.0, 0.5, 1.7 / 3.0, 1.6 / 3.0, 0.4];
        for (a, b) in p.average_profile.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn laminar_bands_plateau() {
        let bands = [0.2, 0.6, 0.4];
        let gli = ImageBuffer::from_fn(30, 40, |r, _| bands[r / 10]);
        let p = gli_profiles(&gli, 31, 3).unwrap();
        for (b, &v) in bands.iter().enumerate() {
            // away from band edges the smoothed profile sits on the band value
            for r in b * 10 + 1..b * 10 + 9 {
                assert!((p.average_profile[r] - v).abs() < 1e-12);
            }
        }
    }
}
