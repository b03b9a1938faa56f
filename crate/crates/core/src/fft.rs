//! 2D real-to-complex transforms with a process-wide per-shape plan cache.
//!
//! Rows go through a real FFT (`cols / 2 + 1` bins), columns through a
//! complex FFT. Spectra are kept in column-major half-plane layout
//! (`half` columns of `rows` bins each) so the column pass runs over
//! contiguous chunks; elementwise spectral products do not care about layout.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Fft2d {
    rows: usize,
    cols: usize,
    half: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

/// Half-plane spectrum of a real `rows x cols` raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl Spectrum {
    /// `self · conj(other)`, the spectrum of `Σ_u a(u + s) b(u)`.
    pub fn cross(&self, other: &Spectrum) -> Spectrum {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b.conj())
            .collect();
        Spectrum {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale_add(&mut self, k: f64, other: &Spectrum) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * k;
        }
    }
}

static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Fft2d>>>> = OnceLock::new();

/// Shared plan for the given raster shape, built on first use.
pub fn plan(rows: usize, cols: usize) -> Arc<Fft2d> {
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    // plan construction happens under the lock; a poisoned lock only means a
    // panic elsewhere, the map itself is still consistent
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    map.entry((rows, cols))
        .or_insert_with(|| Arc::new(Fft2d::new(rows, cols)))
        .clone()
}

/// Number of distinct shapes currently planned.
pub fn cached_plans() -> usize {
    CACHE
        .get()
        .map(|c| c.lock().unwrap_or_else(|e| e.into_inner()).len())
        .unwrap_or(0)
}

/// Smallest even 5-smooth length `>= n`.
pub fn fast_len(n: usize) -> usize {
    let mut m = n.max(2);
    loop {
        if m % 2 == 0 {
            let mut k = m;
            for p in [2, 3, 5] {
                while k % p == 0 {
                    k /= p;
                }
            }
            if k == 1 {
                return m;
            }
        }
        m += 1;
    }
}

impl Fft2d {
    fn new(rows: usize, cols: usize) -> Self {
        let mut rp = RealFftPlanner::<f64>::new();
        let mut cp = FftPlanner::<f64>::new();
        Self {
            rows,
            cols,
            half: cols / 2 + 1,
            r2c: rp.plan_fft_forward(cols),
            c2r: rp.plan_fft_inverse(cols),
            col_fwd: cp.plan_fft_forward(rows),
            col_inv: cp.plan_fft_inverse(rows),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn forward(&self, input: &[f64]) -> Spectrum {
        assert_eq!(input.len(), self.rows * self.cols, "raster size mismatch");
        let (rows, cols, half) = (self.rows, self.cols, self.half);
        let mut row_in = self.r2c.make_input_vec();
        let mut row_out = self.r2c.make_output_vec();
        let mut scratch = self.r2c.make_scratch_vec();
        let mut data = vec![Complex64::new(0.0, 0.0); rows * half];
        for r in 0..rows {
            row_in.copy_from_slice(&input[r * cols..(r + 1) * cols]);
            self.r2c
                .process_with_scratch(&mut row_in, &mut row_out, &mut scratch)
                .expect("buffer sizes come from the plan");
            for (k, v) in row_out.iter().enumerate() {
                data[k * rows + r] = *v;
            }
        }
        let mut cscratch =
            vec![Complex64::new(0.0, 0.0); self.col_fwd.get_inplace_scratch_len()];
        self.col_fwd.process_with_scratch(&mut data, &mut cscratch);
        Spectrum { rows, cols, data }
    }

    /// Normalized inverse; `inverse(forward(x)) == x` up to rounding.
    pub fn inverse(&self, mut spec: Spectrum) -> Vec<f64> {
        assert_eq!((spec.rows, spec.cols), (self.rows, self.cols), "spectrum shape mismatch");
        let (rows, cols, half) = (self.rows, self.cols, self.half);
        let mut cscratch =
            vec![Complex64::new(0.0, 0.0); self.col_inv.get_inplace_scratch_len()];
        self.col_inv.process_with_scratch(&mut spec.data, &mut cscratch);
        let mut row_in = self.c2r.make_input_vec();
        let mut row_out = self.c2r.make_output_vec();
        let mut scratch = self.c2r.make_scratch_vec();
        let norm = 1.0 / (rows * cols) as f64;
        let mut out = vec![0.0; rows * cols];
        for r in 0..rows {
            for (k, v) in row_in.iter_mut().enumerate() {
                *v = spec.data[k * rows + r];
            }
            // DC (and Nyquist for even widths) must be real for a real output
            row_in[0].im = 0.0;
            if cols % 2 == 0 {
                row_in[half - 1].im = 0.0;
            }
            self.c2r
                .process_with_scratch(&mut row_in, &mut row_out, &mut scratch)
                .expect("buffer sizes come from the plan");
            for (o, v) in out[r * cols..(r + 1) * cols].iter_mut().zip(&row_out) {
                *o = v * norm;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect()
    }

    #[test]
    fn roundtrip_odd_and_even() {
        for (r, c) in [(1, 1), (3, 5), (8, 6), (7, 9), (23, 20)] {
            let x = lcg(r * c, (r * 31 + c) as u64);
            let p = plan(r, c);
            let y = p.inverse(p.forward(&x));
            for (a, b) in x.iter().zip(&y) {
                assert!((a - b).abs() < 1e-12, "{r}x{c}");
            }
        }
    }

    #[test]
    fn cross_spectrum_is_circular_correlation() {
        let (h, w) = (6, 7);
        let a = lcg(h * w, 1);
        let b = lcg(h * w, 2);
        let p = plan(h, w);
        let corr = p.inverse(p.forward(&a).cross(&p.forward(&b)));
        for sr in 0..h {
            for sc in 0..w {
                let mut acc = 0.0;
                for r in 0..h {
                    for c in 0..w {
                        acc += a[((r + sr) % h) * w + (c + sc) % w] * b[r * w + c];
                    }
                }
                assert!((corr[sr * w + sc] - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fast_lengths() {
        assert_eq!(fast_len(619), 640);
        assert_eq!(fast_len(719), 720);
        assert_eq!(fast_len(1), 2);
        assert_eq!(fast_len(7), 8);
        assert_eq!(fast_len(11), 12);
    }

    #[test]
    fn plans_are_shared() {
        let a = plan(13, 17);
        let b = plan(13, 17);
        assert!(Arc::ptr_eq(&a, &b));
        assert!(cached_plans() >= 1);
    }

    #[test]
    fn concurrent_planning() {
        let handles: Vec<_> = (0..8)
            .map(|i| {
                std::thread::spawn(move || {
                    let p = plan(10 + i % 2, 12);
                    let x = lcg(p.shape().0 * 12, i as u64);
                    let y = p.inverse(p.forward(&x));
                    x.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-12)
                })
            })
            .collect();
        assert!(handles.into_iter().all(|h| h.join().unwrap()));
    }
}
