#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use regloss_core::metrics::InstanceMask;
use regloss_core::registration::Metric;
use regloss_core::{BinaryMask, ImageBuffer};

pub fn random_image(h: usize, w: usize, rng: &mut ChaCha8Rng) -> ImageBuffer {
    ImageBuffer::from_fn(h, w, |_, _| rng.random::<f64>())
}

/// Random mask with at least one set pixel.
pub fn random_mask(h: usize, w: usize, density: f64, rng: &mut ChaCha8Rng) -> BinaryMask {
    let mut data: Vec<bool> = (0..h * w).map(|_| rng.random::<f64>() < density).collect();
    if !data.iter().any(|&b| b) {
        let k = rng.random_range(0..h * w);
        data[k] = true;
    }
    BinaryMask::new(h, w, data).unwrap()
}

/// Sliding-window masked CC / MSE at shift `(du, dv)`: compares
/// `f(u + du, v + dv)` with `g(u, v)` over pixels set in both masks.
/// Returns `(value, overlap)`; value is `None` without overlap.
pub fn masked_oracle(
    f: &ImageBuffer,
    mf: &BinaryMask,
    g: &ImageBuffer,
    mg: &BinaryMask,
    metric: Metric,
    du: i64,
    dv: i64,
) -> (Option<f64>, usize) {
    let (hf, wf) = f.shape();
    let (hg, wg) = g.shape();
    let mut acc = 0.0;
    let mut n = 0usize;
    for r in 0..hg {
        for c in 0..wg {
            let (fr, fc) = (r as i64 + du, c as i64 + dv);
            if fr < 0 || fc < 0 || fr >= hf as i64 || fc >= wf as i64 {
                continue;
            }
            let (fr, fc) = (fr as usize, fc as usize);
            if !(mf.get(fr, fc) && mg.get(r, c)) {
                continue;
            }
            let (a, b) = (f.get(fr, fc), g.get(r, c));
            acc += match metric {
                Metric::Cc => a * b,
                Metric::Mse => (a - b) * (a - b),
                other => panic!("no oracle for {other}"),
            };
            n += 1;
        }
    }
    ((n > 0).then(|| acc / n as f64), n)
}

/// Up to `max_cells` non-overlapping-by-construction rectangles (later
/// rectangles overwrite earlier ones).
pub fn random_instances(h: usize, w: usize, max_cells: u32, rng: &mut ChaCha8Rng) -> InstanceMask {
    let mut m = InstanceMask::background(h, w);
    let n = rng.random_range(0..=max_cells);
    for label in 1..=n {
        let ch = rng.random_range(2..=h / 3);
        let cw = rng.random_range(2..=w / 3);
        let top = rng.random_range(0..=h - ch);
        let left = rng.random_range(0..=w - cw);
        m.fill_rect(top, left, ch, cw, label);
    }
    m
}

/// Same cells as `base`, each jittered by up to `jitter` pixels, with some
/// cells dropped and a few spurious ones added.
pub fn perturbed_instances(base: &InstanceMask, jitter: i64, rng: &mut ChaCha8Rng) -> InstanceMask {
    let (h, w) = base.shape();
    let mut out = InstanceMask::background(h, w);
    let mut next = 1;
    for (&label, _) in base.areas().iter() {
        if rng.random::<f64>() < 0.2 {
            continue;
        }
        let (dr, dc) = (rng.random_range(-jitter..=jitter), rng.random_range(-jitter..=jitter));
        for r in 0..h {
            for c in 0..w {
                if base.get(r, c) == label {
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    if nr >= 0 && nc >= 0 && (nr as usize) < h && (nc as usize) < w {
                        out.set(nr as usize, nc as usize, next);
                    }
                }
            }
        }
        next += 1;
    }
    for _ in 0..rng.random_range(0..3) {
        let top = rng.random_range(0..h - 4);
        let left = rng.random_range(0..w - 4);
        out.fill_rect(top, left, 4, 4, next);
        next += 1;
    }
    out
}
