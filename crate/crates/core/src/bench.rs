//! Registration robustness sweep: a tile cut from a synthetic or supplied
//! target is degraded by noise or blur and registered back with every
//! metric; a trial is a hit when the recovered shift lands within a pixel
//! threshold of the planted one.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::image::{add_gaussian_noise, crop, gaussian_blur, BinaryMask, ImageBuffer};
use crate::registration::{register_translation, Metric, OverlapPolicy, RegistrationConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobParams {
    /// Exact number of uniformly placed blobs. `None` places one blob per
    /// cell of a jittered grid whose pitch follows `density`.
    pub count: Option<usize>,
    /// Blobs per 10 000 pixels.
    pub density: f64,
    /// Grid jitter as a fraction of the grid pitch.
    pub jitter: f64,
    /// Semi-axis range in pixels.
    pub radius: (f64, f64),
    pub background: f64,
    /// Standard deviation of the background texture.
    pub texture_amplitude: f64,
    /// Correlation length of the background texture.
    pub texture_sigma: f64,
    pub blob_level: f64,
    /// Standard deviation of the per-blob level.
    pub blob_jitter: f64,
    /// Gaussian sigma of a final optical low-pass; 0 keeps hard edges.
    pub smoothing: f64,
}

impl Default for BlobParams {
    fn default() -> Self {
        Self {
            count: None,
            density: 12.0,
            jitter: 0.75,
            radius: (4.0, 5.0),
            background: 80.0,
            texture_amplitude: 10.0,
            texture_sigma: 2.0,
            blob_level: 0.0,
            blob_jitter: 0.0,
            smoothing: 3.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseTextureParams {
    pub sigma: f64,
    pub mean: f64,
    pub amplitude: f64,
}

impl Default for NoiseTextureParams {
    fn default() -> Self {
        Self {
            sigma: 3.0,
            mean: 128.0,
            amplitude: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "style")]
pub enum Texture {
    CellBlobs(BlobParams),
    FilteredNoise(NoiseTextureParams),
    /// Random crops of caller-supplied images.
    FromSources {
        #[serde(skip)]
        images: Arc<Vec<ImageBuffer>>,
    },
}

impl Default for Texture {
    fn default() -> Self {
        Texture::CellBlobs(BlobParams::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub center: (f64, f64),
    pub axes: (f64, f64),
    pub angle: f64,
    pub level: f64,
}

impl Ellipse {
    fn contains(&self, r: f64, c: f64) -> bool {
        let (dr, dc) = (r - self.center.0, c - self.center.1);
        let (s, co) = self.angle.sin_cos();
        let u = co * dc + s * dr;
        let v = -s * dc + co * dr;
        (u / self.axes.0).powi(2) + (v / self.axes.1).powi(2) <= 1.0
    }
}

fn smooth_noise(h: usize, w: usize, sigma: f64, amplitude: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let white = ImageBuffer::from_fn(h, w, |_, _| StandardNormal.sample(rng));
    let ksize = blur_kernel_size(sigma, 3.0, h.max(w));
    let smooth = gaussian_blur(&white, sigma, ksize)?;
    let data = smooth.data();
    let mean = data.iter().sum::<f64>() / data.len() as f64;
    let var = data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / data.len() as f64;
    let scale = if var > 0.0 { amplitude / var.sqrt() } else { 0.0 };
    Ok(data.iter().map(|v| (v - mean) * scale).collect())
}

/// Cell-like texture plus the blobs that were painted, in painting order.
pub fn cell_blobs(
    h: usize,
    w: usize,
    p: &BlobParams,
    rng: &mut ChaCha8Rng,
) -> Result<(ImageBuffer, Vec<Ellipse>)> {
    if !(p.radius.0 >= 1.0 && p.radius.1 >= p.radius.0) {
        return Err(Error::Parameter(format!("invalid blob radius range {:?}", p.radius)));
    }
    if !(0.0..=1.0).contains(&p.jitter) {
        return Err(Error::Parameter(format!("grid jitter {} must lie in [0, 1]", p.jitter)));
    }
    let texture = smooth_noise(h, w, p.texture_sigma, p.texture_amplitude, rng)?;
    let mut data: Vec<f64> = texture.iter().map(|t| p.background + t).collect();
    let centers: Vec<(f64, f64)> = match p.count {
        Some(k) => (0..k)
            .map(|_| (rng.random_range(0.0..h as f64), rng.random_range(0.0..w as f64)))
            .collect(),
        None => {
            if !(p.density > 0.0) {
                return Err(Error::Parameter(format!("blob density {} must be > 0", p.density)));
            }
            let pitch = (1e4 / p.density).sqrt();
            let mut out = Vec::new();
            let mut r0 = 0.5 * pitch;
            while r0 < h as f64 {
                let mut c0 = 0.5 * pitch;
                while c0 < w as f64 {
                    let jr = rng.random_range(-0.5..0.5) * p.jitter * pitch;
                    let jc = rng.random_range(-0.5..0.5) * p.jitter * pitch;
                    out.push((r0 + jr, c0 + jc));
                    c0 += pitch;
                }
                r0 += pitch;
            }
            out
        }
    };
    let mut blobs = Vec::with_capacity(centers.len());
    for center in centers {
        let e = Ellipse {
            center,
            axes: (
                rng.random_range(p.radius.0..=p.radius.1),
                rng.random_range(p.radius.0..=p.radius.1),
            ),
            angle: rng.random_range(0.0..PI),
            level: p.blob_level + p.blob_jitter * Distribution::<f64>::sample(&StandardNormal, rng),
        };
        let reach = e.axes.0.max(e.axes.1).ceil() as isize + 1;
        let (cr, cc) = (e.center.0 as isize, e.center.1 as isize);
        for r in (cr - reach).max(0)..(cr + reach + 1).min(h as isize) {
            for c in (cc - reach).max(0)..(cc + reach + 1).min(w as isize) {
                if e.contains(r as f64, c as f64) {
                    // keep the background texture inside the cell body
                    let k = r as usize * w + c as usize;
                    data[k] = e.level + 0.5 * texture[k];
                }
            }
        }
        blobs.push(e);
    }
    let mut img = ImageBuffer::new(h, w, data)?;
    if p.smoothing > 0.0 {
        img = gaussian_blur(&img, p.smoothing, blur_kernel_size(p.smoothing, 3.0, h.max(w)))?;
    }
    Ok((img.map(|v| v.clamp(0.0, 255.0)), blobs))
}

fn texture_from(h: usize, w: usize, style: &Texture, rng: &mut ChaCha8Rng) -> Result<ImageBuffer> {
    if h == 0 || w == 0 {
        return Err(dim_err!("texture size must be positive"));
    }
    match style {
        Texture::CellBlobs(p) => Ok(cell_blobs(h, w, p, rng)?.0),
        Texture::FilteredNoise(p) => {
            let n = smooth_noise(h, w, p.sigma, p.amplitude, rng)?;
            ImageBuffer::new(h, w, n.iter().map(|v| (p.mean + v).clamp(0.0, 255.0)).collect())
        }
        Texture::FromSources { images } => {
            if images.is_empty() {
                return Err(Error::Input("no source images".into()));
            }
            let src = &images[rng.random_range(0..images.len())];
            if src.height() < h || src.width() < w {
                return Err(dim_err!(
                    "source {:?} smaller than requested {h}x{w}",
                    src.shape()
                ));
            }
            let top = rng.random_range(0..=src.height() - h);
            let left = rng.random_range(0..=src.width() - w);
            crop(&src.to_gray(), top, left, h, w)
        }
    }
}

/// Deterministic texture for `seed`.
pub fn generate_texture(h: usize, w: usize, style: &Texture, seed: u64) -> Result<ImageBuffer> {
    texture_from(h, w, style, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degradation {
    Noise,
    Blur,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitNorm {
    /// Per-axis distance.
    #[default]
    Chebyshev,
    Euclidean,
}

impl HitNorm {
    pub fn distance(self, a: (i64, i64), b: (i64, i64)) -> f64 {
        let (d0, d1) = ((a.0 - b.0) as f64, (a.1 - b.1) as f64);
        match self {
            HitNorm::Chebyshev => d0.abs().max(d1.abs()),
            HitNorm::Euclidean => d0.hypot(d1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub target_size: usize,
    pub tile_size: usize,
    pub trials_per_level: usize,
    pub hit_threshold: f64,
    pub hit_norm: HitNorm,
    pub degradation: Degradation,
    pub levels: Vec<f64>,
    pub metrics: Vec<Metric>,
    pub seed: u64,
    /// Clip noisy tiles to the 8-bit range.
    pub clip_8bit: bool,
    /// Blur kernel half-width in units of σ.
    pub blur_truncate: f64,
    pub texture: Texture,
    /// Reuse one target for every trial instead of drawing a new one.
    pub fixed_source: bool,
    pub overlap: OverlapPolicy,
    pub windowed: bool,
    /// Record wall-clock time per registration (makes output nondeterministic).
    pub timing: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            target_size: 460,
            tile_size: 260,
            trials_per_level: 100,
            hit_threshold: 5.0,
            hit_norm: HitNorm::Chebyshev,
            degradation: Degradation::Noise,
            levels: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0],
            metrics: SWEEP_METRICS.to_vec(),
            seed: 0,
            clip_8bit: true,
            blur_truncate: 1.0,
            texture: Texture::default(),
            fixed_source: false,
            overlap: OverlapPolicy::Full,
            windowed: true,
            timing: false,
        }
    }
}

impl SweepConfig {
    pub fn noise() -> Self {
        Self::default()
    }

    pub fn blur() -> Self {
        Self {
            degradation: Degradation::Blur,
            levels: vec![0.0, 10.0, 20.0, 30.0, 40.0, 50.0],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tile_size == 0 || self.tile_size >= self.target_size {
            return Err(Error::Parameter(format!(
                "tile size {} must be positive and below target size {}",
                self.tile_size, self.target_size
            )));
        }
        if self.trials_per_level == 0 {
            return Err(Error::Parameter("need at least one trial per level".into()));
        }
        if self.metrics.is_empty() {
            return Err(Error::Parameter("no metrics selected".into()));
        }
        if self.levels.is_empty() {
            return Err(Error::Parameter("no degradation levels".into()));
        }
        for (k, &l) in self.levels.iter().enumerate() {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::Parameter(format!("level {l} must be finite and >= 0")));
            }
            if k > 0 && l < self.levels[k - 1] {
                return Err(Error::Parameter("levels must be ascending".into()));
            }
        }
        if !(self.blur_truncate > 0.0 && self.blur_truncate.is_finite()) {
            return Err(Error::Parameter("blur truncation must be finite and > 0".into()));
        }
        if !(self.hit_threshold >= 0.0) {
            return Err(Error::Parameter("hit threshold must be >= 0".into()));
        }
        Ok(())
    }
}

/// Smallest odd size covering `±truncate·σ`, capped at the largest odd size
/// `<= cap`.
pub fn blur_kernel_size(sigma: f64, truncate: f64, cap: usize) -> usize {
    let mut k = (2.0 * truncate * sigma + 1.0).ceil() as usize;
    if k % 2 == 0 {
        k += 1;
    }
    let cap = if cap % 2 == 0 { cap - 1 } else { cap };
    k.min(cap).max(1)
}

pub fn degrade(
    tile: &ImageBuffer,
    kind: Degradation,
    level: f64,
    clip_8bit: bool,
    blur_truncate: f64,
    noise_seed: u64,
) -> Result<ImageBuffer> {
    match kind {
        Degradation::Noise => {
            let clip = clip_8bit.then_some((0.0, 255.0));
            add_gaussian_noise(tile, level, noise_seed, clip)
        }
        Degradation::Blur => {
            let k = blur_kernel_size(level, blur_truncate, tile.height().min(tile.width()));
            gaussian_blur(tile, level, k)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub metric: Metric,
    pub level: f64,
    pub trial: usize,
    pub true_shift: (i64, i64),
    pub recovered: Option<(i64, i64)>,
    pub hit: bool,
    /// Registration returned no feasible shift.
    pub failed: bool,
    pub runtime_ms: f64,
}

pub const SWEEP_METRICS: [Metric; 4] = [Metric::Mse, Metric::Cc, Metric::Pc, Metric::Bipc];

// stream layout: scene streams per trial on the base seed; noise uses a
// separate key per (seed, level) with one stream per trial
const SCENE_STREAM: u64 = 1 << 40;
const FIXED_SOURCE_STREAM: u64 = u64::MAX;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Keyed by the level value, so a level draws the same noise whatever other
/// levels share the sweep.
fn noise_rng(seed: u64, level: f64, trial: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&level.to_bits().to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(trial as u64);
    rng
}

struct Scene {
    target: ImageBuffer,
    offset: (usize, usize),
}

fn scene(cfg: &SweepConfig, trial: usize, fixed: Option<&ImageBuffer>) -> Result<Scene> {
    let mut rng = stream_rng(cfg.seed, SCENE_STREAM + trial as u64);
    let n = cfg.target_size;
    let target = match fixed {
        Some(t) => t.clone(),
        None => texture_from(n, n, &cfg.texture, &mut rng)?,
    };
    let span = n - cfg.tile_size;
    let offset = (rng.random_range(0..=span), rng.random_range(0..=span));
    Ok(Scene { target, offset })
}

fn run_trial(
    cfg: &SweepConfig,
    level_idx: usize,
    trial: usize,
    fixed: Option<&ImageBuffer>,
) -> Result<Vec<TrialRecord>> {
    let level = cfg.levels[level_idx];
    let sc = scene(cfg, trial, fixed)?;
    let t = cfg.tile_size;
    let tile = crop(&sc.target, sc.offset.0, sc.offset.1, t, t)?;
    let noise_seed = noise_rng(cfg.seed, level, trial).random::<u64>();
    let moving = degrade(&tile, cfg.degradation, level, cfg.clip_8bit, cfg.blur_truncate, noise_seed)?;
    let fm = BinaryMask::full(cfg.target_size, cfg.target_size);
    let mm = BinaryMask::full(t, t);
    let truth = (sc.offset.0 as i64, sc.offset.1 as i64);

    cfg.metrics
        .iter()
        .map(|&metric| {
            let rc = RegistrationConfig {
                overlap: cfg.overlap,
                windowed: cfg.windowed,
                ..RegistrationConfig::translation(metric)
            };
            let start = cfg.timing.then(Instant::now);
            let res = register_translation(&sc.target, &fm, &moving, &mm, &rc);
            let runtime_ms = start.map_or(0.0, |s| s.elapsed().as_secs_f64() * 1e3);
            let (recovered, failed) = match res {
                Ok(tr) => (Some((tr.du, tr.dv)), false),
                Err(Error::NoSolution(_)) => (None, true),
                Err(e) => return Err(e),
            };
            let hit = recovered
                .is_some_and(|r| cfg.hit_norm.distance(r, truth) <= cfg.hit_threshold);
            Ok(TrialRecord {
                metric,
                level,
                trial,
                true_shift: truth,
                recovered,
                hit,
                failed,
                runtime_ms,
            })
        })
        .collect()
}

/// Runs every (level, trial) pair in parallel; records come back ordered by
/// level, trial, then metric, independent of scheduling.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let fixed = if cfg.fixed_source {
        let mut rng = stream_rng(cfg.seed, FIXED_SOURCE_STREAM);
        Some(texture_from(cfg.target_size, cfg.target_size, &cfg.texture, &mut rng)?)
    } else {
        None
    };
    let jobs: Vec<(usize, usize)> = (0..cfg.levels.len())
        .flat_map(|l| (0..cfg.trials_per_level).map(move |t| (l, t)))
        .collect();
    let per_job: Vec<Result<Vec<TrialRecord>>> = jobs
        .par_iter()
        .map(|&(l, t)| run_trial(cfg, l, t, fixed.as_ref()))
        .collect();
    let mut out = Vec::with_capacity(jobs.len() * cfg.metrics.len());
    for r in per_job {
        out.extend(r?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub metric: Metric,
    pub level: f64,
    pub trials: usize,
    pub hits: usize,
    pub rate: f64,
    pub mean_runtime_ms: f64,
}

/// Hit rate per (metric, level), ordered by metric then level.
pub fn hit_rate(records: &[TrialRecord]) -> Vec<RateRow> {
    let mut rows: Vec<RateRow> = Vec::new();
    let mut runtime: Vec<f64> = Vec::new();
    for r in records {
        let idx = rows
            .iter()
            .position(|row| row.metric == r.metric && row.level.to_bits() == r.level.to_bits());
        let i = idx.unwrap_or_else(|| {
            rows.push(RateRow {
                metric: r.metric,
                level: r.level,
                trials: 0,
                hits: 0,
                rate: 0.0,
                mean_runtime_ms: 0.0,
            });
            runtime.push(0.0);
            rows.len() - 1
        });
        rows[i].trials += 1;
        rows[i].hits += r.hit as usize;
        runtime[i] += r.runtime_ms;
    }
    for (row, t) in rows.iter_mut().zip(&runtime) {
        row.rate = row.hits as f64 / row.trials as f64;
        row.mean_runtime_ms = t / row.trials as f64;
    }
    let metric_rank = |m: Metric| Metric::ALL.iter().position(|&x| x == m).unwrap_or(usize::MAX);
    rows.sort_by(|a, b| {
        metric_rank(a.metric)
            .cmp(&metric_rank(b.metric))
            .then(a.level.total_cmp(&b.level))
    });
    rows
}

pub const CSV_HEADER: &str = "metric,level,trials,hits,rate,mean_runtime_ms";

/// Table as CSV with a fixed column order; floats use the shortest
/// representation that parses back to the same value.
pub fn rates_to_csv(rows: &[RateRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.metric, r.level, r.trials, r.hits, r.rate, r.mean_runtime_ms
        );
    }
    s
}

pub fn rates_from_csv(text: &str) -> Result<Vec<RateRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Input("unexpected CSV header".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::Input(format!("malformed CSV row {}: {line:?}", i + 1));
            if f.len() != 6 {
                return Err(bad());
            }
            Ok(RateRow {
                metric: f[0].parse()?,
                level: f[1].parse().map_err(|_| bad())?,
                trials: f[2].parse().map_err(|_| bad())?,
                hits: f[3].parse().map_err(|_| bad())?,
                rate: f[4].parse().map_err(|_| bad())?,
                mean_runtime_ms: f[5].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Line plot of hit rate against level, one polyline per metric.
pub fn rates_to_svg(rows: &[RateRow], x_label: &str) -> String {
    let (w, h, m) = (640.0, 400.0, 50.0);
    let max_level = rows.iter().map(|r| r.level).fold(0.0, f64::max).max(1e-9);
    let x = |l: f64| m + (w - 2.0 * m) * l / max_level;
    let y = |r: f64| h - m - (h - 2.0 * m) * r;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{m} {m} L{m} {} L{} {}" fill="none" stroke="black"/>"#,
        h - m,
        w - m,
        h - m
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{x_label}</text>"#,
        w / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" font-size="14" transform="rotate(-90 14 {})" text-anchor="middle">hit rate</text>"#,
        h / 2.0,
        h / 2.0
    );
    let mut metrics: Vec<Metric> = Vec::new();
    for r in rows {
        if !metrics.contains(&r.metric) {
            metrics.push(r.metric);
        }
    }
    for (k, metric) in metrics.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = rows
            .iter()
            .filter(|r| r.metric == *metric)
            .map(|r| format!("{:.2},{:.2}", x(r.level), y(r.rate)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" fill="{color}">{metric}</text>"#,
            w - m + 4.0,
            m + 16.0 * k as f64
        );
    }
    s.push_str("</svg>\n");
    s
}
