use std::path::{Path, PathBuf};
use std::sync::Arc;

use regloss_core::bench::{
    hit_rate, rates_to_csv, rates_to_svg, run_sweep, BlobParams, Degradation, HitNorm,
    NoiseTextureParams, RateRow, SweepConfig, Texture, TrialRecord,
};
use regloss_core::registration::{Metric, OverlapPolicy};
use regloss_core::ImageBuffer;
use serde::Serialize;
use serde_json::Value;

use crate::config::layer;
use crate::error::{CliError, CliResult};
use crate::{io, parse, Context};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TextureKind {
    CellBlobs,
    FilteredNoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum NormKind {
    Chebyshev,
    Euclidean,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub target_size: Option<usize>,
    #[arg(long)]
    pub tile_size: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Pixels between recovered and true shift that still count as a hit.
    #[arg(long)]
    pub hit_threshold: Option<f64>,
    #[arg(long, value_enum)]
    pub hit_norm: Option<NormKind>,
    /// Comma-separated ascending σ values.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    /// Comma-separated metrics.
    #[arg(long, value_delimiter = ',', value_parser = parse::metric)]
    pub metrics: Option<Vec<Metric>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Clip noisy tiles to [0, 255].
    #[arg(long)]
    pub clip_8bit: Option<bool>,
    /// Blur kernel half-width in units of σ.
    #[arg(long)]
    pub blur_truncate: Option<f64>,
    #[arg(long, value_enum, conflicts_with = "source_dir")]
    pub texture: Option<TextureKind>,
    /// Draw targets as random crops of the images in this directory.
    #[arg(long)]
    pub source_dir: Option<PathBuf>,
    /// Reuse a single target for all trials.
    #[arg(long)]
    pub fixed_source: Option<bool>,
    #[arg(long, value_parser = parse::overlap)]
    pub overlap: Option<OverlapPolicy>,
    #[arg(long)]
    pub windowed: Option<bool>,
    /// Record per-registration wall time (output is then not reproducible).
    #[arg(long)]
    pub timing: Option<bool>,
    /// Rate table as CSV (default: stdout when no other output is given).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Rates and per-trial records as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Line plot of hit rate against level.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Serialize)]
struct SweepReport<'a> {
    rates: &'a [RateRow],
    records: &'a [TrialRecord],
}

fn load_sources(dir: &Path) -> CliResult<Vec<ImageBuffer>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::from(e).at(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "tif" | "tiff" | "fras"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::io("no .png, .tif or .fras images found").at(dir));
    }
    paths.iter().map(|p| io::read_gray(p).map(|(img, _)| img)).collect()
}

fn defaults(kind: Degradation) -> SweepConfig {
    match kind {
        Degradation::Noise => SweepConfig::noise(),
        Degradation::Blur => SweepConfig::blur(),
    }
}

/// Defaults for `kind`, then config overrides, then flags.
pub fn resolve(overrides: Option<&Value>, a: &Args, kind: Degradation) -> CliResult<SweepConfig> {
    let a = a.clone();
    let mut cfg = layer(&defaults(kind), overrides)?;
    if cfg.degradation != kind {
        return Err(CliError::flags(format!(
            "config degradation {:?} contradicts the subcommand",
            cfg.degradation
        )));
    }
    macro_rules! set {
        ($($field:ident <- $flag:expr),* $(,)?) => {
            $(if let Some(v) = $flag { cfg.$field = v; })*
        };
    }
    set!(
        target_size <- a.target_size,
        tile_size <- a.tile_size,
        trials_per_level <- a.trials,
        hit_threshold <- a.hit_threshold,
        levels <- a.levels,
        metrics <- a.metrics,
        seed <- a.seed,
        clip_8bit <- a.clip_8bit,
        blur_truncate <- a.blur_truncate,
        fixed_source <- a.fixed_source,
        overlap <- a.overlap,
        windowed <- a.windowed,
        timing <- a.timing,
    );
    if let Some(n) = a.hit_norm {
        cfg.hit_norm = match n {
            NormKind::Chebyshev => HitNorm::Chebyshev,
            NormKind::Euclidean => HitNorm::Euclidean,
        };
    }
    match a.texture {
        Some(TextureKind::CellBlobs) if !matches!(cfg.texture, Texture::CellBlobs(_)) => {
            cfg.texture = Texture::CellBlobs(BlobParams::default());
        }
        Some(TextureKind::FilteredNoise) if !matches!(cfg.texture, Texture::FilteredNoise(_)) => {
            cfg.texture = Texture::FilteredNoise(NoiseTextureParams::default());
        }
        _ => {}
    }
    if let Some(dir) = &a.source_dir {
        cfg.texture = Texture::FromSources {
            images: Arc::new(load_sources(dir)?),
        };
    } else if matches!(&cfg.texture, Texture::FromSources { .. }) {
        return Err(CliError::flags("texture from_sources needs --source-dir"));
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(ctx: &Context, a: Args, kind: Degradation) -> CliResult<()> {
    let cfg = resolve(ctx.overrides.as_ref(), &a, kind)?;
    let records = run_sweep(&cfg)?;
    let rates = hit_rate(&records);
    for r in &rates {
        log::info!("{} level {}: {}/{}", r.metric, r.level, r.hits, r.trials);
    }

    let stdout_csv = a.csv.is_none() && a.json.is_none() && a.svg.is_none();
    if a.csv.is_some() || stdout_csv {
        io::emit(a.csv.as_deref(), &rates_to_csv(&rates))?;
    }
    if let Some(p) = &a.json {
        let report = SweepReport {
            rates: &rates,
            records: &records,
        };
        io::write_bytes(p, io::to_json(&report)?.as_bytes())?;
    }
    if let Some(p) = &a.svg {
        let label = match kind {
            Degradation::Noise => "noise σ",
            Degradation::Blur => "blur σ",
        };
        io::write_bytes(p, rates_to_svg(&rates, label).as_bytes())?;
    }

    let mut rec = ctx.record(&cfg)?;
    if let Some(d) = &a.source_dir {
        rec.input("source_dir", d);
    }
    if a.csv.is_some() || stdout_csv {
        rec.output("csv", a.csv.as_deref());
    }
    if let Some(p) = &a.json {
        rec.output("json", Some(p));
    }
    if let Some(p) = &a.svg {
        rec.output("svg", Some(p));
    }
    let primary = a.csv.as_deref().or(a.json.as_deref()).or(a.svg.as_deref());
    rec.write(ctx.sidecar.as_deref(), primary)
}
