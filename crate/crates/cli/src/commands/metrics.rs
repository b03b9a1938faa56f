use std::path::PathBuf;

use regloss_core::metrics::{mutual_information, rmse, ssim, SsimParams};
use regloss_core::BinaryMask;
use serde::{Deserialize, Serialize};

use crate::config::layer;
use crate::error::CliResult;
use crate::{io, Context};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// First image; color inputs are reduced to luma.
    pub a: PathBuf,
    pub b: PathBuf,
    /// Nonzero pixels are compared (default: all).
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Histogram bins per axis for mutual information.
    #[arg(long)]
    pub bins: Option<usize>,
    /// SSIM dynamic range (default: full scale of the input encoding, 1 for
    /// float rasters).
    #[arg(long)]
    pub dynamic_range: Option<f64>,
    /// Result JSON (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub bins: usize,
    pub ssim: SsimParams,
}

#[derive(Debug, Serialize)]
struct MetricsOut {
    rmse: f64,
    ssim: f64,
    mutual_information: f64,
}

pub fn run(ctx: &Context, a: Args) -> CliResult<()> {
    let (img_a, depth_a) = io::read_gray(&a.a)?;
    let (img_b, depth_b) = io::read_gray(&a.b)?;
    let defaults = Settings {
        bins: 64,
        ssim: SsimParams {
            dynamic_range: depth_a.full_scale().max(depth_b.full_scale()),
            ..SsimParams::default()
        },
    };
    let mut s = layer(&defaults, ctx.overrides.as_ref())?;
    if let Some(v) = a.bins {
        s.bins = v;
    }
    if let Some(v) = a.dynamic_range {
        s.ssim.dynamic_range = v;
    }
    let mask = match &a.mask {
        Some(p) => io::read_mask(p)?,
        None => BinaryMask::full(img_a.height(), img_a.width()),
    };
    let out = MetricsOut {
        rmse: rmse(&img_a, &img_b, &mask)?,
        ssim: ssim(&img_a, &img_b, &mask, &s.ssim)?,
        mutual_information: mutual_information(&img_a, &img_b, s.bins, &mask)?,
    };
    io::emit(a.out.as_deref(), &io::to_json(&out)?)?;

    let mut rec = ctx.record(&s)?;
    rec.input("a", &a.a).input("b", &a.b);
    if let Some(p) = &a.mask {
        rec.input("mask", p);
    }
    rec.output("metrics", a.out.as_deref());
    rec.write(ctx.sidecar.as_deref(), a.out.as_deref())
}
