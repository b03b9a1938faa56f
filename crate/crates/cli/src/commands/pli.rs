use std::path::PathBuf;

use regloss_core::pli::{
    default_angles, equidistant_angles, fit_stack, gamma_scale, render_fom, synthesize_stack,
};
use regloss_core::ImageBuffer;
use serde::{Deserialize, Serialize};

use crate::config::layer;
use crate::error::{CliError, CliResult};
use crate::{io, Context};

#[derive(Debug, clap::Subcommand)]
pub enum Command {
    /// Polarizer image stack from a parameter raster (I_T, sin δ, φ).
    Sim(SimArgs),
    /// Parameter raster from a polarizer image stack.
    Fit(FitArgs),
    /// Fiber orientation map rendering of a parameter raster.
    Fom(FomArgs),
    /// Gamma correction of an image with values in [0, 1].
    Gamma(GammaArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Sim(_) => "pli sim",
            Command::Fit(_) => "pli fit",
            Command::Fom(_) => "pli fom",
            Command::Gamma(_) => "pli gamma",
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct SimArgs {
    /// 3-channel FRAS parameter raster.
    pub maps: PathBuf,
    /// Number of equidistant polarizer angles over half a turn.
    #[arg(long)]
    pub angles: Option<usize>,
    /// Output FRAS, one channel per angle.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct FitArgs {
    /// FRAS stack, one channel per equidistant polarizer angle starting at 0.
    pub stack: PathBuf,
    /// Output 3-channel FRAS parameter raster.
    #[arg(long)]
    pub out: PathBuf,
    /// Pixels whose direction is defined (retardation above the floor).
    #[arg(long)]
    pub defined_mask: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct FomArgs {
    pub maps: PathBuf,
    /// Optional gamma applied to the rendering.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// RGB output; PNG/TIFF store values times 255.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct GammaArgs {
    /// Input image; 8/16-bit files are scaled to [0, 1] first.
    pub image: PathBuf,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleSettings {
    /// Polarizer angles in radians.
    pub angles: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSettings {
    pub gamma: Option<f64>,
}

fn read_maps(path: &std::path::Path) -> CliResult<ImageBuffer> {
    let (maps, _) = io::read_raster(path)?;
    if maps.channels() != 3 {
        return Err(CliError::io(format!(
            "parameter raster needs 3 channels (I_T, sin δ, φ), found {}",
            maps.channels()
        ))
        .at(path));
    }
    Ok(maps)
}

fn sim(ctx: &Context, a: SimArgs) -> CliResult<()> {
    let mut s = layer(&AngleSettings { angles: default_angles() }, ctx.overrides.as_ref())?;
    if let Some(n) = a.angles {
        s.angles = equidistant_angles(n);
    }
    let maps = read_maps(&a.maps)?;
    let stack = synthesize_stack(&maps, &s.angles)?;
    io::write_raster(&a.out, &ImageBuffer::from_planes(&stack)?, 1.0)?;
    let mut rec = ctx.record(&s)?;
    rec.input("maps", &a.maps).output("stack", Some(&a.out));
    rec.write(ctx.sidecar.as_deref(), Some(&a.out))
}

fn fit(ctx: &Context, a: FitArgs) -> CliResult<()> {
    let (stack, _) = io::read_raster(&a.stack)?;
    let defaults = AngleSettings {
        angles: equidistant_angles(stack.channels()),
    };
    let s = layer(&defaults, ctx.overrides.as_ref())?;
    let planes: Vec<ImageBuffer> = (0..stack.channels()).map(|c| stack.channel(c)).collect();
    let (maps, defined) = fit_stack(&planes, &s.angles)?;
    let undefined = defined.data().iter().filter(|&&d| !d).count();
    if undefined > 0 {
        log::warn!("direction undefined at {undefined} pixels");
    }
    io::write_raster(&a.out, &maps, 1.0)?;
    if let Some(p) = &a.defined_mask {
        io::write_raster(p, &defined.to_image(), 255.0)?;
    }
    let mut rec = ctx.record(&s)?;
    rec.input("stack", &a.stack).output("maps", Some(&a.out));
    if let Some(p) = &a.defined_mask {
        rec.output("defined_mask", Some(p));
    }
    rec.write(ctx.sidecar.as_deref(), Some(&a.out))
}

fn fom(ctx: &Context, a: FomArgs) -> CliResult<()> {
    let mut s = layer(&GammaSettings { gamma: None }, ctx.overrides.as_ref())?;
    if a.gamma.is_some() {
        s.gamma = a.gamma;
    }
    let mut rgb = render_fom(&read_maps(&a.maps)?)?;
    if let Some(g) = s.gamma {
        rgb = gamma_scale(&rgb, g)?;
    }
    io::write_raster(&a.out, &rgb, 255.0)?;
    let mut rec = ctx.record(&s)?;
    rec.input("maps", &a.maps).output("fom", Some(&a.out));
    rec.write(ctx.sidecar.as_deref(), Some(&a.out))
}

fn gamma(ctx: &Context, a: GammaArgs) -> CliResult<()> {
    let mut s = layer(&GammaSettings { gamma: Some(1.0) }, ctx.overrides.as_ref())?;
    if a.gamma.is_some() {
        s.gamma = a.gamma;
    }
    let g = s.gamma.ok_or_else(|| CliError::flags("gamma value required"))?;
    let (img, depth) = io::read_raster(&a.image)?;
    let scale = depth.full_scale();
    let out = gamma_scale(&img.map(|v| v / scale), g)?;
    io::write_raster(&a.out, &out, 255.0)?;
    let mut rec = ctx.record(&s)?;
    rec.input("image", &a.image).output("image", Some(&a.out));
    rec.write(ctx.sidecar.as_deref(), Some(&a.out))
}

pub fn run(ctx: &Context, c: Command) -> CliResult<()> {
    match c {
        Command::Sim(a) => sim(ctx, a),
        Command::Fit(a) => fit(ctx, a),
        Command::Fom(a) => fom(ctx, a),
        Command::Gamma(a) => gamma(ctx, a),
    }
}
