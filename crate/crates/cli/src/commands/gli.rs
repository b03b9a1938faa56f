use std::path::PathBuf;

use regloss_core::metrics::{gli_image, gli_profiles, GliConfig, GliProfile};
use regloss_core::numeric::pairwise_mean;
use serde::{Deserialize, Serialize};

use crate::config::layer;
use crate::error::{CliError, CliResult};
use crate::{io, Context};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Stain image; intensities are scaled to [0, 1] by the file's bit depth.
    pub stain: PathBuf,
    /// Odd adaptive-threshold window in pixels.
    #[arg(long)]
    pub window: Option<usize>,
    /// Threshold offset below the local mean, in [0, 1] intensity units.
    #[arg(long)]
    pub offset: Option<f64>,
    /// GLI block size in pixels.
    #[arg(long)]
    pub block: Option<usize>,
    /// Number of vertical profiles to sample (0 skips profiles).
    #[arg(long)]
    pub profiles: Option<usize>,
    /// Odd moving-average length applied along each profile.
    #[arg(long)]
    pub smooth: Option<usize>,
    /// GLI image (FRAS keeps values, PNG stores them times 255).
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Profiles as CSV, one row per GLI row.
    #[arg(long)]
    pub profiles_csv: Option<PathBuf>,
    /// Summary JSON (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub gli: GliConfig,
    pub profiles: usize,
    pub smooth: usize,
}

#[derive(Debug, Serialize)]
struct GliOut {
    height: usize,
    width: usize,
    mean: f64,
    profiles: Option<GliProfile>,
}

fn profiles_csv(p: &GliProfile) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::io(e.to_string());
    let mut header = vec!["row".to_string(), "average".to_string()];
    header.extend(p.columns.iter().map(|c| format!("col_{c}")));
    w.write_record(&header).map_err(err)?;
    for (r, avg) in p.average_profile.iter().enumerate() {
        let mut row = vec![r.to_string(), avg.to_string()];
        row.extend(p.profiles.iter().map(|prof| prof[r].to_string()));
        w.write_record(&row).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::io(e.to_string()))
}

pub fn run(ctx: &Context, a: Args) -> CliResult<()> {
    let defaults = Settings {
        gli: GliConfig::default(),
        profiles: 0,
        smooth: 1,
    };
    let mut s = layer(&defaults, ctx.overrides.as_ref())?;
    if let Some(v) = a.window {
        s.gli.window = v;
    }
    if let Some(v) = a.offset {
        s.gli.offset = v;
    }
    if let Some(v) = a.block {
        s.gli.block = v;
    }
    if let Some(v) = a.profiles {
        s.profiles = v;
    }
    if let Some(v) = a.smooth {
        s.smooth = v;
    }
    if a.profiles_csv.is_some() && s.profiles == 0 {
        return Err(CliError::flags("--profiles-csv needs --profiles > 0"));
    }

    let (stain, depth) = io::read_gray(&a.stain)?;
    let scale = depth.full_scale();
    let stain = stain.map(|v| v / scale);
    let gli = gli_image(&stain, &s.gli)?;
    let profiles = (s.profiles > 0)
        .then(|| gli_profiles(&gli, s.profiles, s.smooth))
        .transpose()?;
    if let Some(p) = &a.image {
        io::write_raster(p, &gli, 255.0)?;
    }
    if let (Some(path), Some(prof)) = (&a.profiles_csv, &profiles) {
        io::write_bytes(path, profiles_csv(prof)?.as_bytes())?;
    }
    let out = GliOut {
        height: gli.height(),
        width: gli.width(),
        mean: pairwise_mean(gli.data()),
        profiles,
    };
    io::emit(a.out.as_deref(), &io::to_json(&out)?)?;

    let mut rec = ctx.record(&s)?;
    rec.input("stain", &a.stain);
    rec.output("summary", a.out.as_deref());
    if let Some(p) = &a.image {
        rec.output("image", Some(p));
    }
    if let Some(p) = &a.profiles_csv {
        rec.output("profiles_csv", Some(p));
    }
    rec.write(ctx.sidecar.as_deref(), a.out.as_deref().or(a.image.as_deref()))
}
