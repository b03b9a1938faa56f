use std::path::PathBuf;

use regloss_core::loss::{
    equivariance_loss, gram_style_loss, reconstruction_loss, total_loss, FeatureLayer, LossWeights,
    Reduction,
};
use regloss_core::registration::{Metric, RigidTransform};
use regloss_core::BinaryMask;
use serde::{Deserialize, Serialize};

use crate::config::layer;
use crate::error::{CliError, CliResult};
use crate::{io, Context};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReductionKind {
    Rms,
    Norm,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Generated image.
    pub pred: PathBuf,
    /// Target image, at least as large as the prediction.
    pub target: PathBuf,
    #[arg(long)]
    pub target_mask: Option<PathBuf>,
    /// JSON with `du`, `dv` and optional `theta`: prediction pixel `x` is
    /// compared with the target, rotated by `theta` about its center, at
    /// `x - (du, dv)` (default: all zero).
    #[arg(long)]
    pub transform: Option<PathBuf>,
    /// Feature rasters `PRED TARGET` (channels are feature maps) for one
    /// style layer; repeatable. Without it the image channels form the
    /// only layer.
    #[arg(long, num_args = 2, value_names = ["PRED", "TARGET"])]
    pub style_layer: Vec<PathBuf>,
    /// Generator outputs `G(x) G(Ω(x))` for the equivariance term
    /// (default: term omitted, reported as 0).
    #[arg(long, num_args = 2, value_names = ["G_X", "G_OMEGA_X"])]
    pub equivariance: Vec<PathBuf>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub style_scale: Option<f64>,
    /// Equivariance reduction: per-pixel RMS or plain Euclidean norm.
    #[arg(long, value_enum)]
    pub reduction: Option<ReductionKind>,
    /// Result JSON (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub weights: LossWeights,
    pub reduction: Reduction,
}

#[derive(Debug, Deserialize)]
struct TransformFile {
    du: i64,
    dv: i64,
    #[serde(default)]
    theta: f64,
}

#[derive(Debug, Serialize)]
struct LossOut {
    l_r: f64,
    l_s: f64,
    l_e: f64,
    total: f64,
}

fn read_transform(path: Option<&std::path::Path>) -> CliResult<RigidTransform> {
    let t = match path {
        Some(p) => {
            let v = io::read_json(p)?;
            serde_json::from_value::<TransformFile>(v)
                .map_err(|e| CliError::io(format!("invalid transform: {e}")).at(p))?
        }
        None => TransformFile { du: 0, dv: 0, theta: 0.0 },
    };
    Ok(RigidTransform {
        du: t.du,
        dv: t.dv,
        theta: t.theta,
        score: 0.0,
        metric: Metric::Mse,
    })
}

pub fn run(ctx: &Context, a: Args) -> CliResult<()> {
    let defaults = Settings {
        weights: LossWeights::default(),
        reduction: Reduction::default(),
    };
    let mut s = layer(&defaults, ctx.overrides.as_ref())?;
    if let Some(v) = a.lambda {
        s.weights.lambda = v;
    }
    if let Some(v) = a.eta {
        s.weights.eta = v;
    }
    if let Some(v) = a.style_scale {
        s.weights.style_scale = v;
    }
    if let Some(r) = a.reduction {
        s.reduction = match r {
            ReductionKind::Rms => Reduction::Rms,
            ReductionKind::Norm => Reduction::Norm,
        };
    }
    s.weights.validate()?;

    let (pred, _) = io::read_raster(&a.pred)?;
    let (target, _) = io::read_raster(&a.target)?;
    let mask = match &a.target_mask {
        Some(p) => io::read_mask(p)?,
        None => BinaryMask::full(target.height(), target.width()),
    };
    let t = read_transform(a.transform.as_deref())?;
    let l_r = reconstruction_loss(&pred, &target, &mask, &t)?;

    let l_s = if a.style_layer.is_empty() {
        let aligned =
            regloss_core::registration::apply_rigid(&target, Some(&mask), &t, pred.height(), pred.width())?;
        gram_style_loss(&[FeatureLayer::from_image(&pred)], &[FeatureLayer::from_image(&aligned)])?
    } else {
        let mut ours = Vec::new();
        let mut theirs = Vec::new();
        for pair in a.style_layer.chunks_exact(2) {
            ours.push(FeatureLayer::from_image(&io::read_raster(&pair[0])?.0));
            theirs.push(FeatureLayer::from_image(&io::read_raster(&pair[1])?.0));
        }
        gram_style_loss(&ours, &theirs)?
    };

    let l_e = match a.equivariance.as_slice() {
        [gx, gox] => equivariance_loss(&io::read_raster(gx)?.0, &io::read_raster(gox)?.0, s.reduction)?,
        _ => 0.0,
    };
    let total = total_loss(l_r, l_s, l_e, &s.weights)?;
    io::emit(a.out.as_deref(), &io::to_json(&LossOut { l_r, l_s, l_e, total })?)?;

    let mut rec = ctx.record(&s)?;
    rec.input("pred", &a.pred).input("target", &a.target);
    if let Some(p) = &a.target_mask {
        rec.input("target_mask", p);
    }
    if let Some(p) = &a.transform {
        rec.input("transform", p);
    }
    for (k, pair) in a.style_layer.chunks_exact(2).enumerate() {
        rec.input(&format!("style_layer_{k}_pred"), &pair[0]);
        rec.input(&format!("style_layer_{k}_target"), &pair[1]);
    }
    if let [gx, gox] = a.equivariance.as_slice() {
        rec.input("g_x", gx).input("g_omega_x", gox);
    }
    rec.output("losses", a.out.as_deref());
    rec.write(ctx.sidecar.as_deref(), a.out.as_deref())
}
