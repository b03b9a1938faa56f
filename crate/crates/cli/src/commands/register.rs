use std::path::{Path, PathBuf};

use regloss_core::image::rotate_bilinear_masked;
use regloss_core::registration::{
    register_rigid, score_map, AngleGrid, Embedding, Metric, OverlapPolicy, RegistrationConfig,
    RigidTransform, ScoreMap, ShiftRegion,
};
use regloss_core::{BinaryMask, ImageBuffer};
use serde::Serialize;

use crate::config::layer;
use crate::error::CliResult;
use crate::{io, parse, Context};

#[derive(Debug, clap::Args)]
pub struct Args {
    pub fixed: PathBuf,
    pub moving: PathBuf,
    /// Nonzero pixels mark valid fixed pixels (default: all).
    #[arg(long)]
    pub fixed_mask: Option<PathBuf>,
    #[arg(long)]
    pub moving_mask: Option<PathBuf>,
    /// cc, mse, cc_circ, mse_circ, pc or bipc.
    #[arg(long, value_parser = parse::metric)]
    pub metric: Option<Metric>,
    /// Rotation grid in degrees, `start:stop:step`.
    #[arg(long, value_parser = parse::angles, allow_hyphen_values = true)]
    pub angles: Option<AngleGrid>,
    /// `full`, `min` (25% of the smaller footprint), `minN` or `min0.F`.
    #[arg(long, value_parser = parse::overlap)]
    pub overlap: Option<OverlapPolicy>,
    /// Search window `du_lo:du_hi,dv_lo:dv_hi`.
    #[arg(long, value_parser = parse::region, allow_hyphen_values = true)]
    pub region: Option<ShiftRegion>,
    /// Hann window for pc/bipc.
    #[arg(long)]
    pub windowed: Option<bool>,
    /// Placement of the smaller image for circular metrics: center or top-left.
    #[arg(long, value_parser = parse::embedding)]
    pub embedding: Option<Embedding>,
    /// Transform JSON (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Moving image resampled into the fixed frame, zero outside its footprint.
    #[arg(long)]
    pub warped: Option<PathBuf>,
    /// Score map at the selected angle as a 3-channel FRAS (value, valid,
    /// overlap) with a JSON description next to it.
    #[arg(long)]
    pub score_map: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct TransformOut {
    du: i64,
    dv: i64,
    theta: f64,
    score: f64,
    metric: Metric,
}

#[derive(Debug, Serialize)]
struct MapDescription {
    /// Raster index of the zero shift.
    origin: (isize, isize),
    metric: Metric,
    objective: regloss_core::registration::Objective,
    theta: f64,
    channels: [&'static str; 3],
}

fn mask_or_full(path: Option<&Path>, img: &ImageBuffer) -> CliResult<BinaryMask> {
    let Some(p) = path else {
        return Ok(BinaryMask::full(img.height(), img.width()));
    };
    let m = io::read_mask(p)?;
    if m.shape() != img.shape() {
        return Err(crate::error::CliError::io(format!(
            "mask is {:?}, image is {:?}",
            m.shape(),
            img.shape()
        ))
        .at(p));
    }
    Ok(m)
}

/// `moving` rotated by `t.theta` and pasted so fixed pixel `x` holds
/// rotated pixel `x - (du, dv)`.
fn warp_into_fixed(moving: &ImageBuffer, mm: &BinaryMask, t: &RigidTransform, h: usize, w: usize) -> ImageBuffer {
    let (rot, valid) = rotate_bilinear_masked(moving, Some(mm), t.theta, 0.0);
    let (mh, mw) = moving.shape();
    ImageBuffer::from_fn(h, w, |r, c| {
        let (sr, sc) = (r as i64 - t.du, c as i64 - t.dv);
        if sr < 0 || sc < 0 || sr >= mh as i64 || sc >= mw as i64 {
            return 0.0;
        }
        let (sr, sc) = (sr as usize, sc as usize);
        if valid.get(sr, sc) {
            rot.get(sr, sc)
        } else {
            0.0
        }
    })
}

fn map_raster(map: &ScoreMap) -> CliResult<ImageBuffer> {
    let valid: Vec<f64> = map.valid.iter().map(|&v| v as u8 as f64).collect();
    let planes = [
        ImageBuffer::new(map.rows, map.cols, map.values.clone())?,
        ImageBuffer::new(map.rows, map.cols, valid)?,
        ImageBuffer::new(map.rows, map.cols, map.overlap_counts.clone())?,
    ];
    Ok(ImageBuffer::from_planes(&planes)?)
}

pub fn run(ctx: &Context, a: Args) -> CliResult<()> {
    let mut cfg = layer(&RegistrationConfig::default(), ctx.overrides.as_ref())?;
    if let Some(v) = a.metric {
        cfg.metric = v;
    }
    if let Some(v) = a.angles {
        cfg.angles = v;
    }
    if let Some(v) = a.overlap {
        cfg.overlap = v;
    }
    if a.region.is_some() {
        cfg.region = a.region;
    }
    if let Some(v) = a.windowed {
        cfg.windowed = v;
    }
    if let Some(v) = a.embedding {
        cfg.embedding = v;
    }

    let (fixed, _) = io::read_gray(&a.fixed)?;
    let (moving, _) = io::read_gray(&a.moving)?;
    let fm = mask_or_full(a.fixed_mask.as_deref(), &fixed)?;
    let mm = mask_or_full(a.moving_mask.as_deref(), &moving)?;

    let t = register_rigid(&fixed, &fm, &moving, &mm, &cfg)?;
    log::info!("{} -> ({}, {}) at {} deg, score {}", cfg.metric, t.du, t.dv, t.theta, t.score);
    let out = TransformOut {
        du: t.du,
        dv: t.dv,
        theta: t.theta,
        score: t.score,
        metric: t.metric,
    };
    io::emit(a.out.as_deref(), &io::to_json(&out)?)?;

    if let Some(p) = &a.warped {
        let img = warp_into_fixed(&moving, &mm, &t, fixed.height(), fixed.width());
        io::write_raster(p, &img, 1.0)?;
    }
    if let Some(p) = &a.score_map {
        let (g, m) = if t.theta == 0.0 {
            (moving.clone(), mm.clone())
        } else {
            rotate_bilinear_masked(&moving, Some(&mm), t.theta, 0.0)
        };
        let map = score_map(&fixed, &fm, &g, &m, &cfg)?;
        io::write_raster(p, &map_raster(&map)?, 1.0)?;
        let desc = MapDescription {
            origin: map.origin,
            metric: map.metric,
            objective: map.objective,
            theta: t.theta,
            channels: ["value", "valid", "overlap"],
        };
        let mut side = p.as_os_str().to_owned();
        side.push(".json");
        io::write_bytes(Path::new(&side), io::to_json(&desc)?.as_bytes())?;
    }

    let mut rec = ctx.record(&cfg)?;
    rec.input("fixed", &a.fixed).input("moving", &a.moving);
    if let Some(p) = &a.fixed_mask {
        rec.input("fixed_mask", p);
    }
    if let Some(p) = &a.moving_mask {
        rec.input("moving_mask", p);
    }
    rec.output("transform", a.out.as_deref());
    if let Some(p) = &a.warped {
        rec.output("warped", Some(p));
    }
    if let Some(p) = &a.score_map {
        rec.output("score_map", Some(p));
    }
    rec.write(ctx.sidecar.as_deref(), a.out.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warp_places_moving_at_shift() {
        let moving = ImageBuffer::from_fn(2, 3, |r, c| (r * 3 + c + 1) as f64);
        let mm = BinaryMask::full(2, 3);
        let t = RigidTransform {
            du: 1,
            dv: 2,
            theta: 0.0,
            score: 0.0,
            metric: Metric::Cc,
        };
        let w = warp_into_fixed(&moving, &mm, &t, 4, 6);
        assert_eq!(w.get(1, 2), 1.0);
        assert_eq!(w.get(2, 4), 6.0);
        assert_eq!(w.get(0, 0), 0.0);
        assert_eq!(w.data().iter().filter(|&&v| v != 0.0).count(), 6);
    }
}
