use std::path::PathBuf;

use regloss_core::metrics::{f1_by_size_bins, match_instances, AreaBin, BinResult, MatchOptions, MatchResult};
use serde::{Deserialize, Serialize};

use crate::config::layer;
use crate::error::{CliError, CliResult};
use crate::{io, parse, Context};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Predicted instance labels (16-bit PNG/TIFF or FRAS, 0 = background).
    pub pred: PathBuf,
    /// Reference instance labels.
    pub target: PathBuf,
    /// Minimum IoU for a match.
    #[arg(long)]
    pub iou: Option<f64>,
    /// Instances smaller than this many µm² (after shrinkage) are ignored.
    #[arg(long)]
    pub min_area_um2: Option<f64>,
    /// Square micrometers per pixel.
    #[arg(long)]
    pub pixel_area: Option<f64>,
    /// Linear tissue shrinkage factor.
    #[arg(long)]
    pub shrinkage: Option<f64>,
    /// Comma-separated ascending area bin edges in µm², `inf` allowed; each
    /// consecutive pair forms a half-open bin.
    #[arg(long, value_delimiter = ',', value_parser = parse::bin_edge)]
    pub bins: Option<Vec<f64>>,
    /// Result JSON (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-bin table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub matching: MatchOptions,
    /// Area bin edges in µm².
    pub bin_edges: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct CellsOut {
    min_area_px: f64,
    overall: MatchResult,
    bins: Vec<BinResult>,
}

fn bins_from(edges: &[f64]) -> CliResult<Vec<AreaBin>> {
    if edges.len() == 1 {
        return Err(CliError::flags("need at least two bin edges"));
    }
    if edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(CliError::flags("bin edges must be strictly ascending"));
    }
    Ok(edges.windows(2).map(|w| AreaBin::new(w[0], w[1])).collect())
}

fn bins_csv(rows: &[BinResult]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::io(e.to_string());
    w.write_record(["lo", "hi", "predicted", "targets", "tp_pred", "tp_target", "fp", "fn", "f1"])
        .map_err(err)?;
    for r in rows {
        w.write_record([
            r.bin.lo.to_string(),
            r.bin.hi.to_string(),
            r.predicted.to_string(),
            r.targets.to_string(),
            r.tp_pred.to_string(),
            r.tp_target.to_string(),
            r.false_positives.to_string(),
            r.false_negatives.to_string(),
            r.f1.to_string(),
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::io(e.to_string()))
}

pub fn run(ctx: &Context, a: Args) -> CliResult<()> {
    let defaults = Settings {
        matching: MatchOptions::default(),
        bin_edges: Vec::new(),
    };
    let mut s = layer(&defaults, ctx.overrides.as_ref())?;
    if let Some(v) = a.iou {
        s.matching.iou_threshold = v;
    }
    if let Some(v) = a.min_area_um2 {
        s.matching.min_area_um2 = v;
    }
    if let Some(v) = a.pixel_area {
        s.matching.pixel_area = v;
    }
    if let Some(v) = a.shrinkage {
        s.matching.shrinkage = v;
    }
    if let Some(v) = a.bins {
        s.bin_edges = v;
    }
    let bins = bins_from(&s.bin_edges)?;

    let pred = io::read_labels(&a.pred)?;
    let target = io::read_labels(&a.target)?;
    let min_area_px = s.matching.min_area_px()?;
    let out = CellsOut {
        min_area_px,
        overall: match_instances(&pred, &target, min_area_px, s.matching.iou_threshold)?,
        bins: if bins.is_empty() {
            Vec::new()
        } else {
            f1_by_size_bins(&pred, &target, &bins, &s.matching)?
        },
    };
    io::emit(a.out.as_deref(), &io::to_json(&out)?)?;
    if let Some(p) = &a.csv {
        io::write_bytes(p, bins_csv(&out.bins)?.as_bytes())?;
    }

    let mut rec = ctx.record(&s)?;
    rec.input("pred", &a.pred).input("target", &a.target);
    rec.output("result", a.out.as_deref());
    if let Some(p) = &a.csv {
        rec.output("csv", Some(p));
    }
    rec.write(ctx.sidecar.as_deref(), a.out.as_deref().or(a.csv.as_deref()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edges_make_half_open_bins() {
        let b = bins_from(&[0.0, 100.0, f64::INFINITY]).unwrap();
        assert_eq!(b.len(), 2);
        assert!(b[1].contains(1e9));
        assert!(bins_from(&[]).unwrap().is_empty());
        assert!(bins_from(&[1.0]).is_err());
        assert!(bins_from(&[2.0, 1.0]).is_err());
    }
}
