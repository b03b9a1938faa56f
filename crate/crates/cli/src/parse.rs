//! Flag value parsers.

use regloss_core::registration::{AngleGrid, Embedding, Metric, OverlapPolicy, ShiftRegion};

pub fn metric(s: &str) -> Result<Metric, String> {
    s.parse().map_err(|e: regloss_core::Error| e.to_string())
}

pub fn overlap(s: &str) -> Result<OverlapPolicy, String> {
    s.parse().map_err(|e: regloss_core::Error| e.to_string())
}

/// `start:stop:step` in degrees.
pub fn angles(s: &str) -> Result<AngleGrid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, c] = parts.as_slice() else {
        return Err(format!("expected start:stop:step, got {s:?}"));
    };
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("bad angle {t:?}"));
    AngleGrid::new(num(a)?, num(b)?, num(c)?).map_err(|e| e.to_string())
}

fn range(s: &str) -> Result<(i64, i64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected lo:hi, got {s:?}"))?;
    let num = |t: &str| t.trim().parse::<i64>().map_err(|_| format!("bad shift {t:?}"));
    let (lo, hi) = (num(a)?, num(b)?);
    if hi < lo {
        return Err(format!("empty shift range {lo}:{hi}"));
    }
    Ok((lo, hi))
}

/// `du_lo:du_hi,dv_lo:dv_hi`, inclusive.
pub fn region(s: &str) -> Result<ShiftRegion, String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected du_lo:du_hi,dv_lo:dv_hi, got {s:?}"))?;
    Ok(ShiftRegion::new(range(a)?, range(b)?))
}

pub fn embedding(s: &str) -> Result<Embedding, String> {
    match s {
        "center" => Ok(Embedding::Center),
        "top-left" => Ok(Embedding::TopLeft),
        _ => Err(format!("expected center or top-left, got {s:?}")),
    }
}

/// Finite float, `inf` allowed.
pub fn bin_edge(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("bad bin edge {s:?}"))?;
    if v.is_nan() {
        return Err("bin edge is NaN".into());
    }
    Ok(v)
}
