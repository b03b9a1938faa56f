//! Online registration head.
//!
//! Shift convention used throughout: a score at shift `(du, dv)` compares
//! `fixed(u + du, v + dv)` with `moving(u, v)`, i.e. `(du, dv)` is the
//! position of the moving image's origin inside the fixed frame. A moving
//! tile cropped from the fixed image at `(r, c)` is found at `(r, c)`.
//! Non-circular maps cover `du ∈ [-(H_moving - 1), H_fixed - 1]`.

mod maps;
mod peak;
mod rigid;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};

pub use maps::{
    bipc, circular_cross_correlation, circular_mse, masked_cc, masked_mse, phase_correlation,
    FixedSpectra, SPECTRAL_FLOOR,
};
pub use peak::{find_peak, Peak};
pub use rigid::{
    apply_rigid, register_rigid, register_translation, score_map, Embedding, RegistrationConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    CcCirc,
    Cc,
    MseCirc,
    Mse,
    Pc,
    Bipc,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::CcCirc,
        Metric::Cc,
        Metric::MseCirc,
        Metric::Mse,
        Metric::Pc,
        Metric::Bipc,
    ];

    pub fn objective(self) -> Objective {
        match self {
            Metric::MseCirc | Metric::Mse => Objective::Minimize,
            _ => Objective::Maximize,
        }
    }

    /// Metrics evaluated on equal-shape periodic inputs.
    pub fn is_circular(self) -> bool {
        matches!(
            self,
            Metric::CcCirc | Metric::MseCirc | Metric::Pc | Metric::Bipc
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::CcCirc => "cc_circ",
            Metric::Cc => "cc",
            Metric::MseCirc => "mse_circ",
            Metric::Mse => "mse",
            Metric::Pc => "pc",
            Metric::Bipc => "bipc",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == lower)
            .ok_or_else(|| param_err!("unknown metric {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Maximize,
    Minimize,
}

impl Objective {
    /// True when `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Objective::Maximize => a > b,
            Objective::Minimize => a < b,
        }
    }
}

/// Registration objective over integer shifts.
///
/// Raster cell `(i, j)` holds shift `(i - origin.0, j - origin.1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    pub rows: usize,
    pub cols: usize,
    pub origin: (isize, isize),
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
    /// Number of overlapping in-mask pixels per shift.
    pub overlap_counts: Vec<f64>,
    pub objective: Objective,
    pub metric: Metric,
}

impl ScoreMap {
    pub fn shift_of(&self, i: usize, j: usize) -> (i64, i64) {
        (
            (i as isize - self.origin.0) as i64,
            (j as isize - self.origin.1) as i64,
        )
    }

    pub fn index_of(&self, du: i64, dv: i64) -> Option<usize> {
        let i = du as isize + self.origin.0;
        let j = dv as isize + self.origin.1;
        (i >= 0 && j >= 0 && (i as usize) < self.rows && (j as usize) < self.cols)
            .then(|| i as usize * self.cols + j as usize)
    }

    pub fn value_at(&self, du: i64, dv: i64) -> Option<f64> {
        self.index_of(du, dv).map(|k| self.values[k])
    }

    pub fn overlap_at(&self, du: i64, dv: i64) -> Option<f64> {
        self.index_of(du, dv).map(|k| self.overlap_counts[k])
    }

    pub fn is_valid_at(&self, du: i64, dv: i64) -> bool {
        self.index_of(du, dv).is_some_and(|k| self.valid[k])
    }

    /// Inclusive shift bounds `((du_min, du_max), (dv_min, dv_max))`.
    pub fn shift_bounds(&self) -> ((i64, i64), (i64, i64)) {
        let (a, b) = self.shift_of(0, 0);
        let (c, d) = self.shift_of(self.rows - 1, self.cols - 1);
        ((a, c), (b, d))
    }

    /// Invalidates shifts whose overlap is below `min_overlap`.
    pub fn restrict_overlap(&mut self, min_overlap: f64) {
        for (v, o) in self.valid.iter_mut().zip(&self.overlap_counts) {
            if *o < min_overlap {
                *v = false;
            }
        }
    }
}

/// Inclusive shift window used to constrain peak search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftRegion {
    pub du: (i64, i64),
    pub dv: (i64, i64),
}

impl ShiftRegion {
    pub fn new(du: (i64, i64), dv: (i64, i64)) -> Self {
        Self { du, dv }
    }

    /// Square window `[-r, r]²` around `center`.
    pub fn around(center: (i64, i64), radius: i64) -> Self {
        Self {
            du: (center.0 - radius, center.0 + radius),
            dv: (center.1 - radius, center.1 + radius),
        }
    }

    pub fn contains(&self, du: i64, dv: i64) -> bool {
        (self.du.0..=self.du.1).contains(&du) && (self.dv.0..=self.dv.1).contains(&dv)
    }
}

/// Which shifts are admissible with respect to mask overlap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapPolicy {
    /// The smaller footprint must lie entirely inside the larger one.
    Full,
    /// At least this many overlapping pixels.
    MinCount(usize),
    /// At least this fraction of the smaller footprint.
    MinFraction(f64),
}

/// Fraction of the smaller footprint required under the default
/// minimum-overlap policy.
pub const DEFAULT_MIN_OVERLAP_FRACTION: f64 = 0.25;

impl Default for OverlapPolicy {
    fn default() -> Self {
        OverlapPolicy::Full
    }
}

impl OverlapPolicy {
    pub fn min_count() -> Self {
        OverlapPolicy::MinFraction(DEFAULT_MIN_OVERLAP_FRACTION)
    }

    /// Minimum overlap in pixels for the given footprint areas.
    pub fn threshold(self, fixed_area: usize, moving_area: usize) -> usize {
        match self {
            OverlapPolicy::Full => fixed_area.min(moving_area).max(1),
            OverlapPolicy::MinCount(n) => n.max(1),
            OverlapPolicy::MinFraction(f) => {
                ((f * fixed_area.min(moving_area) as f64).ceil() as usize).max(1)
            }
        }
    }
}

impl FromStr for OverlapPolicy {
    type Err = Error;

    /// `full`, `min` (25 % default), `minN` / `min:N` (pixel count) or
    /// `min0.3` (fraction when below 1).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "full" {
            return Ok(OverlapPolicy::Full);
        }
        let rest = s
            .strip_prefix("min")
            .ok_or_else(|| param_err!("overlap policy must be `full` or `minN`, got {s:?}"))?;
        let rest = rest.trim_start_matches([':', '_', '=']);
        if rest.is_empty() {
            return Ok(OverlapPolicy::min_count());
        }
        let v: f64 = rest
            .parse()
            .map_err(|_| param_err!("bad overlap threshold {rest:?}"))?;
        if !(v > 0.0) {
            return Err(param_err!("overlap threshold must be positive"));
        }
        if v < 1.0 {
            Ok(OverlapPolicy::MinFraction(v))
        } else {
            Ok(OverlapPolicy::MinCount(v.round() as usize))
        }
    }
}

/// Rotation angles searched by the rigid head, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for AngleGrid {
    /// 31 angles, -7.5° to 7.5° in 0.5° steps.
    fn default() -> Self {
        Self {
            start: -7.5,
            stop: 7.5,
            step: 0.5,
        }
    }
}

impl AngleGrid {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || !step.is_finite() {
            return Err(param_err!("angle step must be positive and finite"));
        }
        if stop < start {
            return Err(param_err!("angle grid stop {stop} below start {start}"));
        }
        Ok(Self { start, stop, step })
    }

    /// Single-angle grid; registration degenerates to translation only.
    pub fn zero() -> Self {
        Self {
            start: 0.0,
            stop: 0.0,
            step: 1.0,
        }
    }

    pub fn angles(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..n)
            .map(|k| {
                let a = self.start + k as f64 * self.step;
                // keep the grid point at zero exact despite accumulation
                if a.abs() < 1e-9 * self.step {
                    0.0
                } else {
                    a
                }
            })
            .collect()
    }
}

impl FromStr for AngleGrid {
    type Err = Error;

    /// `start:stop:step` in degrees.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(param_err!("angle grid must be start:stop:step, got {s:?}"));
        }
        let p = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| param_err!("bad angle value {t:?}"))
        };
        AngleGrid::new(p(parts[0])?, p(parts[1])?, p(parts[2])?)
    }
}

/// Output of the registration head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub du: i64,
    pub dv: i64,
    /// Rotation (degrees) applied to the moving image about its center.
    pub theta: f64,
    pub score: f64,
    pub metric: Metric,
}

impl RigidTransform {
    /// Zero-rotation transform placing the moving image centered on the fixed one.
    pub fn centered(fixed: (usize, usize), moving: (usize, usize), metric: Metric) -> Self {
        let (du, dv) = centered_offset(fixed, moving);
        Self {
            du,
            dv,
            theta: 0.0,
            score: f64::NAN,
            metric,
        }
    }

    /// Shift relative to the centered placement.
    pub fn relative_to_center(&self, fixed: (usize, usize), moving: (usize, usize)) -> (i64, i64) {
        let (cu, cv) = centered_offset(fixed, moving);
        (self.du - cu, self.dv - cv)
    }
}

/// Shift that centers a moving raster on a fixed raster (rounded toward −∞).
pub fn centered_offset(fixed: (usize, usize), moving: (usize, usize)) -> (i64, i64) {
    (
        (fixed.0 as i64 - moving.0 as i64).div_euclid(2),
        (fixed.1 as i64 - moving.1 as i64).div_euclid(2),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_has_31_angles() {
        let a = AngleGrid::default().angles();
        assert_eq!(a.len(), 31);
        assert_eq!(a[0], -7.5);
        assert_eq!(a[30], 7.5);
        assert!(a.contains(&0.0));
        assert!(a.windows(2).all(|w| (w[1] - w[0] - 0.5).abs() < 1e-12));
    }

    #[test]
    fn grid_parsing() {
        let g: AngleGrid = "0:0:1".parse().unwrap();
        assert_eq!(g.angles(), vec![0.0]);
        let g: AngleGrid = "-1:1:0.5".parse().unwrap();
        assert_eq!(g.angles(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert!("1:0:1".parse::<AngleGrid>().is_err());
        assert!("0:1:0".parse::<AngleGrid>().is_err());
        assert!("0:1".parse::<AngleGrid>().is_err());
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("full".parse::<OverlapPolicy>().unwrap(), OverlapPolicy::Full);
        assert_eq!(
            "min100".parse::<OverlapPolicy>().unwrap(),
            OverlapPolicy::MinCount(100)
        );
        assert_eq!(
            "min".parse::<OverlapPolicy>().unwrap(),
            OverlapPolicy::MinFraction(0.25)
        );
        assert_eq!(
            "min0.5".parse::<OverlapPolicy>().unwrap(),
            OverlapPolicy::MinFraction(0.5)
        );
        assert!("half".parse::<OverlapPolicy>().is_err());
        assert_eq!(OverlapPolicy::min_count().threshold(100, 40), 10);
        assert_eq!(OverlapPolicy::Full.threshold(100, 400), 100);
        assert_eq!(OverlapPolicy::Full.threshold(400, 100), 100);
    }

    #[test]
    fn metric_names_roundtrip() {
        for m in Metric::ALL {
            assert_eq!(m.as_str().parse::<Metric>().unwrap(), m);
        }
        assert_eq!("MSE".parse::<Metric>().unwrap(), Metric::Mse);
        assert!("ssd".parse::<Metric>().is_err());
    }

    #[test]
    fn centered_placement() {
        let t = RigidTransform::centered((260, 260), (360, 360), Metric::Mse);
        assert_eq!((t.du, t.dv), (-50, -50));
        assert_eq!(t.relative_to_center((260, 260), (360, 360)), (0, 0));
    }
}
