use std::cmp::Ordering;

use crate::error::{Error, Result};

use super::{ScoreMap, ShiftRegion};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub du: i64,
    pub dv: i64,
    pub score: f64,
}

/// Deterministic order on equal scores: smaller `|du| + |dv|`, then smaller
/// `du`, then smaller `dv`.
pub(crate) fn shift_order(a: (i64, i64), b: (i64, i64)) -> Ordering {
    (a.0.abs() + a.1.abs())
        .cmp(&(b.0.abs() + b.1.abs()))
        .then(a.0.cmp(&b.0))
        .then(a.1.cmp(&b.1))
}

/// Arg-optimum of a score map over valid shifts inside `region`.
pub fn find_peak(map: &ScoreMap, region: Option<&ShiftRegion>) -> Result<Peak> {
    let mut best: Option<Peak> = None;
    for i in 0..map.rows {
        for j in 0..map.cols {
            let k = i * map.cols + j;
            if !map.valid[k] {
                continue;
            }
            let (du, dv) = map.shift_of(i, j);
            if region.is_some_and(|r| !r.contains(du, dv)) {
                continue;
            }
            let score = map.values[k];
            let take = match &best {
                None => true,
                Some(b) => {
                    map.objective.better(score, b.score)
                        || (score == b.score
                            && shift_order((du, dv), (b.du, b.dv)) == Ordering::Less)
                }
            };
            if take {
                best = Some(Peak { du, dv, score });
            }
        }
    }
    best.ok_or_else(|| Error::NoSolution("no valid shift inside the search region".into()))
}
