use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::image::DEFAULT_PIXEL_PITCH;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.3;
pub const DEFAULT_MIN_AREA_UM2: f64 = 100.0;
pub const DEFAULT_SHRINKAGE: f64 = 0.97;

/// Label raster: 0 is background, every positive label one instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceMask {
    height: usize,
    width: usize,
    labels: Vec<u32>,
}

impl InstanceMask {
    pub fn new(height: usize, width: usize, labels: Vec<u32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(dim_err!("instance mask must be non-empty"));
        }
        if labels.len() != height * width {
            return Err(dim_err!(
                "{} labels for a {height}x{width} mask",
                labels.len()
            ));
        }
        Ok(Self {
            height,
            width,
            labels,
        })
    }

    pub fn background(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            labels: vec![0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, label: u32) {
        self.labels[row * self.width + col] = label;
    }

    /// Paints the rectangle `[top, top + h) x [left, left + w)`.
    pub fn fill_rect(&mut self, top: usize, left: usize, h: usize, w: usize, label: u32) {
        for r in top..(top + h).min(self.height) {
            for c in left..(left + w).min(self.width) {
                self.set(r, c, label);
            }
        }
    }

    /// Pixel count per instance label.
    pub fn areas(&self) -> BTreeMap<u32, usize> {
        let mut out = BTreeMap::new();
        for &l in self.labels.iter().filter(|&&l| l > 0) {
            *out.entry(l).or_insert(0) += 1;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    #[serde(rename = "tp")]
    pub true_positives: usize,
    #[serde(rename = "fp")]
    pub false_positives: usize,
    #[serde(rename = "fn")]
    pub false_negatives: usize,
    /// Percent.
    pub f1: f64,
}

impl MatchResult {
    pub fn new(tp: usize, fp: usize, fn_: usize) -> Self {
        Self {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            f1: f1_percent(2 * tp, fp + fn_),
        }
    }
}

fn f1_percent(matched: usize, unmatched: usize) -> f64 {
    if matched == 0 {
        0.0
    } else {
        100.0 * matched as f64 / (matched + unmatched) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub pred: u32,
    pub target: u32,
    pub iou: f64,
}

struct Overlaps {
    pred_area: BTreeMap<u32, usize>,
    target_area: BTreeMap<u32, usize>,
    inter: BTreeMap<(u32, u32), usize>,
}

impl Overlaps {
    fn new(pred: &InstanceMask, target: &InstanceMask) -> Result<Self> {
        if pred.shape() != target.shape() {
            return Err(dim_err!(
                "instance masks differ: {:?} vs {:?}",
                pred.shape(),
                target.shape()
            ));
        }
        let mut inter = BTreeMap::new();
        for (&p, &t) in pred.labels.iter().zip(&target.labels) {
            if p > 0 && t > 0 {
                *inter.entry((p, t)).or_insert(0) += 1;
            }
        }
        Ok(Self {
            pred_area: pred.areas(),
            target_area: target.areas(),
            inter,
        })
    }

    fn iou(&self, p: u32, t: u32, n: usize) -> f64 {
        let union = self.pred_area[&p] + self.target_area[&t] - n;
        n as f64 / union as f64
    }

    /// Optimal one-to-one assignment between the given label subsets,
    /// maximizing total IoU over pairs at or above `threshold`.
    fn assign(&self, preds: &[u32], targets: &[u32], threshold: f64) -> Vec<MatchedPair> {
        let p_idx: BTreeMap<u32, usize> = preds.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        let t_idx: BTreeMap<u32, usize> =
            targets.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        let mut edges = Vec::new();
        for (&(p, t), &n) in &self.inter {
            if let (Some(&i), Some(&j)) = (p_idx.get(&p), t_idx.get(&t)) {
                let iou = self.iou(p, t, n);
                if iou >= threshold {
                    edges.push((i, j, iou));
                }
            }
        }

        // independent subproblems keep the cubic assignment small
        let mut dsu = Dsu::new(preds.len() + targets.len());
        for &(i, j, _) in &edges {
            dsu.union(i, preds.len() + j);
        }
        let mut groups: BTreeMap<usize, Vec<(usize, usize, f64)>> = BTreeMap::new();
        for &e in &edges {
            groups.entry(dsu.find(e.0)).or_default().push(e);
        }

        let mut out = Vec::new();
        for comp in groups.values() {
            let mut rows: Vec<usize> = comp.iter().map(|e| e.0).collect();
            let mut cols: Vec<usize> = comp.iter().map(|e| e.1).collect();
            rows.sort_unstable();
            rows.dedup();
            cols.sort_unstable();
            cols.dedup();
            let mut weight = vec![vec![0.0; cols.len()]; rows.len()];
            for &(i, j, iou) in comp {
                let r = rows.binary_search(&i).unwrap();
                let c = cols.binary_search(&j).unwrap();
                weight[r][c] = iou;
            }
            for (r, c) in max_weight_assignment(&weight) {
                if weight[r][c] > 0.0 {
                    out.push(MatchedPair {
                        pred: preds[rows[r]],
                        target: targets[cols[c]],
                        iou: weight[r][c],
                    });
                }
            }
        }
        out.sort_by_key(|m| (m.pred, m.target));
        out
    }
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut x = x;
        while self.0[x] != r {
            let next = self.0[x];
            self.0[x] = r;
            x = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Hungarian method on a dense weight matrix; returns (row, col) pairs of a
/// maximum-weight assignment covering `min(rows, cols)` entries.
fn max_weight_assignment(weight: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n = weight.len();
    let m = weight.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return Vec::new();
    }
    if n > m {
        let t: Vec<Vec<f64>> = (0..m).map(|j| (0..n).map(|i| weight[i][j]).collect()).collect();
        return max_weight_assignment(&t).into_iter().map(|(a, b)| (b, a)).collect();
    }
    // potentials formulation, 1-based with column 0 as the virtual start
    let cost = |i: usize, j: usize| -weight[i - 1][j - 1];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out: Vec<(usize, usize)> = (1..=m)
        .filter(|&j| owner[j] != 0)
        .map(|j| (owner[j] - 1, j - 1))
        .collect();
    out.sort_unstable();
    out
}

fn check_threshold(iou_threshold: f64) -> Result<()> {
    if !(iou_threshold > 0.0 && iou_threshold < 1.0) {
        return Err(Error::Parameter(format!(
            "IoU threshold {iou_threshold} outside (0, 1)"
        )));
    }
    Ok(())
}

fn eligible(areas: &BTreeMap<u32, usize>, min_area_px: f64) -> Vec<u32> {
    areas
        .iter()
        .filter(|(_, &a)| a as f64 >= min_area_px)
        .map(|(&l, _)| l)
        .collect()
}

/// Matched instance pairs after discarding instances smaller than
/// `min_area_px` on both sides.
pub fn match_pairs(
    pred: &InstanceMask,
    target: &InstanceMask,
    min_area_px: f64,
    iou_threshold: f64,
) -> Result<Vec<MatchedPair>> {
    check_threshold(iou_threshold)?;
    let ov = Overlaps::new(pred, target)?;
    let preds = eligible(&ov.pred_area, min_area_px);
    let targets = eligible(&ov.target_area, min_area_px);
    Ok(ov.assign(&preds, &targets, iou_threshold))
}

pub fn match_instances(
    pred: &InstanceMask,
    target: &InstanceMask,
    min_area_px: f64,
    iou_threshold: f64,
) -> Result<MatchResult> {
    check_threshold(iou_threshold)?;
    let ov = Overlaps::new(pred, target)?;
    let preds = eligible(&ov.pred_area, min_area_px);
    let targets = eligible(&ov.target_area, min_area_px);
    let tp = ov.assign(&preds, &targets, iou_threshold).len();
    Ok(MatchResult::new(tp, preds.len() - tp, targets.len() - tp))
}

/// Physical area of `area_px` pixels after tissue-shrinkage correction.
pub fn apply_shrinkage(area_px: f64, factor: f64, pixel_area: f64) -> Result<f64> {
    if !(factor > 0.0 && factor < 2.0) {
        return Err(Error::Parameter(format!("shrinkage factor {factor} outside (0, 2)")));
    }
    if !(pixel_area > 0.0 && pixel_area.is_finite()) {
        return Err(Error::Parameter(format!("pixel area {pixel_area} must be > 0")));
    }
    Ok(area_px * pixel_area * factor)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchOptions {
    pub iou_threshold: f64,
    pub min_area_um2: f64,
    /// Square micrometers per pixel.
    pub pixel_area: f64,
    pub shrinkage: f64,
}

impl Default for MatchOptions {
    fn default() -> Self {
        Self {
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            min_area_um2: DEFAULT_MIN_AREA_UM2,
            pixel_area: DEFAULT_PIXEL_PITCH * DEFAULT_PIXEL_PITCH,
            shrinkage: DEFAULT_SHRINKAGE,
        }
    }
}

impl MatchOptions {
    /// Minimum instance size in pixels equivalent to `min_area_um2`.
    pub fn min_area_px(&self) -> Result<f64> {
        Ok(self.min_area_um2 / apply_shrinkage(1.0, self.shrinkage, self.pixel_area)?)
    }
}

/// Half-open area interval `[lo, hi)` in square micrometers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaBin {
    pub lo: f64,
    pub hi: f64,
}

impl AreaBin {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, area: f64) -> bool {
        area >= self.lo && area < self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinResult {
    pub bin: AreaBin,
    pub predicted: usize,
    pub targets: usize,
    /// Predictions in the bin matched against all targets.
    pub tp_pred: usize,
    /// Targets in the bin matched by any prediction.
    pub tp_target: usize,
    #[serde(rename = "fp")]
    pub false_positives: usize,
    #[serde(rename = "fn")]
    pub false_negatives: usize,
    pub f1: f64,
}

/// Size-resolved F1: predictions inside a bin are matched against every
/// target (giving tp/fp), targets inside a bin against every prediction
/// (giving fn). F1 combines both sides as
/// `(tp_pred + tp_target) / (tp_pred + tp_target + fp + fn)`, which reduces
/// to the usual `2tp / (2tp + fp + fn)` when one bin covers everything.
pub fn f1_by_size_bins(
    pred: &InstanceMask,
    target: &InstanceMask,
    bins: &[AreaBin],
    opts: &MatchOptions,
) -> Result<Vec<BinResult>> {
    check_threshold(opts.iou_threshold)?;
    for (k, b) in bins.iter().enumerate() {
        if !(b.lo < b.hi) {
            return Err(Error::Parameter(format!("bin {k} is empty: [{}, {})", b.lo, b.hi)));
        }
        if k > 0 && bins[k - 1].hi > b.lo {
            return Err(Error::Parameter(format!("bin {k} overlaps or precedes bin {}", k - 1)));
        }
    }
    let ov = Overlaps::new(pred, target)?;
    let min_px = opts.min_area_px()?;
    let preds = eligible(&ov.pred_area, min_px);
    let targets = eligible(&ov.target_area, min_px);
    let um2 = |px: usize| px as f64 * opts.pixel_area * opts.shrinkage;

    let mut out = Vec::with_capacity(bins.len());
    for &bin in bins {
        let p_in: Vec<u32> =
            preds.iter().copied().filter(|l| bin.contains(um2(ov.pred_area[l]))).collect();
        let t_in: Vec<u32> =
            targets.iter().copied().filter(|l| bin.contains(um2(ov.target_area[l]))).collect();
        let tp_pred = ov.assign(&p_in, &targets, opts.iou_threshold).len();
        let tp_target = ov.assign(&preds, &t_in, opts.iou_threshold).len();
        let fp = p_in.len() - tp_pred;
        let fn_ = t_in.len() - tp_target;
        out.push(BinResult {
            bin,
            predicted: p_in.len(),
            targets: t_in.len(),
            tp_pred,
            tp_target,
            false_positives: fp,
            false_negatives: fn_,
            f1: f1_percent(tp_pred + tp_target, fp + fn_),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn three_cells() -> InstanceMask {
        let mut m = InstanceMask::background(40, 40);
        m.fill_rect(2, 2, 10, 10, 1);
        m.fill_rect(2, 20, 12, 12, 2);
        m.fill_rect(20, 5, 15, 15, 3);
        m
    }

    #[test]
    fn identical_masks() {
        let t = three_cells();
        let r = match_instances(&t, &t, 0.0, 0.3).unwrap();
        assert_eq!((r.true_positives, r.false_positives, r.false_negatives), (3, 0, 0));
        assert_eq!(r.f1, 100.0);
    }

    #[test]
    fn one_missing_cell_gives_80() {
        let t = three_cells();
        let mut p = t.clone();
        p.fill_rect(20, 5, 15, 15, 0);
        let r = match_instances(&p, &t, 0.0, 0.3).unwrap();
        assert_eq!((r.true_positives, r.false_positives, r.false_negatives), (2, 0, 1));
        assert_eq!(r.f1, 80.0);
    }

    #[test]
    fn empty_masks() {
        let e = InstanceMask::background(5, 5);
        let r = match_instances(&e, &e, 0.0, 0.3).unwrap();
        assert_eq!(r, MatchResult::new(0, 0, 0));
        assert_eq!(r.f1, 0.0);
    }

    #[test]
    fn small_instances_are_dropped() {
        let t = three_cells();
        let r = match_instances(&t, &t, 120.0, 0.3).unwrap();
        // only the 12x12 and 15x15 cells reach 120 px
        assert_eq!(r.true_positives, 2);
    }

    #[test]
    fn higher_iou_pairing_wins() {
        let mut t = InstanceMask::background(20, 30);
        t.fill_rect(5, 5, 10, 10, 1);
        let mut p = InstanceMask::background(20, 30);
        p.fill_rect(5, 5, 10, 6, 1); // IoU 0.6
        p.fill_rect(5, 11, 10, 4, 2); // IoU 0.4
        let pairs = match_pairs(&p, &t, 0.0, 0.3).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!((pairs[0].pred, pairs[0].target), (1, 1));
        assert!((pairs[0].iou - 0.6).abs() < 1e-12);
    }

    #[test]
    fn assignment_beats_greedy() {
        // greedy on the 0.9 entry would leave only 0.9; optimal takes 0.8 + 0.8
        let w = vec![vec![0.9, 0.8], vec![0.8, 0.0]];
        let a = max_weight_assignment(&w);
        assert_eq!(a, vec![(0, 1), (1, 0)]);
    }

    fn brute_force(weight: &[Vec<f64>]) -> f64 {
        fn go(i: usize, used: &mut Vec<bool>, w: &[Vec<f64>]) -> f64 {
            if i == w.len() {
                return 0.0;
            }
            let mut best = go(i + 1, used, w);
            for j in 0..used.len() {
                if !used[j] && w[i][j] > 0.0 {
                    used[j] = true;
                    best = best.max(w[i][j] + go(i + 1, used, w));
                    used[j] = false;
                }
            }
            best
        }
        go(0, &mut vec![false; weight[0].len()], weight)
    }

    #[test]
    fn matches_exhaustive_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(1..=5);
            let m = rng.random_range(1..=5);
            let w: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    (0..m)
                        .map(|_| if rng.random_bool(0.5) { rng.random_range(0.3..1.0) } else { 0.0 })
                        .collect()
                })
                .collect();
            let total: f64 = max_weight_assignment(&w).iter().map(|&(i, j)| w[i][j]).sum();
            assert!((total - brute_force(&w)).abs() < 1e-12);
        }
    }

    fn random_fixture(rng: &mut ChaCha8Rng, n: usize) -> InstanceMask {
        let mut m = InstanceMask::background(64, 64);
        for l in 1..=n as u32 {
            let h = rng.random_range(4..14);
            let w = rng.random_range(4..14);
            let r = rng.random_range(0..64 - h);
            let c = rng.random_range(0..64 - w);
            m.fill_rect(r, c, h, w, l);
        }
        m
    }

    #[test]
    fn pair_level_matching_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let t = random_fixture(&mut rng, 5);
            let p = random_fixture(&mut rng, 5);
            let ov = Overlaps::new(&p, &t).unwrap();
            let preds: Vec<u32> = ov.pred_area.keys().copied().collect();
            let targets: Vec<u32> = ov.target_area.keys().copied().collect();
            let mut w = vec![vec![0.0; targets.len()]; preds.len()];
            for (&(pl, tl), &n) in &ov.inter {
                let iou = ov.iou(pl, tl, n);
                if iou >= 0.3 {
                    let i = preds.iter().position(|&x| x == pl).unwrap();
                    let j = targets.iter().position(|&x| x == tl).unwrap();
                    w[i][j] = iou;
                }
            }
            let total: f64 = match_pairs(&p, &t, 0.0, 0.3).unwrap().iter().map(|m| m.iou).sum();
            assert!((total - brute_force(&w)).abs() < 1e-12);
        }
    }

    #[test]
    fn swap_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let t = random_fixture(&mut rng, 6);
            let p = random_fixture(&mut rng, 4);
            let a = match_instances(&p, &t, 0.0, 0.3).unwrap();
            let b = match_instances(&t, &p, 0.0, 0.3).unwrap();
            assert_eq!(a.true_positives, b.true_positives);
            assert_eq!(a.false_positives, b.false_negatives);
            assert_eq!(a.false_negatives, b.false_positives);
        }
    }

    #[test]
    fn shrinkage() {
        assert_eq!(apply_shrinkage(50.0, 1.0, 2.0).unwrap(), 100.0);
        assert!((apply_shrinkage(103.1, 0.97, 1.0).unwrap() - 100.0).abs() < 0.01);
        for f in [0.95, 0.99] {
            assert!(apply_shrinkage(1.0, f, 1.0).is_ok());
        }
        assert!(apply_shrinkage(1.0, 0.0, 1.0).is_err());
        assert!(apply_shrinkage(1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn hand_enumerated_bins() {
        // pixel area 1 and no shrinkage: areas in px equal areas in um^2
        let mut t = InstanceMask::background(60, 80);
        t.fill_rect(0, 0, 6, 10, 1); // 60
        t.fill_rect(10, 0, 10, 15, 2); // 150
        t.fill_rect(30, 0, 20, 20, 3); // 400
        let mut p = InstanceMask::background(60, 80);
        p.fill_rect(0, 0, 6, 10, 1); // exact T1
        p.fill_rect(10, 0, 10, 35, 2); // 350 px covering T2, IoU 150/350
        p.fill_rect(30, 0, 20, 20, 3); // exact T3
        p.fill_rect(0, 50, 8, 10, 4); // 80 px, no target
        let opts = MatchOptions {
            iou_threshold: 0.3,
            min_area_um2: 0.0,
            pixel_area: 1.0,
            shrinkage: 1.0,
        };
        let bins = [AreaBin::new(0.0, 100.0), AreaBin::new(100.0, 300.0), AreaBin::new(300.0, 1000.0)];
        let r = f1_by_size_bins(&p, &t, &bins, &opts).unwrap();
        let counts: Vec<_> = r
            .iter()
            .map(|b| (b.predicted, b.targets, b.tp_pred, b.tp_target, b.false_positives, b.false_negatives))
            .collect();
        // small bin: T1 hit, spurious detection is a false positive
        // middle bin: T2 found by the oversized detection in the large bin
        // large bin: T3 and the oversized detection both matched
        assert_eq!(counts, vec![(2, 1, 1, 1, 1, 0), (0, 1, 0, 1, 0, 0), (2, 1, 2, 1, 0, 0)]);
        assert!((r[0].f1 - 200.0 / 3.0).abs() < 1e-12);
        assert_eq!(r[1].f1, 100.0);
        assert_eq!(r[2].f1, 100.0);
    }

    #[test]
    fn single_bin_equals_global() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let opts = MatchOptions::default();
        for _ in 0..20 {
            let t = random_fixture(&mut rng, 8);
            let p = random_fixture(&mut rng, 8);
            let g = match_instances(&p, &t, opts.min_area_px().unwrap(), opts.iou_threshold).unwrap();
            let b = f1_by_size_bins(&p, &t, &[AreaBin::new(0.0, f64::INFINITY)], &opts).unwrap();
            assert_eq!(b[0].tp_pred, g.true_positives);
            assert_eq!(b[0].tp_target, g.true_positives);
            assert_eq!(b[0].false_positives, g.false_positives);
            assert_eq!(b[0].false_negatives, g.false_negatives);
            assert_eq!(b[0].f1, g.f1);
        }
    }

    #[test]
    fn invalid_bins() {
        let e = InstanceMask::background(4, 4);
        let o = MatchOptions::default();
        assert!(f1_by_size_bins(&e, &e, &[AreaBin::new(5.0, 1.0)], &o).is_err());
        let overlapping = [AreaBin::new(0.0, 10.0), AreaBin::new(5.0, 20.0)];
        assert!(f1_by_size_bins(&e, &e, &overlapping, &o).is_err());
    }
}
