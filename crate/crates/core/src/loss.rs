//! Reconstruction, Gram style and equivariance losses on plain arrays.
//!
//! Feature extraction happens outside; these kernels only see feature maps
//! and registered images.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::image::{BinaryMask, ImageBuffer};
use crate::numeric::{pairwise_mean, pairwise_sum, pairwise_sum_by};
use crate::registration::{apply_rigid, RigidTransform};

pub const DEFAULT_LAMBDA: f64 = 0.5;
pub const DEFAULT_ETA: f64 = 0.1;
pub const DEFAULT_STYLE_SCALE: f64 = 1e4;

/// `maps` feature maps of `spatial` entries each, row-major (`data[i * spatial + k]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayer {
    maps: usize,
    spatial: usize,
    data: Vec<f64>,
}

impl FeatureLayer {
    pub fn new(maps: usize, spatial: usize, data: Vec<f64>) -> Result<Self> {
        if maps == 0 || spatial == 0 {
            return Err(dim_err!("feature layer needs at least one map and one entry"));
        }
        if data.len() != maps * spatial {
            return Err(dim_err!(
                "feature layer data has {} values, expected {maps}x{spatial}",
                data.len()
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("feature layer contains non-finite values".into()));
        }
        Ok(Self { maps, spatial, data })
    }

    /// One map per image channel, flattened spatially.
    pub fn from_image(img: &ImageBuffer) -> Self {
        Self {
            maps: img.channels(),
            spatial: img.height() * img.width(),
            data: img.data().to_vec(),
        }
    }

    pub fn maps(&self) -> usize {
        self.maps
    }

    pub fn spatial(&self) -> usize {
        self.spatial
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn map(&self, i: usize) -> &[f64] {
        &self.data[i * self.spatial..(i + 1) * self.spatial]
    }

    /// Same layer with every map's entries reordered by `perm` (`out[k] = in[perm[k]]`).
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.spatial {
            return Err(dim_err!("permutation length {} != {}", perm.len(), self.spatial));
        }
        let mut data = Vec::with_capacity(self.data.len());
        for i in 0..self.maps {
            let m = self.map(i);
            data.extend(perm.iter().map(|&p| m[p]));
        }
        Ok(Self { data, ..*self })
    }
}

pub type FeatureStack = Vec<FeatureLayer>;

#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub size: usize,
    /// Row-major `size x size`.
    pub data: Vec<f64>,
}

impl GramMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }
}

/// `G_ij = Σ_k F_ik F_jk`, unnormalized.
pub fn gram_matrix(layer: &FeatureLayer) -> GramMatrix {
    let n = layer.maps;
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        let fi = layer.map(i);
        for j in i..n {
            let fj = layer.map(j);
            let g = pairwise_sum_by(layer.spatial, &|k| fi[k] * fj[k]);
            data[i * n + j] = g;
            data[j * n + i] = g;
        }
    }
    GramMatrix { size: n, data }
}

/// `Σ_l Σ_ij (G_ij − Ĝ_ij)² / (K_l² N_l²)`, without the style scale.
pub fn gram_style_loss(a: &[FeatureLayer], b: &[FeatureLayer]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(dim_err!("stacks have {} and {} layers", a.len(), b.len()));
    }
    let mut per_layer = Vec::with_capacity(a.len());
    for (l, (la, lb)) in a.iter().zip(b).enumerate() {
        if (la.maps, la.spatial) != (lb.maps, lb.spatial) {
            return Err(dim_err!(
                "layer {l}: {}x{} vs {}x{}",
                la.maps,
                la.spatial,
                lb.maps,
                lb.spatial
            ));
        }
        let (ga, gb) = (gram_matrix(la), gram_matrix(lb));
        let sq: Vec<f64> = ga.data.iter().zip(&gb.data).map(|(x, y)| (x - y).powi(2)).collect();
        let norm = (la.spatial as f64).powi(2) * (la.maps as f64).powi(2);
        per_layer.push(pairwise_sum(&sq) / norm);
    }
    Ok(per_layer.iter().sum())
}

/// Half-turn: index reversal along both axes of every plane.
pub fn rotate180(img: &ImageBuffer) -> ImageBuffer {
    let mut out = img.clone();
    for c in 0..img.channels() {
        out.plane_mut(c).reverse();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    /// Root mean square over all pixels and channels.
    #[default]
    Rms,
    /// Plain Euclidean norm.
    Norm,
}

/// Distance between `Ω(G(x))` and `G(Ω(x))`.
pub fn equivariance_loss(
    g_x: &ImageBuffer,
    g_omega_x: &ImageBuffer,
    reduction: Reduction,
) -> Result<f64> {
    if (g_x.shape(), g_x.channels()) != (g_omega_x.shape(), g_omega_x.channels()) {
        return Err(dim_err!(
            "equivariance inputs differ: {:?}x{} vs {:?}x{}",
            g_x.shape(),
            g_x.channels(),
            g_omega_x.shape(),
            g_omega_x.channels()
        ));
    }
    let rotated = rotate180(g_x);
    let (a, b) = (rotated.data(), g_omega_x.data());
    let ss = pairwise_sum_by(a.len(), &|k| (a[k] - b[k]).powi(2));
    Ok(match reduction {
        Reduction::Rms => (ss / a.len() as f64).sqrt(),
        Reduction::Norm => ss.sqrt(),
    })
}

/// Mean absolute difference between `pred` and the target resampled onto
/// `pred`'s footprint by `t`.
pub fn reconstruction_loss(
    pred: &ImageBuffer,
    target: &ImageBuffer,
    target_mask: &BinaryMask,
    t: &RigidTransform,
) -> Result<f64> {
    if pred.channels() != target.channels() {
        return Err(dim_err!(
            "prediction has {} channels, target {}",
            pred.channels(),
            target.channels()
        ));
    }
    let aligned = apply_rigid(target, Some(target_mask), t, pred.height(), pred.width())?;
    let (a, b) = (pred.data(), aligned.data());
    Ok(pairwise_sum_by(a.len(), &|k| (a[k] - b[k]).abs()) / a.len() as f64)
}

pub struct ReconstructionSample<'a> {
    pub pred: &'a ImageBuffer,
    pub target: &'a ImageBuffer,
    pub target_mask: &'a BinaryMask,
    pub transform: &'a RigidTransform,
}

/// Batch mean of [`reconstruction_loss`].
pub fn reconstruction_loss_batch(batch: &[ReconstructionSample<'_>]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Input("empty batch".into()));
    }
    let per: Vec<f64> = batch
        .iter()
        .map(|s| reconstruction_loss(s.pred, s.target, s.target_mask, s.transform))
        .collect::<Result<_>>()?;
    Ok(pairwise_mean(&per))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda: f64,
    pub eta: f64,
    pub style_scale: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            eta: DEFAULT_ETA,
            style_scale: DEFAULT_STYLE_SCALE,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Parameter(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::Parameter(format!("eta {} must be >= 0", self.eta)));
        }
        if !(self.style_scale > 0.0 && self.style_scale.is_finite()) {
            return Err(Error::Parameter(format!(
                "style scale {} must be > 0",
                self.style_scale
            )));
        }
        Ok(())
    }
}

/// `λ·l_r + (1 − λ)·scale·l_s + η·l_e`.
pub fn total_loss(l_r: f64, l_s: f64, l_e: f64, w: &LossWeights) -> Result<f64> {
    w.validate()?;
    for (name, v) in [("reconstruction", l_r), ("style", l_s), ("equivariance", l_e)] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Parameter(format!("{name} loss {v} must be finite and >= 0")));
        }
    }
    Ok(w.lambda * l_r + (1.0 - w.lambda) * (w.style_scale * l_s) + w.eta * l_e)
}
