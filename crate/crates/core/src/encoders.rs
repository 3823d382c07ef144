//! Video encoders and the PCA projection that normalizes their features.

use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{IseError, Result};
use crate::video::{Video, FRAME_SIZE};

/// Default number of retained principal components.
pub const DEFAULT_PCA_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct RawEmbedding(pub Vec<f64>);

impl RawEmbedding {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Latent hypothesis about the hidden parameter, in PCA coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateEmbedding(pub Vec<f64>);

impl StateEmbedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(IseError::invalid("state embedding has non-finite entries"));
        }
        Ok(StateEmbedding(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn squared_distance(&self, other: &StateEmbedding) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

/// Maps a video to a flat feature vector.
pub trait VideoEncoder: Send + Sync {
    fn encode(&self, video: &Video) -> Result<RawEmbedding>;
}

/// Downsamples each 32x32 frame to 8x8 by 4x4 block averaging and
/// concatenates the frames in order.
#[derive(Debug, Clone, Copy, Default)]
pub struct BlockMeanEncoder;

pub const BLOCK: usize = 4;
pub const FEATURES_PER_FRAME: usize = (FRAME_SIZE / BLOCK) * (FRAME_SIZE / BLOCK);

impl VideoEncoder for BlockMeanEncoder {
    fn encode(&self, video: &Video) -> Result<RawEmbedding> {
        if video.height() != FRAME_SIZE || video.width() != FRAME_SIZE {
            return Err(IseError::shape(format!(
                "encoder expects {FRAME_SIZE}x{FRAME_SIZE} frames, got {}x{}",
                video.height(),
                video.width()
            )));
        }
        let cells = FRAME_SIZE / BLOCK;
        let mut out = Vec::with_capacity(video.len() * FEATURES_PER_FRAME);
        for frame in video.frames() {
            let px = frame.pixels();
            for br in 0..cells {
                for bc in 0..cells {
                    let mut sum = 0.0f64;
                    for r in br * BLOCK..(br + 1) * BLOCK {
                        for c in bc * BLOCK..(bc + 1) * BLOCK {
                            sum += f64::from(px[r * FRAME_SIZE + c]);
                        }
                    }
                    out.push(sum / (BLOCK * BLOCK) as f64);
                }
            }
        }
        Ok(RawEmbedding(out))
    }
}

/// Centering plus projection onto the leading principal axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    pub mean: Vec<f64>,
    /// `k` orthonormal rows of length `mean.len()`.
    pub components: Vec<Vec<f64>>,
    pub k: usize,
    /// Sample variance along each retained axis.
    #[serde(default)]
    pub explained_variance: Vec<f64>,
    /// Set when some retained axes carry no variance and were filled in
    /// with an arbitrary orthonormal completion.
    #[serde(default)]
    pub degenerate: bool,
}

pub fn default_pca_dim(n_samples: usize, dim: usize) -> usize {
    DEFAULT_PCA_DIM.min(n_samples.saturating_sub(1)).min(dim)
}

/// Fits a `k`-dimensional PCA on `samples`.
pub fn pca_fit(samples: &[RawEmbedding], k: usize) -> Result<PcaProjection> {
    let n = samples.len();
    if n < 2 {
        return Err(IseError::invalid("PCA needs at least two samples"));
    }
    let d = samples[0].dim();
    if samples.iter().any(|s| s.dim() != d) {
        return Err(IseError::shape("PCA samples differ in dimension"));
    }
    if k == 0 || k > d.min(n - 1) {
        return Err(IseError::invalid(format!("k = {k} must lie in 1..={}", d.min(n - 1))));
    }

    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s.values()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| samples[i].0[j] - mean[j]);
    let denom = (n - 1) as f64;

    // Eigen-decompose whichever of the covariance (d x d) and the Gram
    // matrix (n x n) is smaller; both share the nonzero spectrum.
    let (values, vectors): (Vec<f64>, Vec<DVector<f64>>) = if d <= n {
        let cov = centered.transpose() * &centered / denom;
        let eig = SymmetricEigen::new(cov);
        let order = descending(&eig.eigenvalues);
        order.iter().map(|&i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned())).unzip()
    } else {
        let gram = &centered * centered.transpose() / denom;
        let eig = SymmetricEigen::new(gram);
        let order = descending(&eig.eigenvalues);
        order
            .iter()
            .map(|&i| {
                let lambda = eig.eigenvalues[i];
                let u = centered.transpose() * eig.eigenvectors.column(i);
                let norm = u.norm();
                let u = if norm > 0.0 { u / norm } else { u };
                (lambda, u)
            })
            .unzip()
    };

    let trace: f64 = values.iter().map(|v| v.max(0.0)).sum();
    let tol = 1e-12 * trace.max(f64::MIN_POSITIVE);
    let mut components: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut explained = Vec::with_capacity(k);
    let mut degenerate = false;
    for (lambda, v) in values.into_iter().zip(vectors).take(k) {
        if lambda <= tol || trace == 0.0 {
            degenerate = true;
            break;
        }
        components.push(v.iter().copied().collect());
        explained.push(lambda.max(0.0));
    }
    if components.len() < k {
        complete_orthonormal(&mut components, k, d);
        explained.resize(k, 0.0);
    }
    for row in &mut components {
        apply_sign_rule(row);
    }
    Ok(PcaProjection { mean, components, k, explained_variance: explained, degenerate })
}

fn descending(values: &DVector<f64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

/// The largest-magnitude entry of each component is made positive.
fn apply_sign_rule(row: &mut [f64]) {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if v.abs() > row[best].abs() + 1e-12 {
            best = i;
        }
    }
    if row[best] < 0.0 {
        row.iter_mut().for_each(|v| *v = -*v);
    }
}

/// Extends `rows` with standard-basis directions orthogonalized against
/// the existing rows until there are `k`.
fn complete_orthonormal(rows: &mut Vec<Vec<f64>>, k: usize, d: usize) {
    let mut axis = 0;
    while rows.len() < k && axis < d {
        let mut v = vec![0.0; d];
        v[axis] = 1.0;
        axis += 1;
        for _ in 0..2 {
            for r in rows.iter() {
                let dot: f64 = r.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(r).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            rows.push(v);
        }
    }
}

impl PcaProjection {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, e: &RawEmbedding) -> Result<StateEmbedding> {
        if e.dim() != self.input_dim() {
            return Err(IseError::shape(format!(
                "embedding has {} entries, projection expects {}",
                e.dim(),
                self.input_dim()
            )));
        }
        let centered: Vec<f64> = e.0.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        Ok(StateEmbedding(
            self.components
                .iter()
                .map(|row| row.iter().zip(&centered).map(|(a, b)| a * b).sum())
                .collect(),
        ))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let p: PcaProjection = serde_json::from_slice(&std::fs::read(path)?)?;
        if p.components.len() != p.k || p.components.iter().any(|r| r.len() != p.mean.len()) {
            return Err(IseError::Format("inconsistent PCA projection file".into()));
        }
        Ok(p)
    }
}

pub fn pca_apply(p: &PcaProjection, e: &RawEmbedding) -> Result<StateEmbedding> {
    p.apply(e)
}

pub fn encode_video(video: &Video) -> Result<RawEmbedding> {
    BlockMeanEncoder.encode(video)
}
