//! Plan generators. The kernel generator resamples dataset videos with
//! weights given by a Gaussian kernel on canonical embeddings.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::ExperienceDataset;
use crate::encoders::{BlockMeanEncoder, StateEmbedding, VideoEncoder};
use crate::error::{IseError, Result};
use crate::retrieval::{median_pairwise_distance, sample_categorical, EmbeddingTable};
use crate::video::{Frame, Video, PLAN_FRAMES};

pub const DEFAULT_HORIZON: usize = PLAN_FRAMES - 1;
pub const DEFAULT_CANDIDATES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorMode {
    /// Successful videos only.
    Planning,
    /// Every video, failures included.
    Identification,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub n_candidates: usize,
    pub noise_std: f64,
    pub horizon: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig { n_candidates: DEFAULT_CANDIDATES, noise_std: 0.0, horizon: DEFAULT_HORIZON }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_candidates == 0 {
            return Err(IseError::invalid("n_candidates must be at least 1"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(IseError::invalid(format!("noise_std must be nonnegative, got {}", self.noise_std)));
        }
        Ok(())
    }
}

/// Anything that turns a first frame and an optional state embedding into
/// candidate plans.
pub trait PlanGenerator: Send + Sync {
    fn generate(
        &self,
        f0: &Frame,
        e: Option<&StateEmbedding>,
        cfg: &GenerationConfig,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<Video>>;
}

#[derive(Debug, Clone)]
pub struct SupportEntry {
    pub video: Arc<Video>,
    pub object: usize,
    pub canonical: StateEmbedding,
    pub first_frame: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct KernelGenerator {
    mode: GeneratorMode,
    support: Vec<SupportEntry>,
    bandwidth: f64,
    first_frame_top_k: usize,
}

fn first_frame_features(f: &Frame) -> Result<Vec<f64>> {
    let v = Video::new(vec![f.clone()])?;
    Ok(BlockMeanEncoder.encode(&v)?.0)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// How the kernel bandwidth is derived from the canonical embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    /// Median distance over all pairs.
    MedianPairwise,
    /// Median distance from each embedding to its nearest distinct
    /// neighbour.
    #[default]
    MedianNearest,
    Fixed(f64),
}

impl BandwidthRule {
    /// Bandwidth for `canonical`, falling back to 1.0 when degenerate.
    pub fn resolve(self, canonical: &[StateEmbedding]) -> f64 {
        let h = match self {
            BandwidthRule::MedianPairwise => median_pairwise_distance(canonical),
            BandwidthRule::MedianNearest => median_nearest_distance(canonical),
            BandwidthRule::Fixed(h) => Some(h),
        };
        h.filter(|h| *h > 0.0 && h.is_finite()).unwrap_or(1.0)
    }
}

fn median_nearest_distance(points: &[StateEmbedding]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let mut d: Vec<f64> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| p.squared_distance(q).sqrt())
                .filter(|d| *d > 0.0)
                .fold(f64::INFINITY, f64::min)
        })
        .filter(|d| d.is_finite())
        .collect();
    if d.is_empty() {
        return None;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let med = if m % 2 == 1 { d[m / 2] } else { 0.5 * (d[m / 2 - 1] + d[m / 2]) };
    (med > 0.0).then_some(med)
}

pub fn fit_generator(dataset: &ExperienceDataset, table: &EmbeddingTable, mode: GeneratorMode) -> Result<KernelGenerator> {
    fit_generator_with(dataset, table, mode, BandwidthRule::default())
}

pub fn fit_generator_with(
    dataset: &ExperienceDataset,
    table: &EmbeddingTable,
    mode: GeneratorMode,
    rule: BandwidthRule,
) -> Result<KernelGenerator> {
    let mut support = Vec::new();
    for t in dataset.tuples() {
        if mode == GeneratorMode::Planning && !t.success {
            continue;
        }
        let object = table
            .object_index(&t.object_id)
            .ok_or_else(|| IseError::Dataset(format!("object {} missing from table", t.object_id)))?;
        support.push(SupportEntry {
            first_frame: first_frame_features(t.video.first_frame())?,
            video: Arc::new(t.video.clone()),
            object,
            canonical: table.canonical()[object].clone(),
        });
    }
    let bandwidth = rule.resolve(table.canonical());
    KernelGenerator::new(mode, support, bandwidth)
}

impl KernelGenerator {
    pub fn new(mode: GeneratorMode, support: Vec<SupportEntry>, bandwidth: f64) -> Result<Self> {
        if support.is_empty() {
            return Err(IseError::EmptySupport(format!("no {mode} videos in the dataset")));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(IseError::invalid(format!("bandwidth must be positive, got {bandwidth}")));
        }
        let shape = support[0].video.shape();
        let dim = support[0].canonical.dim();
        if support.iter().any(|s| s.video.shape() != shape || s.canonical.dim() != dim) {
            return Err(IseError::shape("support videos or embeddings differ in shape"));
        }
        let first_frame_top_k = support.len();
        Ok(KernelGenerator { mode, support, bandwidth, first_frame_top_k })
    }

    pub fn mode(&self) -> GeneratorMode {
        self.mode
    }

    pub fn support(&self) -> &[SupportEntry] {
        &self.support
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn first_frame_top_k(&self) -> usize {
        self.first_frame_top_k
    }

    pub fn with_bandwidth(mut self, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(IseError::invalid(format!("bandwidth must be positive, got {h}")));
        }
        self.bandwidth = h;
        Ok(self)
    }

    pub fn with_first_frame_top_k(mut self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(IseError::invalid("first_frame_top_k must be positive"));
        }
        self.first_frame_top_k = k.min(self.support.len());
        Ok(self)
    }

    fn check_inputs(&self, f0: &Frame, e: Option<&StateEmbedding>) -> Result<()> {
        let (_, h, w) = self.support[0].video.shape();
        if f0.height() != h || f0.width() != w {
            return Err(IseError::shape(format!("first frame is {}x{}, support is {h}x{w}", f0.height(), f0.width())));
        }
        let dim = self.support[0].canonical.dim();
        if let Some(e) = e {
            if e.dim() != dim {
                return Err(IseError::shape(format!("embedding has {} dims, generator expects {dim}", e.dim())));
            }
        }
        Ok(())
    }

    /// Support indices whose first frames are nearest to `f0`.
    fn restrict(&self, f0: &Frame) -> Result<Vec<usize>> {
        let mut idx: Vec<usize> = (0..self.support.len()).collect();
        if self.first_frame_top_k < self.support.len() {
            let q = first_frame_features(f0)?;
            let d: Vec<f64> = self.support.iter().map(|s| sq_dist(&q, &s.first_frame)).collect();
            idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
            idx.truncate(self.first_frame_top_k);
            idx.sort_unstable();
        }
        if idx.is_empty() {
            return Err(IseError::EmptySupport("restricted support is empty".into()));
        }
        Ok(idx)
    }

    /// Normalized kernel weights over `idx`; uniform for the null embedding.
    fn weights(&self, idx: &[usize], e: Option<&StateEmbedding>) -> Vec<f64> {
        let Some(e) = e else {
            return vec![1.0 / idx.len() as f64; idx.len()];
        };
        let scale = 2.0 * self.bandwidth * self.bandwidth;
        let logw: Vec<f64> = idx.iter().map(|&j| -e.squared_distance(&self.support[j].canonical) / scale).collect();
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
        let sum: f64 = w.iter().sum();
        w.into_iter().map(|x| x / sum).collect()
    }

    fn noisy_frame(&self, f0: &Frame, std: f64, rng: &mut dyn RngCore) -> Result<Frame> {
        let normal = Normal::new(0.0, std).map_err(|e| IseError::invalid(e.to_string()))?;
        let px = f0
            .pixels()
            .iter()
            .map(|&p| (f64::from(p) + normal.sample(rng)).clamp(0.0, 1.0) as f32)
            .collect();
        Frame::new(f0.height(), f0.width(), px)
    }

    /// Deterministic kernel-mean video for `e`, with frame 0 set to `f0`.
    pub fn id_generate(&self, f0: &Frame, e: &StateEmbedding) -> Result<Video> {
        if self.mode != GeneratorMode::Identification {
            return Err(IseError::invalid("id_generate needs an identification generator"));
        }
        self.check_inputs(f0, Some(e))?;
        let idx = self.restrict(f0)?;
        let w = self.weights(&idx, Some(e));
        let (t, h, wd) = self.support[0].video.shape();
        let per_frame = h * wd;
        let mut acc = vec![0.0f64; t * per_frame];
        for (&j, &wj) in idx.iter().zip(&w) {
            if wj == 0.0 {
                continue;
            }
            for (fi, frame) in self.support[j].video.frames().iter().enumerate().skip(1) {
                let out = &mut acc[fi * per_frame..(fi + 1) * per_frame];
                for (a, &p) in out.iter_mut().zip(frame.pixels()) {
                    *a += wj * f64::from(p);
                }
            }
        }
        let mut frames = Vec::with_capacity(t);
        frames.push(f0.clone());
        for fi in 1..t {
            let px = acc[fi * per_frame..(fi + 1) * per_frame].iter().map(|&v| v.clamp(0.0, 1.0) as f32).collect();
            frames.push(Frame::new(h, wd, px)?);
        }
        Video::new(frames)
    }

    /// Precomputes `L(e) = video_mse(observed, id_generate(f0, e))` in a
    /// form that costs O(objects^2) per evaluation.
    pub fn id_objective(&self, observed: &Video) -> Result<IdObjective> {
        if self.mode != GeneratorMode::Identification {
            return Err(IseError::invalid("id objective needs an identification generator"));
        }
        observed.ensure_same_shape(&self.support[0].video)?;
        let f0 = observed.first_frame();
        let idx = self.restrict(f0)?;

        // Entries of one object share a weight, so the kernel mean is a
        // mixture of per-object mean videos.
        let mut objects: Vec<usize> = Vec::new();
        let mut counts: Vec<f64> = Vec::new();
        let mut canonical: Vec<StateEmbedding> = Vec::new();
        let tail = observed.pixel_count() - f0.pixels().len();
        let mut means: Vec<Vec<f64>> = Vec::new();
        for &j in &idx {
            let s = &self.support[j];
            let g = match objects.iter().position(|&o| o == s.object) {
                Some(g) => g,
                None => {
                    objects.push(s.object);
                    counts.push(0.0);
                    canonical.push(s.canonical.clone());
                    means.push(vec![0.0; tail]);
                    objects.len() - 1
                }
            };
            counts[g] += 1.0;
            for (m, p) in means[g].iter_mut().zip(tail_pixels(&s.video)) {
                *m += f64::from(p);
            }
        }
        for (m, c) in means.iter_mut().zip(&counts) {
            m.iter_mut().for_each(|v| *v /= c);
        }
        let obs: Vec<f64> = tail_pixels(observed).map(f64::from).collect();
        let obs_sq = obs.iter().map(|v| v * v).sum();
        let cross = means.iter().map(|m| m.iter().zip(&obs).map(|(a, b)| a * b).sum()).collect();
        let n = means.len();
        let mut gram = vec![0.0; n * n];
        for a in 0..n {
            for b in a..n {
                let v: f64 = means[a].iter().zip(&means[b]).map(|(x, y)| x * y).sum();
                gram[a * n + b] = v;
                gram[b * n + a] = v;
            }
        }
        Ok(IdObjective {
            canonical,
            log_counts: counts.iter().map(|c| c.ln()).collect(),
            gram,
            cross,
            obs_sq,
            pixels: observed.pixel_count() as f64,
            bandwidth: self.bandwidth,
        })
    }
}

fn tail_pixels(v: &Video) -> impl Iterator<Item = f32> + '_ {
    v.frames().iter().skip(1).flat_map(|f| f.pixels().iter().copied())
}

impl PlanGenerator for KernelGenerator {
    fn generate(
        &self,
        f0: &Frame,
        e: Option<&StateEmbedding>,
        cfg: &GenerationConfig,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<Video>> {
        cfg.validate()?;
        self.check_inputs(f0, e)?;
        let frames = self.support[0].video.len();
        if cfg.horizon + 1 != frames {
            return Err(IseError::shape(format!("horizon {} does not match {frames}-frame support", cfg.horizon)));
        }
        let matched = if cfg.noise_std > 0.0 { self.noisy_frame(f0, cfg.noise_std, rng)? } else { f0.clone() };
        let idx = self.restrict(&matched)?;
        let w = self.weights(&idx, e);
        (0..cfg.n_candidates)
            .map(|_| {
                let k = sample_categorical(&w, rng)?;
                self.support[idx[k]].video.with_first_frame(f0)
            })
            .collect()
    }
}

/// Squared-error objective of the identification generator against one
/// observed video, reduced to per-object mean videos.
#[derive(Debug, Clone)]
pub struct IdObjective {
    canonical: Vec<StateEmbedding>,
    log_counts: Vec<f64>,
    gram: Vec<f64>,
    cross: Vec<f64>,
    obs_sq: f64,
    pixels: f64,
    bandwidth: f64,
}

impl IdObjective {
    pub fn dim(&self) -> usize {
        self.canonical[0].dim()
    }

    /// Mixture weight of each object for embedding `e`.
    pub fn mixture(&self, e: &[f64]) -> Vec<f64> {
        let scale = 2.0 * self.bandwidth * self.bandwidth;
        let logw: Vec<f64> = self
            .canonical
            .iter()
            .zip(&self.log_counts)
            .map(|(c, lc)| lc - sq_dist(e, c.values()) / scale)
            .collect();
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
        let sum: f64 = w.iter().sum();
        w.into_iter().map(|x| x / sum).collect()
    }

    pub fn loss(&self, e: &[f64]) -> f64 {
        let a = self.mixture(e);
        let n = a.len();
        let mut quad = 0.0;
        for i in 0..n {
            let row = &self.gram[i * n..(i + 1) * n];
            quad += a[i] * row.iter().zip(&a).map(|(g, y)| g * y).sum::<f64>();
        }
        let lin: f64 = a.iter().zip(&self.cross).map(|(x, c)| x * c).sum();
        ((self.obs_sq - 2.0 * lin + quad) / self.pixels).max(0.0)
    }
}

impl fmt::Display for GeneratorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeneratorMode::Planning => "planning",
            GeneratorMode::Identification => "identification",
        })
    }
}

/// Gaussian state embedding with unit variance per coordinate.
pub fn random_embedding<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> StateEmbedding {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    StateEmbedding((0..dim).map(|_| normal.sample(rng)).collect())
}
