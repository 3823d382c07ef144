//! Canonical embedding table and temperature-softmax retrieval.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::ExperienceDataset;
use crate::encoders::{PcaProjection, StateEmbedding, VideoEncoder};
use crate::error::{IseError, Result};
use crate::video::Video;

pub const TABLE_FILE: &str = "table.json";
pub const PCA_FILE: &str = "pca.json";

/// Default temperature as a fraction of the median canonical distance.
pub const DEFAULT_TAU_FACTOR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    #[default]
    L2,
    Cosine,
}

impl FromStr for DistanceMetric {
    type Err = IseError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(DistanceMetric::L2),
            "cosine" => Ok(DistanceMetric::Cosine),
            _ => Err(IseError::invalid(format!("unknown distance metric {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BufferPolicy {
    /// Query with the most recent failed interaction only.
    #[default]
    Latest,
    /// Average the logits of every failed interaction.
    Aggregate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub metric: DistanceMetric,
    pub temperature: f64,
    pub buffer_policy: BufferPolicy,
}

impl RetrievalConfig {
    pub fn new(metric: DistanceMetric, temperature: f64, buffer_policy: BufferPolicy) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(IseError::invalid(format!("temperature must be positive, got {temperature}")));
        }
        Ok(RetrievalConfig { metric, temperature, buffer_policy })
    }

    /// L2, latest-failure policy, temperature `factor` times the table's
    /// median canonical distance.
    pub fn relative(table: &EmbeddingTable, factor: f64) -> Result<Self> {
        let scale = median_pairwise_distance(table.canonical()).unwrap_or(1.0);
        Self::new(DistanceMetric::L2, factor * scale, BufferPolicy::Latest)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    /// Index into the table's object list.
    pub object: usize,
    pub success: bool,
    pub embedding: StateEmbedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TableFile {
    objects: Vec<String>,
    canonical: Vec<StateEmbedding>,
    entries: Vec<TableEntry>,
}

/// Projected embeddings of every dataset video plus one canonical
/// embedding per object.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    objects: Vec<String>,
    canonical: Vec<StateEmbedding>,
    entries: Vec<TableEntry>,
    projection: PcaProjection,
}

impl EmbeddingTable {
    /// Builds a table from precomputed parts. Each object needs a canonical
    /// embedding and every entry must reference a known object.
    pub fn from_parts(
        objects: Vec<String>,
        canonical: Vec<StateEmbedding>,
        entries: Vec<TableEntry>,
        projection: PcaProjection,
    ) -> Result<Self> {
        if objects.is_empty() || entries.is_empty() {
            return Err(IseError::Dataset("embedding table is empty".into()));
        }
        if canonical.len() != objects.len() {
            return Err(IseError::Dataset("one canonical embedding per object required".into()));
        }
        let k = projection.k;
        if canonical.iter().chain(entries.iter().map(|e| &e.embedding)).any(|e| e.dim() != k) {
            return Err(IseError::shape(format!("table embeddings must have {k} dims")));
        }
        if entries.iter().any(|e| e.object >= objects.len()) {
            return Err(IseError::Dataset("entry references an unknown object".into()));
        }
        Ok(EmbeddingTable { objects, canonical, entries, projection })
    }

    pub fn objects(&self) -> &[String] {
        &self.objects
    }

    pub fn canonical(&self) -> &[StateEmbedding] {
        &self.canonical
    }

    pub fn entries(&self) -> &[TableEntry] {
        &self.entries
    }

    pub fn projection(&self) -> &PcaProjection {
        &self.projection
    }

    pub fn dim(&self) -> usize {
        self.projection.k
    }

    pub fn object_index(&self, object_id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o == object_id)
    }

    /// Encodes and projects a video into table coordinates.
    pub fn embed(&self, encoder: &dyn VideoEncoder, video: &Video) -> Result<StateEmbedding> {
        self.projection.apply(&encoder.encode(video)?)
    }

    /// Index of the canonical embedding nearest to `e` (lowest index on ties).
    pub fn nearest_object(&self, e: &StateEmbedding) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, c) in self.canonical.iter().enumerate() {
            let d = c.squared_distance(e);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    /// Writes `table.json` and `pca.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let file = TableFile {
            objects: self.objects.clone(),
            canonical: self.canonical.clone(),
            entries: self.entries.clone(),
        };
        std::fs::write(dir.join(TABLE_FILE), serde_json::to_vec(&file)?)?;
        self.projection.save(&dir.join(PCA_FILE))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let table_path = dir.join(TABLE_FILE);
        let pca_path = dir.join(PCA_FILE);
        for p in [&table_path, &pca_path] {
            if !p.exists() {
                return Err(IseError::MissingAssets(p.display().to_string()));
            }
        }
        let file: TableFile = serde_json::from_slice(&std::fs::read(table_path)?)?;
        let projection = PcaProjection::load(&pca_path)?;
        Self::from_parts(file.objects, file.canonical, file.entries, projection)
    }
}

/// Embeds every dataset video; each object's canonical embedding is its
/// first successful entry in manifest order.
pub fn build_table(
    dataset: &ExperienceDataset,
    encoder: &dyn VideoEncoder,
    projection: PcaProjection,
) -> Result<EmbeddingTable> {
    dataset.validate()?;
    let objects = dataset.objects().to_vec();
    let mut entries = Vec::with_capacity(dataset.len());
    let mut canonical: Vec<Option<StateEmbedding>> = vec![None; objects.len()];
    for t in dataset.tuples() {
        let object = objects.iter().position(|o| *o == t.object_id).expect("object list is complete");
        let embedding = projection.apply(&encoder.encode(&t.video)?)?;
        if t.success && canonical[object].is_none() {
            canonical[object] = Some(embedding.clone());
        }
        entries.push(TableEntry { object, success: t.success, embedding });
    }
    let canonical = canonical.into_iter().map(|c| c.expect("validated dataset")).collect();
    EmbeddingTable::from_parts(objects, canonical, entries, projection)
}

pub fn embedding_distance(metric: DistanceMetric, a: &StateEmbedding, b: &StateEmbedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(IseError::shape(format!("embedding dims {} and {}", a.dim(), b.dim())));
    }
    match metric {
        DistanceMetric::L2 => Ok(a.squared_distance(b).sqrt()),
        DistanceMetric::Cosine => {
            let dot: f64 = a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum();
            let na = a.values().iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb = b.values().iter().map(|x| x * x).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 {
                return Err(IseError::invalid("cosine distance of a zero vector"));
            }
            Ok((1.0 - dot / (na * nb)).max(0.0))
        }
    }
}

/// `softmax(logits / tau)`, stabilized by subtracting the maximum.
pub fn softmax(logits: &[f64], tau: f64) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| ((l - max) / tau).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Median distance over all unordered pairs, or `None` with fewer than two
/// points or a zero median.
pub fn median_pairwise_distance(points: &[StateEmbedding]) -> Option<f64> {
    let mut d = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            d.push(points[i].squared_distance(&points[j]).sqrt());
        }
    }
    if d.is_empty() {
        return None;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let med = if m % 2 == 1 { d[m / 2] } else { 0.5 * (d[m / 2 - 1] + d[m / 2]) };
    (med > 0.0 && med.is_finite()).then_some(med)
}

/// Sampling distribution over table entries for the failed interactions in
/// `buffer` (oldest first).
pub fn retrieval_probabilities(
    table: &EmbeddingTable,
    encoder: &dyn VideoEncoder,
    buffer: &[Video],
    cfg: &RetrievalConfig,
) -> Result<Vec<f64>> {
    let queries: &[Video] = match (buffer.last(), cfg.buffer_policy) {
        (None, _) => return Err(IseError::invalid("retrieval needs at least one failed interaction")),
        (Some(_), BufferPolicy::Latest) => &buffer[buffer.len() - 1..],
        (Some(_), BufferPolicy::Aggregate) => buffer,
    };
    let mut logits = vec![0.0; table.entries.len()];
    for q in queries {
        let e = table.embed(encoder, q)?;
        for (l, entry) in logits.iter_mut().zip(&table.entries) {
            *l -= embedding_distance(cfg.metric, &e, &entry.embedding)?;
        }
    }
    let scale = queries.len() as f64;
    logits.iter_mut().for_each(|l| *l /= scale);
    Ok(softmax(&logits, cfg.temperature))
}

/// Samples a table entry and returns the index of the object that owns it.
pub fn retrieve_object<R: Rng + ?Sized>(
    table: &EmbeddingTable,
    encoder: &dyn VideoEncoder,
    buffer: &[Video],
    cfg: &RetrievalConfig,
    rng: &mut R,
) -> Result<usize> {
    let p = retrieval_probabilities(table, encoder, buffer, cfg)?;
    let k = sample_categorical(&p, rng)?;
    Ok(table.entries[k].object)
}

/// Samples the canonical embedding of a retrieved object.
pub fn retrieve<R: Rng + ?Sized>(
    table: &EmbeddingTable,
    encoder: &dyn VideoEncoder,
    buffer: &[Video],
    cfg: &RetrievalConfig,
    rng: &mut R,
) -> Result<StateEmbedding> {
    let object = retrieve_object(table, encoder, buffer, cfg, rng)?;
    Ok(table.canonical[object].clone())
}

pub(crate) fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize> {
    let dist = WeightedIndex::new(weights)
        .map_err(|e| IseError::invalid(format!("cannot sample from weights: {e}")))?;
    Ok(dist.sample(rng))
}

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceMetric::L2 => "l2",
            DistanceMetric::Cosine => "cosine",
        })
    }
}
