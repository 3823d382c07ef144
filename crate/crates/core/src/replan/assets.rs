use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{load_dataset, ExperienceDataset};
use crate::encoders::{default_pca_dim, pca_fit, BlockMeanEncoder, RawEmbedding, VideoEncoder};
use crate::envs::EnvKind;
use crate::error::{IseError, Result};
use crate::generator::{fit_generator_with, BandwidthRule, GeneratorMode, KernelGenerator};
use crate::retrieval::{build_table, EmbeddingTable};

pub const ASSETS_FILE: &str = "assets.json";

/// Pointer from a fitted assets directory back to its training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetsManifest {
    pub env: EnvKind,
    pub data_dir: PathBuf,
    pub pca_k: usize,
    #[serde(default)]
    pub bandwidth: BandwidthRule,
}

/// Everything an agent needs for one task: the embedding table and the
/// planning and identification generators fit on the same dataset.
#[derive(Debug, Clone)]
pub struct Assets {
    kind: EnvKind,
    table: EmbeddingTable,
    planner: KernelGenerator,
    identifier: KernelGenerator,
    bandwidth: BandwidthRule,
}

impl Assets {
    /// Fits PCA (default dimension when `pca_k` is `None`), the table and
    /// both generators.
    pub fn fit(kind: EnvKind, dataset: &ExperienceDataset, pca_k: Option<usize>) -> Result<Self> {
        Self::fit_with(kind, dataset, pca_k, BandwidthRule::default())
    }

    pub fn fit_with(kind: EnvKind, dataset: &ExperienceDataset, pca_k: Option<usize>, rule: BandwidthRule) -> Result<Self> {
        dataset.validate()?;
        let raws: Vec<RawEmbedding> =
            dataset.tuples().iter().map(|t| BlockMeanEncoder.encode(&t.video)).collect::<Result<_>>()?;
        let dim = raws.first().map_or(0, RawEmbedding::dim);
        let k = pca_k.unwrap_or_else(|| default_pca_dim(raws.len(), dim));
        let projection = pca_fit(&raws, k)?;
        let table = build_table(dataset, &BlockMeanEncoder, projection)?;
        Self::from_table(kind, dataset, table, rule)
    }

    pub fn from_table(
        kind: EnvKind,
        dataset: &ExperienceDataset,
        table: EmbeddingTable,
        rule: BandwidthRule,
    ) -> Result<Self> {
        if dataset.env() != kind.name() {
            return Err(IseError::Dataset(format!("dataset is for {}, expected {kind}", dataset.env())));
        }
        let planner = fit_generator_with(dataset, &table, GeneratorMode::Planning, rule)?;
        let identifier = fit_generator_with(dataset, &table, GeneratorMode::Identification, rule)?;
        Ok(Assets { kind, table, planner, identifier, bandwidth: rule })
    }

    pub fn kind(&self) -> EnvKind {
        self.kind
    }

    pub fn table(&self) -> &EmbeddingTable {
        &self.table
    }

    pub fn planner(&self) -> &KernelGenerator {
        &self.planner
    }

    pub fn identifier(&self) -> &KernelGenerator {
        &self.identifier
    }

    pub fn encoder(&self) -> &dyn VideoEncoder {
        &BlockMeanEncoder
    }

    /// Writes the table, projection and a manifest pointing at `data_dir`.
    pub fn save(&self, out: &Path, data_dir: &Path) -> Result<()> {
        self.table.save(out)?;
        let manifest = AssetsManifest {
            env: self.kind,
            data_dir: std::fs::canonicalize(data_dir)?,
            pca_k: self.table.dim(),
            bandwidth: self.bandwidth,
        };
        std::fs::write(out.join(ASSETS_FILE), serde_json::to_vec_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(ASSETS_FILE);
        if !path.exists() {
            return Err(IseError::MissingAssets(path.display().to_string()));
        }
        let manifest: AssetsManifest = serde_json::from_slice(&std::fs::read(&path)?)?;
        let dataset = load_dataset(&manifest.data_dir)?;
        let table = EmbeddingTable::load(dir)?;
        if table.objects() != dataset.objects() {
            return Err(IseError::Dataset("table objects do not match the dataset".into()));
        }
        Self::from_table(manifest.env, &dataset, table, manifest.bandwidth)
    }
}
