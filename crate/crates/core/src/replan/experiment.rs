use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_episode, Assets, AssetsManifest, LoopConfig, Method, ResultsTable, ASSETS_FILE};
use super::report::{plan_quality, PlanQuality};
use crate::dataset::{load_dataset, ExperienceDataset};
use crate::encoders::StateEmbedding;
use crate::generator::BandwidthRule;
use crate::envs::{generate_dataset, sample_hidden, EnvInstance, EnvKind};
use crate::error::{IseError, Result};
use crate::rejection::RejectionMetric;

pub const EPISODES_CSV: &str = "episodes.csv";

fn default_max_replans() -> usize {
    super::DEFAULT_MAX_REPLANS
}
fn default_candidates() -> usize {
    crate::generator::DEFAULT_CANDIDATES
}
fn default_tau() -> f64 {
    crate::retrieval::DEFAULT_TAU_FACTOR
}
fn default_fraction() -> f64 {
    1.0
}
fn default_per_success() -> usize {
    1
}
fn default_per_fail() -> usize {
    40
}

/// Experiment description. Without `assets_root` the training data for
/// each task is generated in memory from the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentFile {
    pub tasks: Vec<EnvKind>,
    pub methods: Vec<Method>,
    pub trials: usize,
    #[serde(default = "default_max_replans")]
    pub max_replans: usize,
    #[serde(default = "default_candidates")]
    pub n_candidates: usize,
    /// Temperature relative to the median canonical distance.
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub rejection_metric: RejectionMetric,
    /// Share of each object's failed videos kept for training.
    #[serde(default = "default_fraction")]
    pub dataset_fraction: f64,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assets_root: Option<PathBuf>,
    #[serde(default = "default_per_success")]
    pub per_theta_success: usize,
    #[serde(default = "default_per_fail")]
    pub per_theta_fail: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pca_k: Option<usize>,
    /// Kernel bandwidth rule for freshly fit generators.
    #[serde(default)]
    pub bandwidth: BandwidthRule,
}

impl ExperimentFile {
    pub fn new(tasks: Vec<EnvKind>, methods: Vec<Method>, trials: usize, master_seed: u64) -> Self {
        ExperimentFile {
            tasks,
            methods,
            trials,
            max_replans: default_max_replans(),
            n_candidates: default_candidates(),
            tau: default_tau(),
            noise_std: 0.0,
            rejection_metric: RejectionMetric::RawPixel,
            dataset_fraction: 1.0,
            master_seed,
            assets_root: None,
            per_theta_success: default_per_success(),
            per_theta_fail: default_per_fail(),
            pca_k: None,
            bandwidth: BandwidthRule::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let exp: ExperimentFile = serde_json::from_slice(&std::fs::read(path)?)?;
        exp.validate()?;
        Ok(exp)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tasks.is_empty() || self.methods.is_empty() || self.trials == 0 {
            return Err(IseError::invalid("experiment needs tasks, methods and at least one trial"));
        }
        if !(self.dataset_fraction > 0.0 && self.dataset_fraction <= 1.0) {
            return Err(IseError::invalid(format!("dataset_fraction {} not in (0, 1]", self.dataset_fraction)));
        }
        if self.per_theta_success == 0 {
            return Err(IseError::invalid("per_theta_success must be at least 1"));
        }
        self.loop_config(false).validate()
    }

    pub fn loop_config(&self, timing: bool) -> LoopConfig {
        LoopConfig {
            max_replans: self.max_replans,
            n_candidates: self.n_candidates,
            tau_factor: self.tau,
            noise_std: self.noise_std,
            rejection_metric: self.rejection_metric,
            timing,
            ..LoopConfig::default()
        }
    }
}

/// How episode seeds depend on the method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedScheme {
    /// Seed from (master, task, method, trial).
    PerMethod,
    /// Seed from (master, task, trial), shared by every method.
    Paired,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3))
}

fn combine(parts: &[u64]) -> u64 {
    parts.iter().fold(0u64, |h, &p| splitmix64(h ^ splitmix64(p)))
}

pub fn episode_seed(master: u64, task: EnvKind, method: Method, trial: usize) -> u64 {
    combine(&[master, fnv1a(task.name()), fnv1a(method.name()), trial as u64])
}

/// Seed of the hidden parameter drawn for a trial; independent of method.
pub fn theta_seed(master: u64, task: EnvKind, trial: usize) -> u64 {
    combine(&[master, fnv1a(task.name()), fnv1a("theta"), trial as u64])
}

fn paired_seed(master: u64, task: EnvKind, trial: usize) -> u64 {
    combine(&[master, fnv1a(task.name()), fnv1a("paired"), trial as u64])
}

fn data_seed(master: u64, task: EnvKind) -> u64 {
    combine(&[master, fnv1a(task.name()), fnv1a("data")])
}

fn training_data(exp: &ExperimentFile, kind: EnvKind) -> Result<ExperienceDataset> {
    match &exp.assets_root {
        Some(root) => {
            let path = root.join(kind.name()).join(ASSETS_FILE);
            if !path.exists() {
                return Err(IseError::MissingAssets(path.display().to_string()));
            }
            let manifest: AssetsManifest = serde_json::from_slice(&std::fs::read(&path)?)?;
            load_dataset(&manifest.data_dir)
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(data_seed(exp.master_seed, kind));
            generate_dataset(kind, exp.per_theta_success, exp.per_theta_fail, &mut rng)
        }
    }
}

/// Loads or fits the assets for one task of an experiment.
pub fn build_assets(exp: &ExperimentFile, kind: EnvKind) -> Result<Assets> {
    if let (Some(root), true) = (&exp.assets_root, exp.dataset_fraction >= 1.0) {
        return Assets::load(&root.join(kind.name()));
    }
    let data = training_data(exp, kind)?;
    let data = if exp.dataset_fraction < 1.0 { data.with_failure_fraction(exp.dataset_fraction)? } else { data };
    Assets::fit_with(kind, &data, exp.pca_k, exp.bandwidth)
}

/// One CSV line per episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub task: EnvKind,
    pub method: Method,
    pub trial: usize,
    pub seed: u64,
    pub theta: String,
    pub replans: usize,
    pub succeeded: bool,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    pub wall_ms_retrieve: f64,
    pub wall_ms_generate: f64,
    pub wall_ms_reject: f64,
    pub wall_ms_act: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<EpisodeRow>,
    pub table: ResultsTable,
    pub quality: Vec<PlanQuality>,
    /// Object ids and canonical embeddings of each task's table.
    pub canonical: Vec<(EnvKind, Vec<String>, Vec<StateEmbedding>)>,
}

pub fn run_experiment(exp: &ExperimentFile, timing: bool) -> Result<ExperimentOutput> {
    exp.validate()?;
    let assets: Vec<Assets> = exp.tasks.iter().map(|&k| build_assets(exp, k)).collect::<Result<_>>()?;
    run_experiment_with(exp, &assets, &exp.loop_config(timing), SeedScheme::PerMethod)
}

/// Runs every (task, method, trial) episode with prebuilt `assets`
/// (one per task, in task order).
pub fn run_experiment_with(
    exp: &ExperimentFile,
    assets: &[Assets],
    cfg: &LoopConfig,
    scheme: SeedScheme,
) -> Result<ExperimentOutput> {
    exp.validate()?;
    if assets.len() != exp.tasks.len() || assets.iter().zip(&exp.tasks).any(|(a, &k)| a.kind() != k) {
        return Err(IseError::MissingAssets("assets do not match the experiment tasks".into()));
    }
    let mut jobs = Vec::new();
    for (ti, &task) in exp.tasks.iter().enumerate() {
        for &method in &exp.methods {
            for trial in 0..exp.trials {
                jobs.push((ti, task, method, trial));
            }
        }
    }
    let rows: Vec<EpisodeRow> = jobs
        .par_iter()
        .map(|&(ti, task, method, trial)| {
            let mut theta_rng = ChaCha8Rng::seed_from_u64(theta_seed(exp.master_seed, task, trial));
            let theta = sample_hidden(task, &mut theta_rng);
            let env = EnvInstance::new(task, theta)?;
            let seed = match scheme {
                SeedScheme::PerMethod => episode_seed(exp.master_seed, task, method, trial),
                SeedScheme::Paired => paired_seed(exp.master_seed, task, trial),
            };
            let rec = run_episode(&env, method, &assets[ti], cfg, seed)?;
            Ok(EpisodeRow {
                task,
                method,
                trial,
                seed,
                theta: theta.meta().to_string(),
                replans: rec.replans_until_success,
                succeeded: rec.succeeded,
                mean_psnr: rec.mean_psnr(),
                mean_ssim: rec.mean_ssim(),
                wall_ms_retrieve: rec.timing.retrieve_ms,
                wall_ms_generate: rec.timing.generate_ms,
                wall_ms_reject: rec.timing.reject_ms,
                wall_ms_act: rec.timing.act_ms,
            })
        })
        .collect::<Result<_>>()?;
    let table = ResultsTable::from_rows(&rows);
    let quality = plan_quality(&rows);
    let canonical = assets
        .iter()
        .map(|a| (a.kind(), a.table().objects().to_vec(), a.table().canonical().to_vec()))
        .collect();
    Ok(ExperimentOutput { rows, table, quality, canonical })
}

pub fn write_episodes_csv(rows: &[EpisodeRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
