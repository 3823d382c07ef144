//! Experience datasets of `(video, object id, success)` tuples and their
//! on-disk manifest.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{IseError, Result};
use crate::video::{load_video, save_video, Video};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Evaluation-only record of the hidden parameter behind an entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaMeta {
    Value(f64),
    Label(String),
}

impl std::fmt::Display for ThetaMeta {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ThetaMeta::Value(v) => write!(f, "{v}"),
            ThetaMeta::Label(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperienceTuple {
    pub video: Video,
    pub object_id: String,
    pub success: bool,
    pub theta: Option<ThetaMeta>,
}

impl ExperienceTuple {
    pub fn new(video: Video, object_id: impl Into<String>, success: bool) -> Result<Self> {
        let object_id = object_id.into();
        if object_id.is_empty() {
            return Err(IseError::Dataset("object_id must be non-empty".into()));
        }
        Ok(ExperienceTuple { video, object_id, success, theta: None })
    }

    pub fn with_theta(mut self, theta: ThetaMeta) -> Self {
        self.theta = Some(theta);
        self
    }
}

/// Tuples grouped by object id, in order of first appearance.
#[derive(Debug, Clone, Default)]
pub struct ExperienceDataset {
    env: String,
    tuples: Vec<ExperienceTuple>,
    objects: Vec<String>,
    by_object: HashMap<String, Vec<usize>>,
}

impl ExperienceDataset {
    pub fn new(env: impl Into<String>, tuples: Vec<ExperienceTuple>) -> Result<Self> {
        let mut ds = ExperienceDataset { env: env.into(), ..Default::default() };
        for t in tuples {
            ds.push(t)?;
        }
        Ok(ds)
    }

    pub fn push(&mut self, tuple: ExperienceTuple) -> Result<()> {
        if let Some(first) = self.tuples.first() {
            first.video.ensure_same_shape(&tuple.video)?;
        }
        let idx = self.tuples.len();
        match self.by_object.get_mut(&tuple.object_id) {
            Some(list) => list.push(idx),
            None => {
                self.objects.push(tuple.object_id.clone());
                self.by_object.insert(tuple.object_id.clone(), vec![idx]);
            }
        }
        self.tuples.push(tuple);
        Ok(())
    }

    pub fn env(&self) -> &str {
        &self.env
    }

    pub fn tuples(&self) -> &[ExperienceTuple] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Object ids in order of first appearance.
    pub fn objects(&self) -> &[String] {
        &self.objects
    }

    pub fn indices_of(&self, object_id: &str) -> Option<&[usize]> {
        self.by_object.get(object_id).map(Vec::as_slice)
    }

    pub fn success_count(&self) -> usize {
        self.tuples.iter().filter(|t| t.success).count()
    }

    /// Checks that every object owns at least one successful entry.
    pub fn validate(&self) -> Result<()> {
        for obj in &self.objects {
            let ok = self.by_object[obj].iter().any(|&i| self.tuples[i].success);
            if !ok {
                return Err(IseError::Dataset(format!("object {obj} has no successful entry")));
            }
        }
        Ok(())
    }

    /// Keeps every success and the first `ceil(fraction * n)` failures of
    /// each object.
    pub fn with_failure_fraction(&self, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(IseError::invalid(format!("dataset fraction {fraction} not in (0, 1]")));
        }
        let mut keep = vec![false; self.tuples.len()];
        for obj in &self.objects {
            let idx = &self.by_object[obj];
            let fails: Vec<usize> = idx.iter().copied().filter(|&i| !self.tuples[i].success).collect();
            let n_keep = (fraction * fails.len() as f64 - 1e-9).ceil() as usize;
            for &i in idx.iter().filter(|&&i| self.tuples[i].success) {
                keep[i] = true;
            }
            for &i in fails.iter().take(n_keep) {
                keep[i] = true;
            }
        }
        let tuples = self
            .tuples
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(t, _)| t.clone())
            .collect();
        ExperienceDataset::new(self.env.clone(), tuples)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub video: String,
    pub object_id: String,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<ThetaMeta>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub env: String,
    pub entries: Vec<ManifestEntry>,
}

/// Writes `manifest.json` plus one ISEV file per entry under `dir/videos/`.
pub fn save_dataset(dataset: &ExperienceDataset, dir: &Path) -> Result<PathBuf> {
    let video_dir = dir.join("videos");
    fs::create_dir_all(&video_dir)?;
    let mut entries = Vec::with_capacity(dataset.len());
    for (i, t) in dataset.tuples().iter().enumerate() {
        let rel = format!("videos/{i:06}.isev");
        save_video(&t.video, &dir.join(&rel))?;
        entries.push(ManifestEntry {
            video: rel,
            object_id: t.object_id.clone(),
            success: t.success,
            theta: t.theta.clone(),
        });
    }
    let manifest = Manifest { env: dataset.env().to_string(), entries };
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_vec_pretty(&manifest)?)?;
    Ok(path)
}

pub fn load_dataset(dir: &Path) -> Result<ExperienceDataset> {
    let raw = fs::read(dir.join(MANIFEST_FILE))?;
    let manifest: Manifest = serde_json::from_slice(&raw)?;
    let mut ds = ExperienceDataset { env: manifest.env, ..Default::default() };
    for e in manifest.entries {
        let video = load_video(&dir.join(&e.video))?;
        let mut t = ExperienceTuple::new(video, e.object_id, e.success)?;
        t.theta = e.theta;
        ds.push(t)?;
    }
    Ok(ds)
}
