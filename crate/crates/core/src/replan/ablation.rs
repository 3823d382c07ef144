use std::fmt;
use std::str::FromStr;

use super::experiment::{build_assets, run_experiment_with, ExperimentFile, SeedScheme};
use super::{Assets, Method, PlanQuality, ResultsTable};
use crate::error::{IseError, Result};
use crate::rejection::RejectionMetric;

pub const CANDIDATE_GRID: [usize; 5] = [1, 2, 3, 4, 5];
pub const FRACTION_GRID: [f64; 2] = [0.28, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    /// Ours with n = 1..=5 candidates.
    Candidates,
    /// Ours with raw-pixel and embedding rejection distances.
    Metric,
    /// Retrieval and rejection switched on and off.
    Modules,
    /// AVDC and Ours trained on a fraction of the failed videos.
    DataFraction,
}

impl Sweep {
    pub const ALL: [Sweep; 4] = [Sweep::Candidates, Sweep::Metric, Sweep::Modules, Sweep::DataFraction];

    pub fn name(self) -> &'static str {
        match self {
            Sweep::Candidates => "candidates",
            Sweep::Metric => "metric",
            Sweep::Modules => "modules",
            Sweep::DataFraction => "data-fraction",
        }
    }
}

impl fmt::Display for Sweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Sweep {
    type Err = IseError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        Sweep::ALL
            .into_iter()
            .find(|w| w.name() == key || (key == "n" && *w == Sweep::Candidates))
            .ok_or_else(|| IseError::invalid(format!("unknown sweep {s:?}")))
    }
}

#[derive(Debug, Clone)]
pub struct AblationPoint {
    pub label: String,
    pub table: ResultsTable,
    pub quality: Vec<PlanQuality>,
}

fn point(label: String, exp: &ExperimentFile, assets: &[Assets]) -> Result<AblationPoint> {
    let out = run_experiment_with(exp, assets, &exp.loop_config(false), SeedScheme::Paired)?;
    Ok(AblationPoint { label, table: out.table, quality: out.quality })
}

/// Runs one grid of the ablation study over `base`'s tasks and trials.
/// Every grid point uses the same per-trial seeds.
pub fn ablation_sweep(base: &ExperimentFile, sweep: Sweep) -> Result<Vec<AblationPoint>> {
    base.validate()?;
    let shared = |exp: &ExperimentFile| -> Result<Vec<Assets>> {
        exp.tasks.iter().map(|&k| build_assets(exp, k)).collect()
    };
    match sweep {
        Sweep::Candidates => {
            let assets = shared(base)?;
            CANDIDATE_GRID
                .iter()
                .map(|&n| {
                    let exp = ExperimentFile { methods: vec![Method::Ours], n_candidates: n, ..base.clone() };
                    point(format!("n={n}"), &exp, &assets)
                })
                .collect()
        }
        Sweep::Metric => {
            let assets = shared(base)?;
            [RejectionMetric::RawPixel, RejectionMetric::Embedding]
                .into_iter()
                .map(|m| {
                    let exp = ExperimentFile { methods: vec![Method::Ours], rejection_metric: m, ..base.clone() };
                    point(format!("metric={m}"), &exp, &assets)
                })
                .collect()
        }
        Sweep::Modules => {
            let assets = shared(base)?;
            [Method::Avdc, Method::AvdcRejection, Method::AvdcRetrieval, Method::Ours]
                .into_iter()
                .map(|m| {
                    let exp = ExperimentFile { methods: vec![m], ..base.clone() };
                    point(format!("method={m}"), &exp, &assets)
                })
                .collect()
        }
        Sweep::DataFraction => FRACTION_GRID
            .iter()
            .map(|&f| {
                let exp = ExperimentFile { methods: vec![Method::Avdc, Method::Ours], dataset_fraction: f, ..base.clone() };
                point(format!("fraction={f}"), &exp, &shared(&exp)?)
            })
            .collect(),
    }
}
