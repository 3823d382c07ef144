//! State-embedding refinement against a frozen identification generator.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::encoders::StateEmbedding;
use crate::error::{IseError, Result};
use crate::generator::{random_embedding, IdObjective, KernelGenerator};
use crate::video::{Video, PLAN_FRAMES};

pub const DEFAULT_STEPS: usize = 200;
pub const DEFAULT_RESTARTS: usize = 3;
pub const DEFAULT_LR_FACTOR: f64 = 0.1;
pub const DEFAULT_FD_FACTOR: f64 = 1e-3;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    /// Unit-variance Gaussian starts, best of `restarts`.
    #[default]
    Random,
    /// Start from the supplied embedding.
    Retrieval,
    /// Supplied embedding plus unit-variance Gaussian jitter.
    Combined,
}

impl FromStr for InitMode {
    type Err = IseError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(InitMode::Random),
            "retrieval" => Ok(InitMode::Retrieval),
            "combined" => Ok(InitMode::Combined),
            _ => Err(IseError::invalid(format!("unknown init mode {s:?}"))),
        }
    }
}

impl fmt::Display for InitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitMode::Random => "random",
            InitMode::Retrieval => "retrieval",
            InitMode::Combined => "combined",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub init_mode: InitMode,
    pub steps: usize,
    pub learning_rate: f64,
    pub fd_epsilon: f64,
    pub restarts: usize,
}

impl RefineConfig {
    /// Defaults with step sizes scaled by the generator bandwidth `h`.
    pub fn for_bandwidth(h: f64, init_mode: InitMode) -> Self {
        RefineConfig {
            init_mode,
            steps: DEFAULT_STEPS,
            learning_rate: DEFAULT_LR_FACTOR * h,
            fd_epsilon: DEFAULT_FD_FACTOR * h,
            restarts: DEFAULT_RESTARTS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.restarts == 0 {
            return Err(IseError::invalid("steps and restarts must be at least 1"));
        }
        for (name, v) in [("learning_rate", self.learning_rate), ("fd_epsilon", self.fd_epsilon)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(IseError::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutcome {
    pub embedding: StateEmbedding,
    pub loss: f64,
    /// Best loss seen so far after each evaluation of an iterate, over all
    /// runs in order.
    pub trace: Vec<f64>,
}

impl RefineOutcome {
    /// Number of trace entries before the best loss first drops below
    /// `threshold`.
    pub fn iterations_to(&self, threshold: f64) -> Option<usize> {
        self.trace.iter().position(|&l| l < threshold)
    }
}

/// Central-difference gradient of the objective at `e`.
pub fn fd_gradient(obj: &IdObjective, e: &[f64], eps: f64) -> Vec<f64> {
    let mut x = e.to_vec();
    (0..e.len())
        .map(|i| {
            x[i] = e[i] + eps;
            let up = obj.loss(&x);
            x[i] = e[i] - eps;
            let down = obj.loss(&x);
            x[i] = e[i];
            (up - down) / (2.0 * eps)
        })
        .collect()
}

fn adam_run(obj: &IdObjective, start: Vec<f64>, cfg: &RefineConfig, best: &mut (Vec<f64>, f64), trace: &mut Vec<f64>) {
    let mut e = start;
    let d = e.len();
    let (mut m, mut v) = (vec![0.0; d], vec![0.0; d]);
    let mut record = |e: &[f64], best: &mut (Vec<f64>, f64)| {
        let l = obj.loss(e);
        if l < best.1 {
            *best = (e.to_vec(), l);
        }
        trace.push(best.1);
    };
    record(&e, best);
    for t in 1..=cfg.steps {
        let g = fd_gradient(obj, &e, cfg.fd_epsilon);
        let (c1, c2) = (1.0 - ADAM_BETA1.powi(t as i32), 1.0 - ADAM_BETA2.powi(t as i32));
        for i in 0..d {
            m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
            v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
            e[i] -= cfg.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
        }
        record(&e, best);
    }
}

/// Minimizes `video_mse(observed, id_generate(g, observed[0], e))` over `e`.
pub fn refine_embedding<R: Rng + ?Sized>(
    g: &KernelGenerator,
    observed: &Video,
    init: Option<&StateEmbedding>,
    cfg: &RefineConfig,
    rng: &mut R,
) -> Result<RefineOutcome> {
    cfg.validate()?;
    if observed.len() != PLAN_FRAMES {
        return Err(IseError::shape(format!("observed video has {} frames, expected {PLAN_FRAMES}", observed.len())));
    }
    let obj = g.id_objective(observed)?;
    let dim = obj.dim();
    if let Some(e) = init {
        if e.dim() != dim {
            return Err(IseError::shape(format!("init has {} dims, generator expects {dim}", e.dim())));
        }
    }
    let mode = if init.is_none() { InitMode::Random } else { cfg.init_mode };
    let runs = if mode == InitMode::Random { cfg.restarts } else { 1 };
    let seeds: Vec<u64> = (0..runs).map(|_| rng.random()).collect();

    let mut best = (vec![0.0; dim], f64::INFINITY);
    let mut trace = Vec::with_capacity(runs * (cfg.steps + 1) + 1);
    if let Some(e) = init {
        best = (e.values().to_vec(), obj.loss(e.values()));
        trace.push(best.1);
    }
    for seed in seeds {
        let mut run_rng = ChaCha8Rng::seed_from_u64(seed);
        let start = match (mode, init) {
            (InitMode::Retrieval, Some(e)) => e.values().to_vec(),
            (InitMode::Combined, Some(e)) => {
                let normal = Normal::new(0.0, 1.0).expect("unit normal");
                e.values().iter().map(|x| x + normal.sample(&mut run_rng)).collect()
            }
            _ => random_embedding(dim, &mut run_rng).0,
        };
        adam_run(&obj, start, cfg, &mut best, &mut trace);
    }
    Ok(RefineOutcome { embedding: StateEmbedding(best.0), loss: best.1, trace })
}
