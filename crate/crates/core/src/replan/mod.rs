//! The replanning loop: generate candidate plans, reject those close to
//! past failures, act, and update the belief from failed interactions.

mod ablation;
mod assets;
mod experiment;
mod report;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actor::plan_to_action;
use crate::encoders::StateEmbedding;
use crate::envs::{random_action, EnvAction, EnvInstance, HiddenParam};
use crate::error::{IseError, Result};
use crate::generator::{GenerationConfig, PlanGenerator};
use crate::metrics::{psnr, ssim};
use crate::refinement::{refine_embedding, InitMode, RefineConfig};
use crate::rejection::{push_failed, select_plan, FailedPlanBuffer, RejectionMetric};
use crate::retrieval::{retrieve, BufferPolicy, DistanceMetric, RetrievalConfig, DEFAULT_TAU_FACTOR};
use crate::video::Video;

pub use ablation::{ablation_sweep, AblationPoint, Sweep};
pub use assets::{Assets, AssetsManifest, ASSETS_FILE};
pub use experiment::{
    build_assets, episode_seed, run_experiment, run_experiment_with, theta_seed, write_episodes_csv, EpisodeRow,
    ExperimentFile, ExperimentOutput, SeedScheme, EPISODES_CSV,
};
pub use report::{
    embedding_csv, plan_quality, read_episodes_csv, results_svg, PlanQuality, ResultsCell, ResultsTable,
};

pub const DEFAULT_MAX_REPLANS: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Random,
    Avdc,
    AvdcRejection,
    AvdcRetrieval,
    Ours,
    OursRefine,
}

impl Method {
    pub const ALL: [Method; 6] =
        [Method::Random, Method::Avdc, Method::AvdcRejection, Method::AvdcRetrieval, Method::Ours, Method::OursRefine];

    pub fn name(self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::Avdc => "avdc",
            Method::AvdcRejection => "avdc_rejection",
            Method::AvdcRetrieval => "avdc_retrieval",
            Method::Ours => "ours",
            Method::OursRefine => "ours_refine",
        }
    }

    pub fn uses_generator(self) -> bool {
        self != Method::Random
    }

    pub fn retrieval(self) -> bool {
        matches!(self, Method::AvdcRetrieval | Method::Ours)
    }

    pub fn rejection(self) -> bool {
        matches!(self, Method::AvdcRejection | Method::Ours | Method::OursRefine)
    }

    pub fn refinement(self) -> bool {
        self == Method::OursRefine
    }

    /// Candidates generated per round; one when nothing selects among them.
    pub fn candidates(self, n: usize) -> usize {
        if self.rejection() {
            n
        } else {
            1
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = IseError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace(['-', '+', ' '], "_");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| IseError::invalid(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub max_replans: usize,
    pub n_candidates: usize,
    /// Retrieval temperature as a fraction of the median canonical distance.
    pub tau_factor: f64,
    pub retrieval_metric: DistanceMetric,
    pub buffer_policy: BufferPolicy,
    pub noise_std: f64,
    pub rejection_metric: RejectionMetric,
    pub refine_init: InitMode,
    pub refine_steps: usize,
    pub refine_restarts: usize,
    /// Record wall-clock time per component.
    pub timing: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            max_replans: DEFAULT_MAX_REPLANS,
            n_candidates: crate::generator::DEFAULT_CANDIDATES,
            tau_factor: DEFAULT_TAU_FACTOR,
            retrieval_metric: DistanceMetric::L2,
            buffer_policy: BufferPolicy::Latest,
            noise_std: 0.0,
            rejection_metric: RejectionMetric::RawPixel,
            refine_init: InitMode::Random,
            refine_steps: crate::refinement::DEFAULT_STEPS,
            refine_restarts: crate::refinement::DEFAULT_RESTARTS,
            timing: false,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_replans == 0 || self.n_candidates == 0 {
            return Err(IseError::invalid("max_replans and n_candidates must be at least 1"));
        }
        if !(self.tau_factor > 0.0 && self.tau_factor.is_finite()) {
            return Err(IseError::invalid(format!("tau must be positive, got {}", self.tau_factor)));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(IseError::invalid(format!("noise_std must be nonnegative, got {}", self.noise_std)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub selected: usize,
    /// `None` when the plan could not be decoded into an action.
    pub action: Option<EnvAction>,
    pub success: bool,
    pub plan_psnr: f64,
    pub plan_ssim: f64,
    /// The executed plan (or interaction video for the random baseline).
    pub plan: Video,
}

/// Wall-clock milliseconds spent per component.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub retrieve_ms: f64,
    pub generate_ms: f64,
    pub reject_ms: f64,
    pub act_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub theta: HiddenParam,
    pub method: Method,
    pub seed: u64,
    pub rounds: Vec<RoundRecord>,
    pub replans_until_success: usize,
    pub succeeded: bool,
    pub timing: Timing,
}

impl EpisodeRecord {
    pub fn mean_psnr(&self) -> f64 {
        self.rounds.iter().map(|r| r.plan_psnr).sum::<f64>() / self.rounds.len() as f64
    }

    pub fn mean_ssim(&self) -> f64 {
        self.rounds.iter().map(|r| r.plan_ssim).sum::<f64>() / self.rounds.len() as f64
    }
}

const STREAM_RETRIEVE: u64 = 1;
const STREAM_GENERATE: u64 = 2;
const STREAM_REFINE: u64 = 3;
const STREAM_ACT: u64 = 4;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

struct Clock {
    on: bool,
}

impl Clock {
    fn time<T>(&self, slot: &mut f64, f: impl FnOnce() -> T) -> T {
        if !self.on {
            return f();
        }
        let start = Instant::now();
        let out = f();
        *slot += start.elapsed().as_secs_f64() * 1e3;
        out
    }
}

/// Runs one episode on `env`. Independent random streams for retrieval,
/// generation, refinement and random actions are derived from `seed`, so
/// rounds before the first failure coincide across methods.
pub fn run_episode(env: &EnvInstance, method: Method, assets: &Assets, cfg: &LoopConfig, seed: u64) -> Result<EpisodeRecord> {
    cfg.validate()?;
    if env.kind() != assets.kind() {
        return Err(IseError::invalid(format!("assets are for {}, environment is {}", assets.kind(), env.kind())));
    }
    let mut retrieve_rng = stream(seed, STREAM_RETRIEVE);
    let mut gen_rng = stream(seed, STREAM_GENERATE);
    let mut refine_rng = stream(seed, STREAM_REFINE);
    let mut act_rng = stream(seed, STREAM_ACT);

    let retrieval_cfg = RetrievalConfig {
        metric: cfg.retrieval_metric,
        buffer_policy: cfg.buffer_policy,
        ..RetrievalConfig::relative(assets.table(), cfg.tau_factor)?
    };
    let refine_cfg = RefineConfig {
        steps: cfg.refine_steps,
        restarts: cfg.refine_restarts,
        ..RefineConfig::for_bandwidth(assets.identifier().bandwidth(), cfg.refine_init)
    };
    let n = method.candidates(cfg.n_candidates);
    let gen_cfg = GenerationConfig { n_candidates: 1, noise_std: cfg.noise_std, ..Default::default() };

    let f0 = env.reset();
    let gt = env.ground_truth_plan();
    let clock = Clock { on: cfg.timing };
    let mut timing = Timing::default();
    let mut failed_plans = FailedPlanBuffer::new();
    let mut failed_videos: Vec<Video> = Vec::new();
    let mut refined: Option<StateEmbedding> = None;
    let mut rounds = Vec::new();

    for _ in 0..cfg.max_replans {
        let (selected, plan, action) = if method.uses_generator() {
            let beliefs: Vec<Option<StateEmbedding>> = if failed_videos.is_empty() {
                vec![None; n]
            } else if method.retrieval() {
                clock.time(&mut timing.retrieve_ms, || {
                    (0..n)
                        .map(|_| {
                            retrieve(assets.table(), assets.encoder(), &failed_videos, &retrieval_cfg, &mut retrieve_rng)
                                .map(Some)
                        })
                        .collect::<Result<_>>()
                })?
            } else if method.refinement() {
                vec![refined.clone(); n]
            } else {
                vec![None; n]
            };
            let candidates: Vec<Video> = clock.time(&mut timing.generate_ms, || {
                let mut out = Vec::with_capacity(n);
                for e in &beliefs {
                    out.extend(assets.planner().generate(&f0, e.as_ref(), &gen_cfg, &mut gen_rng)?);
                }
                Ok::<_, IseError>(out)
            })?;
            let selected = if method.rejection() {
                clock.time(&mut timing.reject_ms, || {
                    select_plan(&candidates, &failed_plans, cfg.rejection_metric, assets.encoder()).map(|s| s.0)
                })?
            } else {
                0
            };
            let plan = candidates.into_iter().nth(selected).expect("selected index is in range");
            let action = clock.time(&mut timing.act_ms, || match plan_to_action(env.kind(), &plan) {
                Ok(a) => Ok(Some(a)),
                Err(IseError::Decode(_)) => Ok(None),
                Err(e) => Err(e),
            })?;
            (selected, Some(plan), action)
        } else {
            (0, None, Some(random_action(env.kind(), &mut act_rng)))
        };

        let outcome = match &action {
            Some(a) => Some(clock.time(&mut timing.act_ms, || env.execute(a))?),
            None => None,
        };
        let success = outcome.as_ref().is_some_and(|o| o.success);
        let shown = match (&plan, &outcome) {
            (Some(p), _) => p.clone(),
            (None, Some(o)) => o.video.clone(),
            (None, None) => unreachable!("random rounds always act"),
        };
        rounds.push(RoundRecord {
            selected,
            action,
            success,
            plan_psnr: psnr(&shown, &gt)?,
            plan_ssim: ssim(&shown, &gt)?,
            plan: shown.clone(),
        });
        if success {
            break;
        }

        if method.uses_generator() {
            push_failed(&mut failed_plans, shown)?;
        }
        if let Some(o) = outcome {
            failed_videos.push(o.video);
            if method.refinement() {
                refined = Some(clock.time(&mut timing.retrieve_ms, || {
                    let init = match cfg.refine_init {
                        InitMode::Random => None,
                        _ => Some(retrieve(
                            assets.table(),
                            assets.encoder(),
                            &failed_videos,
                            &retrieval_cfg,
                            &mut retrieve_rng,
                        )?),
                    };
                    let observed = failed_videos.last().expect("just pushed");
                    refine_embedding(assets.identifier(), observed, init.as_ref(), &refine_cfg, &mut refine_rng)
                        .map(|r| r.embedding)
                })?);
            }
        }
    }

    let succeeded = rounds.last().is_some_and(|r| r.success);
    let replans_until_success = if succeeded { rounds.len() } else { cfg.max_replans };
    Ok(EpisodeRecord {
        theta: env.theta(),
        method,
        seed,
        rounds,
        replans_until_success,
        succeeded,
        timing,
    })
}

#[cfg(test)]
mod tests;
