//! Failed-plan buffer and max-min distance plan selection.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encoders::{RawEmbedding, VideoEncoder};
use crate::error::{IseError, Result};
use crate::metrics::pixel_l2;
use crate::video::Video;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RejectionMetric {
    #[default]
    RawPixel,
    Embedding,
}

impl FromStr for RejectionMetric {
    type Err = IseError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "rawpixel" | "pixel" => Ok(RejectionMetric::RawPixel),
            "embedding" => Ok(RejectionMetric::Embedding),
            _ => Err(IseError::invalid(format!("unknown rejection metric {s:?}"))),
        }
    }
}

impl fmt::Display for RejectionMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectionMetric::RawPixel => "rawpixel",
            RejectionMetric::Embedding => "embedding",
        })
    }
}

/// Plans that were executed and failed during the current episode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FailedPlanBuffer {
    plans: Vec<Video>,
}

impl FailedPlanBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn plans(&self) -> &[Video] {
        &self.plans
    }

    pub fn len(&self) -> usize {
        self.plans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plans.is_empty()
    }

    pub fn clear(&mut self) {
        self.plans.clear();
    }
}

pub fn push_failed(buffer: &mut FailedPlanBuffer, plan: Video) -> Result<()> {
    if let Some(first) = buffer.plans.first() {
        plan.ensure_same_shape(first)?;
    }
    buffer.plans.push(plan);
    Ok(())
}

fn embedding_l2(a: &RawEmbedding, b: &RawEmbedding) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Distance from `plan` to the closest buffered failure; `+inf` when the
/// buffer is empty.
pub fn nearest_failed_distance(
    plan: &Video,
    buffer: &FailedPlanBuffer,
    metric: RejectionMetric,
    encoder: &dyn VideoEncoder,
) -> Result<f64> {
    let mut best = f64::INFINITY;
    let encoded = match metric {
        RejectionMetric::Embedding if !buffer.is_empty() => Some(encoder.encode(plan)?),
        _ => None,
    };
    for failed in &buffer.plans {
        let d = match &encoded {
            None => pixel_l2(plan, failed)?,
            Some(e) => {
                plan.ensure_same_shape(failed)?;
                embedding_l2(e, &encoder.encode(failed)?)
            }
        };
        best = best.min(d);
    }
    Ok(best)
}

/// Picks the candidate farthest from every past failure. Ties go to the
/// lowest index.
pub fn select_plan<'a>(
    candidates: &'a [Video],
    buffer: &FailedPlanBuffer,
    metric: RejectionMetric,
    encoder: &dyn VideoEncoder,
) -> Result<(usize, &'a Video)> {
    if candidates.is_empty() {
        return Err(IseError::invalid("select_plan needs at least one candidate"));
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (i, c) in candidates.iter().enumerate() {
        let d = nearest_failed_distance(c, buffer, metric, encoder)?;
        if d > best.1 {
            best = (i, d);
        }
    }
    Ok((best.0, &candidates[best.0]))
}
