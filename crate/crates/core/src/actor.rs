//! Recovers executable actions from plan videos by tracking the gripper.

use crate::envs::{
    EnvAction, EnvKind, Mode, BAR_CENTER_COL, CONTACT_FRAME, MAX_CONTACT_OFFSET, PX_PER_M,
    SLIDE_BASE_ROW, SLIDE_ROWS_PER_UNIT,
};
use crate::error::{IseError, Result};
use crate::video::{Video, PLAN_FRAMES};

/// Intensity band that isolates the gripper marker.
pub const GRIPPER_BAND: (f32, f32) = (0.95, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct TrackedTrajectory {
    /// Per-frame `(row, col)` centroid; `None` where nothing matched.
    pub points: Vec<Option<(f64, f64)>>,
}

impl TrackedTrajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn valid(&self) -> Vec<bool> {
        self.points.iter().map(Option::is_some).collect()
    }

    fn at(&self, frame: usize) -> Result<(f64, f64)> {
        self.points
            .get(frame)
            .copied()
            .flatten()
            .ok_or_else(|| IseError::Decode(format!("no gripper pixels in frame {frame}")))
    }
}

/// Centroid of the pixels whose intensity lies in `band`, frame by frame.
pub fn track_centroid(video: &Video, band: (f32, f32)) -> TrackedTrajectory {
    let points = video
        .frames()
        .iter()
        .map(|f| {
            let (mut sr, mut sc, mut n) = (0.0, 0.0, 0usize);
            for r in 0..f.height() {
                for c in 0..f.width() {
                    let v = f.get(r, c);
                    if v >= band.0 && v <= band.1 {
                        sr += r as f64;
                        sc += c as f64;
                        n += 1;
                    }
                }
            }
            (n > 0).then(|| (sr / n as f64, sc / n as f64))
        })
        .collect();
    TrackedTrajectory { points }
}

/// Decodes the action a plan video depicts for a task of `kind`.
pub fn plan_to_action(kind: EnvKind, plan: &Video) -> Result<EnvAction> {
    if plan.len() != PLAN_FRAMES {
        return Err(IseError::shape(format!("plans have {PLAN_FRAMES} frames, got {}", plan.len())));
    }
    let track = track_centroid(plan, GRIPPER_BAND);
    match kind {
        EnvKind::PushBar | EnvKind::PickBar => {
            let (_, col) = track.at(CONTACT_FRAME)?;
            let offset = ((col - BAR_CENTER_COL) / PX_PER_M).clamp(-MAX_CONTACT_OFFSET, MAX_CONTACT_OFFSET);
            Ok(EnvAction::ContactOffset(offset))
        }
        EnvKind::SlideBrick => {
            let apex = track
                .points
                .iter()
                .flatten()
                .map(|p| p.0)
                .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.min(r))))
                .ok_or_else(|| IseError::Decode("gripper never visible".into()))?;
            let height = ((SLIDE_BASE_ROW - apex) / SLIDE_ROWS_PER_UNIT).clamp(0.0, 1.0);
            Ok(EnvAction::PushHeight(height))
        }
        EnvKind::OpenBox | EnvKind::TurnFaucet => {
            let start = track.at(CONTACT_FRAME)?;
            let end = track.at(PLAN_FRAMES - 1)?;
            let (dr, dc) = ((end.0 - start.0).abs(), (end.1 - start.1).abs());
            if dr == 0.0 && dc == 0.0 {
                return Err(IseError::Decode("gripper does not move after contact".into()));
            }
            let vertical = dr >= dc;
            let mode = match (kind, vertical) {
                (EnvKind::OpenBox, true) => Mode::Lift,
                (EnvKind::OpenBox, false) => Mode::Slide,
                (_, true) => Mode::Cw,
                (_, false) => Mode::Ccw,
            };
            Ok(EnvAction::Mode(mode))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{render_scene, EnvInstance, ObjectPose, SceneState, COM_OFFSETS};
    use crate::video::Frame;

    fn gripper_frame(at: (f64, f64)) -> Frame {
        render_scene(EnvKind::PushBar, &SceneState { gripper: Some(at), object: ObjectPose::Absent }).unwrap()
    }

    #[test]
    fn render_then_track_recovers_center() {
        let v = Video::new(vec![gripper_frame((16.0, 16.0))]).unwrap();
        let p = track_centroid(&v, GRIPPER_BAND).points[0].unwrap();
        assert!((p.0 - 16.0).abs() <= 0.5 && (p.1 - 16.0).abs() <= 0.5);
    }

    #[test]
    fn background_is_invalid() {
        let v = Video::new(vec![Frame::zeros(32, 32)]).unwrap();
        let t = track_centroid(&v, GRIPPER_BAND);
        assert_eq!(t.valid(), vec![false]);
    }

    #[test]
    fn moving_gripper_gives_monotone_path() {
        let v = Video::new(vec![gripper_frame((10.0, 10.0)), gripper_frame((20.0, 20.0))]).unwrap();
        let t = track_centroid(&v, GRIPPER_BAND);
        let (a, b) = (t.points[0].unwrap(), t.points[1].unwrap());
        assert!(b.0 > a.0 && b.1 > a.1);
    }

    #[test]
    fn bar_offsets_decode_within_half_grid_step() {
        for kind in [EnvKind::PushBar, EnvKind::PickBar] {
            for theta in COM_OFFSETS {
                let env = EnvInstance::new(kind, crate::envs::HiddenParam::scalar(kind, theta).unwrap()).unwrap();
                match plan_to_action(kind, &env.ground_truth_plan()).unwrap() {
                    EnvAction::ContactOffset(c) => assert!((c - theta).abs() <= 0.015, "{kind} {theta} -> {c}"),
                    other => panic!("{other:?}"),
                }
            }
        }
    }

    #[test]
    fn box_modes_roundtrip() {
        for m in [Mode::Lift, Mode::Slide] {
            let env = EnvInstance::new(EnvKind::OpenBox, crate::envs::HiddenParam::mode(EnvKind::OpenBox, m).unwrap())
                .unwrap();
            assert_eq!(plan_to_action(EnvKind::OpenBox, &env.ground_truth_plan()).unwrap(), EnvAction::Mode(m));
        }
    }

    #[test]
    fn decoded_plans_succeed_everywhere() {
        for kind in EnvKind::ALL {
            for theta in kind.theta_table() {
                let env = EnvInstance::new(kind, theta).unwrap();
                let action = plan_to_action(kind, &env.ground_truth_plan()).unwrap();
                assert!(env.execute(&action).unwrap().success, "{kind} {theta} decoded {action}");
            }
        }
    }

    #[test]
    fn missing_gripper_at_contact_is_a_decode_error() {
        let env = EnvInstance::new(
            EnvKind::PushBar,
            crate::envs::HiddenParam::scalar(EnvKind::PushBar, 0.06).unwrap(),
        )
        .unwrap();
        let plan = env.ground_truth_plan();
        let mut frames = plan.frames().to_vec();
        frames[CONTACT_FRAME] = Frame::zeros(32, 32);
        let broken = Video::new(frames).unwrap();
        assert!(matches!(plan_to_action(EnvKind::PushBar, &broken), Err(IseError::Decode(_))));
    }

    #[test]
    fn decode_is_pure() {
        let env = EnvInstance::new(
            EnvKind::SlideBrick,
            crate::envs::HiddenParam::scalar(EnvKind::SlideBrick, 0.24).unwrap(),
        )
        .unwrap();
        let plan = env.ground_truth_plan();
        assert_eq!(
            plan_to_action(EnvKind::SlideBrick, &plan).unwrap(),
            plan_to_action(EnvKind::SlideBrick, &plan).unwrap()
        );
    }
}
