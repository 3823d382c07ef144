//! Desk-scale manipulation tasks with hidden physical parameters.
//!
//! Each task is a closed-form kinematic surrogate rendered into 32x32
//! grayscale frames. The hidden parameter never affects the initial frame;
//! it only shows up once the gripper interacts with the object.

mod raster;

use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{ExperienceDataset, ExperienceTuple, ThetaMeta};
use crate::error::{IseError, Result};
use crate::video::{Frame, Video, PLAN_FRAMES};

pub use raster::{BACKGROUND, GRIPPER, OBJECT, TARGET};
use raster::Canvas;

/// Center-of-mass offsets (m) from the bar's geometric center.
pub const COM_OFFSETS: [f64; 24] = [
    -0.18, -0.165, -0.15, -0.135, -0.12, -0.105, -0.09, -0.075, -0.06, -0.05, -0.03, -0.015, 0.0,
    0.015, 0.03, 0.045, 0.06, 0.075, 0.09, 0.105, 0.12, 0.135, 0.15, 0.18,
];

/// Friction coefficients of the run-out slope.
pub const FRICTIONS: [f64; 13] =
    [0.24, 0.25, 0.26, 0.27, 0.28, 0.30, 0.32, 0.34, 0.35, 0.36, 0.38, 0.39, 0.40];

pub const BAR_LENGTH_M: f64 = 0.4;
pub const MAX_CONTACT_OFFSET: f64 = 0.2;
/// Deflection per metre of contact error (rad/m).
pub const BAR_STIFFNESS: f64 = 5.0;
pub const BAR_ANGLE_TOLERANCE: f64 = 0.15;
/// Reference friction of the stop-position model.
pub const REFERENCE_FRICTION: f64 = 0.32;
pub const STOP_BAND: (f64, f64) = (0.95, 1.05);
pub const MAX_STOP: f64 = 2.0;

const EPS: f64 = 1e-9;

// Bar tasks: renderer's affine map from bar coordinate (m) to pixel column.
pub const PX_PER_M: f64 = 70.0;
pub const BAR_CENTER_COL: f64 = 16.0;
const BAR_RADIUS_PX: f64 = 1.0;
const MAX_RENDER_ANGLE: f64 = 1.2;
/// Frame in which the gripper touches the object in every rollout.
pub const CONTACT_FRAME: usize = 2;

// Slide brick: push height -> gripper row, stop position -> brick column.
pub const SLIDE_BASE_ROW: f64 = 29.0;
pub const SLIDE_ROWS_PER_UNIT: f64 = 27.0;
const SLIDE_GRIPPER_COL: f64 = 4.0;
const SLIDE_BRICK_COL: f64 = 8.0;
const SLIDE_COLS_PER_UNIT: f64 = 11.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    PushBar,
    PickBar,
    SlideBrick,
    OpenBox,
    TurnFaucet,
}

impl EnvKind {
    pub const ALL: [EnvKind; 5] =
        [EnvKind::PushBar, EnvKind::PickBar, EnvKind::SlideBrick, EnvKind::OpenBox, EnvKind::TurnFaucet];

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::PushBar => "pushbar",
            EnvKind::PickBar => "pickbar",
            EnvKind::SlideBrick => "slidebrick",
            EnvKind::OpenBox => "openbox",
            EnvKind::TurnFaucet => "turnfaucet",
        }
    }

    pub fn is_discrete(self) -> bool {
        matches!(self, EnvKind::OpenBox | EnvKind::TurnFaucet)
    }

    /// The two modes of a discrete task.
    pub fn modes(self) -> Option<[Mode; 2]> {
        match self {
            EnvKind::OpenBox => Some([Mode::Lift, Mode::Slide]),
            EnvKind::TurnFaucet => Some([Mode::Cw, Mode::Ccw]),
            _ => None,
        }
    }

    /// Every hidden parameter value used for this task, in table order.
    pub fn theta_table(self) -> Vec<HiddenParam> {
        let scalar = |v: f64| HiddenParam { kind: self, value: ParamValue::Scalar(v) };
        match self {
            EnvKind::PushBar | EnvKind::PickBar => COM_OFFSETS.iter().map(|&v| scalar(v)).collect(),
            EnvKind::SlideBrick => FRICTIONS.iter().map(|&v| scalar(v)).collect(),
            EnvKind::OpenBox | EnvKind::TurnFaucet => self
                .modes()
                .unwrap()
                .iter()
                .map(|&m| HiddenParam { kind: self, value: ParamValue::Mode(m) })
                .collect(),
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = IseError;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_lowercase();
        EnvKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| IseError::invalid(format!("unknown environment kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Lift,
    Slide,
    Cw,
    Ccw,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Lift => "lift",
            Mode::Slide => "slide",
            Mode::Cw => "cw",
            Mode::Ccw => "ccw",
        }
    }
}

impl FromStr for Mode {
    type Err = IseError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lift" => Ok(Mode::Lift),
            "slide" => Ok(Mode::Slide),
            "cw" => Ok(Mode::Cw),
            "ccw" => Ok(Mode::Ccw),
            _ => Err(IseError::invalid(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamValue {
    Scalar(f64),
    Mode(Mode),
}

/// Hidden parameter of one task instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HiddenParam {
    kind: EnvKind,
    value: ParamValue,
}

impl HiddenParam {
    pub fn new(kind: EnvKind, value: ParamValue) -> Result<Self> {
        let ok = match (kind, value) {
            (EnvKind::PushBar | EnvKind::PickBar, ParamValue::Scalar(v)) => {
                (COM_OFFSETS[0] - EPS..=COM_OFFSETS[23] + EPS).contains(&v)
            }
            (EnvKind::SlideBrick, ParamValue::Scalar(v)) => {
                (FRICTIONS[0] - EPS..=FRICTIONS[12] + EPS).contains(&v)
            }
            (EnvKind::OpenBox, ParamValue::Mode(m)) => matches!(m, Mode::Lift | Mode::Slide),
            (EnvKind::TurnFaucet, ParamValue::Mode(m)) => matches!(m, Mode::Cw | Mode::Ccw),
            _ => false,
        };
        if !ok {
            return Err(IseError::invalid(format!("{value:?} is not a valid hidden parameter for {kind}")));
        }
        Ok(HiddenParam { kind, value })
    }

    pub fn scalar(kind: EnvKind, v: f64) -> Result<Self> {
        HiddenParam::new(kind, ParamValue::Scalar(v))
    }

    pub fn mode(kind: EnvKind, m: Mode) -> Result<Self> {
        HiddenParam::new(kind, ParamValue::Mode(m))
    }

    pub fn kind(&self) -> EnvKind {
        self.kind
    }

    pub fn value(&self) -> ParamValue {
        self.value
    }

    pub fn as_scalar(&self) -> Option<f64> {
        match self.value {
            ParamValue::Scalar(v) => Some(v),
            ParamValue::Mode(_) => None,
        }
    }

    pub fn as_mode(&self) -> Option<Mode> {
        match self.value {
            ParamValue::Mode(m) => Some(m),
            ParamValue::Scalar(_) => None,
        }
    }

    /// Object id used in datasets, e.g. `pushbar/-0.18` or `openbox/lift`.
    pub fn object_id(&self) -> String {
        format!("{}/{}", self.kind, self)
    }

    pub fn meta(&self) -> ThetaMeta {
        match self.value {
            ParamValue::Scalar(v) => ThetaMeta::Value(v),
            ParamValue::Mode(m) => ThetaMeta::Label(m.name().to_string()),
        }
    }
}

impl fmt::Display for HiddenParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value {
            ParamValue::Scalar(v) => write!(f, "{v}"),
            ParamValue::Mode(m) => f.write_str(m.name()),
        }
    }
}

/// Uniform draw from the task's parameter table.
pub fn sample_hidden<R: Rng + ?Sized>(kind: EnvKind, rng: &mut R) -> HiddenParam {
    *kind.theta_table().choose(rng).expect("parameter tables are non-empty")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum EnvAction {
    /// Grasp/push point along the bar, metres from its geometric center.
    ContactOffset(f64),
    /// Normalized height reached on the slope before release.
    PushHeight(f64),
    Mode(Mode),
}

impl EnvAction {
    pub fn validate_for(&self, kind: EnvKind) -> Result<()> {
        let ok = match (kind, *self) {
            (EnvKind::PushBar | EnvKind::PickBar, EnvAction::ContactOffset(c)) => {
                c.is_finite() && c.abs() <= MAX_CONTACT_OFFSET + EPS
            }
            (EnvKind::SlideBrick, EnvAction::PushHeight(h)) => (0.0..=1.0).contains(&h),
            (EnvKind::OpenBox, EnvAction::Mode(m)) => matches!(m, Mode::Lift | Mode::Slide),
            (EnvKind::TurnFaucet, EnvAction::Mode(m)) => matches!(m, Mode::Cw | Mode::Ccw),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(IseError::invalid(format!("action {self:?} does not apply to {kind}")))
        }
    }
}

impl fmt::Display for EnvAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvAction::ContactOffset(c) => write!(f, "offset={c:.4}"),
            EnvAction::PushHeight(h) => write!(f, "height={h:.4}"),
            EnvAction::Mode(m) => write!(f, "mode={}", m.name()),
        }
    }
}

/// Uniformly random action over the task's action range.
pub fn random_action<R: Rng + ?Sized>(kind: EnvKind, rng: &mut R) -> EnvAction {
    match kind {
        EnvKind::PushBar | EnvKind::PickBar => {
            EnvAction::ContactOffset(rng.random_range(-MAX_CONTACT_OFFSET..=MAX_CONTACT_OFFSET))
        }
        EnvKind::SlideBrick => EnvAction::PushHeight(rng.random_range(0.0..=1.0)),
        EnvKind::OpenBox | EnvKind::TurnFaucet => {
            EnvAction::Mode(*kind.modes().unwrap().choose(rng).unwrap())
        }
    }
}

/// Pose of the manipulated object in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObjectPose {
    Absent,
    /// Bar center `(row, col)` and rotation (rad, positive turns the right
    /// end downward on screen).
    Bar { center: (f64, f64), angle: f64 },
    Brick { center: (f64, f64) },
    /// Lid displacement `(rows, cols)` from its resting place.
    Lid { offset: (f64, f64) },
    /// Faucet handle angle (rad, screen-clockwise from the +col axis).
    Handle { angle: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneState {
    pub gripper: Option<(f64, f64)>,
    pub object: ObjectPose,
}

impl SceneState {
    pub fn empty() -> Self {
        SceneState { gripper: None, object: ObjectPose::Absent }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionOutcome {
    pub video: Video,
    pub success: bool,
}

/// A task with its (privileged) hidden parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvInstance {
    kind: EnvKind,
    theta: HiddenParam,
}

// Static layout per task.
const PUSH_BAR_ROW: f64 = 22.0;
const PUSH_HOME: (f64, f64) = (29.0, 16.0);
const PUSH_TRAVEL: f64 = 19.0;
const PICK_BAR_ROW: f64 = 28.0;
const PICK_HOME: (f64, f64) = (12.0, 16.0);
const PICK_TRAVEL: f64 = 24.0;
const LID_ROWS: (i64, i64) = (16, 18);
const LID_COLS: (i64, i64) = (8, 23);
const BOX_HOME: (f64, f64) = (6.0, 4.0);
const LID_HANDLE: (f64, f64) = (17.0, 16.0);
const LID_TRAVEL: f64 = 12.0;
const FAUCET_PIVOT: (f64, f64) = (16.0, 16.0);
const FAUCET_RADIUS: f64 = 10.0;
const FAUCET_HOME: (f64, f64) = (28.0, 4.0);
const FAUCET_REST_ANGLE: f64 = -std::f64::consts::FRAC_PI_4;
const FAUCET_TURN: f64 = std::f64::consts::FRAC_PI_2;
const STUCK_FAUCET_TURN: f64 = 8.0 * std::f64::consts::PI / 180.0;

fn lerp(a: (f64, f64), b: (f64, f64), t: f64) -> (f64, f64) {
    (a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t)
}

/// Push/lift progress of frames after contact, in `(0, 1]`.
fn progress(t: usize) -> f64 {
    (t - CONTACT_FRAME) as f64 / (PLAN_FRAMES - 1 - CONTACT_FRAME) as f64
}

pub fn contact_col(offset: f64) -> f64 {
    BAR_CENTER_COL + PX_PER_M * offset
}

fn faucet_end(angle: f64) -> (f64, f64) {
    (FAUCET_PIVOT.0 + FAUCET_RADIUS * angle.sin(), FAUCET_PIVOT.1 + FAUCET_RADIUS * angle.cos())
}

/// Draws one frame of `kind` in the given state.
pub fn render_scene(kind: EnvKind, state: &SceneState) -> Result<Frame> {
    let mut canvas = Canvas::new();
    match kind {
        EnvKind::PushBar => canvas.fill_rect((1, 4), (0, 31), TARGET),
        EnvKind::PickBar => canvas.fill_rect((3, 5), (0, 31), TARGET),
        EnvKind::SlideBrick => canvas.fill_rect((26, 31), (19, 20), TARGET),
        EnvKind::OpenBox => canvas.fill_rect((19, 28), LID_COLS, TARGET),
        EnvKind::TurnFaucet => canvas.disk(FAUCET_PIVOT, 3.0, TARGET),
    }
    match (kind, state.object) {
        (_, ObjectPose::Absent) => {}
        (EnvKind::PushBar | EnvKind::PickBar, ObjectPose::Bar { center, angle }) => {
            let half = 0.5 * BAR_LENGTH_M * PX_PER_M;
            let (dr, dc) = (half * angle.sin(), half * angle.cos());
            canvas.segment(
                (center.0 - dr, center.1 - dc),
                (center.0 + dr, center.1 + dc),
                BAR_RADIUS_PX,
                OBJECT,
            );
        }
        (EnvKind::SlideBrick, ObjectPose::Brick { center }) => canvas.block(center, 1, OBJECT),
        (EnvKind::OpenBox, ObjectPose::Lid { offset }) => {
            let (dr, dc) = (offset.0.round() as i64, offset.1.round() as i64);
            canvas.fill_rect((LID_ROWS.0 + dr, LID_ROWS.1 + dr), (LID_COLS.0 + dc, LID_COLS.1 + dc), OBJECT);
        }
        (EnvKind::TurnFaucet, ObjectPose::Handle { angle }) => {
            canvas.segment(FAUCET_PIVOT, faucet_end(angle), BAR_RADIUS_PX, OBJECT)
        }
        (k, pose) => return Err(IseError::invalid(format!("pose {pose:?} cannot be rendered for {k}"))),
    }
    if let Some(g) = state.gripper {
        let n = crate::video::FRAME_SIZE as f64;
        if !(-1.0..=n).contains(&g.0) || !(-1.0..=n).contains(&g.1) {
            return Err(IseError::invalid(format!("gripper at {g:?} is off-frame")));
        }
        canvas.gripper(g);
    }
    Ok(canvas.finish())
}

impl EnvInstance {
    pub fn new(kind: EnvKind, theta: HiddenParam) -> Result<Self> {
        if theta.kind != kind {
            return Err(IseError::invalid(format!("hidden parameter for {} used with {kind}", theta.kind)));
        }
        Ok(EnvInstance { kind, theta })
    }

    pub fn kind(&self) -> EnvKind {
        self.kind
    }

    pub fn theta(&self) -> HiddenParam {
        self.theta
    }

    pub fn render(&self, state: &SceneState) -> Result<Frame> {
        render_scene(self.kind, state)
    }

    fn rest_state(&self) -> SceneState {
        match self.kind {
            EnvKind::PushBar => SceneState {
                gripper: Some(PUSH_HOME),
                object: ObjectPose::Bar { center: (PUSH_BAR_ROW, BAR_CENTER_COL), angle: 0.0 },
            },
            EnvKind::PickBar => SceneState {
                gripper: Some(PICK_HOME),
                object: ObjectPose::Bar { center: (PICK_BAR_ROW, BAR_CENTER_COL), angle: 0.0 },
            },
            EnvKind::SlideBrick => SceneState {
                gripper: Some((SLIDE_BASE_ROW, SLIDE_GRIPPER_COL)),
                object: ObjectPose::Brick { center: (SLIDE_BASE_ROW, SLIDE_BRICK_COL) },
            },
            EnvKind::OpenBox => {
                SceneState { gripper: Some(BOX_HOME), object: ObjectPose::Lid { offset: (0.0, 0.0) } }
            }
            EnvKind::TurnFaucet => SceneState {
                gripper: Some(FAUCET_HOME),
                object: ObjectPose::Handle { angle: FAUCET_REST_ANGLE },
            },
        }
    }

    /// Initial observation; identical for every hidden parameter of a kind.
    pub fn reset(&self) -> Frame {
        self.render(&self.rest_state()).expect("rest state is always renderable")
    }

    /// Whether `action` solves this instance.
    pub fn succeeds(&self, action: &EnvAction) -> Result<bool> {
        action.validate_for(self.kind)?;
        Ok(match (*action, self.theta.value) {
            (EnvAction::ContactOffset(c), ParamValue::Scalar(com)) => {
                (BAR_STIFFNESS * (c - com)).abs() <= BAR_ANGLE_TOLERANCE + EPS
            }
            (EnvAction::PushHeight(h), ParamValue::Scalar(mu)) => {
                let s = stop_position(h, mu);
                s >= STOP_BAND.0 - EPS && s <= STOP_BAND.1 + EPS
            }
            (EnvAction::Mode(m), ParamValue::Mode(truth)) => m == truth,
            _ => unreachable!("validated above"),
        })
    }

    /// Per-frame scene states of the rollout for `action`.
    pub fn rollout_states(&self, action: &EnvAction) -> Result<Vec<SceneState>> {
        let success = self.succeeds(action)?;
        let rest = self.rest_state();
        let states = (0..PLAN_FRAMES)
            .map(|t| match (*action, self.theta.value) {
                (EnvAction::ContactOffset(c), ParamValue::Scalar(com)) => {
                    let deflection = BAR_STIFFNESS * (c - com);
                    self.bar_state(t, c, deflection)
                }
                (EnvAction::PushHeight(h), ParamValue::Scalar(mu)) => slide_state(t, h, stop_position(h, mu)),
                (EnvAction::Mode(m), _) if self.kind == EnvKind::OpenBox => box_state(t, m, success),
                (EnvAction::Mode(m), _) => faucet_state(t, m, success),
                _ => rest,
            })
            .collect();
        Ok(states)
    }

    fn bar_state(&self, t: usize, offset: f64, deflection: f64) -> SceneState {
        let (home, bar_row, travel, approach) = match self.kind {
            EnvKind::PushBar => (PUSH_HOME, PUSH_BAR_ROW, -PUSH_TRAVEL, 3.0),
            _ => (PICK_HOME, PICK_BAR_ROW, -PICK_TRAVEL, -3.0),
        };
        let gc = contact_col(offset);
        let contact_grip = (bar_row + approach, gc);
        let bar_rest = ObjectPose::Bar { center: (bar_row, BAR_CENTER_COL), angle: 0.0 };
        match t {
            0 => SceneState { gripper: Some(home), object: bar_rest },
            1 => SceneState { gripper: Some(lerp(home, contact_grip, 0.5)), object: bar_rest },
            2 => SceneState { gripper: Some(contact_grip), object: bar_rest },
            _ => {
                let p = progress(t);
                let shift = travel * p;
                let angle = deflection.clamp(-MAX_RENDER_ANGLE, MAX_RENDER_ANGLE) * p;
                // The bar pivots about the contact point while it travels.
                let lever = BAR_CENTER_COL - gc;
                let center = (bar_row + shift + lever * angle.sin(), gc + lever * angle.cos());
                SceneState {
                    gripper: Some((contact_grip.0 + shift, gc)),
                    object: ObjectPose::Bar { center, angle },
                }
            }
        }
    }

    pub fn execute(&self, action: &EnvAction) -> Result<ExecutionOutcome> {
        let success = self.succeeds(action)?;
        let frames = self
            .rollout_states(action)?
            .iter()
            .map(|s| self.render(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(ExecutionOutcome { video: Video::new(frames)?, success })
    }

    /// Privileged policy that always succeeds.
    pub fn scripted_action(&self) -> EnvAction {
        match self.theta.value {
            ParamValue::Scalar(v) if self.kind == EnvKind::SlideBrick => {
                EnvAction::PushHeight(1.0 / (1.0 + REFERENCE_FRICTION / v))
            }
            ParamValue::Scalar(v) => EnvAction::ContactOffset(v),
            ParamValue::Mode(m) => EnvAction::Mode(m),
        }
    }

    /// Rollout of the scripted policy: the ground-truth plan.
    pub fn ground_truth_plan(&self) -> Video {
        self.execute(&self.scripted_action()).expect("scripted action is valid").video
    }
}

/// Where the brick comes to rest on the run-out after release.
pub fn stop_position(push_height: f64, friction: f64) -> f64 {
    (push_height * (1.0 + REFERENCE_FRICTION / friction)).clamp(0.0, MAX_STOP)
}

pub fn slide_row(height: f64) -> f64 {
    SLIDE_BASE_ROW - SLIDE_ROWS_PER_UNIT * height
}

fn slide_state(t: usize, h: f64, stop: f64) -> SceneState {
    let on_slope = |y: f64| (slide_row(y), SLIDE_BRICK_COL);
    let run_out = |s: f64| (SLIDE_BASE_ROW, SLIDE_BRICK_COL + SLIDE_COLS_PER_UNIT * s);
    let apex_grip = (slide_row(h), SLIDE_GRIPPER_COL);
    let (grip, brick) = match t {
        0 => ((SLIDE_BASE_ROW, SLIDE_GRIPPER_COL), on_slope(0.0)),
        1 => ((slide_row(h / 2.0), SLIDE_GRIPPER_COL), on_slope(h / 2.0)),
        2 => (apex_grip, on_slope(h)),
        3 => (apex_grip, on_slope(h / 2.0)),
        4 => (apex_grip, on_slope(0.0)),
        5 => (apex_grip, run_out(0.5 * stop)),
        6 => (apex_grip, run_out(0.85 * stop)),
        _ => (apex_grip, run_out(stop)),
    };
    SceneState { gripper: Some(grip), object: ObjectPose::Brick { center: brick } }
}

fn box_state(t: usize, attempted: Mode, success: bool) -> SceneState {
    let dir = match attempted {
        Mode::Lift => (-1.0, 0.0),
        _ => (0.0, 1.0),
    };
    let (grip, offset) = match t {
        0 => (BOX_HOME, 0.0),
        1 => (lerp(BOX_HOME, LID_HANDLE, 0.5), 0.0),
        2 => (LID_HANDLE, 0.0),
        _ if success => (LID_HANDLE, LID_TRAVEL * progress(t)),
        // Wrong mode: the lid gives by one pixel, then jams.
        _ => (LID_HANDLE, 1.0),
    };
    let off = (dir.0 * offset, dir.1 * offset);
    SceneState {
        gripper: Some((grip.0 + off.0, grip.1 + off.1)),
        object: ObjectPose::Lid { offset: off },
    }
}

fn faucet_state(t: usize, attempted: Mode, success: bool) -> SceneState {
    let sign = if attempted == Mode::Cw { 1.0 } else { -1.0 };
    let grasp = faucet_end(FAUCET_REST_ANGLE);
    let angle = match t {
        0..=2 => FAUCET_REST_ANGLE,
        _ if success => FAUCET_REST_ANGLE + sign * FAUCET_TURN * progress(t),
        _ => FAUCET_REST_ANGLE + sign * STUCK_FAUCET_TURN,
    };
    let grip = match t {
        0 => FAUCET_HOME,
        1 => lerp(FAUCET_HOME, grasp, 0.5),
        _ => faucet_end(angle),
    };
    SceneState { gripper: Some(grip), object: ObjectPose::Handle { angle } }
}

/// Builds an experience dataset: for every table value, `per_success`
/// scripted rollouts and `per_fail` rollouts of uniformly random failing
/// actions.
pub fn generate_dataset<R: Rng + ?Sized>(
    kind: EnvKind,
    per_success: usize,
    per_fail: usize,
    rng: &mut R,
) -> Result<ExperienceDataset> {
    if per_success == 0 {
        return Err(IseError::invalid("every object needs at least one successful rollout"));
    }
    let mut ds = ExperienceDataset::new(kind.name(), Vec::new())?;
    for theta in kind.theta_table() {
        let env = EnvInstance::new(kind, theta)?;
        let gt = env.ground_truth_plan();
        for _ in 0..per_success {
            ds.push(ExperienceTuple::new(gt.clone(), theta.object_id(), true)?.with_theta(theta.meta()))?;
        }
        let mut made = 0;
        let mut attempts = 0;
        while made < per_fail {
            attempts += 1;
            if attempts > 1000 * (per_fail + 1) {
                return Err(IseError::Dataset(format!("could not sample failures for {}", theta.object_id())));
            }
            let action = random_action(kind, rng);
            let out = env.execute(&action)?;
            if !out.success {
                ds.push(ExperienceTuple::new(out.video, theta.object_id(), false)?.with_theta(theta.meta()))?;
                made += 1;
            }
        }
    }
    Ok(ds)
}
