//! C ABI over `ise-core`.
//!
//! Every function returns an [`IseStatus`]. On failure the message is kept
//! in a thread-local slot readable with [`ise_last_error_message`]. Objects
//! cross the boundary as opaque pointers that the caller frees with the
//! matching `*_free` function.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use ise_core::actor::plan_to_action;
use ise_core::envs::{EnvAction, EnvInstance, EnvKind, Mode};
use ise_core::metrics;
use ise_core::replan::{run_experiment, write_episodes_csv, ExperimentFile, ExperimentOutput, Method};
use ise_core::video::{load_video, save_video, Video};
use ise_core::IseError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IseStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    Io = 4,
    Format = 5,
    Dataset = 6,
    Decode = 7,
    MissingAssets = 8,
    Utf8 = 9,
    BufferTooSmall = 10,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IseTask {
    PushBar = 0,
    PickBar = 1,
    SlideBrick = 2,
    OpenBox = 3,
    TurnFaucet = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IseActionType {
    ContactOffset = 0,
    PushHeight = 1,
    Mode = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IseMode {
    Lift = 0,
    Slide = 1,
    Cw = 2,
    Ccw = 3,
}

/// Action passed to or returned from an environment. `value` is read for
/// `CONTACT_OFFSET` and `PUSH_HEIGHT`, `mode` for `MODE`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IseAction {
    pub action_type: IseActionType,
    pub value: f64,
    pub mode: IseMode,
}

/// Opaque video handle.
pub struct IseVideo {
    inner: Video,
}

/// Opaque environment handle.
pub struct IseEnv {
    inner: EnvInstance,
}

/// Opaque experiment results handle.
pub struct IseResults {
    inner: ExperimentOutput,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &IseError) -> IseStatus {
    match e {
        IseError::Io(_) => IseStatus::Io,
        IseError::Json(_) | IseError::Csv(_) | IseError::Format(_) | IseError::Truncated { .. } => IseStatus::Format,
        IseError::PixelRange { .. } | IseError::InvalidArgument(_) => IseStatus::InvalidArgument,
        IseError::Shape(_) => IseStatus::Shape,
        IseError::Dataset(_) | IseError::EmptySupport(_) => IseStatus::Dataset,
        IseError::Decode(_) => IseStatus::Decode,
        IseError::MissingAssets(_) => IseStatus::MissingAssets,
    }
}

struct Fail(IseStatus, String);

impl From<IseError> for Fail {
    fn from(e: IseError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(IseStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> IseStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IseStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside ise".into());
            IseStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    Ok(PathBuf::from(str_arg(p, "path")?))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Fail(IseStatus::Utf8, format!("{what}: {e}")))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

impl From<IseTask> for EnvKind {
    fn from(t: IseTask) -> Self {
        match t {
            IseTask::PushBar => EnvKind::PushBar,
            IseTask::PickBar => EnvKind::PickBar,
            IseTask::SlideBrick => EnvKind::SlideBrick,
            IseTask::OpenBox => EnvKind::OpenBox,
            IseTask::TurnFaucet => EnvKind::TurnFaucet,
        }
    }
}

impl From<IseMode> for Mode {
    fn from(m: IseMode) -> Self {
        match m {
            IseMode::Lift => Mode::Lift,
            IseMode::Slide => Mode::Slide,
            IseMode::Cw => Mode::Cw,
            IseMode::Ccw => Mode::Ccw,
        }
    }
}

impl From<Mode> for IseMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Lift => IseMode::Lift,
            Mode::Slide => IseMode::Slide,
            Mode::Cw => IseMode::Cw,
            Mode::Ccw => IseMode::Ccw,
        }
    }
}

impl From<IseAction> for EnvAction {
    fn from(a: IseAction) -> Self {
        match a.action_type {
            IseActionType::ContactOffset => EnvAction::ContactOffset(a.value),
            IseActionType::PushHeight => EnvAction::PushHeight(a.value),
            IseActionType::Mode => EnvAction::Mode(a.mode.into()),
        }
    }
}

impl From<EnvAction> for IseAction {
    fn from(a: EnvAction) -> Self {
        match a {
            EnvAction::ContactOffset(v) => IseAction { action_type: IseActionType::ContactOffset, value: v, mode: IseMode::Lift },
            EnvAction::PushHeight(v) => IseAction { action_type: IseActionType::PushHeight, value: v, mode: IseMode::Lift },
            EnvAction::Mode(m) => IseAction { action_type: IseActionType::Mode, value: 0.0, mode: m.into() },
        }
    }
}

// ---------------------------------------------------------------- errors

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ise_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn ise_clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Static, NUL-terminated name of a status code.
#[no_mangle]
pub extern "C" fn ise_status_name(status: IseStatus) -> *const c_char {
    let s: &'static CStr = match status {
        IseStatus::Ok => c"ok",
        IseStatus::NullPointer => c"null pointer",
        IseStatus::InvalidArgument => c"invalid argument",
        IseStatus::Shape => c"shape mismatch",
        IseStatus::Io => c"i/o error",
        IseStatus::Format => c"format error",
        IseStatus::Dataset => c"dataset error",
        IseStatus::Decode => c"action decode failed",
        IseStatus::MissingAssets => c"missing assets",
        IseStatus::Utf8 => c"invalid utf-8",
        IseStatus::BufferTooSmall => c"buffer too small",
        IseStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

// ---------------------------------------------------------------- videos

/// Builds a video from `frames * height * width` row-major floats in [0, 1].
#[no_mangle]
pub unsafe extern "C" fn ise_video_new(
    frames: usize,
    height: usize,
    width: usize,
    data: *const f32,
    out_video: *mut *mut IseVideo,
) -> IseStatus {
    guard(|| {
        let slot = out(out_video, "out_video")?;
        if data.is_null() {
            return Err(null("data"));
        }
        let n = frames
            .checked_mul(height)
            .and_then(|x| x.checked_mul(width))
            .ok_or_else(|| Fail(IseStatus::InvalidArgument, "video dimensions overflow".into()))?;
        let pixels = std::slice::from_raw_parts(data, n);
        let v = Video::from_flat(frames, height, width, pixels)?;
        *slot = boxed(IseVideo { inner: v });
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ise_video_free(video: *mut IseVideo) {
    if !video.is_null() {
        drop(Box::from_raw(video));
    }
}

/// Reads an ISEV file.
#[no_mangle]
pub unsafe extern "C" fn ise_video_read(path: *const c_char, out_video: *mut *mut IseVideo) -> IseStatus {
    guard(|| {
        let slot = out(out_video, "out_video")?;
        let v = load_video(&path_arg(path)?)?;
        *slot = boxed(IseVideo { inner: v });
        Ok(())
    })
}

/// Writes an ISEV file.
#[no_mangle]
pub unsafe extern "C" fn ise_video_write(video: *const IseVideo, path: *const c_char) -> IseStatus {
    guard(|| {
        let v = as_ref(video, "video")?;
        save_video(&v.inner, &path_arg(path)?)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ise_video_dims(
    video: *const IseVideo,
    frames: *mut usize,
    height: *mut usize,
    width: *mut usize,
) -> IseStatus {
    guard(|| {
        let v = &as_ref(video, "video")?.inner;
        *out(frames, "frames")? = v.len();
        *out(height, "height")? = v.height();
        *out(width, "width")? = v.width();
        Ok(())
    })
}

/// Copies the pixels into `buffer`, which must hold `frames * height * width`
/// floats. `BUFFER_TOO_SMALL` is returned otherwise.
#[no_mangle]
pub unsafe extern "C" fn ise_video_copy_data(video: *const IseVideo, buffer: *mut f32, len: usize) -> IseStatus {
    guard(|| {
        let v = &as_ref(video, "video")?.inner;
        if buffer.is_null() {
            return Err(null("buffer"));
        }
        let flat = v.to_flat();
        if len < flat.len() {
            return Err(Fail(IseStatus::BufferTooSmall, format!("need {} floats, got {len}", flat.len())));
        }
        ptr::copy_nonoverlapping(flat.as_ptr(), buffer, flat.len());
        Ok(())
    })
}

type Metric = fn(&Video, &Video) -> ise_core::Result<f64>;

unsafe fn metric(a: *const IseVideo, b: *const IseVideo, result: *mut f64, f: Metric) -> IseStatus {
    guard(|| {
        let (a, b) = (as_ref(a, "a")?, as_ref(b, "b")?);
        let slot = out(result, "result")?;
        *slot = f(&a.inner, &b.inner)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ise_video_mse(a: *const IseVideo, b: *const IseVideo, result: *mut f64) -> IseStatus {
    metric(a, b, result, metrics::video_mse)
}

#[no_mangle]
pub unsafe extern "C" fn ise_pixel_l2(a: *const IseVideo, b: *const IseVideo, result: *mut f64) -> IseStatus {
    metric(a, b, result, metrics::pixel_l2)
}

/// PSNR in dB, capped at 100 for identical videos.
#[no_mangle]
pub unsafe extern "C" fn ise_psnr(a: *const IseVideo, b: *const IseVideo, result: *mut f64) -> IseStatus {
    metric(a, b, result, metrics::psnr)
}

#[no_mangle]
pub unsafe extern "C" fn ise_ssim(a: *const IseVideo, b: *const IseVideo, result: *mut f64) -> IseStatus {
    metric(a, b, result, metrics::ssim)
}

// ---------------------------------------------------------- environments

/// Number of hidden-parameter values of a task.
#[no_mangle]
pub unsafe extern "C" fn ise_task_theta_count(task: IseTask, count: *mut usize) -> IseStatus {
    guard(|| {
        *out(count, "count")? = EnvKind::from(task).theta_table().len();
        Ok(())
    })
}

/// Creates the environment for the `theta_index`-th hidden parameter.
#[no_mangle]
pub unsafe extern "C" fn ise_env_new(task: IseTask, theta_index: usize, out_env: *mut *mut IseEnv) -> IseStatus {
    guard(|| {
        let slot = out(out_env, "out_env")?;
        let kind = EnvKind::from(task);
        let table = kind.theta_table();
        let theta = *table.get(theta_index).ok_or_else(|| {
            Fail(IseStatus::InvalidArgument, format!("theta index {theta_index} out of range for {kind} ({})", table.len()))
        })?;
        *slot = boxed(IseEnv { inner: EnvInstance::new(kind, theta)? });
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ise_env_free(env: *mut IseEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Initial observation as a one-frame video.
#[no_mangle]
pub unsafe extern "C" fn ise_env_reset(env: *const IseEnv, out_frame: *mut *mut IseVideo) -> IseStatus {
    guard(|| {
        let e = as_ref(env, "env")?;
        let slot = out(out_frame, "out_frame")?;
        *slot = boxed(IseVideo { inner: Video::new(vec![e.inner.reset()])? });
        Ok(())
    })
}

/// Executes `action`, returning the rendered rollout and whether it succeeded.
#[no_mangle]
pub unsafe extern "C" fn ise_env_execute(
    env: *const IseEnv,
    action: IseAction,
    out_video: *mut *mut IseVideo,
    success: *mut bool,
) -> IseStatus {
    guard(|| {
        let e = as_ref(env, "env")?;
        let video_slot = out(out_video, "out_video")?;
        let success_slot = out(success, "success")?;
        let outcome = e.inner.execute(&action.into())?;
        *success_slot = outcome.success;
        *video_slot = boxed(IseVideo { inner: outcome.video });
        Ok(())
    })
}

/// Rollout of the privileged scripted policy.
#[no_mangle]
pub unsafe extern "C" fn ise_env_scripted_plan(env: *const IseEnv, out_video: *mut *mut IseVideo) -> IseStatus {
    guard(|| {
        let e = as_ref(env, "env")?;
        let slot = out(out_video, "out_video")?;
        *slot = boxed(IseVideo { inner: e.inner.ground_truth_plan() });
        Ok(())
    })
}

/// Converts a video plan into an action by tracking the gripper.
#[no_mangle]
pub unsafe extern "C" fn ise_plan_to_action(task: IseTask, plan: *const IseVideo, out_action: *mut IseAction) -> IseStatus {
    guard(|| {
        let p = as_ref(plan, "plan")?;
        let slot = out(out_action, "out_action")?;
        *slot = plan_to_action(task.into(), &p.inner)?.into();
        Ok(())
    })
}

// ----------------------------------------------------------- experiments

/// Runs an experiment described by a JSON document (same schema as the
/// `ise run` experiment file).
#[no_mangle]
pub unsafe extern "C" fn ise_run_experiment_json(json: *const c_char, out_results: *mut *mut IseResults) -> IseStatus {
    guard(|| {
        let slot = out(out_results, "out_results")?;
        let text = str_arg(json, "json")?;
        let exp: ExperimentFile = serde_json::from_str(text).map_err(IseError::from)?;
        exp.validate()?;
        *slot = boxed(IseResults { inner: run_experiment(&exp, false)? });
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ise_results_free(results: *mut IseResults) {
    if !results.is_null() {
        drop(Box::from_raw(results));
    }
}

/// Number of episodes in the results.
#[no_mangle]
pub unsafe extern "C" fn ise_results_episode_count(results: *const IseResults, count: *mut usize) -> IseStatus {
    guard(|| {
        *out(count, "count")? = as_ref(results, "results")?.inner.rows.len();
        Ok(())
    })
}

/// Mean replans and its standard error for one (method, task) cell.
/// `method` is a method name such as `"ours"` or `"avdc"`.
#[no_mangle]
pub unsafe extern "C" fn ise_results_mean_replans(
    results: *const IseResults,
    method: *const c_char,
    task: IseTask,
    mean: *mut f64,
    sem: *mut f64,
) -> IseStatus {
    guard(|| {
        let r = as_ref(results, "results")?;
        let m: Method = str_arg(method, "method")?.parse()?;
        let kind = EnvKind::from(task);
        let cell = r
            .inner
            .table
            .cell(m, kind)
            .ok_or_else(|| Fail(IseStatus::InvalidArgument, format!("no results for {m} on {kind}")))?;
        *out(mean, "mean")? = cell.mean;
        *out(sem, "sem")? = cell.sem;
        Ok(())
    })
}

/// Task-averaged ratio of `method`'s mean replans to `ours`.
#[no_mangle]
pub unsafe extern "C" fn ise_results_normalized(
    results: *const IseResults,
    method: *const c_char,
    value: *mut f64,
) -> IseStatus {
    guard(|| {
        let r = as_ref(results, "results")?;
        let m: Method = str_arg(method, "method")?.parse()?;
        let v = r
            .inner
            .table
            .normalized(m)
            .ok_or_else(|| Fail(IseStatus::InvalidArgument, format!("cannot normalize {m} against ours")))?;
        *out(value, "value")? = v;
        Ok(())
    })
}

/// Writes the per-episode CSV.
#[no_mangle]
pub unsafe extern "C" fn ise_results_write_csv(results: *const IseResults, path: *const c_char) -> IseStatus {
    guard(|| {
        let r = as_ref(results, "results")?;
        write_episodes_csv(&r.inner.rows, &path_arg(path)?)?;
        Ok(())
    })
}
