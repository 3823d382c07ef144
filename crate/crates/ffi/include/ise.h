#ifndef ISE_H
#define ISE_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  ISE_STATUS_OK = 0,
  ISE_STATUS_NULL_POINTER = 1,
  ISE_STATUS_INVALID_ARGUMENT = 2,
  ISE_STATUS_SHAPE = 3,
  ISE_STATUS_IO = 4,
  ISE_STATUS_FORMAT = 5,
  ISE_STATUS_DATASET = 6,
  ISE_STATUS_DECODE = 7,
  ISE_STATUS_MISSING_ASSETS = 8,
  ISE_STATUS_UTF8 = 9,
  ISE_STATUS_BUFFER_TOO_SMALL = 10,
  ISE_STATUS_PANIC = 99,
} IseStatus;

typedef enum {
  ISE_TASK_PUSH_BAR = 0,
  ISE_TASK_PICK_BAR = 1,
  ISE_TASK_SLIDE_BRICK = 2,
  ISE_TASK_OPEN_BOX = 3,
  ISE_TASK_TURN_FAUCET = 4,
} IseTask;

typedef enum {
  ISE_ACTION_TYPE_CONTACT_OFFSET = 0,
  ISE_ACTION_TYPE_PUSH_HEIGHT = 1,
  ISE_ACTION_TYPE_MODE = 2,
} IseActionType;

typedef enum {
  ISE_MODE_LIFT = 0,
  ISE_MODE_SLIDE = 1,
  ISE_MODE_CW = 2,
  ISE_MODE_CCW = 3,
} IseMode;

/*
 Opaque environment handle.
 */
typedef struct IseEnv IseEnv;

/*
 Opaque experiment results handle.
 */
typedef struct IseResults IseResults;

/*
 Opaque video handle.
 */
typedef struct IseVideo IseVideo;

/*
 Action passed to or returned from an environment. `value` is read for
 `CONTACT_OFFSET` and `PUSH_HEIGHT`, `mode` for `MODE`.
 */
typedef struct {
  IseActionType action_type;
  double value;
  IseMode mode;
} IseAction;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. The pointer
 stays valid until the next failing call on the same thread.
 */
const char *ise_last_error_message(void);

void ise_clear_last_error(void);

/*
 Static, NUL-terminated name of a status code.
 */
const char *ise_status_name(IseStatus status);

/*
 Builds a video from `frames * height * width` row-major floats in [0, 1].
 */
IseStatus ise_video_new(size_t frames, size_t height, size_t width, const float *data, IseVideo **out_video);

void ise_video_free(IseVideo *video);

/*
 Reads an ISEV file.
 */
IseStatus ise_video_read(const char *path, IseVideo **out_video);

/*
 Writes an ISEV file.
 */
IseStatus ise_video_write(const IseVideo *video, const char *path);

IseStatus ise_video_dims(const IseVideo *video, size_t *frames, size_t *height, size_t *width);

/*
 Copies the pixels into `buffer`, which must hold `frames * height * width`
 floats. `BUFFER_TOO_SMALL` is returned otherwise.
 */
IseStatus ise_video_copy_data(const IseVideo *video, float *buffer, size_t len);

IseStatus ise_video_mse(const IseVideo *a, const IseVideo *b, double *result);

IseStatus ise_pixel_l2(const IseVideo *a, const IseVideo *b, double *result);

/*
 PSNR in dB, capped at 100 for identical videos.
 */
IseStatus ise_psnr(const IseVideo *a, const IseVideo *b, double *result);

IseStatus ise_ssim(const IseVideo *a, const IseVideo *b, double *result);

/*
 Number of hidden-parameter values of a task.
 */
IseStatus ise_task_theta_count(IseTask task, size_t *count);

/*
 Creates the environment for the `theta_index`-th hidden parameter.
 */
IseStatus ise_env_new(IseTask task, size_t theta_index, IseEnv **out_env);

void ise_env_free(IseEnv *env);

/*
 Initial observation as a one-frame video.
 */
IseStatus ise_env_reset(const IseEnv *env, IseVideo **out_frame);

/*
 Executes `action`, returning the rendered rollout and whether it succeeded.
 */
IseStatus ise_env_execute(const IseEnv *env, IseAction action, IseVideo **out_video, bool *success);

/*
 Rollout of the privileged scripted policy.
 */
IseStatus ise_env_scripted_plan(const IseEnv *env, IseVideo **out_video);

/*
 Converts a video plan into an action by tracking the gripper.
 */
IseStatus ise_plan_to_action(IseTask task, const IseVideo *plan, IseAction *out_action);

/*
 Runs an experiment described by a JSON document (same schema as the
 `ise run` experiment file).
 */
IseStatus ise_run_experiment_json(const char *json, IseResults **out_results);

void ise_results_free(IseResults *results);

/*
 Number of episodes in the results.
 */
IseStatus ise_results_episode_count(const IseResults *results, size_t *count);

/*
 Mean replans and its standard error for one (method, task) cell.
 `method` is a method name such as `"ours"` or `"avdc"`.
 */
IseStatus ise_results_mean_replans(const IseResults *results, const char *method, IseTask task, double *mean, double *sem);

/*
 Task-averaged ratio of `method`'s mean replans to `ours`.
 */
IseStatus ise_results_normalized(const IseResults *results, const char *method, double *value);

/*
 Writes the per-episode CSV.
 */
IseStatus ise_results_write_csv(const IseResults *results, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ISE_H */
