#ifndef MODIFY_H
#define MODIFY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ModifyStatus {
  MODIFY_STATUS_OK = 0,
  MODIFY_STATUS_NULL_POINTER = 1,
  MODIFY_STATUS_INVALID_ARGUMENT = 2,
  MODIFY_STATUS_CONFIG = 3,
  MODIFY_STATUS_DIVERGENCE = 4,
  MODIFY_STATUS_DATA = 5,
  MODIFY_STATUS_PANIC = 6,
} ModifyStatus;

typedef struct ModifyCapabilityTracker ModifyCapabilityTracker;

typedef struct ModifyConfig ModifyConfig;

typedef struct ModifyLossBank ModifyLossBank;

typedef struct ModifyRunResult ModifyRunResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *modify_version(void);

/**
 * Static name of a status code, e.g. `"config"`.
 */
const char *modify_status_name(enum ModifyStatus status);

/**
 * Byte length of this thread's last error message, 0 if the last call succeeded.
 */
size_t modify_last_error_length(void);

/**
 * Copy the last error message into `buf` (always NUL-terminated when
 * `cap > 0`, truncated if needed). Returns the full message length.
 *
 * # Safety
 * `buf` must be null or point to `cap` writable bytes.
 */
size_t modify_last_error_message(char *buf, size_t cap);

/**
 * # Safety
 * `out_bank` must be a valid pointer to a handle slot.
 */
enum ModifyStatus modify_loss_bank_new(size_t n,
                                       double alpha,
                                       double lambda,
                                       struct ModifyLossBank **out_bank);

/**
 * # Safety
 * `bank` must be null or a handle from [`modify_loss_bank_new`] not yet freed.
 */
void modify_loss_bank_free(struct ModifyLossBank *bank);

/**
 * # Safety
 * Pointers must be valid; `bank` must be a live handle.
 */
enum ModifyStatus modify_loss_bank_len(const struct ModifyLossBank *bank, size_t *out_len);

/**
 * Momentum write `V[id] = lambda * V[id] + (1 - lambda) * loss`.
 *
 * # Safety
 * `bank` must be a live handle.
 */
enum ModifyStatus modify_loss_bank_update(struct ModifyLossBank *bank, size_t id, double loss);

/**
 * Fraction of bank entries strictly below `loss`.
 *
 * # Safety
 * Pointers must be valid; `bank` must be a live handle.
 */
enum ModifyStatus modify_loss_bank_difficulty(const struct ModifyLossBank *bank,
                                              double loss,
                                              double *out_d);

/**
 * # Safety
 * Pointers must be valid; `bank` must be a live handle.
 */
enum ModifyStatus modify_loss_bank_value(const struct ModifyLossBank *bank,
                                         size_t id,
                                         double *out_value);

/**
 * # Safety
 * `out_tracker` must be a valid pointer to a handle slot.
 */
enum ModifyStatus modify_capability_tracker_new(struct ModifyCapabilityTracker **out_tracker);

/**
 * # Safety
 * `tracker` must be null or a live handle.
 */
void modify_capability_tracker_free(struct ModifyCapabilityTracker *tracker);

/**
 * Record `loss` and return the min-max normalized capability.
 *
 * # Safety
 * Pointers must be valid; `tracker` must be a live handle.
 */
enum ModifyStatus modify_capability_tracker_observe(struct ModifyCapabilityTracker *tracker,
                                                    double loss,
                                                    double *out_capability);

/**
 * Augmentation probability `1 - d`.
 *
 * # Safety
 * `out_degree` must be valid.
 */
enum ModifyStatus modify_da_degree(double d, double *out_degree);

/**
 * Gate weight, 1.0 iff `t_easy < d < t_hard`, else 0.0.
 *
 * # Safety
 * `out_weight` must be valid.
 */
enum ModifyStatus modify_no_gate(double d, double t_easy, double t_hard, double *out_weight);

/**
 * Permute the channels of an interleaved RGB buffer in place: output
 * channel `c` takes input channel `perm[c]`.
 *
 * # Safety
 * `data` must point to `3 * n_pixels` doubles and `perm` to 3 bytes.
 */
enum ModifyStatus modify_rgb_shuffle(double *data, size_t n_pixels, const uint8_t *perm);

/**
 * Parse `key = value` config text; it must set `mode`.
 *
 * # Safety
 * `text` must be NUL-terminated; `out_config` must be valid.
 */
enum ModifyStatus modify_config_parse(const char *text, struct ModifyConfig **out_config);

/**
 * Override one key (same names as the config file). The handle is left
 * unchanged when the result would be invalid.
 *
 * # Safety
 * `config` must be a live handle; `key` and `value` NUL-terminated.
 */
enum ModifyStatus modify_config_set(struct ModifyConfig *config,
                                    const char *key,
                                    const char *value);

/**
 * # Safety
 * `config` must be null or a live handle.
 */
void modify_config_free(struct ModifyConfig *config);

/**
 * Rendered `key = value` text of the effective config; free with
 * [`modify_string_free`].
 *
 * # Safety
 * Pointers must be valid.
 */
enum ModifyStatus modify_config_to_text(const struct ModifyConfig *config, char **out_text);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void modify_string_free(char *s);

/**
 * Generate the dataset, train and evaluate. Single-threaded and blocking.
 *
 * # Safety
 * `config` must be a live handle; `out_result` must be valid.
 */
enum ModifyStatus modify_train(const struct ModifyConfig *config,
                               struct ModifyRunResult **out_result);

/**
 * # Safety
 * `result` must be null or a live handle.
 */
void modify_run_result_free(struct ModifyRunResult *result);

/**
 * Number of evaluation domains (source first, then targets).
 *
 * # Safety
 * Pointers must be valid.
 */
enum ModifyStatus modify_run_result_domain_count(const struct ModifyRunResult *result,
                                                 size_t *out_count);

/**
 * Accuracy on domain `index`; `out_is_source` may be null.
 *
 * # Safety
 * `result` and `out_accuracy` must be valid.
 */
enum ModifyStatus modify_run_result_accuracy(const struct ModifyRunResult *result,
                                             size_t index,
                                             double *out_accuracy,
                                             bool *out_is_source);

/**
 * # Safety
 * Pointers must be valid.
 */
enum ModifyStatus modify_run_result_mean_target_accuracy(const struct ModifyRunResult *result,
                                                         double *out_accuracy);

/**
 * Number of optimizer iterations the run took (including skipped steps).
 *
 * # Safety
 * Pointers must be valid.
 */
enum ModifyStatus modify_run_result_iterations(const struct ModifyRunResult *result,
                                               size_t *out_iterations);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MODIFY_H */
