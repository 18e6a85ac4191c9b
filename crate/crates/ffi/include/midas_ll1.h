#ifndef MIDAS_LL1_H
#define MIDAS_LL1_H

#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum MidasStatus {
  MIDAS_STATUS_OK = 0,
  MIDAS_STATUS_NULL_POINTER = 1,
  MIDAS_STATUS_INVALID_ARGUMENT = 2,
  MIDAS_STATUS_SHAPE_MISMATCH = 3,
  MIDAS_STATUS_INVALID_CONFIG = 4,
  MIDAS_STATUS_DIVERGED = 5,
  MIDAS_STATUS_IO = 6,
  MIDAS_STATUS_FORMAT = 7,
  MIDAS_STATUS_PANIC = 8,
} MidasStatus;

typedef enum MidasEstimator {
  MIDAS_ESTIMATOR_SGD = 0,
  MIDAS_ESTIMATOR_SAGA = 1,
  MIDAS_ESTIMATOR_SARAH = 2,
} MidasEstimator;

typedef struct MidasConfig MidasConfig;

typedef struct MidasFactors MidasFactors;

typedef struct MidasTensor MidasTensor;

typedef struct MidasTrace MidasTrace;

// One trace row. `lyapunov_surrogate` is NaN when it was not recorded.
typedef struct MidasTraceRecord {
  uint64_t epoch;
  uint64_t iter;
  double phi;
  double f;
  double elapsed_s;
  double step_norm;
  double lyapunov_surrogate;
} MidasTraceRecord;

typedef struct MidasMetrics {
  double psnr;
  double rmse;
  double sam;
  double cc;
  uint64_t sam_skipped;
  uint64_t cc_skipped;
} MidasMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. The pointer
// stays valid until the next `midas_*` call on the same thread.
const char *midas_last_error(void);

// Copies `i1 * i2 * i3` column-major values into a new tensor.
//
// # Safety
// `data` must point to `i1 * i2 * i3` readable doubles; `out` must be a
// valid pointer to a handle slot.
enum MidasStatus midas_tensor_new(size_t i1,
                                  size_t i2,
                                  size_t i3,
                                  const double *data,
                                  struct MidasTensor **out);

// # Safety
// `path` must be a NUL-terminated string; `out` a valid handle slot.
enum MidasStatus midas_tensor_read(const char *path, struct MidasTensor **out);

// # Safety
// `t` must be a live tensor handle; `path` a NUL-terminated string.
enum MidasStatus midas_tensor_write(const struct MidasTensor *t, const char *path);

// Writes the three dimensions to `dims`.
//
// # Safety
// `t` must be a live tensor handle; `dims` must point to 3 writable sizes.
enum MidasStatus midas_tensor_dims(const struct MidasTensor *t, size_t *dims);

// Borrowed pointer to the column-major values, valid while `t` lives.
//
// # Safety
// `t` must be a live tensor handle or NULL.
const double *midas_tensor_data(const struct MidasTensor *t);

// # Safety
// `t` must be NULL or a handle from this library that was not freed yet.
void midas_tensor_free(struct MidasTensor *t);

// Default configuration for the given block ranks.
//
// # Safety
// `ranks` must point to `terms` readable sizes; `out` a valid handle slot.
enum MidasStatus midas_config_new(const size_t *ranks, size_t terms, struct MidasConfig **out);

// Parses `key = value` configuration text.
//
// # Safety
// `text` must be a NUL-terminated string; `out` a valid handle slot.
enum MidasStatus midas_config_parse(const char *text, struct MidasConfig **out);

// # Safety
// `path` must be a NUL-terminated string; `out` a valid handle slot.
enum MidasStatus midas_config_read(const char *path, struct MidasConfig **out);

// # Safety
// `c` must be a live config handle.
enum MidasStatus midas_config_set_seed(struct MidasConfig *c, uint64_t seed);

// # Safety
// `c` must be a live config handle.
enum MidasStatus midas_config_set_epochs(struct MidasConfig *c, size_t epochs);

// Sets the inertial depth `t`.
//
// # Safety
// `c` must be a live config handle.
enum MidasStatus midas_config_set_depth(struct MidasConfig *c, size_t depth);

// Constant step `eta > 0`, or `eta == 0` for the per-block `1/L` rule.
//
// # Safety
// `c` must be a live config handle.
enum MidasStatus midas_config_set_step(struct MidasConfig *c, double eta);

// Fiber batch size; 0 restores the `2 * max L_r` default.
//
// # Safety
// `c` must be a live config handle.
enum MidasStatus midas_config_set_batch_size(struct MidasConfig *c, size_t batch);

// # Safety
// `c` must be a live config handle.
enum MidasStatus midas_config_set_estimator(struct MidasConfig *c, enum MidasEstimator kind);

// # Safety
// `c` must be NULL or a handle from this library that was not freed yet.
void midas_config_free(struct MidasConfig *c);

// Runs the inertial stochastic solver. `out_trace` may be NULL.
//
// # Safety
// `t` and `c` must be live handles; `out_factors` a valid handle slot;
// `out_trace` NULL or a valid handle slot.
enum MidasStatus midas_decompose(const struct MidasTensor *t,
                                 const struct MidasConfig *c,
                                 struct MidasFactors **out_factors,
                                 struct MidasTrace **out_trace);

// Shape of factor `mode` (1, 2 or 3).
//
// # Safety
// `f` must be a live factors handle; `rows` and `cols` writable.
enum MidasStatus midas_factors_shape(const struct MidasFactors *f,
                                     uint32_t mode,
                                     size_t *rows,
                                     size_t *cols);

// Copies factor `mode` column-major into `buf`, which holds `capacity`
// doubles.
//
// # Safety
// `f` must be a live factors handle; `buf` must hold `capacity` doubles.
enum MidasStatus midas_factors_copy(const struct MidasFactors *f,
                                    uint32_t mode,
                                    double *buf,
                                    size_t capacity);

// # Safety
// `f` must be a live factors handle; `out` a valid handle slot.
enum MidasStatus midas_factors_reconstruct(const struct MidasFactors *f, struct MidasTensor **out);

// # Safety
// `f` must be NULL or a handle from this library that was not freed yet.
void midas_factors_free(struct MidasFactors *f);

// Number of rows; 0 for NULL.
//
// # Safety
// `tr` must be NULL or a live trace handle.
size_t midas_trace_len(const struct MidasTrace *tr);

// # Safety
// `tr` must be a live trace handle; `out` writable.
enum MidasStatus midas_trace_get(const struct MidasTrace *tr,
                                 size_t index,
                                 struct MidasTraceRecord *out);

// # Safety
// `tr` must be NULL or a handle from this library that was not freed yet.
void midas_trace_free(struct MidasTrace *tr);

// Quality of `xhat` against the reference `x`.
//
// # Safety
// `x` and `xhat` must be live tensor handles; `out` writable.
enum MidasStatus midas_metrics(const struct MidasTensor *x,
                               const struct MidasTensor *xhat,
                               struct MidasMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MIDAS_LL1_H */
