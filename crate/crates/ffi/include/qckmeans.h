#ifndef QCKMEANS_H
#define QCKMEANS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Selection formulation.
typedef enum QckFormulation {
  QCK_FORMULATION_GROUPED = 0,
  QCK_FORMULATION_COUPLED = 1,
} QckFormulation;

// Solver used for each selection step.
typedef enum QckSolver {
  QCK_SOLVER_QAOA = 0,
  QCK_SOLVER_EXHAUSTIVE = 1,
} QckSolver;

// Result code of every fallible call.
typedef enum QckStatus {
  QCK_STATUS_OK = 0,
  QCK_STATUS_NULL_POINTER = 1,
  QCK_STATUS_INVALID_UTF8 = 2,
  QCK_STATUS_INVALID_DATA = 3,
  QCK_STATUS_INVALID_PARAMETER = 4,
  QCK_STATUS_DIMENSION_MISMATCH = 5,
  QCK_STATUS_CAPACITY = 6,
  QCK_STATUS_EMPTY_CLUSTER = 7,
  QCK_STATUS_PARSE = 8,
  QCK_STATUS_IO = 9,
  QCK_STATUS_JSON = 10,
  QCK_STATUS_BUFFER_TOO_SMALL = 11,
  QCK_STATUS_PANIC = 12,
} QckStatus;

// Opaque pipeline configuration handle.
typedef struct QckConfig QckConfig;

// Opaque dataset handle.
typedef struct QckDataset QckDataset;

// Opaque clustering result handle.
typedef struct QckResult QckResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failing call on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *qck_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *qck_version(void);

// Peak register width for `candidates` per group and subsample size `subsample`.
size_t qck_q_peak(size_t candidates, size_t subsample);

// Copies a row-major `rows x cols` buffer into a new dataset.
//
// # Safety
// `values` must point to `rows * cols` readable doubles.
enum QckStatus qck_dataset_from_buffer(const double *values,
                                       size_t rows,
                                       size_t cols,
                                       struct QckDataset **out);

// Loads a numeric CSV file. `delimiter` is a single ASCII byte.
//
// # Safety
// `path` must be a valid NUL-terminated string.
enum QckStatus qck_dataset_from_csv(const char *path,
                                    bool has_header,
                                    char delimiter,
                                    struct QckDataset **out);

// Generates a synthetic preset (circles, moons, spiral, blobs, vd_blobs).
//
// # Safety
// `name` must be a valid NUL-terminated string.
enum QckStatus qck_dataset_synthetic(const char *name,
                                     size_t n,
                                     uint64_t seed,
                                     struct QckDataset **out);

// # Safety
// `dataset` must be null or a live dataset handle.
size_t qck_dataset_rows(const struct QckDataset *dataset);

// # Safety
// `dataset` must be null or a live dataset handle.
size_t qck_dataset_cols(const struct QckDataset *dataset);

// Copies the row-major values into `dst`, which holds `len` doubles.
//
// # Safety
// `dataset` must be a live handle and `dst` must point to `len` writable doubles.
enum QckStatus qck_dataset_values(const struct QckDataset *dataset, double *dst, size_t len);

// # Safety
// `dataset` must be null or a handle not yet freed.
void qck_dataset_free(struct QckDataset *dataset);

// Default configuration for `k` clusters.
//
// # Safety
// `out` must be a valid pointer to a handle slot.
enum QckStatus qck_config_new(size_t k, struct QckConfig **out);

// Parses a JSON configuration; missing fields take their defaults.
//
// # Safety
// `json` must be a valid NUL-terminated string.
enum QckStatus qck_config_from_json(const char *json, struct QckConfig **out);

// Serializes the configuration as JSON. Free the string with [`qck_string_free`].
//
// # Safety
// `config` must be a live handle and `out` a valid pointer.
enum QckStatus qck_config_to_json(const struct QckConfig *config, char **out);

// Sets the number of frequencies; 0 restores the default.
//
// # Safety
// `config` must be a live handle.
enum QckStatus qck_config_set_frequencies(struct QckConfig *config, size_t m);

// # Safety
// `config` must be a live handle.
enum QckStatus qck_config_set_candidates(struct QckConfig *config, size_t candidates);

// # Safety
// `config` must be a live handle.
enum QckStatus qck_config_set_depth(struct QckConfig *config, size_t p);

// # Safety
// `config` must be a live handle.
enum QckStatus qck_config_set_subsample(struct QckConfig *config, size_t b);

// # Safety
// `config` must be a live handle.
enum QckStatus qck_config_set_shots(struct QckConfig *config,
                                    uint64_t qaoa_shots,
                                    uint64_t qff_shots);

// # Safety
// `config` must be a live handle.
enum QckStatus qck_config_set_solver(struct QckConfig *config, enum QckSolver solver);

// # Safety
// `config` must be a live handle.
enum QckStatus qck_config_set_formulation(struct QckConfig *config,
                                          enum QckFormulation formulation);

// Enables depolarizing and readout noise; all zeros disables it.
//
// # Safety
// `config` must be a live handle.
enum QckStatus qck_config_set_noise(struct QckConfig *config, double p1, double p2, double p_ro);

// # Safety
// `config` must be a live handle.
enum QckStatus qck_config_set_analytic(struct QckConfig *config, bool analytic);

// # Safety
// `config` must be null or a handle not yet freed.
void qck_config_free(struct QckConfig *config);

// Clusters `dataset` with `config` (null for defaults with k = 3).
//
// # Safety
// `dataset` must be a live handle, `config` null or a live handle, `out` valid.
enum QckStatus qck_run(const struct QckDataset *dataset,
                       const struct QckConfig *config,
                       uint64_t seed,
                       struct QckResult **out);

// # Safety
// `result` must be null or a live handle.
double qck_result_sse(const struct QckResult *result);

// # Safety
// `result` must be null or a live handle.
size_t qck_result_k(const struct QckResult *result);

// # Safety
// `result` must be null or a live handle.
size_t qck_result_dim(const struct QckResult *result);

// Number of points in the assignment.
//
// # Safety
// `result` must be null or a live handle.
size_t qck_result_len(const struct QckResult *result);

// # Safety
// `result` must be null or a live handle.
size_t qck_result_q_peak(const struct QckResult *result);

// # Safety
// `result` must be null or a live handle.
size_t qck_result_iterations(const struct QckResult *result);

// # Safety
// `result` must be null or a live handle.
uint64_t qck_result_total_shots(const struct QckResult *result);

// Copies the `k x dim` row-major centroids into `dst`.
//
// # Safety
// `result` must be a live handle and `dst` must point to `len` writable doubles.
enum QckStatus qck_result_centroids(const struct QckResult *result, double *dst, size_t len);

// Copies the cluster index of each point into `dst`.
//
// # Safety
// `result` must be a live handle and `dst` must point to `len` writable values.
enum QckStatus qck_result_assignment(const struct QckResult *result, size_t *dst, size_t len);

// Serializes the full result, trace included. Free with [`qck_string_free`].
//
// # Safety
// `result` must be a live handle and `out` a valid pointer.
enum QckStatus qck_result_to_json(const struct QckResult *result, char **out);

// # Safety
// `result` must be null or a handle not yet freed.
void qck_result_free(struct QckResult *result);

// Releases a string returned by this library.
//
// # Safety
// `s` must be null or a string from this library not yet freed.
void qck_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QCKMEANS_H */
