#ifndef DECORR_H
#define DECORR_H

#pragma once

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every entry point.
 */
typedef enum DecorrStatus {
  DECORR_STATUS_OK = 0,
  DECORR_STATUS_NULL_POINTER = 1,
  DECORR_STATUS_INVALID_ARGUMENT = 2,
  DECORR_STATUS_CONFIG = 3,
  DECORR_STATUS_INPUT = 4,
  DECORR_STATUS_STAGE = 5,
  DECORR_STATUS_COMPUTE = 6,
  DECORR_STATUS_PANIC = 7,
} DecorrStatus;

/**
 * A mixed dataset with its unit blocks.
 */
typedef struct DecorrDataset DecorrDataset;

/**
 * An estimated CPDAG with its node names.
 */
typedef struct DecorrGraph DecorrGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on this thread.
 */
const char *decorr_last_error(void);

/**
 * Load a dataset from a data CSV and spec sidecar. `blocks_path` may be
 * null, in which case every unit is its own block.
 *
 * # Safety
 * Path arguments must be null or NUL-terminated strings; `out` must be a
 * valid pointer.
 */
enum DecorrStatus decorr_dataset_load(const char *data_path,
                                      const char *specs_path,
                                      const char *blocks_path,
                                      struct DecorrDataset **out);

/**
 * Simulate `n` units of a `p`-node mixed model with 2p edges and blocks of
 * 10 to 15 units.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum DecorrStatus decorr_dataset_simulate(size_t n,
                                          size_t p,
                                          uint64_t seed,
                                          struct DecorrDataset **out);

/**
 * Number of units, or 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a handle from this library.
 */
size_t decorr_dataset_n(const struct DecorrDataset *ds);

/**
 * Number of variables, or 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a handle from this library.
 */
size_t decorr_dataset_p(const struct DecorrDataset *ds);

/**
 * # Safety
 * `ds` must be null or a handle from this library not yet freed.
 */
void decorr_dataset_free(struct DecorrDataset *ds);

/**
 * Run the estimation pipeline. `strategy` is one of `baseline`, `average`,
 * `consensus`, `consensus-ident`; `learner` one of `pc`, `hc`, `hybrid`.
 * `threads` sizes the worker pool (0 means 1).
 *
 * # Safety
 * `ds` must be a live dataset handle, the strings NUL-terminated, `out` valid.
 */
enum DecorrStatus decorr_pipeline_run(const struct DecorrDataset *ds,
                                      const char *strategy,
                                      const char *learner,
                                      uint64_t seed,
                                      size_t threads,
                                      struct DecorrGraph **out);

/**
 * Number of edges, or 0 for a null handle.
 *
 * # Safety
 * `g` must be null or a live graph handle.
 */
size_t decorr_graph_edge_count(const struct DecorrGraph *g);

/**
 * Edge `index`: node indices and whether it is directed (`from -> to`).
 *
 * # Safety
 * `g` must be a live graph handle; output pointers must be valid.
 */
enum DecorrStatus decorr_graph_edge(const struct DecorrGraph *g,
                                    size_t index,
                                    size_t *from,
                                    size_t *to,
                                    bool *directed);

/**
 * Write the edge list TSV (`from to type confidence`).
 *
 * # Safety
 * `g` must be a live graph handle and `path` a NUL-terminated string.
 */
enum DecorrStatus decorr_graph_write(const struct DecorrGraph *g, const char *path);

/**
 * # Safety
 * `g` must be null or a graph handle not yet freed.
 */
void decorr_graph_free(struct DecorrGraph *g);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DECORR_H */
