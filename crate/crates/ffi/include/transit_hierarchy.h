#ifndef TRANSIT_HIERARCHY_H
#define TRANSIT_HIERARCHY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  TH_STATUS_OK = 0,
  TH_STATUS_NULL_ARGUMENT = 1,
  TH_STATUS_INVALID_UTF8 = 2,
  TH_STATUS_IO = 3,
  TH_STATUS_INVALID_REGISTRY = 4,
  TH_STATUS_INVALID_CHAIN = 5,
  TH_STATUS_INVALID_ARGUMENT = 6,
  TH_STATUS_INTERNAL = 7,
  TH_STATUS_PANIC = 8,
} ThStatus;

typedef enum {
  TH_SIGN_FLIPPED = 0,
  TH_SIGN_LITERAL = 1,
} ThSign;

typedef enum {
  TH_UNDEFINED_EXCLUDE = 0,
  TH_UNDEFINED_ZERO = 1,
} ThUndefined;

typedef struct ThCounts ThCounts;

typedef struct ThRegistry ThRegistry;

typedef struct ThResult ThResult;

/**
 * One leg of a chain. Stops are not needed for hierarchy counting.
 */
typedef struct {
  uint32_t mode;
  int64_t board_time;
  int64_t alight_time;
  double distance;
} ThLeg;

/**
 * Per-mode scores, all in `[0, 1]`.
 */
typedef struct {
  double ascending;
  double descending;
  double overall;
  /**
   * 0 when the mode has no defined pair in either phase.
   */
  bool observed;
} ThScore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next call into this library from the same thread.
 */
const char *th_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *th_version(void);

/**
 * Builds a registry from a modes JSON array.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
ThStatus th_registry_from_json(const char *json, ThRegistry **out);

/**
 * The built-in six-mode Seoul registry.
 *
 * # Safety
 * `out` must be writable.
 */
ThStatus th_registry_seoul(ThRegistry **out);

/**
 * Number of modes, or 0 for a null handle.
 *
 * # Safety
 * `registry` must be null or a live handle.
 */
size_t th_registry_len(const ThRegistry *registry);

/**
 * # Safety
 * `registry` must be null or a handle not yet freed.
 */
void th_registry_free(ThRegistry *registry);

/**
 * Empty counts sized for `registry`.
 *
 * # Safety
 * `registry` must be a live handle; `out` must be writable.
 */
ThStatus th_counts_new(const ThRegistry *registry, ThCounts **out);

/**
 * Validates one chain and adds its transfers. An invalid chain leaves the
 * counts untouched and returns `TH_STATUS_INVALID_CHAIN`.
 *
 * # Safety
 * Handles must be live; `legs` must point to `n_legs` readable legs.
 */
ThStatus th_counts_add_chain(ThCounts *counts,
                             const ThRegistry *registry,
                             const ThLeg *legs,
                             size_t n_legs);

/**
 * Streams a chains CSV file into `counts`. Rejected chains are skipped and
 * counted; either out-pointer may be null.
 *
 * # Safety
 * Handles must be live; `path` NUL-terminated; out-pointers null or writable.
 */
ThStatus th_counts_add_csv(ThCounts *counts,
                           const ThRegistry *registry,
                           const char *path,
                           uint64_t *accepted,
                           uint64_t *rejected);

/**
 * Adds `src` into `dst`; both must have the same number of modes.
 *
 * # Safety
 * Both handles must be live.
 */
ThStatus th_counts_merge(ThCounts *dst, const ThCounts *src);

/**
 * Transfers counted for the ordered pair `from -> to` (mode ids) in one phase;
 * 0 for out-of-range ids or a null handle.
 *
 * # Safety
 * `counts` must be null or live.
 */
uint64_t th_counts_get(const ThCounts *counts, bool ascending, uint32_t from, uint32_t to);

/**
 * # Safety
 * `counts` must be null or live.
 */
uint64_t th_counts_chains(const ThCounts *counts);

/**
 * # Safety
 * `counts` must be null or a handle not yet freed.
 */
void th_counts_free(ThCounts *counts);

/**
 * Rates, distances, scores and ranking from `counts`. `counts` is not consumed.
 *
 * # Safety
 * Handles must be live; `out` writable.
 */
ThStatus th_analyze(const ThCounts *counts,
                    const ThRegistry *registry,
                    ThSign sign,
                    ThUndefined undefined,
                    ThResult **out);

/**
 * Scores of mode `mode_id`.
 *
 * # Safety
 * `result` must be live; `out` writable.
 */
ThStatus th_result_score(const ThResult *result, uint32_t mode_id, ThScore *out);

/**
 * Number of observed (ranked) modes.
 *
 * # Safety
 * `result` must be null or live.
 */
size_t th_result_ranked_len(const ThResult *result);

/**
 * Mode id at rank `k` (0 = highest in the hierarchy).
 *
 * # Safety
 * `result` must be live; `mode_id` writable.
 */
ThStatus th_result_ranked_at(const ThResult *result, size_t k, uint32_t *mode_id);

/**
 * The result as JSON (the `result` object of an analyze document). Free the
 * string with [`th_string_free`].
 *
 * # Safety
 * `result` must be live; `out` writable.
 */
ThStatus th_result_to_json(const ThResult *result, char **out);

/**
 * # Safety
 * `result` must be null or a handle not yet freed.
 */
void th_result_free(ThResult *result);

/**
 * Runs the whole `analyze` command on files and returns the document JSON.
 * Free the string with [`th_string_free`].
 *
 * # Safety
 * Paths must be NUL-terminated; `out` writable.
 */
ThStatus th_analyze_files(const char *chains_path,
                          const char *modes_path,
                          ThSign sign,
                          ThUndefined undefined,
                          char **out);

/**
 * Frees a string returned by this library.
 *
 * # Safety
 * `s` must be null or a string from this library not yet freed.
 */
void th_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRANSIT_HIERARCHY_H */
