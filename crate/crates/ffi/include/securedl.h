/* C interface to the securedl simulator. */

#pragma once

/* Generated with cbindgen:0.27.0 */

/* Generated by cbindgen from the securedl-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Plaintext aggregation rule for [`sdl_aggregate`].
typedef enum SdlAggregateRule {
  // Coordinatewise mean; `robustness` is ignored.
  SDL_AGGREGATE_RULE_MEAN = 0,
  // Krum selection tolerating `robustness` Byzantine updates.
  SDL_AGGREGATE_RULE_KRUM = 1,
  // Coordinatewise median; `robustness` is ignored.
  SDL_AGGREGATE_RULE_COORDINATE_MEDIAN = 2,
  // Coordinatewise mean after dropping the `robustness` lowest and
  // highest values per coordinate.
  SDL_AGGREGATE_RULE_TRIMMED_MEAN = 3,
} SdlAggregateRule;

// Status code of every fallible call.
typedef enum SdlStatus {
  SDL_STATUS_OK = 0,
  // A required pointer argument was null.
  SDL_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  SDL_STATUS_UTF8_ERROR = 2,
  // A parameter or configuration value is out of contract.
  SDL_STATUS_INVALID_ARGUMENT = 3,
  // A value does not fit the fixed-point encoding.
  SDL_STATUS_RANGE_ERROR = 4,
  // The secure protocol itself failed.
  SDL_STATUS_PROTOCOL_ERROR = 5,
  // Shared vectors disagree on party count or dimension.
  SDL_STATUS_SHARE_MISMATCH = 6,
  // The preprocessing material ran out.
  SDL_STATUS_TAPE_EXHAUSTED = 7,
  SDL_STATUS_IO_ERROR = 8,
  // Configuration or manifest JSON could not be parsed or produced.
  SDL_STATUS_JSON_ERROR = 9,
  // A panic was caught at the boundary; the handle state is still
  // valid but the call did nothing.
  SDL_STATUS_PANIC = 10,
} SdlStatus;

// Opaque simulation configuration.
typedef struct SdlConfig SdlConfig;

// Opaque result of one finished simulation.
typedef struct SdlRun SdlRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static string; do not free.
const char *sdl_version(void);

// Message of the most recent error on this thread, or null if none.
// Valid until the next failing call on the same thread; do not free.
const char *sdl_last_error_message(void);

// Releases a string returned by this library. Null is a no-op.
//
// # Safety
// `s` must have been returned by a function of this library and not
// already freed.
void sdl_string_free(char *s);

// Creates a configuration with the library defaults.
//
// # Safety
// `out` must point to writable memory for one pointer.
enum SdlStatus sdl_config_new(struct SdlConfig **out);

// Parses and validates a JSON configuration. Fields left out of the
// JSON take their defaults.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must point to writable
// memory for one pointer.
enum SdlStatus sdl_config_from_json(const char *json, struct SdlConfig **out);

// Serializes the configuration, including every defaulted field.
//
// # Safety
// `cfg` must be a live configuration handle; `out` must point to
// writable memory for one pointer.
enum SdlStatus sdl_config_to_json(const struct SdlConfig *cfg, char **out);

// Releases a configuration handle. Null is a no-op.
//
// # Safety
// `cfg` must have come from this library and not already be freed.
void sdl_config_free(struct SdlConfig *cfg);

// Runs one full simulation under `cfg`. Blocking; desk-scale runs take
// seconds to minutes depending on the rule and round count.
//
// # Safety
// `cfg` must be a live configuration handle; `out` must point to
// writable memory for one pointer.
enum SdlStatus sdl_run_new(const struct SdlConfig *cfg, struct SdlRun **out);

// Number of completed rounds.
//
// # Safety
// `run` must be a live run handle; `out` must point to writable memory
// for one `size_t`.
enum SdlStatus sdl_run_round_count(const struct SdlRun *run, size_t *out);

// Mean honest test accuracy after the final round.
//
// # Safety
// `run` must be a live run handle; `out` must point to writable memory
// for one `double`.
enum SdlStatus sdl_run_final_accuracy(const struct SdlRun *run, double *out);

// Per-round metrics as CSV, one header line plus one line per round.
//
// # Safety
// `run` must be a live run handle; `out` must point to writable memory
// for one pointer.
enum SdlStatus sdl_run_metrics_csv(const struct SdlRun *run, char **out);

// Run manifest as JSON: full configuration, seed, build id, and the
// final round's metrics.
//
// # Safety
// `run` must be a live run handle; `out` must point to writable memory
// for one pointer.
enum SdlStatus sdl_run_manifest_json(const struct SdlRun *run, char **out);

// Releases a run handle. Null is a no-op.
//
// # Safety
// `run` must have come from `sdl_run_new` and not already be freed.
void sdl_run_free(struct SdlRun *run);

// Aggregates `n` updates of dimension `d`, laid out row-major in
// `updates`, into `out`.
//
// # Safety
// `updates` must point to `n * d` readable doubles and `out` to `d`
// writable doubles.
enum SdlStatus sdl_aggregate(enum SdlAggregateRule rule,
                             const double *updates,
                             size_t n,
                             size_t d,
                             size_t robustness,
                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
