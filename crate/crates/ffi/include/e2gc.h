#ifndef E2GC_H
#define E2GC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum E2gcStatus {
  E2GC_STATUS_OK = 0,
  E2GC_STATUS_NULL_POINTER = 1,
  E2GC_STATUS_INVALID_UTF8 = 2,
  /**
   * A network, layer or parameter failed validation.
   */
  E2GC_STATUS_VALIDATION = 3,
  /**
   * Malformed network JSON.
   */
  E2GC_STATUS_PARSE = 4,
  E2GC_STATUS_UNKNOWN_BLUEPRINT = 5,
  E2GC_STATUS_OUT_OF_RANGE = 6,
  E2GC_STATUS_PANIC = 99,
} E2gcStatus;

typedef enum E2gcStrategyKind {
  /**
   * Constant group size; `value` is `G`.
   */
  E2GC_STRATEGY_KIND_E2GC = 0,
  /**
   * Constant group count; `value` is `g`.
   */
  E2GC_STRATEGY_KIND_FGGC = 1,
  E2GC_STRATEGY_KIND_SCONV = 2,
  E2GC_STRATEGY_KIND_DWCONV = 3,
} E2gcStrategyKind;

/**
 * Opaque network handle.
 */
typedef struct E2gcNetwork E2gcNetwork;

/**
 * Per-frame cost of a layer or network.
 */
typedef struct E2gcCost {
  uint64_t mc;
  uint64_t params;
  uint64_t activations;
  double ai;
} E2gcCost;

/**
 * A conv layer; `h`/`w` are output feature-map sizes.
 */
typedef struct E2gcLayer {
  uint64_t m;
  uint64_t n;
  uint64_t dk_h;
  uint64_t dk_w;
  uint64_t h;
  uint64_t w;
  uint64_t stride;
  uint64_t g;
  bool has_bias;
  bool has_batchnorm;
} E2gcLayer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or an empty string. The
 * pointer stays valid until the next call into this library on the thread.
 */
const char *e2gc_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *e2gc_version(void);

/**
 * Builds a blueprint (`mobilenet_v1` or `resnext50_32x4d`).
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum E2gcStatus e2gc_network_from_blueprint(const char *name,
                                            uint64_t input_resolution,
                                            double width_multiplier,
                                            struct E2gcNetwork **out);

/**
 * Parses a network from its JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum E2gcStatus e2gc_network_from_json(const char *json, struct E2gcNetwork **out);

/**
 * Canonical JSON of a network; release with `e2gc_string_free`.
 *
 * # Safety
 * `net` must be a live handle and `out` a valid pointer.
 */
enum E2gcStatus e2gc_network_to_json(const struct E2gcNetwork *net, char **out);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void e2gc_string_free(char *s);

/**
 * # Safety
 * `net` must be a handle from this library or null; it must not be used
 * afterwards.
 */
void e2gc_network_free(struct E2gcNetwork *net);

/**
 * Number of validation diagnostics; zero means valid. The diagnostics are
 * joined into the last-error message when non-zero.
 *
 * # Safety
 * `net` must be a live handle and `count` a valid pointer.
 */
enum E2gcStatus e2gc_network_validate(const struct E2gcNetwork *net, size_t *count);

/**
 * Rewrites the substitution sites of `net` into a new handle.
 *
 * # Safety
 * `net` must be a live handle and `out` a valid pointer.
 */
enum E2gcStatus e2gc_network_plan(const struct E2gcNetwork *net,
                                  enum E2gcStrategyKind kind,
                                  uint64_t value,
                                  struct E2gcNetwork **out);

/**
 * Network totals.
 *
 * # Safety
 * `net` must be a live handle and `out` a valid pointer.
 */
enum E2gcStatus e2gc_network_cost(const struct E2gcNetwork *net, struct E2gcCost *out);

/**
 * Number of layers, or 0 for a null handle.
 *
 * # Safety
 * `net` must be a live handle or null.
 */
size_t e2gc_network_layer_count(const struct E2gcNetwork *net);

/**
 * Cost of the layer at `index`.
 *
 * # Safety
 * `net` must be a live handle and `out` a valid pointer.
 */
enum E2gcStatus e2gc_network_layer_cost(const struct E2gcNetwork *net,
                                        size_t index,
                                        struct E2gcCost *out);

/**
 * Cost of a standalone conv layer.
 *
 * # Safety
 * `layer` and `out` must be valid pointers.
 */
enum E2gcStatus e2gc_layer_cost(const struct E2gcLayer *layer, struct E2gcCost *out);

/**
 * Continuous balanced group count for `layer`.
 *
 * # Safety
 * `layer` and `out` must be valid pointers.
 */
enum E2gcStatus e2gc_balanced_groups(const struct E2gcLayer *layer,
                                     double beta,
                                     double gamma,
                                     double *out);

/**
 * Common divisor of `m` and `n` nearest to `g_star` in log space.
 */
uint64_t e2gc_round_to_valid(double g_star, uint64_t m, uint64_t n);

/**
 * `scale_k * mc^(1 - beta) * (params + activations)^beta`.
 *
 * # Safety
 * `cost` and `out` must be valid pointers.
 */
enum E2gcStatus e2gc_energy_proxy(const struct E2gcCost *cost,
                                  double beta,
                                  double scale_k,
                                  double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* E2GC_H */
