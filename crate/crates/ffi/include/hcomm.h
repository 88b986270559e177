#ifndef HCOMM_H
#define HCOMM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define HCOMM_OK 0

#define HCOMM_NULL_POINTER 1

#define HCOMM_INVALID_ARGUMENT 2

/**
 * Point on a tile boundary, outside a region, or level out of range.
 */
#define HCOMM_OUT_OF_DOMAIN 3

/**
 * Quadrature, linear algebra or Monte-Carlo failure.
 */
#define HCOMM_NUMERICAL 4

#define HCOMM_IO 5

/**
 * The output buffer is too small; the required length was written.
 */
#define HCOMM_BUFFER_TOO_SMALL 6

#define HCOMM_PANIC 7

#define HCOMM_METRIC_RHO 0

#define HCOMM_METRIC_GAUGE 1

#define HCOMM_METRIC_KORANYI 2

#define HCOMM_BESOV_MARTINGALE 0

#define HCOMM_BESOV_SHELL 1

#define HCOMM_BESOV_DIRECT 2

#define HCOMM_KERNEL_RIESZ 0

#define HCOMM_KERNEL_SECOND_ORDER_T 1

/**
 * Symbol sampled on the fine tiles of a region.
 */
typedef struct HcommGrid HcommGrid;

/**
 * Discretized commutator `[b, T]`.
 */
typedef struct HcommOperator HcommOperator;

/**
 * Tile system of `H^n`.
 */
typedef struct HcommTileSystem HcommTileSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread. Valid until the next call
 * that fails on the same thread.
 */
const char *hcomm_last_error(void);

/**
 * Static version string.
 */
const char *hcomm_version(void);

/**
 * `out = a · b` for flat points of length `2n + 1`.
 */
int32_t hcomm_group_multiply(size_t n, const double *a, const double *b, double *out);

/**
 * Homogeneous norm of a flat point; `kind` is one of `HCOMM_METRIC_*`.
 */
int32_t hcomm_group_norm(size_t n, const double *g, int32_t kind, double *out);

int32_t hcomm_tile_system_new(size_t n, HcommTileSystem **out);

void hcomm_tile_system_free(HcommTileSystem *sys);

/**
 * Tile of level `level` containing `g`: writes the `2n` lattice coordinates
 * to `z` and the height index to `m`.
 */
int32_t hcomm_tile_locate(const HcommTileSystem *sys,
                          const double *g,
                          int32_t level,
                          int64_t *z,
                          int64_t *m);

/**
 * Bump of radius `radius` at `center`, sampled at the fine tile centers of
 * the basic tile at `root_level` refined `depth` times.
 */
int32_t hcomm_grid_new_bump(const HcommTileSystem *sys,
                            int32_t root_level,
                            uint32_t depth,
                            const double *center,
                            double radius,
                            HcommGrid **out);

/**
 * Grid from explicit fine-tile values in region order.
 */
int32_t hcomm_grid_new_values(const HcommTileSystem *sys,
                              int32_t root_level,
                              uint32_t depth,
                              const double *values,
                              size_t len,
                              HcommGrid **out);

/**
 * Number of fine tiles; 0 for a null handle.
 */
size_t hcomm_grid_len(const HcommGrid *grid);

void hcomm_grid_free(HcommGrid *grid);

/**
 * Besov estimate at `alpha = Q / p`; `method` is one of `HCOMM_BESOV_*`.
 * `seed` only affects the direct method.
 */
int32_t hcomm_besov(const HcommTileSystem *sys,
                    const HcommGrid *grid,
                    int32_t method,
                    double p,
                    uint64_t seed,
                    double *out);

/**
 * Assembles `[b, T]` on the grid; `kernel` is one of `HCOMM_KERNEL_*` and
 * `index` selects the Riesz transform `1..=2n`.
 */
int32_t hcomm_operator_new(const HcommTileSystem *sys,
                           const HcommGrid *grid,
                           int32_t kernel,
                           size_t index,
                           HcommOperator **out);

/**
 * Matrix dimension; 0 for a null handle.
 */
size_t hcomm_operator_dim(const HcommOperator *op);

void hcomm_operator_free(HcommOperator *op);

/**
 * Singular values in decreasing order. Writes the count to `len`; returns
 * `HCOMM_BUFFER_TOO_SMALL` without copying when `cap` is short.
 */
int32_t hcomm_operator_singular_values(const HcommOperator *op,
                                       double *buf,
                                       size_t cap,
                                       size_t *len);

/**
 * `(Σ s_i^p)^{1/p}`; `p = INFINITY` gives the largest value.
 */
int32_t hcomm_schatten_norm(const double *values, size_t len, double p, double *out);

/**
 * Runs a named experiment (`structure`, `kernel`, `certify`, `commutator`,
 * `schatten`, `besov`, `equivalence`, `constancy`) and returns its report as
 * JSON in `report`, to be released with `hcomm_string_free`. A null
 * `config_json` uses the defaults. Failed checks still return `HCOMM_OK`.
 */
int32_t hcomm_run_experiment(const char *name, const char *config_json, char **report);

void hcomm_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HCOMM_H */
