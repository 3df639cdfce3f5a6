#ifndef AOI_FFI_H
#define AOI_FFI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AoiMode {
  AOI_MODE_STOCHASTIC = 0,
  AOI_MODE_EXPECTED = 1,
} AoiMode;

typedef enum AoiStatus {
  AOI_STATUS_OK = 0,
  AOI_STATUS_NULL_POINTER = 1,
  AOI_STATUS_INVALID_ARGUMENT = 2,
  AOI_STATUS_NO_CONVERGENCE = 3,
  /**
   * The caller's output buffer does not match the node count.
   */
  AOI_STATUS_BUFFER_LENGTH = 4,
  AOI_STATUS_PANIC = 5,
  AOI_STATUS_INTERNAL = 6,
} AoiStatus;

/**
 * A game: roster, frame length, schedule and seed.
 */
typedef struct AoiGame AoiGame;

/**
 * A learning run advanced frame by frame.
 */
typedef struct AoiLearning AoiLearning;

typedef struct AoiNodeParams {
  double cost_per_transmission;
  double rho1;
  double rho2;
  double p_min;
  double alpha;
} AoiNodeParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or null. The string
 * stays valid until the next failing call on the same thread.
 */
const char *aoi_last_error_message(void);

/**
 * Node parameters derived from a transmission cost and the global floor
 * `p_global_min` in (0, 0.5).
 *
 * # Safety
 * `out` must be null or point to writable memory for one `AoiNodeParams`.
 */
enum AoiStatus aoi_derive_params(double cost, double p_global_min, struct AoiNodeParams *out);

/**
 * Creates a game with `n` identical nodes.
 *
 * # Safety
 * `out` must be null or point to writable memory for one pointer.
 */
enum AoiStatus aoi_game_new_homogeneous(size_t n,
                                        double cost,
                                        double p_global_min,
                                        size_t frame_length,
                                        uint64_t seed,
                                        struct AoiGame **out);

/**
 * # Safety
 * `game` must be null or a handle from [`aoi_game_new_homogeneous`] not yet
 * freed.
 */
void aoi_game_free(struct AoiGame *game);

/**
 * Number of nodes, or 0 for a null handle.
 *
 * # Safety
 * `game` must be null or a live game handle.
 */
size_t aoi_game_node_count(const struct AoiGame *game);

/**
 * Certified bound on the best-response map's Lipschitz constant.
 *
 * # Safety
 * `game` must be null or a live game handle; `out` null or writable.
 */
enum AoiStatus aoi_game_contraction_bound(const struct AoiGame *game, double *out);

/**
 * Writes the Nash equilibrium into `out[0..len]`; `len` must equal the
 * node count.
 *
 * # Safety
 * `game` must be null or a live game handle; `out` null or writable for
 * `len` doubles.
 */
enum AoiStatus aoi_game_solve_ne(const struct AoiGame *game,
                                 double tolerance,
                                 double *out,
                                 size_t len);

/**
 * Social utility at optimum over social utility at equilibrium.
 *
 * # Safety
 * `game` must be null or a live game handle; `out` null or writable.
 */
enum AoiStatus aoi_game_price_of_anarchy(const struct AoiGame *game, double *out);

/**
 * Sum of node utilities at `profile[0..len]`.
 *
 * # Safety
 * `game` must be null or a live game handle; `profile` null or readable
 * for `len` doubles; `out` null or writable.
 */
enum AoiStatus aoi_game_system_utility(const struct AoiGame *game,
                                       const double *profile,
                                       size_t len,
                                       double *out);

/**
 * Starts a learning run on a copy of `game`.
 *
 * # Safety
 * `game` must be null or a live game handle; `out` null or writable for
 * one pointer.
 */
enum AoiStatus aoi_learning_new(const struct AoiGame *game,
                                enum AoiMode mode,
                                struct AoiLearning **out);

/**
 * Plays one frame and applies the update.
 *
 * # Safety
 * `run` must be null or a live learning handle.
 */
enum AoiStatus aoi_learning_step(struct AoiLearning *run);

/**
 * Current roster size, or 0 for a null handle.
 *
 * # Safety
 * `run` must be null or a live learning handle.
 */
size_t aoi_learning_node_count(const struct AoiLearning *run);

/**
 * Copies the current profile into `out[0..len]`.
 *
 * # Safety
 * `run` must be null or a live learning handle; `out` null or writable for
 * `len` doubles.
 */
enum AoiStatus aoi_learning_probabilities(const struct AoiLearning *run, double *out, size_t len);

/**
 * # Safety
 * `run` must be null or a handle from [`aoi_learning_new`] not yet freed.
 */
void aoi_learning_free(struct AoiLearning *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AOI_FFI_H */
