#ifndef BRAINTOOLS_BRAINTOOLS_H
#define BRAINTOOLS_BRAINTOOLS_H

/*
 * C interface to the brain-alignment measurement toolkit.
 *
 * Every function returns a bt_status. On failure the message of the most
 * recent error on the calling thread is available from bt_last_error().
 * Matrices are opaque handles; element access is row-major. Objects returned
 * through out-pointers are owned by the caller and released with the matching
 * *_free function.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(__GNUC__)
#define BT_API __attribute__((visibility("default")))
#else
#define BT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bt_status {
  BT_OK = 0,
  BT_ERR_INPUT = 1,
  BT_ERR_FORMAT = 2,
  BT_ERR_DATA = 3,
  BT_ERR_MANIFEST = 4,
  BT_ERR_COVERAGE = 5,
  BT_ERR_DEGENERATE = 6,
  BT_ERR_ROI = 7,
  BT_ERR_CONFIG = 8,
  BT_ERR_STAGE = 9,
  BT_ERR_IO = 10,
  BT_ERR_NULL_IMPACT = 11,     /* |B_o| too small for a relative impact */
  BT_ERR_DEGENERATE_TEST = 12, /* all paired differences zero; result still filled with p = 1 */
  BT_ERR_INTERNAL = 99
} bt_status;

typedef struct bt_matrix bt_matrix;

BT_API const char* bt_version(void);
BT_API const char* bt_status_string(bt_status status);
/* Message of the last failed call on this thread; "" when none. */
BT_API const char* bt_last_error(void);

/* ---- matrices ---------------------------------------------------------- */

/* `values` is row-major rows*cols, or NULL for zeros. */
BT_API bt_status bt_matrix_create(size_t rows, size_t cols, const double* values, bt_matrix** out);
/* Loads a 1-D or 2-D .npy (f8, f4, i8 or b1); 1-D arrays become n x 1. */
BT_API bt_status bt_matrix_load(const char* path, bt_matrix** out);
/* Saves as 2-D little-endian float64. */
BT_API bt_status bt_matrix_save(const bt_matrix* m, const char* path);
BT_API size_t bt_matrix_rows(const bt_matrix* m);
BT_API size_t bt_matrix_cols(const bt_matrix* m);
BT_API double bt_matrix_get(const bt_matrix* m, size_t row, size_t col);
/* Copies rows*cols values in row-major order into `dst` (capacity `n`). */
BT_API bt_status bt_matrix_copy(const bt_matrix* m, double* dst, size_t n);
BT_API void bt_matrix_free(bt_matrix* m);

/* ---- pairing ------------------------------------------------------------ */

/* Anti-aliased resampling of `series` (sampled at rate_hz from t0_s) to the
 * target times with a Lanczos kernel of `lobes` lobes and cutoff 1/(2 tr_s). */
BT_API bt_status bt_lanczos_downsample(const bt_matrix* series, double rate_hz, double t0_s, const double* targets,
                                       size_t n_targets, double tr_s, int lobes, bt_matrix** out);
/* Horizontal stack of `x` shifted down by each delay (in rows), zero-filled. */
BT_API bt_status bt_fir_expand(const bt_matrix* x, const int* delays, size_t n_delays, bt_matrix** out);

/* ---- noise ceiling ------------------------------------------------------ */

/* `nc_out` and `keep_out` have n_voxels entries (columns of the repeats). */
BT_API bt_status bt_noise_ceiling(const bt_matrix* const* repeats, size_t n_repeats, double threshold, double* nc_out,
                                  unsigned char* keep_out);

/* ---- encoding ----------------------------------------------------------- */

/* argmin |Y - X W|^2 + alpha |W|^2, no intercept. */
BT_API bt_status bt_ridge_fit(const bt_matrix* x, const bt_matrix* y, double alpha, bt_matrix** weights_out);
/* Sample Pearson correlation; 0 when either input is constant. */
BT_API bt_status bt_pearson(const double* a, const double* b, size_t n, double* r_out);
/* Mean of rho[v] / nc[v] over ROI voxels with keep[v] != 0. */
BT_API bt_status bt_normalized_alignment(const double* rho, const double* nc, const unsigned char* keep, size_t n_voxels,
                                         const size_t* roi_voxels, size_t n_roi, double* b_out, size_t* n_used_out);
/* R = 100 (b_original - b_residual) / b_original; BT_ERR_NULL_IMPACT when
 * |b_original| < 1e-9. */
BT_API bt_status bt_low_level_impact(double b_original, double b_residual, double* r_out);

/* ---- statistics --------------------------------------------------------- */

typedef enum bt_wilcoxon_mode { BT_WILCOXON_AUTO = 0, BT_WILCOXON_EXACT = 1, BT_WILCOXON_NORMAL = 2 } bt_wilcoxon_mode;

typedef struct bt_wilcoxon_result {
  double w; /* min(W+, W-) */
  double w_plus;
  double w_minus;
  double p; /* two-sided */
  size_t n;
  size_t n_nonzero;
  int exact;
  int degenerate;
} bt_wilcoxon_result;

BT_API bt_status bt_wilcoxon(const double* a, const double* b, size_t n, bt_wilcoxon_mode mode, bt_wilcoxon_result* out);

/* ---- baselines and probes ----------------------------------------------- */

/* Seeded cyclic permutation of n_blocks; `mapping_out[k]` is the source block
 * of output block k. */
BT_API bt_status bt_derangement(size_t n_blocks, uint64_t seed, size_t* mapping_out);
BT_API bt_status bt_block_permute(const bt_matrix* y, size_t block_len, uint64_t seed, bt_matrix** out);

typedef enum bt_metric { BT_METRIC_COSINE = 0, BT_METRIC_EUCLIDEAN = 1 } bt_metric;

/* Rows of the three matrices are (word, semantic neighbour, phonetic
 * neighbour) triples; d = mean(dist(w, s) - dist(w, p)). */
BT_API bt_status bt_preference_d(const bt_matrix* words, const bt_matrix* semantic, const bt_matrix* phonetic, bt_metric metric,
                                 double* d_out);

/* ---- file-level commands ------------------------------------------------ */

/* Runs a named command ("pair", "ceiling", "fit", "residualize", "impact",
 * "stats", "semphon", "synth", "permute", "power", "phones", "run") with
 * options as a JSON object. `result_json` (may be NULL) receives a summary to
 * release with bt_string_free. */
BT_API bt_status bt_tool_run(const char* tool, const char* options_json, char** result_json);

/* Runs pipeline stages from a config file. `stages_csv` NULL or "" runs all. */
BT_API bt_status bt_pipeline_run(const char* config_path, const char* stages_csv, int force, char** summary_json);

BT_API void bt_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* BRAINTOOLS_BRAINTOOLS_H */
