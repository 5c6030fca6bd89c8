/*
 * Copyright 2026 The pdcr Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C interface to the pdcr causal-attribution engine.
 *
 * Objects are opaque handles created by pdcr_*_create / _load / _open /
 * _build functions and released with the matching _free function. Every
 * fallible call returns a pdcr_status; on failure pdcr_last_error() describes
 * what went wrong (the message is thread-local and valid until the next
 * failing call on the same thread). Strings returned through char** out
 * parameters are owned by the caller and released with pdcr_string_free().
 *
 * Perturbations are given either as a bank handle or as a baseline string
 * ("zero", "mean", "noise:<sigma>", "blur:<radius>"); exactly one of the two
 * must be non-null.
 */

#ifndef PDCR_PDCR_H_
#define PDCR_PDCR_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PDCR_API __declspec(dllexport)
#else
#define PDCR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pdcr_status {
  PDCR_OK = 0,
  PDCR_ERR_INVALID_ARGUMENT = 1,
  PDCR_ERR_SHAPE = 2,
  PDCR_ERR_BOUNDS = 3,
  PDCR_ERR_IO = 4,
  PDCR_ERR_FORMAT = 5,
  PDCR_ERR_MODEL = 6,
  PDCR_ERR_TIMEOUT = 7,
  PDCR_ERR_PROTOCOL = 8,
  PDCR_ERR_SESSION = 9,
  PDCR_ERR_INTERNAL = 10
} pdcr_status;

typedef struct pdcr_image pdcr_image;
typedef struct pdcr_mask pdcr_mask;
typedef struct pdcr_bank pdcr_bank;
typedef struct pdcr_model pdcr_model;
typedef struct pdcr_map pdcr_map;

typedef struct pdcr_rect {
  int32_t x;
  int32_t y;
  int32_t w;
  int32_t h;
} pdcr_rect;

typedef enum pdcr_reference_mode {
  PDCR_REFERENCE_GROUND_TRUTH = 0,
  PDCR_REFERENCE_SELF_PREDICTION = 1
} pdcr_reference_mode;

typedef struct pdcr_explain_config {
  int32_t patch_size;      /* P, default 8 */
  int32_t screen_trials;   /* S, default 3 */
  double screen_threshold; /* tau, default 0.02 */
  int32_t ate_trials;      /* N, default 50 */
  uint64_t seed;
  pdcr_reference_mode reference_mode;
  uint32_t workers; /* concurrent model calls; does not affect results */
} pdcr_explain_config;

typedef struct pdcr_gateway_options {
  double request_timeout_s; /* default 60 */
  uint32_t max_in_flight;   /* client limit before negotiation, default 32 */
} pdcr_gateway_options;

typedef enum pdcr_normalization {
  PDCR_NORMALIZE_PER_MAP_MAX = 0,
  PDCR_NORMALIZE_FIXED = 1
} pdcr_normalization;

typedef struct pdcr_render_spec {
  pdcr_normalization normalization;
  double scale; /* PDCR_NORMALIZE_FIXED only */
  double overlay_alpha;
  uint8_t roi_outline[3];
} pdcr_render_spec;

typedef enum pdcr_verdict_kind {
  PDCR_VERDICT_ROI = 0,
  PDCR_VERDICT_IRRELEVANT = 1,
  PDCR_VERDICT_ATE = 2
} pdcr_verdict_kind;

typedef struct pdcr_map_summary {
  int32_t width;
  int32_t height;
  int32_t patch_size;
  size_t patch_count;
  size_t roi_patches;
  size_t irrelevant_patches;
  size_t ate_patches;
  double m0;
  uint64_t total_model_calls;
  int32_t degenerate;
  pdcr_rect roi;
} pdcr_map_summary;

PDCR_API const char* pdcr_version(void);
PDCR_API const char* pdcr_last_error(void);
PDCR_API const char* pdcr_status_name(pdcr_status status);
PDCR_API void pdcr_string_free(char* text);

PDCR_API void pdcr_explain_config_init(pdcr_explain_config* config);
PDCR_API void pdcr_gateway_options_init(pdcr_gateway_options* options);
PDCR_API void pdcr_render_spec_init(pdcr_render_spec* spec);

/* Images: 8-bit, 1 or 3 interleaved channels, row-major. */
PDCR_API pdcr_status pdcr_image_create(int32_t width, int32_t height,
                                       int32_t channels, const uint8_t* pixels,
                                       pdcr_image** out);
PDCR_API pdcr_status pdcr_image_load_png(const char* path, pdcr_image** out);
PDCR_API pdcr_status pdcr_image_save_png(const pdcr_image* image,
                                         const char* path);
PDCR_API void pdcr_image_info(const pdcr_image* image, int32_t* width,
                              int32_t* height, int32_t* channels);
PDCR_API const uint8_t* pdcr_image_pixels(const pdcr_image* image);
PDCR_API void pdcr_image_free(pdcr_image* image);

/* Masks: one byte per pixel, each 0 or 1. PNGs threshold at 128. */
PDCR_API pdcr_status pdcr_mask_create(int32_t width, int32_t height,
                                      const uint8_t* bits, pdcr_mask** out);
PDCR_API pdcr_status pdcr_mask_load_png(const char* path, pdcr_mask** out);
PDCR_API pdcr_status pdcr_mask_save_png(const pdcr_mask* mask,
                                        const char* path);
PDCR_API const uint8_t* pdcr_mask_bits(const pdcr_mask* mask);
PDCR_API void pdcr_mask_free(pdcr_mask* mask);
PDCR_API pdcr_status pdcr_roi_dsc(const pdcr_mask* pred,
                                  const pdcr_mask* reference, pdcr_rect roi,
                                  double* out);

/* Perturbation banks. `names` may be null. */
PDCR_API pdcr_status pdcr_bank_build(const pdcr_image* const* sources,
                                     const char* const* names, size_t n,
                                     int32_t block_size, uint32_t count,
                                     uint64_t seed, pdcr_bank** out);
PDCR_API pdcr_status pdcr_bank_load(const char* path, pdcr_bank** out);
PDCR_API pdcr_status pdcr_bank_save(const pdcr_bank* bank, const char* path);
/* digest_hex receives 64 hex digits plus a terminating NUL. */
PDCR_API void pdcr_bank_info(const pdcr_bank* bank, int32_t* block_size,
                             int32_t* channels, uint32_t* count,
                             char digest_hex[65]);
PDCR_API void pdcr_bank_free(pdcr_bank* bank);

/* Models: "ref:<name>?...", "cmd:<shell command>" or "tcp:<host>:<port>".
 * `options` may be null for defaults. */
PDCR_API pdcr_status pdcr_model_open(const char* uri,
                                     const pdcr_gateway_options* options,
                                     pdcr_model** out);
PDCR_API const char* pdcr_model_identity(const pdcr_model* model);
PDCR_API pdcr_status pdcr_model_predict(const pdcr_model* model,
                                        const pdcr_image* image,
                                        pdcr_mask** out);
PDCR_API void pdcr_model_free(pdcr_model* model);

/* Explanation. `reference` may be null in self-prediction mode. */
PDCR_API pdcr_status pdcr_explain(const pdcr_model* model,
                                  const pdcr_image* image,
                                  const pdcr_mask* reference, pdcr_rect roi,
                                  const pdcr_bank* bank, const char* baseline,
                                  const pdcr_explain_config* config,
                                  pdcr_map** out);
PDCR_API pdcr_status pdcr_map_to_json(const pdcr_map* map, char** out);
PDCR_API pdcr_status pdcr_map_from_json(const char* json, pdcr_map** out);
PDCR_API pdcr_status pdcr_map_load(const char* path, pdcr_map** out);
PDCR_API pdcr_status pdcr_map_save(const pdcr_map* map, const char* path);
PDCR_API void pdcr_map_summarize(const pdcr_map* map, pdcr_map_summary* out);
PDCR_API pdcr_status pdcr_map_verdict(const pdcr_map* map, size_t index,
                                      pdcr_verdict_kind* kind, double* ate,
                                      int32_t* trials);
PDCR_API void pdcr_map_free(pdcr_map* map);

PDCR_API pdcr_status pdcr_render_map(const pdcr_map* map,
                                     const pdcr_image* base,
                                     const pdcr_render_spec* spec,
                                     pdcr_image** out);

/* Running ATE of one patch over max_trials trials, as a JSON document. */
PDCR_API pdcr_status pdcr_convergence_trace_json(
    const pdcr_model* model, const pdcr_image* image,
    const pdcr_mask* reference, pdcr_rect roi, int32_t patch_size,
    pdcr_reference_mode mode, size_t patch_index, const pdcr_bank* bank,
    const char* baseline, uint64_t seed, int32_t max_trials, char** out);

/* Patch rankings over the non-RoI patches of `map`. `out` must hold
 * patch_count entries; *len receives the ranking length. */
PDCR_API pdcr_status pdcr_map_ranking(const pdcr_map* map, size_t* out,
                                      size_t capacity, size_t* len);
PDCR_API pdcr_status pdcr_random_ranking(const pdcr_map* map, uint64_t seed,
                                         size_t* out, size_t capacity,
                                         size_t* len);

/* Joint top-k deletion score and progressive curve. Geometry, RoI and
 * reference mode come from `map`; the result is a JSON document. */
PDCR_API pdcr_status pdcr_attribution_score_json(
    const pdcr_map* map, const pdcr_model* model, const pdcr_image* image,
    const pdcr_mask* reference, const size_t* ranking, size_t ranking_len,
    const pdcr_bank* bank, const char* baseline, int32_t k, int32_t repeats,
    uint64_t seed, uint32_t workers, char** out);
PDCR_API pdcr_status pdcr_attribution_curve_json(
    const pdcr_map* map, const pdcr_model* model, const pdcr_image* image,
    const pdcr_mask* reference, const size_t* ranking, size_t ranking_len,
    const pdcr_bank* bank, const char* baseline, int32_t max_steps,
    int32_t repeats, uint64_t seed, uint32_t workers, char** out);

/* Aggregate statistics. CSV has one row per map (labelled by `labels`, or
 * the model id when null) plus a pooled "all" row. JSON describes the
 * pooled statistics and histogram; `bin_edges` may be null for defaults. */
PDCR_API pdcr_status pdcr_aggregate_csv(const pdcr_map* const* maps,
                                        const char* const* labels, size_t n,
                                        char** out);
PDCR_API pdcr_status pdcr_aggregate_json(const pdcr_map* const* maps, size_t n,
                                         const double* bin_edges,
                                         size_t n_edges, char** out);

#ifdef __cplusplus
}
#endif

#endif /* PDCR_PDCR_H_ */
