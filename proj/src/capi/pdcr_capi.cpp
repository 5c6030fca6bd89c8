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

#include "pdcr/pdcr.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pdcr/bank.hpp"
#include "pdcr/engine.hpp"
#include "pdcr/error.hpp"
#include "pdcr/evaluation.hpp"
#include "pdcr/gateway.hpp"
#include "pdcr/map_json.hpp"
#include "pdcr/png_io.hpp"
#include "pdcr/render.hpp"

struct pdcr_image {
  pdcr::Image value;
};
struct pdcr_mask {
  pdcr::Mask value;
};
struct pdcr_bank {
  std::shared_ptr<const pdcr::PerturbationBank> value;
};
struct pdcr_model {
  std::unique_ptr<pdcr::Segmenter> value;
  std::string identity;
};
struct pdcr_map {
  pdcr::PdcrMap value;
};

namespace {

thread_local std::string g_last_error;

template <typename Fn>
pdcr_status guarded(Fn&& fn) {
  try {
    fn();
    return PDCR_OK;
  } catch (const pdcr::Error& e) {
    g_last_error = e.what();
    return static_cast<pdcr_status>(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown failure";
  }
  return PDCR_ERR_INTERNAL;
}

void require(const void* p, const char* what) {
  if (!p) pdcr::fail(pdcr::ErrorCode::kInvalidArgument, std::string(what) + " is null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

pdcr::Rect to_rect(pdcr_rect r) { return {r.x, r.y, r.w, r.h}; }

pdcr::ReferenceMode to_mode(pdcr_reference_mode m) {
  return m == PDCR_REFERENCE_SELF_PREDICTION ? pdcr::ReferenceMode::kSelfPrediction
                                             : pdcr::ReferenceMode::kGroundTruth;
}

pdcr::PerturbationSource to_source(const pdcr_bank* bank, const char* baseline) {
  if ((bank == nullptr) == (baseline == nullptr)) {
    pdcr::fail(pdcr::ErrorCode::kInvalidArgument,
               "exactly one of bank and baseline must be given");
  }
  if (bank) return pdcr::PerturbationSource(bank->value);
  return pdcr::PerturbationSource(pdcr::BaselineKind::parse(baseline));
}

const pdcr::Mask* mask_or_null(const pdcr_mask* m) { return m ? &m->value : nullptr; }

std::vector<std::size_t> to_ranking(const std::size_t* ranking, std::size_t len) {
  if (len > 0) require(ranking, "ranking");
  return std::vector<std::size_t>(ranking, ranking + len);
}

void copy_ranking(const std::vector<std::size_t>& ranking, std::size_t* out,
                  std::size_t capacity, std::size_t* len) {
  require(len, "len");
  *len = ranking.size();
  if (ranking.empty()) return;
  require(out, "out");
  if (capacity < ranking.size()) {
    pdcr::fail(pdcr::ErrorCode::kInvalidArgument,
               "ranking buffer holds " + std::to_string(capacity) + " entries, need " +
                   std::to_string(ranking.size()));
  }
  std::copy(ranking.begin(), ranking.end(), out);
}

std::vector<pdcr::PdcrMap> collect_maps(const pdcr_map* const* maps, std::size_t n) {
  require(maps, "maps");
  std::vector<pdcr::PdcrMap> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    require(maps[i], "map");
    out.push_back(maps[i]->value);
  }
  return out;
}

}  // namespace

extern "C" {

const char* pdcr_version(void) { return "1.0.0"; }

const char* pdcr_last_error(void) { return g_last_error.c_str(); }

const char* pdcr_status_name(pdcr_status status) {
  if (status == PDCR_OK) return "ok";
  return pdcr::error_code_name(static_cast<pdcr::ErrorCode>(status));
}

void pdcr_string_free(char* text) { std::free(text); }

void pdcr_explain_config_init(pdcr_explain_config* config) {
  if (!config) return;
  const pdcr::ExplainConfig defaults;
  config->patch_size = defaults.patch_size;
  config->screen_trials = defaults.screen_trials;
  config->screen_threshold = defaults.screen_threshold;
  config->ate_trials = defaults.ate_trials;
  config->seed = defaults.seed;
  config->reference_mode = PDCR_REFERENCE_GROUND_TRUTH;
  config->workers = 1;
}

void pdcr_gateway_options_init(pdcr_gateway_options* options) {
  if (!options) return;
  const pdcr::GatewayConfig defaults;
  options->request_timeout_s = defaults.request_timeout_s;
  options->max_in_flight = static_cast<uint32_t>(defaults.max_in_flight);
}

void pdcr_render_spec_init(pdcr_render_spec* spec) {
  if (!spec) return;
  const pdcr::RenderSpec defaults;
  spec->normalization = PDCR_NORMALIZE_PER_MAP_MAX;
  spec->scale = defaults.scale;
  spec->overlay_alpha = defaults.overlay_alpha;
  for (int c = 0; c < 3; ++c) spec->roi_outline[c] = defaults.roi_outline[c];
}

pdcr_status pdcr_image_create(int32_t width, int32_t height, int32_t channels,
                              const uint8_t* pixels, pdcr_image** out) {
  return guarded([&] {
    require(pixels, "pixels");
    require(out, "out");
    if (width < 1 || height < 1 || (channels != 1 && channels != 3)) {
      pdcr::fail(pdcr::ErrorCode::kShape, "invalid image geometry");
    }
    const std::size_t n = static_cast<std::size_t>(width) * height * channels;
    *out = new pdcr_image{
        pdcr::Image(width, height, channels, std::vector<std::uint8_t>(pixels, pixels + n))};
  });
}

pdcr_status pdcr_image_load_png(const char* path, pdcr_image** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new pdcr_image{pdcr::load_image_png(path)};
  });
}

pdcr_status pdcr_image_save_png(const pdcr_image* image, const char* path) {
  return guarded([&] {
    require(image, "image");
    require(path, "path");
    pdcr::save_image_png(image->value, path);
  });
}

void pdcr_image_info(const pdcr_image* image, int32_t* width, int32_t* height,
                     int32_t* channels) {
  if (!image) return;
  if (width) *width = image->value.width();
  if (height) *height = image->value.height();
  if (channels) *channels = image->value.channels();
}

const uint8_t* pdcr_image_pixels(const pdcr_image* image) {
  return image ? image->value.pixels().data() : nullptr;
}

void pdcr_image_free(pdcr_image* image) { delete image; }

pdcr_status pdcr_mask_create(int32_t width, int32_t height, const uint8_t* bits,
                             pdcr_mask** out) {
  return guarded([&] {
    require(bits, "bits");
    require(out, "out");
    if (width < 1 || height < 1) pdcr::fail(pdcr::ErrorCode::kShape, "invalid mask geometry");
    const std::size_t n = static_cast<std::size_t>(width) * height;
    *out = new pdcr_mask{pdcr::Mask(width, height, std::vector<std::uint8_t>(bits, bits + n))};
  });
}

pdcr_status pdcr_mask_load_png(const char* path, pdcr_mask** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new pdcr_mask{pdcr::load_mask_png(path)};
  });
}

pdcr_status pdcr_mask_save_png(const pdcr_mask* mask, const char* path) {
  return guarded([&] {
    require(mask, "mask");
    require(path, "path");
    pdcr::save_mask_png(mask->value, path);
  });
}

const uint8_t* pdcr_mask_bits(const pdcr_mask* mask) {
  return mask ? mask->value.bits().data() : nullptr;
}

void pdcr_mask_free(pdcr_mask* mask) { delete mask; }

pdcr_status pdcr_roi_dsc(const pdcr_mask* pred, const pdcr_mask* reference,
                         pdcr_rect roi, double* out) {
  return guarded([&] {
    require(pred, "pred");
    require(reference, "reference");
    require(out, "out");
    *out = pdcr::roi_dsc(pred->value, reference->value, to_rect(roi));
  });
}

pdcr_status pdcr_bank_build(const pdcr_image* const* sources,
                            const char* const* names, size_t n,
                            int32_t block_size, uint32_t count, uint64_t seed,
                            pdcr_bank** out) {
  return guarded([&] {
    require(out, "out");
    if (n > 0) require(sources, "sources");
    std::vector<pdcr::Image> images;
    std::vector<std::string> labels;
    images.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      require(sources[i], "source image");
      images.push_back(sources[i]->value);
      if (names) labels.emplace_back(names[i] ? names[i] : "");
    }
    auto bank = std::make_shared<const pdcr::PerturbationBank>(
        pdcr::build_bank(images, block_size, count, seed, labels));
    *out = new pdcr_bank{std::move(bank)};
  });
}

pdcr_status pdcr_bank_load(const char* path, pdcr_bank** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new pdcr_bank{std::make_shared<const pdcr::PerturbationBank>(pdcr::load_bank(path))};
  });
}

pdcr_status pdcr_bank_save(const pdcr_bank* bank, const char* path) {
  return guarded([&] {
    require(bank, "bank");
    require(path, "path");
    pdcr::save_bank(*bank->value, path);
  });
}

void pdcr_bank_info(const pdcr_bank* bank, int32_t* block_size, int32_t* channels,
                    uint32_t* count, char digest_hex[65]) {
  if (!bank) return;
  if (block_size) *block_size = bank->value->block_size();
  if (channels) *channels = bank->value->channels();
  if (count) *count = static_cast<uint32_t>(bank->value->count());
  if (digest_hex) {
    const std::string hex = pdcr::digest_hex(bank->value->source_digest());
    std::memcpy(digest_hex, hex.c_str(), hex.size() + 1);
  }
}

void pdcr_bank_free(pdcr_bank* bank) { delete bank; }

pdcr_status pdcr_model_open(const char* uri, const pdcr_gateway_options* options,
                            pdcr_model** out) {
  return guarded([&] {
    require(uri, "uri");
    require(out, "out");
    pdcr::GatewayConfig config;
    if (options) {
      config.request_timeout_s = options->request_timeout_s;
      config.max_in_flight = options->max_in_flight;
    }
    auto model = pdcr::open_model(uri, config);
    std::string identity = model->identity();
    *out = new pdcr_model{std::move(model), std::move(identity)};
  });
}

const char* pdcr_model_identity(const pdcr_model* model) {
  return model ? model->identity.c_str() : "";
}

pdcr_status pdcr_model_predict(const pdcr_model* model, const pdcr_image* image,
                               pdcr_mask** out) {
  return guarded([&] {
    require(model, "model");
    require(image, "image");
    require(out, "out");
    *out = new pdcr_mask{model->value->predict(image->value)};
  });
}

void pdcr_model_free(pdcr_model* model) { delete model; }

pdcr_status pdcr_explain(const pdcr_model* model, const pdcr_image* image,
                         const pdcr_mask* reference, pdcr_rect roi,
                         const pdcr_bank* bank, const char* baseline,
                         const pdcr_explain_config* config, pdcr_map** out) {
  return guarded([&] {
    require(model, "model");
    require(image, "image");
    require(config, "config");
    require(out, "out");
    pdcr::ExplainConfig cfg;
    cfg.patch_size = config->patch_size;
    cfg.screen_trials = config->screen_trials;
    cfg.screen_threshold = config->screen_threshold;
    cfg.ate_trials = config->ate_trials;
    cfg.seed = config->seed;
    cfg.reference_mode = to_mode(config->reference_mode);
    pdcr::ExplainOptions options;
    options.workers = std::max<uint32_t>(config->workers, 1);
    *out = new pdcr_map{pdcr::explain(*model->value, image->value, mask_or_null(reference),
                                      to_rect(roi), to_source(bank, baseline), cfg, options)};
  });
}

pdcr_status pdcr_map_to_json(const pdcr_map* map, char** out) {
  return guarded([&] {
    require(map, "map");
    require(out, "out");
    *out = dup_string(pdcr::map_to_json(map->value));
  });
}

pdcr_status pdcr_map_from_json(const char* json, pdcr_map** out) {
  return guarded([&] {
    require(json, "json");
    require(out, "out");
    *out = new pdcr_map{pdcr::map_from_json(json)};
  });
}

pdcr_status pdcr_map_load(const char* path, pdcr_map** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new pdcr_map{pdcr::load_map(path)};
  });
}

pdcr_status pdcr_map_save(const pdcr_map* map, const char* path) {
  return guarded([&] {
    require(map, "map");
    require(path, "path");
    pdcr::save_map(map->value, path);
  });
}

void pdcr_map_summarize(const pdcr_map* map, pdcr_map_summary* out) {
  if (!map || !out) return;
  const pdcr::PdcrMap& m = map->value;
  *out = pdcr_map_summary{};
  out->width = m.grid.width();
  out->height = m.grid.height();
  out->patch_size = m.grid.patch_size();
  out->patch_count = m.verdicts.size();
  for (const auto& v : m.verdicts) {
    switch (v.kind) {
      case pdcr::PatchVerdict::Kind::kRoiMember: ++out->roi_patches; break;
      case pdcr::PatchVerdict::Kind::kIrrelevant: ++out->irrelevant_patches; break;
      case pdcr::PatchVerdict::Kind::kAte: ++out->ate_patches; break;
    }
  }
  out->m0 = m.m0;
  out->total_model_calls = m.total_model_calls;
  out->degenerate = m.degenerate ? 1 : 0;
  out->roi = {m.roi.x, m.roi.y, m.roi.w, m.roi.h};
}

pdcr_status pdcr_map_verdict(const pdcr_map* map, size_t index,
                             pdcr_verdict_kind* kind, double* ate, int32_t* trials) {
  return guarded([&] {
    require(map, "map");
    if (index >= map->value.verdicts.size()) {
      pdcr::fail(pdcr::ErrorCode::kBounds, "verdict index out of range");
    }
    const pdcr::PatchVerdict& v = map->value.verdicts[index];
    if (kind) *kind = static_cast<pdcr_verdict_kind>(v.kind);
    if (ate) *ate = v.ate;
    if (trials) *trials = v.trials;
  });
}

void pdcr_map_free(pdcr_map* map) { delete map; }

pdcr_status pdcr_render_map(const pdcr_map* map, const pdcr_image* base,
                            const pdcr_render_spec* spec, pdcr_image** out) {
  return guarded([&] {
    require(map, "map");
    require(base, "base");
    require(out, "out");
    pdcr::RenderSpec rs;
    if (spec) {
      rs.normalization = spec->normalization == PDCR_NORMALIZE_FIXED
                             ? pdcr::RenderSpec::Normalization::kFixed
                             : pdcr::RenderSpec::Normalization::kPerMapMax;
      rs.scale = spec->scale;
      rs.overlay_alpha = spec->overlay_alpha;
      for (int c = 0; c < 3; ++c) rs.roi_outline[c] = spec->roi_outline[c];
    }
    *out = new pdcr_image{pdcr::render_map(map->value, base->value, rs)};
  });
}

pdcr_status pdcr_convergence_trace_json(const pdcr_model* model, const pdcr_image* image,
                                        const pdcr_mask* reference, pdcr_rect roi,
                                        int32_t patch_size, pdcr_reference_mode mode,
                                        size_t patch_index, const pdcr_bank* bank,
                                        const char* baseline, uint64_t seed,
                                        int32_t max_trials, char** out) {
  return guarded([&] {
    require(model, "model");
    require(image, "image");
    require(out, "out");
    const pdcr::PerturbationSource source = to_source(bank, baseline);
    const pdcr::Probe probe(*model->value, image->value, mask_or_null(reference),
                            to_rect(roi), patch_size, to_mode(mode));
    const pdcr::ConvergenceTrace trace =
        pdcr::convergence_trace(probe, patch_index, source, seed, max_trials);
    nlohmann::ordered_json doc;
    doc["model_id"] = model->identity;
    doc["perturbation"] = source.describe();
    doc["patch_index"] = trace.patch_index;
    doc["seed"] = seed;
    doc["m0"] = probe.m0();
    doc["running_ate"] = trace.running_ate;
    *out = dup_string(doc.dump(1) + "\n");
  });
}

pdcr_status pdcr_map_ranking(const pdcr_map* map, size_t* out, size_t capacity,
                             size_t* len) {
  return guarded([&] {
    require(map, "map");
    copy_ranking(pdcr::rank_patches(map->value), out, capacity, len);
  });
}

pdcr_status pdcr_random_ranking(const pdcr_map* map, uint64_t seed, size_t* out,
                                size_t capacity, size_t* len) {
  return guarded([&] {
    require(map, "map");
    copy_ranking(pdcr::random_ranking(map->value.grid, map->value.roi, seed), out, capacity,
                 len);
  });
}

pdcr_status pdcr_attribution_score_json(const pdcr_map* map, const pdcr_model* model,
                                        const pdcr_image* image, const pdcr_mask* reference,
                                        const size_t* ranking, size_t ranking_len,
                                        const pdcr_bank* bank, const char* baseline,
                                        int32_t k, int32_t repeats, uint64_t seed,
                                        uint32_t workers, char** out) {
  return guarded([&] {
    require(map, "map");
    require(model, "model");
    require(image, "image");
    require(out, "out");
    const pdcr::PdcrMap& m = map->value;
    const pdcr::PerturbationSource source = to_source(bank, baseline);
    const pdcr::Probe probe(*model->value, image->value, mask_or_null(reference), m.roi,
                            m.grid.patch_size(), m.config.reference_mode);
    const auto order = to_ranking(ranking, ranking_len);
    const auto result = pdcr::attribution_score(probe, order, source, k, repeats, seed,
                                                {std::max<uint32_t>(workers, 1)});
    *out = dup_string(pdcr::score_json(result));
  });
}

pdcr_status pdcr_attribution_curve_json(const pdcr_map* map, const pdcr_model* model,
                                        const pdcr_image* image, const pdcr_mask* reference,
                                        const size_t* ranking, size_t ranking_len,
                                        const pdcr_bank* bank, const char* baseline,
                                        int32_t max_steps, int32_t repeats, uint64_t seed,
                                        uint32_t workers, char** out) {
  return guarded([&] {
    require(map, "map");
    require(model, "model");
    require(image, "image");
    require(out, "out");
    const pdcr::PdcrMap& m = map->value;
    const pdcr::PerturbationSource source = to_source(bank, baseline);
    const pdcr::Probe probe(*model->value, image->value, mask_or_null(reference), m.roi,
                            m.grid.patch_size(), m.config.reference_mode);
    const auto order = to_ranking(ranking, ranking_len);
    const auto curve = pdcr::attribution_curve(probe, order, source, max_steps, repeats,
                                               seed, {std::max<uint32_t>(workers, 1)});
    *out = dup_string(pdcr::curve_json(curve, repeats));
  });
}

pdcr_status pdcr_aggregate_csv(const pdcr_map* const* maps, const char* const* labels,
                               size_t n, char** out) {
  return guarded([&] {
    require(out, "out");
    const auto all = collect_maps(maps, n);
    const auto edges = pdcr::default_bin_edges();
    std::vector<std::string> names;
    std::vector<pdcr::AggregateStats> stats;
    for (std::size_t i = 0; i < all.size(); ++i) {
      names.push_back(labels && labels[i] ? labels[i] : all[i].model_id);
      stats.push_back(pdcr::aggregate_stats(std::span(&all[i], 1), edges));
    }
    names.emplace_back("all");
    stats.push_back(pdcr::aggregate_stats(all, edges));
    *out = dup_string(pdcr::stats_csv(names, stats));
  });
}

pdcr_status pdcr_aggregate_json(const pdcr_map* const* maps, size_t n,
                                const double* bin_edges, size_t n_edges, char** out) {
  return guarded([&] {
    require(out, "out");
    const auto all = collect_maps(maps, n);
    std::vector<double> edges = pdcr::default_bin_edges();
    if (bin_edges) edges.assign(bin_edges, bin_edges + n_edges);
    *out = dup_string(pdcr::stats_json(pdcr::aggregate_stats(all, edges)));
  });
}

}  // extern "C"
