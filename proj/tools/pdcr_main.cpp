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

// pdcr command-line front end. Talks to the engine only through the C API.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "pdcr/pdcr.h"

namespace {

constexpr int kExitDomainError = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(pdcr_status status, const std::string& what) {
  if (status != PDCR_OK) {
    throw DomainError(what + ": " + pdcr_status_name(status) + ": " + pdcr_last_error());
  }
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using ImagePtr = std::unique_ptr<pdcr_image, Deleter<pdcr_image, pdcr_image_free>>;
using MaskPtr = std::unique_ptr<pdcr_mask, Deleter<pdcr_mask, pdcr_mask_free>>;
using BankPtr = std::unique_ptr<pdcr_bank, Deleter<pdcr_bank, pdcr_bank_free>>;
using ModelPtr = std::unique_ptr<pdcr_model, Deleter<pdcr_model, pdcr_model_free>>;
using MapPtr = std::unique_ptr<pdcr_map, Deleter<pdcr_map, pdcr_map_free>>;

struct OwnedString {
  char* text = nullptr;
  ~OwnedString() { pdcr_string_free(text); }
};

ImagePtr load_image(const std::string& path) {
  pdcr_image* out = nullptr;
  check(pdcr_image_load_png(path.c_str(), &out), "loading image " + path);
  return ImagePtr(out);
}

MaskPtr load_mask(const std::string& path) {
  pdcr_mask* out = nullptr;
  check(pdcr_mask_load_png(path.c_str(), &out), "loading mask " + path);
  return MaskPtr(out);
}

BankPtr load_bank(const std::string& path) {
  pdcr_bank* out = nullptr;
  check(pdcr_bank_load(path.c_str(), &out), "loading bank " + path);
  return BankPtr(out);
}

MapPtr load_map(const std::string& path) {
  pdcr_map* out = nullptr;
  check(pdcr_map_load(path.c_str(), &out), "loading map " + path);
  return MapPtr(out);
}

void write_file(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !out.write(text.data(), static_cast<std::streamsize>(text.size()))) {
    throw DomainError("cannot write " + path);
  }
}

void need(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string("missing required option ") + flag);
}

std::uint64_t parse_u64(const std::string& text, const char* what) {
  std::size_t used = 0;
  std::uint64_t value = 0;
  try {
    value = std::stoull(text, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || text.front() == '-') {
    throw UsageError(std::string("invalid ") + what + " '" + text + "'");
  }
  return value;
}

// "x,y" (32x32 default extent) or "x,y,w,h".
pdcr_rect parse_roi(const std::string& text) {
  std::vector<int> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw UsageError("invalid --roi '" + text + "'");
    }
  }
  if (parts.size() == 2) return {parts[0], parts[1], 32, 32};
  if (parts.size() == 4) return {parts[0], parts[1], parts[2], parts[3]};
  throw UsageError("--roi must be x,y or x,y,w,h");
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// Options shared by every subcommand that queries a model.
struct ModelArgs {
  std::string model;
  double timeout = 60.0;
  unsigned max_in_flight = 32;

  void add(CLI::App* app) {
    app->add_option("--model", model,
                    "Model URI: ref:<name>?..., cmd:<command> or tcp:<host>:<port>");
    app->add_option("--timeout", timeout, "Per-request timeout for gateway models (s)");
    app->add_option("--max-in-flight", max_in_flight,
                    "Client-side concurrency limit for gateway models");
  }

  ModelPtr open() const {
    need(model, "--model");
    pdcr_gateway_options options;
    pdcr_gateway_options_init(&options);
    options.request_timeout_s = timeout;
    options.max_in_flight = max_in_flight;
    pdcr_model* out = nullptr;
    check(pdcr_model_open(model.c_str(), &options, &out), "opening model " + model);
    return ModelPtr(out);
  }
};

struct PerturbationArgs {
  std::string bank;
  std::string baseline;

  void add(CLI::App* app) {
    auto* b = app->add_option("--bank", bank, "Perturbation bank file");
    auto* l = app->add_option("--baseline", baseline,
                              "Classic perturbation instead of a bank: zero, mean, "
                              "noise:<sigma>, blur:<radius>");
    b->excludes(l);
  }

  void validate() const {
    if (bank.empty() == baseline.empty()) {
      throw UsageError("give exactly one of --bank and --baseline");
    }
  }

  BankPtr load() const { return bank.empty() ? BankPtr() : load_bank(bank); }
  const char* baseline_or_null() const { return baseline.empty() ? nullptr : baseline.c_str(); }
};

std::uint64_t effective_seed(std::uint64_t flag_seed) {
  if (const char* env = std::getenv("PDCR_SEED"); env && *env) {
    return parse_u64(env, "PDCR_SEED");
  }
  return flag_seed;
}

unsigned default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// --- bank build ------------------------------------------------------------

struct BankBuildCmd {
  std::vector<std::string> sources;
  int block = 8;
  std::uint32_t count = 10000;
  std::uint64_t seed = 0;
  std::string out;

  void add(CLI::App* app) {
    app->add_option("--source", sources, "Held-out source images (PNG)")->expected(1, -1);
    app->add_option("--block", block, "Block size in pixels");
    app->add_option("--count", count, "Number of blocks");
    app->add_option("--seed", seed, "Random seed (PDCR_SEED overrides)");
    app->add_option("--out", out, "Output bank file");
  }

  int run() {
    if (sources.empty()) throw UsageError("missing required option --source");
    need(out, "--out");
    seed = effective_seed(seed);
    std::cout << "pdcr bank build: seed=" << seed << " block=" << block << " count=" << count
              << " sources=" << sources.size() << "\n";
    std::vector<ImagePtr> images;
    std::vector<const pdcr_image*> raw;
    std::vector<const char*> names;
    for (const auto& path : sources) {
      images.push_back(load_image(path));
      raw.push_back(images.back().get());
      names.push_back(path.c_str());
    }
    pdcr_bank* bank = nullptr;
    check(pdcr_bank_build(raw.data(), names.data(), raw.size(), block, count, seed, &bank),
          "building bank");
    BankPtr owned(bank);
    check(pdcr_bank_save(bank, out.c_str()), "writing bank");
    char digest[65];
    pdcr_bank_info(bank, nullptr, nullptr, nullptr, digest);
    std::cout << "wrote " << out << " (source digest " << digest << ")\n";
    return 0;
  }
};

// --- explain ---------------------------------------------------------------

struct ExplainCmd {
  std::string image, gt, roi = "", out;
  ModelArgs model;
  PerturbationArgs perturbation;
  int patch = 8;
  int screen = 3;
  double tau = 0.02;
  int trials = 50;
  std::uint64_t seed = 0;
  std::string reference = "ground_truth";
  unsigned workers = default_workers();
  bool print_config = false;

  void add(CLI::App* app) {
    app->add_option("--image", image, "Input image (PNG)");
    app->add_option("--gt", gt, "Ground-truth mask (PNG); required in ground_truth mode");
    app->add_option("--roi", roi, "Region of interest: x,y (32x32) or x,y,w,h");
    model.add(app);
    perturbation.add(app);
    app->add_option("--out", out, "Output map JSON ('-' for stdout)");
    app->add_option("--patch", patch, "Patch size P");
    app->add_option("--screen", screen, "Screening trials S");
    app->add_option("--tau", tau, "Screening threshold tau (DSC units)");
    app->add_option("--trials", trials, "ATE trials N");
    app->add_option("--seed", seed, "Random seed (PDCR_SEED overrides)");
    app->add_option("--reference", reference, "ground_truth (gt) or self_prediction (self)");
    app->add_option("--workers", workers, "Concurrent model evaluations");
    app->add_flag("--print-config", print_config, "Print the effective configuration and exit");
  }

  pdcr_reference_mode mode() const {
    if (reference == "ground_truth" || reference == "gt") return PDCR_REFERENCE_GROUND_TRUTH;
    if (reference == "self_prediction" || reference == "self") {
      return PDCR_REFERENCE_SELF_PREDICTION;
    }
    throw UsageError("--reference must be ground_truth or self_prediction");
  }

  int run() {
    seed = effective_seed(seed);
    const pdcr_rect r = roi.empty() ? pdcr_rect{0, 0, 32, 32} : parse_roi(roi);
    const pdcr_reference_mode m = mode();
    std::cout << "pdcr explain: seed=" << seed << " patch=" << patch << " screen=" << screen
              << " tau=" << fmt_double(tau) << " trials=" << trials << " roi=" << r.x << ","
              << r.y << "," << r.w << "," << r.h << " roi_size=" << r.w << "x" << r.h
              << " reference="
              << (m == PDCR_REFERENCE_GROUND_TRUTH ? "ground_truth" : "self_prediction")
              << " workers=" << workers << "\n";
    if (print_config) return 0;

    need(image, "--image");
    need(roi, "--roi");
    need(out, "--out");
    if (m == PDCR_REFERENCE_GROUND_TRUTH) need(gt, "--gt");
    perturbation.validate();

    const ImagePtr img = load_image(image);
    const MaskPtr mask = gt.empty() ? MaskPtr() : load_mask(gt);
    const BankPtr bank = perturbation.load();
    const ModelPtr mdl = model.open();
    std::cout << "model: " << pdcr_model_identity(mdl.get()) << "\n";

    pdcr_explain_config cfg;
    pdcr_explain_config_init(&cfg);
    cfg.patch_size = patch;
    cfg.screen_trials = screen;
    cfg.screen_threshold = tau;
    cfg.ate_trials = trials;
    cfg.seed = seed;
    cfg.reference_mode = m;
    cfg.workers = workers;
    pdcr_map* map = nullptr;
    check(pdcr_explain(mdl.get(), img.get(), mask.get(), r, bank.get(),
                       perturbation.baseline_or_null(), &cfg, &map),
          "explain");
    const MapPtr owned(map);
    check(pdcr_map_save(map, out.c_str()), "writing map");

    pdcr_map_summary s;
    pdcr_map_summarize(map, &s);
    std::cout << "m0=" << fmt_double(s.m0) << " roi_patches=" << s.roi_patches
              << " irrelevant=" << s.irrelevant_patches << " ate=" << s.ate_patches
              << " model_calls=" << s.total_model_calls << "\n";
    if (s.degenerate) {
      std::cout << "warning: degenerate map (prediction and reference are both empty in "
                   "the roi; only degradations are observable)\n";
    }
    if (m == PDCR_REFERENCE_SELF_PREDICTION) {
      std::cout << "note: self_prediction mode compares against the model's own output\n";
    }
    return 0;
  }
};

// --- render ----------------------------------------------------------------

struct RenderCmd {
  std::string map, image, out;
  double alpha = 0.6;
  double scale = 0.0;
  std::vector<int> outline = {0, 255, 0};

  void add(CLI::App* app) {
    app->add_option("--map", map, "Map JSON");
    app->add_option("--image", image, "Base image (PNG)");
    app->add_option("--out", out, "Output PNG");
    app->add_option("--alpha", alpha, "Overlay opacity in [0,1]");
    app->add_option("--scale", scale,
                    "Fixed |ATE| that saturates the colour (default: per-map maximum)");
    app->add_option("--outline", outline, "RoI outline colour r g b")->expected(3);
  }

  int run() {
    need(map, "--map");
    need(image, "--image");
    need(out, "--out");
    std::cout << "pdcr render: alpha=" << fmt_double(alpha) << " normalization="
              << (scale > 0 ? "fixed:" + fmt_double(scale) : std::string("per_map_max"))
              << "\n";
    const MapPtr m = load_map(map);
    const ImagePtr base = load_image(image);
    pdcr_render_spec spec;
    pdcr_render_spec_init(&spec);
    spec.overlay_alpha = alpha;
    if (scale > 0) {
      spec.normalization = PDCR_NORMALIZE_FIXED;
      spec.scale = scale;
    }
    for (int c = 0; c < 3; ++c) spec.roi_outline[c] = static_cast<std::uint8_t>(outline[c]);
    pdcr_image* rendered = nullptr;
    check(pdcr_render_map(m.get(), base.get(), &spec, &rendered), "render");
    const ImagePtr owned(rendered);
    check(pdcr_image_save_png(rendered, out.c_str()), "writing " + out);
    return 0;
  }
};

// --- trace -----------------------------------------------------------------

struct TraceCmd {
  std::string image, gt, roi, out;
  ModelArgs model;
  PerturbationArgs perturbation;
  int patch = 8;
  std::int64_t patch_index = -1;
  int max_trials = 500;
  std::uint64_t seed = 0;
  std::string reference = "ground_truth";

  void add(CLI::App* app) {
    app->add_option("--image", image, "Input image (PNG)");
    app->add_option("--gt", gt, "Ground-truth mask (PNG)");
    app->add_option("--roi", roi, "Region of interest: x,y (32x32) or x,y,w,h");
    model.add(app);
    perturbation.add(app);
    app->add_option("--patch", patch, "Patch size P");
    app->add_option("--patch-index", patch_index, "Patch to trace");
    app->add_option("--max-trials", max_trials, "Number of trials");
    app->add_option("--seed", seed, "Random seed (PDCR_SEED overrides)");
    app->add_option("--reference", reference, "ground_truth or self_prediction");
    app->add_option("--out", out, "Output JSON ('-' for stdout)");
  }

  int run() {
    seed = effective_seed(seed);
    need(image, "--image");
    need(roi, "--roi");
    if (patch_index < 0) throw UsageError("missing required option --patch-index");
    perturbation.validate();
    const pdcr_rect r = parse_roi(roi);
    const pdcr_reference_mode m = (reference == "self_prediction" || reference == "self")
                                      ? PDCR_REFERENCE_SELF_PREDICTION
                                      : PDCR_REFERENCE_GROUND_TRUTH;
    if (m == PDCR_REFERENCE_GROUND_TRUTH) need(gt, "--gt");
    std::cout << "pdcr trace: seed=" << seed << " patch=" << patch
              << " patch_index=" << patch_index << " max_trials=" << max_trials << "\n";
    const ImagePtr img = load_image(image);
    const MaskPtr mask = gt.empty() ? MaskPtr() : load_mask(gt);
    const BankPtr bank = perturbation.load();
    const ModelPtr mdl = model.open();
    OwnedString json;
    check(pdcr_convergence_trace_json(mdl.get(), img.get(), mask.get(), r, patch, m,
                                      static_cast<size_t>(patch_index), bank.get(),
                                      perturbation.baseline_or_null(), seed, max_trials,
                                      &json.text),
          "trace");
    write_file(out, json.text);
    return 0;
  }
};

// --- eval score|curve ------------------------------------------------------

struct EvalCmd {
  std::string map, image, gt, out;
  ModelArgs model;
  PerturbationArgs perturbation;
  std::string ranking = "pdcr";
  std::uint64_t ranking_seed = 0;
  int k = 10;
  int repeats = 20;
  std::uint64_t seed = 0;
  unsigned workers = default_workers();

  void add(CLI::App* app, bool curve) {
    app->add_option("--map", map, "Map JSON providing the ranking, RoI and geometry");
    app->add_option("--image", image, "Input image (PNG)");
    app->add_option("--gt", gt, "Ground-truth mask (PNG)");
    model.add(app);
    perturbation.add(app);
    app->add_option("--ranking", ranking, "pdcr (from the map) or random");
    app->add_option("--ranking-seed", ranking_seed, "Seed for --ranking random");
    app->add_option(curve ? "--steps" : "--k", k,
                    curve ? "Number of progressive steps" : "Number of top patches");
    app->add_option("--repeats", repeats, "Repeats per point");
    app->add_option("--seed", seed, "Random seed (PDCR_SEED overrides)");
    app->add_option("--workers", workers, "Concurrent model evaluations");
    app->add_option("--out", out, "Output JSON ('-' for stdout)");
  }

  int run(bool curve) {
    seed = effective_seed(seed);
    need(map, "--map");
    need(image, "--image");
    perturbation.validate();
    if (ranking != "pdcr" && ranking != "random") {
      throw UsageError("--ranking must be pdcr or random");
    }
    std::cout << "pdcr eval " << (curve ? "curve" : "score") << ": seed=" << seed
              << (curve ? " steps=" : " k=") << k << " repeats=" << repeats
              << " ranking=" << ranking << "\n";
    const MapPtr m = load_map(map);
    const ImagePtr img = load_image(image);
    const MaskPtr mask = gt.empty() ? MaskPtr() : load_mask(gt);
    const BankPtr bank = perturbation.load();
    const ModelPtr mdl = model.open();
    pdcr_map_summary s;
    pdcr_map_summarize(m.get(), &s);
    std::vector<size_t> order(s.patch_count);
    size_t len = 0;
    if (ranking == "pdcr") {
      check(pdcr_map_ranking(m.get(), order.data(), order.size(), &len), "ranking");
    } else {
      check(pdcr_random_ranking(m.get(), ranking_seed, order.data(), order.size(), &len),
            "ranking");
    }
    OwnedString json;
    if (curve) {
      check(pdcr_attribution_curve_json(m.get(), mdl.get(), img.get(), mask.get(), order.data(),
                                        len, bank.get(), perturbation.baseline_or_null(), k,
                                        repeats, seed, workers, &json.text),
            "attribution curve");
    } else {
      check(pdcr_attribution_score_json(m.get(), mdl.get(), img.get(), mask.get(), order.data(),
                                        len, bank.get(), perturbation.baseline_or_null(), k,
                                        repeats, seed, workers, &json.text),
            "attribution score");
    }
    write_file(out, json.text);
    return 0;
  }
};

// --- aggregate -------------------------------------------------------------

struct AggregateCmd {
  std::vector<std::string> maps;
  std::string csv, json;
  std::vector<double> bins;

  void add(CLI::App* app) {
    app->add_option("--map", maps, "Map JSON files")->expected(1, -1);
    app->add_option("--csv", csv, "Output CSV ('-' for stdout)");
    app->add_option("--json", json, "Output JSON with the pooled histogram");
    app->add_option("--bins", bins, "Histogram bin edges over contribution -ATE")
        ->expected(2, -1);
  }

  int run() {
    if (maps.empty()) throw UsageError("missing required option --map");
    std::cout << "pdcr aggregate: maps=" << maps.size() << "\n";
    std::vector<MapPtr> owned;
    std::vector<const pdcr_map*> raw;
    std::vector<const char*> labels;
    for (const auto& path : maps) {
      owned.push_back(load_map(path));
      raw.push_back(owned.back().get());
      labels.push_back(path.c_str());
    }
    OwnedString table;
    check(pdcr_aggregate_csv(raw.data(), labels.data(), raw.size(), &table.text), "aggregate");
    write_file(csv, table.text);
    if (!json.empty()) {
      OwnedString doc;
      check(pdcr_aggregate_json(raw.data(), raw.size(), bins.empty() ? nullptr : bins.data(),
                                bins.size(), &doc.text),
            "aggregate");
      write_file(json, doc.text);
    }
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pdcr: causal patch attribution for black-box image segmenters"};
  app.require_subcommand(1);
  app.set_version_flag("--version", pdcr_version());

  auto* bank = app.add_subcommand("bank", "Perturbation bank tools");
  bank->require_subcommand(1);
  BankBuildCmd bank_build;
  bank_build.add(bank->add_subcommand("build", "Build a bank from held-out images"));

  ExplainCmd explain;
  explain.add(app.add_subcommand("explain", "Compute a causal attribution map"));
  RenderCmd render;
  render.add(app.add_subcommand("render", "Render a map over its image"));
  TraceCmd trace;
  trace.add(app.add_subcommand("trace", "Running ATE of one patch"));

  auto* eval = app.add_subcommand("eval", "Attribution evaluation");
  eval->require_subcommand(1);
  EvalCmd score, curve;
  score.add(eval->add_subcommand("score", "Joint top-k deletion score"), false);
  curve.add(eval->add_subcommand("curve", "Progressive deletion curve"), true);

  AggregateCmd aggregate;
  aggregate.add(app.add_subcommand("aggregate", "Pool statistics over maps"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (bank->got_subcommand("build")) return bank_build.run();
    if (app.got_subcommand("explain")) return explain.run();
    if (app.got_subcommand("render")) return render.run();
    if (app.got_subcommand("trace")) return trace.run();
    if (eval->got_subcommand("score")) return score.run(false);
    if (eval->got_subcommand("curve")) return curve.run(true);
    if (app.got_subcommand("aggregate")) return aggregate.run();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDomainError;
  }
  return kExitUsage;
}
