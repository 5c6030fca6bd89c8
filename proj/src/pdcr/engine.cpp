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

#include "pdcr/engine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pdcr/error.hpp"
#include "pdcr/parallel.hpp"

namespace pdcr {
namespace {

bool roi_empty(const Mask& mask, const Rect& roi) {
  for (int y = roi.y; y < roi.y + roi.h; ++y) {
    for (int x = roi.x; x < roi.x + roi.w; ++x) {
      if (mask.at(x, y)) return false;
    }
  }
  return true;
}

[[noreturn]] void rethrow_with_context(const Error& e, std::size_t patch,
                                       std::size_t trial) {
  throw Error(e.code(), "patch " + std::to_string(patch) + ", trial " +
                            std::to_string(trial) + ": " + e.what());
}

double run_trial(const Probe& probe, std::size_t patch_index,
                 const PerturbationSource& source, std::uint64_t seed,
                 std::size_t trial) {
  try {
    CounterRng stream = trial_stream(seed, patch_index, trial);
    const Block block =
        source.draw(probe.image(), probe.grid(), patch_index, stream);
    return ite(probe, patch_index, block);
  } catch (const Error& e) {
    rethrow_with_context(e, patch_index, trial);
  }
}

std::size_t effective_workers(const Segmenter& model,
                              const ExplainOptions& options) {
  return std::max<std::size_t>(1, std::min(options.workers, model.max_in_flight()));
}

}  // namespace

const char* reference_mode_name(ReferenceMode mode) {
  return mode == ReferenceMode::kGroundTruth ? "ground_truth" : "self_prediction";
}

ReferenceMode parse_reference_mode(const std::string& text) {
  if (text == "ground_truth" || text == "gt") return ReferenceMode::kGroundTruth;
  if (text == "self_prediction" || text == "self") return ReferenceMode::kSelfPrediction;
  fail(ErrorCode::kInvalidArgument, "unknown reference mode '" + text + "'");
}

void ExplainConfig::validate() const {
  if (patch_size < 1) fail(ErrorCode::kInvalidArgument, "patch size must be >= 1");
  if (screen_trials < 1) fail(ErrorCode::kInvalidArgument, "screen trials S must be >= 1");
  if (ate_trials < screen_trials) {
    fail(ErrorCode::kInvalidArgument, "ATE trials N must be >= screen trials S");
  }
  if (!(screen_threshold >= 0.0) || !std::isfinite(screen_threshold)) {
    fail(ErrorCode::kInvalidArgument, "screen threshold tau must be a finite value >= 0");
  }
}

Probe::Probe(const Segmenter& model, const Image& image, const Mask* reference,
             const Rect& roi, int patch_size, ReferenceMode mode)
    : model_(&model),
      image_(&image),
      roi_(roi),
      grid_(image.width(), image.height(), patch_size),
      mode_(mode) {
  check_rect_within(roi, image.width(), image.height(), "roi");
  Mask prediction = model.predict(image);
  calls_ = 1;
  if (prediction.width() != image.width() || prediction.height() != image.height()) {
    fail(ErrorCode::kModel, "model returned a mask of the wrong size");
  }
  if (mode == ReferenceMode::kGroundTruth) {
    if (!reference) {
      fail(ErrorCode::kInvalidArgument, "ground-truth mode needs a reference mask");
    }
    if (reference->width() != image.width() || reference->height() != image.height()) {
      fail(ErrorCode::kShape, "reference mask does not match image dimensions");
    }
    reference_ = *reference;
  } else {
    reference_ = prediction;
  }
  m0_ = roi_dsc(prediction, reference_, roi_);
  degenerate_ = roi_empty(prediction, roi_) && roi_empty(reference_, roi_);
}

double Probe::evaluate(const Image& perturbed) const {
  calls_.fetch_add(1, std::memory_order_relaxed);
  const Mask pred = model_->predict(perturbed);
  if (pred.width() != reference_.width() || pred.height() != reference_.height()) {
    fail(ErrorCode::kModel, "model returned a " + std::to_string(pred.width()) + "x" +
                                std::to_string(pred.height()) + " mask for a " +
                                std::to_string(perturbed.width()) + "x" +
                                std::to_string(perturbed.height()) + " image");
  }
  return roi_dsc(pred, reference_, roi_);
}

CounterRng trial_stream(std::uint64_t seed, std::size_t patch_index,
                        std::size_t trial) {
  return CounterRng(seed, StreamTag::kTrial, patch_index, trial);
}

double ite(const Probe& probe, std::size_t patch_index, const Block& block) {
  return probe.evaluate(
             apply_intervention(probe.image(), probe.grid(), patch_index, block)) -
         probe.m0();
}

ScreenOutcome screen_patch(const Probe& probe, std::size_t patch_index,
                           const PerturbationSource& source,
                           const ExplainConfig& config) {
  ScreenOutcome out;
  out.ites.reserve(static_cast<std::size_t>(config.screen_trials));
  for (int s = 0; s < config.screen_trials; ++s) {
    const double e = run_trial(probe, patch_index, source, config.seed,
                               static_cast<std::size_t>(s));
    out.ites.push_back(e);
    if (!(std::abs(e) < config.screen_threshold)) out.relevant = true;
  }
  return out;
}

double ate_patch(const Probe& probe, std::size_t patch_index,
                 const PerturbationSource& source, const ExplainConfig& config,
                 const std::vector<double>& carried_ites) {
  const auto n = static_cast<std::size_t>(config.ate_trials);
  if (carried_ites.size() > n) {
    fail(ErrorCode::kInvalidArgument, "more carried ITEs than ATE trials");
  }
  double sum = 0.0;
  for (double e : carried_ites) sum += e;
  for (std::size_t t = carried_ites.size(); t < n; ++t) {
    sum += run_trial(probe, patch_index, source, config.seed, t);
  }
  return sum / static_cast<double>(n);
}

PdcrMap explain(const Segmenter& model, const Image& image,
                const Mask* reference, const Rect& roi,
                const PerturbationSource& source, const ExplainConfig& config,
                const ExplainOptions& options) {
  config.validate();
  const Probe probe(model, image, reference, roi, config.patch_size,
                    config.reference_mode);
  source.check_compatible(probe.grid(), image.channels());

  const PatchGrid& grid = probe.grid();
  std::vector<PatchVerdict> verdicts(grid.size());
  std::vector<bool> in_roi(grid.size(), false);
  for (std::size_t i : patches_overlapping(grid, roi)) in_roi[i] = true;

  try {
    parallel_for(grid.size(), effective_workers(model, options), [&](std::size_t i) {
      if (in_roi[i]) {
        verdicts[i] = PatchVerdict::roi_member();
        return;
      }
      ScreenOutcome screen = screen_patch(probe, i, source, config);
      if (!screen.relevant) {
        verdicts[i] = PatchVerdict::irrelevant(config.screen_trials);
        return;
      }
      verdicts[i] = PatchVerdict::effect(
          ate_patch(probe, i, source, config, screen.ites), config.ate_trials);
    });
  } catch (const Error& e) {
    throw Error(e.code(), std::string("explanation aborted: ") + e.what());
  }

  PdcrMap map;
  map.grid = grid;
  map.roi = roi;
  map.m0 = probe.m0();
  map.verdicts = std::move(verdicts);
  map.config = config;
  map.model_id = model.identity();
  map.perturbation = source.describe();
  map.total_model_calls = probe.model_calls();
  map.degenerate = probe.degenerate();
  return map;
}

ConvergenceTrace convergence_trace(const Probe& probe, std::size_t patch_index,
                                   const PerturbationSource& source,
                                   std::uint64_t seed, int max_trials) {
  if (max_trials < 1) fail(ErrorCode::kInvalidArgument, "max_trials must be >= 1");
  const auto roi_patches = patches_overlapping(probe.grid(), probe.roi());
  if (std::find(roi_patches.begin(), roi_patches.end(), patch_index) !=
      roi_patches.end()) {
    fail(ErrorCode::kInvalidArgument,
         "patch " + std::to_string(patch_index) + " overlaps the roi");
  }
  source.check_compatible(probe.grid(), probe.image().channels());
  ConvergenceTrace trace;
  trace.patch_index = patch_index;
  trace.running_ate.reserve(static_cast<std::size_t>(max_trials));
  double sum = 0.0;
  for (std::size_t t = 0; t < static_cast<std::size_t>(max_trials); ++t) {
    sum += run_trial(probe, patch_index, source, seed, t);
    trace.running_ate.push_back(sum / static_cast<double>(t + 1));
  }
  return trace;
}

DenseSweep dense_sweep(const Probe& probe, const PerturbationSource& source,
                       int trials, std::uint64_t seed,
                       const ExplainOptions& options) {
  if (trials < 1) fail(ErrorCode::kInvalidArgument, "trials must be >= 1");
  source.check_compatible(probe.grid(), probe.image().channels());
  const std::uint64_t before = probe.model_calls();
  DenseSweep sweep;
  sweep.ate.resize(probe.grid().size());
  parallel_for(sweep.ate.size(), effective_workers(probe.model(), options),
               [&](std::size_t i) {
                 double sum = 0.0;
                 for (std::size_t t = 0; t < static_cast<std::size_t>(trials); ++t) {
                   sum += run_trial(probe, i, source, seed, t);
                 }
                 sweep.ate[i] = sum / trials;
               });
  sweep.intervention_calls = probe.model_calls() - before;
  return sweep;
}

std::uint64_t expected_model_calls(const PdcrMap& map) {
  std::uint64_t calls = 1;
  for (const PatchVerdict& v : map.verdicts) {
    if (v.kind == PatchVerdict::Kind::kIrrelevant) {
      calls += static_cast<std::uint64_t>(map.config.screen_trials);
    } else if (v.kind == PatchVerdict::Kind::kAte) {
      calls += static_cast<std::uint64_t>(map.config.ate_trials);
    }
  }
  return calls;
}

}  // namespace pdcr
