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

#ifndef PDCR_ENGINE_HPP_
#define PDCR_ENGINE_HPP_

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pdcr/bank.hpp"
#include "pdcr/imaging.hpp"
#include "pdcr/segmenter.hpp"

namespace pdcr {

enum class ReferenceMode {
  // DSC against the supplied ground-truth mask inside the RoI.
  kGroundTruth,
  // DSC against the model's own unperturbed prediction (m0 is then 1).
  kSelfPrediction,
};

const char* reference_mode_name(ReferenceMode mode);
ReferenceMode parse_reference_mode(const std::string& text);

struct ExplainConfig {
  int patch_size = 8;
  int screen_trials = 3;           // S
  double screen_threshold = 0.02;  // tau
  int ate_trials = 50;             // N
  std::uint64_t seed = 0;
  ReferenceMode reference_mode = ReferenceMode::kGroundTruth;

  // Throws kInvalidArgument unless S >= 1, N >= S, tau >= 0, P >= 1.
  void validate() const;

  bool operator==(const ExplainConfig&) const = default;
};

struct PatchVerdict {
  enum class Kind { kRoiMember, kIrrelevant, kAte };

  Kind kind = Kind::kIrrelevant;
  double ate = 0.0;  // meaningful for kAte only
  int trials = 0;    // model evaluations spent on this patch

  static PatchVerdict roi_member() { return {Kind::kRoiMember, 0.0, 0}; }
  static PatchVerdict irrelevant(int trials) {
    return {Kind::kIrrelevant, 0.0, trials};
  }
  static PatchVerdict effect(double ate, int trials) {
    return {Kind::kAte, ate, trials};
  }

  // Value used for ranking and statistics: the ATE, or 0 when irrelevant.
  double value() const { return kind == Kind::kAte ? ate : 0.0; }

  bool operator==(const PatchVerdict&) const = default;
};

// Per-patch causal verdicts around one RoI. ATE < 0 marks a patch whose
// destruction hurts the RoI (positive contribution, drawn red); ATE > 0 a
// patch whose destruction helps it (negative contribution, drawn blue).
struct PdcrMap {
  PatchGrid grid;
  Rect roi;
  double m0 = 0.0;
  std::vector<PatchVerdict> verdicts;
  ExplainConfig config;
  std::string model_id;
  std::string perturbation;
  std::uint64_t total_model_calls = 0;
  // Prediction and reference both empty inside the RoI: only degradations
  // are observable.
  bool degenerate = false;

  bool operator==(const PdcrMap&) const = default;
};

struct ConvergenceTrace {
  std::size_t patch_index = 0;
  // Entry t-1 is the mean of the first t ITEs.
  std::vector<double> running_ate;
};

struct ExplainOptions {
  // Concurrent model evaluations; clamped to the model's max_in_flight().
  std::size_t workers = 1;
};

// Binds a model, an image and the observed RoI, and measures the RoI Dice
// score of perturbed inputs. Construction evaluates the unperturbed image
// once to obtain m0. Thread-safe for concurrent evaluate() calls.
class Probe {
 public:
  // `reference` may be null only in kSelfPrediction mode.
  Probe(const Segmenter& model, const Image& image, const Mask* reference,
        const Rect& roi, int patch_size, ReferenceMode mode);

  Probe(const Probe&) = delete;
  Probe& operator=(const Probe&) = delete;

  const Segmenter& model() const { return *model_; }
  const Image& image() const { return *image_; }
  const Mask& reference() const { return reference_; }
  const Rect& roi() const { return roi_; }
  const PatchGrid& grid() const { return grid_; }
  ReferenceMode mode() const { return mode_; }
  double m0() const { return m0_; }
  bool degenerate() const { return degenerate_; }

  // roi_dsc(model(perturbed), reference, roi); one model call.
  double evaluate(const Image& perturbed) const;

  std::uint64_t model_calls() const { return calls_.load(); }

 private:
  const Segmenter* model_;
  const Image* image_;
  Mask reference_;
  Rect roi_;
  PatchGrid grid_;
  ReferenceMode mode_;
  double m0_ = 0.0;
  bool degenerate_ = false;
  mutable std::atomic<std::uint64_t> calls_{0};
};

// Replacement-block stream for trial `trial` of patch `patch_index`.
CounterRng trial_stream(std::uint64_t seed, std::size_t patch_index,
                        std::size_t trial);

// Effect of do(patch := block) on the RoI Dice score: M_b - m0.
double ite(const Probe& probe, std::size_t patch_index, const Block& block);

struct ScreenOutcome {
  bool relevant = false;
  std::vector<double> ites;  // the S screening ITEs, trial order
};

// Draws S blocks; irrelevant iff every |ITE| < tau.
ScreenOutcome screen_patch(const Probe& probe, std::size_t patch_index,
                           const PerturbationSource& source,
                           const ExplainConfig& config);

// Mean of N ITEs: the carried screening ITEs followed by N - |carried|
// fresh trials, summed in ascending trial order.
double ate_patch(const Probe& probe, std::size_t patch_index,
                 const PerturbationSource& source, const ExplainConfig& config,
                 const std::vector<double>& carried_ites);

PdcrMap explain(const Segmenter& model, const Image& image,
                const Mask* reference, const Rect& roi,
                const PerturbationSource& source, const ExplainConfig& config,
                const ExplainOptions& options = {});

ConvergenceTrace convergence_trace(const Probe& probe, std::size_t patch_index,
                                   const PerturbationSource& source,
                                   std::uint64_t seed, int max_trials);

// Unpruned estimator: N trials for every one of the K patches, RoI members
// included, with no screening. The call count is the cost the coarse-to-fine
// screen avoids.
struct DenseSweep {
  std::vector<double> ate;
  std::uint64_t intervention_calls = 0;
};
DenseSweep dense_sweep(const Probe& probe, const PerturbationSource& source,
                       int trials, std::uint64_t seed,
                       const ExplainOptions& options = {});

// Closed-form total_model_calls for a finished map:
// 1 + S per irrelevant patch + N per ATE patch.
std::uint64_t expected_model_calls(const PdcrMap& map);

}  // namespace pdcr

#endif  // PDCR_ENGINE_HPP_
