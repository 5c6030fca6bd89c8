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

#ifndef PDCR_EVALUATION_HPP_
#define PDCR_EVALUATION_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pdcr/engine.hpp"

namespace pdcr {

// Non-RoI patches ordered by contribution: most negative ATE first,
// irrelevant patches count as 0, ties broken by ascending index.
std::vector<std::size_t> rank_patches(const PdcrMap& map);

// Seeded uniform permutation of the non-RoI patches.
std::vector<std::size_t> random_ranking(const PatchGrid& grid, const Rect& roi,
                                        std::uint64_t seed);

struct AttributionResult {
  double score = 0.0;  // mean of per_repeat_drops
  int k = 0;
  int repeats = 0;
  std::vector<double> per_repeat_drops;
};

struct AttributionCurve {
  std::vector<int> steps;         // 1, 2, ..., max_steps
  std::vector<double> mean_drop;  // mean RoI Dice drop at each step
};

// Joint top-k deletion: each repeat replaces the first k ranked patches at
// once with fresh blocks and records m0 - RoI Dice. The block for patch i in
// repeat r depends only on (seed, r, i), so the curve at step k reproduces
// attribution_score(k) exactly.
AttributionResult attribution_score(const Probe& probe,
                                    std::span<const std::size_t> ranking,
                                    const PerturbationSource& source, int k,
                                    int repeats, std::uint64_t seed,
                                    const ExplainOptions& options = {});

AttributionCurve attribution_curve(const Probe& probe,
                                   std::span<const std::size_t> ranking,
                                   const PerturbationSource& source,
                                   int max_steps, int repeats,
                                   std::uint64_t seed,
                                   const ExplainOptions& options = {});

struct AggregateStats {
  std::size_t patches = 0;  // pooled non-RoI verdicts
  double pos_pct = 0.0;     // ATE < 0
  double neg_pct = 0.0;     // ATE > 0
  double irr_pct = 0.0;     // irrelevant, or ATE exactly 0
  double min_ate = 0.0;
  double max_ate = 0.0;
  // Histogram of contribution c = -ATE over ATE verdicts. Bin i counts
  // bin_edges[i] <= c < bin_edges[i+1]; the last bin is closed.
  std::vector<double> bin_edges;
  std::vector<std::uint64_t> histogram;
  std::uint64_t underflow = 0;
  std::uint64_t overflow = 0;
};

// {-1, -0.2, -0.02, 0.02, 0.2, 1}.
std::vector<double> default_bin_edges();

AggregateStats aggregate_stats(std::span<const PdcrMap> maps,
                               std::span<const double> bin_edges);

inline constexpr const char* kAttributionMetricNote =
    "interpretation: mean RoI Dice drop after jointly replacing the top-k "
    "ranked patches with perturbation blocks";

// Header plus one row per (label, stats) pair.
std::string stats_csv(std::span<const std::string> labels,
                      std::span<const AggregateStats> stats);
std::string stats_json(const AggregateStats& stats);
std::string score_json(const AttributionResult& result);
std::string curve_json(const AttributionCurve& curve, int repeats);

}  // namespace pdcr

#endif  // PDCR_EVALUATION_HPP_
