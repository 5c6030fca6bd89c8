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

#include "pdcr/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "pdcr/error.hpp"
#include "pdcr/parallel.hpp"

namespace pdcr {
namespace {

std::vector<bool> roi_membership(const PatchGrid& grid, const Rect& roi) {
  std::vector<bool> in_roi(grid.size(), false);
  for (std::size_t i : patches_overlapping(grid, roi)) in_roi[i] = true;
  return in_roi;
}

void check_ranking(const Probe& probe, std::span<const std::size_t> ranking,
                   int k) {
  const PatchGrid& grid = probe.grid();
  const std::vector<bool> in_roi = roi_membership(grid, probe.roi());
  std::vector<bool> seen(grid.size(), false);
  for (std::size_t i : ranking) {
    if (i >= grid.size()) {
      fail(ErrorCode::kInvalidArgument, "ranking holds invalid patch " + std::to_string(i));
    }
    if (in_roi[i]) {
      fail(ErrorCode::kInvalidArgument, "ranking holds roi patch " + std::to_string(i));
    }
    if (seen[i]) {
      fail(ErrorCode::kInvalidArgument, "ranking repeats patch " + std::to_string(i));
    }
    seen[i] = true;
  }
  const auto outside = static_cast<std::size_t>(std::count(in_roi.begin(), in_roi.end(), false));
  if (ranking.size() != outside) {
    fail(ErrorCode::kInvalidArgument, "ranking covers " + std::to_string(ranking.size()) +
                                          " of " + std::to_string(outside) + " non-roi patches");
  }
  if (k < 1 || static_cast<std::size_t>(k) > ranking.size()) {
    fail(ErrorCode::kInvalidArgument, "k=" + std::to_string(k) + " must be in [1," +
                                          std::to_string(ranking.size()) + "]");
  }
}

// drops[r][j] = drop after jointly perturbing ranking[0..j] in repeat r.
std::vector<std::vector<double>> deletion_drops(
    const Probe& probe, std::span<const std::size_t> ranking,
    const PerturbationSource& source, int steps, int repeats,
    std::uint64_t seed, const ExplainOptions& options, bool every_step) {
  if (repeats < 1) fail(ErrorCode::kInvalidArgument, "repeats must be >= 1");
  check_ranking(probe, ranking, steps);
  source.check_compatible(probe.grid(), probe.image().channels());
  std::vector<std::vector<double>> drops(static_cast<std::size_t>(repeats));
  const std::size_t workers =
      std::max<std::size_t>(1, std::min(options.workers, probe.model().max_in_flight()));
  parallel_for(drops.size(), workers, [&](std::size_t r) {
    Image perturbed = probe.image();
    for (int j = 0; j < steps; ++j) {
      const std::size_t patch = ranking[static_cast<std::size_t>(j)];
      CounterRng stream(seed, StreamTag::kEvaluation, r, patch);
      write_block(perturbed, probe.grid(), patch,
                  source.draw(probe.image(), probe.grid(), patch, stream));
      if (every_step || j + 1 == steps) {
        drops[r].push_back(probe.m0() - probe.evaluate(perturbed));
      }
    }
  });
  return drops;
}

std::string fmt(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char ch : text) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::vector<std::size_t> rank_patches(const PdcrMap& map) {
  std::vector<std::size_t> order;
  order.reserve(map.verdicts.size());
  for (std::size_t i = 0; i < map.verdicts.size(); ++i) {
    if (map.verdicts[i].kind != PatchVerdict::Kind::kRoiMember) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return map.verdicts[a].value() < map.verdicts[b].value();
  });
  return order;
}

std::vector<std::size_t> random_ranking(const PatchGrid& grid, const Rect& roi,
                                        std::uint64_t seed) {
  const std::vector<bool> in_roi = roi_membership(grid, roi);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!in_roi[i]) order.push_back(i);
  }
  CounterRng rng(seed, StreamTag::kRanking);
  // Fisher-Yates with our own generator so the permutation does not depend
  // on the standard library's shuffle algorithm.
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  return order;
}

AttributionResult attribution_score(const Probe& probe,
                                    std::span<const std::size_t> ranking,
                                    const PerturbationSource& source, int k,
                                    int repeats, std::uint64_t seed,
                                    const ExplainOptions& options) {
  const auto drops =
      deletion_drops(probe, ranking, source, k, repeats, seed, options, false);
  AttributionResult result;
  result.k = k;
  result.repeats = repeats;
  double sum = 0.0;
  for (const auto& d : drops) {
    result.per_repeat_drops.push_back(d.back());
    sum += d.back();
  }
  result.score = sum / repeats;
  return result;
}

AttributionCurve attribution_curve(const Probe& probe,
                                   std::span<const std::size_t> ranking,
                                   const PerturbationSource& source,
                                   int max_steps, int repeats,
                                   std::uint64_t seed,
                                   const ExplainOptions& options) {
  const auto drops =
      deletion_drops(probe, ranking, source, max_steps, repeats, seed, options, true);
  AttributionCurve curve;
  for (int j = 0; j < max_steps; ++j) {
    double sum = 0.0;
    for (const auto& d : drops) sum += d[static_cast<std::size_t>(j)];
    curve.steps.push_back(j + 1);
    curve.mean_drop.push_back(sum / repeats);
  }
  return curve;
}

std::vector<double> default_bin_edges() { return {-1.0, -0.2, -0.02, 0.02, 0.2, 1.0}; }

AggregateStats aggregate_stats(std::span<const PdcrMap> maps,
                               std::span<const double> bin_edges) {
  if (maps.empty()) fail(ErrorCode::kInvalidArgument, "aggregate: no maps given");
  if (bin_edges.size() < 2) fail(ErrorCode::kInvalidArgument, "aggregate: need >= 2 bin edges");
  for (std::size_t i = 1; i < bin_edges.size(); ++i) {
    if (!(bin_edges[i] > bin_edges[i - 1])) {
      fail(ErrorCode::kInvalidArgument, "aggregate: bin edges must be strictly increasing");
    }
  }
  AggregateStats stats;
  stats.bin_edges.assign(bin_edges.begin(), bin_edges.end());
  stats.histogram.assign(bin_edges.size() - 1, 0);
  std::uint64_t pos = 0, neg = 0, irr = 0;
  bool first = true;
  for (const PdcrMap& map : maps) {
    for (const PatchVerdict& v : map.verdicts) {
      if (v.kind == PatchVerdict::Kind::kRoiMember) continue;
      const double value = v.value();
      if (value < 0) {
        ++pos;
      } else if (value > 0) {
        ++neg;
      } else {
        ++irr;
      }
      stats.min_ate = first ? value : std::min(stats.min_ate, value);
      stats.max_ate = first ? value : std::max(stats.max_ate, value);
      first = false;
      if (v.kind != PatchVerdict::Kind::kAte) continue;
      const double c = -v.ate;
      if (c < bin_edges.front()) {
        ++stats.underflow;
      } else if (c > bin_edges.back()) {
        ++stats.overflow;
      } else {
        auto it = std::upper_bound(bin_edges.begin(), bin_edges.end(), c);
        auto bin = static_cast<std::size_t>(it - bin_edges.begin()) - 1;
        bin = std::min(bin, stats.histogram.size() - 1);
        ++stats.histogram[bin];
      }
    }
  }
  stats.patches = pos + neg + irr;
  if (stats.patches == 0) {
    fail(ErrorCode::kInvalidArgument, "aggregate: maps contain no non-roi patches");
  }
  const double n = static_cast<double>(stats.patches);
  stats.pos_pct = 100.0 * pos / n;
  stats.neg_pct = 100.0 * neg / n;
  stats.irr_pct = 100.0 * irr / n;
  return stats;
}

std::string stats_csv(std::span<const std::string> labels,
                      std::span<const AggregateStats> stats) {
  if (labels.size() != stats.size()) {
    fail(ErrorCode::kInvalidArgument, "stats_csv: label count mismatch");
  }
  std::ostringstream os;
  os << "label,pos_pct,neg_pct,irr_pct,min_ate,max_ate\n";
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const AggregateStats& s = stats[i];
    os << csv_field(labels[i]) << ',' << fmt(s.pos_pct, 4) << ',' << fmt(s.neg_pct, 4) << ','
       << fmt(s.irr_pct, 4) << ',' << fmt(s.min_ate, 6) << ',' << fmt(s.max_ate, 6)
       << '\n';
  }
  return os.str();
}

std::string stats_json(const AggregateStats& stats) {
  nlohmann::ordered_json doc;
  doc["patches"] = stats.patches;
  doc["pos_pct"] = stats.pos_pct;
  doc["neg_pct"] = stats.neg_pct;
  doc["irr_pct"] = stats.irr_pct;
  doc["min_ate"] = stats.min_ate;
  doc["max_ate"] = stats.max_ate;
  doc["histogram"] = {{"value", "contribution = -ATE, ATE verdicts only"},
                      {"bin_edges", stats.bin_edges},
                      {"counts", stats.histogram},
                      {"underflow", stats.underflow},
                      {"overflow", stats.overflow}};
  return doc.dump(1) + "\n";
}

std::string score_json(const AttributionResult& result) {
  nlohmann::ordered_json doc;
  doc["metric"] = kAttributionMetricNote;
  doc["k"] = result.k;
  doc["repeats"] = result.repeats;
  doc["score"] = result.score;
  doc["per_repeat_drops"] = result.per_repeat_drops;
  return doc.dump(1) + "\n";
}

std::string curve_json(const AttributionCurve& curve, int repeats) {
  nlohmann::ordered_json doc;
  doc["metric"] = kAttributionMetricNote;
  doc["repeats"] = repeats;
  doc["steps"] = curve.steps;
  doc["mean_drop"] = curve.mean_drop;
  return doc.dump(1) + "\n";
}

}  // namespace pdcr
