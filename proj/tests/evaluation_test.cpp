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

#include <algorithm>
#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "pdcr/bank.hpp"
#include "pdcr/engine.hpp"
#include "pdcr/error.hpp"
#include "pdcr/evaluation.hpp"
#include "pdcr/segmenter.hpp"
#include "support/synth.hpp"

namespace pdcr {
namespace {

using testing::blob_image;
using testing::constant_image;
using testing::fill_rect;
using testing::noise_image;
using testing::threshold_oracle;

PdcrMap map_of(int w, int h, int p, Rect roi, std::vector<PatchVerdict> verdicts) {
  PdcrMap m;
  m.grid = PatchGrid(w, h, p);
  m.roi = roi;
  m.verdicts = std::move(verdicts);
  return m;
}

std::shared_ptr<const PerturbationBank> dark_bank() {
  Image src = noise_image(32, 32, 1, 5);
  for (auto& v : src.mutable_pixels()) v = static_cast<std::uint8_t>(v % 80);
  return std::make_shared<const PerturbationBank>(build_bank(std::vector<Image>{src}, 8, 300, 3));
}

std::shared_ptr<const PerturbationBank> noise_bank() {
  return std::make_shared<const PerturbationBank>(
      build_bank(std::vector<Image>{noise_image(48, 48, 1, 7)}, 8, 500, 2));
}

// 32x32 planted scene on a 4x4 grid: source is patch 0, roi is the 2x2
// block of patches 10, 11, 14, 15.
struct SmallPlanted {
  Rect source{0, 0, 8, 8};
  Rect roi{16, 16, 16, 16};
  Image image = constant_image(32, 32, 1, 30);
  Mask gt;
  std::unique_ptr<Segmenter> model;
  SmallPlanted() {
    fill_rect(image, source, 220);
    fill_rect(image, Rect{18, 18, 10, 10}, 200);
    gt = threshold_oracle(image, 128);
    model = make_planted_cause(source, roi, 150);
  }
};

TEST(RankPatches, AscendingValueWithIndexTiesAndNoRoi) {
  using V = PatchVerdict;
  const PdcrMap m = map_of(16, 16, 8, Rect{8, 8, 8, 8},
                           {V::effect(0.3, 50), V::irrelevant(3), V::effect(-0.3, 50),
                            V::roi_member()});
  EXPECT_EQ(rank_patches(m), (std::vector<std::size_t>{2, 1, 0}));
  const PdcrMap ties = map_of(16, 16, 8, Rect{0, 0, 1, 1},
                              {V::roi_member(), V::effect(-0.5, 5), V::irrelevant(3),
                               V::effect(-0.5, 5)});
  EXPECT_EQ(rank_patches(ties), (std::vector<std::size_t>{1, 3, 2}));
}

TEST(RandomRanking, SeededPermutationOfNonRoiPatches) {
  const PatchGrid grid(64, 64, 8);
  const Rect roi{16, 16, 16, 16};
  const auto a = random_ranking(grid, roi, 1);
  EXPECT_EQ(a, random_ranking(grid, roi, 1));
  EXPECT_NE(a, random_ranking(grid, roi, 2));
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> expected;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!grid.patch_rect(i).intersects(roi)) expected.push_back(i);
  }
  EXPECT_EQ(sorted, expected);
}

TEST(AttributionScore, IrrelevantPatchesScoreZero) {
  const Image img = noise_image(64, 64, 1, 3);
  const auto model = make_pixel_threshold(128);
  const Mask gt = threshold_oracle(noise_image(64, 64, 1, 4), 128);
  const Probe probe(*model, img, &gt, Rect{16, 16, 32, 32}, 8, ReferenceMode::kGroundTruth);
  const auto ranking = random_ranking(probe.grid(), probe.roi(), 9);
  const auto r = attribution_score(probe, ranking, PerturbationSource(noise_bank()), 10, 20, 1);
  EXPECT_EQ(r.score, 0.0);
  EXPECT_EQ(r.k, 10);
  EXPECT_EQ(r.per_repeat_drops.size(), 20u);
  const auto curve =
      attribution_curve(probe, ranking, PerturbationSource(noise_bank()), 10, 5, 1);
  for (double d : curve.mean_drop) EXPECT_EQ(d, 0.0);
}

TEST(AttributionScore, SourceInTopKDropsThePrediction) {
  const SmallPlanted s;
  const Probe probe(*s.model, s.image, &s.gt, s.roi, 8, ReferenceMode::kGroundTruth);
  std::vector<std::size_t> ranking{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 12, 13};
  const auto r = attribution_score(probe, ranking, PerturbationSource(dark_bank()), 3, 10, 1);
  EXPECT_GT(r.score, 0.0);
  EXPECT_EQ(r.score, 1.0);
  std::rotate(ranking.begin(), ranking.begin() + 1, ranking.end());
  EXPECT_EQ(attribution_score(probe, ranking, PerturbationSource(dark_bank()), 3, 10, 1).score,
            0.0);
}

TEST(AttributionScore, GroundTruthRankingIsOptimalOverAllSubsets) {
  const SmallPlanted s;
  const Probe probe(*s.model, s.image, &s.gt, s.roi, 8, ReferenceMode::kGroundTruth);
  const PerturbationSource source(dark_bank());
  const std::vector<std::size_t> outside{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 12, 13};
  const std::vector<std::size_t> truth = outside;  // the source, patch 0, leads
  for (int k = 1; k <= 3; ++k) {
    const double best = attribution_score(probe, truth, source, k, 4, 2).score;
    // Enumerate every k-subset as the head of a ranking.
    std::vector<bool> pick(outside.size(), false);
    std::fill(pick.begin(), pick.begin() + k, true);
    do {
      std::vector<std::size_t> head, tail;
      for (std::size_t i = 0; i < outside.size(); ++i) {
        (pick[i] ? head : tail).push_back(outside[i]);
      }
      head.insert(head.end(), tail.begin(), tail.end());
      EXPECT_GE(best, attribution_score(probe, head, source, k, 4, 2).score);
    } while (std::prev_permutation(pick.begin(), pick.end()));
  }
}

TEST(AttributionCurve, StepKEqualsScoreAtK) {
  const Image img = blob_image(64, 64, 4);
  const auto model = make_global_threshold();
  const Mask gt = threshold_oracle(img, 100);
  const Probe probe(*model, img, &gt, Rect{16, 16, 32, 32}, 8, ReferenceMode::kGroundTruth);
  const auto ranking = random_ranking(probe.grid(), probe.roi(), 3);
  const PerturbationSource source(noise_bank());
  const auto curve = attribution_curve(probe, ranking, source, 8, 6, 11, {2});
  ASSERT_EQ(curve.steps, (std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8}));
  for (int k = 1; k <= 8; ++k) {
    EXPECT_EQ(curve.mean_drop[static_cast<std::size_t>(k - 1)],
              attribution_score(probe, ranking, source, k, 6, 11).score)
        << k;
  }
}

TEST(AttributionScore, LargeRepeatCountsAgreeAcrossSeeds) {
  const Image img = blob_image(64, 64, 8);
  const auto model = make_global_threshold();
  const Mask gt = threshold_oracle(img, 100);
  const Probe probe(*model, img, &gt, Rect{16, 16, 32, 32}, 8, ReferenceMode::kGroundTruth);
  const auto ranking = random_ranking(probe.grid(), probe.roi(), 3);
  const PerturbationSource source(noise_bank());
  const double a = attribution_score(probe, ranking, source, 10, 200, 1).score;
  const double b = attribution_score(probe, ranking, source, 10, 400, 2).score;
  EXPECT_NEAR(a, b, 0.01);
}

TEST(AttributionScore, RejectsBadRankings) {
  const SmallPlanted s;
  const Probe probe(*s.model, s.image, &s.gt, s.roi, 8, ReferenceMode::kGroundTruth);
  const PerturbationSource source(dark_bank());
  const std::vector<std::size_t> full{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 12, 13};
  EXPECT_THROW(attribution_score(probe, full, source, 13, 1, 0), Error);
  EXPECT_THROW(attribution_score(probe, full, source, 0, 1, 0), Error);
  EXPECT_THROW(attribution_score(probe, full, source, 1, 0, 0), Error);
  std::vector<std::size_t> partial(full.begin(), full.end() - 1);
  EXPECT_THROW(attribution_score(probe, partial, source, 1, 1, 0), Error);
  std::vector<std::size_t> with_roi = full;
  with_roi.back() = 15;
  EXPECT_THROW(attribution_score(probe, with_roi, source, 1, 1, 0), Error);
  std::vector<std::size_t> dup = full;
  dup.back() = 0;
  EXPECT_THROW(attribution_score(probe, dup, source, 1, 1, 0), Error);
}

TEST(Aggregate, FullyIrrelevantMaps) {
  using V = PatchVerdict;
  const std::vector<PdcrMap> maps{
      map_of(16, 16, 8, Rect{0, 0, 8, 8}, {V::roi_member(), V::irrelevant(3), V::irrelevant(3),
                                           V::irrelevant(3)})};
  const auto s = aggregate_stats(maps, default_bin_edges());
  EXPECT_EQ(s.pos_pct, 0.0);
  EXPECT_EQ(s.neg_pct, 0.0);
  EXPECT_EQ(s.irr_pct, 100.0);
  EXPECT_EQ(s.min_ate, 0.0);
  EXPECT_EQ(s.max_ate, 0.0);
  EXPECT_EQ(s.patches, 3u);
}

TEST(Aggregate, OneThirdEach) {
  using V = PatchVerdict;
  const std::vector<PdcrMap> maps{map_of(16, 16, 8, Rect{0, 0, 8, 8},
                                         {V::roi_member(), V::effect(-0.1, 50),
                                          V::effect(0.05, 50), V::irrelevant(3)})};
  const auto s = aggregate_stats(maps, default_bin_edges());
  EXPECT_NEAR(s.pos_pct, 100.0 / 3, 1e-9);
  EXPECT_NEAR(s.neg_pct, 100.0 / 3, 1e-9);
  EXPECT_NEAR(s.irr_pct, 100.0 / 3, 1e-9);
  EXPECT_NEAR(s.pos_pct + s.neg_pct + s.irr_pct, 100.0, 1e-9);
  EXPECT_EQ(s.min_ate, -0.1);
  EXPECT_EQ(s.max_ate, 0.05);
  // c = 0.1 lands in [0.02, 0.2); c = -0.05 in [-0.2, -0.02).
  EXPECT_EQ(s.histogram, (std::vector<std::uint64_t>{0, 1, 0, 1, 0}));
}

TEST(Aggregate, DefaultEdgesSeparateTheMainContributionBands) {
  const auto edges = default_bin_edges();
  for (double e : {-0.2, -0.02, 0.02, 0.2}) {
    EXPECT_NE(std::find(edges.begin(), edges.end(), e), edges.end()) << e;
  }
}

TEST(Aggregate, HistogramEdgesAndOutOfRange) {
  using V = PatchVerdict;
  const std::vector<double> edges{-0.5, 0.0, 0.5};
  const std::vector<PdcrMap> maps{map_of(
      32, 8, 8, Rect{0, 0, 8, 8},
      {V::roi_member(), V::effect(0.0, 5), V::effect(-0.5, 5), V::effect(0.9, 5)})};
  const auto s = aggregate_stats(maps, edges);
  // c=0 -> second bin (left-closed); c=0.5 -> last bin (closed); c=-0.9 under.
  EXPECT_EQ(s.histogram, (std::vector<std::uint64_t>{0, 2}));
  EXPECT_EQ(s.underflow, 1u);
  EXPECT_EQ(s.overflow, 0u);
  EXPECT_NEAR(s.irr_pct, 100.0 / 3, 1e-9);
}

TEST(Aggregate, InvariantToMapOrder) {
  using V = PatchVerdict;
  std::vector<PdcrMap> maps;
  for (int i = 0; i < 5; ++i) {
    std::vector<PatchVerdict> v{V::roi_member()};
    for (int k = 0; k < 3; ++k) {
      const int code = (i * 7 + k * 3) % 5;
      v.push_back(code == 0   ? V::irrelevant(3)
                  : code < 3  ? V::effect(-0.01 * code * (i + 1), 50)
                              : V::effect(0.02 * code, 50));
    }
    maps.push_back(map_of(16, 16, 8, Rect{0, 0, 8, 8}, v));
  }
  const auto a = aggregate_stats(maps, default_bin_edges());
  std::reverse(maps.begin(), maps.end());
  std::rotate(maps.begin(), maps.begin() + 2, maps.end());
  const auto b = aggregate_stats(maps, default_bin_edges());
  EXPECT_EQ(a.pos_pct, b.pos_pct);
  EXPECT_EQ(a.neg_pct, b.neg_pct);
  EXPECT_EQ(a.irr_pct, b.irr_pct);
  EXPECT_EQ(a.histogram, b.histogram);
}

TEST(Aggregate, Errors) {
  EXPECT_THROW(aggregate_stats({}, default_bin_edges()), Error);
  using V = PatchVerdict;
  const std::vector<PdcrMap> maps{map_of(8, 8, 8, Rect{0, 0, 8, 8}, {V::roi_member()})};
  EXPECT_THROW(aggregate_stats(maps, default_bin_edges()), Error);
  const std::vector<double> bad{0.0, 0.0};
  EXPECT_THROW(aggregate_stats(maps, bad), Error);
}

TEST(Aggregate, CsvQuotesLabelsAndKeepsColumns) {
  using V = PatchVerdict;
  const std::vector<PdcrMap> maps{map_of(16, 16, 8, Rect{0, 0, 8, 8},
                                         {V::roi_member(), V::effect(-0.25, 50),
                                          V::irrelevant(3), V::irrelevant(3)})};
  const std::vector<AggregateStats> stats{aggregate_stats(maps, default_bin_edges())};
  const std::vector<std::string> labels{"ref:planted_cause?source=0,0,8,8"};
  EXPECT_EQ(stats_csv(labels, stats),
            "label,pos_pct,neg_pct,irr_pct,min_ate,max_ate\n"
            "\"ref:planted_cause?source=0,0,8,8\",33.3333,0.0000,66.6667,-0.250000,0.000000\n");
}

}  // namespace
}  // namespace pdcr
