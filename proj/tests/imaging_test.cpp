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
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "pdcr/error.hpp"
#include "pdcr/imaging.hpp"
#include "support/synth.hpp"

namespace pdcr {
namespace {

using testing::noise_image;

Mask mask_from(int w, int h, std::vector<std::uint8_t> bits) {
  return Mask(w, h, std::move(bits));
}

// Dice written out from its definition with explicit counting.
double dice_oracle(const Mask& a, const Mask& b) {
  int inter = 0, na = 0, nb = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      na += a.at(x, y);
      nb += b.at(x, y);
      inter += a.at(x, y) & b.at(x, y);
    }
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * inter / (na + nb);
}

Mask random_mask(int w, int h, std::mt19937_64& rng, double p) {
  std::bernoulli_distribution coin(p);
  Mask m(w, h);
  for (auto& b : m.mutable_bits()) b = coin(rng) ? 1 : 0;
  return m;
}

TEST(Dsc, IdenticalMasksScoreOne) {
  const Mask a = mask_from(2, 2, {1, 0, 1, 1});
  EXPECT_DOUBLE_EQ(dsc(a, a), 1.0);
}

TEST(Dsc, DisjointMasksScoreZero) {
  EXPECT_DOUBLE_EQ(dsc(mask_from(2, 1, {1, 0}), mask_from(2, 1, {0, 1})), 0.0);
}

TEST(Dsc, BothEmptyIsPerfectAgreement) {
  EXPECT_DOUBLE_EQ(dsc(Mask(4, 4), Mask(4, 4)), 1.0);
}

TEST(Dsc, HalfOverlap) {
  // |A|=2, |B|=2, |A∩B|=1 -> 2*1/4.
  EXPECT_DOUBLE_EQ(dsc(mask_from(3, 1, {1, 1, 0}), mask_from(3, 1, {0, 1, 1})), 0.5);
}

TEST(Dsc, SymmetricBoundedAndMatchesOracle) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const double p = (i % 10) / 10.0;
    const Mask a = random_mask(9, 7, rng, p);
    const Mask b = random_mask(9, 7, rng, 1.0 - p);
    const double ab = dsc(a, b);
    EXPECT_EQ(ab, dsc(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_DOUBLE_EQ(ab, dice_oracle(a, b));
  }
}

TEST(Dsc, ShapeMismatchIsRejected) {
  try {
    dsc(Mask(2, 2), Mask(3, 2));
    FAIL() << "expected a shape error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShape);
  }
}

TEST(RoiDsc, OnlyLooksInsideTheRoi) {
  std::mt19937_64 rng(5);
  const Mask pred = random_mask(16, 16, rng, 0.5);
  const Mask ref = random_mask(16, 16, rng, 0.5);
  const Rect roi{3, 4, 6, 5};
  Mask pa(6, 5), ra(6, 5);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 6; ++x) {
      pa.at(x, y) = pred.at(roi.x + x, roi.y + y);
      ra.at(x, y) = ref.at(roi.x + x, roi.y + y);
    }
  }
  EXPECT_DOUBLE_EQ(roi_dsc(pred, ref, roi), dice_oracle(pa, ra));

  Mask changed = pred;
  changed.at(0, 0) ^= 1;
  changed.at(15, 15) ^= 1;
  EXPECT_EQ(roi_dsc(changed, ref, roi), roi_dsc(pred, ref, roi));
}

TEST(RoiDsc, RoiOutsideImageIsRejected) {
  try {
    roi_dsc(Mask(8, 8), Mask(8, 8), Rect{4, 4, 8, 8});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBounds);
  }
}

TEST(PatchGrid, PaperScaleGridHas1024Patches) {
  const PatchGrid grid(256, 256, 8);
  EXPECT_EQ(grid.size(), 1024u);
  EXPECT_EQ(grid.cols(), 32);
  EXPECT_EQ(grid.patch_rect(33), (Rect{8, 8, 8, 8}));
  EXPECT_EQ(PatchGrid(256, 256, 4).size(), 4096u);
}

TEST(PatchGrid, NonDividingPatchSizeIsAShapeError) {
  try {
    PatchGrid(250, 256, 8);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShape);
  }
}

TEST(PatchGrid, IndexOutOfRangeIsABoundsError) {
  const PatchGrid grid(16, 16, 8);
  try {
    grid.patch_rect(4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBounds);
  }
}

std::vector<std::size_t> overlap_oracle(const PatchGrid& grid, const Rect& roi) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid.patch_rect(i).intersects(roi)) out.push_back(i);
  }
  return out;
}

TEST(PatchesOverlapping, AlignedRoiCoversSixteenPatches) {
  const PatchGrid grid(256, 256, 8);
  const auto hits = patches_overlapping(grid, Rect{96, 96, 32, 32});
  EXPECT_EQ(hits.size(), 16u);
  EXPECT_EQ(hits, overlap_oracle(grid, Rect{96, 96, 32, 32}));
}

TEST(PatchesOverlapping, OffsetRoiTouchesTwentyFivePatches) {
  const PatchGrid grid(256, 256, 8);
  const Rect roi{100, 100, 32, 32};
  const auto hits = patches_overlapping(grid, roi);
  EXPECT_EQ(hits.size(), 25u);
  EXPECT_EQ(hits, overlap_oracle(grid, roi));
}

TEST(PatchesOverlapping, MatchesBruteForceOnRandomRois) {
  std::mt19937_64 rng(3);
  const PatchGrid grid(64, 48, 8);
  for (int i = 0; i < 500; ++i) {
    const int w = 1 + static_cast<int>(rng() % 64);
    const int h = 1 + static_cast<int>(rng() % 48);
    const Rect roi{static_cast<int>(rng() % (64 - w + 1)),
                   static_cast<int>(rng() % (48 - h + 1)), w, h};
    const auto hits = patches_overlapping(grid, roi);
    EXPECT_TRUE(std::is_sorted(hits.begin(), hits.end()));
    EXPECT_EQ(hits, overlap_oracle(grid, roi)) << roi.to_string();
  }
}

TEST(Intervention, ChangesOnlyThePatch) {
  const Image img = noise_image(32, 24, 3, 1);
  const PatchGrid grid(32, 24, 8);
  const Block block(8, 3, std::vector<std::uint8_t>(8 * 8 * 3, 200));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Image out = apply_intervention(img, grid, i, block);
    const Rect r = grid.patch_rect(i);
    for (int y = 0; y < 24; ++y) {
      for (int x = 0; x < 32; ++x) {
        for (int c = 0; c < 3; ++c) {
          if (r.contains(x, y)) {
            ASSERT_EQ(out.at(x, y, c), 200);
          } else {
            ASSERT_EQ(out.at(x, y, c), img.at(x, y, c));
          }
        }
      }
    }
  }
}

TEST(Intervention, OwnPixelsAreIdentityAndRepeatIsIdempotent) {
  const Image img = noise_image(16, 16, 1, 2);
  const PatchGrid grid(16, 16, 8);
  EXPECT_EQ(apply_intervention(img, grid, 3, extract_block(img, grid, 3)), img);
  const Block b = extract_block(noise_image(16, 16, 1, 9), grid, 0);
  const Image once = apply_intervention(img, grid, 1, b);
  EXPECT_EQ(apply_intervention(once, grid, 1, b), once);
}

TEST(Intervention, BlockShapeMustMatch) {
  const Image img = noise_image(16, 16, 1, 2);
  const PatchGrid grid(16, 16, 8);
  EXPECT_THROW(apply_intervention(img, grid, 0, Block(4, 1)), Error);
  EXPECT_THROW(apply_intervention(img, grid, 0, Block(8, 3)), Error);
}

TEST(Image, RejectsBadChannelCountsAndSizes) {
  EXPECT_THROW(Image(4, 4, 2), Error);
  EXPECT_THROW(Image(0, 4, 1), Error);
  EXPECT_THROW(Image(2, 2, 1, std::vector<std::uint8_t>(3)), Error);
  EXPECT_THROW(Mask(2, 1, {0, 2}), Error);
}

TEST(Intensity, RgbMeanRoundsHalfUp) {
  Image img(1, 1, 3, {0, 0, 1});  // mean 1/3 -> 0
  EXPECT_EQ(intensity(img, 0, 0), 0);
  img = Image(1, 1, 3, {0, 1, 1});  // 2/3 -> 1
  EXPECT_EQ(intensity(img, 0, 0), 1);
  img = Image(1, 1, 3, {255, 254, 254});  // 254.33 -> 254
  EXPECT_EQ(intensity(img, 0, 0), 254);
  img = Image(1, 1, 3, {10, 11, 11});  // 10.67 -> 11
  EXPECT_EQ(intensity(img, 0, 0), 11);
}

}  // namespace
}  // namespace pdcr
