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

#include "pdcr/render.hpp"

#include <algorithm>
#include <cmath>

#include "pdcr/error.hpp"

namespace pdcr {

void RenderSpec::validate() const {
  if (!(overlay_alpha >= 0.0 && overlay_alpha <= 1.0)) {
    fail(ErrorCode::kInvalidArgument, "overlay alpha must be in [0,1]");
  }
  if (normalization == Normalization::kFixed && !(scale > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "fixed normalization scale must be > 0");
  }
}

Image render_map(const PdcrMap& map, const Image& base, const RenderSpec& spec) {
  spec.validate();
  if (base.width() != map.grid.width() || base.height() != map.grid.height()) {
    fail(ErrorCode::kShape, "base image is " + std::to_string(base.width()) + "x" +
                                std::to_string(base.height()) + " but the map covers " +
                                std::to_string(map.grid.width()) + "x" +
                                std::to_string(map.grid.height()));
  }
  if (map.verdicts.size() != map.grid.size()) {
    fail(ErrorCode::kShape, "map verdict count does not match its grid");
  }

  double scale = spec.scale;
  if (spec.normalization == RenderSpec::Normalization::kPerMapMax) {
    scale = 0.0;
    for (const PatchVerdict& v : map.verdicts) {
      if (v.kind == PatchVerdict::Kind::kAte) scale = std::max(scale, std::abs(v.ate));
    }
  }

  Image out(base.width(), base.height(), 3);
  for (int y = 0; y < base.height(); ++y) {
    for (int x = 0; x < base.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        out.at(x, y, c) = base.at(x, y, base.channels() == 3 ? c : 0);
      }
    }
  }

  for (std::size_t i = 0; i < map.verdicts.size(); ++i) {
    const PatchVerdict& v = map.verdicts[i];
    if (v.kind != PatchVerdict::Kind::kAte || v.ate == 0.0 || scale <= 0.0) continue;
    const double opacity = spec.overlay_alpha * std::min(1.0, std::abs(v.ate) / scale);
    const std::array<double, 3> tint =
        v.ate < 0 ? std::array<double, 3>{255, 0, 0} : std::array<double, 3>{0, 0, 255};
    const Rect r = map.grid.patch_rect(i);
    for (int y = r.y; y < r.y + r.h; ++y) {
      for (int x = r.x; x < r.x + r.w; ++x) {
        for (int c = 0; c < 3; ++c) {
          const double blended = (1.0 - opacity) * out.at(x, y, c) + opacity * tint[c];
          out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(blended));
        }
      }
    }
  }

  const Rect& roi = map.roi;
  auto paint = [&](int x, int y) {
    for (int c = 0; c < 3; ++c) out.at(x, y, c) = spec.roi_outline[c];
  };
  for (int x = roi.x; x < roi.x + roi.w; ++x) {
    paint(x, roi.y);
    paint(x, roi.y + roi.h - 1);
  }
  for (int y = roi.y; y < roi.y + roi.h; ++y) {
    paint(roi.x, y);
    paint(roi.x + roi.w - 1, y);
  }
  return out;
}

}  // namespace pdcr
