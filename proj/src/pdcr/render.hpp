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

#ifndef PDCR_RENDER_HPP_
#define PDCR_RENDER_HPP_

#include <array>
#include <cstdint>

#include "pdcr/engine.hpp"

namespace pdcr {

struct RenderSpec {
  enum class Normalization { kPerMapMax, kFixed };

  Normalization normalization = Normalization::kPerMapMax;
  double scale = 0.0;  // kFixed: |ATE| that saturates the tint
  double overlay_alpha = 0.6;
  std::array<std::uint8_t, 3> roi_outline = {0, 255, 0};

  void validate() const;
};

// RGB overlay of `map` on `base`: red tint for ATE < 0, blue for ATE > 0,
// opacity overlay_alpha * min(1, |ATE| / scale). Irrelevant and RoI patches
// stay untinted; the RoI gets a one-pixel outline.
Image render_map(const PdcrMap& map, const Image& base, const RenderSpec& spec);

}  // namespace pdcr

#endif  // PDCR_RENDER_HPP_
