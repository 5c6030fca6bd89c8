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

#ifndef PDCR_SEGMENTER_HPP_
#define PDCR_SEGMENTER_HPP_

#include <cstddef>
#include <limits>
#include <memory>
#include <string>

#include "pdcr/imaging.hpp"

namespace pdcr {

// Black-box segmentation model. predict() must be deterministic, return a
// mask of the input's dimensions, and be callable from several threads at
// once (up to max_in_flight()).
class Segmenter {
 public:
  static constexpr std::size_t kUnbounded =
      std::numeric_limits<std::size_t>::max();

  virtual ~Segmenter() = default;

  virtual std::string identity() const = 0;
  virtual Mask predict(const Image& image) const = 0;
  virtual std::size_t max_in_flight() const { return kUnbounded; }
};

// mask(p) = intensity(p) >= t. Zero spatial context.
std::unique_ptr<Segmenter> make_pixel_threshold(int t);

// mask(p) = intensity(p) >= mean intensity of the whole image.
std::unique_ptr<Segmenter> make_global_threshold();

// mask(p) = intensity(p) >= mean over the (2r+1)^2 window centred at p,
// clipped to the image. Labels inside a region depend only on pixels within
// Chebyshev distance r of it.
std::unique_ptr<Segmenter> make_local_threshold(int radius);

// pixel_threshold(128) everywhere, except that `target` is forced to
// background unless the mean intensity over `source` is >= t_on.
std::unique_ptr<Segmenter> make_planted_cause(const Rect& source,
                                              const Rect& target, int t_on);

// Parses "ref:<name>?<key>=<value>&...":
//   ref:pixel_threshold?t=128
//   ref:global_threshold
//   ref:local_threshold?r=12
//   ref:planted_cause?source=x,y,w,h&target=x,y,w,h&t_on=128
std::unique_ptr<Segmenter> make_reference_segmenter(const std::string& uri);

Rect parse_rect(const std::string& text);

}  // namespace pdcr

#endif  // PDCR_SEGMENTER_HPP_
