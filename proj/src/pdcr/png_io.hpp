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

#ifndef PDCR_PNG_IO_HPP_
#define PDCR_PNG_IO_HPP_

#include <string>

#include "pdcr/imaging.hpp"

namespace pdcr {

// Color PNGs load as 3-channel RGB, everything else as 1-channel gray.
// Alpha is dropped and 16-bit samples are reduced to 8 bits.
Image load_image_png(const std::string& path);
void save_image_png(const Image& image, const std::string& path);

// Masks are gray PNGs; a pixel is foreground iff its intensity >= 128.
Mask load_mask_png(const std::string& path);
void save_mask_png(const Mask& mask, const std::string& path);

}  // namespace pdcr

#endif  // PDCR_PNG_IO_HPP_
