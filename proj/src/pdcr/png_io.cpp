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

#include "pdcr/png_io.hpp"

#include <png.h>

#include <cstring>
#include <vector>

#include "pdcr/error.hpp"

namespace pdcr {
namespace {

struct PngImageGuard {
  png_image image;
  PngImageGuard() {
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
  }
  ~PngImageGuard() { png_image_free(&image); }
};

Image read_png(const std::string& path, bool force_gray) {
  PngImageGuard g;
  if (!png_image_begin_read_from_file(&g.image, path.c_str())) {
    fail(ErrorCode::kIo, "cannot read PNG '" + path + "': " + g.image.message);
  }
  const bool color = (g.image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  const int channels = (color && !force_gray) ? 3 : 1;
  g.image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int width = static_cast<int>(g.image.width);
  const int height = static_cast<int>(g.image.height);
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(g.image));
  if (!png_image_finish_read(&g.image, nullptr, pixels.data(), 0, nullptr)) {
    fail(ErrorCode::kIo, "cannot decode PNG '" + path + "': " + g.image.message);
  }
  return Image(width, height, channels, std::move(pixels));
}

void write_png(const std::string& path, int width, int height, int channels,
               const std::uint8_t* data) {
  PngImageGuard g;
  g.image.width = static_cast<png_uint_32>(width);
  g.image.height = static_cast<png_uint_32>(height);
  g.image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&g.image, path.c_str(), 0, data, 0, nullptr)) {
    fail(ErrorCode::kIo, "cannot write PNG '" + path + "': " + g.image.message);
  }
}

}  // namespace

Image load_image_png(const std::string& path) { return read_png(path, false); }

void save_image_png(const Image& image, const std::string& path) {
  write_png(path, image.width(), image.height(), image.channels(),
            image.pixels().data());
}

Mask load_mask_png(const std::string& path) {
  const Image gray = read_png(path, false);
  const std::vector<int> plane = intensity_plane(gray);
  std::vector<std::uint8_t> bits(plane.size());
  for (std::size_t i = 0; i < plane.size(); ++i) bits[i] = plane[i] >= 128;
  return Mask(gray.width(), gray.height(), std::move(bits));
}

void save_mask_png(const Mask& mask, const std::string& path) {
  std::vector<std::uint8_t> gray(mask.bits().size());
  for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = mask.bits()[i] ? 255 : 0;
  write_png(path, mask.width(), mask.height(), 1, gray.data());
}

}  // namespace pdcr
