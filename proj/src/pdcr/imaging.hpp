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

#ifndef PDCR_IMAGING_HPP_
#define PDCR_IMAGING_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pdcr {

// Axis-aligned pixel rectangle, top-left anchored.
struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool operator==(const Rect&) const = default;

  bool contains(int px, int py) const {
    return px >= x && px < x + w && py >= y && py < y + h;
  }
  bool intersects(const Rect& other) const {
    return x < other.x + other.w && other.x < x + w && y < other.y + other.h &&
           other.y < y + h;
  }
  std::string to_string() const;
};

// 8-bit raster, 1 or 3 channels, interleaved row-major.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels);
  Image(int width, int height, int channels, std::vector<std::uint8_t> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width_) * height_;
  }

  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::span<std::uint8_t> mutable_pixels() { return pixels_; }

  std::uint8_t at(int x, int y, int c = 0) const {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  std::uint8_t& at(int x, int y, int c = 0) {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  bool operator==(const Image&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> pixels_;
};

// Binary raster; every value is 0 or 1.
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height);
  Mask(int width, int height, std::vector<std::uint8_t> bits);

  int width() const { return width_; }
  int height() const { return height_; }
  std::span<const std::uint8_t> bits() const { return bits_; }
  std::span<std::uint8_t> mutable_bits() { return bits_; }

  std::uint8_t at(int x, int y) const {
    return bits_[static_cast<std::size_t>(y) * width_ + x];
  }
  std::uint8_t& at(int x, int y) {
    return bits_[static_cast<std::size_t>(y) * width_ + x];
  }
  std::size_t count() const;

  bool operator==(const Mask&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Square tile of pixels, same channel layout as the host image.
class Block {
 public:
  Block() = default;
  Block(int size, int channels);
  Block(int size, int channels, std::vector<std::uint8_t> pixels);

  int size() const { return size_; }
  int channels() const { return channels_; }
  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::span<std::uint8_t> mutable_pixels() { return pixels_; }

  bool operator==(const Block&) const = default;

 private:
  int size_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> pixels_;
};

// Partition of a width x height raster into P x P patches anchored at (0,0).
// Patch i covers ((i mod cols)*P, (i div cols)*P, P, P).
class PatchGrid {
 public:
  PatchGrid() = default;
  PatchGrid(int width, int height, int patch_size);

  int width() const { return width_; }
  int height() const { return height_; }
  int patch_size() const { return patch_size_; }
  int cols() const { return cols_; }
  int rows() const { return rows_; }
  std::size_t size() const { return static_cast<std::size_t>(cols_) * rows_; }

  Rect patch_rect(std::size_t index) const;
  Rect extent() const { return {0, 0, width_, height_}; }

  bool operator==(const PatchGrid&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int patch_size_ = 0;
  int cols_ = 0;
  int rows_ = 0;
};

// Per-pixel gray intensity: channel mean rounded half up.
inline int intensity(const Image& image, int x, int y) {
  const int c = image.channels();
  if (c == 1) return image.at(x, y);
  int sum = 0;
  for (int k = 0; k < c; ++k) sum += image.at(x, y, k);
  return (2 * sum + c) / (2 * c);
}

// Intensity raster of the whole image, row-major.
std::vector<int> intensity_plane(const Image& image);

void check_rect_within(const Rect& rect, int width, int height,
                       const char* what);

double dsc(const Mask& a, const Mask& b);

// Dice coefficient restricted to the pixels inside `roi`.
double roi_dsc(const Mask& pred, const Mask& reference, const Rect& roi);

Block extract_block(const Image& image, const PatchGrid& grid,
                    std::size_t patch_index);

// Copies a size x size tile whose top-left corner is (x, y).
Block crop_block(const Image& image, int x, int y, int size);

// In-place variant of apply_intervention.
void write_block(Image& image, const PatchGrid& grid, std::size_t patch_index,
                 const Block& block);

Image apply_intervention(const Image& image, const PatchGrid& grid,
                         std::size_t patch_index, const Block& block);

// Indices of every patch whose rectangle shares at least one pixel with roi,
// ascending.
std::vector<std::size_t> patches_overlapping(const PatchGrid& grid,
                                             const Rect& roi);

}  // namespace pdcr

#endif  // PDCR_IMAGING_HPP_
