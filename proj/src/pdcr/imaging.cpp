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

#include "pdcr/imaging.hpp"

#include <algorithm>
#include <cstring>
#include <string>
#include <utility>

#include "pdcr/error.hpp"

namespace pdcr {
namespace {

void check_dims(int width, int height, const char* what) {
  if (width < 1 || height < 1) {
    fail(ErrorCode::kShape, std::string(what) + " dimensions must be >= 1, got " +
                                std::to_string(width) + "x" +
                                std::to_string(height));
  }
}

}  // namespace

std::string Rect::to_string() const {
  return std::to_string(x) + "," + std::to_string(y) + "," +
         std::to_string(w) + "," + std::to_string(h);
}

Image::Image(int width, int height, int channels)
    : Image(width, height, channels,
            std::vector<std::uint8_t>(
                static_cast<std::size_t>(std::max(width, 0)) *
                std::max(height, 0) * std::max(channels, 0))) {}

Image::Image(int width, int height, int channels,
             std::vector<std::uint8_t> pixels)
    : width_(width),
      height_(height),
      channels_(channels),
      pixels_(std::move(pixels)) {
  check_dims(width, height, "image");
  if (channels != 1 && channels != 3) {
    fail(ErrorCode::kShape,
         "image channels must be 1 or 3, got " + std::to_string(channels));
  }
  const std::size_t expected =
      static_cast<std::size_t>(width) * height * channels;
  if (pixels_.size() != expected) {
    fail(ErrorCode::kShape, "image pixel buffer has " +
                                std::to_string(pixels_.size()) +
                                " bytes, expected " + std::to_string(expected));
  }
}

Mask::Mask(int width, int height)
    : Mask(width, height,
           std::vector<std::uint8_t>(static_cast<std::size_t>(
               std::max(width, 0) * static_cast<std::size_t>(
                                        std::max(height, 0))))) {}

Mask::Mask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  check_dims(width, height, "mask");
  const std::size_t expected = static_cast<std::size_t>(width) * height;
  if (bits_.size() != expected) {
    fail(ErrorCode::kShape, "mask has " + std::to_string(bits_.size()) +
                                " values, expected " + std::to_string(expected));
  }
  std::uint8_t seen = 0;
  for (auto b : bits_) seen |= b;
  if (seen > 1) fail(ErrorCode::kShape, "mask values must be 0 or 1");
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

Block::Block(int size, int channels)
    : Block(size, channels,
            std::vector<std::uint8_t>(static_cast<std::size_t>(
                std::max(size, 0) * std::max(size, 0) *
                std::max(channels, 0)))) {}

Block::Block(int size, int channels, std::vector<std::uint8_t> pixels)
    : size_(size), channels_(channels), pixels_(std::move(pixels)) {
  if (size < 1) fail(ErrorCode::kShape, "block size must be >= 1");
  if (channels != 1 && channels != 3) {
    fail(ErrorCode::kShape, "block channels must be 1 or 3");
  }
  if (pixels_.size() != static_cast<std::size_t>(size) * size * channels) {
    fail(ErrorCode::kShape, "block pixel buffer has wrong length");
  }
}

PatchGrid::PatchGrid(int width, int height, int patch_size)
    : width_(width), height_(height), patch_size_(patch_size) {
  check_dims(width, height, "grid");
  if (patch_size < 1) {
    fail(ErrorCode::kInvalidArgument, "patch size must be >= 1");
  }
  if (width % patch_size != 0 || height % patch_size != 0) {
    fail(ErrorCode::kShape, "patch size " + std::to_string(patch_size) +
                                " does not divide " + std::to_string(width) +
                                "x" + std::to_string(height));
  }
  cols_ = width / patch_size;
  rows_ = height / patch_size;
}

Rect PatchGrid::patch_rect(std::size_t index) const {
  if (index >= size()) {
    fail(ErrorCode::kBounds, "patch index " + std::to_string(index) +
                                 " out of range [0," + std::to_string(size()) +
                                 ")");
  }
  const int col = static_cast<int>(index % cols_);
  const int row = static_cast<int>(index / cols_);
  return {col * patch_size_, row * patch_size_, patch_size_, patch_size_};
}

std::vector<int> intensity_plane(const Image& image) {
  std::vector<int> plane(image.pixel_count());
  const auto px = image.pixels();
  const int c = image.channels();
  if (c == 1) {
    std::copy(px.begin(), px.end(), plane.begin());
    return plane;
  }
  for (std::size_t i = 0; i < plane.size(); ++i) {
    const int sum = px[3 * i] + px[3 * i + 1] + px[3 * i + 2];
    plane[i] = (2 * sum + 3) / 6;
  }
  return plane;
}

void check_rect_within(const Rect& rect, int width, int height,
                       const char* what) {
  if (rect.w < 1 || rect.h < 1 || rect.x < 0 || rect.y < 0 ||
      rect.x + rect.w > width || rect.y + rect.h > height) {
    fail(ErrorCode::kBounds, std::string(what) + " " + rect.to_string() +
                                 " is not contained in " +
                                 std::to_string(width) + "x" +
                                 std::to_string(height));
  }
}

double dsc(const Mask& a, const Mask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    fail(ErrorCode::kShape, "dsc: mask dimensions differ");
  }
  return roi_dsc(a, b, {0, 0, a.width(), a.height()});
}

double roi_dsc(const Mask& pred, const Mask& reference, const Rect& roi) {
  if (pred.width() != reference.width() ||
      pred.height() != reference.height()) {
    fail(ErrorCode::kShape, "roi_dsc: mask dimensions differ");
  }
  check_rect_within(roi, pred.width(), pred.height(), "roi");
  std::size_t both = 0;
  std::size_t total = 0;
  for (int y = roi.y; y < roi.y + roi.h; ++y) {
    const std::uint8_t* p = pred.bits().data() +
                            static_cast<std::size_t>(y) * pred.width() + roi.x;
    const std::uint8_t* r = reference.bits().data() +
                            static_cast<std::size_t>(y) * pred.width() + roi.x;
    for (int x = 0; x < roi.w; ++x) {
      both += p[x] & r[x];
      total += p[x] + r[x];
    }
  }
  // Both empty counts as perfect agreement.
  if (total == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(total);
}

Block crop_block(const Image& image, int x, int y, int size) {
  check_rect_within({x, y, size, size}, image.width(), image.height(), "crop");
  const int c = image.channels();
  Block block(size, c);
  auto out = block.mutable_pixels();
  const std::size_t row_bytes = static_cast<std::size_t>(size) * c;
  for (int r = 0; r < size; ++r) {
    const std::uint8_t* src =
        image.pixels().data() +
        (static_cast<std::size_t>(y + r) * image.width() + x) * c;
    std::memcpy(out.data() + r * row_bytes, src, row_bytes);
  }
  return block;
}

Block extract_block(const Image& image, const PatchGrid& grid,
                    std::size_t patch_index) {
  const Rect r = grid.patch_rect(patch_index);
  return crop_block(image, r.x, r.y, r.w);
}

void write_block(Image& image, const PatchGrid& grid, std::size_t patch_index,
                 const Block& block) {
  if (grid.width() != image.width() || grid.height() != image.height()) {
    fail(ErrorCode::kShape, "grid does not match image dimensions");
  }
  if (block.size() != grid.patch_size() ||
      block.channels() != image.channels()) {
    fail(ErrorCode::kShape,
         "block is " + std::to_string(block.size()) + "px/" +
             std::to_string(block.channels()) + "ch, grid expects " +
             std::to_string(grid.patch_size()) + "px/" +
             std::to_string(image.channels()) + "ch");
  }
  const Rect r = grid.patch_rect(patch_index);
  const int c = image.channels();
  const std::size_t row_bytes = static_cast<std::size_t>(r.w) * c;
  auto dst = image.mutable_pixels();
  for (int row = 0; row < r.h; ++row) {
    std::memcpy(
        dst.data() + (static_cast<std::size_t>(r.y + row) * image.width() +
                      r.x) * c,
        block.pixels().data() + row * row_bytes, row_bytes);
  }
}

Image apply_intervention(const Image& image, const PatchGrid& grid,
                         std::size_t patch_index, const Block& block) {
  Image out = image;
  write_block(out, grid, patch_index, block);
  return out;
}

std::vector<std::size_t> patches_overlapping(const PatchGrid& grid,
                                             const Rect& roi) {
  check_rect_within(roi, grid.width(), grid.height(), "roi");
  const int p = grid.patch_size();
  const int c0 = roi.x / p;
  const int c1 = (roi.x + roi.w - 1) / p;
  const int r0 = roi.y / p;
  const int r1 = (roi.y + roi.h - 1) / p;
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(c1 - c0 + 1) * (r1 - r0 + 1));
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      out.push_back(static_cast<std::size_t>(r) * grid.cols() + c);
    }
  }
  return out;
}

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kShape: return "shape error";
    case ErrorCode::kBounds: return "bounds error";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kFormat: return "format error";
    case ErrorCode::kModel: return "model error";
    case ErrorCode::kTimeout: return "timeout";
    case ErrorCode::kProtocol: return "protocol error";
    case ErrorCode::kSession: return "session error";
    case ErrorCode::kInternal: return "internal error";
  }
  return "unknown error";
}

}  // namespace pdcr
