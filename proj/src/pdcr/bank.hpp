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

#ifndef PDCR_BANK_HPP_
#define PDCR_BANK_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pdcr/imaging.hpp"
#include "pdcr/random.hpp"

namespace pdcr {

using Digest = std::array<std::uint8_t, 32>;

// SHA-256 over the ordered source list (per image: u32 width, u32 height,
// u8 channels, raw pixels; integers little-endian).
Digest digest_sources(std::span<const Image> sources);
std::string digest_hex(const Digest& digest);

inline constexpr std::size_t kDefaultBankSize = 10000;

// Immutable pool of equally sized blocks cropped from held-out images.
class PerturbationBank {
 public:
  PerturbationBank(int block_size, int channels, std::vector<std::uint8_t> data,
                   const Digest& source_digest);

  int block_size() const { return block_size_; }
  int channels() const { return channels_; }
  std::size_t count() const { return data_.size() / block_bytes(); }
  std::size_t block_bytes() const {
    return static_cast<std::size_t>(block_size_) * block_size_ * channels_;
  }
  const Digest& source_digest() const { return source_digest_; }
  std::span<const std::uint8_t> data() const { return data_; }

  std::span<const std::uint8_t> block_pixels(std::size_t index) const;
  Block block(std::size_t index) const;

  bool operator==(const PerturbationBank&) const = default;

 private:
  int block_size_;
  int channels_;
  std::vector<std::uint8_t> data_;
  Digest source_digest_;
};

// Crops `count` blocks at positions drawn uniformly over every valid
// (image, x, y) triple. `names`, when given, labels images in diagnostics.
PerturbationBank build_bank(std::span<const Image> sources, int block_size,
                            std::size_t count, std::uint64_t seed,
                            std::span<const std::string> names = {});

// Uniform draw with replacement.
std::size_t sample_index(const PerturbationBank& bank, CounterRng& stream);
Block sample_block(const PerturbationBank& bank, CounterRng& stream);

// Binary format: "PDCRBANK", u16 version (1), u16 block_size, u8 channels,
// u8 reserved, u32 count, 32-byte source digest, then the raw blocks.
// All integers little-endian.
void write_bank(const PerturbationBank& bank, std::ostream& out);
PerturbationBank read_bank(std::istream& in);
void save_bank(const PerturbationBank& bank, const std::string& path);
PerturbationBank load_bank(const std::string& path);

// Classic perturbations kept for contrast experiments.
struct BaselineKind {
  enum class Type { kZero, kMean, kGaussNoise, kBlur };

  Type type = Type::kZero;
  double sigma = 0.0;  // kGaussNoise, intensity units
  int radius = 0;      // kBlur, pixels

  static BaselineKind zero() { return {Type::kZero}; }
  static BaselineKind mean() { return {Type::kMean}; }
  static BaselineKind gauss_noise(double sigma);
  static BaselineKind blur(int radius);

  // "zero", "mean", "noise:<sigma>", "blur:<radius>".
  static BaselineKind parse(const std::string& text);
  std::string to_string() const;
};

Block baseline_block(const BaselineKind& kind, const Image& image,
                     const PatchGrid& grid, std::size_t patch_index,
                     CounterRng& stream);

// Where replacement blocks come from during an explanation.
class PerturbationSource {
 public:
  explicit PerturbationSource(std::shared_ptr<const PerturbationBank> bank);
  explicit PerturbationSource(BaselineKind baseline);

  // Throws if blocks would not fit the grid or image channels.
  void check_compatible(const PatchGrid& grid, int channels) const;

  Block draw(const Image& image, const PatchGrid& grid, std::size_t patch_index,
             CounterRng& stream) const;

  const PerturbationBank* bank() const;
  std::string describe() const;

 private:
  std::variant<std::shared_ptr<const PerturbationBank>, BaselineKind> source_;
};

}  // namespace pdcr

#endif  // PDCR_BANK_HPP_
