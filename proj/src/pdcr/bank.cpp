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

#include "pdcr/bank.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>

#include "pdcr/error.hpp"

namespace pdcr {
namespace {

constexpr char kMagic[8] = {'P', 'D', 'C', 'R', 'B', 'A', 'N', 'K'};
constexpr std::uint16_t kBankVersion = 1;

template <typename T>
void put_le(std::ostream& out, T value) {
  std::uint8_t bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<std::uint8_t>(value >> (8 * i));
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  std::uint8_t bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    fail(ErrorCode::kFormat, "bank file truncated in header");
  }
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(static_cast<T>(bytes[i]) << (8 * i));
  }
  return value;
}

std::string image_label(std::span<const std::string> names, std::size_t i) {
  if (i < names.size()) return "'" + names[i] + "'";
  return "#" + std::to_string(i);
}

}  // namespace

Digest digest_sources(std::span<const Image> sources) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              EVP_MD_CTX_free);
  if (!ctx || !EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr)) {
    fail(ErrorCode::kInternal, "SHA-256 initialisation failed");
  }
  for (const Image& img : sources) {
    std::uint8_t header[9];
    const auto w = static_cast<std::uint32_t>(img.width());
    const auto h = static_cast<std::uint32_t>(img.height());
    for (int i = 0; i < 4; ++i) {
      header[i] = static_cast<std::uint8_t>(w >> (8 * i));
      header[4 + i] = static_cast<std::uint8_t>(h >> (8 * i));
    }
    header[8] = static_cast<std::uint8_t>(img.channels());
    EVP_DigestUpdate(ctx.get(), header, sizeof(header));
    EVP_DigestUpdate(ctx.get(), img.pixels().data(), img.pixels().size());
  }
  Digest digest{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
  return digest;
}

std::string digest_hex(const Digest& digest) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (auto b : digest) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 15]);
  }
  return out;
}

PerturbationBank::PerturbationBank(int block_size, int channels,
                                   std::vector<std::uint8_t> data,
                                   const Digest& source_digest)
    : block_size_(block_size),
      channels_(channels),
      data_(std::move(data)),
      source_digest_(source_digest) {
  if (block_size < 1 || block_size > 0xFFFF) {
    fail(ErrorCode::kFormat, "bank block size out of range");
  }
  if (channels != 1 && channels != 3) {
    fail(ErrorCode::kFormat, "bank channels must be 1 or 3");
  }
  if (data_.empty() || data_.size() % block_bytes() != 0) {
    fail(ErrorCode::kFormat, "bank data must hold a whole number (>= 1) of blocks");
  }
}

std::span<const std::uint8_t> PerturbationBank::block_pixels(
    std::size_t index) const {
  if (index >= count()) {
    fail(ErrorCode::kBounds, "bank block index " + std::to_string(index) +
                                 " out of range");
  }
  return std::span<const std::uint8_t>(data_).subspan(index * block_bytes(),
                                                      block_bytes());
}

Block PerturbationBank::block(std::size_t index) const {
  const auto px = block_pixels(index);
  return Block(block_size_, channels_, {px.begin(), px.end()});
}

PerturbationBank build_bank(std::span<const Image> sources, int block_size,
                            std::size_t count, std::uint64_t seed,
                            std::span<const std::string> names) {
  if (sources.empty()) fail(ErrorCode::kInvalidArgument, "bank build: no source images");
  if (count < 1) fail(ErrorCode::kInvalidArgument, "bank build: count must be >= 1");
  if (count > 0xFFFFFFFFULL) fail(ErrorCode::kInvalidArgument, "bank build: count exceeds u32");
  if (block_size < 1) fail(ErrorCode::kInvalidArgument, "bank build: block size must be >= 1");

  const int channels = sources.front().channels();
  // Cumulative number of crop positions per image.
  std::vector<std::uint64_t> cumulative;
  cumulative.reserve(sources.size());
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const Image& img = sources[i];
    if (img.width() < block_size || img.height() < block_size) {
      fail(ErrorCode::kInvalidArgument,
           "bank build: source image " + image_label(names, i) + " (" +
               std::to_string(img.width()) + "x" + std::to_string(img.height()) +
               ") is smaller than block size " + std::to_string(block_size));
    }
    if (img.channels() != channels) {
      fail(ErrorCode::kShape, "bank build: source image " + image_label(names, i) +
                                  " has " + std::to_string(img.channels()) +
                                  " channels, expected " + std::to_string(channels));
    }
    total += static_cast<std::uint64_t>(img.width() - block_size + 1) *
             (img.height() - block_size + 1);
    cumulative.push_back(total);
  }

  const std::size_t block_bytes =
      static_cast<std::size_t>(block_size) * block_size * channels;
  std::vector<std::uint8_t> data;
  data.reserve(block_bytes * count);
  CounterRng rng(seed, StreamTag::kBankBuild);
  for (std::size_t n = 0; n < count; ++n) {
    const std::uint64_t pick = rng.below(total);
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    const auto image_index = static_cast<std::size_t>(it - cumulative.begin());
    const std::uint64_t offset =
        pick - (image_index == 0 ? 0 : cumulative[image_index - 1]);
    const Image& img = sources[image_index];
    const auto span_x = static_cast<std::uint64_t>(img.width() - block_size + 1);
    const Block b = crop_block(img, static_cast<int>(offset % span_x),
                               static_cast<int>(offset / span_x), block_size);
    data.insert(data.end(), b.pixels().begin(), b.pixels().end());
  }
  return PerturbationBank(block_size, channels, std::move(data),
                          digest_sources(sources));
}

std::size_t sample_index(const PerturbationBank& bank, CounterRng& stream) {
  return static_cast<std::size_t>(stream.below(bank.count()));
}

Block sample_block(const PerturbationBank& bank, CounterRng& stream) {
  return bank.block(sample_index(bank, stream));
}

void write_bank(const PerturbationBank& bank, std::ostream& out) {
  out.write(kMagic, sizeof(kMagic));
  put_le<std::uint16_t>(out, kBankVersion);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(bank.block_size()));
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(bank.channels()));
  put_le<std::uint8_t>(out, 0);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(bank.count()));
  out.write(reinterpret_cast<const char*>(bank.source_digest().data()),
            static_cast<std::streamsize>(bank.source_digest().size()));
  out.write(reinterpret_cast<const char*>(bank.data().data()),
            static_cast<std::streamsize>(bank.data().size()));
  if (!out) fail(ErrorCode::kIo, "failed writing bank");
}

PerturbationBank read_bank(std::istream& in) {
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    fail(ErrorCode::kFormat, "not a perturbation bank (bad magic)");
  }
  const auto version = get_le<std::uint16_t>(in);
  if (version != kBankVersion) {
    fail(ErrorCode::kFormat,
         "unsupported bank format version " + std::to_string(version));
  }
  const int block_size = get_le<std::uint16_t>(in);
  const int channels = get_le<std::uint8_t>(in);
  (void)get_le<std::uint8_t>(in);
  const std::uint32_t count = get_le<std::uint32_t>(in);
  Digest digest{};
  if (!in.read(reinterpret_cast<char*>(digest.data()), digest.size())) {
    fail(ErrorCode::kFormat, "bank file truncated in header");
  }
  if (count == 0) fail(ErrorCode::kFormat, "bank holds zero blocks");
  if (block_size == 0 || (channels != 1 && channels != 3)) {
    fail(ErrorCode::kFormat, "bank header has invalid block geometry");
  }
  const std::size_t bytes =
      static_cast<std::size_t>(block_size) * block_size * channels * count;
  std::vector<std::uint8_t> data(bytes);
  if (!in.read(reinterpret_cast<char*>(data.data()),
               static_cast<std::streamsize>(bytes))) {
    fail(ErrorCode::kFormat, "bank file truncated: expected " +
                                 std::to_string(bytes) + " bytes of blocks");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    fail(ErrorCode::kFormat, "bank file has trailing bytes");
  }
  return PerturbationBank(block_size, channels, std::move(data), digest);
}

void save_bank(const PerturbationBank& bank, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  write_bank(bank, out);
}

PerturbationBank load_bank(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open bank '" + path + "'");
  return read_bank(in);
}

BaselineKind BaselineKind::gauss_noise(double sigma) {
  if (!(sigma > 0.0)) fail(ErrorCode::kInvalidArgument, "noise sigma must be > 0");
  return {Type::kGaussNoise, sigma, 0};
}

BaselineKind BaselineKind::blur(int radius) {
  if (radius < 1) fail(ErrorCode::kInvalidArgument, "blur radius must be >= 1");
  return {Type::kBlur, 0.0, radius};
}

BaselineKind BaselineKind::parse(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  try {
    if (name == "zero" && arg.empty()) return zero();
    if (name == "mean" && arg.empty()) return mean();
    if (name == "noise" && !arg.empty()) return gauss_noise(std::stod(arg));
    if (name == "blur" && !arg.empty()) return blur(std::stoi(arg));
  } catch (const std::logic_error&) {
    // std::stod / std::stoi parse failures fall through.
  }
  fail(ErrorCode::kInvalidArgument, "unknown baseline '" + text +
                                        "' (expected zero, mean, noise:<sigma>, blur:<radius>)");
}

std::string BaselineKind::to_string() const {
  std::ostringstream os;
  switch (type) {
    case Type::kZero: os << "zero"; break;
    case Type::kMean: os << "mean"; break;
    case Type::kGaussNoise: os << "noise:" << sigma; break;
    case Type::kBlur: os << "blur:" << radius; break;
  }
  return os.str();
}

Block baseline_block(const BaselineKind& kind, const Image& image,
                     const PatchGrid& grid, std::size_t patch_index,
                     CounterRng& stream) {
  const int p = grid.patch_size();
  const int c = image.channels();
  switch (kind.type) {
    case BaselineKind::Type::kZero:
      grid.patch_rect(patch_index);
      return Block(p, c);
    case BaselineKind::Type::kMean: {
      grid.patch_rect(patch_index);
      std::vector<std::uint64_t> sums(c, 0);
      const auto px = image.pixels();
      for (std::size_t i = 0; i < px.size(); ++i) sums[i % c] += px[i];
      const std::uint64_t n = image.pixel_count();
      Block out(p, c);
      auto dst = out.mutable_pixels();
      for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = static_cast<std::uint8_t>((2 * sums[i % c] + n) / (2 * n));
      }
      return out;
    }
    case BaselineKind::Type::kGaussNoise: {
      Block out = extract_block(image, grid, patch_index);
      for (auto& v : out.mutable_pixels()) {
        const double noisy = v + kind.sigma * stream.normal();
        v = static_cast<std::uint8_t>(std::clamp(std::lround(noisy), 0L, 255L));
      }
      return out;
    }
    case BaselineKind::Type::kBlur: {
      const Block src = extract_block(image, grid, patch_index);
      Block out(p, c);
      const int r = kind.radius;
      const int n = (2 * r + 1) * (2 * r + 1);
      const auto in = src.pixels();
      auto dst = out.mutable_pixels();
      for (int y = 0; y < p; ++y) {
        for (int x = 0; x < p; ++x) {
          for (int k = 0; k < c; ++k) {
            int sum = 0;
            for (int dy = -r; dy <= r; ++dy) {
              const int yy = std::clamp(y + dy, 0, p - 1);
              for (int dx = -r; dx <= r; ++dx) {
                const int xx = std::clamp(x + dx, 0, p - 1);
                sum += in[(yy * p + xx) * c + k];
              }
            }
            dst[(y * p + x) * c + k] = static_cast<std::uint8_t>((2 * sum + n) / (2 * n));
          }
        }
      }
      return out;
    }
  }
  fail(ErrorCode::kInternal, "unhandled baseline kind");
}

PerturbationSource::PerturbationSource(
    std::shared_ptr<const PerturbationBank> bank)
    : source_(std::move(bank)) {
  if (!std::get<0>(source_)) fail(ErrorCode::kInvalidArgument, "null bank");
}

PerturbationSource::PerturbationSource(BaselineKind baseline)
    : source_(baseline) {}

void PerturbationSource::check_compatible(const PatchGrid& grid,
                                          int channels) const {
  const PerturbationBank* b = bank();
  if (!b) return;
  if (b->block_size() != grid.patch_size() || b->channels() != channels) {
    fail(ErrorCode::kShape,
         "bank blocks are " + std::to_string(b->block_size()) + "px/" +
             std::to_string(b->channels()) + "ch but the grid needs " +
             std::to_string(grid.patch_size()) + "px/" + std::to_string(channels) +
             "ch");
  }
}

Block PerturbationSource::draw(const Image& image, const PatchGrid& grid,
                               std::size_t patch_index,
                               CounterRng& stream) const {
  if (const PerturbationBank* b = bank()) return sample_block(*b, stream);
  return baseline_block(std::get<BaselineKind>(source_), image, grid,
                        patch_index, stream);
}

const PerturbationBank* PerturbationSource::bank() const {
  if (const auto* p = std::get_if<0>(&source_)) return p->get();
  return nullptr;
}

std::string PerturbationSource::describe() const {
  if (const PerturbationBank* b = bank()) {
    return "bank:" + digest_hex(b->source_digest());
  }
  return "baseline:" + std::get<BaselineKind>(source_).to_string();
}

}  // namespace pdcr
