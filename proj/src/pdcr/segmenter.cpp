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

#include "pdcr/segmenter.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <map>
#include <vector>

#include "pdcr/error.hpp"

namespace pdcr {
namespace {

int parse_int(const std::string& text, const std::string& what) {
  int value = 0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    fail(ErrorCode::kInvalidArgument, "bad integer for " + what + ": '" + text + "'");
  }
  return value;
}

class PixelThreshold final : public Segmenter {
 public:
  explicit PixelThreshold(int t) : t_(t) {
    if (t < 0 || t > 255) {
      fail(ErrorCode::kInvalidArgument, "pixel_threshold: t must be in [0,255]");
    }
  }
  std::string identity() const override {
    return "ref:pixel_threshold?t=" + std::to_string(t_);
  }
  Mask predict(const Image& image) const override {
    std::vector<std::uint8_t> bits(image.pixel_count());
    const auto px = image.pixels();
    if (image.channels() == 1) {
      // Local copy: uint8 stores may alias the member and block vectorization.
      const int t = t_;
      for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = px[i] >= t;
    } else {
      // (2*sum + 3) / 6 >= t  <=>  2*sum + 3 >= 6*t
      const unsigned bound = t_ == 0 ? 0u : static_cast<unsigned>(6 * t_ - 3);
      const std::uint8_t* p = px.data();
      for (std::size_t i = 0; i < bits.size(); ++i, p += 3) {
        bits[i] = 2u * (p[0] + p[1] + p[2]) >= bound;
      }
    }
    return Mask(image.width(), image.height(), std::move(bits));
  }

 private:
  int t_;
};

class GlobalThreshold final : public Segmenter {
 public:
  std::string identity() const override { return "ref:global_threshold"; }
  Mask predict(const Image& image) const override {
    const std::vector<int> plane = intensity_plane(image);
    std::int64_t total = 0;
    for (int v : plane) total += v;
    const auto n = static_cast<std::int64_t>(plane.size());
    std::vector<std::uint8_t> bits(plane.size());
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = plane[i] * n >= total;
    return Mask(image.width(), image.height(), std::move(bits));
  }
};

class LocalThreshold final : public Segmenter {
 public:
  explicit LocalThreshold(int r) : r_(r) {
    if (r < 1) fail(ErrorCode::kInvalidArgument, "local_threshold: r must be >= 1");
  }
  std::string identity() const override {
    return "ref:local_threshold?r=" + std::to_string(r_);
  }
  Mask predict(const Image& image) const override {
    const int w = image.width();
    const int h = image.height();
    const std::vector<int> plane = intensity_plane(image);
    // Summed-area table with a zero border row/column.
    std::vector<std::int64_t> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0);
    for (int y = 0; y < h; ++y) {
      std::int64_t row = 0;
      for (int x = 0; x < w; ++x) {
        row += plane[static_cast<std::size_t>(y) * w + x];
        sat[static_cast<std::size_t>(y + 1) * (w + 1) + x + 1] =
            sat[static_cast<std::size_t>(y) * (w + 1) + x + 1] + row;
      }
    }
    auto at = [&](int x, int y) { return sat[static_cast<std::size_t>(y) * (w + 1) + x]; };
    std::vector<std::uint8_t> bits(plane.size());
    for (int y = 0; y < h; ++y) {
      const int y0 = std::max(0, y - r_);
      const int y1 = std::min(h, y + r_ + 1);
      for (int x = 0; x < w; ++x) {
        const int x0 = std::max(0, x - r_);
        const int x1 = std::min(w, x + r_ + 1);
        const std::int64_t sum = at(x1, y1) - at(x0, y1) - at(x1, y0) + at(x0, y0);
        const std::int64_t n = static_cast<std::int64_t>(x1 - x0) * (y1 - y0);
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        bits[i] = plane[i] * n >= sum;
      }
    }
    return Mask(w, h, std::move(bits));
  }

 private:
  int r_;
};

class PlantedCause final : public Segmenter {
 public:
  PlantedCause(const Rect& source, const Rect& target, int t_on)
      : source_(source), target_(target), t_on_(t_on), base_(128) {
    if (source.intersects(target)) {
      fail(ErrorCode::kInvalidArgument, "planted_cause: source and target overlap");
    }
    if (source.w < 1 || source.h < 1 || target.w < 1 || target.h < 1) {
      fail(ErrorCode::kInvalidArgument, "planted_cause: empty rectangle");
    }
    if (t_on < 0 || t_on > 255) {
      fail(ErrorCode::kInvalidArgument, "planted_cause: t_on must be in [0,255]");
    }
  }
  std::string identity() const override {
    return "ref:planted_cause?source=" + source_.to_string() +
           "&target=" + target_.to_string() + "&t_on=" + std::to_string(t_on_);
  }
  Mask predict(const Image& image) const override {
    check_rect_within(source_, image.width(), image.height(), "planted_cause source");
    check_rect_within(target_, image.width(), image.height(), "planted_cause target");
    Mask mask = base_.predict(image);
    std::int64_t sum = 0;
    for (int y = source_.y; y < source_.y + source_.h; ++y) {
      for (int x = source_.x; x < source_.x + source_.w; ++x) {
        sum += intensity(image, x, y);
      }
    }
    const bool gate_on =
        sum >= static_cast<std::int64_t>(t_on_) * source_.w * source_.h;
    if (!gate_on) {
      for (int y = target_.y; y < target_.y + target_.h; ++y) {
        for (int x = target_.x; x < target_.x + target_.w; ++x) mask.at(x, y) = 0;
      }
    }
    return mask;
  }

 private:
  Rect source_;
  Rect target_;
  int t_on_;
  PixelThreshold base_;
};

}  // namespace

std::unique_ptr<Segmenter> make_pixel_threshold(int t) {
  return std::make_unique<PixelThreshold>(t);
}

std::unique_ptr<Segmenter> make_global_threshold() {
  return std::make_unique<GlobalThreshold>();
}

std::unique_ptr<Segmenter> make_local_threshold(int radius) {
  return std::make_unique<LocalThreshold>(radius);
}

std::unique_ptr<Segmenter> make_planted_cause(const Rect& source,
                                              const Rect& target, int t_on) {
  return std::make_unique<PlantedCause>(source, target, t_on);
}

Rect parse_rect(const std::string& text) {
  std::vector<int> parts;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    parts.push_back(parse_int(text.substr(start, comma - start), "rectangle"));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (parts.size() != 4) {
    fail(ErrorCode::kInvalidArgument, "rectangle must be x,y,w,h: '" + text + "'");
  }
  return {parts[0], parts[1], parts[2], parts[3]};
}

std::unique_ptr<Segmenter> make_reference_segmenter(const std::string& uri) {
  constexpr std::string_view kScheme = "ref:";
  if (uri.rfind(kScheme, 0) != 0) {
    fail(ErrorCode::kInvalidArgument, "reference segmenter URI must start with 'ref:': " + uri);
  }
  const std::string rest = uri.substr(kScheme.size());
  const auto q = rest.find('?');
  const std::string name = rest.substr(0, q);
  std::map<std::string, std::string> params;
  if (q != std::string::npos) {
    std::size_t start = q + 1;
    while (start <= rest.size()) {
      const auto amp = rest.find('&', start);
      const std::string kv = rest.substr(start, amp - start);
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) {
        fail(ErrorCode::kInvalidArgument, "malformed parameter '" + kv + "' in " + uri);
      }
      params[kv.substr(0, eq)] = kv.substr(eq + 1);
      if (amp == std::string::npos) break;
      start = amp + 1;
    }
  }
  auto take = [&](const std::string& key) -> std::string {
    const auto it = params.find(key);
    if (it == params.end()) {
      fail(ErrorCode::kInvalidArgument, uri + ": missing parameter '" + key + "'");
    }
    std::string value = it->second;
    params.erase(it);
    return value;
  };

  std::unique_ptr<Segmenter> model;
  if (name == "pixel_threshold") {
    model = make_pixel_threshold(parse_int(take("t"), "t"));
  } else if (name == "global_threshold") {
    model = make_global_threshold();
  } else if (name == "local_threshold") {
    model = make_local_threshold(parse_int(take("r"), "r"));
  } else if (name == "planted_cause") {
    const Rect source = parse_rect(take("source"));
    const Rect target = parse_rect(take("target"));
    model = make_planted_cause(source, target, parse_int(take("t_on"), "t_on"));
  } else {
    fail(ErrorCode::kInvalidArgument, "unknown reference segmenter '" + name + "'");
  }
  if (!params.empty()) {
    fail(ErrorCode::kInvalidArgument,
         uri + ": unexpected parameter '" + params.begin()->first + "'");
  }
  return model;
}

}  // namespace pdcr
