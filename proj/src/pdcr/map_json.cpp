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

#include "pdcr/map_json.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "pdcr/error.hpp"

namespace pdcr {

using Json = nlohmann::ordered_json;

namespace {

const char* verdict_tag(PatchVerdict::Kind kind) {
  switch (kind) {
    case PatchVerdict::Kind::kRoiMember: return "roi";
    case PatchVerdict::Kind::kIrrelevant: return "irr";
    case PatchVerdict::Kind::kAte: return "ate";
  }
  return "?";
}

PatchVerdict::Kind parse_verdict_tag(const std::string& tag) {
  if (tag == "roi") return PatchVerdict::Kind::kRoiMember;
  if (tag == "irr") return PatchVerdict::Kind::kIrrelevant;
  if (tag == "ate") return PatchVerdict::Kind::kAte;
  fail(ErrorCode::kFormat, "unknown verdict tag '" + tag + "'");
}

}  // namespace

std::string map_to_json(const PdcrMap& map) {
  Json doc;
  doc["pdcr_map_version"] = kMapFormatVersion;
  doc["model_id"] = map.model_id;
  doc["perturbation"] = map.perturbation;
  doc["config"] = {
      {"patch_size", map.config.patch_size},
      {"screen_trials", map.config.screen_trials},
      {"screen_threshold", map.config.screen_threshold},
      {"ate_trials", map.config.ate_trials},
      {"seed", map.config.seed},
      {"reference_mode", reference_mode_name(map.config.reference_mode)},
  };
  doc["image"] = {{"width", map.grid.width()}, {"height", map.grid.height()}};
  doc["roi"] = {{"x", map.roi.x}, {"y", map.roi.y}, {"w", map.roi.w}, {"h", map.roi.h}};
  doc["m0"] = map.m0;
  doc["degenerate"] = map.degenerate;
  doc["total_model_calls"] = map.total_model_calls;
  Json verdicts = Json::array();
  for (const PatchVerdict& v : map.verdicts) {
    verdicts.push_back({{"v", verdict_tag(v.kind)}, {"ate", v.ate}, {"trials", v.trials}});
  }
  doc["verdicts"] = std::move(verdicts);
  return doc.dump(1) + "\n";
}

PdcrMap map_from_json(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::kFormat, std::string("map document is not valid JSON: ") + e.what());
  }
  try {
    const int version = doc.at("pdcr_map_version").get<int>();
    if (version != kMapFormatVersion) {
      fail(ErrorCode::kFormat, "unsupported pdcr_map_version " + std::to_string(version));
    }
    PdcrMap map;
    map.model_id = doc.at("model_id").get<std::string>();
    map.perturbation = doc.at("perturbation").get<std::string>();
    const Json& cfg = doc.at("config");
    map.config.patch_size = cfg.at("patch_size").get<int>();
    map.config.screen_trials = cfg.at("screen_trials").get<int>();
    map.config.screen_threshold = cfg.at("screen_threshold").get<double>();
    map.config.ate_trials = cfg.at("ate_trials").get<int>();
    map.config.seed = cfg.at("seed").get<std::uint64_t>();
    map.config.reference_mode =
        parse_reference_mode(cfg.at("reference_mode").get<std::string>());
    map.config.validate();
    map.grid = PatchGrid(doc.at("image").at("width").get<int>(),
                         doc.at("image").at("height").get<int>(),
                         map.config.patch_size);
    const Json& roi = doc.at("roi");
    map.roi = {roi.at("x").get<int>(), roi.at("y").get<int>(), roi.at("w").get<int>(),
               roi.at("h").get<int>()};
    check_rect_within(map.roi, map.grid.width(), map.grid.height(), "roi");
    map.m0 = doc.at("m0").get<double>();
    if (!(map.m0 >= 0.0 && map.m0 <= 1.0)) fail(ErrorCode::kFormat, "m0 outside [0,1]");
    map.degenerate = doc.at("degenerate").get<bool>();
    map.total_model_calls = doc.at("total_model_calls").get<std::uint64_t>();
    const Json& verdicts = doc.at("verdicts");
    if (!verdicts.is_array() || verdicts.size() != map.grid.size()) {
      fail(ErrorCode::kFormat, "verdicts must be an array of " +
                                   std::to_string(map.grid.size()) + " entries");
    }
    map.verdicts.reserve(verdicts.size());
    for (const Json& v : verdicts) {
      map.verdicts.push_back({parse_verdict_tag(v.at("v").get<std::string>()),
                              v.at("ate").get<double>(), v.at("trials").get<int>()});
    }
    return map;
  } catch (const Json::exception& e) {
    fail(ErrorCode::kFormat, std::string("malformed map document: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kFormat) throw;
    fail(ErrorCode::kFormat, std::string("invalid map document: ") + e.what());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !out.write(text.data(), static_cast<std::streamsize>(text.size()))) {
    fail(ErrorCode::kIo, "cannot write '" + path + "'");
  }
}

void save_map(const PdcrMap& map, const std::string& path) {
  write_text_file(path, map_to_json(map));
}

PdcrMap load_map(const std::string& path) { return map_from_json(read_text_file(path)); }

}  // namespace pdcr
