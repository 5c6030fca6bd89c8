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

#ifndef PDCR_MAP_JSON_HPP_
#define PDCR_MAP_JSON_HPP_

#include <string>

#include "pdcr/engine.hpp"

namespace pdcr {

inline constexpr int kMapFormatVersion = 1;

// Serialized form is deterministic: equal maps produce equal bytes, and
// map_to_json(map_from_json(text)) == text for any text this library wrote.
std::string map_to_json(const PdcrMap& map);
PdcrMap map_from_json(const std::string& text);

void save_map(const PdcrMap& map, const std::string& path);
PdcrMap load_map(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace pdcr

#endif  // PDCR_MAP_JSON_HPP_
