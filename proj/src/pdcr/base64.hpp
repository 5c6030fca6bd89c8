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

#ifndef PDCR_BASE64_HPP_
#define PDCR_BASE64_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pdcr {

// Standard alphabet, padded, no line breaks.
std::string base64_encode(std::span<const std::uint8_t> bytes);
// Throws kProtocol on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace pdcr

#endif  // PDCR_BASE64_HPP_
