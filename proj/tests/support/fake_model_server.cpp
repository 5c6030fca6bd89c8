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

// Minimal wire-protocol server used by the gateway tests. Wraps a reference
// segmenter and can be told to misbehave in specific ways.

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <fstream>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pdcr/base64.hpp"
#include "pdcr/segmenter.hpp"

using nlohmann::json;

namespace {

struct Options {
  std::string ref = "ref:pixel_threshold?t=128";
  std::string name;
  int protocol = 1;
  int batch = 8;
  int delay_ms = 0;
  bool reverse = false;
  bool bad_length = false;
  bool bad_byte = false;
  bool hang = false;
  std::int64_t error_id = -1;
  std::string stats;
};

std::mutex mu;
std::condition_variable cv;
std::deque<json> queue;
bool input_done = false;
std::int64_t received = 0;
std::int64_t answered = 0;
std::int64_t max_outstanding = 0;

void reader() {
  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    json msg = json::parse(line, nullptr, false);
    std::lock_guard<std::mutex> lock(mu);
    if (msg.is_object() && msg.value("bye", false)) break;
    ++received;
    max_outstanding = std::max(max_outstanding, received - answered);
    queue.push_back(std::move(msg));
    cv.notify_all();
  }
  std::lock_guard<std::mutex> lock(mu);
  input_done = true;
  cv.notify_all();
}

json answer(const Options& opt, const pdcr::Segmenter& model, const json& req) {
  const auto id = req.at("id").get<std::int64_t>();
  if (id == opt.error_id) return {{"id", id}, {"error", "injected failure"}};
  const auto bytes = pdcr::base64_decode(req.at("pixels").get<std::string>());
  pdcr::Image img(req.at("width").get<int>(), req.at("height").get<int>(),
                  req.at("channels").get<int>(), bytes);
  const pdcr::Mask mask = model.predict(img);
  std::vector<std::uint8_t> out(mask.bits().begin(), mask.bits().end());
  if (opt.bad_length) out.pop_back();
  if (opt.bad_byte && !out.empty()) out[0] = 7;
  return {{"id", id}, {"mask", pdcr::base64_encode(out)}};
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  CLI::App app{"fake segmentation model server"};
  app.add_option("--ref", opt.ref);
  app.add_option("--name", opt.name);
  app.add_option("--protocol", opt.protocol);
  app.add_option("--batch", opt.batch);
  app.add_option("--delay-ms", opt.delay_ms);
  app.add_flag("--reverse", opt.reverse);
  app.add_flag("--bad-length", opt.bad_length);
  app.add_flag("--bad-byte", opt.bad_byte);
  app.add_flag("--hang", opt.hang);
  app.add_option("--error-id", opt.error_id);
  app.add_option("--stats", opt.stats);
  CLI11_PARSE(app, argc, argv);

  const auto model = pdcr::make_reference_segmenter(opt.ref);
  if (opt.name.empty()) opt.name = model->identity();
  std::cout << json{{"hello", true}, {"protocol", opt.protocol}, {"model", opt.name},
                    {"batch", opt.batch}}
                   .dump()
            << std::endl;

  std::thread input(reader);
  for (;;) {
    std::vector<json> work;
    {
      std::unique_lock<std::mutex> lock(mu);
      cv.wait(lock, [] { return !queue.empty() || input_done; });
      if (queue.empty()) break;
      if (opt.reverse) {
        // Hold the first request briefly so a second one can overtake it.
        cv.wait_for(lock, std::chrono::milliseconds(500),
                    [] { return queue.size() >= 2 || input_done; });
      }
      while (!queue.empty() && work.size() < static_cast<std::size_t>(opt.batch)) {
        work.push_back(std::move(queue.front()));
        queue.pop_front();
      }
    }
    if (opt.hang) continue;
    if (opt.delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(opt.delay_ms));
    if (opt.reverse) std::reverse(work.begin(), work.end());
    for (const auto& req : work) {
      const json resp = answer(opt, *model, req);
      std::lock_guard<std::mutex> lock(mu);
      ++answered;
      std::cout << resp.dump() << std::endl;
    }
  }
  input.join();
  if (!opt.stats.empty()) {
    std::ofstream(opt.stats) << "received=" << received << "\nmax_outstanding=" << max_outstanding
                             << "\n";
  }
  return 0;
}
