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

#ifndef PDCR_GATEWAY_HPP_
#define PDCR_GATEWAY_HPP_

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "pdcr/imaging.hpp"
#include "pdcr/segmenter.hpp"

namespace pdcr {

inline constexpr int kWireProtocolVersion = 1;

struct GatewayConfig {
  enum class Transport { kSubprocess, kTcp };

  Transport transport = Transport::kSubprocess;
  std::string command;  // kSubprocess: run via /bin/sh -c
  std::string host = "127.0.0.1";
  int port = 0;
  double request_timeout_s = 60.0;
  std::size_t max_in_flight = 32;  // client-side limit before negotiation

  void validate() const;
};

// Full-duplex byte stream carrying newline-delimited JSON.
class LineChannel {
 public:
  // Takes ownership of a connected stream socket. `child` is a process to
  // reap on close, or -1.
  explicit LineChannel(int fd, int child = -1);
  ~LineChannel();

  LineChannel(const LineChannel&) = delete;
  LineChannel& operator=(const LineChannel&) = delete;

  static std::unique_ptr<LineChannel> spawn(const std::string& command);
  static std::unique_ptr<LineChannel> connect(const std::string& host, int port);

  // Sends `line` plus '\n'. Throws kSession on failure.
  void write_line(const std::string& line);
  // Next line without its '\n'; nullopt on EOF. timeout_s < 0 waits forever.
  // Throws kTimeout when the deadline passes.
  std::optional<std::string> read_line(double timeout_s = -1.0);

  void shutdown_write();
  // Unblocks a concurrent read_line().
  void shutdown_all();

 private:
  int fd_;
  int child_;
  std::string buffer_;
};

struct SessionInfo {
  std::string model;
  int protocol = 0;
  std::size_t server_batch = 0;
  std::size_t effective_limit = 0;  // min(client, server)
};

// One negotiated connection to a model server. predict() may be called from
// many threads; requests are multiplexed over the stream by id and at most
// effective_limit are outstanding at once.
class GatewaySession {
 public:
  // Reads the server hello and validates the protocol version.
  GatewaySession(std::unique_ptr<LineChannel> channel, const GatewayConfig& config);
  ~GatewaySession();

  GatewaySession(const GatewaySession&) = delete;
  GatewaySession& operator=(const GatewaySession&) = delete;

  static std::unique_ptr<GatewaySession> open(const GatewayConfig& config);

  const SessionInfo& info() const { return info_; }

  Mask predict(const Image& image);

  // Sends {"bye":true} and waits for the server to close the stream.
  void close();

  std::size_t peak_in_flight() const;

 private:
  struct Pending {
    std::promise<std::vector<std::uint8_t>> promise;
  };

  void reader_loop();
  void fail_all(const std::string& reason);
  void release_slot();

  std::unique_ptr<LineChannel> channel_;
  GatewayConfig config_;
  SessionInfo info_;

  std::mutex write_mu_;
  mutable std::mutex mu_;
  std::condition_variable slot_cv_;
  std::map<std::uint64_t, std::shared_ptr<Pending>> pending_;
  std::uint64_t next_id_ = 1;
  std::size_t in_flight_ = 0;
  std::size_t peak_in_flight_ = 0;
  bool dead_ = false;
  std::string dead_reason_;
  bool closed_ = false;
  std::thread reader_;
};

// Adapts a session to the Segmenter interface. identity() is the model name
// the server announced.
class GatewaySegmenter final : public Segmenter {
 public:
  explicit GatewaySegmenter(std::unique_ptr<GatewaySession> session);

  std::string identity() const override;
  Mask predict(const Image& image) const override;
  std::size_t max_in_flight() const override;

  GatewaySession& session() const { return *session_; }

 private:
  std::unique_ptr<GatewaySession> session_;
};

// "ref:..." builds an in-process reference segmenter; "cmd:<shell command>"
// and "tcp:<host>:<port>" open a gateway session using `config` for limits.
std::unique_ptr<Segmenter> open_model(const std::string& uri,
                                      const GatewayConfig& config = {});

}  // namespace pdcr

#endif  // PDCR_GATEWAY_HPP_
