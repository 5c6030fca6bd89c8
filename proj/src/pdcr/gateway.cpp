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

#include "pdcr/gateway.hpp"

#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>

#include "json.hpp"
#include "pdcr/base64.hpp"
#include "pdcr/error.hpp"

extern char** environ;

namespace pdcr {
namespace {

using Json = nlohmann::json;

std::string errno_text() { return std::strerror(errno); }

}  // namespace

void GatewayConfig::validate() const {
  if (!(request_timeout_s > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "gateway request timeout must be > 0");
  }
  if (max_in_flight < 1) {
    fail(ErrorCode::kInvalidArgument, "gateway max_in_flight must be >= 1");
  }
  if (transport == Transport::kSubprocess && command.empty()) {
    fail(ErrorCode::kInvalidArgument, "gateway subprocess command is empty");
  }
  if (transport == Transport::kTcp && (port < 1 || port > 65535)) {
    fail(ErrorCode::kInvalidArgument, "gateway tcp port out of range");
  }
}

LineChannel::LineChannel(int fd, int child) : fd_(fd), child_(child) {}

LineChannel::~LineChannel() {
  ::close(fd_);
  if (child_ <= 0) return;
  for (int i = 0; i < 200; ++i) {
    if (::waitpid(child_, nullptr, WNOHANG) != 0) return;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  ::kill(child_, SIGKILL);
  ::waitpid(child_, nullptr, 0);
}

std::unique_ptr<LineChannel> LineChannel::spawn(const std::string& command) {
  int sv[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
    fail(ErrorCode::kSession, "socketpair failed: " + errno_text());
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, sv[1], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, sv[1], STDOUT_FILENO);
  const char* argv[] = {"sh", "-c", command.c_str(), nullptr};
  pid_t pid = -1;
  const int rc = ::posix_spawn(&pid, "/bin/sh", &actions, nullptr,
                               const_cast<char* const*>(argv), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(sv[1]);
  if (rc != 0) {
    ::close(sv[0]);
    fail(ErrorCode::kSession, "cannot start model command: " + std::string(std::strerror(rc)));
  }
  return std::make_unique<LineChannel>(sv[0], pid);
}

std::unique_ptr<LineChannel> LineChannel::connect(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    fail(ErrorCode::kSession, "cannot resolve " + host + ": " + ::gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) {
    fail(ErrorCode::kSession, "cannot connect to " + host + ":" + service + ": " + errno_text());
  }
  return std::make_unique<LineChannel>(fd);
}

void LineChannel::write_line(const std::string& line) {
  std::string framed = line;
  framed.push_back('\n');
  std::size_t sent = 0;
  while (sent < framed.size()) {
    const ssize_t n = ::send(fd_, framed.data() + sent, framed.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(ErrorCode::kSession, "write to model server failed: " + errno_text());
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> LineChannel::read_line(double timeout_s) {
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration<double>(std::max(timeout_s, 0.0));
  char chunk[65536];
  while (true) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    if (timeout_s >= 0) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      pollfd pfd{fd_, POLLIN, 0};
      const int rc = ::poll(&pfd, 1, static_cast<int>(std::max<long long>(left.count(), 0)));
      if (rc == 0) fail(ErrorCode::kTimeout, "timed out waiting for model server");
      if (rc < 0 && errno != EINTR) {
        fail(ErrorCode::kSession, "poll on model stream failed: " + errno_text());
      }
      if (rc <= 0) continue;
    }
    const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
    if (n == 0) return std::nullopt;
    if (n < 0) {
      if (errno == EINTR) continue;
      return std::nullopt;
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

void LineChannel::shutdown_write() { ::shutdown(fd_, SHUT_WR); }
void LineChannel::shutdown_all() { ::shutdown(fd_, SHUT_RDWR); }

GatewaySession::GatewaySession(std::unique_ptr<LineChannel> channel,
                               const GatewayConfig& config)
    : channel_(std::move(channel)), config_(config) {
  if (!(config.request_timeout_s > 0.0) || config.max_in_flight < 1) {
    fail(ErrorCode::kInvalidArgument, "gateway timeout and max_in_flight must be positive");
  }
  const auto hello_line = channel_->read_line(config.request_timeout_s);
  if (!hello_line) {
    fail(ErrorCode::kSession, "model server closed the stream before its hello");
  }
  Json hello;
  try {
    hello = Json::parse(*hello_line);
  } catch (const Json::parse_error&) {
    fail(ErrorCode::kSession, "malformed hello line: " + *hello_line);
  }
  if (!hello.is_object() || hello.value("hello", false) != true ||
      !hello.contains("protocol") || !hello["protocol"].is_number_integer()) {
    fail(ErrorCode::kSession, "malformed hello line: " + *hello_line);
  }
  info_.protocol = hello["protocol"].get<int>();
  if (info_.protocol != kWireProtocolVersion) {
    fail(ErrorCode::kSession, "protocol version mismatch: server speaks " +
                                  std::to_string(info_.protocol) + ", client speaks " +
                                  std::to_string(kWireProtocolVersion));
  }
  if (!hello.contains("model") || !hello["model"].is_string() ||
      !hello.contains("batch") || !hello["batch"].is_number_integer() ||
      hello["batch"].get<long long>() < 1) {
    fail(ErrorCode::kSession, "hello must carry a model name and batch >= 1");
  }
  info_.model = hello["model"].get<std::string>();
  info_.server_batch = hello["batch"].get<std::size_t>();
  info_.effective_limit = std::min(config.max_in_flight, info_.server_batch);
  reader_ = std::thread([this] { reader_loop(); });
}

GatewaySession::~GatewaySession() {
  try {
    close();
  } catch (...) {
  }
}

std::unique_ptr<GatewaySession> GatewaySession::open(const GatewayConfig& config) {
  config.validate();
  auto channel = config.transport == GatewayConfig::Transport::kSubprocess
                     ? LineChannel::spawn(config.command)
                     : LineChannel::connect(config.host, config.port);
  return std::make_unique<GatewaySession>(std::move(channel), config);
}

void GatewaySession::release_slot() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  slot_cv_.notify_one();
}

Mask GatewaySession::predict(const Image& image) {
  std::uint64_t id = 0;
  std::future<std::vector<std::uint8_t>> result;
  // Held here too so dropping the routing entry never breaks the promise.
  std::shared_ptr<Pending> pending;
  {
    std::unique_lock lock(mu_);
    slot_cv_.wait(lock, [&] { return dead_ || closed_ || in_flight_ < info_.effective_limit; });
    if (dead_ || closed_) {
      fail(ErrorCode::kSession, "gateway session is down: " +
                                    (dead_ ? dead_reason_ : std::string("closed")));
    }
    ++in_flight_;
    peak_in_flight_ = std::max(peak_in_flight_, in_flight_);
    id = next_id_++;
    pending = std::make_shared<Pending>();
    result = pending->promise.get_future();
    pending_[id] = pending;
  }

  Json request = {{"id", id},
                  {"width", image.width()},
                  {"height", image.height()},
                  {"channels", image.channels()},
                  {"pixels", base64_encode(image.pixels())}};
  try {
    std::lock_guard lock(write_mu_);
    channel_->write_line(request.dump());
  } catch (...) {
    {
      std::lock_guard lock(mu_);
      pending_.erase(id);
    }
    release_slot();
    throw;
  }

  const auto timeout = std::chrono::duration<double>(config_.request_timeout_s);
  if (result.wait_for(timeout) != std::future_status::ready) {
    {
      std::lock_guard lock(mu_);
      pending_.erase(id);
    }
    if (result.wait_for(std::chrono::seconds(0)) != std::future_status::ready) {
      release_slot();
      fail(ErrorCode::kTimeout, "request id " + std::to_string(id) + " timed out after " +
                                    std::to_string(config_.request_timeout_s) + " s");
    }
  }
  release_slot();
  std::vector<std::uint8_t> bits = result.get();

  const std::size_t expected = image.pixel_count();
  if (bits.size() != expected) {
    fail(ErrorCode::kShape, "request id " + std::to_string(id) + ": mask has " +
                                std::to_string(bits.size()) + " bytes, expected " +
                                std::to_string(expected));
  }
  for (auto b : bits) {
    if (b > 1) {
      fail(ErrorCode::kProtocol, "request id " + std::to_string(id) +
                                     ": mask byte " + std::to_string(b) + " is not 0 or 1");
    }
  }
  return Mask(image.width(), image.height(), std::move(bits));
}

void GatewaySession::reader_loop() {
  while (true) {
    std::optional<std::string> line;
    try {
      line = channel_->read_line();
    } catch (const Error& e) {
      fail_all(e.what());
      return;
    }
    if (!line) {
      fail_all("model server closed the stream");
      return;
    }
    Json msg;
    try {
      msg = Json::parse(*line);
    } catch (const Json::parse_error&) {
      fail_all("malformed line from model server: " + line->substr(0, 200));
      return;
    }
    if (!msg.is_object() || !msg.contains("id") || !msg["id"].is_number_unsigned()) {
      const std::string detail =
          msg.is_object() && msg.contains("error") && msg["error"].is_string()
              ? msg["error"].get<std::string>()
              : line->substr(0, 200);
      fail_all("model server reported an unroutable message: " + detail);
      return;
    }
    const auto id = msg["id"].get<std::uint64_t>();
    std::shared_ptr<Pending> pending;
    {
      std::lock_guard lock(mu_);
      const auto it = pending_.find(id);
      if (it == pending_.end()) continue;  // abandoned after timeout
      pending = it->second;
      pending_.erase(it);
    }
    const std::string tag = "request id " + std::to_string(id) + ": ";
    if (msg.contains("error") && !msg["error"].is_null()) {
      const std::string text =
          msg["error"].is_string() ? msg["error"].get<std::string>() : msg["error"].dump();
      pending->promise.set_exception(
          std::make_exception_ptr(Error(ErrorCode::kModel, tag + "server error: " + text)));
    } else if (msg.contains("mask") && msg["mask"].is_string()) {
      try {
        pending->promise.set_value(base64_decode(msg["mask"].get<std::string>()));
      } catch (const Error& e) {
        pending->promise.set_exception(
            std::make_exception_ptr(Error(ErrorCode::kProtocol, tag + e.what())));
      }
    } else {
      pending->promise.set_exception(std::make_exception_ptr(
          Error(ErrorCode::kProtocol, tag + "response has neither mask nor error")));
    }
  }
}

void GatewaySession::fail_all(const std::string& reason) {
  std::map<std::uint64_t, std::shared_ptr<Pending>> orphans;
  {
    std::lock_guard lock(mu_);
    dead_ = true;
    dead_reason_ = reason;
    orphans.swap(pending_);
  }
  for (auto& [id, pending] : orphans) {
    pending->promise.set_exception(std::make_exception_ptr(
        Error(ErrorCode::kProtocol, "request id " + std::to_string(id) + ": " + reason)));
  }
  slot_cv_.notify_all();
}

void GatewaySession::close() {
  {
    std::lock_guard lock(mu_);
    if (closed_) return;
    closed_ = true;
  }
  slot_cv_.notify_all();
  try {
    std::lock_guard lock(write_mu_);
    channel_->write_line(R"({"bye":true})");
    channel_->shutdown_write();
  } catch (const Error&) {
    // Server already gone; the reader will observe EOF.
  }
  {
    std::unique_lock lock(mu_);
    slot_cv_.wait_for(lock, std::chrono::duration<double>(std::min(config_.request_timeout_s, 5.0)),
                      [&] { return dead_; });
  }
  channel_->shutdown_all();
  if (reader_.joinable()) reader_.join();
}

std::size_t GatewaySession::peak_in_flight() const {
  std::lock_guard lock(mu_);
  return peak_in_flight_;
}

GatewaySegmenter::GatewaySegmenter(std::unique_ptr<GatewaySession> session)
    : session_(std::move(session)) {
  if (!session_) fail(ErrorCode::kInvalidArgument, "null gateway session");
}

std::string GatewaySegmenter::identity() const { return session_->info().model; }

Mask GatewaySegmenter::predict(const Image& image) const {
  return session_->predict(image);
}

std::size_t GatewaySegmenter::max_in_flight() const {
  return session_->info().effective_limit;
}

std::unique_ptr<Segmenter> open_model(const std::string& uri,
                                      const GatewayConfig& config) {
  if (uri.rfind("ref:", 0) == 0) return make_reference_segmenter(uri);
  GatewayConfig cfg = config;
  if (uri.rfind("cmd:", 0) == 0) {
    cfg.transport = GatewayConfig::Transport::kSubprocess;
    cfg.command = uri.substr(4);
  } else if (uri.rfind("tcp:", 0) == 0) {
    const std::string rest = uri.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos) {
      fail(ErrorCode::kInvalidArgument, "tcp model URI must be tcp:<host>:<port>");
    }
    cfg.transport = GatewayConfig::Transport::kTcp;
    cfg.host = rest.substr(0, colon);
    try {
      cfg.port = std::stoi(rest.substr(colon + 1));
    } catch (const std::logic_error&) {
      fail(ErrorCode::kInvalidArgument, "bad port in model URI '" + uri + "'");
    }
  } else {
    fail(ErrorCode::kInvalidArgument,
         "model URI must start with ref:, cmd: or tcp: (got '" + uri + "')");
  }
  return std::make_unique<GatewaySegmenter>(GatewaySession::open(cfg));
}

}  // namespace pdcr
