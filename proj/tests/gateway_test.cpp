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

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <gtest/gtest.h>

#include "json.hpp"
#include "pdcr/base64.hpp"
#include "pdcr/engine.hpp"
#include "pdcr/error.hpp"
#include "pdcr/gateway.hpp"
#include "pdcr/map_json.hpp"
#include "pdcr/segmenter.hpp"
#include "support/synth.hpp"

namespace pdcr {
namespace {

using testing::blob_image;
using testing::noise_image;
using testing::threshold_oracle;

std::string server(const std::string& flags = "") {
  return std::string("'") + PDCR_FAKE_SERVER + "' " + flags;
}

GatewayConfig subprocess(const std::string& flags, double timeout = 10.0,
                         std::size_t limit = 32) {
  GatewayConfig c;
  c.command = server(flags);
  c.request_timeout_s = timeout;
  c.max_in_flight = limit;
  return c;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kInternal;
}

TEST(Gateway, HandshakeTakesTheSmallerLimit) {
  const auto session = GatewaySession::open(subprocess("--batch 8"));
  EXPECT_EQ(session->info().protocol, 1);
  EXPECT_EQ(session->info().server_batch, 8u);
  EXPECT_EQ(session->info().effective_limit, 8u);
  EXPECT_EQ(session->info().model, "ref:pixel_threshold?t=128");

  const auto small = GatewaySession::open(subprocess("--batch 8", 10.0, 3));
  EXPECT_EQ(small->info().effective_limit, 3u);
}

TEST(Gateway, ProtocolVersionMismatchIsASessionError) {
  EXPECT_EQ(code_of([] { GatewaySession::open(subprocess("--protocol 2")); }),
            ErrorCode::kSession);
}

TEST(Gateway, UnreachableTransportsAreSessionErrors) {
  GatewayConfig quiet;
  quiet.command = "true";
  EXPECT_EQ(code_of([&] { GatewaySession::open(quiet); }), ErrorCode::kSession);
  GatewayConfig tcp;
  tcp.transport = GatewayConfig::Transport::kTcp;
  tcp.port = 1;
  EXPECT_EQ(code_of([&] { GatewaySession::open(tcp); }), ErrorCode::kSession);
  EXPECT_EQ(code_of([] { open_model("http://x"); }), ErrorCode::kInvalidArgument);
}

TEST(Gateway, PredictionsMatchInProcessModel) {
  const auto remote = open_model("cmd:" + server("--ref 'ref:local_threshold?r=3'"));
  const auto local = make_local_threshold(3);
  EXPECT_EQ(remote->identity(), local->identity());
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Image img = noise_image(24 + 8 * (seed % 3), 16, seed % 2 ? 3 : 1, seed);
    EXPECT_EQ(remote->predict(img), local->predict(img)) << seed;
  }
}

TEST(Gateway, OutOfOrderResponsesReachTheirCallers) {
  const auto session = GatewaySession::open(subprocess("--reverse"));
  const auto local = make_pixel_threshold(128);
  const Image a = noise_image(16, 16, 1, 1);
  const Image b = noise_image(16, 16, 1, 2);
  Mask ma, mb;
  std::thread ta([&] { ma = session->predict(a); });
  std::thread tb([&] { mb = session->predict(b); });
  ta.join();
  tb.join();
  EXPECT_EQ(ma, local->predict(a));
  EXPECT_EQ(mb, local->predict(b));
  EXPECT_NE(ma, mb);
}

TEST(Gateway, WrongMaskLengthIsAShapeErrorWithSizes) {
  const auto session = GatewaySession::open(subprocess("--bad-length"));
  try {
    session->predict(noise_image(8, 4, 1, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShape);
    const std::string what = e.what();
    EXPECT_NE(what.find("request id 1"), std::string::npos) << what;
    EXPECT_NE(what.find("31"), std::string::npos) << what;
    EXPECT_NE(what.find("32"), std::string::npos) << what;
  }
}

TEST(Gateway, NonBinaryMaskByteIsAProtocolError) {
  const auto session = GatewaySession::open(subprocess("--bad-byte"));
  EXPECT_EQ(code_of([&] { session->predict(noise_image(8, 8, 1, 0)); }), ErrorCode::kProtocol);
}

TEST(Gateway, ServerErrorsSurfaceWithTheRequestId) {
  const auto session = GatewaySession::open(subprocess("--error-id 2"));
  EXPECT_NO_THROW(session->predict(noise_image(8, 8, 1, 0)));
  try {
    session->predict(noise_image(8, 8, 1, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kModel);
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("injected failure"), std::string::npos);
  }
  // The session stays usable after a per-request error.
  EXPECT_NO_THROW(session->predict(noise_image(8, 8, 1, 2)));
}

TEST(Gateway, TimeoutReleasesTheInFlightSlot) {
  const auto session = GatewaySession::open(subprocess("--hang --batch 1", 0.3));
  ASSERT_EQ(session->info().effective_limit, 1u);
  const auto start = std::chrono::steady_clock::now();
  EXPECT_EQ(code_of([&] { session->predict(noise_image(8, 8, 1, 0)); }), ErrorCode::kTimeout);
  // With a single slot, a leaked slot would block this call forever.
  EXPECT_EQ(code_of([&] { session->predict(noise_image(8, 8, 1, 1)); }), ErrorCode::kTimeout);
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(5));
}

TEST(Gateway, InFlightNeverExceedsNegotiatedLimit) {
  const auto stats = std::filesystem::temp_directory_path() / "pdcr_gateway_stats.txt";
  std::filesystem::remove(stats);
  {
    const auto session =
        GatewaySession::open(subprocess("--batch 3 --delay-ms 3 --stats '" + stats.string() + "'"));
    ASSERT_EQ(session->info().effective_limit, 3u);
    const auto local = make_pixel_threshold(128);
    std::atomic<int> mismatches{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < 12; ++t) {
      threads.emplace_back([&, t] {
        for (int i = 0; i < 15; ++i) {
          const Image img = noise_image(16, 8, 1, static_cast<std::uint64_t>(t * 100 + i));
          if (session->predict(img) != local->predict(img)) ++mismatches;
        }
      });
    }
    for (auto& th : threads) th.join();
    EXPECT_EQ(mismatches.load(), 0);
    EXPECT_LE(session->peak_in_flight(), 3u);
    EXPECT_GE(session->peak_in_flight(), 2u);
    session->close();
  }
  std::ifstream in(stats);
  ASSERT_TRUE(in) << "server wrote no stats";
  std::string line;
  int received = -1, outstanding = -1;
  while (std::getline(in, line)) {
    if (line.rfind("received=", 0) == 0) received = std::stoi(line.substr(9));
    if (line.rfind("max_outstanding=", 0) == 0) outstanding = std::stoi(line.substr(16));
  }
  EXPECT_EQ(received, 12 * 15);
  EXPECT_GE(outstanding, 1);
  EXPECT_LE(outstanding, 3);
  std::filesystem::remove(stats);
}

TEST(Gateway, ExplainThroughGatewayIsByteIdenticalToInProcess) {
  const Image img = blob_image(64, 64, 21);
  const Mask gt = threshold_oracle(img, 110);
  const Rect roi{24, 24, 16, 16};
  const std::vector<Image> sources{noise_image(40, 40, 1, 3)};
  const PerturbationSource source(
      std::make_shared<const PerturbationBank>(build_bank(sources, 8, 200, 4)));
  ExplainConfig config;
  config.seed = 5;
  config.ate_trials = 10;
  const auto local = make_reference_segmenter("ref:local_threshold?r=6");
  const auto remote =
      open_model("cmd:" + server("--ref 'ref:local_threshold?r=6' --batch 4"));
  const PdcrMap a = explain(*local, img, &gt, roi, source, config, {1});
  const PdcrMap b = explain(*remote, img, &gt, roi, source, config, {8});
  EXPECT_EQ(map_to_json(a), map_to_json(b));
}

// A single-connection TCP server speaking the protocol in-process.
class TcpModelServer {
 public:
  TcpModelServer() {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    ::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
    ::listen(listen_fd_, 1);
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    thread_ = std::thread([this] { serve(); });
  }
  ~TcpModelServer() {
    thread_.join();
    ::close(listen_fd_);
  }
  int port() const { return port_; }

 private:
  void serve() {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    LineChannel channel(fd);
    channel.write_line(R"({"hello":true,"protocol":1,"model":"tcp-echo","batch":2})");
    const auto model = make_pixel_threshold(128);
    while (auto line = channel.read_line(10.0)) {
      const auto msg = nlohmann::json::parse(*line);
      if (msg.value("bye", false)) break;
      const Image img(msg["width"], msg["height"], msg["channels"],
                      base64_decode(msg["pixels"].get<std::string>()));
      const Mask m = model->predict(img);
      channel.write_line(nlohmann::json{{"id", msg["id"]},
                                        {"mask", base64_encode(m.bits())}}
                             .dump());
    }
  }

  int listen_fd_ = -1;
  int port_ = 0;
  std::thread thread_;
};

TEST(Gateway, TcpTransport) {
  TcpModelServer srv;
  {
    const auto model = open_model("tcp:127.0.0.1:" + std::to_string(srv.port()));
    EXPECT_EQ(model->identity(), "tcp-echo");
    EXPECT_EQ(model->max_in_flight(), 2u);
    const Image img = noise_image(16, 16, 3, 9);
    EXPECT_EQ(model->predict(img), make_pixel_threshold(128)->predict(img));
  }
}

}  // namespace
}  // namespace pdcr
