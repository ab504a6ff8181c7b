/*
 * Copyright 2026 The ChunkShapley Authors.
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

// HTTP client and server for the generator protocol (see protocol.hpp).

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "chunkshapley/errors.hpp"
#include "chunkshapley/generator.hpp"
#include "chunkshapley/protocol.hpp"

namespace chunkshapley {

inline constexpr const char* kEndpointEnv = "CHUNKSHAPLEY_ENDPOINT";

struct RemoteConfig {
  std::string endpoint;  // e.g. "http://127.0.0.1:8080"
  std::chrono::milliseconds timeout{120'000};
  int retries = 2;
  std::chrono::milliseconds backoff{250};  // doubled after every retry
  int max_in_flight = 8;
  std::size_t context_budget = 0;
};

// Reads the endpoint from CHUNKSHAPLEY_ENDPOINT; nullopt when unset/empty.
inline std::optional<std::string> endpoint_from_env() {
  const char* v = std::getenv(kEndpointEnv);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

// Counting semaphore that admits waiters strictly in arrival order.
class FifoSemaphore {
 public:
  explicit FifoSemaphore(int permits) : permits_(permits) {}

  void acquire() {
    std::unique_lock<std::mutex> lock(mu_);
    const std::uint64_t ticket = next_ticket_++;
    cv_.wait(lock, [&] { return ticket == serving_ && permits_ > 0; });
    --permits_;
    ++serving_;
    cv_.notify_all();
  }
  void release() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      ++permits_;
    }
    cv_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int permits_;
  std::uint64_t next_ticket_ = 0;
  std::uint64_t serving_ = 0;
};

class RemoteGenerator : public Generator {
 public:
  explicit RemoteGenerator(RemoteConfig cfg)
      : cfg_(std::move(cfg)), gate_(std::max(1, cfg_.max_in_flight)) {
    if (cfg_.endpoint.empty()) {
      throw TransportError(std::string("no generator endpoint configured; set ") +
                           kEndpointEnv);
    }
  }

  std::size_t context_budget() const override { return cfg_.context_budget; }

 protected:
  LikelihoodScore do_score(const PromptParts& parts, std::string_view target) override {
    nlohmann::json req = protocol::encode_parts(parts);
    req["target"] = std::string(target);
    const nlohmann::json resp = post(protocol::kScorePath, req);
    try {
      return {resp.at("token_logprobs").get<std::vector<double>>()};
    } catch (const nlohmann::json::exception& e) {
      throw BackendDataError(std::string("score response: ") + e.what());
    }
  }

  std::string do_generate(const PromptParts& parts, int max_new_tokens,
                          const std::vector<std::string>& stop) override {
    nlohmann::json req = protocol::encode_parts(parts);
    req["max_new_tokens"] = max_new_tokens;
    req["stop"] = stop;
    return text_field(post(protocol::kGeneratePath, req), "generate");
  }

  ControlLogits do_control_logits(const PromptParts& parts) override {
    const nlohmann::json resp = post(protocol::kControlPath, protocol::encode_parts(parts));
    try {
      const auto& c = resp.at("control_logits");
      return {c.at("need").get<double>(), c.at("done").get<double>()};
    } catch (const nlohmann::json::exception& e) {
      throw CapabilityError(std::string("backend did not return control logits: ") +
                            e.what());
    }
  }

  std::string do_select(const PromptParts& parts, std::size_t k) override {
    nlohmann::json req = protocol::encode_parts(parts);
    req["k"] = k;
    return text_field(post(protocol::kSelectPath, req), "select");
  }

 private:
  static std::string text_field(const nlohmann::json& resp, const char* what) {
    try {
      return resp.at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw BackendDataError(std::string(what) + " response: " + e.what());
    }
  }

  nlohmann::json post(const char* path, const nlohmann::json& body) {
    gate_.acquire();
    struct Release {
      FifoSemaphore& g;
      ~Release() { g.release(); }
    } release{gate_};

    const std::string payload = body.dump();
    auto backoff = cfg_.backoff;
    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
      httplib::Client client(cfg_.endpoint);
      client.set_connection_timeout(cfg_.timeout);
      client.set_read_timeout(cfg_.timeout);
      client.set_write_timeout(cfg_.timeout);
      auto res = client.Post(path, payload, "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500 && res->status != 501) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      const std::string detail = "HTTP " + std::to_string(res->status) + " from " +
                                 path + ": " + res->body;
      switch (res->status) {
        case 200: break;
        case 400: throw ContractViolation(detail);
        case 413: throw SizingError(detail);
        case 501: throw CapabilityError(detail);
        default: throw BackendDataError(detail);
      }
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::parse_error& e) {
        throw BackendDataError(std::string("unparseable response from ") + path +
                               ": " + e.what());
      }
    }
    throw TransportError("backend " + cfg_.endpoint + path + " unreachable after " +
                         std::to_string(cfg_.retries + 1) + " attempts: " + last_error);
  }

  RemoteConfig cfg_;
  FifoSemaphore gate_;
};

// Exposes any Generator over the protocol. Blocks in listen() until stop().
class GeneratorServer {
 public:
  explicit GeneratorServer(Generator& gen) : gen_(gen) {
    server_.Post(protocol::kScorePath, [this](const httplib::Request& req,
                                              httplib::Response& res) {
      handle(req, res, [this](const nlohmann::json& j) {
        const PromptParts parts = protocol::decode_parts(j);
        const LikelihoodScore s = gen_.score(parts, j.at("target").get<std::string>());
        return nlohmann::json{{"token_logprobs", s.token_logprobs}};
      });
    });
    server_.Post(protocol::kGeneratePath, [this](const httplib::Request& req,
                                                 httplib::Response& res) {
      handle(req, res, [this](const nlohmann::json& j) {
        const PromptParts parts = protocol::decode_parts(j);
        const std::string out =
            gen_.generate(parts, j.at("max_new_tokens").get<int>(),
                          j.value("stop", std::vector<std::string>{}));
        return nlohmann::json{{"text", out}};
      });
    });
    server_.Post(protocol::kControlPath, [this](const httplib::Request& req,
                                                httplib::Response& res) {
      handle(req, res, [this](const nlohmann::json& j) {
        const ControlLogits c = gen_.control_logits(protocol::decode_parts(j));
        return nlohmann::json{{"control_logits", {{"need", c.need}, {"done", c.done}}}};
      });
    });
    server_.Post(protocol::kSelectPath, [this](const httplib::Request& req,
                                               httplib::Response& res) {
      handle(req, res, [this](const nlohmann::json& j) {
        const PromptParts parts = protocol::decode_parts(j);
        return nlohmann::json{
            {"text", gen_.select_raw(parts, j.at("k").get<std::size_t>())}};
      });
    });
  }

  // Binds; port 0 picks a free port. Returns the bound port or -1.
  int bind(const std::string& host, int port) {
    if (port == 0) return server_.bind_to_any_port(host);
    return server_.bind_to_port(host, port) ? port : -1;
  }
  bool listen() { return server_.listen_after_bind(); }
  void wait_until_ready() const { server_.wait_until_ready(); }
  void stop() { server_.stop(); }

 private:
  template <typename Fn>
  static void handle(const httplib::Request& req, httplib::Response& res, Fn&& fn) {
    auto fail = [&res](int status, const std::string& msg) {
      res.status = status;
      res.set_content(nlohmann::json{{"error", msg}}.dump(), "application/json");
    };
    try {
      const nlohmann::json body = nlohmann::json::parse(req.body);
      res.set_content(fn(body).dump(), "application/json");
    } catch (const nlohmann::json::exception& e) {
      fail(400, e.what());
    } catch (const ContractViolation& e) {
      fail(400, e.what());
    } catch (const SizingError& e) {
      fail(413, e.what());
    } catch (const CapabilityError& e) {
      fail(501, e.what());
    } catch (const Error& e) {
      fail(422, e.what());
    }
  }

  Generator& gen_;
  httplib::Server server_;
};

}  // namespace chunkshapley
