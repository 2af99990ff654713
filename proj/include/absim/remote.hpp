// Copyright 2026 The absim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// HTTP clients for OpenAI-compatible chat-completion and embedding
// endpoints. Define CPPHTTPLIB_OPENSSL_SUPPORT (and link OpenSSL) before the
// first include of httplib.h to reach https endpoints.
#pragma once

#include <chrono>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <regex>
#include <semaphore>
#include <string>
#include <thread>

#include "absim/agent.hpp"
#include "absim/memory.hpp"
#include "httplib.h"

namespace absim {

struct RemoteConfig {
  std::string endpoint;  // full URL, e.g. https://host/v1/chat/completions
  std::string model;
  std::string api_key;   // never serialized
  double timeout_seconds = 60.0;
  int max_retries = 3;
  int backoff_ms = 500;  // doubled after every failed attempt
  int max_concurrency = 4;

  /// Reads <PREFIX>_ENDPOINT, <PREFIX>_MODEL and <PREFIX>_API_KEY.
  static RemoteConfig from_env(const std::string& prefix) {
    RemoteConfig c;
    auto get = [&](const char* suffix) {
      const char* v = std::getenv((prefix + "_" + suffix).c_str());
      return v ? std::string(v) : std::string();
    };
    c.endpoint = get("ENDPOINT");
    c.model = get("MODEL");
    c.api_key = get("API_KEY");
    return c;
  }

  void validate(const std::string& what) const {
    if (endpoint.empty()) throw Error(ErrorKind::kConfig, what + ": endpoint not set");
    if (model.empty()) throw Error(ErrorKind::kConfig, what + ": model not set");
    if (max_retries < 0 || max_concurrency < 1 || timeout_seconds <= 0.0) {
      throw Error(ErrorKind::kConfig, what + ": need retries >= 0, concurrency >= 1, timeout > 0");
    }
  }

  json to_json() const {
    return {{"endpoint", endpoint}, {"model", model}, {"timeout_seconds", timeout_seconds},
            {"max_retries", max_retries}, {"backoff_ms", backoff_ms}, {"max_concurrency", max_concurrency}};
  }
};

namespace detail {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline ParsedUrl parse_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw Error(ErrorKind::kConfig, "not an http(s) URL: " + url);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (url.rfind("https://", 0) == 0) throw Error(ErrorKind::kConfig, "built without TLS support: " + url);
#endif
  return {m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

/// POSTs JSON with bounded concurrency and retries on transport failures,
/// 429 and 5xx. Other statuses fail at once.
class JsonPoster {
 public:
  explicit JsonPoster(RemoteConfig config)
      : config_(std::move(config)), url_(parse_url(config_.endpoint)), slots_(config_.max_concurrency) {}

  json post(const json& body) const {
    const std::string payload = body.dump();
    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long long>(config_.backoff_ms) << (attempt - 1)));
      }
      httplib::Result res = send(payload);
      if (!res) {
        last_error = "transport: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 200) {
        try {
          return json::parse(res->body);
        } catch (const json::exception& e) {
          throw Error(ErrorKind::kParse, config_.endpoint + ": response is not JSON: " + e.what());
        }
      }
      last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
      if (res->status != 429 && res->status < 500) break;
    }
    throw Error(ErrorKind::kTransport, config_.endpoint + ": " + last_error);
  }

  const RemoteConfig& config() const { return config_; }

 private:
  httplib::Result send(const std::string& payload) const {
    slots_.acquire();
    struct Release {
      std::counting_semaphore<>& s;
      ~Release() { s.release(); }
    } release{slots_};
    httplib::Client client(url_.origin);
    const auto timeout = std::chrono::duration<double>(config_.timeout_seconds);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
    return client.Post(url_.path, headers, payload, "application/json");
  }

  RemoteConfig config_;
  ParsedUrl url_;
  mutable std::counting_semaphore<> slots_;
};

}  // namespace detail

/// Chat completions: {"model", "messages", "temperature", "max_tokens"[, "seed"]}
/// answered by choices[0].message.content.
class HttpTextGenerator : public TextGenerator {
 public:
  explicit HttpTextGenerator(RemoteConfig config) : poster_((config.validate("text generator"), std::move(config))) {}

  static json request_body(const std::string& model, const std::vector<ChatMessage>& messages,
                           const SamplingParams& params) {
    json msgs = json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    json body = {{"model", model}, {"messages", msgs}, {"temperature", params.temperature},
                 {"max_tokens", params.max_tokens}};
    if (params.seed) body["seed"] = *params.seed;
    return body;
  }

  static std::string parse_response(const json& j) {
    try {
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kParse, std::string("chat response lacks choices[0].message.content: ") + e.what());
    }
  }

  std::string generate(const std::vector<ChatMessage>& messages, const SamplingParams& params) override {
    return parse_response(poster_.post(request_body(poster_.config().model, messages, params)));
  }

 private:
  detail::JsonPoster poster_;
};

/// Embeddings: {"model", "input"} answered by data[0].embedding. Image
/// providers send the asset reference as the input string. Results are
/// cached per input since poster references repeat across sessions.
class RemoteEmbedder : public EmbeddingProvider {
 public:
  RemoteEmbedder(RemoteConfig config, std::size_t dimension, bool image = false)
      : poster_((config.validate("embedder"), std::move(config))), dimension_(dimension), image_(image) {
    if (dimension_ == 0) throw Error(ErrorKind::kConfig, "embedder: dimension must be > 0");
  }

  ProviderKind kind() const override { return image_ ? ProviderKind::kRemoteImage : ProviderKind::kRemoteText; }
  std::size_t dimension() const override { return dimension_; }

  static json request_body(const std::string& model, std::string_view input) {
    return {{"model", model}, {"input", std::string(input)}};
  }

  static Embedding parse_response(const json& j, std::size_t dimension) {
    Embedding e;
    try {
      e = j.at("data").at(0).at("embedding").get<Embedding>();
    } catch (const json::exception& ex) {
      throw Error(ErrorKind::kParse, std::string("embedding response lacks data[0].embedding: ") + ex.what());
    }
    if (e.size() != dimension) {
      throw Error(ErrorKind::kIntegrity, "embedding dimension " + std::to_string(e.size()) + ", expected " +
                                             std::to_string(dimension));
    }
    return e;
  }

  Embedding embed(std::string_view input) const override {
    const std::string key(input);
    {
      std::lock_guard lock(mu_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    auto e = parse_response(poster_.post(request_body(poster_.config().model, input)), dimension_);
    std::lock_guard lock(mu_);
    return cache_.emplace(key, std::move(e)).first->second;
  }

 private:
  detail::JsonPoster poster_;
  std::size_t dimension_;
  bool image_;
  mutable std::mutex mu_;
  mutable std::map<std::string, Embedding> cache_;
};

}  // namespace absim
