#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cotox/error.hpp"
#include "cotox/http.hpp"
#include "cotox/util.hpp"

namespace cotox::llm {

struct ChatRequest {
  std::string model_id;
  std::string system_text;
  std::string user_text;
  double temperature = 0.0;
  int max_output_tokens = 4096;
};

struct ChatResponse {
  std::string text;
  std::string model_id;
  int prompt_tokens = 0;
  int completion_tokens = 0;
  std::chrono::milliseconds latency{0};
  bool from_cache = false;
};

struct RequestFingerprint {
  std::string hex;  // 64 lowercase hex chars of a SHA-256 digest

  bool operator==(const RequestFingerprint&) const = default;
  auto operator<=>(const RequestFingerprint&) const = default;
};

// Length-prefixed fields in a fixed order, so no two distinct requests share
// a serialization. max_output_tokens is deliberately not part of the key.
inline RequestFingerprint fingerprint(const ChatRequest& req) {
  std::string buf = "cotox-chat-v1\n";
  auto field = [&](std::string_view name, std::string_view value) {
    buf += name;
    buf += ':';
    buf += std::to_string(value.size());
    buf += ':';
    buf += value;
    buf += '\n';
  };
  field("model_id", req.model_id);
  field("temperature", util::format_double(req.temperature));
  field("system_text", req.system_text);
  field("user_text", req.user_text);
  return {util::sha256_hex(buf)};
}

inline nlohmann::json fixture_json(const ChatRequest& req, const std::string& response_text) {
  return nlohmann::json{{"model_id", req.model_id},
                        {"temperature", req.temperature},
                        {"system_text", req.system_text},
                        {"user_text", req.user_text},
                        {"response_text", response_text}};
}

inline std::string dump_json(const nlohmann::json& j, int indent = -1) {
  return j.dump(indent, ' ', false, nlohmann::json::error_handler_t::replace);
}

// Writes <dir>/<fingerprint>.json; rewriting an existing fixture replaces it.
inline std::filesystem::path record_fixture(const ChatRequest& req, const ChatResponse& resp,
                                            const std::filesystem::path& dir) {
  const auto path = dir / (fingerprint(req).hex + ".json");
  try {
    util::write_file_atomic(path, dump_json(fixture_json(req, resp.text), 2) + "\n");
  } catch (const std::filesystem::filesystem_error& e) {
    throw Error(ErrorCode::IoError, e.what());
  }
  return path;
}

// One provider attempt. Transient outcomes are retried by the gateway.
struct ProviderReply {
  enum class Kind { Ok, Transient, Terminal, Timeout } kind = Kind::Ok;
  ChatResponse response;
  std::optional<std::chrono::milliseconds> retry_after;
  std::string detail;
};

class Provider {
 public:
  virtual ~Provider() = default;
  virtual ProviderReply send(const ChatRequest& req) = 0;
  virtual bool is_replay() const { return false; }
};

// Serves fixtures by fingerprint and never touches the network.
class ReplayProvider : public Provider {
 public:
  explicit ReplayProvider(std::filesystem::path dir) : dir_(std::move(dir)) {}

  ProviderReply send(const ChatRequest& req) override {
    const auto fp = fingerprint(req);
    const auto path = dir_ / (fp.hex + ".json");
    if (!std::filesystem::exists(path))
      throw Error(ErrorCode::ReplayMiss, "no fixture " + fp.hex + " in " + dir_.string());
    auto j = nlohmann::json::parse(util::read_file(path));
    ProviderReply reply;
    reply.response.text = j.at("response_text").get<std::string>();
    reply.response.model_id = j.value("model_id", req.model_id);
    return reply;
  }

  bool is_replay() const override { return true; }

 private:
  std::filesystem::path dir_;
};

struct ProviderConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key_env = "OPENAI_API_KEY";
  std::map<std::string, std::string> extra_headers;
  std::chrono::milliseconds timeout{120000};
};

// Chat-completions dialect: POST {base_url}/chat/completions with a
// system+user messages array.
class ChatCompletionsProvider : public Provider {
 public:
  ChatCompletionsProvider(ProviderConfig config, std::shared_ptr<http::Client> client)
      : config_(std::move(config)), client_(std::move(client)) {}

  http::Request build_request(const ChatRequest& req) const {
    http::Request h;
    h.method = "POST";
    h.url = config_.base_url + "/chat/completions";
    h.timeout = config_.timeout;
    h.headers["Content-Type"] = "application/json";
    if (!config_.api_key_env.empty()) {
      if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
        h.headers["Authorization"] = std::string("Bearer ") + key;
    }
    for (const auto& [k, v] : config_.extra_headers) h.headers[k] = v;
    nlohmann::json body{
        {"model", req.model_id},
        {"messages",
         nlohmann::json::array({{{"role", "system"}, {"content", req.system_text}},
                                {{"role", "user"}, {"content", req.user_text}}})},
        {"temperature", req.temperature},
        {"max_tokens", req.max_output_tokens}};
    h.body = dump_json(body);
    return h;
  }

  ProviderReply send(const ChatRequest& req) override {
    ProviderReply reply;
    const auto start = std::chrono::steady_clock::now();
    http::Response r = client_->send(build_request(req));
    if (r.error == http::TransportError::Timeout) {
      reply.kind = ProviderReply::Kind::Timeout;
      reply.detail = r.error_detail;
      return reply;
    }
    if (r.error != http::TransportError::None) {
      reply.kind = r.error == http::TransportError::FixtureMiss ? ProviderReply::Kind::Terminal
                                                                : ProviderReply::Kind::Transient;
      reply.detail = r.error_detail;
      return reply;
    }
    if (r.status == 429 || r.status >= 500) {
      reply.kind = ProviderReply::Kind::Transient;
      reply.retry_after = http::retry_after(r);
      reply.detail = "HTTP " + std::to_string(r.status);
      return reply;
    }
    if (r.status < 200 || r.status >= 300) {
      reply.kind = ProviderReply::Kind::Terminal;
      reply.detail = "HTTP " + std::to_string(r.status) + ": " + r.body.substr(0, 300);
      return reply;
    }
    try {
      auto j = nlohmann::json::parse(r.body);
      const auto& choice = j.at("choices").at(0);
      const auto& content = choice.at("message").at("content");
      reply.response.text = content.is_string() ? content.get<std::string>() : "";
      reply.response.model_id = j.value("model", req.model_id);
      if (j.contains("usage") && j["usage"].is_object()) {
        reply.response.prompt_tokens = j["usage"].value("prompt_tokens", 0);
        reply.response.completion_tokens = j["usage"].value("completion_tokens", 0);
      }
      const std::string finish =
          choice.contains("finish_reason") && choice["finish_reason"].is_string()
              ? choice["finish_reason"].get<std::string>()
              : "";
      if (reply.response.text.empty()) {
        reply.kind = ProviderReply::Kind::Terminal;
        reply.detail = "empty completion (finish_reason=" + (finish.empty() ? "none" : finish) + ")";
        return reply;
      }
    } catch (const nlohmann::json::exception& e) {
      reply.kind = ProviderReply::Kind::Terminal;
      reply.detail = std::string("malformed provider response: ") + e.what();
      return reply;
    }
    reply.response.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);
    return reply;
  }

 private:
  ProviderConfig config_;
  std::shared_ptr<http::Client> client_;
};

struct GatewayConfig {
  std::filesystem::path cache_dir;   // empty: in-memory cache only
  std::filesystem::path record_dir;  // non-empty: live responses are also written as fixtures
  int max_in_flight = 4;
  int requests_per_minute = 0;  // 0: unpaced
  int retry_budget = 3;         // retries after the first attempt
  std::chrono::milliseconds initial_backoff{1000};
  std::chrono::milliseconds max_backoff{60000};
};

struct GatewayStats {
  int requests = 0;
  int cache_hits = 0;
  int provider_calls = 0;
  int retries = 0;
};

class Gateway {
 public:
  Gateway(GatewayConfig config, std::shared_ptr<Provider> provider,
          http::Sleeper sleeper = http::real_sleeper())
      : config_(std::move(config)),
        provider_(std::move(provider)),
        sleeper_(std::move(sleeper)),
        in_flight_(config_.max_in_flight),
        pacer_(config_.requests_per_minute > 0
                   ? std::chrono::milliseconds(60000 / config_.requests_per_minute)
                   : std::chrono::milliseconds(0)) {}

  ChatResponse complete(const ChatRequest& req) {
    if (req.temperature < 0.0 || req.temperature > 1.0)
      throw Error(ErrorCode::PreconditionViolation, "temperature outside [0,1]");
    const auto fp = fingerprint(req);
    {
      std::lock_guard lock(mu_);
      ++stats_.requests;
      issued_.insert(fp.hex);
    }
    if (auto hit = lookup(fp)) {
      std::lock_guard lock(mu_);
      ++stats_.cache_hits;
      return *hit;
    }

    auto delay = config_.initial_backoff;
    ProviderReply reply;
    for (int attempt = 0;; ++attempt) {
      {
        http::SemaphoreGuard guard(in_flight_);
        pacer_.wait();
        {
          std::lock_guard lock(mu_);
          ++stats_.provider_calls;
        }
        reply = provider_->send(req);
      }
      if (reply.kind == ProviderReply::Kind::Ok) break;
      if (reply.kind == ProviderReply::Kind::Terminal)
        throw Error(ErrorCode::ProviderError, reply.detail);
      if (attempt >= config_.retry_budget) {
        if (reply.kind == ProviderReply::Kind::Timeout) throw Error(ErrorCode::Timeout, reply.detail);
        throw Error(ErrorCode::ProviderError, "retries exhausted: " + reply.detail);
      }
      // Backoff never shrinks: doubling, raised to any Retry-After hint.
      auto wait = delay;
      if (reply.retry_after) wait = std::max(wait, *reply.retry_after);
      wait = std::min(wait, std::max(config_.max_backoff, delay));
      {
        std::lock_guard lock(mu_);
        ++stats_.retries;
        backoffs_.push_back(wait);
      }
      sleeper_(wait);
      delay = std::max(delay * 2, wait);
    }

    ChatResponse resp = reply.response;
    resp.from_cache = false;
    if (resp.model_id.empty()) resp.model_id = req.model_id;
    store(fp, req, resp);
    if (!config_.record_dir.empty() && !provider_->is_replay())
      record_fixture(req, resp, config_.record_dir);
    return resp;
  }

  GatewayStats stats() const {
    std::lock_guard lock(mu_);
    return stats_;
  }

  // Every fingerprint passed to complete(), sorted.
  std::vector<std::string> issued_fingerprints() const {
    std::lock_guard lock(mu_);
    return {issued_.begin(), issued_.end()};
  }

  std::vector<std::chrono::milliseconds> backoff_history() const {
    std::lock_guard lock(mu_);
    return backoffs_;
  }

 private:
  std::optional<ChatResponse> lookup(const RequestFingerprint& fp) {
    std::lock_guard lock(mu_);
    if (auto it = memory_.find(fp.hex); it != memory_.end()) {
      ChatResponse r = it->second;
      r.from_cache = true;
      return r;
    }
    if (config_.cache_dir.empty()) return std::nullopt;
    const auto path = config_.cache_dir / (fp.hex + ".json");
    if (!std::filesystem::exists(path)) return std::nullopt;
    auto j = nlohmann::json::parse(util::read_file(path));
    ChatResponse r;
    r.text = j.at("response_text").get<std::string>();
    r.model_id = j.value("model_id", "");
    memory_[fp.hex] = r;
    r.from_cache = true;
    return r;
  }

  void store(const RequestFingerprint& fp, const ChatRequest& req, const ChatResponse& resp) {
    std::lock_guard lock(mu_);
    memory_[fp.hex] = resp;
    if (!config_.cache_dir.empty()) record_fixture(req, resp, config_.cache_dir);
  }

  GatewayConfig config_;
  std::shared_ptr<Provider> provider_;
  http::Sleeper sleeper_;
  http::Semaphore in_flight_;
  http::Pacer pacer_;
  mutable std::mutex mu_;
  std::map<std::string, ChatResponse> memory_;
  std::set<std::string> issued_;
  std::vector<std::chrono::milliseconds> backoffs_;
  GatewayStats stats_;
};

}  // namespace cotox::llm
