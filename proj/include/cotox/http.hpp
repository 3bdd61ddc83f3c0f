#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cotox/error.hpp"
#include "cotox/util.hpp"

namespace cotox::http {

struct Request {
  std::string method = "GET";
  std::string url;
  std::map<std::string, std::string> headers;
  std::string body;
  std::chrono::milliseconds timeout{60000};
};

enum class TransportError { None, ConnectionFailed, Timeout, FixtureMiss };

struct Response {
  int status = 0;
  std::string body;
  std::map<std::string, std::string> headers;  // lowercase names
  TransportError error = TransportError::None;
  std::string error_detail;

  bool ok() const { return error == TransportError::None && status >= 200 && status < 300; }

  std::optional<std::string> header(const std::string& name) const {
    auto it = headers.find(util::to_lower(name));
    if (it == headers.end()) return std::nullopt;
    return it->second;
  }
};

class Client {
 public:
  virtual ~Client() = default;
  virtual Response send(const Request& req) = 0;
};

// Wraps another client and records call counts and peak concurrency. Used by
// tests to assert "zero network I/O" and in-flight bounds.
class InstrumentedClient : public Client {
 public:
  explicit InstrumentedClient(std::shared_ptr<Client> inner) : inner_(std::move(inner)) {}

  Response send(const Request& req) override {
    calls_.fetch_add(1);
    const int now = in_flight_.fetch_add(1) + 1;
    int peak = peak_.load();
    while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
    }
    Response r;
    try {
      r = inner_ ? inner_->send(req) : Response{};
    } catch (...) {
      in_flight_.fetch_sub(1);
      throw;
    }
    in_flight_.fetch_sub(1);
    {
      std::lock_guard lock(mu_);
      urls_.push_back(req.url);
    }
    return r;
  }

  int calls() const { return calls_.load(); }
  int peak_in_flight() const { return peak_.load(); }
  std::vector<std::string> urls() const {
    std::lock_guard lock(mu_);
    return urls_;
  }

 private:
  std::shared_ptr<Client> inner_;
  std::atomic<int> calls_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> peak_{0};
  mutable std::mutex mu_;
  std::vector<std::string> urls_;
};

// Refuses every request; stands in for "no network" in offline runs.
class OfflineClient : public Client {
 public:
  Response send(const Request& req) override {
    Response r;
    r.error = TransportError::ConnectionFailed;
    r.error_detail = "offline: refused " + req.method + " " + req.url;
    return r;
  }
};

inline std::string request_fingerprint(const Request& req) {
  return util::sha256_hex(req.method + " " + req.url + "\n" + req.body);
}

// Serves responses from `<dir>/<sha256(method url body)>.json`, each holding
// {"url", "status", "body", "headers"}. Unknown requests are FixtureMiss,
// never forwarded.
class FixtureClient : public Client {
 public:
  explicit FixtureClient(std::filesystem::path dir, std::chrono::milliseconds latency = {})
      : dir_(std::move(dir)), latency_(latency) {}

  Response send(const Request& req) override {
    if (latency_.count() > 0) std::this_thread::sleep_for(latency_);
    const auto path = dir_ / (request_fingerprint(req) + ".json");
    Response r;
    if (!std::filesystem::exists(path)) {
      r.error = TransportError::FixtureMiss;
      r.error_detail = "no fixture for " + req.method + " " + req.url;
      return r;
    }
    auto j = nlohmann::json::parse(util::read_file(path));
    r.status = j.value("status", 200);
    r.body = j.value("body", "");
    if (j.contains("headers"))
      for (auto& [k, v] : j["headers"].items()) r.headers[util::to_lower(k)] = v.get<std::string>();
    return r;
  }

  static void record(const std::filesystem::path& dir, const Request& req, const Response& resp) {
    nlohmann::json j{{"method", req.method}, {"url", req.url}, {"status", resp.status}, {"body", resp.body}};
    if (!resp.headers.empty()) j["headers"] = resp.headers;
    util::write_file_atomic(dir / (request_fingerprint(req) + ".json"), j.dump(2) + "\n");
  }

 private:
  std::filesystem::path dir_;
  std::chrono::milliseconds latency_;
};

// Scripted responses, consumed in order; the last one repeats.
class ScriptedClient : public Client {
 public:
  explicit ScriptedClient(std::vector<Response> script) : script_(std::move(script)) {}

  Response send(const Request& req) override {
    std::lock_guard lock(mu_);
    requests_.push_back(req);
    if (script_.empty()) return Response{};
    const std::size_t i = std::min(next_, script_.size() - 1);
    ++next_;
    return script_[i];
  }

  std::vector<Request> requests() const {
    std::lock_guard lock(mu_);
    return requests_;
  }

 private:
  mutable std::mutex mu_;
  std::vector<Response> script_;
  std::size_t next_ = 0;
  std::vector<Request> requests_;
};

// Retry-After in seconds (HTTP-date form is not honoured).
inline std::optional<std::chrono::milliseconds> retry_after(const Response& r) {
  auto h = r.header("retry-after");
  if (!h) return std::nullopt;
  auto v = util::parse_double(*h);
  if (!v || *v < 0) return std::nullopt;
  return std::chrono::milliseconds(static_cast<long long>(*v * 1000.0));
}


// Counting semaphore with a runtime limit.
class Semaphore {
 public:
  explicit Semaphore(int permits) : permits_(std::max(1, permits)) {}

  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return permits_ > 0; });
    --permits_;
  }

  void release() {
    {
      std::lock_guard lock(mu_);
      ++permits_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int permits_;
};

class SemaphoreGuard {
 public:
  explicit SemaphoreGuard(Semaphore& s) : s_(s) { s_.acquire(); }
  ~SemaphoreGuard() { s_.release(); }
  SemaphoreGuard(const SemaphoreGuard&) = delete;
  SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;

 private:
  Semaphore& s_;
};

// Spaces request starts at least `interval` apart across all threads.
class Pacer {
 public:
  explicit Pacer(std::chrono::milliseconds interval) : interval_(interval) {}

  void wait() {
    if (interval_.count() <= 0) return;
    std::chrono::steady_clock::time_point slot;
    {
      std::lock_guard lock(mu_);
      const auto now = std::chrono::steady_clock::now();
      slot = std::max(now, next_);
      next_ = slot + interval_;
    }
    std::this_thread::sleep_until(slot);
  }

 private:
  std::mutex mu_;
  std::chrono::milliseconds interval_;
  std::chrono::steady_clock::time_point next_{};
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline Sleeper real_sleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

}  // namespace cotox::http
