#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <future>
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
#include "cotox/http.hpp"
#include "cotox/util.hpp"

namespace cotox::chem {

enum class Property { IupacName, CanonicalSmiles };

enum class ResolutionStatus { Resolved, NotFound, Ambiguous };

constexpr std::string_view to_string(ResolutionStatus s) {
  switch (s) {
    case ResolutionStatus::Resolved: return "Resolved";
    case ResolutionStatus::NotFound: return "NotFound";
    case ResolutionStatus::Ambiguous: return "Ambiguous";
  }
  return "";
}

inline ResolutionStatus parse_status(std::string_view s) {
  if (s == "Resolved") return ResolutionStatus::Resolved;
  if (s == "NotFound") return ResolutionStatus::NotFound;
  if (s == "Ambiguous") return ResolutionStatus::Ambiguous;
  throw Error(ErrorCode::ParseError, "unknown resolution status '" + std::string(s) + "'");
}

struct ResolutionRecord {
  std::string query;
  std::optional<std::string> iupac_name;
  std::optional<std::string> canonical_smiles;
  std::optional<long long> cid;
  std::chrono::system_clock::time_point resolved_at{};
  ResolutionStatus status = ResolutionStatus::NotFound;

  // Equality ignoring resolved_at.
  bool same_result(const ResolutionRecord& o) const {
    return query == o.query && iupac_name == o.iupac_name &&
           canonical_smiles == o.canonical_smiles && cid == o.cid && status == o.status;
  }
};

inline nlohmann::json to_json(const ResolutionRecord& r) {
  nlohmann::json j{{"query", r.query},
                   {"status", to_string(r.status)},
                   {"resolved_at", util::iso8601(r.resolved_at)}};
  j["iupac_name"] = r.iupac_name ? nlohmann::json(*r.iupac_name) : nlohmann::json(nullptr);
  j["canonical_smiles"] =
      r.canonical_smiles ? nlohmann::json(*r.canonical_smiles) : nlohmann::json(nullptr);
  j["cid"] = r.cid ? nlohmann::json(*r.cid) : nlohmann::json(nullptr);
  return j;
}

inline ResolutionRecord record_from_json(const nlohmann::json& j) {
  ResolutionRecord r;
  r.query = j.at("query").get<std::string>();
  r.status = parse_status(j.at("status").get<std::string>());
  if (auto t = util::parse_iso8601(j.value("resolved_at", ""))) r.resolved_at = *t;
  if (j.contains("iupac_name") && j["iupac_name"].is_string()) r.iupac_name = j["iupac_name"].get<std::string>();
  if (j.contains("canonical_smiles") && j["canonical_smiles"].is_string())
    r.canonical_smiles = j["canonical_smiles"].get<std::string>();
  if (j.contains("cid") && j["cid"].is_number_integer()) r.cid = j["cid"].get<long long>();
  return r;
}

inline std::string cache_key(std::string_view name) { return util::to_lower(util::trim(name)); }

// Single-file JSON key-value store; every put rewrites the file atomically.
class ResolutionCache {
 public:
  ResolutionCache() = default;
  explicit ResolutionCache(std::filesystem::path path) : path_(std::move(path)) {
    if (!path_.empty() && std::filesystem::exists(path_)) {
      auto j = nlohmann::json::parse(util::read_file(path_));
      for (auto& [k, v] : j.items()) entries_.emplace(k, record_from_json(v));
    }
  }

  std::optional<ResolutionRecord> get(const std::string& key) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void put(const std::string& key, const ResolutionRecord& rec) {
    std::lock_guard lock(mu_);
    entries_[key] = rec;
    if (path_.empty()) return;
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : entries_) j[k] = to_json(v);
    util::write_file_atomic(path_, j.dump(2) + "\n");
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
  }

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::map<std::string, ResolutionRecord> entries_;
};

struct ResolverConfig {
  std::string base_url = "https://pubchem.ncbi.nlm.nih.gov/rest/pug";
  std::filesystem::path cache_path;  // empty: in-memory only
  std::chrono::hours not_found_ttl{24 * 30};
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::milliseconds pacing{200};  // PubChem asks for <= 5 requests/s
  int max_in_flight = 2;
  std::chrono::milliseconds timeout{30000};
};

struct BatchItem {
  std::string query;
  std::optional<ResolutionRecord> record;
  std::optional<ErrorCode> error;
  std::string error_detail;
};

// Name -> IUPAC / SMILES through PUG REST. Safe to share between threads:
// concurrent lookups of one name collapse into a single request.
class Resolver {
 public:
  Resolver(ResolverConfig config, std::shared_ptr<http::Client> client,
           http::Sleeper sleeper = http::real_sleeper(),
           std::function<std::chrono::system_clock::time_point()> clock = [] {
             return std::chrono::system_clock::now();
           })
      : config_(std::move(config)),
        client_(std::move(client)),
        cache_(config_.cache_path),
        sleeper_(std::move(sleeper)),
        clock_(std::move(clock)),
        in_flight_(config_.max_in_flight),
        pacer_(config_.pacing) {}

  std::string request_url(std::string_view name, const std::vector<Property>& props) const {
    std::string list;
    for (Property p : props) {
      if (!list.empty()) list += ",";
      list += p == Property::IupacName ? "IUPACName" : "CanonicalSMILES";
    }
    return config_.base_url + "/compound/name/" + util::url_encode(util::trim(name)) + "/property/" +
           list + "/JSON";
  }

  ResolutionRecord resolve(std::string_view name,
                           std::vector<Property> props = {Property::IupacName,
                                                          Property::CanonicalSmiles}) {
    if (util::trim(name).empty()) throw Error(ErrorCode::PreconditionViolation, "empty compound name");
    const std::string key = cache_key(name);
    if (auto hit = cached(key)) return *hit;

    std::shared_future<ResolutionRecord> fut;
    bool owner = false;
    std::promise<ResolutionRecord> promise;
    {
      std::lock_guard lock(pending_mu_);
      auto it = pending_.find(key);
      if (it != pending_.end()) {
        fut = it->second;
      } else {
        fut = promise.get_future().share();
        pending_.emplace(key, fut);
        owner = true;
      }
    }
    if (!owner) return fut.get();

    try {
      // A concurrent owner may have finished between the cache check and here.
      ResolutionRecord rec;
      if (auto hit = cached(key)) {
        rec = *hit;
      } else {
        rec = fetch(name, props);
        cache_.put(key, rec);
      }
      promise.set_value(rec);
    } catch (...) {
      promise.set_exception(std::current_exception());
    }
    {
      std::lock_guard lock(pending_mu_);
      pending_.erase(key);
    }
    return fut.get();
  }

  // Order-preserving; per-name failures are embedded in the result.
  std::vector<BatchItem> resolve_batch(const std::vector<std::string>& names, int max_in_flight) {
    if (max_in_flight < 1) throw Error(ErrorCode::PreconditionViolation, "max_in_flight must be >= 1");
    std::vector<BatchItem> out(names.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next.fetch_add(1); i < names.size(); i = next.fetch_add(1)) {
        out[i].query = names[i];
        try {
          out[i].record = resolve(names[i]);
        } catch (const Error& e) {
          out[i].error = e.code();
          out[i].error_detail = e.detail();
        }
      }
    };
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(max_in_flight), names.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return out;
  }

  const ResolutionCache& cache() const { return cache_; }

  // Parses a 200 response body.
  static ResolutionRecord parse_body(std::string_view query, std::string_view body,
                                     const std::vector<Property>& props) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, std::string("PubChem body: ") + e.what());
    }
    ResolutionRecord rec;
    rec.query = std::string(query);
    if (!j.is_object() || !j.contains("PropertyTable") || !j["PropertyTable"].contains("Properties") ||
        !j["PropertyTable"]["Properties"].is_array())
      throw Error(ErrorCode::ParseError, "PubChem body lacks PropertyTable.Properties");
    const auto& rows = j["PropertyTable"]["Properties"];
    if (rows.empty()) {
      rec.status = ResolutionStatus::NotFound;
      return rec;
    }
    const auto& first = rows.front();
    if (!first.is_object()) throw Error(ErrorCode::ParseError, "PubChem property row is not an object");
    if (first.contains("CID") && first["CID"].is_number_integer()) rec.cid = first["CID"].get<long long>();
    if (first.contains("IUPACName") && first["IUPACName"].is_string())
      rec.iupac_name = first["IUPACName"].get<std::string>();
    // Newer PUG REST responses report CanonicalSMILES under "ConnectivitySMILES".
    for (const char* k : {"CanonicalSMILES", "ConnectivitySMILES", "SMILES"}) {
      if (first.contains(k) && first[k].is_string()) {
        rec.canonical_smiles = first[k].get<std::string>();
        break;
      }
    }
    std::vector<long long> cids;
    for (const auto& row : rows)
      if (row.is_object() && row.contains("CID") && row["CID"].is_number_integer()) {
        long long c = row["CID"].get<long long>();
        if (std::find(cids.begin(), cids.end(), c) == cids.end()) cids.push_back(c);
      }
    const bool want_iupac = std::find(props.begin(), props.end(), Property::IupacName) != props.end();
    if (want_iupac && !rec.iupac_name) {
      rec.status = ResolutionStatus::NotFound;
    } else {
      rec.status = cids.size() > 1 ? ResolutionStatus::Ambiguous : ResolutionStatus::Resolved;
    }
    return rec;
  }

 private:
  std::optional<ResolutionRecord> cached(const std::string& key) const {
    auto hit = cache_.get(key);
    if (!hit) return std::nullopt;
    if (hit->status == ResolutionStatus::NotFound && clock_() - hit->resolved_at > config_.not_found_ttl)
      return std::nullopt;
    return hit;
  }

  ResolutionRecord fetch(std::string_view name, const std::vector<Property>& props) {
    http::Request req;
    req.url = request_url(name, props);
    req.timeout = config_.timeout;
    auto delay = config_.initial_backoff;
    http::Response last;
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
      {
        http::SemaphoreGuard guard(in_flight_);
        pacer_.wait();
        last = client_->send(req);
      }
      if (last.error == http::TransportError::FixtureMiss)
        throw Error(ErrorCode::NetworkError, last.error_detail);
      if (last.error == http::TransportError::None) {
        if (last.status == 200) {
          auto rec = parse_body(util::trim(name), last.body, props);
          rec.resolved_at = clock_();
          return rec;
        }
        if (last.status == 404) {
          ResolutionRecord rec;
          rec.query = std::string(util::trim(name));
          rec.status = ResolutionStatus::NotFound;
          rec.resolved_at = clock_();
          return rec;
        }
        const bool transient = last.status == 429 || last.status == 503 || last.status >= 500;
        if (!transient)
          throw Error(ErrorCode::NetworkError, "HTTP " + std::to_string(last.status) + " for " + req.url);
      }
      if (attempt == config_.max_attempts) break;
      auto wait = delay;
      if (auto ra = http::retry_after(last)) wait = std::max(wait, *ra);
      if (auto tc = last.header("x-throttling-control");
          tc && (tc->find("Red") != std::string::npos || tc->find("Black") != std::string::npos))
        wait = std::max(wait, std::chrono::milliseconds(2000));
      sleeper_(wait);
      delay *= 2;
    }
    if (last.error == http::TransportError::None && (last.status == 429 || last.status == 503))
      throw Error(ErrorCode::RateLimited, "PubChem throttled " + req.url);
    throw Error(ErrorCode::NetworkError,
                last.error == http::TransportError::None ? "HTTP " + std::to_string(last.status)
                                                         : last.error_detail);
  }

  ResolverConfig config_;
  std::shared_ptr<http::Client> client_;
  ResolutionCache cache_;
  http::Sleeper sleeper_;
  std::function<std::chrono::system_clock::time_point()> clock_;
  http::Semaphore in_flight_;
  http::Pacer pacer_;
  std::mutex pending_mu_;
  std::map<std::string, std::shared_future<ResolutionRecord>> pending_;
};

}  // namespace cotox::chem
