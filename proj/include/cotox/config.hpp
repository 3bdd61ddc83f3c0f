#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cotox/error.hpp"
#include "cotox/gsea.hpp"
#include "cotox/ingest.hpp"
#include "cotox/prompt_builder.hpp"
#include "cotox/util.hpp"

namespace cotox::config {

enum class ValueType { String, Path, Int, Real, Bool };

struct KeySpec {
  std::string_view name;  // "section.key"
  ValueType type;
};

// The complete key vocabulary; anything else is rejected.
inline constexpr KeySpec kKeys[] = {
    {"paths.labels", ValueType::Path},
    {"paths.ctd_pathways", ValueType::Path},
    {"paths.ctd_go_bp", ValueType::Path},
    {"paths.ctd_go_mf", ValueType::Path},
    {"paths.ctd_go_cc", ValueType::Path},
    {"paths.gmt", ValueType::Path},
    {"paths.rank_file", ValueType::Path},
    {"paths.cache_dir", ValueType::Path},
    {"paths.fixtures_dir", ValueType::Path},
    {"paths.chem_fixtures_dir", ValueType::Path},
    {"paths.template_dir", ValueType::Path},
    {"paths.lexicon", ValueType::Path},
    {"paths.output_dir", ValueType::Path},
    {"paths.context_store", ValueType::Path},
    {"ctd.format", ValueType::String},
    {"provider.mode", ValueType::String},
    {"provider.base_url", ValueType::String},
    {"provider.model_id", ValueType::String},
    {"provider.api_key_env", ValueType::String},
    {"provider.max_in_flight", ValueType::Int},
    {"provider.requests_per_minute", ValueType::Int},
    {"provider.retry_budget", ValueType::Int},
    {"provider.temperature", ValueType::Real},
    {"provider.max_output_tokens", ValueType::Int},
    {"provider.timeout_s", ValueType::Int},
    {"provider.record_fixtures", ValueType::Bool},
    {"chem.mode", ValueType::String},
    {"chem.base_url", ValueType::String},
    {"chem.max_in_flight", ValueType::Int},
    {"chem.pacing_ms", ValueType::Int},
    {"chem.not_found_ttl_days", ValueType::Int},
    {"run.strategy", ValueType::String},
    {"run.format", ValueType::String},
    {"run.filter", ValueType::String},
    {"run.fewshot_k", ValueType::Int},
    {"run.fewshot_seed", ValueType::Int},
    {"run.split_seed", ValueType::Int},
    {"run.max_test", ValueType::Int},
    {"run.run_id", ValueType::String},
    {"run.workers", ValueType::Int},
    {"filter.model_id", ValueType::String},
    {"gsea.weight_exponent", ValueType::Real},
    {"gsea.permutations", ValueType::Int},
    {"gsea.seed", ValueType::Int},
    {"gsea.min_set_size", ValueType::Int},
    {"gsea.max_set_size", ValueType::Int},
    {"gsea.q_max", ValueType::Real},
    {"gsea.p_max", ValueType::Real},
    {"gsea.threads", ValueType::Int},
    {"gsea.kind_map", ValueType::String},
    {"gsea.kind_fallback", ValueType::String},
    {"gsea.compound_id", ValueType::String},
    {"gsea.compound_name", ValueType::String},
    {"gsea.compound_smiles", ValueType::String},
    {"gsea.compound_iupac", ValueType::String},
    {"eval.folds", ValueType::Int},
    {"eval.seed", ValueType::Int},
};

inline std::optional<ValueType> key_type(std::string_view key) {
  for (const auto& k : kKeys)
    if (k.name == key) return k.type;
  return std::nullopt;
}

// "section.key" -> raw value, from a minimal TOML subset: [section] headers,
// key = value lines, "quoted" or bare values, # comments.
inline std::map<std::string, std::string> parse_document(std::string_view text, const std::string& origin) {
  std::map<std::string, std::string> out;
  std::string section;
  int ln = 0;
  for (const auto& raw : util::split(text, '\n')) {
    ++ln;
    std::string line(util::trim(util::strip_cr(raw)));
    const std::string where = origin + ":" + std::to_string(ln);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorCode::ConfigError, where + ": malformed section header");
      section = std::string(util::trim(std::string_view(line).substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, where + ": expected key = value");
    std::string key(util::trim(std::string_view(line).substr(0, eq)));
    std::string value(util::trim(std::string_view(line).substr(eq + 1)));
    if (!value.empty() && value.front() == '"') {
      std::string unq;
      std::size_t i = 1;
      bool closed = false;
      for (; i < value.size(); ++i) {
        if (value[i] == '\\' && i + 1 < value.size()) {
          unq.push_back(value[++i]);
        } else if (value[i] == '"') {
          closed = true;
          break;
        } else {
          unq.push_back(value[i]);
        }
      }
      if (!closed) throw Error(ErrorCode::ConfigError, where + ": unterminated string");
      std::string_view rest = util::trim(std::string_view(value).substr(i + 1));
      if (!rest.empty() && rest.front() != '#') throw Error(ErrorCode::ConfigError, where + ": trailing text");
      value = std::move(unq);
    } else if (auto hash = value.find(" #"); hash != std::string::npos) {
      value = std::string(util::trim(std::string_view(value).substr(0, hash)));
    }
    const std::string full = section.empty() ? key : section + "." + key;
    if (!key_type(full)) throw Error(ErrorCode::ConfigError, where + ": unknown key '" + full + "'");
    if (out.count(full)) throw Error(ErrorCode::ConfigError, where + ": duplicate key '" + full + "'");
    out[full] = value;
  }
  return out;
}

enum class ProviderMode { Live, Replay };
enum class ChemMode { Live, Fixture, Off };
enum class FilterMode { Llm, Keyword };
enum class CtdFormat { Normalized, Export };

struct PipelineConfig {
  std::filesystem::path source;  // config file, for messages
  std::map<std::string, std::string> raw;

  // paths
  std::optional<std::filesystem::path> labels, ctd_pathways, ctd_go_bp, ctd_go_mf, ctd_go_cc, gmt, rank_file;
  std::filesystem::path cache_dir = "cache";
  std::optional<std::filesystem::path> fixtures_dir, chem_fixtures_dir, lexicon;
  std::filesystem::path template_dir = "assets/templates";
  std::filesystem::path output_dir = "runs";
  std::filesystem::path context_store = "context_store.json";
  CtdFormat ctd_format = CtdFormat::Normalized;

  // provider
  ProviderMode provider_mode = ProviderMode::Replay;
  std::string base_url = "https://api.openai.com/v1";
  std::string model_id = "gpt-4o";
  std::string api_key_env = "OPENAI_API_KEY";
  int max_in_flight = 4;
  int requests_per_minute = 0;
  int retry_budget = 3;
  double temperature = 0.0;
  int max_output_tokens = 4096;
  int timeout_s = 120;
  bool record_fixtures = false;

  // chem
  ChemMode chem_mode = ChemMode::Off;
  std::string chem_base_url = "https://pubchem.ncbi.nlm.nih.gov/rest/pug";
  int chem_max_in_flight = 2;
  int chem_pacing_ms = 200;
  int chem_not_found_ttl_days = 30;

  // run
  prompt::Strategy strategy = prompt::Strategy::CoTox;
  prompt::StructureFormat format = prompt::StructureFormat::Iupac;
  FilterMode filter = FilterMode::Keyword;
  std::string filter_model_id = "gpt-4o";
  int fewshot_k = 4;
  std::uint64_t fewshot_seed = 0;
  std::uint64_t split_seed = 0;
  std::optional<std::size_t> max_test;
  std::optional<std::string> run_id;
  int workers = 4;

  // gsea
  gsea::Params gsea;
  gsea::Thresholds thresholds;
  gsea::KindMap kind_map;
  std::string gsea_compound_id = "gsea-signature";
  std::string gsea_compound_name;
  std::optional<std::string> gsea_compound_smiles, gsea_compound_iupac;

  // eval
  int eval_folds = 5;
  std::uint64_t eval_seed = 0;

  nlohmann::ordered_json snapshot() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [k, v] : raw) j[k] = v;
    return j;
  }
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

// COTOX_<SECTION>_<KEY>, e.g. COTOX_PROVIDER_BASE_URL.
inline std::string env_name(std::string_view key) {
  std::string out = "COTOX_" + util::to_upper(key);
  std::replace(out.begin(), out.end(), '.', '_');
  return out;
}

namespace detail {

inline long long as_int(const std::string& key, const std::string& v) {
  auto d = util::parse_double(v);
  if (!d || *d != static_cast<double>(static_cast<long long>(*d)))
    throw Error(ErrorCode::ConfigError, key + ": expected an integer, got '" + v + "'");
  return static_cast<long long>(*d);
}

inline double as_real(const std::string& key, const std::string& v) {
  auto d = util::parse_double(v);
  if (!d) throw Error(ErrorCode::ConfigError, key + ": expected a number, got '" + v + "'");
  return *d;
}

inline bool as_bool(const std::string& key, const std::string& v) {
  const std::string l = util::to_lower(v);
  if (l == "true" || l == "1" || l == "yes") return true;
  if (l == "false" || l == "0" || l == "no") return false;
  throw Error(ErrorCode::ConfigError, key + ": expected true/false, got '" + v + "'");
}

inline gsea::KindMap parse_kind_map(const std::string& key, const std::string& v) {
  gsea::KindMap m;
  m.prefixes.clear();
  for (const auto& item : util::split(v, ',')) {
    std::string_view it = util::trim(item);
    if (it.empty()) continue;
    const auto eq = it.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::ConfigError, key + ": expected PREFIX=kind entries");
    try {
      m.prefixes.emplace_back(std::string(util::trim(it.substr(0, eq))), parse_term_kind(it.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, key + ": " + e.detail());
    }
  }
  return m;
}

}  // namespace detail

// Parses `text` (with `base_dir` anchoring relative paths), then applies
// environment overrides.
inline PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir,
                                   const std::string& origin = "config", const EnvLookup& env = process_env()) {
  PipelineConfig c;
  c.source = origin;
  c.raw = parse_document(text, origin);
  for (const auto& spec : kKeys) {
    if (auto v = env(env_name(spec.name))) c.raw[std::string(spec.name)] = *v;
  }
  auto path = [&](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_absolute() ? p : base_dir / p;
  };
  auto wrap = [&](const std::string& key, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ConfigError) throw;
      throw Error(ErrorCode::ConfigError, key + ": " + e.detail());
    }
  };
  // Working files default to siblings of the config file.
  c.cache_dir = path(c.cache_dir.string());
  c.output_dir = path(c.output_dir.string());
  c.context_store = path(c.context_store.string());
  for (const auto& [key, v] : c.raw) {
    wrap(key, [&] {
      using detail::as_bool, detail::as_int, detail::as_real;
      if (key == "paths.labels") c.labels = path(v);
      else if (key == "paths.ctd_pathways") c.ctd_pathways = path(v);
      else if (key == "paths.ctd_go_bp") c.ctd_go_bp = path(v);
      else if (key == "paths.ctd_go_mf") c.ctd_go_mf = path(v);
      else if (key == "paths.ctd_go_cc") c.ctd_go_cc = path(v);
      else if (key == "paths.gmt") c.gmt = path(v);
      else if (key == "paths.rank_file") c.rank_file = path(v);
      else if (key == "paths.cache_dir") c.cache_dir = path(v);
      else if (key == "paths.fixtures_dir") c.fixtures_dir = path(v);
      else if (key == "paths.chem_fixtures_dir") c.chem_fixtures_dir = path(v);
      else if (key == "paths.template_dir") c.template_dir = path(v);
      else if (key == "paths.lexicon") c.lexicon = path(v);
      else if (key == "paths.output_dir") c.output_dir = path(v);
      else if (key == "paths.context_store") c.context_store = path(v);
      else if (key == "ctd.format") {
        const auto f = util::to_lower(v);
        if (f == "normalized") c.ctd_format = CtdFormat::Normalized;
        else if (f == "export") c.ctd_format = CtdFormat::Export;
        else throw Error(ErrorCode::ConfigError, key + ": expected normalized|export");
      } else if (key == "provider.mode") {
        const auto m = util::to_lower(v);
        if (m == "live") c.provider_mode = ProviderMode::Live;
        else if (m == "replay") c.provider_mode = ProviderMode::Replay;
        else throw Error(ErrorCode::ConfigError, key + ": expected live|replay");
      } else if (key == "provider.base_url") c.base_url = v;
      else if (key == "provider.model_id") c.model_id = v;
      else if (key == "provider.api_key_env") c.api_key_env = v;
      else if (key == "provider.max_in_flight") c.max_in_flight = static_cast<int>(as_int(key, v));
      else if (key == "provider.requests_per_minute") c.requests_per_minute = static_cast<int>(as_int(key, v));
      else if (key == "provider.retry_budget") c.retry_budget = static_cast<int>(as_int(key, v));
      else if (key == "provider.temperature") c.temperature = as_real(key, v);
      else if (key == "provider.max_output_tokens") c.max_output_tokens = static_cast<int>(as_int(key, v));
      else if (key == "provider.timeout_s") c.timeout_s = static_cast<int>(as_int(key, v));
      else if (key == "provider.record_fixtures") c.record_fixtures = as_bool(key, v);
      else if (key == "chem.mode") {
        const auto m = util::to_lower(v);
        if (m == "live") c.chem_mode = ChemMode::Live;
        else if (m == "fixture") c.chem_mode = ChemMode::Fixture;
        else if (m == "off") c.chem_mode = ChemMode::Off;
        else throw Error(ErrorCode::ConfigError, key + ": expected live|fixture|off");
      } else if (key == "chem.base_url") c.chem_base_url = v;
      else if (key == "chem.max_in_flight") c.chem_max_in_flight = static_cast<int>(as_int(key, v));
      else if (key == "chem.pacing_ms") c.chem_pacing_ms = static_cast<int>(as_int(key, v));
      else if (key == "chem.not_found_ttl_days") c.chem_not_found_ttl_days = static_cast<int>(as_int(key, v));
      else if (key == "run.strategy") c.strategy = prompt::parse_strategy(v);
      else if (key == "run.format") c.format = prompt::parse_format(v);
      else if (key == "run.filter") {
        const auto m = util::to_lower(v);
        if (m == "llm") c.filter = FilterMode::Llm;
        else if (m == "keyword") c.filter = FilterMode::Keyword;
        else throw Error(ErrorCode::ConfigError, key + ": expected llm|keyword");
      } else if (key == "run.fewshot_k") c.fewshot_k = static_cast<int>(as_int(key, v));
      else if (key == "run.fewshot_seed") c.fewshot_seed = static_cast<std::uint64_t>(as_int(key, v));
      else if (key == "run.split_seed") c.split_seed = static_cast<std::uint64_t>(as_int(key, v));
      else if (key == "run.max_test") c.max_test = static_cast<std::size_t>(as_int(key, v));
      else if (key == "run.run_id") c.run_id = v;
      else if (key == "run.workers") c.workers = static_cast<int>(as_int(key, v));
      else if (key == "filter.model_id") c.filter_model_id = v;
      else if (key == "gsea.weight_exponent") c.gsea.weight_exponent = as_real(key, v);
      else if (key == "gsea.permutations") c.gsea.permutations = static_cast<int>(as_int(key, v));
      else if (key == "gsea.seed") c.gsea.seed = static_cast<std::uint64_t>(as_int(key, v));
      else if (key == "gsea.min_set_size") c.gsea.min_set_size = static_cast<std::size_t>(as_int(key, v));
      else if (key == "gsea.max_set_size") c.gsea.max_set_size = static_cast<std::size_t>(as_int(key, v));
      else if (key == "gsea.threads") c.gsea.threads = static_cast<unsigned>(as_int(key, v));
      else if (key == "gsea.q_max") c.thresholds.q_max = as_real(key, v);
      else if (key == "gsea.p_max") c.thresholds.p_max = as_real(key, v);
      else if (key == "gsea.kind_map") {
        auto fallback = c.kind_map.fallback;
        c.kind_map = detail::parse_kind_map(key, v);
        c.kind_map.fallback = fallback;
      } else if (key == "gsea.kind_fallback") c.kind_map.fallback = parse_term_kind(v);
      else if (key == "gsea.compound_id") c.gsea_compound_id = v;
      else if (key == "gsea.compound_name") c.gsea_compound_name = v;
      else if (key == "gsea.compound_smiles") c.gsea_compound_smiles = v;
      else if (key == "gsea.compound_iupac") c.gsea_compound_iupac = v;
      else if (key == "eval.folds") c.eval_folds = static_cast<int>(as_int(key, v));
      else if (key == "eval.seed") c.eval_seed = static_cast<std::uint64_t>(as_int(key, v));
    });
  }
  if (c.temperature < 0.0 || c.temperature > 1.0)
    throw Error(ErrorCode::ConfigError, "provider.temperature must lie in [0, 1]");
  if (c.max_in_flight < 1) throw Error(ErrorCode::ConfigError, "provider.max_in_flight must be >= 1");
  if (c.chem_max_in_flight < 1) throw Error(ErrorCode::ConfigError, "chem.max_in_flight must be >= 1");
  if (c.workers < 1) throw Error(ErrorCode::ConfigError, "run.workers must be >= 1");
  if (c.retry_budget < 0) throw Error(ErrorCode::ConfigError, "provider.retry_budget must be >= 0");
  try {
    c.gsea.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, "gsea: " + e.detail());
  }
  return c;
}

inline PipelineConfig load_config(const std::filesystem::path& path, const EnvLookup& env = process_env()) {
  if (!std::filesystem::is_regular_file(path))
    throw Error(ErrorCode::ConfigError, "config file not found: " + path.string());
  const auto base = std::filesystem::absolute(path).parent_path();
  return parse_config(util::read_file(path), base, path.string(), env);
}

// Raises a ConfigError naming `field` when the path is unset or absent on disk.
inline const std::filesystem::path& require_path(const std::optional<std::filesystem::path>& p,
                                                 std::string_view field) {
  if (!p) throw Error(ErrorCode::ConfigError, std::string(field) + " is not set");
  if (!std::filesystem::exists(*p))
    throw Error(ErrorCode::ConfigError, std::string(field) + " does not exist: " + p->string());
  return *p;
}

}  // namespace cotox::config
