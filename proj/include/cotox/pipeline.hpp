#pragma once

#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cotox/chem_resolver.hpp"
#include "cotox/config.hpp"
#include "cotox/context_filter.hpp"
#include "cotox/core_model.hpp"
#include "cotox/error.hpp"
#include "cotox/eval.hpp"
#include "cotox/gsea.hpp"
#include "cotox/http.hpp"
#include "cotox/ingest.hpp"
#include "cotox/llm_gateway.hpp"
#include "cotox/prompt_builder.hpp"
#include "cotox/report.hpp"
#include "cotox/response_parser.hpp"
#include "cotox/util.hpp"

namespace cotox::pipeline {

namespace fs = std::filesystem;
using Clock = std::function<std::chrono::system_clock::time_point()>;

// Everything a command needs from the outside world. `network` is the only
// path to live endpoints; leaving it null makes every command offline.
struct Services {
  std::shared_ptr<http::Client> network;
  http::Sleeper sleeper = http::real_sleeper();
  Clock clock = [] { return std::chrono::system_clock::now(); };
  std::ostream* log = nullptr;
};

inline void note(const Services& s, const std::string& msg) {
  if (s.log) *s.log << msg << '\n';
}

inline std::shared_ptr<http::Client> network_of(const Services& s) {
  return s.network ? s.network : std::make_shared<http::OfflineClient>();
}

// Runs fn(0..n-1) on up to `workers` threads. The first exception stops the
// remaining work and is rethrown after all threads join.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr first;
  std::mutex mu;
  auto run = [&] {
    for (std::size_t i = next.fetch_add(1); i < n && !stop; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first) first = std::current_exception();
        stop = true;
      }
    }
  };
  const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), n);
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < count; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

// ---------------------------------------------------------------- store

enum class Role { Test, Train };

struct StoreEntry {
  Compound compound;
  std::optional<LabelRecord> labels;
  Role role = Role::Train;
  std::string source = "ctd";  // ctd | gsea
  BioContext raw_context;
  std::optional<BioContext> context;  // filtered; test entries only
  std::vector<filter::FilterDecision> decisions;
  std::vector<std::string> warnings;
};

struct ContextStore {
  std::map<std::string, StoreEntry> entries;

  std::vector<const StoreEntry*> with_role(Role r) const {
    std::vector<const StoreEntry*> out;
    for (const auto& [id, e] : entries)
      if (e.role == r) out.push_back(&e);
    return out;
  }
};

inline constexpr std::string_view kStoreFormat = "cotox-context-store/1";

inline nlohmann::ordered_json labels_to_json(const LabelRecord& l) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (ToxicityType t : kAllToxicityTypes) j[exchange_key(t)] = to_string(l[t]);
  return j;
}

inline LabelRecord labels_from_json(const std::string& id, const nlohmann::json& j) {
  LabelRecord l;
  l.compound_id = id;
  for (ToxicityType t : kAllToxicityTypes)
    l.labels[index_of(t)] = parse_binary_verdict(j.at(exchange_key(t)).get<std::string>());
  return l;
}

inline nlohmann::ordered_json to_json(const StoreEntry& e) {
  nlohmann::ordered_json j;
  j["compound"] = nlohmann::json(e.compound);
  j["role"] = e.role == Role::Test ? "test" : "train";
  j["source"] = e.source;
  j["labels"] = e.labels ? labels_to_json(*e.labels) : nlohmann::ordered_json(nullptr);
  j["raw_context"] = nlohmann::json(e.raw_context);
  j["context"] = e.context ? nlohmann::ordered_json(nlohmann::json(*e.context)) : nlohmann::ordered_json(nullptr);
  nlohmann::ordered_json d = nlohmann::ordered_json::array();
  for (const auto& dec : e.decisions) {
    nlohmann::ordered_json dj;
    dj["term_id"] = dec.term_id;
    dj["kept"] = dec.kept;
    dj["method"] = filter::to_string(dec.method);
    dj["rationale"] = dec.rationale ? nlohmann::ordered_json(*dec.rationale) : nlohmann::ordered_json(nullptr);
    d.push_back(std::move(dj));
  }
  j["decisions"] = d;
  j["warnings"] = e.warnings;
  return j;
}

inline StoreEntry entry_from_json(const nlohmann::json& j) {
  StoreEntry e;
  e.compound = j.at("compound").get<Compound>();
  const auto role = j.at("role").get<std::string>();
  if (role != "test" && role != "train") throw Error(ErrorCode::MalformedRow, "store role '" + role + "'");
  e.role = role == "test" ? Role::Test : Role::Train;
  e.source = j.value("source", "ctd");
  if (j.contains("labels") && !j["labels"].is_null()) e.labels = labels_from_json(e.compound.id, j["labels"]);
  e.raw_context = j.at("raw_context").get<BioContext>();
  if (j.contains("context") && !j["context"].is_null()) e.context = j["context"].get<BioContext>();
  for (const auto& d : j.value("decisions", nlohmann::json::array())) {
    filter::FilterDecision dec;
    dec.term_id = d.at("term_id").get<std::string>();
    dec.kept = d.at("kept").get<bool>();
    dec.method = d.value("method", "keyword") == "llm" ? filter::Method::Llm : filter::Method::Keyword;
    if (d.contains("rationale") && d["rationale"].is_string()) dec.rationale = d["rationale"].get<std::string>();
    e.decisions.push_back(std::move(dec));
  }
  e.warnings = j.value("warnings", std::vector<std::string>{});
  return e;
}

inline std::string dump_store(const ContextStore& s) {
  nlohmann::ordered_json j;
  j["format"] = kStoreFormat;
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& [id, e] : s.entries) arr.push_back(to_json(e));
  j["entries"] = arr;
  return j.dump(2, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
}

inline void save_store(const ContextStore& s, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  util::write_file_atomic(path, dump_store(s));
}

inline std::optional<ContextStore> load_store(const fs::path& path) {
  if (!fs::exists(path)) return std::nullopt;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(util::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRow, path.string() + ": " + e.what());
  }
  if (j.value("format", "") != kStoreFormat)
    throw Error(ErrorCode::MalformedRow, path.string() + ": not a context store");
  ContextStore s;
  try {
    for (const auto& ej : j.at("entries")) {
      auto e = entry_from_json(ej);
      s.entries[e.compound.id] = std::move(e);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRow, path.string() + ": " + e.what());
  }
  return s;
}

// ---------------------------------------------------------------- wiring

inline std::shared_ptr<llm::Gateway> make_gateway(const config::PipelineConfig& cfg, const Services& svc) {
  std::shared_ptr<llm::Provider> provider;
  if (cfg.provider_mode == config::ProviderMode::Replay) {
    if (!cfg.fixtures_dir) throw Error(ErrorCode::ConfigError, "paths.fixtures_dir is not set (provider.mode = replay)");
    provider = std::make_shared<llm::ReplayProvider>(*cfg.fixtures_dir);
  } else {
    const char* key = std::getenv(cfg.api_key_env.c_str());
    if (!key || !*key)
      throw Error(ErrorCode::ConfigError, "environment variable " + cfg.api_key_env + " (provider.api_key_env) is not set");
    llm::ProviderConfig pc;
    pc.base_url = cfg.base_url;
    pc.api_key_env = cfg.api_key_env;
    pc.timeout = std::chrono::seconds(cfg.timeout_s);
    provider = std::make_shared<llm::ChatCompletionsProvider>(pc, network_of(svc));
  }
  llm::GatewayConfig gc;
  gc.cache_dir = cfg.cache_dir / "llm";
  if (cfg.provider_mode == config::ProviderMode::Live && cfg.record_fixtures && cfg.fixtures_dir)
    gc.record_dir = *cfg.fixtures_dir;
  gc.max_in_flight = cfg.max_in_flight;
  gc.requests_per_minute = cfg.requests_per_minute;
  gc.retry_budget = cfg.retry_budget;
  return std::make_shared<llm::Gateway>(gc, provider, svc.sleeper);
}

inline std::unique_ptr<chem::Resolver> make_resolver(const config::PipelineConfig& cfg, const Services& svc) {
  std::shared_ptr<http::Client> client;
  switch (cfg.chem_mode) {
    case config::ChemMode::Off:
      return nullptr;
    case config::ChemMode::Fixture:
      client = std::make_shared<http::FixtureClient>(config::require_path(cfg.chem_fixtures_dir, "paths.chem_fixtures_dir"));
      break;
    case config::ChemMode::Live:
      client = network_of(svc);
      break;
  }
  chem::ResolverConfig rc;
  rc.base_url = cfg.chem_base_url;
  rc.cache_path = cfg.cache_dir / "pubchem.json";
  rc.not_found_ttl = std::chrono::hours(24 * cfg.chem_not_found_ttl_days);
  rc.pacing = std::chrono::milliseconds(cfg.chem_pacing_ms);
  rc.max_in_flight = cfg.chem_max_in_flight;
  return std::make_unique<chem::Resolver>(rc, client, svc.sleeper, svc.clock);
}

inline std::vector<std::string> load_configured_lexicon(const config::PipelineConfig& cfg) {
  return filter::load_lexicon(config::require_path(cfg.lexicon, "paths.lexicon"));
}

// Applies the configured filter to one raw context.
class ContextFilter {
 public:
  ContextFilter(const config::PipelineConfig& cfg, const Services& svc) : cfg_(cfg) {
    if (cfg.filter == config::FilterMode::Keyword) {
      lexicon_ = load_configured_lexicon(cfg);
    } else {
      gateway_ = make_gateway(cfg, svc);
      store_ = std::make_unique<prompt::TemplateStore>(cfg.template_dir);
    }
  }

  filter::FilterResult apply(const BioContext& raw) const {
    if (cfg_.filter == config::FilterMode::Keyword) return filter::filter_keyword(raw, lexicon_);
    filter::LlmFilterConfig fc;
    fc.model_id = cfg_.filter_model_id;
    fc.temperature = cfg_.temperature;
    fc.max_output_tokens = cfg_.max_output_tokens;
    return filter::filter_llm(raw, *gateway_, *store_, fc);
  }

 private:
  const config::PipelineConfig& cfg_;
  std::vector<std::string> lexicon_;
  std::shared_ptr<llm::Gateway> gateway_;
  std::unique_ptr<prompt::TemplateStore> store_;
};

// BIOPROCESS-CoT carries no structure, whatever format is configured.
inline prompt::StructureFormat effective_format(prompt::Strategy s, prompt::StructureFormat f) {
  return s == prompt::Strategy::BioProcessCot ? prompt::StructureFormat::None : f;
}

inline std::string default_run_id(prompt::Strategy s, prompt::StructureFormat f) {
  std::string id(prompt::to_string(s));
  if (f != prompt::StructureFormat::None) id += "-" + std::string(prompt::to_string(f));
  return id;
}

inline fs::path run_dir(const config::PipelineConfig& cfg) {
  const auto f = effective_format(cfg.strategy, cfg.format);
  return cfg.output_dir / cfg.run_id.value_or(default_run_id(cfg.strategy, f));
}

// ---------------------------------------------------------------- prepare

struct PrepareSummary {
  std::size_t compounds = 0;
  std::size_t test = 0;
  std::size_t train = 0;
  std::size_t resolved = 0;
  std::size_t unresolved = 0;
  fs::path store_path;
};

inline std::vector<CtdAssociation> load_configured_ctd(const config::PipelineConfig& cfg) {
  struct Source {
    const std::optional<fs::path>* path;
    const char* field;
    TermKind kind;
  };
  const Source sources[] = {
      {&cfg.ctd_pathways, "paths.ctd_pathways", TermKind::Pathway},
      {&cfg.ctd_go_bp, "paths.ctd_go_bp", TermKind::GoBiologicalProcess},
      {&cfg.ctd_go_mf, "paths.ctd_go_mf", TermKind::GoMolecularFunction},
      {&cfg.ctd_go_cc, "paths.ctd_go_cc", TermKind::GoCellularComponent},
  };
  bool any = false;
  std::vector<CtdAssociation> all;
  for (const auto& s : sources) {
    if (!*s.path) continue;
    any = true;
    const auto& p = config::require_path(*s.path, s.field);
    auto rows = cfg.ctd_format == config::CtdFormat::Normalized ? load_ctd_associations(p, s.kind)
                                                                 : load_ctd_export(p, s.kind);
    all.insert(all.end(), rows.begin(), rows.end());
  }
  if (!any) throw Error(ErrorCode::ConfigError, "paths.ctd_pathways is not set (no CTD association file configured)");
  return all;
}

inline PrepareSummary cmd_prepare(const config::PipelineConfig& cfg, const Services& svc = {}) {
  std::vector<Compound> compounds;
  const auto labels = load_labels(config::require_path(cfg.labels, "paths.labels"), &compounds);
  const auto assocs = load_configured_ctd(cfg);
  CtdIndex index(assocs);

  PrepareSummary sum;
  sum.compounds = compounds.size();

  if (auto resolver = make_resolver(cfg, svc)) {
    std::vector<std::size_t> todo;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < compounds.size(); ++i) {
      const auto& c = compounds[i];
      if ((!c.iupac_name || !c.smiles) && !util::trim(c.name).empty()) {
        todo.push_back(i);
        names.push_back(c.name);
      }
    }
    const auto items = resolver->resolve_batch(names, cfg.chem_max_in_flight);
    for (std::size_t k = 0; k < items.size(); ++k) {
      auto& c = compounds[todo[k]];
      const auto& it = items[k];
      if (it.record && it.record->status != chem::ResolutionStatus::NotFound) {
        if (!c.iupac_name && it.record->iupac_name) c.iupac_name = it.record->iupac_name;
        if (!c.smiles && it.record->canonical_smiles) c.smiles = it.record->canonical_smiles;
        ++sum.resolved;
      } else {
        ++sum.unresolved;
        note(svc, "structure lookup failed for " + c.id + " (" + c.name + "): " +
                      (it.error ? std::string(to_string(*it.error)) + " " + it.error_detail : "not found"));
      }
    }
  }

  std::map<std::string, BioContext> contexts;
  for (const auto& c : compounds) {
    BioContext ctx;
    ctx.compound_id = c.id;
    index.extend(ctx, c);
    contexts.emplace(c.id, std::move(ctx));
  }
  const auto split = split_dataset(labels, contexts, cfg.split_seed, cfg.max_test);

  ContextStore store;
  if (auto old = load_store(cfg.context_store))
    for (auto& [id, e] : old->entries)
      if (e.source == "gsea") store.entries[id] = std::move(e);

  for (std::size_t i = 0; i < compounds.size(); ++i) {
    StoreEntry e;
    e.compound = compounds[i];
    e.labels = labels[i];
    e.role = split.test_ids.count(e.compound.id) ? Role::Test : Role::Train;
    e.raw_context = contexts.at(e.compound.id);
    store.entries[e.compound.id] = std::move(e);
  }

  std::vector<StoreEntry*> tests;
  for (auto& [id, e] : store.entries)
    if (e.role == Role::Test && e.source == "ctd") tests.push_back(&e);
  ContextFilter filt(cfg, svc);
  parallel_for(tests.size(), cfg.workers, [&](std::size_t i) {
    auto res = filt.apply(tests[i]->raw_context);
    tests[i]->context = std::move(res.context);
    tests[i]->decisions = std::move(res.decisions);
    tests[i]->warnings = std::move(res.warnings);
  });

  sum.test = split.test_ids.size();
  sum.train = split.train_ids.size();
  sum.store_path = cfg.context_store;
  save_store(store, cfg.context_store);
  note(svc, "prepared " + std::to_string(sum.compounds) + " compounds (" + std::to_string(sum.test) + " test, " +
                std::to_string(sum.train) + " train) -> " + cfg.context_store.string());
  return sum;
}

// ---------------------------------------------------------------- predict

struct PredictSummary {
  fs::path run_dir;
  std::size_t predictions = 0;
  std::size_t parse_failures = 0;
  std::size_t skipped = 0;
  llm::GatewayStats stats;
};

inline llm::ChatRequest chat_request(const config::PipelineConfig& cfg, const prompt::PromptBundle& bundle) {
  llm::ChatRequest req;
  req.model_id = cfg.model_id;
  req.system_text = bundle.system_text;
  req.user_text = bundle.user_text;
  req.temperature = cfg.temperature;
  req.max_output_tokens = cfg.max_output_tokens;
  return req;
}

inline PredictSummary cmd_predict(const config::PipelineConfig& cfg, const Services& svc = {}) {
  const auto strategy = cfg.strategy;
  const auto format = effective_format(strategy, cfg.format);
  prompt::check_combination(strategy, format);

  auto store = load_store(cfg.context_store);
  if (!store) {
    if (prompt::uses_context(strategy))
      throw Error(ErrorCode::PreconditionViolation,
                  std::string(prompt::to_string(strategy)) + " needs a context store at " + cfg.context_store.string() +
                      "; run prepare first");
    std::vector<Compound> compounds;
    const auto labels = load_labels(config::require_path(cfg.labels, "paths.labels"), &compounds);
    store.emplace();
    for (std::size_t i = 0; i < compounds.size(); ++i) {
      StoreEntry e;
      e.compound = compounds[i];
      e.labels = labels[i];
      e.role = Role::Test;
      store->entries[e.compound.id] = std::move(e);
    }
  }
  const auto tests = store->with_role(Role::Test);

  std::vector<prompt::FewShotExample> examples;
  if (strategy == prompt::Strategy::FewShot) {
    std::vector<prompt::FewShotExample> pool;
    for (const auto* e : store->with_role(Role::Train))
      if (e->labels) pool.push_back({e->compound, *e->labels});
    examples = prompt::select_fewshot_examples(std::move(pool), static_cast<std::size_t>(cfg.fewshot_k),
                                               cfg.fewshot_seed, format);
  }

  const prompt::TemplateStore templates(cfg.template_dir);
  const std::string stem(prompt::asset_stem(strategy));
  report::RunManifest manifest;
  manifest.started_at = util::iso8601(svc.clock());
  manifest.template_digests[stem + ".system.txt"] = templates.digest(stem + ".system.txt");
  manifest.template_digests[stem + ".user.txt"] = templates.digest(stem + ".user.txt");

  auto gateway = make_gateway(cfg, svc);
  const auto schema = prompt::output_schema(strategy);

  struct Item {
    std::optional<NormalizedPrediction> pred;
    std::string transcript;
    std::string fingerprint;
    std::string skip_reason;
  };
  std::vector<Item> items(tests.size());
  parallel_for(tests.size(), cfg.workers, [&](std::size_t i) {
    const StoreEntry& e = *tests[i];
    const BioContext* ctx = e.context ? &*e.context : nullptr;
    if (prompt::uses_context(strategy) && !ctx) {
      items[i].skip_reason = "no filtered context";
      return;
    }
    prompt::PromptBundle bundle;
    try {
      bundle = prompt::build_prompt(e.compound, ctx, strategy, format,
                                    strategy == prompt::Strategy::FewShot ? &examples : nullptr, templates);
    } catch (const Error& err) {
      if (err.code() != ErrorCode::MissingStructure) throw;
      items[i].skip_reason = "missing " + prompt::structure_label(format);
      return;
    }
    const auto req = chat_request(cfg, bundle);
    items[i].fingerprint = llm::fingerprint(req).hex;
    const auto resp = gateway->complete(req);
    const auto outcome = parse_response(resp.text, e.compound.id, schema);
    items[i].pred = normalize(outcome, e.compound.id);
    items[i].transcript = outcome.prediction ? report::render_case_study(*outcome.prediction)
                                             : report::render_failure(e.compound.id, *outcome.failure, resp.text);
  });

  PredictSummary sum;
  sum.run_dir = run_dir(cfg);
  const fs::path transcripts = sum.run_dir / "transcripts";
  fs::remove_all(transcripts);
  fs::create_directories(transcripts);

  std::string jsonl;
  for (std::size_t i = 0; i < tests.size(); ++i) {
    const auto& id = tests[i]->compound.id;
    if (!items[i].pred) {
      manifest.skipped[id] = items[i].skip_reason;
      ++sum.skipped;
      note(svc, "skipped " + id + ": " + items[i].skip_reason);
      continue;
    }
    jsonl += to_jsonl_line(*items[i].pred) + "\n";
    if (items[i].pred->failure) ++sum.parse_failures;
    ++sum.predictions;
    manifest.fingerprints[id] = items[i].fingerprint;
    util::write_file_atomic(transcripts / (id + ".md"), items[i].transcript);
  }
  util::write_file_atomic(sum.run_dir / "predictions.jsonl", jsonl);

  sum.stats = gateway->stats();
  manifest.run_id = sum.run_dir.filename().string();
  manifest.model_id = cfg.model_id;
  manifest.config = cfg.snapshot();
  manifest.config["run.strategy"] = prompt::to_string(strategy);
  manifest.config["run.format"] = prompt::to_string(format);
  manifest.requests = sum.stats.requests;
  manifest.cache_hits = sum.stats.cache_hits;
  manifest.parse_failures = static_cast<int>(sum.parse_failures);
  manifest.finished_at = util::iso8601(svc.clock());
  util::write_file_atomic(sum.run_dir / "manifest.json", report::to_json(manifest).dump(2) + "\n");
  note(svc, "wrote " + std::to_string(sum.predictions) + " predictions (" + std::to_string(sum.parse_failures) +
                " parse failures) -> " + sum.run_dir.string());
  return sum;
}

// ---------------------------------------------------------------- evaluate

inline std::vector<NormalizedPrediction> read_predictions(const fs::path& path) {
  std::vector<NormalizedPrediction> out;
  const auto text = util::read_file(path);
  int ln = 0;
  for (const auto& raw : util::split(text, '\n')) {
    ++ln;
    if (util::trim(raw).empty()) continue;
    out.push_back(from_jsonl_line(util::strip_cr(raw), path.string() + ":" + std::to_string(ln)));
  }
  return out;
}

// runs/<id>/predictions.jsonl is named <id>; anything else by its stem.
inline std::string method_name(const fs::path& predictions) {
  if (predictions.filename() == "predictions.jsonl" && predictions.has_parent_path())
    return fs::absolute(predictions).parent_path().filename().string();
  return predictions.stem().string();
}

struct EvaluateSummary {
  fs::path report_path;
  report::MethodReports reports;
};

inline EvaluateSummary cmd_evaluate(const config::PipelineConfig& cfg, std::vector<fs::path> prediction_files,
                                    const std::optional<fs::path>& out_dir = std::nullopt,
                                    const Services& svc = {}) {
  if (prediction_files.empty()) prediction_files.push_back(run_dir(cfg) / "predictions.jsonl");
  const auto labels = load_labels(config::require_path(cfg.labels, "paths.labels"));
  EvaluateSummary sum;
  nlohmann::ordered_json all = nlohmann::ordered_json::object();
  for (const auto& file : prediction_files) {
    if (!fs::is_regular_file(file)) throw Error(ErrorCode::IoError, "predictions file not found: " + file.string());
    const auto preds = read_predictions(file);
    eval::EvalReport r;
    try {
      r = eval::evaluate(preds, labels, eval::EvalOptions{cfg.eval_folds, cfg.eval_seed});
    } catch (const Error& e) {
      throw Error(e.code(), file.string() + ": " + e.detail());
    }
    const auto name = method_name(file);
    all[name] = eval::to_json(r);
    sum.reports.emplace_back(name, std::move(r));
  }
  const fs::path dir = out_dir ? *out_dir : fs::absolute(prediction_files.front()).parent_path();
  fs::create_directories(dir);
  sum.report_path = dir / "report.md";
  util::write_file_atomic(sum.report_path, report::render_report(sum.reports, cfg.eval_folds));
  util::write_file_atomic(dir / "report.json", all.dump(2) + "\n");
  note(svc, "report -> " + sum.report_path.string());
  return sum;
}

// ---------------------------------------------------------------- gsea-context

struct GseaSummary {
  BioContext raw_context;
  BioContext context;
  std::vector<gsea::EnrichmentResult> results;
  std::vector<std::string> notices;
  fs::path report_path;
};

inline GseaSummary cmd_gsea_context(const config::PipelineConfig& cfg, const Services& svc = {}) {
  const auto& gmt = config::require_path(cfg.gmt, "paths.gmt");
  const auto& rank = config::require_path(cfg.rank_file, "paths.rank_file");
  const auto sets = parse_gmt(gmt);
  const auto ranked = parse_rank_file(rank);
  auto res = gsea::enrich_to_context(ranked, sets, cfg.gsea, cfg.thresholds, cfg.kind_map, cfg.gsea_compound_id);

  GseaSummary sum;
  sum.results = res.results;
  sum.raw_context = res.context;
  if (res.context.empty()) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "no gene set passed p < %g and q < %g; context is empty", cfg.thresholds.p_max,
                  cfg.thresholds.q_max);
    sum.notices.push_back(buf);
    note(svc, buf);
  }
  ContextFilter filt(cfg, svc);
  auto filtered = filt.apply(res.context);
  sum.context = filtered.context;

  StoreEntry e;
  e.compound.id = cfg.gsea_compound_id;
  e.compound.name = cfg.gsea_compound_name;
  e.compound.smiles = cfg.gsea_compound_smiles;
  e.compound.iupac_name = cfg.gsea_compound_iupac;
  e.role = Role::Test;
  e.source = "gsea";
  e.raw_context = res.context;
  e.context = filtered.context;
  e.decisions = std::move(filtered.decisions);
  e.warnings = sum.notices;
  e.warnings.insert(e.warnings.end(), filtered.warnings.begin(), filtered.warnings.end());

  ContextStore store = load_store(cfg.context_store).value_or(ContextStore{});
  store.entries[e.compound.id] = std::move(e);
  save_store(store, cfg.context_store);

  sum.report_path = cfg.output_dir / "gsea" / (cfg.gsea_compound_id + ".tsv");
  fs::create_directories(sum.report_path.parent_path());
  util::write_file_atomic(sum.report_path, gsea::report_tsv(sum.results));
  note(svc, std::to_string(sum.context.size()) + " terms kept for " + cfg.gsea_compound_id + " -> " +
                cfg.context_store.string());
  return sum;
}

}  // namespace cotox::pipeline
