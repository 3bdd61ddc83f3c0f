#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cotox/error.hpp"
#include "cotox/ingest.hpp"
#include "cotox/llm_gateway.hpp"
#include "cotox/prompt_builder.hpp"
#include "cotox/response_parser.hpp"
#include "cotox/util.hpp"

namespace cotox::filter {

enum class Method { Llm, Keyword };

constexpr std::string_view to_string(Method m) { return m == Method::Llm ? "llm" : "keyword"; }

struct FilterDecision {
  std::string term_id;
  bool kept = false;
  std::optional<std::string> rationale;
  Method method = Method::Keyword;

  bool operator==(const FilterDecision&) const = default;
};

struct FilterResult {
  BioContext context;
  std::vector<FilterDecision> decisions;  // one per input term, pathways first
  std::vector<std::string> warnings;
};

inline nlohmann::json to_json(const FilterDecision& d) {
  nlohmann::json j{{"term_id", d.term_id}, {"kept", d.kept}, {"method", to_string(d.method)}};
  j["rationale"] = d.rationale ? nlohmann::json(*d.rationale) : nlohmann::json(nullptr);
  return j;
}

inline std::vector<std::string> parse_lexicon(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& raw : util::split(text, '\n')) {
    std::string_view line = util::trim(util::strip_cr(raw));
    if (line.empty() || line.front() == '#') continue;
    out.push_back(util::to_lower(line));
  }
  return out;
}

inline std::vector<std::string> load_lexicon(const std::filesystem::path& path) {
  auto lex = parse_lexicon(util::read_file(path));
  if (lex.empty()) throw Error(ErrorCode::PreconditionViolation, "lexicon " + path.string() + " is empty");
  return lex;
}

// Substring match on the lowercased term name.
inline FilterResult filter_keyword(const BioContext& ctx, const std::vector<std::string>& lexicon) {
  if (lexicon.empty()) throw Error(ErrorCode::PreconditionViolation, "lexicon is empty");
  FilterResult out;
  out.context.compound_id = ctx.compound_id;
  out.context.filtered = true;
  auto visit = [&](const std::vector<Term>& in, std::vector<Term>& kept) {
    for (const auto& t : in) {
      const std::string name = util::to_lower(t.term_name);
      FilterDecision d{t.term_id, false, std::nullopt, Method::Keyword};
      for (const auto& entry : lexicon) {
        if (name.find(entry) != std::string::npos) {
          d.kept = true;
          d.rationale = "matched '" + entry + "'";
          break;
        }
      }
      if (!d.kept) d.rationale = "no lexicon entry matched";
      if (d.kept) kept.push_back(t);
      out.decisions.push_back(std::move(d));
    }
  };
  visit(ctx.pathways, out.context.pathways);
  visit(ctx.go_terms, out.context.go_terms);
  return out;
}

struct LlmFilterConfig {
  std::string model_id = "gpt-4o";
  double temperature = 0.0;
  int max_output_tokens = 4096;
};

inline llm::ChatRequest filter_request(const BioContext& ctx, const prompt::TemplateStore& store,
                                       const LlmFilterConfig& config) {
  llm::ChatRequest req;
  req.model_id = config.model_id;
  req.temperature = config.temperature;
  req.max_output_tokens = config.max_output_tokens;
  req.system_text = store.get("filter.system.txt");
  req.user_text = prompt::render(store.get("filter.user.txt"),
                                 {{"pathways", prompt::render_terms(ctx.pathways)},
                                  {"go_terms", prompt::render_terms(ctx.go_terms)}});
  return req;
}

// Kept ids from the model reply: a JSON array of strings, or an object with a
// "keep"/"kept" array.
inline std::vector<std::string> parse_kept_ids(std::string_view text) {
  ExtractedJson extracted;
  try {
    extracted = extract_json(text, /*allow_arrays=*/true);
  } catch (const Error&) {
    throw Error(ErrorCode::UnparseableFilterResponse, "no JSON in filter reply");
  }
  const nlohmann::json* arr = &extracted.value;
  if (arr->is_object()) {
    arr = nullptr;
    for (const char* k : {"keep", "kept", "term_ids", "ids"})
      if (extracted.value.contains(k)) {
        arr = &extracted.value[k];
        break;
      }
  }
  if (!arr || !arr->is_array()) throw Error(ErrorCode::UnparseableFilterResponse, "filter reply is not an id array");
  std::vector<std::string> ids;
  for (const auto& v : *arr) {
    if (!v.is_string()) throw Error(ErrorCode::UnparseableFilterResponse, "non-string id in filter reply");
    ids.push_back(std::string(util::trim(v.get<std::string>())));
  }
  return ids;
}

// One request per compound. The kept set is always a subset of the input:
// ids the model invents are dropped with a warning.
inline FilterResult filter_llm(const BioContext& ctx, llm::Gateway& gateway, const prompt::TemplateStore& store,
                               const LlmFilterConfig& config = {}) {
  if (ctx.filtered) throw Error(ErrorCode::PreconditionViolation, "context already filtered");
  FilterResult out;
  out.context.compound_id = ctx.compound_id;
  out.context.filtered = true;
  if (ctx.empty()) return out;

  const auto reply = gateway.complete(filter_request(ctx, store, config));
  const auto ids = parse_kept_ids(reply.text);
  std::set<std::string> kept(ids.begin(), ids.end());
  std::set<std::string> known;
  auto visit = [&](const std::vector<Term>& in, std::vector<Term>& dst) {
    for (const auto& t : in) {
      known.insert(t.term_id);
      const bool keep = kept.count(t.term_id) > 0;
      if (keep) dst.push_back(t);
      out.decisions.push_back(FilterDecision{t.term_id, keep, std::nullopt, Method::Llm});
    }
  };
  visit(ctx.pathways, out.context.pathways);
  visit(ctx.go_terms, out.context.go_terms);
  for (const auto& id : ids)
    if (!known.count(id)) out.warnings.push_back("model returned unknown term id '" + id + "'; ignored");
  return out;
}

}  // namespace cotox::filter
