#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cotox/core_model.hpp"
#include "cotox/error.hpp"
#include "cotox/util.hpp"

namespace cotox {

struct ReasoningBlock {
  std::string pathway;
  std::string go_term;
  std::string iupac_support;
  std::string overall_mechanism;

  bool empty() const {
    return pathway.empty() && go_term.empty() && iupac_support.empty() && overall_mechanism.empty();
  }
  bool operator==(const ReasoningBlock&) const = default;
};

struct OrganVerdict {
  ReasoningBlock reasoning;
  BinaryVerdict prediction = BinaryVerdict::NonToxic;
  BinaryVerdict answer = BinaryVerdict::NonToxic;  // authoritative for evaluation

  bool operator==(const OrganVerdict&) const = default;
};

struct ToxicityPrediction {
  std::string compound_id;
  std::array<OrganVerdict, 6> verdicts{};
  std::vector<std::string> warnings;

  const OrganVerdict& operator[](ToxicityType t) const { return verdicts[index_of(t)]; }
  OrganVerdict& operator[](ToxicityType t) { return verdicts[index_of(t)]; }
};

enum class ParseStage { Extraction, Schema, Vocabulary };

constexpr std::string_view to_string(ParseStage s) {
  switch (s) {
    case ParseStage::Extraction: return "Extraction";
    case ParseStage::Schema: return "Schema";
    case ParseStage::Vocabulary: return "Vocabulary";
  }
  return "";
}

inline ParseStage parse_stage(std::string_view s) {
  if (s == "Extraction") return ParseStage::Extraction;
  if (s == "Schema") return ParseStage::Schema;
  if (s == "Vocabulary") return ParseStage::Vocabulary;
  throw Error(ErrorCode::SchemaFailure, "unknown parse stage '" + std::string(s) + "'");
}

struct ParseFailure {
  ParseStage stage = ParseStage::Extraction;
  std::string detail;

  bool operator==(const ParseFailure&) const = default;
};

struct ParseOutcome {
  std::optional<ToxicityPrediction> prediction;
  std::optional<ParseFailure> failure;

  bool ok() const { return prediction.has_value(); }
};

// Output layouts the parser understands.
enum class OutputSchema {
  Reasoned,  // Reasoning + Prediction + Answer per organ
  AnswerOnly,
};

// ------------------------------------------------------------- extraction

struct ExtractedJson {
  nlohmann::json value;
  std::vector<std::string> warnings;
};

inline constexpr std::string_view kWarnFence = "stripped code fence";
inline constexpr std::string_view kWarnBalanced = "extracted balanced object";
inline constexpr std::string_view kWarnTrailingComma = "removed trailing commas";

namespace detail {

inline std::optional<nlohmann::json> try_parse(std::string_view text) {
  auto j = nlohmann::json::parse(text.begin(), text.end(), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) return std::nullopt;
  return j;
}

// Text between the first ``` fence line and the next ```, or nullopt when the
// input has no fence.
inline std::optional<std::string> strip_fences(std::string_view text) {
  const std::size_t open = text.find("```");
  if (open == std::string_view::npos) return std::nullopt;
  std::size_t body = text.find('\n', open + 3);
  if (body == std::string_view::npos) return std::string();
  ++body;
  const std::size_t close = text.find("```", body);
  return std::string(text.substr(body, close == std::string_view::npos ? std::string_view::npos
                                                                        : close - body));
}

// Longest balanced {...} (and optionally [...]) span, string-literal aware.
// Single linear pass; ties keep the earliest span.
inline std::optional<std::string_view> longest_balanced(std::string_view text, bool arrays) {
  std::vector<std::pair<char, std::size_t>> stack;
  bool in_string = false;
  bool escaped = false;
  std::size_t best_start = 0, best_len = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"' && !stack.empty()) {
      in_string = true;
    } else if (c == '{' || (arrays && c == '[')) {
      stack.emplace_back(c, i);
    } else if (c == '}' || (arrays && c == ']')) {
      const char want = c == '}' ? '{' : '[';
      if (stack.empty()) continue;
      if (stack.back().first != want) {
        stack.clear();  // mismatched nesting: restart
        continue;
      }
      const std::size_t start = stack.back().second;
      stack.pop_back();
      const std::size_t len = i - start + 1;
      if (len > best_len) {
        best_len = len;
        best_start = start;
      }
    }
  }
  if (best_len == 0) return std::nullopt;
  return text.substr(best_start, best_len);
}

inline std::string remove_trailing_commas(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      out.push_back(c);
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == ',') {
      std::size_t j = i + 1;
      while (j < text.size() && (text[j] == ' ' || text[j] == '\t' || text[j] == '\n' || text[j] == '\r'))
        ++j;
      if (j < text.size() && (text[j] == '}' || text[j] == ']')) continue;
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace detail

// Ordered repair ladder: whole text, fence stripping, longest balanced
// object, trailing-comma removal. Every repair that was needed is reported.
inline ExtractedJson extract_json(std::string_view text, bool allow_arrays = false) {
  ExtractedJson out;
  if (auto j = detail::try_parse(text)) {
    out.value = std::move(*j);
    return out;
  }
  std::string working(text);
  if (auto body = detail::strip_fences(text)) {
    out.warnings.emplace_back(kWarnFence);
    working = std::move(*body);
    if (auto j = detail::try_parse(working)) {
      out.value = std::move(*j);
      return out;
    }
  }
  std::string candidate = working;
  if (auto span = detail::longest_balanced(working, allow_arrays)) {
    if (util::trim(*span) != util::trim(working)) out.warnings.emplace_back(kWarnBalanced);
    candidate = std::string(*span);
    if (auto j = detail::try_parse(candidate)) {
      out.value = std::move(*j);
      return out;
    }
  }
  std::string cleaned = detail::remove_trailing_commas(candidate);
  if (cleaned != candidate) {
    if (auto j = detail::try_parse(cleaned)) {
      out.warnings.emplace_back(kWarnTrailingComma);
      out.value = std::move(*j);
      return out;
    }
  }
  throw Error(ErrorCode::ExtractionFailure, "no parseable JSON in model output");
}

// ------------------------------------------------------------- schema

namespace detail {

inline const nlohmann::json* find_folded(const nlohmann::json& obj,
                                         std::initializer_list<std::string_view> keys) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const std::string k = util::fold_key(it.key());
    for (auto want : keys)
      if (k == want) return &it.value();
  }
  return nullptr;
}

inline std::string as_text(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "";
  return v.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

struct Failure {
  ParseFailure failure;
};

inline BinaryVerdict read_verdict(const nlohmann::json& v, const std::string& where) {
  if (!v.is_string()) throw Failure{{ParseStage::Vocabulary, where + ": non-string verdict " + as_text(v)}};
  try {
    return parse_binary_verdict(v.get<std::string>());
  } catch (const Error&) {
    throw Failure{{ParseStage::Vocabulary, where + ": '" + v.get<std::string>() + "'"}};
  }
}

}  // namespace detail

// Reads the six-organ object. Keys are matched case- and punctuation-
// insensitively; verdicts are strict, reasoning text is lenient.
inline ParseOutcome parse_prediction(const nlohmann::json& root, std::string_view compound_id,
                                     OutputSchema schema = OutputSchema::Reasoned) {
  using detail::Failure;
  ParseOutcome outcome;
  try {
    if (!root.is_object()) throw Failure{{ParseStage::Schema, "top-level value is not an object"}};
    ToxicityPrediction pred;
    pred.compound_id = std::string(compound_id);
    std::array<const nlohmann::json*, 6> slots{};
    for (auto it = root.begin(); it != root.end(); ++it) {
      ToxicityType t;
      try {
        t = parse_toxicity_type(it.key());
      } catch (const Error&) {
        pred.warnings.push_back("ignored unknown key '" + it.key() + "'");
        continue;
      }
      if (slots[index_of(t)]) {
        pred.warnings.push_back("duplicate key for " + std::string(display_name(t)) + " ignored");
        continue;
      }
      slots[index_of(t)] = &it.value();
    }
    for (ToxicityType t : kAllToxicityTypes) {
      const std::string name(display_name(t));
      const nlohmann::json* value = slots[index_of(t)];
      if (!value) throw Failure{{ParseStage::Schema, name}};
      OrganVerdict& ov = pred[t];
      if (value->is_string()) {
        ov.answer = detail::read_verdict(*value, name);
        ov.prediction = ov.answer;
        pred.warnings.push_back(name + ": bare verdict accepted as Answer");
        continue;
      }
      if (!value->is_object()) {
        if (value->is_number() || value->is_boolean())
          throw Failure{{ParseStage::Vocabulary, name + ": non-string verdict " + detail::as_text(*value)}};
        throw Failure{{ParseStage::Schema, name + ": value is not an object"}};
      }
      const nlohmann::json* answer = detail::find_folded(*value, {"answer"});
      if (!answer) throw Failure{{ParseStage::Schema, name + ": missing Answer"}};
      ov.answer = detail::read_verdict(*answer, name + ".Answer");
      if (const nlohmann::json* p = detail::find_folded(*value, {"prediction"})) {
        ov.prediction = detail::read_verdict(*p, name + ".Prediction");
        if (ov.prediction != ov.answer)
          pred.warnings.push_back(name + ": prediction/answer mismatch");
      } else {
        ov.prediction = ov.answer;
        if (schema == OutputSchema::Reasoned) pred.warnings.push_back(name + ": missing Prediction");
      }

      const nlohmann::json* reasoning = detail::find_folded(*value, {"reasoning"});
      const bool quiet = schema == OutputSchema::AnswerOnly;
      if (!reasoning) {
        if (!quiet) pred.warnings.push_back(name + ": missing Reasoning");
        continue;
      }
      if (!reasoning->is_object()) {
        ov.reasoning.overall_mechanism = detail::as_text(*reasoning);
        if (!quiet) pred.warnings.push_back(name + ": Reasoning is not an object");
        continue;
      }
      auto field = [&](std::string& dst, std::initializer_list<std::string_view> keys,
                       std::string_view label) {
        if (const nlohmann::json* f = detail::find_folded(*reasoning, keys)) {
          dst = detail::as_text(*f);
        } else if (!quiet) {
          pred.warnings.push_back(name + ": Reasoning missing '" + std::string(label) + "'");
        }
      };
      field(ov.reasoning.pathway, {"pathway", "pathways"}, "Pathway");
      field(ov.reasoning.go_term, {"goterm", "goterms"}, "GO Term");
      field(ov.reasoning.iupac_support, {"iupacsupport", "structuresupport"}, "IUPAC Support");
      field(ov.reasoning.overall_mechanism, {"overallmechanism", "mechanism"}, "Overall Mechanism");
    }
    outcome.prediction = std::move(pred);
  } catch (const Failure& f) {
    outcome.failure = f.failure;
  }
  return outcome;
}

inline ParseOutcome parse_zeroshot_prediction(const nlohmann::json& root, std::string_view compound_id) {
  return parse_prediction(root, compound_id, OutputSchema::AnswerOnly);
}

// Extraction and schema parsing in one step; extraction warnings come first.
inline ParseOutcome parse_response(std::string_view text, std::string_view compound_id,
                                   OutputSchema schema) {
  ExtractedJson extracted;
  try {
    extracted = extract_json(text);
  } catch (const Error& e) {
    return ParseOutcome{std::nullopt, ParseFailure{ParseStage::Extraction, e.detail()}};
  }
  ParseOutcome out = parse_prediction(extracted.value, compound_id, schema);
  if (out.prediction) {
    auto& w = out.prediction->warnings;
    w.insert(w.begin(), extracted.warnings.begin(), extracted.warnings.end());
  }
  return out;
}

// Model-format object (display names, Reasoning / Prediction / Answer); the
// inverse of parse_prediction.
inline nlohmann::ordered_json to_model_json(const ToxicityPrediction& p,
                                            OutputSchema schema = OutputSchema::Reasoned) {
  nlohmann::ordered_json root = nlohmann::ordered_json::object();
  for (ToxicityType t : kAllToxicityTypes) {
    const OrganVerdict& ov = p[t];
    nlohmann::ordered_json organ = nlohmann::ordered_json::object();
    if (schema == OutputSchema::Reasoned) {
      organ["Reasoning"] = {{"Pathway", ov.reasoning.pathway},
                            {"GO Term", ov.reasoning.go_term},
                            {"IUPAC Support", ov.reasoning.iupac_support},
                            {"Overall Mechanism", ov.reasoning.overall_mechanism}};
      organ["Prediction"] = std::string(to_string(ov.prediction));
    }
    organ["Answer"] = std::string(to_string(ov.answer));
    root[std::string(display_name(t))] = std::move(organ);
  }
  return root;
}

// ------------------------------------------------------------- exchange JSONL

// One line of predictions.jsonl. Lines for compounds whose output could not
// be parsed carry "answers": null and a "failure" object.
struct NormalizedPrediction {
  std::string compound_id;
  std::optional<std::array<BinaryVerdict, 6>> answers;
  std::vector<std::string> warnings;
  std::optional<ParseFailure> failure;

  BinaryVerdict operator[](ToxicityType t) const { return (*answers)[index_of(t)]; }
  bool operator==(const NormalizedPrediction&) const = default;
};

inline NormalizedPrediction normalize(const ToxicityPrediction& p) {
  NormalizedPrediction n;
  n.compound_id = p.compound_id;
  std::array<BinaryVerdict, 6> a{};
  for (ToxicityType t : kAllToxicityTypes) a[index_of(t)] = p[t].answer;
  n.answers = a;
  n.warnings = p.warnings;
  return n;
}

inline NormalizedPrediction normalize(const ParseOutcome& o, std::string_view compound_id) {
  if (o.prediction) return normalize(*o.prediction);
  NormalizedPrediction n;
  n.compound_id = std::string(compound_id);
  n.failure = o.failure;
  return n;
}

inline std::string to_jsonl_line(const NormalizedPrediction& p) {
  nlohmann::ordered_json j;
  j["compound_id"] = p.compound_id;
  if (p.answers) {
    nlohmann::ordered_json a = nlohmann::ordered_json::object();
    for (ToxicityType t : kAllToxicityTypes) a[exchange_key(t)] = std::string(to_string((*p.answers)[index_of(t)]));
    j["answers"] = std::move(a);
  } else {
    j["answers"] = nullptr;
  }
  j["warnings"] = p.warnings;
  if (p.failure)
    j["failure"] = {{"stage", std::string(to_string(p.failure->stage))}, {"detail", p.failure->detail}};
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

// Strict reader for the exchange format; `where` prefixes error messages.
inline NormalizedPrediction from_jsonl_line(std::string_view line, const std::string& where = "") {
  auto bad = [&](const std::string& msg) { return Error(ErrorCode::MalformedRow, where + msg); };
  auto j = nlohmann::json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw bad("not a JSON object");
  NormalizedPrediction p;
  if (!j.contains("compound_id") || !j["compound_id"].is_string() ||
      j["compound_id"].get<std::string>().empty())
    throw bad("missing compound_id");
  p.compound_id = j["compound_id"].get<std::string>();
  if (j.contains("warnings")) {
    if (!j["warnings"].is_array()) throw bad("warnings must be an array");
    for (const auto& w : j["warnings"]) {
      if (!w.is_string()) throw bad("warnings must be strings");
      p.warnings.push_back(w.get<std::string>());
    }
  }
  if (j.contains("failure") && !j["failure"].is_null()) {
    const auto& f = j["failure"];
    if (!f.is_object() || !f.contains("stage") || !f["stage"].is_string()) throw bad("malformed failure");
    try {
      p.failure = ParseFailure{parse_stage(f["stage"].get<std::string>()), f.value("detail", "")};
    } catch (const Error& e) {
      throw bad(e.detail());
    }
  }
  const bool has_answers = j.contains("answers") && !j["answers"].is_null();
  if (has_answers == p.failure.has_value()) throw bad("exactly one of answers/failure must be present");
  if (has_answers) {
    const auto& a = j["answers"];
    if (!a.is_object()) throw bad("answers must be an object");
    std::array<BinaryVerdict, 6> out{};
    for (ToxicityType t : kAllToxicityTypes) {
      const std::string key = exchange_key(t);
      if (!a.contains(key) || !a[key].is_string()) throw bad("answers." + key + " missing");
      const std::string v = a[key].get<std::string>();
      if (v != to_string(BinaryVerdict::Toxic) && v != to_string(BinaryVerdict::NonToxic))
        throw bad("answers." + key + ": '" + v + "' is not Toxic/Non-toxic");
      out[index_of(t)] = parse_binary_verdict(v);
    }
    if (a.size() != 6) throw bad("answers has unexpected keys");
    p.answers = out;
  }
  return p;
}

}  // namespace cotox
