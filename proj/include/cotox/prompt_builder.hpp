#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cotox/core_model.hpp"
#include "cotox/error.hpp"
#include "cotox/ingest.hpp"
#include "cotox/response_parser.hpp"
#include "cotox/util.hpp"

namespace cotox::prompt {

enum class Strategy { ZeroShot, FewShot, Cot, BioProcessCot, CoTox };
enum class StructureFormat { Smiles, Iupac, None };

constexpr std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::ZeroShot: return "zeroshot";
    case Strategy::FewShot: return "fewshot";
    case Strategy::Cot: return "cot";
    case Strategy::BioProcessCot: return "bioprocess-cot";
    case Strategy::CoTox: return "cotox";
  }
  return "";
}

constexpr std::string_view to_string(StructureFormat f) {
  switch (f) {
    case StructureFormat::Smiles: return "smiles";
    case StructureFormat::Iupac: return "iupac";
    case StructureFormat::None: return "none";
  }
  return "";
}

inline Strategy parse_strategy(std::string_view s) {
  const std::string k = util::fold_key(s);
  if (k == "zeroshot") return Strategy::ZeroShot;
  if (k == "fewshot") return Strategy::FewShot;
  if (k == "cot") return Strategy::Cot;
  if (k == "bioprocesscot") return Strategy::BioProcessCot;
  if (k == "cotox") return Strategy::CoTox;
  throw Error(ErrorCode::ConfigError, "unknown strategy '" + std::string(s) + "'");
}

inline StructureFormat parse_format(std::string_view s) {
  const std::string k = util::fold_key(s);
  if (k == "smiles") return StructureFormat::Smiles;
  if (k == "iupac") return StructureFormat::Iupac;
  if (k == "none") return StructureFormat::None;
  throw Error(ErrorCode::ConfigError, "unknown structure format '" + std::string(s) + "'");
}

constexpr bool uses_context(Strategy s) { return s == Strategy::CoTox || s == Strategy::BioProcessCot; }
constexpr bool uses_reasoning(Strategy s) {
  return s == Strategy::Cot || s == Strategy::CoTox || s == Strategy::BioProcessCot;
}

inline OutputSchema output_schema(Strategy s) {
  return uses_reasoning(s) ? OutputSchema::Reasoned : OutputSchema::AnswerOnly;
}

// Template asset file stem, e.g. "bioprocess_cot" for "bioprocess_cot.user.txt".
constexpr std::string_view asset_stem(Strategy s) {
  switch (s) {
    case Strategy::ZeroShot: return "zeroshot";
    case Strategy::FewShot: return "fewshot";
    case Strategy::Cot: return "cot";
    case Strategy::BioProcessCot: return "bioprocess_cot";
    case Strategy::CoTox: return "cotox";
  }
  return "";
}

inline void check_combination(Strategy s, StructureFormat f) {
  const bool no_structure = f == StructureFormat::None;
  if ((s == Strategy::BioProcessCot) != no_structure)
    throw Error(ErrorCode::IllegalCombination,
                std::string(to_string(s)) + " with format " + std::string(to_string(f)));
}

struct FewShotExample {
  Compound compound;
  LabelRecord labels;
};

struct PromptBundle {
  std::string system_text;
  std::string user_text;
  Strategy strategy = Strategy::CoTox;
  StructureFormat format = StructureFormat::Iupac;
  std::string compound_id;
  std::uint64_t content_hash = 0;
};

inline std::uint64_t content_hash(std::string_view system_text, std::string_view user_text) {
  std::uint64_t h = util::fnv1a64(std::to_string(system_text.size()) + ":");
  h = util::fnv1a64(system_text, h);
  h = util::fnv1a64(std::to_string(user_text.size()) + ":", h);
  return util::fnv1a64(user_text, h);
}

// Versioned text assets under one directory, e.g. cotox.system.txt. Files are
// read once and cached.
class TemplateStore {
 public:
  explicit TemplateStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::string& get(const std::string& file) const {
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(file); it != cache_.end()) return it->second;
    const auto path = dir_ / file;
    if (!std::filesystem::is_regular_file(path))
      throw Error(ErrorCode::MissingTemplateAsset, path.string());
    return cache_.emplace(file, util::read_file(path)).first->second;
  }

  std::string digest(const std::string& file) const { return util::sha256_hex(get(file)); }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  mutable std::map<std::string, std::string> cache_;
};

// Replaces every {{name}}; a placeholder without a binding is an error so
// template edits cannot silently drop content.
inline std::string render(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tmpl.size() * 2);
  std::size_t pos = 0;
  while (true) {
    const std::size_t open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    const std::size_t close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos)
      throw Error(ErrorCode::ConfigError, "unterminated placeholder in template");
    out.append(tmpl.substr(pos, open - pos));
    const std::string key(util::trim(tmpl.substr(open + 2, close - open - 2)));
    auto it = vars.find(key);
    if (it == vars.end()) throw Error(ErrorCode::ConfigError, "unbound placeholder {{" + key + "}}");
    out.append(it->second);
    pos = close + 2;
  }
  return out;
}

inline std::string render_terms(const std::vector<Term>& terms) {
  if (terms.empty()) return "- (none)\n";
  std::string out;
  for (const auto& t : terms) out += "- " + t.term_name + " (" + t.term_id + ")\n";
  return out;
}

inline std::string render_toxicity_types() {
  std::string out;
  int i = 1;
  for (ToxicityType t : kAllToxicityTypes) out += std::to_string(i++) + ". " + std::string(display_name(t)) + "\n";
  return out;
}

// The JSON layout the model must emit; field names match response-parser.
inline std::string render_output_schema(OutputSchema schema) {
  nlohmann::ordered_json root = nlohmann::ordered_json::object();
  for (ToxicityType t : kAllToxicityTypes) {
    nlohmann::ordered_json organ = nlohmann::ordered_json::object();
    if (schema == OutputSchema::Reasoned) {
      organ["Reasoning"] = {{"Pathway", "<step 1: relevance of the input pathways>"},
                            {"GO Term", "<step 2: biological processes and functions affected>"},
                            {"IUPAC Support", "<step 3: structural features supporting the mechanism>"},
                            {"Overall Mechanism", "<step 4: synthesis of the evidence>"}};
      organ["Prediction"] = "Toxic | Non-toxic";
    }
    organ["Answer"] = "Toxic | Non-toxic";
    root[std::string(display_name(t))] = std::move(organ);
  }
  return root.dump(2);
}

inline std::string structure_label(StructureFormat f) {
  return f == StructureFormat::Smiles ? "SMILES" : "IUPAC name";
}

inline const std::string& structure_of(const Compound& c, StructureFormat f) {
  const auto& field = f == StructureFormat::Smiles ? c.smiles : c.iupac_name;
  if (!field || util::trim(*field).empty())
    throw Error(ErrorCode::MissingStructure,
                c.id + " has no " + std::string(to_string(f)) + " representation");
  return *field;
}

inline std::string render_examples(const std::vector<FewShotExample>& examples, StructureFormat f) {
  std::string out;
  int n = 1;
  for (const auto& ex : examples) {
    ToxicityPrediction shown;
    for (ToxicityType t : kAllToxicityTypes) shown[t].answer = shown[t].prediction = ex.labels[t];
    out += "Example " + std::to_string(n++) + "\n";
    out += "Input " + structure_label(f) + ": " + structure_of(ex.compound, f) + "\n";
    out += "Output:\n" + to_model_json(shown, OutputSchema::AnswerOnly).dump(2) + "\n\n";
  }
  return out;
}

inline std::string build_system_prompt(Strategy s, const TemplateStore& store) {
  return store.get(std::string(asset_stem(s)) + ".system.txt");
}

inline std::string build_user_prompt(const Compound& compound, const BioContext* ctx, Strategy s,
                                     StructureFormat f, const std::vector<FewShotExample>* examples,
                                     const TemplateStore& store) {
  check_combination(s, f);
  std::map<std::string, std::string> vars;
  vars["toxicity_types"] = render_toxicity_types();
  vars["output_schema"] = render_output_schema(output_schema(s));
  if (f != StructureFormat::None) {
    vars["structure_label"] = structure_label(f);
    vars["structure"] = structure_of(compound, f);
  }
  if (uses_context(s)) {
    if (!ctx) throw Error(ErrorCode::IllegalCombination, std::string(to_string(s)) + " needs a biological context");
    if (!ctx->filtered) throw Error(ErrorCode::UnfilteredContext, compound.id);
    vars["pathways"] = render_terms(ctx->pathways);
    vars["go_terms"] = render_terms(ctx->go_terms);
  }
  if (s == Strategy::FewShot) {
    if (!examples || examples->size() != 4)
      throw Error(ErrorCode::WrongExampleCount,
                  "expected 4 examples, got " + std::to_string(examples ? examples->size() : 0));
    vars["examples"] = render_examples(*examples, f);
  }
  return render(store.get(std::string(asset_stem(s)) + ".user.txt"), vars);
}

inline PromptBundle build_prompt(const Compound& compound, const BioContext* ctx, Strategy s,
                                 StructureFormat f, const std::vector<FewShotExample>* examples,
                                 const TemplateStore& store) {
  PromptBundle b;
  b.user_text = build_user_prompt(compound, ctx, s, f, examples, store);
  b.system_text = build_system_prompt(s, store);
  b.strategy = s;
  b.format = f;
  b.compound_id = compound.id;
  b.content_hash = content_hash(b.system_text, b.user_text);
  return b;
}

// Deterministic selection: rank the pool by a seeded hash of compound id,
// take the first k, then swap in candidates so the picks include at least
// one compound with a Toxic label and one with a Non-toxic label whenever the
// pool allows. With `format`, compounds lacking that structure are skipped.
inline std::vector<FewShotExample> select_fewshot_examples(
    std::vector<FewShotExample> pool, std::size_t k, std::uint64_t seed,
    std::optional<StructureFormat> format = std::nullopt) {
  if (format && *format != StructureFormat::None) {
    std::erase_if(pool, [&](const FewShotExample& e) {
      const auto& field = *format == StructureFormat::Smiles ? e.compound.smiles : e.compound.iupac_name;
      return !field || util::trim(*field).empty();
    });
  }
  if (pool.size() < k)
    throw Error(ErrorCode::PoolTooSmall, std::to_string(pool.size()) + " < " + std::to_string(k));
  const std::uint64_t basis = util::splitmix64(seed ^ 0x5eedf00dULL);
  std::sort(pool.begin(), pool.end(), [&](const FewShotExample& a, const FewShotExample& b) {
    const auto ha = util::fnv1a64(a.compound.id, basis), hb = util::fnv1a64(b.compound.id, basis);
    return ha != hb ? ha < hb : a.compound.id < b.compound.id;
  });

  auto has = [](const FewShotExample& e, BinaryVerdict v) { return e.labels.any(v); };
  auto ensure = [&](BinaryVerdict v, BinaryVerdict keep) {
    if (k == 0) return;
    for (std::size_t i = 0; i < k; ++i)
      if (has(pool[i], v)) return;
    for (std::size_t j = k; j < pool.size(); ++j) {
      if (!has(pool[j], v)) continue;
      // Replace the last pick whose removal keeps the other requirement.
      for (std::size_t i = k; i-- > 0;) {
        bool other_ok = false;
        for (std::size_t m = 0; m < k; ++m)
          if (m != i && has(pool[m], keep)) other_ok = true;
        if (has(pool[j], keep)) other_ok = true;
        if (other_ok || k == 1) {
          std::swap(pool[i], pool[j]);
          return;
        }
      }
      return;
    }
  };
  ensure(BinaryVerdict::Toxic, BinaryVerdict::NonToxic);
  ensure(BinaryVerdict::NonToxic, BinaryVerdict::Toxic);
  pool.resize(k);
  return pool;
}

}  // namespace cotox::prompt
