#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "cotox/error.hpp"
#include "cotox/util.hpp"

namespace cotox {

// Declaration order is the reporting order (Cardio ... Renal).
enum class ToxicityType { Cardio, Hemato, Infertility, Liver, Pulmonary, Renal };

inline constexpr std::array<ToxicityType, 6> kAllToxicityTypes = {
    ToxicityType::Cardio, ToxicityType::Hemato,    ToxicityType::Infertility,
    ToxicityType::Liver,  ToxicityType::Pulmonary, ToxicityType::Renal};

constexpr std::string_view display_name(ToxicityType t) {
  switch (t) {
    case ToxicityType::Cardio: return "Cardiotoxicity";
    case ToxicityType::Hemato: return "Hematological Toxicity";
    case ToxicityType::Infertility: return "Infertility";
    case ToxicityType::Liver: return "Liver Toxicity";
    case ToxicityType::Pulmonary: return "Pulmonary Toxicity";
    case ToxicityType::Renal: return "Renal Toxicity";
  }
  return "";
}

// Column-header form, also the key used in the exchange JSONL ("cardio").
constexpr std::string_view short_name(ToxicityType t) {
  switch (t) {
    case ToxicityType::Cardio: return "Cardio";
    case ToxicityType::Hemato: return "Hemato";
    case ToxicityType::Infertility: return "Infertility";
    case ToxicityType::Liver: return "Liver";
    case ToxicityType::Pulmonary: return "Pulmonary";
    case ToxicityType::Renal: return "Renal";
  }
  return "";
}

inline std::string exchange_key(ToxicityType t) { return util::to_lower(short_name(t)); }

constexpr std::size_t index_of(ToxicityType t) { return static_cast<std::size_t>(t); }

// Case and punctuation insensitive: "Liver Toxicity", "liver_toxicity",
// "LIVER" and "hemato" all resolve.
inline ToxicityType parse_toxicity_type(std::string_view s) {
  const std::string key = util::fold_key(s);
  for (ToxicityType t : kAllToxicityTypes) {
    if (key == util::fold_key(display_name(t)) || key == util::fold_key(short_name(t))) return t;
  }
  // A few spellings seen in model output.
  if (key == "cardiac" || key == "cardiactoxicity") return ToxicityType::Cardio;
  if (key == "hematologic" || key == "hematotoxicity" || key == "hematologicaltox" ||
      key == "hematological" || key == "haematological" || key == "haematologicaltoxicity")
    return ToxicityType::Hemato;
  if (key == "hepatotoxicity" || key == "hepatic") return ToxicityType::Liver;
  if (key == "nephrotoxicity" || key == "kidney" || key == "renaltox") return ToxicityType::Renal;
  if (key == "lung" || key == "pulmonarytox") return ToxicityType::Pulmonary;
  if (key == "cardiotox") return ToxicityType::Cardio;
  if (key == "infertilitytoxicity" || key == "reproductivetoxicity") return ToxicityType::Infertility;
  throw Error(ErrorCode::UnknownToxicityType, std::string(s));
}

enum class BinaryVerdict { Toxic, NonToxic };

constexpr std::string_view to_string(BinaryVerdict v) {
  return v == BinaryVerdict::Toxic ? "Toxic" : "Non-toxic";
}

// Accepts the model vocabulary (Toxic / Non-toxic and spacing variants) and the
// dataset vocabulary (Yes / No).
inline BinaryVerdict parse_binary_verdict(std::string_view s) {
  std::string key = util::to_lower(util::trim(s));
  if (key == "toxic" || key == "yes") return BinaryVerdict::Toxic;
  if (key == "non-toxic" || key == "nontoxic" || key == "non toxic" || key == "no" ||
      key == "non_toxic")
    return BinaryVerdict::NonToxic;
  throw Error(ErrorCode::UnknownVerdict, std::string(s));
}

struct Compound {
  std::string id;
  std::string name;
  std::optional<std::string> smiles;
  std::optional<std::string> iupac_name;

  bool operator==(const Compound&) const = default;
};

// Full label vector for one compound; the array is indexed by ToxicityType so
// totality holds by construction.
struct LabelRecord {
  std::string compound_id;
  std::array<BinaryVerdict, 6> labels{};

  BinaryVerdict operator[](ToxicityType t) const { return labels[index_of(t)]; }
  BinaryVerdict& operator[](ToxicityType t) { return labels[index_of(t)]; }

  bool any(BinaryVerdict v) const {
    for (auto l : labels)
      if (l == v) return true;
    return false;
  }

  bool operator==(const LabelRecord&) const = default;
};

}  // namespace cotox
