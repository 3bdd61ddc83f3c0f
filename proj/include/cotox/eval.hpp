#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "cotox/core_model.hpp"
#include "cotox/error.hpp"
#include "cotox/response_parser.hpp"
#include "cotox/util.hpp"

namespace cotox::eval {

// Positive class is Toxic.
struct ConfusionCounts {
  long tp = 0, fp = 0, fn = 0, tn = 0;

  long total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionCounts&) const = default;
};

using PerType = std::array<double, 6>;

inline std::unordered_map<std::string, const LabelRecord*> index_labels(const std::vector<LabelRecord>& labels) {
  std::unordered_map<std::string, const LabelRecord*> idx;
  for (const auto& l : labels) idx.emplace(l.compound_id, &l);
  return idx;
}

// Ids of scored predictions that have no label, sorted.
inline std::vector<std::string> unlabeled_ids(const std::vector<NormalizedPrediction>& preds,
                                              const std::vector<LabelRecord>& labels) {
  auto idx = index_labels(labels);
  std::vector<std::string> out;
  for (const auto& p : preds)
    if (!idx.count(p.compound_id)) out.push_back(p.compound_id);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Parse failures are skipped; they never count as either class.
inline ConfusionCounts confusion(const std::vector<NormalizedPrediction>& preds,
                                 const std::vector<LabelRecord>& labels, ToxicityType t) {
  auto idx = index_labels(labels);
  ConfusionCounts c;
  for (const auto& p : preds) {
    auto it = idx.find(p.compound_id);
    if (it == idx.end()) throw Error(ErrorCode::UnlabeledCompound, p.compound_id);
    if (!p.answers) continue;
    const bool pred_pos = p[t] == BinaryVerdict::Toxic;
    const bool true_pos = (*it->second)[t] == BinaryVerdict::Toxic;
    if (pred_pos && true_pos) ++c.tp;
    else if (pred_pos) ++c.fp;
    else if (true_pos) ++c.fn;
    else ++c.tn;
  }
  return c;
}

// 2tp / (2tp + fp + fn); 0 when there is nothing to score.
inline double f1(const ConfusionCounts& c) {
  const long denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return 0.0;
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

inline double macro_average(const PerType& per_type) {
  double sum = 0.0;
  for (double v : per_type) sum += v;
  return sum / 6.0;
}

inline double macro_average(const std::map<ToxicityType, double>& per_type) {
  PerType arr{};
  for (ToxicityType t : kAllToxicityTypes) {
    auto it = per_type.find(t);
    if (it == per_type.end()) throw Error(ErrorCode::IncompleteMap, std::string(display_name(t)));
    arr[index_of(t)] = it->second;
  }
  return macro_average(arr);
}

// 100 (iupac - smiles) / smiles, rounded to two decimals.
inline double gap_percent(double avg_iupac, double avg_smiles) {
  if (avg_smiles <= 0.0) throw Error(ErrorCode::DivisionByZero, "SMILES average must be > 0");
  return util::round_half_up(100.0 * (avg_iupac - avg_smiles) / avg_smiles, 2);
}

// Seeded hash of each id, sorted, dealt round-robin into k folds. Result
// holds one sorted id list per fold.
inline std::vector<std::vector<std::string>> assign_folds(std::vector<std::string> ids, int k,
                                                          std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::PreconditionViolation, "k must be >= 2");
  if (ids.size() < static_cast<std::size_t>(k))
    throw Error(ErrorCode::TooFewCompounds,
                std::to_string(ids.size()) + " compounds for " + std::to_string(k) + " folds");
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  const std::uint64_t basis = util::splitmix64(seed);
  std::stable_sort(ids.begin(), ids.end(), [&](const std::string& a, const std::string& b) {
    return util::fnv1a64(a, basis) < util::fnv1a64(b, basis);
  });
  std::vector<std::vector<std::string>> folds(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < ids.size(); ++i) folds[i % folds.size()].push_back(ids[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

struct KFoldResult {
  PerType mean{};
  std::vector<PerType> per_fold;
  std::vector<std::vector<std::string>> folds;
};

// Folds partition the successfully parsed predictions.
inline KFoldResult kfold_f1(const std::vector<NormalizedPrediction>& preds,
                            const std::vector<LabelRecord>& labels, int k, std::uint64_t seed) {
  if (auto missing = unlabeled_ids(preds, labels); !missing.empty())
    throw Error(ErrorCode::UnlabeledCompound, missing.front());
  std::vector<std::string> ids;
  std::unordered_map<std::string, const NormalizedPrediction*> by_id;
  for (const auto& p : preds) {
    if (!p.answers) continue;
    ids.push_back(p.compound_id);
    by_id[p.compound_id] = &p;
  }
  KFoldResult out;
  out.folds = assign_folds(ids, k, seed);
  for (const auto& fold : out.folds) {
    std::vector<NormalizedPrediction> subset;
    subset.reserve(fold.size());
    for (const auto& id : fold) subset.push_back(*by_id.at(id));
    PerType scores{};
    for (ToxicityType t : kAllToxicityTypes) scores[index_of(t)] = f1(confusion(subset, labels, t));
    out.per_fold.push_back(scores);
  }
  for (ToxicityType t : kAllToxicityTypes) {
    double s = 0.0;
    for (const auto& f : out.per_fold) s += f[index_of(t)];
    out.mean[index_of(t)] = s / static_cast<double>(out.per_fold.size());
  }
  return out;
}

struct EvalReport {
  PerType per_type_f1{};
  double macro_f1 = 0.0;
  std::size_t n_compounds = 0;
  std::size_t n_parse_failures = 0;
  std::optional<std::vector<PerType>> per_fold_f1;
};

struct EvalOptions {
  int folds = 5;  // 1: pooled F1 over the whole test set
  std::uint64_t seed = 0;
};

inline EvalReport evaluate(const std::vector<NormalizedPrediction>& preds,
                           const std::vector<LabelRecord>& labels, const EvalOptions& opts) {
  if (auto missing = unlabeled_ids(preds, labels); !missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw Error(ErrorCode::UnlabeledCompound, std::to_string(missing.size()) + " unlabeled: " + list);
  }
  EvalReport r;
  r.n_compounds = preds.size();
  for (const auto& p : preds)
    if (!p.answers) ++r.n_parse_failures;
  if (opts.folds <= 1) {
    for (ToxicityType t : kAllToxicityTypes) r.per_type_f1[index_of(t)] = f1(confusion(preds, labels, t));
  } else {
    auto kf = kfold_f1(preds, labels, opts.folds, opts.seed);
    r.per_type_f1 = kf.mean;
    r.per_fold_f1 = std::move(kf.per_fold);
  }
  r.macro_f1 = macro_average(r.per_type_f1);
  return r;
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (ToxicityType t : kAllToxicityTypes) per[exchange_key(t)] = r.per_type_f1[index_of(t)];
  j["per_type_f1"] = per;
  j["macro_f1"] = r.macro_f1;
  j["n_compounds"] = r.n_compounds;
  j["n_parse_failures"] = r.n_parse_failures;
  if (r.per_fold_f1) {
    nlohmann::ordered_json folds = nlohmann::ordered_json::array();
    for (const auto& f : *r.per_fold_f1) {
      nlohmann::ordered_json fj = nlohmann::ordered_json::object();
      for (ToxicityType t : kAllToxicityTypes) fj[exchange_key(t)] = f[index_of(t)];
      folds.push_back(fj);
    }
    j["per_fold_f1"] = folds;
  }
  return j;
}

}  // namespace cotox::eval
