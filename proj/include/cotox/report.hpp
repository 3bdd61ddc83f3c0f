#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cotox/core_model.hpp"
#include "cotox/eval.hpp"
#include "cotox/response_parser.hpp"
#include "cotox/util.hpp"

namespace cotox::report {

namespace detail {
inline std::string or_missing(const std::string& s) {
  return util::trim(s).empty() ? "(not provided)" : s;
}
}  // namespace detail

// Per-compound transcript in the Reasoning / Prediction / Answer layout.
inline std::string render_case_study(const ToxicityPrediction& pred) {
  std::string md = "# " + pred.compound_id + "\n\n";
  std::vector<std::string> mismatches, other;
  for (const auto& w : pred.warnings)
    (w.find("prediction/answer mismatch") != std::string::npos ? mismatches : other).push_back(w);
  for (const auto& w : mismatches)
    md += "> **Warning:** " + w + " (Answer is used for evaluation)\n";
  if (!mismatches.empty()) md += "\n";
  for (ToxicityType t : kAllToxicityTypes) {
    const OrganVerdict& ov = pred[t];
    md += "## " + std::string(display_name(t)) + "\n\n";
    md += "**Reasoning**\n\n";
    md += "- **Pathway:** " + detail::or_missing(ov.reasoning.pathway) + "\n";
    md += "- **GO Term:** " + detail::or_missing(ov.reasoning.go_term) + "\n";
    md += "- **IUPAC Support:** " + detail::or_missing(ov.reasoning.iupac_support) + "\n";
    md += "- **Overall Mechanism:** " + detail::or_missing(ov.reasoning.overall_mechanism) + "\n\n";
    md += "**Prediction:** " + std::string(to_string(ov.prediction)) + "  \n";
    md += "**Answer:** " + std::string(to_string(ov.answer)) + "\n\n";
  }
  if (!other.empty()) {
    md += "## Parser notes\n\n";
    for (const auto& w : other) md += "- " + w + "\n";
    md += "\n";
  }
  return md;
}

inline std::string render_failure(const std::string& compound_id, const ParseFailure& f,
                                  const std::string& raw_text) {
  std::string md = "# " + compound_id + "\n\n";
  md += "> **Parse failure** at stage " + std::string(to_string(f.stage)) + ": " + f.detail + "\n\n";
  md += "## Raw model output\n\n```\n" + raw_text + "\n```\n";
  return md;
}

using MethodReports = std::vector<std::pair<std::string, eval::EvalReport>>;

// Methods x (six types + Average), three decimals, column maxima in bold
// (every tied maximum is bolded).
inline std::string render_comparison(const MethodReports& reports) {
  std::vector<std::array<double, 7>> rows;
  for (const auto& [name, r] : reports) {
    std::array<double, 7> row{};
    for (ToxicityType t : kAllToxicityTypes) row[index_of(t)] = util::round_half_up(r.per_type_f1[index_of(t)], 3);
    row[6] = util::round_half_up(r.macro_f1, 3);
    rows.push_back(row);
  }
  std::array<double, 7> best{};
  best.fill(-1.0);
  for (const auto& row : rows)
    for (std::size_t c = 0; c < 7; ++c) best[c] = std::max(best[c], row[c]);

  std::string md = "| Method |";
  for (ToxicityType t : kAllToxicityTypes) md += " " + std::string(short_name(t)) + " |";
  md += " Average |\n|---|";
  for (int c = 0; c < 7; ++c) md += "---:|";
  md += "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    md += "| " + reports[i].first + " |";
    for (std::size_t c = 0; c < 7; ++c) {
      const std::string cell = util::format_fixed(rows[i][c], 3);
      md += rows[i][c] == best[c] ? " **" + cell + "** |" : " " + cell + " |";
    }
    md += "\n";
  }
  return md;
}

// Full evaluation report: comparison table plus per-method counts.
inline std::string render_report(const MethodReports& reports, int folds) {
  std::string md = "# Toxicity prediction F1\n\n";
  md += folds > 1 ? "F1 per toxicity type, mean over " + std::to_string(folds) + " folds; Average is the macro mean.\n\n"
                  : "F1 per toxicity type over the pooled test set; Average is the macro mean.\n\n";
  md += render_comparison(reports);
  md += "\n## Counts\n\n| Method | Compounds | Parse failures |\n|---|---:|---:|\n";
  for (const auto& [name, r] : reports)
    md += "| " + name + " | " + std::to_string(r.n_compounds) + " | " + std::to_string(r.n_parse_failures) + " |\n";
  return md;
}

struct RunManifest {
  std::string run_id;
  std::string started_at;
  std::string finished_at;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::map<std::string, std::string> template_digests;
  std::string model_id;
  std::map<std::string, std::string> fingerprints;  // compound_id -> request fingerprint
  std::map<std::string, std::string> skipped;       // compound_id -> reason
  int requests = 0;
  int cache_hits = 0;
  int parse_failures = 0;
};

inline nlohmann::ordered_json to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["run_id"] = m.run_id;
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  j["model_id"] = m.model_id;
  j["config"] = m.config;
  j["template_digests"] = m.template_digests;
  j["fingerprints"] = m.fingerprints;
  j["skipped"] = m.skipped;
  j["counts"] = {{"requests", m.requests}, {"cache_hits", m.cache_hits}, {"parse_failures", m.parse_failures}};
  return j;
}

}  // namespace cotox::report
