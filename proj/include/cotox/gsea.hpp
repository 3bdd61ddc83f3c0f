#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cotox/error.hpp"
#include "cotox/ingest.hpp"
#include "cotox/util.hpp"

namespace cotox::gsea {

struct Params {
  double weight_exponent = 1.0;
  int permutations = 1000;
  std::uint64_t seed = 0;
  std::size_t min_set_size = 3;
  std::size_t max_set_size = 500;
  unsigned threads = 1;

  void validate() const {
    if (weight_exponent < 0.0) throw Error(ErrorCode::ConfigError, "weight_exponent must be >= 0");
    if (permutations < 1) throw Error(ErrorCode::ConfigError, "permutations must be >= 1");
    if (min_set_size > max_set_size) throw Error(ErrorCode::ConfigError, "min_set_size > max_set_size");
  }
};

struct Thresholds {
  double q_max = 0.25;
  double p_max = 0.01;
};

struct EnrichmentResult {
  std::string set_name;
  double es = 0.0;
  double p_value = 1.0;
  double q_value = 1.0;
  std::size_t hit_count = 0;
  int direction = 1;  // sign of es; es == 0 counts as positive
  bool kept = false;
  std::vector<std::string> warnings;
};

struct EnrichmentScore {
  double es = 0.0;
  std::vector<double> running_sum;
};

// Hit mask over positions of `ranked`.
inline std::vector<char> hit_mask(const RankedList& ranked, const GeneSet& set) {
  std::unordered_map<std::string_view, bool> members;
  members.reserve(set.genes.size());
  for (const auto& g : set.genes) members.emplace(g, true);
  std::vector<char> mask(ranked.size(), 0);
  for (std::size_t i = 0; i < ranked.size(); ++i)
    if (members.count(ranked.entries[i].gene)) mask[i] = 1;
  return mask;
}

// Weighted Kolmogorov-Smirnov running sum over a hit mask. Hits step up by
// |score|^p / N_R, misses step down by 1 / (N - N_H). The ES is the signed
// extreme; an exact magnitude tie between +x and -x resolves to +x.
inline constexpr double kTieTolerance = 1e-12;

inline EnrichmentScore enrichment_score_mask(const RankedList& ranked, const std::vector<char>& mask,
                                             double weight_exponent, bool keep_running_sum = true) {
  const std::size_t n = ranked.size();
  std::size_t n_hits = 0;
  double norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    ++n_hits;
    norm += weight_exponent == 0.0 ? 1.0 : std::pow(std::fabs(ranked.entries[i].score), weight_exponent);
  }
  if (n_hits == 0) throw Error(ErrorCode::NoOverlap, "gene set shares no genes with the ranked list");
  if (n_hits == n) throw Error(ErrorCode::FullOverlap, "gene set covers the whole ranked list");
  if (norm == 0.0) throw Error(ErrorCode::ZeroNormalizer, "all hit scores are zero");

  const double miss_step = 1.0 / static_cast<double>(n - n_hits);
  EnrichmentScore out;
  if (keep_running_sum) out.running_sum.reserve(n);
  double sum = 0.0, max_pos = 0.0, max_neg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i]) {
      const double w = weight_exponent == 0.0 ? 1.0 : std::pow(std::fabs(ranked.entries[i].score), weight_exponent);
      sum += w / norm;
    } else {
      sum -= miss_step;
    }
    if (keep_running_sum) out.running_sum.push_back(sum);
    max_pos = std::max(max_pos, sum);
    max_neg = std::min(max_neg, sum);
  }
  // Equal-magnitude extremes resolve positive; the tolerance absorbs
  // rounding in the accumulated sum.
  out.es = max_pos >= -max_neg - kTieTolerance ? max_pos : max_neg;
  return out;
}

inline EnrichmentScore enrichment_score(const RankedList& ranked, const GeneSet& set,
                                        double weight_exponent) {
  return enrichment_score_mask(ranked, hit_mask(ranked, set), weight_exponent);
}

// Per-set generator seed: independent of evaluation order, so parallel and
// serial runs draw identical permutations.
inline std::uint64_t set_seed(std::uint64_t seed, std::string_view set_name) {
  return util::splitmix64(seed ^ util::fnv1a64(set_name));
}

// Draws `count` random gene sets of size k from positions [0, n) as hit
// masks (partial Fisher-Yates per draw).
class PermutationSampler {
 public:
  PermutationSampler(std::size_t n, std::size_t k, std::uint64_t seed)
      : n_(n), k_(k), rng_(seed), order_(n) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
  }

  std::vector<char> next() {
    for (std::size_t i = 0; i < k_; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng_.below(n_ - i));
      std::swap(order_[i], order_[j]);
    }
    std::vector<char> mask(n_, 0);
    for (std::size_t i = 0; i < k_; ++i) mask[order_[i]] = 1;
    return mask;
  }

 private:
  std::size_t n_, k_;
  util::StableRng rng_;
  std::vector<std::size_t> order_;
};

struct PValue {
  double p = 1.0;
  int same_sign = 0;
  int as_extreme = 0;
  int skipped = 0;  // permutations whose hits all had zero weight
  std::vector<std::string> warnings;
};

// Plus-one gene-set permutation estimate:
//   p = (1 + #{same sign, |es_perm| >= |es_obs|}) / (1 + #{same sign}).
inline PValue permutation_pvalue_detail(const RankedList& ranked, const GeneSet& set, const Params& params) {
  const auto mask = hit_mask(ranked, set);
  const double observed = enrichment_score_mask(ranked, mask, params.weight_exponent, false).es;
  const std::size_t k = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
  const bool positive = observed >= 0.0;

  PValue out;
  PermutationSampler sampler(ranked.size(), k, set_seed(params.seed, set.name));
  for (int m = 0; m < params.permutations; ++m) {
    double es;
    try {
      es = enrichment_score_mask(ranked, sampler.next(), params.weight_exponent, false).es;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroNormalizer) throw;
      ++out.skipped;
      continue;
    }
    if ((es >= 0.0) != positive) continue;
    ++out.same_sign;
    if (std::fabs(es) >= std::fabs(observed)) ++out.as_extreme;
  }
  if (out.same_sign == 0) {
    out.p = 1.0;
    out.warnings.push_back("no permutation had the observed sign; p set to 1");
  } else {
    out.p = (1.0 + out.as_extreme) / (1.0 + out.same_sign);
  }
  return out;
}

inline double permutation_pvalue(const RankedList& ranked, const GeneSet& set, const Params& params) {
  return permutation_pvalue_detail(ranked, set, params).p;
}

// Benjamini-Hochberg step-up, results in input order.
inline std::vector<double> bh_fdr(const std::vector<double>& p_values) {
  const std::size_t n = p_values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  std::vector<double> q(n);
  double running = 1.0;
  for (std::size_t r = n; r-- > 0;) {
    const std::size_t i = order[r];
    running = std::min(running, p_values[i] * static_cast<double>(n) / static_cast<double>(r + 1));
    q[i] = std::min(1.0, running);
  }
  return q;
}

// Maps gene-set name prefixes (e.g. "GOBP_") onto term kinds. Unmatched
// names use `fallback`.
struct KindMap {
  std::vector<std::pair<std::string, TermKind>> prefixes = {
      {"GOBP_", TermKind::GoBiologicalProcess},
      {"GOMF_", TermKind::GoMolecularFunction},
      {"GOCC_", TermKind::GoCellularComponent},
      {"REACTOME_", TermKind::Pathway},
      {"KEGG_", TermKind::Pathway},
      {"WP_", TermKind::Pathway},
      {"HALLMARK_", TermKind::Pathway},
  };
  TermKind fallback = TermKind::Pathway;

  std::pair<TermKind, std::string_view> classify(std::string_view name) const {
    for (const auto& [prefix, kind] : prefixes)
      if (name.substr(0, prefix.size()) == prefix) return {kind, name.substr(prefix.size())};
    return {fallback, name};
  }
};

// "REACTOME_INTRINSIC_PATHWAY_FOR_APOPTOSIS" -> "intrinsic pathway for apoptosis".
inline std::string readable_term_name(std::string_view stripped) {
  std::string out = util::to_lower(stripped);
  std::replace(out.begin(), out.end(), '_', ' ');
  return out;
}

struct ContextResult {
  BioContext context;
  std::vector<EnrichmentResult> results;  // admissible sets, input order
};

// ES, p and per-sign BH q for every admissible set; sets with p < p_max and
// q < q_max become terms. The context is left unfiltered.
inline ContextResult enrich_to_context(const RankedList& ranked, const std::vector<GeneSet>& sets,
                                       const Params& params, const Thresholds& thresholds,
                                       const KindMap& kind_map, std::string_view compound_id = "") {
  params.validate();
  std::vector<const GeneSet*> admissible;
  for (const auto& s : sets) {
    const auto mask = hit_mask(ranked, s);
    const auto hits = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
    if (hits >= std::max<std::size_t>(params.min_set_size, 1) && hits <= params.max_set_size &&
        hits < ranked.size())
      admissible.push_back(&s);
  }
  if (admissible.empty())
    throw Error(ErrorCode::NoAdmissibleSets, "no gene set within size bounds [" +
                                                 std::to_string(params.min_set_size) + ", " +
                                                 std::to_string(params.max_set_size) + "]");

  std::vector<EnrichmentResult> results(admissible.size());
  auto work = [&](std::size_t i) {
    const GeneSet& s = *admissible[i];
    EnrichmentResult& r = results[i];
    r.set_name = s.name;
    const auto mask = hit_mask(ranked, s);
    r.hit_count = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
    try {
      r.es = enrichment_score_mask(ranked, mask, params.weight_exponent, false).es;
      auto pv = permutation_pvalue_detail(ranked, s, params);
      r.p_value = pv.p;
      r.warnings = std::move(pv.warnings);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroNormalizer) throw;
      r.es = 0.0;
      r.p_value = 1.0;
      r.warnings.push_back("zero-weight hits; scored as p = 1");
    }
    r.direction = r.es >= 0.0 ? 1 : -1;
  };
  const unsigned threads = std::max(1u, params.threads);
  if (threads == 1) {
    for (std::size_t i = 0; i < results.size(); ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < results.size(); i += threads) work(i);
      });
    for (auto& th : pool) th.join();
  }

  for (int sign : {1, -1}) {
    std::vector<std::size_t> idx;
    std::vector<double> ps;
    for (std::size_t i = 0; i < results.size(); ++i)
      if (results[i].direction == sign) {
        idx.push_back(i);
        ps.push_back(results[i].p_value);
      }
    const auto qs = bh_fdr(ps);
    for (std::size_t j = 0; j < idx.size(); ++j) results[idx[j]].q_value = qs[j];
  }

  ContextResult out;
  out.context.compound_id = std::string(compound_id);
  for (auto& r : results) {
    r.kept = r.p_value < thresholds.p_max && r.q_value < thresholds.q_max;
    if (!r.kept) continue;
    auto [kind, stripped] = kind_map.classify(r.set_name);
    append_term(out.context, Term{r.set_name, readable_term_name(stripped), kind, "GSEA"});
  }
  out.results = std::move(results);
  return out;
}

inline std::string report_tsv(const std::vector<EnrichmentResult>& results) {
  std::string out = "set_name\tes\tp\tq\thits\tkept\n";
  for (const auto& r : results) {
    out += r.set_name + "\t" + util::format_fixed(r.es, 6) + "\t" + util::format_fixed(r.p_value, 6) + "\t" +
           util::format_fixed(r.q_value, 6) + "\t" + std::to_string(r.hit_count) + "\t" +
           (r.kept ? "true" : "false") + "\n";
  }
  return out;
}

}  // namespace cotox::gsea
