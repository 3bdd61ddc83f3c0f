// Acceptance checks. Each criterion prints one line:
//   PASS <name>: <detail>   or   FAIL <name>: <detail>
// and the process exits non-zero on FAIL.
//
//   acceptance --criterion gsea_oracle
//   acceptance            (runs all of them)

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "cotox/eval.hpp"
#include "cotox/gsea.hpp"
#include "cotox/pipeline.hpp"
#include "cotox/response_parser.hpp"

using namespace cotox;
namespace fs = std::filesystem;

namespace {

const fs::path kData = COTOX_TEST_DATA;

struct Verdict {
  bool pass = true;
  std::string detail;
};

// ---------------------------------------------------------------- tables

struct TableRow {
  const char* name;
  std::array<double, 6> cells;
  double average;
};

// Comparison of prompting strategies (GPT-4o) and classical baselines.
const TableRow kStrategyTable[] = {
    {"XGB", {0.673, 0.779, 0.479, 0.648, 0.452, 0.427}, 0.576},
    {"Chemprop", {0.663, 0.775, 0.542, 0.721, 0.447, 0.566}, 0.619},
    {"SMILES-Zeroshot", {0.486, 0.186, 0.324, 0.769, 0.030, 0.429}, 0.370},
    {"SMILES-Fewshot", {0.498, 0.397, 0.274, 0.769, 0.151, 0.515}, 0.434},
    {"SMILES-CoT", {0.523, 0.492, 0.234, 0.729, 0.053, 0.426}, 0.409},
    {"IUPAC-Zeroshot", {0.495, 0.226, 0.371, 0.687, 0.025, 0.406}, 0.368},
    {"IUPAC-Fewshot", {0.454, 0.386, 0.242, 0.697, 0.117, 0.519}, 0.402},
    {"IUPAC-CoT", {0.476, 0.521, 0.301, 0.693, 0.070, 0.442}, 0.417},
    {"BioProcess-CoT", {0.684, 0.792, 0.496, 0.764, 0.531, 0.475}, 0.624},
    {"CoTox (SMILES)", {0.723, 0.809, 0.530, 0.774, 0.554, 0.564}, 0.659},
    {"CoTox", {0.711, 0.817, 0.582, 0.768, 0.541, 0.557}, 0.663},
};

struct ModelRow {
  TableRow row;
  double average_smiles;
  double gap;
};

// CoTox across language models (IUPAC cells).
const ModelRow kModelTable[] = {
    {{"GPT-4o", {0.711, 0.817, 0.582, 0.768, 0.541, 0.557}, 0.663}, 0.659, 0.61},
    {{"Llama3.1-8B", {0.738, 0.823, 0.595, 0.774, 0.586, 0.591}, 0.685}, 0.666, 2.78},
    {{"Llama3.1-70B", {0.735, 0.835, 0.292, 0.769, 0.391, 0.527}, 0.591}, 0.615, -3.85},
    {{"TxGemma-9B-Chat", {0.444, 0.485, 0.383, 0.512, 0.318, 0.382}, 0.421}, 0.387, 8.66},
    {{"o3", {0.721, 0.749, 0.578, 0.778, 0.518, 0.554}, 0.650}, 0.562, 15.60},
    {{"DeepSeek-R1", {0.558, 0.639, 0.269, 0.739, 0.405, 0.446}, 0.509}, 0.462, 10.24},
    {{"Qwen3-32B", {0.634, 0.778, 0.214, 0.768, 0.449, 0.512}, 0.559}, 0.486, 15.02},
    {{"Gemini-2.5-Pro", {0.746, 0.831, 0.630, 0.794, 0.591, 0.606}, 0.700}, 0.698, 0.21},
};

// |mean - avg| <= 0.0005, compared in integer thousandths so rows sitting
// exactly on the boundary are not decided by binary rounding.
bool average_matches(const TableRow& r, double* mean) {
  *mean = eval::macro_average(r.cells);
  const long long six_mean = std::llround(*mean * 6000.0);
  const long long six_avg = 6 * std::llround(r.average * 1000.0);
  return std::llabs(six_mean - six_avg) <= 3;
}

Verdict table_arithmetic() {
  Verdict v;
  int rows = 0, ok = 0;
  std::string failures;
  auto check = [&](const TableRow& r) {
    ++rows;
    double mean = 0;
    if (average_matches(r, &mean)) {
      ++ok;
      return;
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s%s mean %.5f vs published %.3f", failures.empty() ? "" : "; ", r.name, mean,
                  r.average);
    failures += buf;
  };
  for (const auto& r : kStrategyTable) check(r);
  for (const auto& m : kModelTable) check(m.row);
  v.pass = ok == rows;
  v.detail = std::to_string(ok) + "/" + std::to_string(rows) + " rows within 0.0005";
  if (!failures.empty()) v.detail += " (" + failures + ")";
  return v;
}

Verdict gap_reproduction() {
  Verdict v;
  int ok = 0;
  double worst = 0;
  std::string worst_name;
  for (const auto& m : kModelTable) {
    const double g = eval::gap_percent(m.row.average, m.average_smiles);
    const double d = std::fabs(g - m.gap);
    if (d <= 0.2 + 1e-9) ++ok;
    if (d > worst) {
      worst = d;
      worst_name = m.row.name;
    }
  }
  v.pass = ok == 8;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d/8 models within 0.2 points (largest deviation %.2f, %s)", ok, worst,
                worst_name.c_str());
  v.detail = buf;
  return v;
}

// ---------------------------------------------------------------- GSEA

double brute_force_es(const RankedList& r, const std::vector<char>& mask, double p, double* last) {
  const std::size_t n = r.size();
  double nr = 0;
  std::size_t nh = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (mask[i]) {
      nr += std::pow(std::fabs(r.entries[i].score), p);
      ++nh;
    }
  double best = 0;
  for (std::size_t j = 0; j < n; ++j) {
    double hit = 0, miss = 0;
    for (std::size_t i = 0; i <= j; ++i) {
      if (mask[i]) hit += std::pow(std::fabs(r.entries[i].score), p) / nr;
      else miss += 1.0;
    }
    const double d = hit - miss / static_cast<double>(n - nh);
    if (std::fabs(d) > std::fabs(best) + 1e-12 || (std::fabs(std::fabs(d) - std::fabs(best)) <= 1e-12 && d > best))
      best = d;
    if (j + 1 == n) *last = d;
  }
  return best;
}

RankedList sorted_list(std::vector<double> scores) {
  std::sort(scores.begin(), scores.end(), std::greater<>());
  RankedList r;
  for (std::size_t i = 0; i < scores.size(); ++i) r.entries.push_back({"G" + std::to_string(i), scores[i]});
  return r;
}

Verdict gsea_oracle() {
  Verdict v;
  util::StableRng rng(2024);
  long exhaustive = 0;
  double worst = 0, worst_end = 0;
  for (std::size_t n = 2; n <= 8; ++n) {
    std::vector<std::vector<double>> shapes;
    std::vector<double> linear, mixed, ties, random;
    for (std::size_t i = 0; i < n; ++i) {
      linear.push_back(static_cast<double>(n - i));
      mixed.push_back(static_cast<double>(n) / 2.0 - static_cast<double>(i) - 0.25);
      ties.push_back(static_cast<double>((n - i) / 2) + 0.5);
      random.push_back(4.0 * (static_cast<double>(rng.next() >> 11) * 0x1.0p-53) - 2.0);
    }
    shapes = {linear, mixed, ties, random};
    for (const auto& s : shapes) {
      const auto r = sorted_list(s);
      for (unsigned bits = 1; bits < (1u << n); ++bits) {
        const int k = __builtin_popcount(bits);
        if (k > 3 || static_cast<std::size_t>(k) >= n) continue;
        std::vector<char> mask(n, 0);
        for (std::size_t i = 0; i < n; ++i) mask[i] = (bits >> i) & 1;
        for (double p : {0.0, 1.0, 2.0}) {
          gsea::EnrichmentScore got;
          try {
            got = gsea::enrichment_score_mask(r, mask, p);
          } catch (const Error& e) {
            if (e.code() == ErrorCode::ZeroNormalizer) continue;
            throw;
          }
          double last = 0;
          const double ref = brute_force_es(r, mask, p, &last);
          worst = std::max(worst, std::fabs(got.es - ref));
          worst_end = std::max(worst_end, std::fabs(got.running_sum.back()));
          ++exhaustive;
        }
      }
    }
  }
  long random_cases = 0, bound_violations = 0;
  for (int t = 0; t < 10000; ++t) {
    const std::size_t n = 2 + rng.below(199);
    std::vector<double> s(n);
    for (auto& x : s) x = 6.0 * (static_cast<double>(rng.next() >> 11) * 0x1.0p-53) - 3.0;
    const auto r = sorted_list(s);
    std::vector<char> mask(n, 0);
    const std::size_t k = 1 + rng.below(n - 1);
    gsea::PermutationSampler sampler(n, k, rng.next());
    mask = sampler.next();
    const double p = static_cast<double>(rng.below(3));
    try {
      const auto es = gsea::enrichment_score_mask(r, mask, p);
      if (std::fabs(es.es) > 1.0 + 1e-12) ++bound_violations;
      worst_end = std::max(worst_end, std::fabs(es.running_sum.back()));
      ++random_cases;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroNormalizer) throw;
    }
  }
  v.pass = worst <= 1e-12 && worst_end <= 1e-9 && bound_violations == 0 && random_cases >= 9900;
  std::ostringstream os;
  os << exhaustive << " exhaustive cases, max |ES - brute force| = " << worst << "; " << random_cases
     << " random cases, " << bound_violations << " with |ES| > 1; max |running sum end| = " << worst_end;
  v.detail = os.str();
  return v;
}

Verdict gsea_planted() {
  Verdict v;
  RankedList r;
  for (int i = 0; i < 50; ++i) r.entries.push_back({"G" + std::to_string(i), 2.5 - 0.1 * i});
  std::vector<GeneSet> sets;
  sets.push_back({"PLANTED_TOP5", "", {"G0", "G1", "G2", "G3", "G4"}});
  util::StableRng rng(99);
  for (int d = 0; d < 100; ++d) {
    GeneSet s{"DECOY_" + std::to_string(d), "", {}};
    gsea::PermutationSampler pick(50, 5, rng.next());
    const auto mask = pick.next();
    for (int i = 0; i < 50; ++i)
      if (mask[i]) s.genes.push_back("G" + std::to_string(i));
    sets.push_back(std::move(s));
  }
  gsea::Params params;
  params.permutations = 1000;
  params.seed = 7;
  params.min_set_size = 5;
  params.threads = 4;
  const gsea::Thresholds th{0.25, 0.01};
  const auto out = gsea::enrich_to_context(r, sets, params, th, gsea::KindMap{}, "planted");
  const auto& planted = out.results.at(0);
  int decoys = 0;
  for (std::size_t i = 1; i < out.results.size(); ++i)
    if (out.results[i].p_value < 0.01) ++decoys;
  v.pass = planted.kept && planted.p_value < 0.01 && planted.q_value < 0.25 && decoys <= 5;
  char buf[200];
  std::snprintf(buf, sizeof buf, "planted ES %.3f p %.4f q %.4f; %d/100 decoys at p < 0.01", planted.es,
                planted.p_value, planted.q_value, decoys);
  v.detail = buf;
  return v;
}

// ---------------------------------------------------------------- parser

struct ParserCase {
  std::string name;
  std::string text;
  OutputSchema schema = OutputSchema::Reasoned;
  std::optional<std::array<BinaryVerdict, 6>> answers;
  std::optional<ParseFailure> failure;
  std::string warning;  // must appear when non-empty
};

std::array<BinaryVerdict, 6> verdicts_from_bits(unsigned bits) {
  std::array<BinaryVerdict, 6> a{};
  for (int i = 0; i < 6; ++i) a[i] = (bits >> i) & 1 ? BinaryVerdict::Toxic : BinaryVerdict::NonToxic;
  return a;
}

nlohmann::ordered_json reply_json(const std::array<BinaryVerdict, 6>& a) {
  ToxicityPrediction p;
  for (auto t : kAllToxicityTypes) {
    auto& ov = p[t];
    ov.answer = ov.prediction = a[index_of(t)];
    ov.reasoning = {"pathway", "go", "structure", "mechanism"};
  }
  return to_model_json(p);
}

std::vector<ParserCase> parser_corpus() {
  std::vector<ParserCase> cases;
  auto ok = [&](std::string name, std::string text, unsigned bits, std::string warning = "",
                OutputSchema schema = OutputSchema::Reasoned) {
    cases.push_back({std::move(name), std::move(text), schema, verdicts_from_bits(bits), std::nullopt,
                     std::move(warning)});
  };
  auto bad = [&](std::string name, std::string text, ParseStage stage, std::string detail) {
    cases.push_back({std::move(name), std::move(text), OutputSchema::Reasoned, std::nullopt,
                     ParseFailure{stage, std::move(detail)}, ""});
  };
  const unsigned patterns[] = {0u, 63u, 1u, 2u, 4u, 8u, 16u, 32u, 21u, 42u};
  for (unsigned b : patterns) ok("clean-" + std::to_string(b), reply_json(verdicts_from_bits(b)).dump(2), b);
  for (int i = 0; i < 5; ++i) {
    const unsigned b = patterns[i + 3];
    const std::string lang = i % 2 ? "json" : "";
    ok("fenced-" + std::to_string(i), "Result:\n```" + lang + "\n" + reply_json(verdicts_from_bits(b)).dump(i) + "\n```",
       b, std::string(kWarnFence));
  }
  const char* preambles[] = {"Sure! Here is the assessment.\n", "Based on the pathways {see above}: ",
                             "Analysis complete.\n\n", "Answer follows -> ", "Note: values are {\"approximate\"}\n"};
  for (int i = 0; i < 5; ++i)
    ok("prose-prefix-" + std::to_string(i), preambles[i] + reply_json(verdicts_from_bits(patterns[i])).dump(), patterns[i],
       std::string(kWarnBalanced));
  for (int i = 0; i < 3; ++i)
    ok("prose-suffix-" + std::to_string(i),
       reply_json(verdicts_from_bits(patterns[i + 5])).dump(2) + "\n\nLet me know if you need more detail.",
       patterns[i + 5], std::string(kWarnBalanced));
  for (int i = 0; i < 5; ++i) {
    std::string text = reply_json(verdicts_from_bits(patterns[9 - i])).dump(2);
    for (std::size_t pos = text.find("\"\n"); pos != std::string::npos; pos = text.find("\"\n", pos + 3))
      if (text.compare(pos + 2, std::string::npos, std::string(), 0, 0) >= 0 &&
          text.find_first_not_of(' ', pos + 2) != std::string::npos && text[text.find_first_not_of(' ', pos + 2)] == '}')
        text.insert(pos + 1, ",");
    if (i % 2) text = "```json\n" + text + "\n```";
    ok("trailing-comma-" + std::to_string(i), text, patterns[9 - i], std::string(kWarnTrailingComma));
  }
  for (auto t : kAllToxicityTypes) {
    auto j = reply_json(verdicts_from_bits(0));
    j.erase(std::string(display_name(t)));
    bad("missing-" + exchange_key(t), j.dump(), ParseStage::Schema, std::string(display_name(t)));
  }
  const char* toxic_forms[] = {"TOXIC", "toxic", " Toxic "};
  const char* non_forms[] = {"non-toxic", "Non-Toxic", "NONTOXIC"};
  for (int i = 0; i < 3; ++i) {
    auto j = reply_json(verdicts_from_bits(0));
    j["Liver Toxicity"]["Answer"] = toxic_forms[i];
    j["Liver Toxicity"]["Prediction"] = toxic_forms[i];
    ok(std::string("case-toxic-") + std::to_string(i), j.dump(), 8u);
    auto k = reply_json(verdicts_from_bits(63));
    k["Renal Toxicity"]["Answer"] = non_forms[i];
    k["Renal Toxicity"]["Prediction"] = non_forms[i];
    ok(std::string("case-non-") + std::to_string(i), k.dump(), 31u);
  }
  const char* unknown[] = {"Likely toxic", "Uncertain", "N/A"};
  for (int i = 0; i < 3; ++i) {
    auto j = reply_json(verdicts_from_bits(0));
    j["Pulmonary Toxicity"]["Answer"] = unknown[i];
    bad("unknown-verdict-" + std::to_string(i), j.dump(), ParseStage::Vocabulary,
        std::string("Pulmonary Toxicity.Answer: '") + unknown[i] + "'");
  }
  const char* nojson[] = {"I cannot assess this compound.", "```\nToxic for all organs\n```", "{\"Cardiotoxicity\": "};
  for (int i = 0; i < 3; ++i)
    bad("no-json-" + std::to_string(i), nojson[i], ParseStage::Extraction, "no parseable JSON in model output");
  {
    nlohmann::ordered_json j;
    for (auto t : kAllToxicityTypes) j[std::string(short_name(t))] = t == ToxicityType::Cardio ? "Toxic" : "Non-toxic";
    ok("bare-short-keys", j.dump(), 1u, "Cardiotoxicity: bare verdict accepted as Answer", OutputSchema::AnswerOnly);
    nlohmann::ordered_json k;
    for (auto t : kAllToxicityTypes) k[std::string(display_name(t))] = {{"Answer", "Toxic"}};
    ok("answer-only", k.dump(), 63u, "", OutputSchema::AnswerOnly);
  }
  for (int i = 0; i < 2; ++i) {
    auto j = reply_json(verdicts_from_bits(i ? 63u : 0u));
    j["Infertility"]["Prediction"] = i ? "Non-toxic" : "Toxic";
    ok("mismatch-" + std::to_string(i), j.dump(), i ? 63u : 0u, "Infertility: prediction/answer mismatch");
  }
  return cases;
}

Verdict parser_robustness() {
  Verdict v;
  const auto corpus = parser_corpus();
  int matched = 0;
  std::string first_bad;
  for (const auto& c : corpus) {
    const auto out = parse_response(c.text, "X", c.schema);
    bool good = out.failure == c.failure;
    if (good && c.answers) good = out.prediction && normalize(*out.prediction).answers == c.answers;
    if (good && !c.warning.empty()) {
      const auto& w = out.prediction->warnings;
      good = std::find(w.begin(), w.end(), c.warning) != w.end();
    }
    if (good) ++matched;
    else if (first_bad.empty()) first_bad = c.name;
  }
  util::StableRng rng(31337);
  const std::string seed_reply = reply_json(verdicts_from_bits(21)).dump(2);
  long crashes = 0, parsed = 0;
  for (int i = 0; i < 10000; ++i) {
    std::string s;
    if (i % 2 == 0) {
      const std::size_t len = rng.below(256);
      for (std::size_t k = 0; k < len; ++k) s.push_back(static_cast<char>(rng.below(256)));
    } else {
      s = seed_reply.substr(0, rng.below(seed_reply.size() + 1));
      const std::size_t flips = rng.below(8);
      for (std::size_t k = 0; k < flips && !s.empty(); ++k) s[rng.below(s.size())] = static_cast<char>(rng.below(256));
    }
    try {
      const auto out = parse_response(s, "F", i % 3 ? OutputSchema::Reasoned : OutputSchema::AnswerOnly);
      const auto line = to_jsonl_line(normalize(out, "F"));
      from_jsonl_line(line);
      if (out.ok()) ++parsed;
    } catch (...) {
      ++crashes;
    }
  }
  v.pass = matched == static_cast<int>(corpus.size()) && corpus.size() == 50 && crashes == 0;
  v.detail = std::to_string(matched) + "/" + std::to_string(corpus.size()) + " corpus cases as expected" +
             (first_bad.empty() ? "" : " (first mismatch: " + first_bad + ")") + "; 10000 fuzz inputs, " +
             std::to_string(crashes) + " escaped exceptions, " + std::to_string(parsed) + " parsed";
  return v;
}

// ---------------------------------------------------------------- end to end

class Scratch {
 public:
  Scratch() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("cotox-acceptance-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

struct RunOutput {
  std::string predictions;
  std::string report;
  std::size_t prediction_count = 0;
  int network_calls = 0;
  eval::EvalReport scores;
};

RunOutput offline_run(const fs::path& work) {
  const std::map<std::string, std::string> env = {
      {"COTOX_PATHS_CONTEXT_STORE", (work / "store.json").string()},
      {"COTOX_PATHS_CACHE_DIR", (work / "cache").string()},
      {"COTOX_PATHS_OUTPUT_DIR", (work / "runs").string()},
  };
  const auto cfg = config::load_config(kData / "e2e" / "run.toml", [&](const std::string& k) -> std::optional<std::string> {
    auto it = env.find(k);
    if (it == env.end()) return std::nullopt;
    return it->second;
  });
  auto transport = std::make_shared<http::InstrumentedClient>(std::make_shared<http::OfflineClient>());
  pipeline::Services svc;
  svc.network = transport;
  pipeline::cmd_prepare(cfg, svc);
  const auto predicted = pipeline::cmd_predict(cfg, svc);
  const auto evaluated = pipeline::cmd_evaluate(cfg, {}, std::nullopt, svc);
  RunOutput out;
  out.predictions = util::read_file(predicted.run_dir / "predictions.jsonl");
  out.report = util::read_file(evaluated.report_path);
  out.prediction_count = predicted.predictions;
  out.network_calls = transport->calls();
  out.scores = evaluated.reports.at(0).second;
  return out;
}

Verdict end_to_end() {
  Verdict v;
  Scratch work;
  const auto run = offline_run(work.path());
  // Hand-computed from labels.csv and the recorded replies (pooled, Toxic positive):
  //   cardio      tp 3 fp 1 fn 1  -> 6/8
  //   hemato      tp 2            -> 1
  //   infertility tp 0 fn 1       -> 0
  //   liver       tp 6 fp 2       -> 12/14
  //   pulmonary   tp 1 fp 1       -> 2/3
  //   renal       tp 2 fn 2       -> 4/6
  const std::array<double, 6> expected = {6.0 / 8.0, 1.0, 0.0, 12.0 / 14.0, 2.0 / 3.0, 4.0 / 6.0};
  double worst = 0;
  for (std::size_t i = 0; i < 6; ++i) worst = std::max(worst, std::fabs(run.scores.per_type_f1[i] - expected[i]));
  const std::string row =
      "| cotox-iupac | **0.750** | **1.000** | **0.000** | **0.857** | **0.667** | **0.667** | **0.657** |";
  const bool table_ok = run.report.find(row) != std::string::npos;
  v.pass = run.network_calls == 0 && run.prediction_count == 10 && worst < 1e-12 && table_ok;
  v.detail = std::to_string(run.prediction_count) + " predictions, " + std::to_string(run.network_calls) +
             " network calls, report row " + (table_ok ? "matches" : "differs from") + " the hand-computed table";
  return v;
}

Verdict determinism() {
  Verdict v;
  Scratch a, b;
  const auto first = offline_run(a.path());
  const auto second = offline_run(b.path());
  const bool preds = first.predictions == second.predictions;
  const bool report = first.report == second.report;
  v.pass = preds && report && !first.predictions.empty();
  v.detail = std::string("predictions.jsonl ") + (preds ? "identical" : "differs") + " (" +
             util::sha256_hex(first.predictions).substr(0, 12) + "), report.md " + (report ? "identical" : "differs") +
             " (" + util::sha256_hex(first.report).substr(0, 12) + ")";
  return v;
}

Verdict split_protocol() {
  Verdict v;
  std::vector<LabelRecord> labels;
  std::map<std::string, BioContext> contexts;
  std::vector<NormalizedPrediction> preds;
  util::StableRng rng(5);
  for (int i = 0; i < 100; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "S%03d", i);
    LabelRecord l;
    l.compound_id = id;
    for (auto& x : l.labels) x = rng.below(3) == 0 ? BinaryVerdict::Toxic : BinaryVerdict::NonToxic;
    labels.push_back(l);
    BioContext c;
    c.compound_id = id;
    if (i % 5 < 2) c.pathways.push_back({"P" + std::to_string(i), "Apoptosis", TermKind::Pathway, "CTD"});
    contexts[id] = c;
  }
  const auto split = split_dataset(labels, contexts, 17);
  for (const auto& id : split.test_ids) {
    NormalizedPrediction p;
    p.compound_id = id;
    std::array<BinaryVerdict, 6> a{};
    for (auto& x : a) x = rng.below(2) ? BinaryVerdict::Toxic : BinaryVerdict::NonToxic;
    p.answers = a;
    preds.push_back(p);
  }
  const auto one = eval::kfold_f1(preds, labels, 5, 11);
  const auto two = eval::kfold_f1(preds, labels, 5, 11);
  const bool same = one.per_fold == two.per_fold && one.folds == two.folds;
  v.pass = split.test_ids.size() == 40 && split.train_ids.size() == 60 && same && one.per_fold.size() == 5;
  v.detail = "|test| = " + std::to_string(split.test_ids.size()) + ", |train| = " + std::to_string(split.train_ids.size()) +
             "; 5-fold F1 maps " + (same ? "identical" : "differ") + " across repeats";
  return v;
}

const std::vector<std::pair<std::string, std::function<Verdict()>>> kCriteria = {
    {"table_arithmetic", table_arithmetic}, {"gap_reproduction", gap_reproduction},
    {"gsea_oracle", gsea_oracle},           {"gsea_planted", gsea_planted},
    {"parser_robustness", parser_robustness}, {"end_to_end", end_to_end},
    {"determinism", determinism},           {"split_protocol", split_protocol},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> wanted;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--criterion" && i + 1 < argc) wanted.push_back(argv[++i]);
    else if (a == "--list") {
      for (const auto& [name, fn] : kCriteria) std::cout << name << '\n';
      return 0;
    } else {
      std::cerr << "usage: acceptance [--criterion NAME]... [--list]\n";
      return 2;
    }
  }
  int failures = 0;
  for (const auto& [name, fn] : kCriteria) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), name) == wanted.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail << " [" << ms.count() << " ms]" << std::endl;
    if (!v.pass) ++failures;
  }
  for (const auto& w : wanted)
    if (std::none_of(kCriteria.begin(), kCriteria.end(), [&](const auto& c) { return c.first == w; })) {
      std::cerr << "unknown criterion '" << w << "'\n";
      return 2;
    }
  return failures == 0 ? 0 : 1;
}
