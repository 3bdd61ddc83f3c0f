#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cotox/core_model.hpp"
#include "cotox/error.hpp"
#include "cotox/util.hpp"

namespace cotox {

enum class TermKind { Pathway, GoBiologicalProcess, GoMolecularFunction, GoCellularComponent };

constexpr std::string_view to_string(TermKind k) {
  switch (k) {
    case TermKind::Pathway: return "pathway";
    case TermKind::GoBiologicalProcess: return "go_bp";
    case TermKind::GoMolecularFunction: return "go_mf";
    case TermKind::GoCellularComponent: return "go_cc";
  }
  return "";
}

inline TermKind parse_term_kind(std::string_view s) {
  const std::string k = util::to_lower(util::trim(s));
  if (k == "pathway") return TermKind::Pathway;
  if (k == "go_bp" || k == "go-bp" || k == "biological_process") return TermKind::GoBiologicalProcess;
  if (k == "go_mf" || k == "go-mf" || k == "molecular_function") return TermKind::GoMolecularFunction;
  if (k == "go_cc" || k == "go-cc" || k == "cellular_component") return TermKind::GoCellularComponent;
  throw Error(ErrorCode::ConfigError, "unknown term kind '" + std::string(s) + "'");
}

constexpr bool is_go(TermKind k) { return k != TermKind::Pathway; }

struct Term {
  std::string term_id;
  std::string term_name;
  TermKind kind = TermKind::Pathway;
  std::string source;

  bool operator==(const Term&) const = default;
};

struct BioContext {
  std::string compound_id;
  std::vector<Term> pathways;
  std::vector<Term> go_terms;
  bool filtered = false;

  bool empty() const { return pathways.empty() && go_terms.empty(); }
  std::size_t size() const { return pathways.size() + go_terms.size(); }
  bool operator==(const BioContext&) const = default;
};

struct GeneSet {
  std::string name;
  std::string description;
  std::vector<std::string> genes;  // uppercase, unique, first-seen order
};

struct RankedEntry {
  std::string gene;
  double score = 0.0;
};

// Sorted by score descending, ties by gene ascending.
struct RankedList {
  std::vector<RankedEntry> entries;

  std::size_t size() const { return entries.size(); }
};

struct DatasetSplit {
  std::set<std::string> train_ids;
  std::set<std::string> test_ids;
};

struct CtdAssociation {
  std::string chemical_id;
  std::string chemical_name;
  Term term;
};

// ---------------------------------------------------------------- JSON

inline void to_json(nlohmann::json& j, const Term& t) {
  j = nlohmann::json{{"term_id", t.term_id},
                     {"term_name", t.term_name},
                     {"kind", to_string(t.kind)},
                     {"source", t.source}};
}

inline void from_json(const nlohmann::json& j, Term& t) {
  t.term_id = j.at("term_id").get<std::string>();
  t.term_name = j.at("term_name").get<std::string>();
  t.kind = parse_term_kind(j.at("kind").get<std::string>());
  t.source = j.value("source", "");
}

inline void to_json(nlohmann::json& j, const BioContext& c) {
  j = nlohmann::json{{"compound_id", c.compound_id},
                     {"pathways", c.pathways},
                     {"go_terms", c.go_terms},
                     {"filtered", c.filtered}};
}

inline void from_json(const nlohmann::json& j, BioContext& c) {
  c.compound_id = j.at("compound_id").get<std::string>();
  c.pathways = j.at("pathways").get<std::vector<Term>>();
  c.go_terms = j.at("go_terms").get<std::vector<Term>>();
  c.filtered = j.at("filtered").get<bool>();
}

inline void to_json(nlohmann::json& j, const Compound& c) {
  j = nlohmann::json{{"id", c.id}, {"name", c.name}};
  j["smiles"] = c.smiles ? nlohmann::json(*c.smiles) : nlohmann::json(nullptr);
  j["iupac_name"] = c.iupac_name ? nlohmann::json(*c.iupac_name) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, Compound& c) {
  c.id = j.at("id").get<std::string>();
  c.name = j.value("name", "");
  c.smiles.reset();
  c.iupac_name.reset();
  if (j.contains("smiles") && j["smiles"].is_string()) c.smiles = j["smiles"].get<std::string>();
  if (j.contains("iupac_name") && j["iupac_name"].is_string())
    c.iupac_name = j["iupac_name"].get<std::string>();
}

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line, char delim) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == delim) {
      fields.push_back(std::string(util::trim(cur)));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::string(util::trim(cur)));
  return fields;
}

inline std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  for (auto& l : util::split(text, '\n')) out.emplace_back(util::strip_cr(l));
  if (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

inline std::string strip_db_prefix(std::string_view id) {
  for (std::string_view prefix : {"REACT:", "KEGG:"}) {
    if (id.substr(0, prefix.size()) == prefix) return std::string(id.substr(prefix.size()));
  }
  return std::string(id);
}

}  // namespace detail

// ---------------------------------------------------------------- labels

// Header must hold compound_id, name and the six type columns (short or
// display names, any case). Optional "smiles" / "iupac" columns are carried
// through by load_compounds.
inline std::vector<LabelRecord> load_labels(const std::filesystem::path& path,
                                            std::vector<Compound>* compounds = nullptr) {
  const auto lines = detail::lines_of(util::read_file(path));
  std::size_t first = 0;
  while (first < lines.size() && util::trim(lines[first]).empty()) ++first;
  if (first == lines.size()) throw Error(ErrorCode::EmptyFile, path.string());

  const std::string& header_line = lines[first];
  const char delim = (header_line.find('\t') != std::string::npos &&
                      header_line.find(',') == std::string::npos)
                         ? '\t'
                         : ',';
  const auto header = detail::split_csv_line(header_line, delim);

  std::optional<std::size_t> id_col, name_col, smiles_col, iupac_col;
  std::array<std::optional<std::size_t>, 6> type_cols{};
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string key = util::fold_key(header[i]);
    if (key == "compoundid" || key == "id") {
      id_col = i;
    } else if (key == "name" || key == "drugname" || key == "compoundname") {
      name_col = i;
    } else if (key == "smiles") {
      smiles_col = i;
    } else if (key == "iupac" || key == "iupacname") {
      iupac_col = i;
    } else {
      try {
        type_cols[index_of(parse_toxicity_type(header[i]))] = i;
      } catch (const Error&) {
        // extra columns are tolerated
      }
    }
  }
  if (!id_col) throw Error(ErrorCode::MissingColumn, "compound_id");
  if (!name_col) throw Error(ErrorCode::MissingColumn, "name");
  for (ToxicityType t : kAllToxicityTypes) {
    if (!type_cols[index_of(t)]) throw Error(ErrorCode::MissingColumn, std::string(short_name(t)));
  }

  std::vector<LabelRecord> records;
  std::unordered_set<std::string> seen;
  for (std::size_t ln = first + 1; ln < lines.size(); ++ln) {
    if (util::trim(lines[ln]).empty()) continue;
    const auto fields = detail::split_csv_line(lines[ln], delim);
    const std::string where = "line " + std::to_string(ln + 1);
    auto cell = [&](std::size_t col) -> const std::string& {
      if (col >= fields.size())
        throw Error(ErrorCode::MalformedRow, where + ": expected " + std::to_string(header.size()) +
                                                 " fields, got " + std::to_string(fields.size()));
      return fields[col];
    };
    LabelRecord rec;
    rec.compound_id = cell(*id_col);
    if (rec.compound_id.empty()) throw Error(ErrorCode::MalformedRow, where + ": empty compound_id");
    if (!seen.insert(rec.compound_id).second)
      throw Error(ErrorCode::DuplicateCompoundId, rec.compound_id);
    for (ToxicityType t : kAllToxicityTypes) {
      const std::string& v = cell(*type_cols[index_of(t)]);
      try {
        rec[t] = parse_binary_verdict(v);
      } catch (const Error&) {
        throw Error(ErrorCode::BadVerdict,
                    where + ", column " + std::string(short_name(t)) + ": '" + v + "'");
      }
    }
    if (compounds) {
      Compound c;
      c.id = rec.compound_id;
      c.name = cell(*name_col);
      if (smiles_col && *smiles_col < fields.size() && !fields[*smiles_col].empty())
        c.smiles = fields[*smiles_col];
      if (iupac_col && *iupac_col < fields.size() && !fields[*iupac_col].empty())
        c.iupac_name = fields[*iupac_col];
      compounds->push_back(std::move(c));
    }
    records.push_back(std::move(rec));
  }
  return records;
}

// ---------------------------------------------------------------- CTD

// Normalized layout: chemical_id, chemical_name, term_name, term_id.
inline std::vector<CtdAssociation> load_ctd_associations(const std::filesystem::path& path,
                                                         TermKind kind) {
  const auto lines = detail::lines_of(util::read_file(path));
  std::vector<CtdAssociation> out;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    std::string_view line = lines[ln];
    if (util::trim(line).empty() || line.front() == '#') continue;
    const auto f = util::split(line, '\t');
    if (f.size() != 4)
      throw Error(ErrorCode::MalformedRow, path.filename().string() + " line " +
                                               std::to_string(ln + 1) + ": expected 4 fields, got " +
                                               std::to_string(f.size()));
    CtdAssociation a;
    a.chemical_id = std::string(util::trim(f[0]));
    a.chemical_name = std::string(util::trim(f[1]));
    a.term.term_name = std::string(util::trim(f[2]));
    a.term.term_id = detail::strip_db_prefix(util::trim(f[3]));
    a.term.kind = kind;
    a.term.source = "CTD";
    if (a.chemical_id.empty() || a.term.term_name.empty() || a.term.term_id.empty())
      throw Error(ErrorCode::MalformedRow,
                  path.filename().string() + " line " + std::to_string(ln + 1) + ": empty field");
    out.push_back(std::move(a));
  }
  if (out.empty()) throw Error(ErrorCode::EmptyFile, path.string());
  return out;
}

// Adapter for raw CTD exports (e.g. CTD_chem_pathways_enriched.tsv,
// CTD_chem_go_enriched.tsv). Columns are located through the "# Fields:"
// comment that CTD emits ahead of the data; GO exports also carry an
// "Ontology" column used to assign the GO kind per row.
inline std::vector<CtdAssociation> load_ctd_export(const std::filesystem::path& path,
                                                   TermKind default_kind) {
  const auto lines = detail::lines_of(util::read_file(path));
  std::vector<std::string> columns;
  bool expect_fields = false;
  std::vector<CtdAssociation> out;
  auto col = [&](std::initializer_list<std::string_view> names) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < columns.size(); ++i)
      for (auto n : names)
        if (util::fold_key(columns[i]) == util::fold_key(n)) return i;
    return std::nullopt;
  };
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    std::string_view line = lines[ln];
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::string_view body = util::trim(line.substr(1));
      if (expect_fields && !body.empty()) {
        columns = util::split(body, '\t');
        for (auto& c : columns) c = std::string(util::trim(c));
        expect_fields = false;
      } else if (util::to_lower(body).rfind("fields:", 0) == 0) {
        std::string_view rest = util::trim(body.substr(7));
        if (rest.empty()) {
          expect_fields = true;
        } else {
          columns = util::split(rest, '\t');
          for (auto& c : columns) c = std::string(util::trim(c));
        }
      }
      continue;
    }
    if (columns.empty())
      throw Error(ErrorCode::MalformedRow, path.filename().string() + ": data before '# Fields:' header");
    const auto id_c = col({"ChemicalID"});
    const auto name_c = col({"ChemicalName"});
    const auto term_name_c = col({"PathwayName", "GOTermName"});
    const auto term_id_c = col({"PathwayID", "GOTermID"});
    const auto onto_c = col({"Ontology"});
    if (!id_c || !name_c || !term_name_c || !term_id_c)
      throw Error(ErrorCode::MissingColumn, "CTD export lacks ChemicalID/ChemicalName/term columns");
    const auto f = util::split(line, '\t');
    const std::size_t need = std::max({*id_c, *name_c, *term_name_c, *term_id_c}) + 1;
    if (f.size() < need)
      throw Error(ErrorCode::MalformedRow,
                  path.filename().string() + " line " + std::to_string(ln + 1));
    CtdAssociation a;
    a.chemical_id = std::string(util::trim(f[*id_c]));
    if (a.chemical_id.find(':') == std::string::npos) a.chemical_id = "MESH:" + a.chemical_id;
    a.chemical_name = std::string(util::trim(f[*name_c]));
    a.term.term_name = std::string(util::trim(f[*term_name_c]));
    a.term.term_id = detail::strip_db_prefix(util::trim(f[*term_id_c]));
    a.term.kind = default_kind;
    if (onto_c && *onto_c < f.size()) {
      const std::string o = util::fold_key(f[*onto_c]);
      if (o == "biologicalprocess") a.term.kind = TermKind::GoBiologicalProcess;
      else if (o == "molecularfunction") a.term.kind = TermKind::GoMolecularFunction;
      else if (o == "cellularcomponent") a.term.kind = TermKind::GoCellularComponent;
    }
    a.term.source = "CTD";
    out.push_back(std::move(a));
  }
  if (out.empty()) throw Error(ErrorCode::EmptyFile, path.string());
  return out;
}

inline void append_term(BioContext& ctx, const Term& t) {
  auto& list = is_go(t.kind) ? ctx.go_terms : ctx.pathways;
  for (const auto& existing : list)
    if (existing.term_id == t.term_id) return;
  list.push_back(t);
}

// Rows whose chemical_id equals compound_key, deduplicated by term_id in
// first-seen order.
inline BioContext build_bio_context(const std::vector<CtdAssociation>& associations,
                                    std::string_view compound_key) {
  BioContext ctx;
  ctx.compound_id = std::string(compound_key);
  for (const auto& a : associations)
    if (a.chemical_id == compound_key) append_term(ctx, a.term);
  return ctx;
}

// Index by chemical id and by lowercased chemical name, for callers that join
// many compounds against one association file.
class CtdIndex {
 public:
  explicit CtdIndex(const std::vector<CtdAssociation>& associations) {
    for (std::size_t i = 0; i < associations.size(); ++i) {
      by_id_[associations[i].chemical_id].push_back(i);
      by_name_[util::to_lower(associations[i].chemical_name)].push_back(i);
    }
    assoc_ = &associations;
  }

  // Matches on dataset id first, then on drug name.
  void extend(BioContext& ctx, const Compound& c) const {
    const std::vector<std::size_t>* rows = nullptr;
    if (auto it = by_id_.find(c.id); it != by_id_.end()) rows = &it->second;
    else if (auto jt = by_name_.find(util::to_lower(c.name)); jt != by_name_.end()) rows = &jt->second;
    if (!rows) return;
    for (std::size_t i : *rows) append_term(ctx, (*assoc_)[i].term);
  }

 private:
  const std::vector<CtdAssociation>* assoc_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_id_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_name_;
};

// ---------------------------------------------------------------- GMT

inline std::vector<GeneSet> parse_gmt(const std::filesystem::path& path) {
  const auto lines = detail::lines_of(util::read_file(path));
  std::vector<GeneSet> sets;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (util::trim(lines[ln]).empty()) continue;
    const auto f = util::split(lines[ln], '\t');
    if (f.size() < 3)
      throw Error(ErrorCode::MalformedRow, path.filename().string() + " line " + std::to_string(ln + 1));
    GeneSet gs;
    gs.name = std::string(util::trim(f[0]));
    gs.description = std::string(util::trim(f[1]));
    std::unordered_set<std::string> seen;
    for (std::size_t i = 2; i < f.size(); ++i) {
      std::string g = util::to_upper(util::trim(f[i]));
      if (!g.empty() && seen.insert(g).second) gs.genes.push_back(std::move(g));
    }
    if (gs.name.empty() || gs.genes.empty())
      throw Error(ErrorCode::MalformedRow, path.filename().string() + " line " + std::to_string(ln + 1));
    sets.push_back(std::move(gs));
  }
  return sets;
}

// ---------------------------------------------------------------- ranks

inline void sort_ranked(std::vector<RankedEntry>& entries) {
  std::sort(entries.begin(), entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.gene < b.gene;
  });
}

inline RankedList make_ranked_list(std::vector<RankedEntry> entries) {
  std::unordered_set<std::string> seen;
  for (auto& e : entries) {
    e.gene = util::to_upper(util::trim(e.gene));
    if (!seen.insert(e.gene).second) throw Error(ErrorCode::DuplicateGene, e.gene);
  }
  if (entries.size() < 2) throw Error(ErrorCode::TooFewEntries, std::to_string(entries.size()));
  sort_ranked(entries);
  return RankedList{std::move(entries)};
}

// gene<TAB>score; a first line whose score field is not numeric is a header.
inline RankedList parse_rank_file(const std::filesystem::path& path) {
  const auto lines = detail::lines_of(util::read_file(path));
  std::vector<RankedEntry> entries;
  bool first_content = true;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    std::string_view line = lines[ln];
    if (util::trim(line).empty() || line.front() == '#') continue;
    const auto f = util::split(line, '\t');
    const bool header_candidate = first_content;
    first_content = false;
    if (f.size() < 2) {
      if (header_candidate) continue;
      throw Error(ErrorCode::MalformedRow, path.filename().string() + " line " + std::to_string(ln + 1));
    }
    auto score = util::parse_double(f[1]);
    if (!score) {
      if (header_candidate) continue;
      throw Error(ErrorCode::NonNumericScore,
                  "line " + std::to_string(ln + 1) + ": '" + std::string(util::trim(f[1])) + "'");
    }
    entries.push_back({std::string(f[0]), *score});
  }
  return make_ranked_list(std::move(entries));
}

// ---------------------------------------------------------------- split

// Test set = compounds with at least one pathway or GO term. When max_test is
// set and exceeded, a seeded subsample stays in test and the rest moves to
// train.
inline DatasetSplit split_dataset(const std::vector<LabelRecord>& labels,
                                  const std::map<std::string, BioContext>& contexts,
                                  std::uint64_t seed, std::optional<std::size_t> max_test = {}) {
  DatasetSplit split;
  std::vector<std::string> pool;
  for (const auto& rec : labels) {
    auto it = contexts.find(rec.compound_id);
    if (it != contexts.end() && !it->second.empty()) pool.push_back(rec.compound_id);
    else split.train_ids.insert(rec.compound_id);
  }
  if (pool.empty()) throw Error(ErrorCode::EmptyTestSet, "no compound has biological context");
  if (max_test && pool.size() > *max_test) {
    const std::uint64_t mix = util::splitmix64(seed);
    std::sort(pool.begin(), pool.end(), [&](const std::string& a, const std::string& b) {
      auto ha = util::fnv1a64(a, mix), hb = util::fnv1a64(b, mix);
      return ha != hb ? ha < hb : a < b;
    });
    for (std::size_t i = *max_test; i < pool.size(); ++i) split.train_ids.insert(pool[i]);
    pool.resize(*max_test);
  }
  split.test_ids.insert(pool.begin(), pool.end());
  return split;
}

}  // namespace cotox
