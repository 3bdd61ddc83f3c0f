#include <gtest/gtest.h>

#include "cotox/error.hpp"
#include "cotox/ingest.hpp"
#include "support.hpp"

using namespace cotox;
using testing_support::TempDir;

namespace {

const char* kHeader = "compound_id,name,cardio,hemato,infertility,liver,pulmonary,renal\n";

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::ConfigError;
}

}  // namespace

TEST(LoadLabels, DirectColumnMapping) {
  TempDir tmp;
  auto p = tmp.write("labels.csv", std::string(kHeader) + "D001,Aspirin,Yes,No,No,Yes,No,No\n");
  std::vector<Compound> compounds;
  auto labels = load_labels(p, &compounds);
  ASSERT_EQ(labels.size(), 1u);
  EXPECT_EQ(labels[0].compound_id, "D001");
  EXPECT_EQ(labels[0][ToxicityType::Cardio], BinaryVerdict::Toxic);
  EXPECT_EQ(labels[0][ToxicityType::Liver], BinaryVerdict::Toxic);
  for (auto t : {ToxicityType::Hemato, ToxicityType::Infertility, ToxicityType::Pulmonary, ToxicityType::Renal})
    EXPECT_EQ(labels[0][t], BinaryVerdict::NonToxic);
  ASSERT_EQ(compounds.size(), 1u);
  EXPECT_EQ(compounds[0].name, "Aspirin");
}

TEST(LoadLabels, MissingColumnIsNamed) {
  TempDir tmp;
  auto p = tmp.write("labels.csv", "compound_id,name,cardio,hemato,infertility,liver,pulmonary\nD1,X,No,No,No,No,No\n");
  try {
    load_labels(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingColumn);
    EXPECT_NE(std::string(e.what()).find("Renal"), std::string::npos);
  }
}

TEST(LoadLabels, DuplicateId) {
  TempDir tmp;
  auto p = tmp.write("labels.csv", std::string(kHeader) + "D001,A,No,No,No,No,No,No\nD001,B,No,No,No,No,No,No\n");
  EXPECT_EQ(code_of([&] { load_labels(p); }), ErrorCode::DuplicateCompoundId);
}

TEST(LoadLabels, BadVerdictNamesRowAndColumn) {
  TempDir tmp;
  auto p = tmp.write("labels.csv", std::string(kHeader) + "D001,A,No,No,maybe,No,No,No\n");
  try {
    load_labels(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadVerdict);
    EXPECT_NE(e.detail().find("line 2"), std::string::npos);
    EXPECT_NE(e.detail().find("maybe"), std::string::npos);
  }
}

TEST(LoadLabels, QuotedFieldsAndOptionalStructureColumns) {
  TempDir tmp;
  auto p = tmp.write("labels.csv",
                     "compound_id,name,smiles,iupac_name,cardio,hemato,infertility,liver,pulmonary,renal\r\n"
                     "D9,\"Drug, salt\",CCO,ethanol,Toxic,Non-toxic,No,No,No,Yes\r\n");
  std::vector<Compound> compounds;
  auto labels = load_labels(p, &compounds);
  EXPECT_EQ(compounds[0].name, "Drug, salt");
  EXPECT_EQ(compounds[0].smiles, "CCO");
  EXPECT_EQ(compounds[0].iupac_name, "ethanol");
  EXPECT_EQ(labels[0][ToxicityType::Renal], BinaryVerdict::Toxic);
}

TEST(LoadCtd, FieldMapping) {
  TempDir tmp;
  auto p = tmp.write("pw.tsv", "# fields:\nMESH:D010656\tPhenylephrine\tApoptosis\tREACT:R-HSA-109581\n");
  auto rows = load_ctd_associations(p, TermKind::Pathway);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].chemical_id, "MESH:D010656");
  EXPECT_EQ(rows[0].term, (Term{"R-HSA-109581", "Apoptosis", TermKind::Pathway, "CTD"}));
}

TEST(LoadCtd, MalformedRowHasLine) {
  TempDir tmp;
  auto p = tmp.write("pw.tsv", "# c\nMESH:D1\tX\tA\tR-1\nMESH:D2\tY\n");
  try {
    load_ctd_associations(p, TermKind::Pathway);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedRow);
    EXPECT_NE(e.detail().find("line 3"), std::string::npos);
  }
}

TEST(LoadCtd, EmptyFile) {
  TempDir tmp;
  auto p = tmp.write("pw.tsv", "# only comments\n");
  EXPECT_EQ(code_of([&] { load_ctd_associations(p, TermKind::Pathway); }), ErrorCode::EmptyFile);
}

TEST(LoadCtd, RawExportAdapterUsesOntologyColumn) {
  TempDir tmp;
  auto p = tmp.write("go.tsv",
                     "# Fields:\n# ChemicalName\tChemicalID\tCasRN\tOntology\tGOTermName\tGOTermID\n"
                     "Aspirin\tD001241\t50-78-2\tBiological Process\tapoptotic process\tGO:0006915\n"
                     "Aspirin\tD001241\t50-78-2\tMolecular Function\tenzyme binding\tGO:0019899\n");
  auto rows = load_ctd_export(p, TermKind::GoBiologicalProcess);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].term.kind, TermKind::GoBiologicalProcess);
  EXPECT_EQ(rows[1].term.kind, TermKind::GoMolecularFunction);
  EXPECT_EQ(rows[1].term.term_id, "GO:0019899");
}

TEST(BuildBioContext, DedupAndKinds) {
  std::vector<CtdAssociation> a = {
      {"C1", "x", {"P1", "Apoptosis", TermKind::Pathway, "CTD"}},
      {"C1", "x", {"P1", "Apoptosis", TermKind::Pathway, "CTD"}},
      {"C1", "x", {"P2", "Necrosis", TermKind::Pathway, "CTD"}},
      {"C1", "x", {"P3", "Stress", TermKind::Pathway, "CTD"}},
      {"C1", "x", {"GO:1", "a", TermKind::GoBiologicalProcess, "CTD"}},
      {"C1", "x", {"GO:2", "b", TermKind::GoBiologicalProcess, "CTD"}},
      {"C2", "y", {"P9", "Other", TermKind::Pathway, "CTD"}},
  };
  auto ctx = build_bio_context(a, "C1");
  EXPECT_EQ(ctx.pathways.size(), 3u);
  EXPECT_EQ(ctx.go_terms.size(), 2u);
  EXPECT_FALSE(ctx.filtered);
  EXPECT_EQ(ctx.pathways[0].term_id, "P1");

  auto none = build_bio_context(a, "NOPE");
  EXPECT_TRUE(none.empty());
}

TEST(BuildBioContext, JsonRoundTrip) {
  BioContext ctx;
  ctx.compound_id = "C1";
  ctx.pathways.push_back({"P1", "Apoptosis", TermKind::Pathway, "CTD"});
  ctx.go_terms.push_back({"GO:1", "a", TermKind::GoCellularComponent, "GSEA"});
  nlohmann::json j = ctx;
  EXPECT_EQ(j.get<BioContext>(), ctx);
}

TEST(CtdIndex, MatchesIdThenName) {
  std::vector<CtdAssociation> a = {
      {"D1", "Aspirin", {"P1", "A", TermKind::Pathway, "CTD"}},
      {"MESH:X", "Ibuprofen", {"P2", "B", TermKind::Pathway, "CTD"}},
  };
  CtdIndex idx(a);
  BioContext c1, c2;
  idx.extend(c1, Compound{"D1", "whatever", {}, {}});
  idx.extend(c2, Compound{"D2", "IBUPROFEN", {}, {}});
  ASSERT_EQ(c1.pathways.size(), 1u);
  EXPECT_EQ(c1.pathways[0].term_id, "P1");
  ASSERT_EQ(c2.pathways.size(), 1u);
  EXPECT_EQ(c2.pathways[0].term_id, "P2");
}

TEST(ParseGmt, Examples) {
  TempDir tmp;
  auto p = tmp.write("sets.gmt", "SET1\tdesc\tTP53\tEGFR\nSET2\tdesc\ttp53\tTP53\n");
  auto sets = parse_gmt(p);
  ASSERT_EQ(sets.size(), 2u);
  EXPECT_EQ(sets[0].name, "SET1");
  EXPECT_EQ(sets[0].genes, (std::vector<std::string>{"TP53", "EGFR"}));
  EXPECT_EQ(sets[1].genes, (std::vector<std::string>{"TP53"}));
}

TEST(ParseGmt, TooFewFields) {
  TempDir tmp;
  auto p = tmp.write("sets.gmt", "SETX\tdesc\n");
  EXPECT_EQ(code_of([&] { parse_gmt(p); }), ErrorCode::MalformedRow);
}

TEST(ParseRankFile, SortsDescending) {
  TempDir tmp;
  auto r = parse_rank_file(tmp.write("r.rnk", "A\t2.0\nB\t3.0\n"));
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r.entries[0].gene, "B");
  EXPECT_EQ(r.entries[1].gene, "A");
}

TEST(ParseRankFile, TieBrokenBySymbol) {
  TempDir tmp;
  auto r = parse_rank_file(tmp.write("r.rnk", "B\t1.0\nA\t1.0\n"));
  EXPECT_EQ(r.entries[0].gene, "A");
  EXPECT_EQ(r.entries[1].gene, "B");
}

TEST(ParseRankFile, Errors) {
  TempDir tmp;
  EXPECT_EQ(code_of([&] { parse_rank_file(tmp.write("a.rnk", "A\t1.0\nA\t2.0\n")); }), ErrorCode::DuplicateGene);
  EXPECT_EQ(code_of([&] { parse_rank_file(tmp.write("b.rnk", "A\t1.0\nB\tx\n")); }), ErrorCode::NonNumericScore);
  EXPECT_EQ(code_of([&] { parse_rank_file(tmp.write("c.rnk", "A\t1.0\n")); }), ErrorCode::TooFewEntries);
}

TEST(ParseRankFile, HeaderAndCaseFolding) {
  TempDir tmp;
  auto r = parse_rank_file(tmp.write("h.rnk", "gene\tscore\ntp53\t-1.5\nEgfr\t0.5\nMYC\t2\n"));
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r.entries[0].gene, "MYC");
  EXPECT_EQ(r.entries[2].gene, "TP53");
  for (std::size_t i = 0; i + 1 < r.size(); ++i) {
    const auto& a = r.entries[i];
    const auto& b = r.entries[i + 1];
    EXPECT_TRUE(a.score > b.score || (a.score == b.score && a.gene < b.gene));
  }
}

TEST(SplitDataset, ContextDefinesTest) {
  std::vector<LabelRecord> labels;
  std::map<std::string, BioContext> ctx;
  for (int i = 0; i < 10; ++i) {
    LabelRecord l;
    l.compound_id = "C" + std::to_string(i);
    labels.push_back(l);
    BioContext c;
    c.compound_id = l.compound_id;
    if (i < 4) c.go_terms.push_back({"GO:" + std::to_string(i), "t", TermKind::GoBiologicalProcess, "CTD"});
    ctx[l.compound_id] = c;
  }
  auto split = split_dataset(labels, ctx, 1);
  EXPECT_EQ(split.test_ids.size(), 4u);
  EXPECT_EQ(split.train_ids.size(), 6u);
  for (const auto& id : split.test_ids) EXPECT_FALSE(split.train_ids.count(id));
}

TEST(SplitDataset, NoContextAnywhere) {
  std::vector<LabelRecord> labels(3);
  for (int i = 0; i < 3; ++i) labels[i].compound_id = "C" + std::to_string(i);
  EXPECT_EQ(code_of([&] { split_dataset(labels, {}, 0); }), ErrorCode::EmptyTestSet);
}

TEST(SplitDataset, SubsampleIsSeededPartition) {
  std::vector<LabelRecord> labels(20);
  std::map<std::string, BioContext> ctx;
  for (int i = 0; i < 20; ++i) {
    labels[i].compound_id = "C" + std::to_string(i);
    ctx[labels[i].compound_id].pathways.push_back({"P", "t", TermKind::Pathway, "CTD"});
  }
  auto a = split_dataset(labels, ctx, 5, 7);
  auto b = split_dataset(labels, ctx, 5, 7);
  EXPECT_EQ(a.test_ids.size(), 7u);
  EXPECT_EQ(a.train_ids.size(), 13u);
  EXPECT_EQ(a.test_ids, b.test_ids);
}
