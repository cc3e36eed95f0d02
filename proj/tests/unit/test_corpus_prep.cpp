#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "dotrag/corpus_prep.hpp"
#include "test_support.hpp"

using namespace dotrag;
using namespace dotrag::testing;

namespace {

const PromptLibrary& prompts() {
  static const PromptLibrary lib(PromptLibrary::default_dir());
  return lib;
}

std::vector<std::vector<double>> random_rows(std::mt19937_64& rng, std::size_t n, int dim) {
  std::normal_distribution<double> normal(0, 1);
  std::vector<std::vector<double>> base(1 + n / 4, std::vector<double>(static_cast<std::size_t>(dim)));
  for (auto& b : base) {
    for (auto& x : b) x = normal(rng);
  }
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < n; ++i) {
    auto v = base[rng() % base.size()];
    for (auto& x : v) x += 0.6 * normal(rng);
    rows.push_back(v);
  }
  return rows;
}

}  // namespace

TEST(Triples, ParsesTabsAndPipes) {
  std::istringstream in("Inception|directed_by|Christopher Nolan\n\nTitanic\tstarred_actors\tKate Winslet\n");
  const auto t = parse_triples(in);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[0].tail, "Christopher Nolan");
  EXPECT_EQ(t[1].relation, "starred_actors");
  std::istringstream bad("only|two\n");
  EXPECT_THROW(parse_triples(bad), ParseError);
  EXPECT_EQ(load_triples(fixture("metaqa_small/kb.txt")).size(), 30u);
}

TEST(Brackets, ParseAndCoverage) {
  const auto m = parse_brackets("<Tesla> was led by [Elon Musk] and ⟨Tesla⟩ sells [Model S].");
  EXPECT_EQ(m.angular, (std::vector<std::string>{"Tesla", "Tesla"}));
  EXPECT_EQ(m.square, (std::vector<std::string>{"Elon Musk", "Model S"}));
  const auto c = check_coverage("<tesla> hired [ELON  musk].", "Tesla", {"Elon Musk", "Austin"});
  EXPECT_TRUE(c.center_found);
  EXPECT_EQ(c.missing, std::vector<std::string>{"Austin"});
  EXPECT_FALSE(c.complete());
  EXPECT_FALSE(check_coverage("Tesla [Austin]", "Tesla", {"Austin"}).center_found);
}

TEST(Textualize, ConvergesOnSecondCall) {
  auto mock = std::make_shared<ScriptedMock>();
  mock->add_rule({LlmStage::textualize_chunk, {"missing from square brackets: Austin."}, "<Tesla> sits in [Austin] and is run by [Elon Musk]."});
  mock->add_rule({LlmStage::textualize_chunk, {}, "<Tesla> is run by [Elon Musk]."});
  LlmClient llm(mock);
  const std::vector<Neighbor> n{{"elon_musk", "Elon Musk", "ceo_of", false}, {"austin", "Austin", "based_in", true}};
  const auto out = textualize_entity("tesla", "Tesla", n, llm, prompts(), 3);
  EXPECT_TRUE(out.ok);
  EXPECT_EQ(out.calls, 2);
  EXPECT_EQ(out.chunk.required, (std::vector<std::string>{"elon_musk", "austin"}));
  EXPECT_THROW(textualize_entity("tesla", "Tesla", {}, llm, prompts(), 3), Error);
}

TEST(Textualize, GivesUpAfterMaxRetries) {
  auto mock = std::make_shared<ScriptedMock>();
  mock->set_default(LlmStage::textualize_chunk, "Tesla is a company.");
  LlmClient llm(mock);
  const std::vector<Neighbor> n{{"austin", "Austin", "based_in", true}};
  const auto out = textualize_entity("tesla", "Tesla", n, llm, prompts(), 2);
  EXPECT_FALSE(out.ok);
  EXPECT_EQ(out.calls, 3);
  EXPECT_FALSE(out.center_found);
  EXPECT_EQ(out.missing, std::vector<std::string>{"Austin"});
}

TEST(Summaries, TypeOutsideSchemaBecomesUnsure) {
  Schema schema;
  schema.graph_description = "g";
  schema.entity_types = {{"person", "p"}};
  auto mock = std::make_shared<ScriptedMock>();
  mock->set_default(LlmStage::entity_summary, fence("type: spaceship\ndescription: flies\n"));
  LlmClient llm(mock);
  const auto r = summarize_entity("X", "<X> flies.", "person", schema, llm, prompts());
  EXPECT_EQ(r.entity_type, "unsure");
  EXPECT_EQ(r.description, "flies");
}

TEST(Descriptions, CountMismatchRetriedThenFails) {
  auto mock = std::make_shared<ScriptedMock>();
  mock->set_default(LlmStage::relation_describe, fence("description: only one\n"));
  LlmClient llm(mock);
  const std::vector<Triple> t{{"A", "r", "B"}, {"A", "s", "C"}};
  EXPECT_THROW(describe_relations("A", "text", t, llm, prompts()), ProviderError);
  EXPECT_EQ(llm.calls(LlmStage::relation_describe), 2u);

  LlmClient auto_llm(std::make_shared<ScriptedMock>());
  EXPECT_EQ(describe_relations("A", "text", t, auto_llm, prompts()).size(), 2u);
}

TEST(Dedup, ComponentsMatchOracle) {
  std::mt19937_64 rng(41);
  for (int round = 0; round < 40; ++round) {
    const std::size_t n = 1 + rng() % 30;
    const auto rows = random_rows(rng, n, 8);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), 8);
    Eigen::MatrixXf mf(static_cast<Eigen::Index>(n), 8);
    for (std::size_t i = 0; i < n; ++i) {
      for (int k = 0; k < 8; ++k) {
        m(static_cast<Eigen::Index>(i), k) = rows[i][static_cast<std::size_t>(k)];
        mf(static_cast<Eigen::Index>(i), k) = static_cast<float>(rows[i][static_cast<std::size_t>(k)]);
      }
    }
    const double tau = 0.4 + 0.1 * static_cast<double>(round % 5);
    const auto comps = candidate_components(m, tau);
    const std::set<std::vector<std::size_t>> got(comps.begin(), comps.end());
    EXPECT_EQ(got, similarity_components(rows, tau)) << "round " << round;
    // Listed by smallest member.
    for (std::size_t i = 1; i < comps.size(); ++i) EXPECT_LT(comps[i - 1].front(), comps[i].front());
    // Single precision yields a partition of the same rows.
    std::size_t total = 0;
    for (const auto& c : candidate_components(mf, static_cast<float>(tau))) total += c.size();
    EXPECT_EQ(total, n);
  }
}

TEST(Dedup, CuratorDecidesMerges) {
  const Embedding e1 = Embedding::Unit(3, 0);
  Embedding e2(3);
  e2 << 1, 0.1, 0;
  const Embedding e3 = Embedding::Unit(3, 2);
  const std::vector<DedupItem> items{{"nyc", "New York City", "", e1}, {"ny", "NYC", "", e2}, {"paris", "Paris", "", e3}};

  LlmClient no(std::make_shared<ScriptedMock>());
  const auto kept = dedup_entities(items, 0.6, no, prompts());
  ASSERT_EQ(kept.candidates.size(), 1u);
  EXPECT_EQ(kept.clusters.size(), 3u);

  auto yes = std::make_shared<ScriptedMock>();
  yes->set_default(LlmStage::merge_confirm, fence("merge: nyc, ny\n"));
  LlmClient llm(yes);
  const auto merged = dedup_entities(items, 0.6, llm, prompts());
  ASSERT_EQ(merged.clusters.size(), 2u);
  const auto& big = merged.clusters[0].members.size() == 2 ? merged.clusters[0] : merged.clusters[1];
  EXPECT_EQ(big.canonical, "ny");
  EXPECT_EQ(big.aliases, std::vector<std::string>{"New York City"});

  auto rogue = std::make_shared<ScriptedMock>();
  rogue->set_default(LlmStage::merge_confirm, fence("merge: nyc, paris\n"));
  LlmClient llm2(rogue);
  EXPECT_FALSE(dedup_entities(items, 0.6, llm2, prompts()).warnings.empty());
  EXPECT_THROW(dedup_entities(items, 0.0, llm2, prompts()), ConfigError);
}

TEST(Dedup, ApplyMergesRepointsRelations) {
  const auto index = load_index(fixture("tesla/index.ndjson"));
  const std::vector<MergeCluster> clusters{{{"spacex", "tesla"}, "spacex", {"Tesla"}}};
  const auto merged = apply_merges(index, clusters);
  EXPECT_EQ(merged.entity_count(), index.entity_count() - 1);
  EXPECT_FALSE(merged.find_entity("tesla"));
  for (const auto& r : merged.relations()) {
    EXPECT_NE(r.src, "tesla");
    EXPECT_NE(r.dst, "tesla");
  }
  const auto& sx = merged.entity(merged.entity_index("spacex"));
  EXPECT_NE(std::find(sx.aliases.begin(), sx.aliases.end(), "Tesla"), sx.aliases.end());
}

TEST(Relabel, RetriesBatchWithUnknownLabel) {
  const auto index = load_index(fixture("tesla/index.ndjson"));
  const std::vector<Entity> entities(index.entities().begin(), index.entities().end());

  class FirstBad final : public LlmBackend {
   public:
    std::string generate(const LlmRequest& req) override {
      if (calls++ == 0) return fence("entity: " + req.payload["entities"][0]["id"].get<std::string>() + " | wizard\n");
      return auto_reply(req);
    }
    int calls = 0;
  };
  auto backend = std::make_shared<FirstBad>();
  LlmClient llm(backend);
  const auto r = relabel_types(entities, index.schema(), llm, prompts(), 4, 2);
  EXPECT_EQ(r.batches, 2u);
  EXPECT_EQ(r.calls, 3u);
  ASSERT_EQ(r.decisions.size(), entities.size());
  const auto relabeled = apply_relabel(index, r);
  EXPECT_EQ(relabeled.entity(relabeled.entity_index("tesla")).entity_type, "organization");

  LlmClient stuck(std::make_shared<FixedBackend>(fence("entity: ghost | person\n")));
  EXPECT_THROW(relabel_types(entities, index.schema(), stuck, prompts(), 10, 1), ProviderError);
}

TEST(BuildIndex, TriplesToLoadableIndex) {
  const auto prep = load_prep_schema(fixture("metaqa_small/schema.json"));
  const auto triples = load_triples(fixture("metaqa_small/kb.txt"));
  LlmClient llm(std::make_shared<ScriptedMock>());
  MockEmbedder embedder(64, 7);
  BuildReport report;
  BuildOptions options;
  options.workers = 4;
  const auto index = build_index(triples, prep, llm, embedder, prompts(), options, report);
  EXPECT_TRUE(report.failures.empty());
  EXPECT_EQ(index.relation_count(), 30u);
  EXPECT_EQ(index.entity_count(), index.chunks().size());
  for (const auto& e : index.entities()) {
    ASSERT_TRUE(e.embedding);
    EXPECT_EQ(e.embedding->size(), 64);
  }
  std::ostringstream out;
  write_index(out, index);
  std::istringstream in(out.str());
  const auto again = parse_index(in);
  EXPECT_EQ(again.entity_count(), index.entity_count());

  BuildReport report2;
  options.workers = 1;
  LlmClient llm2(std::make_shared<ScriptedMock>());
  std::ostringstream out2;
  write_index(out2, build_index(triples, prep, llm2, embedder, prompts(), options, report2));
  EXPECT_EQ(out.str(), out2.str());
}

TEST(BuildIndex, SelfLoopsAreReported) {
  const auto prep = load_prep_schema(fixture("metaqa_small/schema.json"));
  LlmClient llm(std::make_shared<ScriptedMock>());
  MockEmbedder embedder(32, 1);
  BuildReport report;
  BuildOptions options;
  options.dedup = false;
  const auto index =
      build_index({{"A", "directed_by", "A"}, {"A", "directed_by", "B"}}, prep, llm, embedder, prompts(), options, report);
  EXPECT_EQ(index.relation_count(), 1u);
  ASSERT_EQ(report.failures.size(), 1u);
  EXPECT_EQ(report.failures[0]["stage"], "triples");
}
