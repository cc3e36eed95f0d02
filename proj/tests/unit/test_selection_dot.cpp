#include <gtest/gtest.h>

#include "dotrag/dot_builder.hpp"
#include "dotrag/selection.hpp"
#include "test_support.hpp"

using namespace dotrag;
using namespace dotrag::testing;

namespace {

struct Tesla {
  GraphIndex index = load_index(fixture("tesla/index.ndjson"));
  MockEmbedder embedder{256, 0};
  IndexStores stores = build_global_stores(index, embedder);
  PromptLibrary prompts{PromptLibrary::default_dir()};
};

}  // namespace

TEST(Selection, ExtractAndRoute) {
  Tesla t;
  auto mock = std::make_shared<ScriptedMock>();
  mock->add_rule({LlmStage::concept_extraction,
                  {"Query: Who leads Tesla?"},
                  fence("mode: low_only\nlow: Tesla | the company\nhigh: corporate leadership\n")});
  LlmClient llm(mock);
  const auto ex = extract_concepts("Who leads Tesla?", t.index.schema(), llm, t.prompts);
  ASSERT_EQ(ex.low.size(), 1u);
  EXPECT_EQ(ex.low[0].query_text(), "Tesla the company");
  // low_only drops the high concepts.
  const auto accepted = accepted_concepts(ex, "Who leads Tesla?");
  ASSERT_EQ(accepted.size(), 1u);
  EXPECT_EQ(accepted[0].level, ConceptLevel::low);

  ConceptExtraction both = ex;
  both.low_and_high = true;
  EXPECT_EQ(accepted_concepts(both, "q").size(), 2u);
}

TEST(Selection, EmptyExtractionFallsBackToWholeQuery) {
  const auto accepted = accepted_concepts(ConceptExtraction{}, "Who is the CEO of Tesla?");
  ASSERT_EQ(accepted.size(), 1u);
  EXPECT_EQ(accepted[0].level, ConceptLevel::high);
  EXPECT_EQ(accepted[0].query_text(), "Who is the CEO of Tesla?");
}

TEST(Selection, GroundingMatchesExhaustiveScan) {
  Tesla t;
  GroundingParams params;
  const std::vector<Concept> concepts{{"Tesla", "the electric vehicle company Tesla", ConceptLevel::low},
                                      {"leadership", "people who run companies", ConceptLevel::high}};
  const auto map = ground_concepts(concepts, t.index, t.stores.entities, t.embedder, params);
  ASSERT_EQ(map.size(), 2u);

  for (std::size_t c = 0; c < 2; ++c) {
    const Embedding q = t.embedder.embed(concepts[c].query_text());
    std::vector<std::pair<double, std::string>> scan;
    for (const auto& e : t.index.entities()) {
      scan.emplace_back(cosine_similarity(t.embedder.embed(entity_embedding_text(e)), q), e.id);
    }
    std::sort(scan.begin(), scan.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::vector<std::string> want;
    for (const auto& [score, id] : scan) {
      if (c == 0 && score < params.tau) break;
      if (want.size() == (c == 0 ? params.low_cap : params.k_high)) break;
      want.push_back(id);
    }
    std::vector<std::string> got;
    for (auto a : map[c].anchors) got.push_back(t.index.entity(a).id);
    EXPECT_EQ(got, want) << "concept " << c;
  }
  EXPECT_EQ(t.index.entity(map[0].anchors.front()).id, "tesla");
}

TEST(Selection, GroundingParamsValidate) {
  GroundingParams p;
  p.tau = 1.5;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.k_high = 0;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(DotBuilder, RulesDropUnknownTypes) {
  Tesla t;
  auto mock = std::make_shared<ScriptedMock>();
  mock->set_default(LlmStage::heuristic_generation,
                    fence("intermediate_rule: i\nterminal_rule: r\nallowed_types: person, spaceship\n"));
  LlmClient llm(mock);
  const Concept c{"Tesla", "", ConceptLevel::low};
  const auto rules = generate_rules("q", c, {t.index.entity_index("tesla")}, t.index, llm, t.prompts);
  EXPECT_EQ(rules.allowed_types, (std::vector<std::string>{"person"}));
  EXPECT_EQ(rules.dropped_types, (std::vector<std::string>{"spaceship"}));
}

TEST(DotBuilder, WorkspaceIsFilteredSubgraphWithLocalStore) {
  Tesla t;
  auto mock = std::make_shared<ScriptedMock>();
  mock->set_default(LlmStage::heuristic_generation,
                    fence("intermediate_rule: i\nterminal_rule: r\nallowed_types: person, organization\n"));
  LlmClient llm(mock);
  const Concept c{"Tesla", "", ConceptLevel::low};
  const auto tesla = t.index.entity_index("tesla");
  const auto dot = build_dot(3, "q", c, {tesla, tesla}, t.index, t.stores, llm, t.prompts, 3);
  EXPECT_EQ(dot.dot_id, 3u);
  EXPECT_EQ(dot.anchors, std::vector<EntityIndex>{tesla});
  const auto want = expand_hops(t.index, std::vector<std::string>{"tesla"}, 3, {"person", "organization"});
  EXPECT_EQ(dot.subgraph.entity_ids(), want.entity_ids());
  EXPECT_EQ(dot.subgraph.entity_ids(), (std::vector<std::string>{"elon_musk", "jb_straubel", "spacex", "tesla"}));
  EXPECT_EQ(dot.local.entities.size(), dot.subgraph.size());
  EXPECT_TRUE(dot.is_anchor(tesla));
  EXPECT_THROW(build_dot(0, "q", c, {}, t.index, t.stores, llm, t.prompts, 3), Error);
}
