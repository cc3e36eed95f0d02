#include <gtest/gtest.h>

#include "dotrag/aggregate.hpp"
#include "dotrag/engine.hpp"
#include "test_support.hpp"

using namespace dotrag;
using namespace dotrag::testing;

namespace {

EntityIndex at(std::uint32_t i) { return EntityIndex{i}; }

RelPath path(std::initializer_list<std::uint32_t> ids) {
  RelPath p;
  for (auto i : ids) p.nodes.push_back(at(i));
  return p;
}

Engine tesla_engine(const GraphIndex& index, unsigned parallel) {
  ProviderPair providers{
      std::make_shared<LlmClient>(std::make_shared<ScriptedMock>(ScriptedMock::from_file(fixture("tesla/script.json")))),
      std::make_shared<MockEmbedder>(256, 0)};
  EngineParams params;
  params.parallel = parallel;
  return Engine(index, providers, PromptLibrary(PromptLibrary::default_dir()), params);
}

}  // namespace

TEST(Aggregate, UnionKeepsFirstOccurrence) {
  const auto out = aggregate_paths({{path({1, 2}), path({1, 3})}, {path({1, 3}), path({4})}});
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[1].nodes, path({1, 3}).nodes);
  EXPECT_EQ(out[2].nodes, path({4}).nodes);
  EXPECT_TRUE(aggregate_paths({}).empty());
}

TEST(Aggregate, RankChunksMatchesScan) {
  const auto index = load_index(fixture("tesla/index.ndjson"));
  MockEmbedder embedder(256, 0);
  ChunkEmbeddingCache cache;
  const RelPath p{{index.entity_index("tesla"), index.entity_index("elon_musk")}, "", PathStatus::complete};
  const Embedding q = embedder.embed("Who is the CEO of Tesla?");
  const auto ranked = rank_chunks({p}, index, q, embedder, 10, cache);

  std::set<std::string> linked;
  for (auto e : p.nodes) {
    for (auto c : index.chunks_mentioning(e)) linked.insert(index.chunk(c).id);
  }
  ASSERT_EQ(ranked.size(), linked.size());
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& chunk = index.chunk(*index.find_chunk(ranked[i].chunk_id));
    EXPECT_NEAR(ranked[i].score, cosine_similarity(embedder.embed(chunk.text), q), 1e-12);
    if (i > 0) {
      EXPECT_GE(ranked[i - 1].score, ranked[i].score);
    }
  }
  EXPECT_EQ(rank_chunks({p}, index, q, embedder, 2, cache).size(), 2u);
  EXPECT_TRUE(rank_chunks({}, index, q, embedder, 5, cache).empty());
}

TEST(Aggregate, EmptyEvidenceIsMarked) {
  const auto index = load_index(fixture("tesla/index.ndjson"));
  auto mock = std::make_shared<ScriptedMock>();
  mock->add_rule({LlmStage::final_answer, {std::string(kNoEvidenceMarker)}, "I cannot tell."});
  LlmClient llm(mock);
  const PromptLibrary prompts(PromptLibrary::default_dir());
  EXPECT_EQ(generate_answer("q?", {}, {}, index, llm, prompts, 100), "I cannot tell.");
}

TEST(EngineTest, TeslaBundle) {
  const auto index = load_index(fixture("tesla/index.ndjson"));
  auto engine = tesla_engine(index, 1);
  const auto bundle = engine.query("Who is the CEO of Tesla?");
  EXPECT_EQ(bundle.answer, "Elon Musk is the CEO of Tesla.");
  ASSERT_EQ(bundle.paths.size(), 1u);
  EXPECT_EQ(bundle.retrieved_nodes, (std::vector<std::string>{"elon_musk", "tesla"}));
  ASSERT_EQ(bundle.dots.size(), 1u);
  EXPECT_EQ(bundle.dots[0].anchors, std::vector<std::string>{"tesla"});
  // Logical calls: extraction, per-DOT calls, final answer.
  std::uint64_t bound = 2;
  for (const auto& d : bundle.dots) {
    EXPECT_LE(d.llm_calls, engine.params().search.call_bound());
    bound += engine.params().search.call_bound();
  }
  EXPECT_LE(bundle.llm_calls, bound);
  EXPECT_EQ(bundle.llm_calls, 7u);
}

TEST(EngineTest, ParallelDotsGiveSameBundle) {
  const auto index = load_index(fixture("tesla/index.ndjson"));
  auto run_with = [&](unsigned parallel) {
    // High concepts ground through top-k, so each one yields a DOT.
    auto mock = std::make_shared<ScriptedMock>();
    mock->set_default(LlmStage::concept_extraction,
                      fence("mode: low_and_high\nhigh: electric cars\nhigh: rockets\nhigh: company executives\n"));
    mock->set_default(LlmStage::path_judgment, fence("verdict: partial\n"));
    ProviderPair providers{std::make_shared<LlmClient>(mock), std::make_shared<MockEmbedder>(256, 0)};
    EngineParams params;
    params.parallel = parallel;
    params.grounding.k_high = 2;
    Engine engine(index, providers, PromptLibrary(PromptLibrary::default_dir()), params);
    const auto bundle = engine.query("Tell me about Tesla.");
    EXPECT_EQ(bundle.dots.size(), 3u);
    return bundle.to_json(index).dump();
  };
  EXPECT_EQ(run_with(1), run_with(4));
}

TEST(EngineTest, ParamsValidate) {
  EngineParams p;
  p.n_chunks = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.parallel = 0;
  EXPECT_THROW(p.validate(), ConfigError);
}
