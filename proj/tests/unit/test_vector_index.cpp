#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "dotrag/vector_index.hpp"
#include "test_support.hpp"

using namespace dotrag;

namespace {

template <typename Scalar>
BasicVectorStore<Scalar> random_store(std::mt19937_64& rng, std::size_t n, int dim, bool coarse) {
  std::normal_distribution<double> normal(0, 1);
  std::uniform_int_distribution<int> small(-2, 2);
  std::vector<typename BasicVectorStore<Scalar>::Item> items;
  for (std::size_t i = 0; i < n; ++i) {
    EmbeddingT<Scalar> v(dim);
    do {
      // Coarse integer vectors produce exact score ties.
      for (int k = 0; k < dim; ++k) v(k) = static_cast<Scalar>(coarse ? small(rng) : normal(rng));
    } while (v.norm() == 0);
    items.push_back({"item" + std::to_string(1000 + (n - i)), v});
  }
  return BasicVectorStore<Scalar>(dim, std::move(items));
}

// Exhaustive scan: every score, full sort by (score desc, id asc).
template <typename Scalar>
std::vector<std::string> scan_order(const BasicVectorStore<Scalar>& store, const EmbeddingT<Scalar>& q) {
  std::vector<std::pair<Scalar, std::string>> all;
  for (const auto& id : store.ids()) {
    const auto v = *store.values(id);
    all.emplace_back(cosine_similarity(v, q), id);
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::string> out;
  for (auto& [_, id] : all) out.push_back(id);
  return out;
}

}  // namespace

TEST(VectorStore, TopKMatchesExhaustiveScan) {
  std::mt19937_64 rng(21);
  for (int round = 0; round < 80; ++round) {
    const bool coarse = round % 2 == 0;
    const auto store = random_store<double>(rng, 1 + rng() % 40, 6, coarse);
    EmbeddingT<double> q(6);
    do {
      for (int k = 0; k < 6; ++k) q(k) = coarse ? static_cast<double>(static_cast<int>(rng() % 5) - 2) : 0.3 * k - 1;
    } while (q.norm() == 0);
    const auto order = scan_order(store, q);
    for (std::size_t k : {std::size_t{1}, std::size_t{3}, std::size_t{100}}) {
      const auto hits = store.top_k(q, k);
      ASSERT_EQ(hits.size(), std::min(k, store.size()));
      // Ids agree up to ties that differ only in rounding; compare scores too.
      for (std::size_t i = 0; i < hits.size(); ++i) {
        EXPECT_NEAR(hits[i].score, cosine_similarity(*store.values(order[i]), q), 1e-12);
        if (i > 0) {
          EXPECT_TRUE(hits[i - 1].score > hits[i].score ||
                      (hits[i - 1].score == hits[i].score && hits[i - 1].item_id < hits[i].item_id));
        }
      }
    }
  }
}

TEST(VectorStore, AboveThresholdMatchesFilter) {
  std::mt19937_64 rng(22);
  for (int round = 0; round < 50; ++round) {
    const auto store = random_store<double>(rng, 30, 5, false);
    EmbeddingT<double> q = EmbeddingT<double>::Ones(5);
    const double tau = -0.5 + (rng() % 100) / 100.0;
    const auto hits = store.above_threshold(q, tau);
    std::size_t expected = 0;
    for (const auto& id : store.ids()) expected += cosine_similarity(*store.values(id), q) >= tau;
    EXPECT_EQ(hits.size(), expected);
    for (const auto& h : hits) EXPECT_GE(h.score, tau);
  }
}

TEST(VectorStore, FloatInstantiation) {
  std::mt19937_64 rng(23);
  const auto store = random_store<float>(rng, 12, 4, false);
  EmbeddingT<float> q = EmbeddingT<float>::Ones(4);
  const auto hits = store.top_k(q, 12);
  ASSERT_EQ(hits.size(), 12u);
  const auto order = scan_order(store, q);
  EXPECT_NEAR(hits.front().score, cosine_similarity(*store.values(order.front()), q), 1e-5f);
}

TEST(VectorStore, ErrorsAndExclusion) {
  VectorStore store(2, {{"a", Embedding::Unit(2, 0)}, {"b", Embedding::Unit(2, 1)}});
  EXPECT_THROW(store.top_k(Embedding::Unit(3, 0), 1), DimensionError);
  EXPECT_THROW(store.top_k(Embedding::Zero(2), 1), Error);
  EXPECT_THROW(store.top_k(Embedding::Unit(2, 0), 0), Error);
  EXPECT_THROW(store.above_threshold(Embedding::Unit(2, 0), 1.5), Error);
  EXPECT_THROW(VectorStore(2, {{"a", Embedding::Zero(2)}}), Error);
  EXPECT_THROW(VectorStore(2, {{"a", Embedding::Unit(2, 0)}, {"a", Embedding::Unit(2, 1)}}), Error);
  const auto hits = store.top_k(Embedding::Unit(2, 0), 2, [](const std::string& id) { return id == "a"; });
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].item_id, "b");
}

TEST(VectorStore, SubsetAndScopedStores) {
  const auto index = load_index(dotrag::testing::fixture("tesla/index.ndjson"));
  MockEmbedder embedder(64, 3);
  const auto global = build_global_stores(index, embedder);
  EXPECT_EQ(global.entities.size(), index.entity_count());
  EXPECT_EQ(global.relations.size(), index.relation_count());
  const auto sub = expand_hops(index, std::vector<std::string>{"tesla"}, 1, {"person"});
  const auto local = scoped_store(global, sub);
  EXPECT_EQ(local.entities.ids().size(), sub.size());
  for (const auto& id : sub.entity_ids()) {
    ASSERT_TRUE(local.entities.contains(id));
    EXPECT_TRUE(local.entities.values(id)->isApprox(*global.entities.values(id)));
  }
}

TEST(MockEmbedderTest, DeterministicUnitNorm) {
  MockEmbedder a(32, 5), b(32, 5), c(32, 6);
  const auto va = a.embed("Elon Musk runs Tesla");
  EXPECT_NEAR(va.norm(), 1.0, 1e-12);
  EXPECT_EQ(va, b.embed("Elon Musk runs Tesla"));
  EXPECT_NE(va, c.embed("Elon Musk runs Tesla"));
  EXPECT_NEAR(cosine_similarity(va, a.embed("elon   MUSK runs tesla!")), 1.0, 1e-12);
  EXPECT_THROW(a.embed("   "), Error);
}
