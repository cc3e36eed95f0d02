#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "test_support.hpp"

using namespace dotrag;
using namespace dotrag::testing;

namespace {

const char* kSchema =
    R"({"kind":"schema","graph_description":"toy","entity_types":[{"label":"person","definition":"p"},{"label":"movie","definition":"m"}]})";

GraphIndex parse(const std::string& body) {
  std::istringstream in(std::string(kSchema) + "\n" + body);
  return parse_index(in);
}

std::string entity(const std::string& id, const std::string& type) {
  return R"({"kind":"entity","id":")" + id + R"(","name":")" + id + R"(","entity_type":")" + type +
         R"(","description":"about )" + id + R"("})" + "\n";
}

std::string relation(const std::string& id, const std::string& s, const std::string& d) {
  return R"({"kind":"relation","id":")" + id + R"(","src":")" + s + R"(","dst":")" + d +
         R"(","description":")" + s + " to " + d + R"("})" + "\n";
}

std::vector<std::string> ids(const Subgraph& sub) { return sub.entity_ids(); }

}  // namespace

TEST(GraphStore, LoadsTeslaFixture) {
  const auto index = load_index(fixture("tesla/index.ndjson"));
  EXPECT_EQ(index.entity_count(), 6u);
  EXPECT_EQ(index.relation_count(), 5u);
  // Entities are sorted by id.
  for (std::size_t i = 1; i < index.entity_count(); ++i) {
    EXPECT_LT(index.entities()[i - 1].id, index.entities()[i].id);
  }
  const auto tesla = index.entity_index("tesla");
  EXPECT_EQ(index.incident(tesla).size(), 4u);
  EXPECT_FALSE(index.chunks_mentioning(tesla).empty());
}

TEST(GraphStore, RejectsBadRecords) {
  EXPECT_THROW(parse(entity("a", "person") + relation("r1", "a", "ghost")), ReferentialError);
  EXPECT_THROW(parse(entity("a", "person") + entity("a", "movie")), ReferentialError);
  EXPECT_THROW(parse(entity("a", "alien")), SchemaError);
  EXPECT_THROW(parse(entity("a", "person") + relation("r1", "a", "a")), ReferentialError);
  EXPECT_THROW(parse("{not json}\n"), ParseError);
  EXPECT_THROW(load_index("/nonexistent/index.ndjson"), Error);
}

TEST(GraphStore, UnsureTypeIsAlwaysAccepted) {
  EXPECT_NO_THROW(parse(entity("a", "unsure")));
}

TEST(GraphStore, ParseErrorCarriesLine) {
  try {
    parse(entity("a", "person") + "garbage\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(GraphStore, WriteThenParseRoundTrips) {
  const auto index = load_index(fixture("tesla/index.ndjson"));
  std::ostringstream out;
  write_index(out, index);
  std::istringstream in(out.str());
  const auto again = parse_index(in);
  std::ostringstream out2;
  write_index(out2, again);
  EXPECT_EQ(out.str(), out2.str());
  EXPECT_EQ(again.entity_count(), index.entity_count());
  EXPECT_EQ(again.chunks().size(), index.chunks().size());
}

TEST(GraphStore, ParallelRelationsCollapseInSubgraph) {
  const auto index = parse(entity("a", "person") + entity("b", "movie") + relation("r1", "a", "b") +
                           relation("r2", "b", "a"));
  const auto whole = Subgraph::whole(index);
  EXPECT_EQ(whole.neighbors(0).size(), 1u);
  EXPECT_EQ(whole.relations().size(), 2u);
}

TEST(ExpandHops, TypeFilterBlocksPathsThroughFilteredNodes) {
  // a(person) - m(movie) - b(person)
  const auto index = parse(entity("a", "person") + entity("b", "person") + entity("m", "movie") +
                           relation("r1", "a", "m") + relation("r2", "m", "b"));
  EXPECT_EQ(ids(expand_hops(index, std::vector<std::string>{"a"}, 2, {"person"})), (std::vector<std::string>{"a"}));
  EXPECT_EQ(ids(expand_hops(index, std::vector<std::string>{"a"}, 2, {})),
            (std::vector<std::string>{"a", "b", "m"}));
  EXPECT_EQ(ids(expand_hops(index, std::vector<std::string>{"a"}, 1, {})), (std::vector<std::string>{"a", "m"}));
  // Seeds are kept even when their own type is filtered out.
  EXPECT_EQ(ids(expand_hops(index, std::vector<std::string>{"m"}, 1, {"person"})),
            (std::vector<std::string>{"a", "b", "m"}));
}

TEST(ExpandHops, UnknownSeedThrows) {
  const auto index = parse(entity("a", "person"));
  EXPECT_THROW(expand_hops(index, std::vector<std::string>{"zz"}, 1, {}), ReferentialError);
}

TEST(ExpandHops, MatchesLayeredOracleOnRandomGraphs) {
  const std::vector<std::string> types{"person", "movie", "place"};
  std::mt19937_64 rng(11);
  for (int round = 0; round < 60; ++round) {
    const std::size_t n = 1 + rng() % 30;
    const auto g = random_graph(rng, n, 2.5 / static_cast<double>(n), types, false);
    const auto index = to_index(g, rng, types);
    const std::set<std::size_t> seeds{rng() % n};
    const std::set<std::string> allowed{types[rng() % types.size()]};
    for (unsigned h = 1; h <= 3; ++h) {
      std::vector<EntityIndex> s;
      for (auto x : seeds) s.push_back(EntityIndex{static_cast<std::uint32_t>(x)});
      const auto sub = expand_hops(index, s, h, std::vector<std::string>(allowed.begin(), allowed.end()));
      std::set<std::size_t> got;
      for (auto e : sub.nodes()) got.insert(e.value);
      EXPECT_EQ(got, typed_reach(g, seeds, h, allowed)) << "round " << round << " h " << h;
    }
  }
}

TEST(ExpandHops, MonotoneInHops) {
  const std::vector<std::string> types{"person", "movie"};
  std::mt19937_64 rng(12);
  for (int round = 0; round < 30; ++round) {
    const auto g = random_graph(rng, 20, 0.12, types, false);
    const auto index = to_index(g, rng, types);
    std::vector<EntityIndex> seed{EntityIndex{0}};
    std::size_t prev = 0;
    for (unsigned h = 1; h <= 4; ++h) {
      const auto size = expand_hops(index, seed, h, {}).size();
      EXPECT_GE(size, prev);
      prev = size;
    }
  }
}
