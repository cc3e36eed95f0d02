#include <gtest/gtest.h>

#include "dotrag/structured.hpp"
#include "test_support.hpp"

using namespace dotrag;
using dotrag::testing::fence;

TEST(Text, TrimNormalizeSplit) {
  EXPECT_EQ(text::trim("  a b \n"), "a b");
  EXPECT_EQ(text::normalize("  Elon   MUSK\t"), "elon musk");
  EXPECT_EQ(text::split("a,b,,c", ','), (std::vector<std::string>{"a", "b", "", "c"}));
  EXPECT_EQ(text::join({"x", "y"}, ", "), "x, y");
  EXPECT_EQ(text::tokenize("The CEO's car-2!"), (std::vector<std::string>{"the", "ceo", "s", "car", "2"}));
}

TEST(Structured, StageNamesRoundTrip) {
  for (auto s : kAllStages) {
    auto back = stage_from_name(stage_name(s));
    ASSERT_TRUE(back);
    EXPECT_EQ(*back, s);
  }
  EXPECT_FALSE(stage_from_name("nope"));
}

TEST(Structured, LastResultBlockWins) {
  const std::string raw = "chatter\n```result\nverdict: partial\n```\nmore\n```result\nverdict: complete\n```";
  auto block = extract_block(raw);
  ASSERT_TRUE(block);
  EXPECT_EQ(*block->first("verdict"), "complete");
  EXPECT_FALSE(extract_block("```json\n{}\n```"));
}

TEST(Structured, KeysAreCaseInsensitiveAndRepeat) {
  auto block = extract_block("```result\nLow: a | gloss a\nlow: b\n```");
  ASSERT_TRUE(block);
  EXPECT_EQ(block->all("low").size(), 2u);
}

TEST(Structured, ConceptResponse) {
  auto r = std::get<ConceptResponse>(parse_stage_response(
      LlmStage::concept_extraction, fence("mode: low_and_high\nlow: Tesla | the company\nhigh: leadership\n")));
  EXPECT_TRUE(r.low_and_high);
  ASSERT_EQ(r.low.size(), 1u);
  EXPECT_EQ(r.low[0].span, "Tesla");
  EXPECT_EQ(r.low[0].gloss, "the company");
  ASSERT_EQ(r.high.size(), 1u);
  EXPECT_EQ(r.high[0].gloss, "");
  EXPECT_THROW(parse_stage_response(LlmStage::concept_extraction, fence("mode: sideways\n")), ResponseParseError);
}

TEST(Structured, RulesWildcardMeansNoFilter) {
  auto r = std::get<RulesResponse>(parse_stage_response(
      LlmStage::heuristic_generation, fence("intermediate_rule: a\nterminal_rule: b\nallowed_types: *\n")));
  EXPECT_TRUE(r.allowed_types.empty());
  auto r2 = std::get<RulesResponse>(parse_stage_response(
      LlmStage::heuristic_generation, fence("intermediate_rule: a\nterminal_rule: b\nallowed_types: person, movie\n")));
  EXPECT_EQ(r2.allowed_types, (std::vector<std::string>{"person", "movie"}));
  EXPECT_THROW(parse_stage_response(LlmStage::heuristic_generation, fence("terminal_rule: b\n")), ResponseParseError);
}

TEST(Structured, VerdictForms) {
  auto single = std::get<VerdictResponse>(parse_stage_response(LlmStage::path_judgment, fence("verdict: Complete\n")));
  ASSERT_EQ(single.verdicts.size(), 1u);
  EXPECT_EQ(single.verdicts[0].second, PathStatus::complete);
  auto batch = std::get<VerdictResponse>(
      parse_stage_response(LlmStage::path_judgment, fence("verdict: 1: partial\nverdict: 3 = irrelevant\n")));
  ASSERT_EQ(batch.verdicts.size(), 2u);
  EXPECT_EQ(batch.verdicts[1].first, 3);
  EXPECT_EQ(batch.verdicts[1].second, PathStatus::irrelevant);
  EXPECT_THROW(parse_stage_response(LlmStage::path_judgment, fence("verdict: maybe\n")), ResponseParseError);
  EXPECT_THROW(parse_stage_response(LlmStage::path_judgment, "no block at all"), ResponseParseError);
}

TEST(Structured, PairwiseNeedsEveryDimension) {
  auto r = std::get<PairwiseResponse>(parse_stage_response(
      LlmStage::judge_pairwise,
      fence("comprehensiveness: Answer 1\nlogicality: 2\nrelevance: tie\ncoherence: 1\noverall: answer 2\n")));
  EXPECT_EQ(r.winners[0], Winner::first);
  EXPECT_EQ(r.winners[1], Winner::second);
  EXPECT_EQ(r.winners[2], Winner::tie);
  EXPECT_EQ(r.winners[4], Winner::second);
  EXPECT_THROW(parse_stage_response(LlmStage::judge_pairwise, fence("overall: 1\n")), ResponseParseError);
}

TEST(Structured, FreeTextStagesRejectEmpty) {
  EXPECT_THROW(parse_stage_response(LlmStage::final_answer, "   \n"), ResponseParseError);
  auto r = std::get<TextResponse>(parse_stage_response(LlmStage::final_answer, "  Elon Musk.  "));
  EXPECT_EQ(r.text, "Elon Musk.");
}

TEST(Structured, MergeAndRelabel) {
  auto m = std::get<MergeResponse>(parse_stage_response(LlmStage::merge_confirm, fence("merge: a, b\nmerge: c\n")));
  ASSERT_EQ(m.groups.size(), 1u);
  EXPECT_EQ(m.groups[0], (std::vector<std::string>{"a", "b"}));
  auto r = std::get<RelabelResponse>(parse_stage_response(LlmStage::type_relabel, fence("entity: x | person\n")));
  ASSERT_EQ(r.decisions.size(), 1u);
  EXPECT_EQ(r.decisions[0].second, "person");
  EXPECT_THROW(parse_stage_response(LlmStage::type_relabel, fence("entity: x person\n")), ResponseParseError);
}
