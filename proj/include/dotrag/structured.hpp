#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "dotrag/common.hpp"

namespace dotrag {

enum class LlmStage {
  concept_extraction,
  heuristic_generation,
  path_judgment,
  followup_queries,
  final_answer,
  judge_pairwise,
  textualize_chunk,
  entity_summary,
  relation_describe,
  merge_confirm,
  type_relabel,
};

inline constexpr std::array kAllStages = {
    LlmStage::concept_extraction, LlmStage::heuristic_generation, LlmStage::path_judgment,
    LlmStage::followup_queries,   LlmStage::final_answer,         LlmStage::judge_pairwise,
    LlmStage::textualize_chunk,   LlmStage::entity_summary,       LlmStage::relation_describe,
    LlmStage::merge_confirm,      LlmStage::type_relabel,
};

std::string_view stage_name(LlmStage stage);
std::optional<LlmStage> stage_from_name(std::string_view name);

enum class PathStatus { unjudged, irrelevant, partial, complete };

std::string_view status_name(PathStatus status);
std::optional<PathStatus> status_from_name(std::string_view name);

// Structured replies arrive as a fenced block labelled "result":
//
//   ```result
//   key: value
//   key: value
//   ```
//
// Text around the block is ignored. Keys are case-insensitive and may repeat.
struct KvBlock {
  std::vector<std::pair<std::string, std::string>> entries;

  const std::string* first(std::string_view key) const;
  std::vector<std::string> all(std::string_view key) const;
};

/// Last ```result block in `raw`, if any.
std::optional<KvBlock> extract_block(std::string_view raw);

struct ConceptItem {
  std::string span;
  std::string gloss;
};

struct ConceptResponse {
  bool low_and_high = false;
  std::vector<ConceptItem> low;
  std::vector<ConceptItem> high;
};

struct RulesResponse {
  std::string intermediate_rule;
  std::string terminal_rule;
  // Empty means wildcard.
  std::vector<std::string> allowed_types;
};

struct VerdictResponse {
  // (1-based path number, verdict). Unnumbered verdicts get number 1.
  std::vector<std::pair<int, PathStatus>> verdicts;
};

struct FollowupResponse {
  std::vector<std::string> queries;
};

struct TextResponse {
  std::string text;
};

enum class Winner { first, second, tie };

inline constexpr std::array<std::string_view, 5> kJudgeDimensions = {"comprehensiveness", "logicality", "relevance",
                                                                      "coherence", "overall"};

struct PairwiseResponse {
  std::array<Winner, 5> winners{Winner::tie, Winner::tie, Winner::tie, Winner::tie, Winner::tie};
};

struct SummaryResponse {
  std::string entity_type;
  std::string description;
};

struct RelationDescriptions {
  std::vector<std::string> descriptions;
};

struct MergeResponse {
  std::vector<std::vector<std::string>> groups;
};

struct RelabelResponse {
  std::vector<std::pair<std::string, std::string>> decisions;
};

using StageResponse = std::variant<ConceptResponse, RulesResponse, VerdictResponse, FollowupResponse, TextResponse,
                                   PairwiseResponse, SummaryResponse, RelationDescriptions, MergeResponse,
                                   RelabelResponse>;

/// Parses `raw` into the shape `stage` expects. Throws ResponseParseError.
StageResponse parse_stage_response(LlmStage stage, std::string_view raw);

}  // namespace dotrag
