#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dotrag/graph_store.hpp"
#include "dotrag/prompts.hpp"
#include "dotrag/providers.hpp"

namespace dotrag {

struct GroundTruth {
  std::string id;
  std::string question;
  std::string start_entity;
  std::vector<std::string> gold_entities;
};

/// NDJSON records {id, question, start_entity, gold_entities}. Empty input is
/// an error.
std::vector<GroundTruth> parse_ground_truth(std::istream& in);
std::vector<GroundTruth> load_ground_truth(const std::filesystem::path& path);
/// Throws ReferentialError for ids missing from `index`.
void validate_ground_truth(const std::vector<GroundTruth>& truth, const GraphIndex& index);

/// Retrieved nodes plus, for every retrieved chunk, its center and the
/// entities it links to.
std::set<std::string> resolve_chunks_to_nodes(const std::vector<std::string>& chunk_ids,
                                              const std::vector<std::string>& node_ids, const GraphIndex& index);

struct RetrievalScores {
  double recall = 0;
  double precision = 0;
  double f1 = 0;
};

/// Precision is 0 for empty R; f1 is 0 when P + R is 0. Empty G throws.
RetrievalScores score_retrieval(const std::set<std::string>& retrieved, const std::set<std::string>& gold);

struct QueryEval {
  std::string id;
  RetrievalScores scores;
  std::size_t retrieved = 0;
  std::size_t gold = 0;
  std::size_t hits = 0;
};

struct EvalReport {
  std::vector<QueryEval> rows;
  RetrievalScores mean;

  static EvalReport from_rows(std::vector<QueryEval> rows);
  nlohmann::json to_json() const;
  std::string table() const;
};

// ---------------------------------------------------------------------------
// Pairwise judging

inline constexpr std::size_t kDimensions = 5;

/// Winner per dimension, expressed against the caller's (a, b) order.
struct JudgeRound {
  std::array<Winner, kDimensions> winners{};
  bool swapped = false;
  bool parse_failed = false;
};

/// One call in (a, b) order, plus one in (b, a) order when `swap` is set.
std::vector<JudgeRound> judge_pair(const std::string& query, const std::string& answer_a,
                                   const std::string& answer_b, LlmClient& llm, const PromptLibrary& prompts,
                                   bool swap);

struct JudgeTally {
  std::array<std::size_t, kDimensions> wins_a{};
  std::array<std::size_t, kDimensions> wins_b{};
  std::array<std::size_t, kDimensions> ties{};
  std::size_t rounds = 0;
  std::size_t parse_failures = 0;

  void add(const JudgeRound& round);
  double win_rate_a(std::size_t d) const;
  double win_rate_b(std::size_t d) const;
  nlohmann::json to_json() const;
  std::string table() const;
};

struct AnswerRecord {
  std::string id;
  std::string question;
  std::string answer;
};

std::vector<AnswerRecord> load_answers(const std::filesystem::path& path);

}  // namespace dotrag
