#include "dotrag/evaluate.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>

namespace dotrag {

using json = nlohmann::json;

std::vector<GroundTruth> parse_ground_truth(std::istream& in) {
  std::vector<GroundTruth> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      GroundTruth g{j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump(),
                    j.at("question").get<std::string>(), j.value("start_entity", ""),
                    j.at("gold_entities").get<std::vector<std::string>>()};
      if (g.gold_entities.empty()) throw ParseError(lineno, "query '" + g.id + "' has no gold entities");
      out.push_back(std::move(g));
    } catch (const json::exception& e) {
      throw ParseError(lineno, std::string("ground truth: ") + e.what());
    }
  }
  if (out.empty()) throw ConfigError("ground-truth file has no queries");
  return out;
}

std::vector<GroundTruth> load_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open ground-truth file '" + path.string() + "'");
  return parse_ground_truth(in);
}

void validate_ground_truth(const std::vector<GroundTruth>& truth, const GraphIndex& index) {
  for (const auto& g : truth) {
    if (!g.start_entity.empty()) index.entity_index(g.start_entity);
    for (const auto& e : g.gold_entities) index.entity_index(e);
  }
}

std::set<std::string> resolve_chunks_to_nodes(const std::vector<std::string>& chunk_ids,
                                              const std::vector<std::string>& node_ids, const GraphIndex& index) {
  std::set<std::string> out;
  for (const auto& n : node_ids) out.insert(index.entity(index.entity_index(n)).id);
  for (const auto& c : chunk_ids) {
    const auto pos = index.find_chunk(c);
    if (!pos) throw ReferentialError("unknown chunk id '" + c + "'");
    const Chunk& chunk = index.chunk(*pos);
    if (!chunk.center_id.empty()) out.insert(chunk.center_id);
    out.insert(chunk.entity_ids.begin(), chunk.entity_ids.end());
  }
  return out;
}

RetrievalScores score_retrieval(const std::set<std::string>& retrieved, const std::set<std::string>& gold) {
  if (gold.empty()) throw Error("score_retrieval: empty gold set");
  std::size_t hits = 0;
  for (const auto& r : retrieved) hits += gold.count(r);
  RetrievalScores s;
  s.recall = static_cast<double>(hits) / static_cast<double>(gold.size());
  s.precision = retrieved.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(retrieved.size());
  s.f1 = (s.precision + s.recall) == 0 ? 0.0 : 2 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

EvalReport EvalReport::from_rows(std::vector<QueryEval> rows) {
  EvalReport r;
  r.rows = std::move(rows);
  if (!r.rows.empty()) {
    for (const auto& q : r.rows) {
      r.mean.recall += q.scores.recall;
      r.mean.precision += q.scores.precision;
      r.mean.f1 += q.scores.f1;
    }
    const auto n = static_cast<double>(r.rows.size());
    r.mean.recall /= n;
    r.mean.precision /= n;
    r.mean.f1 /= n;
  }
  return r;
}

json EvalReport::to_json() const {
  json j;
  j["queries"] = json::array();
  for (const auto& q : rows) {
    j["queries"].push_back({{"id", q.id},
                            {"recall", q.scores.recall},
                            {"precision", q.scores.precision},
                            {"f1", q.scores.f1},
                            {"retrieved", q.retrieved},
                            {"gold", q.gold},
                            {"hits", q.hits}});
  }
  j["count"] = rows.size();
  j["mean"] = {{"recall", mean.recall}, {"precision", mean.precision}, {"f1", mean.f1}};
  return j;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace

std::string EvalReport::table() const {
  std::size_t w = 5;
  for (const auto& q : rows) w = std::max(w, q.id.size());
  std::string out = pad("query", w) + "  recall  precision  f1\n";
  for (const auto& q : rows) {
    out += pad(q.id, w) + "  " + fmt(q.scores.recall) + "  " + fmt(q.scores.precision) + "     " + fmt(q.scores.f1) +
           "\n";
  }
  out += pad("mean", w) + "  " + fmt(mean.recall) + "  " + fmt(mean.precision) + "     " + fmt(mean.f1) + "\n";
  return out;
}

// ---------------------------------------------------------------------------

std::vector<JudgeRound> judge_pair(const std::string& query, const std::string& answer_a,
                                   const std::string& answer_b, LlmClient& llm, const PromptLibrary& prompts,
                                   bool swap) {
  if (text::trim(answer_a).empty() || text::trim(answer_b).empty()) throw Error("judge_pair: empty answer");
  std::vector<JudgeRound> out;
  for (int order = 0; order < (swap ? 2 : 1); ++order) {
    const bool swapped = order == 1;
    const std::string& first = swapped ? answer_b : answer_a;
    const std::string& second = swapped ? answer_a : answer_b;
    LlmRequest req{LlmStage::judge_pairwise,
                   prompts.render("judge_pairwise", {{"query", query}, {"answer_1", first}, {"answer_2", second}}),
                   {{"query", query}, {"swapped", swapped}}};
    JudgeRound round;
    round.swapped = swapped;
    try {
      const auto reply = llm.complete_as<PairwiseResponse>(req);
      for (std::size_t d = 0; d < kDimensions; ++d) {
        Winner w = reply.winners[d];
        if (swapped && w != Winner::tie) w = w == Winner::first ? Winner::second : Winner::first;
        round.winners[d] = w;
      }
    } catch (const ResponseParseError&) {
      round.parse_failed = true;
      round.winners.fill(Winner::tie);
    }
    out.push_back(round);
  }
  return out;
}

void JudgeTally::add(const JudgeRound& round) {
  ++rounds;
  if (round.parse_failed) ++parse_failures;
  for (std::size_t d = 0; d < kDimensions; ++d) {
    switch (round.winners[d]) {
      case Winner::first: ++wins_a[d]; break;
      case Winner::second: ++wins_b[d]; break;
      case Winner::tie: ++ties[d]; break;
    }
  }
}

double JudgeTally::win_rate_a(std::size_t d) const {
  return rounds == 0 ? 0.0 : static_cast<double>(wins_a[d]) / static_cast<double>(rounds);
}

double JudgeTally::win_rate_b(std::size_t d) const {
  return rounds == 0 ? 0.0 : static_cast<double>(wins_b[d]) / static_cast<double>(rounds);
}

json JudgeTally::to_json() const {
  json j;
  j["rounds"] = rounds;
  j["parse_failures"] = parse_failures;
  for (std::size_t d = 0; d < kDimensions; ++d) {
    j["dimensions"][std::string(kJudgeDimensions[d])] = {{"wins_a", wins_a[d]},
                                                         {"wins_b", wins_b[d]},
                                                         {"ties", ties[d]},
                                                         {"win_rate_a", win_rate_a(d)},
                                                         {"win_rate_b", win_rate_b(d)}};
  }
  return j;
}

std::string JudgeTally::table() const {
  std::string out = "dimension          wins_a  wins_b  ties  rate_a  rate_b\n";
  for (std::size_t d = 0; d < kDimensions; ++d) {
    out += pad(std::string(kJudgeDimensions[d]), 17) + "  " + pad(std::to_string(wins_a[d]), 6) + "  " +
           pad(std::to_string(wins_b[d]), 6) + "  " + pad(std::to_string(ties[d]), 4) + "  " + fmt(win_rate_a(d)) +
           "  " + fmt(win_rate_b(d)) + "\n";
  }
  out += "rounds: " + std::to_string(rounds) + "\n";
  return out;
}

std::vector<AnswerRecord> load_answers(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open answers file '" + path.string() + "'");
  std::vector<AnswerRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      out.push_back({j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump(),
                     j.value("question", ""), j.at("answer").get<std::string>()});
    } catch (const json::exception& e) {
      throw ParseError(lineno, std::string("answers: ") + e.what());
    }
  }
  return out;
}

}  // namespace dotrag
