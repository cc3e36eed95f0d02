#include "dotrag/structured.hpp"

#include <algorithm>
#include <charconv>

namespace dotrag {

namespace {

constexpr std::array<std::string_view, kAllStages.size()> kStageNames = {
    "concept_extraction", "heuristic_generation", "path_judgment",     "followup_queries",
    "final_answer",       "judge_pairwise",       "textualize_chunk",  "entity_summary",
    "relation_describe",  "merge_confirm",        "type_relabel",
};

[[noreturn]] void fail(LlmStage stage, const std::string& why, std::string_view raw) {
  throw ResponseParseError(std::string(stage_name(stage)) + ": " + why, std::string(raw));
}

KvBlock require_block(LlmStage stage, std::string_view raw) {
  auto block = extract_block(raw);
  if (!block) fail(stage, "no ```result block in response", raw);
  return *block;
}

std::string require_value(LlmStage stage, const KvBlock& block, std::string_view key, std::string_view raw) {
  const std::string* v = block.first(key);
  if (!v || v->empty()) fail(stage, "missing key '" + std::string(key) + "'", raw);
  return *v;
}

ConceptItem concept_item(std::string_view value) {
  auto bar = value.find('|');
  if (bar == std::string_view::npos) return {text::trim(value), {}};
  return {text::trim(value.substr(0, bar)), text::trim(value.substr(bar + 1))};
}

std::optional<Winner> winner_from(std::string_view value) {
  std::string v = text::normalize(value);
  if (v.rfind("answer ", 0) == 0) v = v.substr(7);
  if (v == "1") return Winner::first;
  if (v == "2") return Winner::second;
  if (v == "tie") return Winner::tie;
  return std::nullopt;
}

std::optional<std::pair<int, PathStatus>> verdict_from(std::string_view value) {
  std::string v = text::normalize(value);
  if (auto s = status_from_name(v); s && *s != PathStatus::unjudged) return std::pair{1, *s};
  int number = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), number);
  if (ec != std::errc() || number < 1) return std::nullopt;
  std::string rest(ptr, static_cast<const char*>(v.data() + v.size()));
  rest.erase(0, rest.find_first_not_of(" :=.)-"));
  if (auto s = status_from_name(text::trim(rest)); s && *s != PathStatus::unjudged) return std::pair{number, *s};
  return std::nullopt;
}

}  // namespace

std::string_view stage_name(LlmStage stage) { return kStageNames[static_cast<std::size_t>(stage)]; }

std::optional<LlmStage> stage_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kStageNames.size(); ++i) {
    if (kStageNames[i] == name) return kAllStages[i];
  }
  return std::nullopt;
}

std::string_view status_name(PathStatus status) {
  switch (status) {
    case PathStatus::unjudged: return "unjudged";
    case PathStatus::irrelevant: return "irrelevant";
    case PathStatus::partial: return "partial";
    case PathStatus::complete: return "complete";
  }
  return "unjudged";
}

std::optional<PathStatus> status_from_name(std::string_view name) {
  for (auto s : {PathStatus::unjudged, PathStatus::irrelevant, PathStatus::partial, PathStatus::complete}) {
    if (status_name(s) == name) return s;
  }
  return std::nullopt;
}

const std::string* KvBlock::first(std::string_view key) const {
  for (const auto& [k, v] : entries) {
    if (k == key) return &v;
  }
  return nullptr;
}

std::vector<std::string> KvBlock::all(std::string_view key) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries) {
    if (k == key) out.push_back(v);
  }
  return out;
}

std::optional<KvBlock> extract_block(std::string_view raw) {
  std::optional<KvBlock> found;
  std::size_t pos = 0;
  while (true) {
    auto open = raw.find("```", pos);
    if (open == std::string_view::npos) break;
    auto eol = raw.find('\n', open);
    if (eol == std::string_view::npos) break;
    const std::string label = text::normalize(raw.substr(open + 3, eol - open - 3));
    auto close = raw.find("```", eol + 1);
    if (close == std::string_view::npos) close = raw.size();
    if (label == "result") {
      KvBlock block;
      for (const auto& line : text::split(raw.substr(eol + 1, close - eol - 1), '\n')) {
        auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        std::string key = text::normalize(line.substr(0, colon));
        if (key.empty()) continue;
        block.entries.emplace_back(std::move(key), text::trim(line.substr(colon + 1)));
      }
      found = std::move(block);
    }
    if (close >= raw.size()) break;
    pos = close + 3;
  }
  return found;
}

StageResponse parse_stage_response(LlmStage stage, std::string_view raw) {
  switch (stage) {
    case LlmStage::concept_extraction: {
      const auto block = require_block(stage, raw);
      ConceptResponse r;
      const std::string mode = text::normalize(require_value(stage, block, "mode", raw));
      if (mode == "low_and_high") {
        r.low_and_high = true;
      } else if (mode != "low_only") {
        fail(stage, "mode must be low_only or low_and_high, got '" + mode + "'", raw);
      }
      for (const auto& v : block.all("low")) {
        auto item = concept_item(v);
        if (!item.span.empty()) r.low.push_back(std::move(item));
      }
      for (const auto& v : block.all("high")) {
        auto item = concept_item(v);
        if (!item.span.empty()) r.high.push_back(std::move(item));
      }
      return r;
    }
    case LlmStage::heuristic_generation: {
      const auto block = require_block(stage, raw);
      RulesResponse r;
      r.intermediate_rule = require_value(stage, block, "intermediate_rule", raw);
      r.terminal_rule = require_value(stage, block, "terminal_rule", raw);
      for (const auto& v : block.all("allowed_types")) {
        for (const auto& part : text::split(v, ',')) {
          std::string label = text::trim(part);
          if (label.empty() || label == "*") continue;
          r.allowed_types.push_back(std::move(label));
        }
      }
      return r;
    }
    case LlmStage::path_judgment: {
      const auto block = require_block(stage, raw);
      VerdictResponse r;
      for (const auto& v : block.all("verdict")) {
        auto parsed = verdict_from(v);
        if (!parsed) fail(stage, "unrecognised verdict '" + v + "'", raw);
        r.verdicts.push_back(*parsed);
      }
      if (r.verdicts.empty()) fail(stage, "missing key 'verdict'", raw);
      return r;
    }
    case LlmStage::followup_queries: {
      const auto block = require_block(stage, raw);
      FollowupResponse r;
      for (const auto& v : block.all("query")) {
        if (!v.empty()) r.queries.push_back(v);
      }
      return r;
    }
    case LlmStage::final_answer:
    case LlmStage::textualize_chunk: {
      std::string t = text::trim(raw);
      if (t.empty()) fail(stage, "empty response", raw);
      return TextResponse{std::move(t)};
    }
    case LlmStage::judge_pairwise: {
      const auto block = require_block(stage, raw);
      PairwiseResponse r;
      for (std::size_t d = 0; d < kJudgeDimensions.size(); ++d) {
        const std::string value = require_value(stage, block, kJudgeDimensions[d], raw);
        auto w = winner_from(value);
        if (!w) fail(stage, "bad winner '" + value + "' for " + std::string(kJudgeDimensions[d]), raw);
        r.winners[d] = *w;
      }
      return r;
    }
    case LlmStage::entity_summary: {
      const auto block = require_block(stage, raw);
      return SummaryResponse{require_value(stage, block, "type", raw), require_value(stage, block, "description", raw)};
    }
    case LlmStage::relation_describe: {
      const auto block = require_block(stage, raw);
      RelationDescriptions r;
      for (const auto& v : block.all("description")) {
        if (!v.empty()) r.descriptions.push_back(v);
      }
      return r;
    }
    case LlmStage::merge_confirm: {
      const auto block = require_block(stage, raw);
      MergeResponse r;
      for (const auto& v : block.all("merge")) {
        std::vector<std::string> group;
        for (const auto& part : text::split(v, ',')) {
          std::string id = text::trim(part);
          if (!id.empty()) group.push_back(std::move(id));
        }
        if (group.size() >= 2) r.groups.push_back(std::move(group));
      }
      return r;
    }
    case LlmStage::type_relabel: {
      const auto block = require_block(stage, raw);
      RelabelResponse r;
      for (const auto& v : block.all("entity")) {
        auto bar = v.rfind('|');
        if (bar == std::string::npos) fail(stage, "relabel line without '|': '" + v + "'", raw);
        r.decisions.emplace_back(text::trim(v.substr(0, bar)), text::trim(v.substr(bar + 1)));
      }
      return r;
    }
  }
  fail(stage, "unknown stage", raw);
}

}  // namespace dotrag
