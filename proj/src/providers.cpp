#include "dotrag/providers.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

namespace dotrag {

using json = nlohmann::json;

namespace {

std::string fenced(const std::string& body) { return "```result\n" + body + "```"; }

std::string one_line(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return text::trim(out);
}

std::string relation_words(std::string_view relation) {
  std::string out(relation);
  for (auto& c : out) {
    if (c == '_') c = ' ';
  }
  return out;
}

std::string strip_markup(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '<' || c == '>' || c == '[' || c == ']') continue;
    out.push_back(c);
  }
  return out;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

// ---------------------------------------------------------------------------
// ScriptedMock

ScriptedMock::ScriptedMock() {
  auto set = [&](LlmStage s, std::string r) { defaults_[static_cast<std::size_t>(s)] = std::move(r); };
  set(LlmStage::concept_extraction, fenced("mode: low_only\n"));
  set(LlmStage::heuristic_generation,
      fenced("intermediate_rule: Entities or relations that move the search closer to the answer.\n"
             "terminal_rule: An entity or statement that directly answers the query.\n"
             "allowed_types: *\n"));
  set(LlmStage::path_judgment, fenced("verdict: irrelevant\n"));
  set(LlmStage::followup_queries, fenced(""));
  set(LlmStage::final_answer, "No answer could be determined from the retrieved evidence.");
  set(LlmStage::judge_pairwise,
      fenced("comprehensiveness: tie\nlogicality: tie\nrelevance: tie\ncoherence: tie\noverall: tie\n"));
  set(LlmStage::textualize_chunk, std::string(kAuto));
  set(LlmStage::entity_summary, std::string(kAuto));
  set(LlmStage::relation_describe, std::string(kAuto));
  set(LlmStage::merge_confirm, fenced(""));
  set(LlmStage::type_relabel, std::string(kAuto));
}

void ScriptedMock::set_default(LlmStage stage, std::string response) {
  defaults_[static_cast<std::size_t>(stage)] = std::move(response);
}

ScriptedMock ScriptedMock::from_json(const json& script) {
  if (!script.is_object()) throw ConfigError("mock script must be a JSON object");
  auto stage_of = [](const json& v) {
    if (!v.is_string()) throw ConfigError("mock script: stage must be a string");
    auto s = stage_from_name(v.get<std::string>());
    if (!s) throw ConfigError("mock script: unknown stage '" + v.get<std::string>() + "'");
    return *s;
  };
  ScriptedMock mock;
  if (auto it = script.find("defaults"); it != script.end()) {
    if (!it->is_object()) throw ConfigError("mock script: \"defaults\" must be an object");
    for (const auto& [name, reply] : it->items()) {
      if (!reply.is_string()) throw ConfigError("mock script: default for '" + name + "' must be a string");
      mock.set_default(stage_of(json(name)), reply.get<std::string>());
    }
  }
  if (auto it = script.find("rules"); it != script.end()) {
    if (!it->is_array()) throw ConfigError("mock script: \"rules\" must be an array");
    for (const auto& r : *it) {
      if (!r.is_object() || !r.contains("stage") || !r.contains("response") || !r["response"].is_string()) {
        throw ConfigError("mock script: each rule needs \"stage\" and a string \"response\"");
      }
      Rule rule{stage_of(r["stage"]), {}, r["response"].get<std::string>()};
      if (auto c = r.find("contains"); c != r.end()) {
        if (c->is_string()) {
          rule.contains.push_back(c->get<std::string>());
        } else if (c->is_array()) {
          for (const auto& s : *c) rule.contains.push_back(s.get<std::string>());
        } else {
          throw ConfigError("mock script: \"contains\" must be a string or array of strings");
        }
      }
      mock.add_rule(std::move(rule));
    }
  }
  return mock;
}

ScriptedMock ScriptedMock::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mock script '" + path.string() + "'");
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw ConfigError("mock script '" + path.string() + "': " + e.what());
  }
}

std::string ScriptedMock::generate(const LlmRequest& request) {
  const std::string* reply = &default_for(request.stage);
  for (const auto& rule : rules_) {
    if (rule.stage != request.stage) continue;
    const bool hit = std::all_of(rule.contains.begin(), rule.contains.end(),
                                 [&](const std::string& s) { return text::contains(request.prompt, s); });
    if (hit) {
      reply = &rule.response;
      break;
    }
  }
  if (*reply == kAuto) return auto_reply(request);
  return *reply;
}

std::string auto_reply(const LlmRequest& request) {
  const json& p = request.payload;
  switch (request.stage) {
    case LlmStage::textualize_chunk: {
      const std::string center = p.value("center", "");
      std::string out = "<" + center + "> is summarised from its graph neighbourhood.";
      for (const auto& n : p.value("neighbors", json::array())) {
        const std::string name = n.value("name", "");
        const std::string rel = relation_words(n.value("relation", "related to"));
        if (n.value("direction", "out") == "in") {
          out += " [" + name + "] " + rel + " <" + center + ">.";
        } else {
          out += " <" + center + "> " + rel + " [" + name + "].";
        }
      }
      return out;
    }
    case LlmStage::entity_summary: {
      std::set<std::string> labels;
      for (const auto& l : p.value("labels", json::array())) labels.insert(l.get<std::string>());
      std::string type = p.value("current_type", "");
      if (!labels.count(type)) type = "unsure";
      const std::string desc = one_line(strip_markup(p.value("chunk", p.value("entity", ""))));
      return fenced("type: " + type + "\ndescription: " + desc + "\n");
    }
    case LlmStage::relation_describe: {
      std::string body;
      for (const auto& t : p.value("triples", json::array())) {
        body += "description: " + t.value("head", "") + " " + relation_words(t.value("relation", "")) + " " +
                t.value("tail", "") + ".\n";
      }
      return fenced(body);
    }
    case LlmStage::type_relabel: {
      std::set<std::string> labels;
      for (const auto& l : p.value("labels", json::array())) labels.insert(l.get<std::string>());
      std::string body;
      for (const auto& e : p.value("entities", json::array())) {
        std::string type = e.value("current_type", "");
        if (!labels.count(type)) type = "unsure";
        body += "entity: " + e.value("id", "") + " | " + type + "\n";
      }
      return fenced(body);
    }
    case LlmStage::merge_confirm:
      return fenced("");
    default:
      throw ProviderError("mock: no @auto reply for stage " + std::string(stage_name(request.stage)));
  }
}

// ---------------------------------------------------------------------------
// MockEmbedder

MockEmbedder::MockEmbedder(Eigen::Index dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim <= 0) throw ConfigError("mock embedder: dim must be positive");
}

Embedding MockEmbedder::embed(std::string_view input) {
  if (text::trim(input).empty()) throw Error("embed: empty text");
  auto tokens = text::tokenize(input);
  if (tokens.empty()) tokens.emplace_back(input);
  Embedding v = Embedding::Zero(dim_);
  const std::uint64_t salt = mix(seed_);
  for (const auto& tok : tokens) {
    const std::uint64_t h = mix(fnv1a(tok) ^ salt);
    const auto bucket = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim_));
    v(bucket) += ((h >> 32) & 1U) ? 1.0 : -1.0;
  }
  const double n = v.norm();
  if (n == 0) {
    // Signed collisions cancelled out; fall back to the first token alone.
    const std::uint64_t h = mix(fnv1a(tokens.front()) ^ salt);
    v.setZero();
    v(static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim_))) = 1.0;
    return v;
  }
  return v / n;
}

// ---------------------------------------------------------------------------
// LlmClient

InFlightLimiter::InFlightLimiter(unsigned cap) : slots_(static_cast<std::ptrdiff_t>(std::clamp(cap, 1U, 1024U))) {}

LlmClient::LlmClient(std::shared_ptr<LlmBackend> backend, int parse_retries)
    : backend_(std::move(backend)), parse_retries_(parse_retries) {
  if (!backend_) throw ConfigError("LlmClient: null backend");
  if (parse_retries < 0) throw ConfigError("LlmClient: parse_retries must be >= 0");
}

Completion LlmClient::complete(const LlmRequest& request) {
  if (text::trim(request.prompt).empty()) throw ProviderError("LLM request with empty prompt");
  std::string raw;
  std::string last_error;
  for (int attempt = 1; attempt <= parse_retries_ + 1; ++attempt) {
    counts_[static_cast<std::size_t>(request.stage)].fetch_add(1);
    try {
      raw = backend_->generate(request);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw TransportError(std::string("LLM backend failure: ") + e.what());
    }
    try {
      return Completion{parse_stage_response(request.stage, raw), raw, attempt};
    } catch (const ResponseParseError& e) {
      last_error = e.what();
    }
  }
  throw ResponseParseError(last_error + " (after " + std::to_string(parse_retries_ + 1) + " attempts)", raw);
}

std::uint64_t LlmClient::calls() const noexcept {
  std::uint64_t total = 0;
  for (const auto& c : counts_) total += c.load();
  return total;
}

}  // namespace dotrag
