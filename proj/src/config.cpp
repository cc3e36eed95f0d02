#include "dotrag/config.hpp"

#include <fstream>
#include <functional>
#include <map>

namespace dotrag {

using json = nlohmann::json;

namespace {

template <typename T>
T as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type: " + v.dump());
  }
}

template <typename T>
T non_negative(const json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError("config key '" + key + "' must be a non-negative integer, got " + v.dump());
  }
  return static_cast<T>(v.get<long long>());
}

}  // namespace

void RunConfig::apply_json(const json& flat) {
  if (!flat.is_object()) throw ConfigError("config file must hold a JSON object of dotted keys");
  using Setter = std::function<void(const json&, const std::string&)>;
  auto str = [](std::string& f) -> Setter { return [&f](const json& v, const std::string& k) { f = as<std::string>(v, k); }; };
  auto dbl = [](double& f) -> Setter { return [&f](const json& v, const std::string& k) { f = as<double>(v, k); }; };
  auto boolean = [](bool& f) -> Setter { return [&f](const json& v, const std::string& k) { f = as<bool>(v, k); }; };
  auto size = [](std::size_t& f) -> Setter {
    return [&f](const json& v, const std::string& k) { f = non_negative<std::size_t>(v, k); };
  };
  auto& s = engine.search;
  auto& g = engine.grounding;
  const std::map<std::string, Setter> setters = {
      {"provider.mode", str(provider_mode)},
      {"provider.mock_script", str(mock_script)},
      {"provider.base_url", str(http.base_url)},
      {"provider.chat_model", str(http.chat_model)},
      {"provider.embed_model", str(http.embed_model)},
      {"provider.max_in_flight",
       [this](const json& v, const std::string& k) { http.max_in_flight = non_negative<unsigned>(v, k); }},
      {"provider.timeout_seconds", dbl(http.timeout_seconds)},
      {"provider.parse_retries", [this](const json& v, const std::string& k) { parse_retries = non_negative<int>(v, k); }},
      {"embedder.dim", [this](const json& v, const std::string& k) { embed_dim = non_negative<long>(v, k); }},
      {"embedder.seed", [this](const json& v, const std::string& k) { seed = non_negative<std::uint64_t>(v, k); }},
      {"retrieval.tau", dbl(g.tau)},
      {"retrieval.k_high", size(g.k_high)},
      {"retrieval.low_cap", size(g.low_cap)},
      {"retrieval.hops", [&s](const json& v, const std::string& k) { s.hops = non_negative<unsigned>(v, k); }},
      {"retrieval.iterations", size(s.iterations)},
      {"retrieval.candidates", size(s.candidates)},
      {"retrieval.paths_per_pair", size(s.paths_per_pair)},
      {"retrieval.cap", size(s.path_cap)},
      {"retrieval.batch_judging", boolean(s.batch_judging)},
      {"retrieval.chunks", size(engine.n_chunks)},
      {"retrieval.chunk_char_budget", size(engine.chunk_char_budget)},
      {"paths.index", str(index_path)},
      {"paths.prompts", str(prompts_dir)},
      {"paths.ground_truth", str(ground_truth)},
      {"paths.trace", str(trace_path)},
      {"prep.max_retries", [this](const json& v, const std::string& k) { prep_max_retries = non_negative<int>(v, k); }},
      {"prep.tau_dedup", dbl(prep_tau_dedup)},
      {"prep.batch_size", size(prep_batch_size)},
      {"prep.dedup", boolean(prep_dedup)},
      {"prep.schema", str(prep_schema)},
      {"parallel", [this](const json& v, const std::string& k) { engine.parallel = non_negative<unsigned>(v, k); }},
  };
  for (const auto& [key, value] : flat.items()) {
    if (key.find("api_key") != std::string::npos) {
      throw ConfigError("config key '" + key + "': API keys are read from DOTRAG_API_KEY only");
    }
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(value, key);
  }
}

void RunConfig::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path.string() + "': " + e.what());
  }
  apply_json(j);
}

void RunConfig::validate() const {
  if (provider_mode != "live" && provider_mode != "mock") {
    throw ConfigError("provider.mode must be 'live' or 'mock', got '" + provider_mode + "'");
  }
  if (provider_mode == "live" && !mock_script.empty()) {
    throw ConfigError("provider.mode is 'live' but provider.mock_script is set; select exactly one provider");
  }
  if (http.max_in_flight == 0) throw ConfigError("provider.max_in_flight must be >= 1");
  if (!(http.timeout_seconds > 0)) throw ConfigError("provider.timeout_seconds must be > 0");
  if (!(prep_tau_dedup > 0 && prep_tau_dedup <= 1)) throw ConfigError("prep.tau_dedup must lie in (0, 1]");
  if (prep_batch_size == 0) throw ConfigError("prep.batch_size must be >= 1");
  engine.validate();
}

long RunConfig::resolved_dim() const {
  if (embed_dim > 0) return embed_dim;
  return provider_mode == "mock" ? kMockDim : static_cast<long>(http.embed_dim);
}

std::filesystem::path RunConfig::resolved_prompts_dir() const {
  return prompts_dir.empty() ? PromptLibrary::default_dir() : std::filesystem::path(prompts_dir);
}

json RunConfig::redacted() const {
  const auto& s = engine.search;
  const auto& g = engine.grounding;
  return {
      {"provider.mode", provider_mode},
      {"provider.mock_script", mock_script},
      {"provider.base_url", http.base_url},
      {"provider.chat_model", http.chat_model},
      {"provider.embed_model", http.embed_model},
      {"provider.api_key", http.api_key.empty() ? "" : "<redacted>"},
      {"provider.max_in_flight", http.max_in_flight},
      {"provider.timeout_seconds", http.timeout_seconds},
      {"provider.parse_retries", parse_retries},
      {"embedder.dim", resolved_dim()},
      {"embedder.seed", seed},
      {"retrieval.tau", g.tau},
      {"retrieval.k_high", g.k_high},
      {"retrieval.low_cap", g.low_cap},
      {"retrieval.hops", s.hops},
      {"retrieval.iterations", s.iterations},
      {"retrieval.candidates", s.candidates},
      {"retrieval.paths_per_pair", s.paths_per_pair},
      {"retrieval.cap", s.path_cap},
      {"retrieval.batch_judging", s.batch_judging},
      {"retrieval.chunks", engine.n_chunks},
      {"retrieval.chunk_char_budget", engine.chunk_char_budget},
      {"paths.index", index_path},
      {"paths.prompts", resolved_prompts_dir().string()},
      {"paths.ground_truth", ground_truth},
      {"paths.trace", trace_path},
      {"prep.max_retries", prep_max_retries},
      {"prep.tau_dedup", prep_tau_dedup},
      {"prep.batch_size", prep_batch_size},
      {"prep.dedup", prep_dedup},
      {"prep.schema", prep_schema},
      {"parallel", engine.parallel},
  };
}

ProviderPair RunConfig::make_providers() const {
  ProviderPair p;
  if (provider_mode == "mock") {
    auto mock = mock_script.empty() ? std::make_shared<ScriptedMock>()
                                    : std::make_shared<ScriptedMock>(ScriptedMock::from_file(mock_script));
    p.llm = std::make_shared<LlmClient>(std::move(mock), parse_retries);
    p.embedder = std::make_shared<MockEmbedder>(resolved_dim(), seed);
    return p;
  }
  HttpSettings settings = http;
  settings.embed_dim = resolved_dim();
  auto limiter = std::make_shared<InFlightLimiter>(settings.max_in_flight);
  p.llm = std::make_shared<LlmClient>(std::make_shared<OpenAiChatBackend>(settings, limiter), parse_retries);
  p.embedder = std::make_shared<OpenAiEmbedder>(settings, limiter);
  return p;
}

}  // namespace dotrag
