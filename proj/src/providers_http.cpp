// Live OpenAI-compatible backend. Kept in its own translation unit so only
// this file pulls in cpp-httplib.
#include "dotrag/providers.hpp"

#include <cstdlib>

// After Eigen: <resolv.h>, pulled in by httplib, defines a `_res` macro.
#include <httplib.h>

namespace dotrag {

using json = nlohmann::json;

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix, no trailing slash
};

Endpoint split_url(const std::string& base_url) {
  auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("base URL '" + base_url + "' has no scheme");
  auto path_start = base_url.find('/', scheme_end + 3);
  Endpoint ep;
  ep.origin = base_url.substr(0, path_start);
  ep.prefix = path_start == std::string::npos ? "" : base_url.substr(path_start);
  while (!ep.prefix.empty() && ep.prefix.back() == '/') ep.prefix.pop_back();
  return ep;
}

class SlotGuard {
 public:
  explicit SlotGuard(InFlightLimiter* limiter) : limiter_(limiter) {
    if (limiter_) limiter_->acquire();
  }
  ~SlotGuard() {
    if (limiter_) limiter_->release();
  }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  InFlightLimiter* limiter_;
};

json post_json(const HttpSettings& settings, InFlightLimiter* limiter, const std::string& path, const json& body) {
  const Endpoint ep = split_url(settings.base_url);
  SlotGuard guard(limiter);
  httplib::Client client(ep.origin);
  const auto timeout_s = static_cast<time_t>(settings.timeout_seconds);
  client.set_connection_timeout(timeout_s, 0);
  client.set_read_timeout(timeout_s, 0);
  httplib::Headers headers;
  if (!settings.api_key.empty()) headers.emplace("Authorization", "Bearer " + settings.api_key);

  auto res = client.Post(ep.prefix + path, headers, body.dump(), "application/json");
  if (!res) {
    throw TransportError("POST " + settings.base_url + path + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw TransportError("POST " + settings.base_url + path + " returned HTTP " + std::to_string(res->status) +
                         ": " + res->body);
  }
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw TransportError("POST " + settings.base_url + path + ": response is not JSON: " + res->body);
  }
}

}  // namespace

HttpSettings http_settings_from_env(HttpSettings base) {
  auto read = [](const char* name, std::string& out) {
    if (const char* v = std::getenv(name); v && *v) out = v;
  };
  read("DOTRAG_BASE_URL", base.base_url);
  read("DOTRAG_API_KEY", base.api_key);
  read("DOTRAG_LLM_MODEL", base.chat_model);
  read("DOTRAG_EMBED_MODEL", base.embed_model);
  return base;
}

OpenAiChatBackend::OpenAiChatBackend(HttpSettings settings, std::shared_ptr<InFlightLimiter> limiter)
    : settings_(std::move(settings)), limiter_(std::move(limiter)) {
  split_url(settings_.base_url);
}

std::string OpenAiChatBackend::generate(const LlmRequest& request) {
  const json body = {
      {"model", settings_.chat_model},
      {"temperature", 0},
      {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
  };
  const json reply = post_json(settings_, limiter_.get(), "/chat/completions", body);
  try {
    const auto& content = reply.at("choices").at(0).at("message").at("content");
    return content.is_string() ? content.get<std::string>() : std::string();
  } catch (const json::exception&) {
    throw TransportError("chat completion reply has no choices[0].message.content: " + reply.dump());
  }
}

OpenAiEmbedder::OpenAiEmbedder(HttpSettings settings, std::shared_ptr<InFlightLimiter> limiter)
    : settings_(std::move(settings)), limiter_(std::move(limiter)) {
  split_url(settings_.base_url);
  if (settings_.embed_dim <= 0) throw ConfigError("embedder dimension must be positive");
}

Embedding OpenAiEmbedder::embed(std::string_view input) {
  if (text::trim(input).empty()) throw Error("embed: empty text");
  const json body = {{"model", settings_.embed_model}, {"input", std::string(input)}};
  const json reply = post_json(settings_, limiter_.get(), "/embeddings", body);
  json values;
  try {
    values = reply.at("data").at(0).at("embedding");
  } catch (const json::exception&) {
    throw TransportError("embedding reply has no data[0].embedding");
  }
  if (!values.is_array() || static_cast<Eigen::Index>(values.size()) != settings_.embed_dim) {
    throw DimensionError("embedding endpoint returned " + std::to_string(values.size()) + " values, expected " +
                         std::to_string(settings_.embed_dim));
  }
  Embedding v(settings_.embed_dim);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = values[static_cast<std::size_t>(i)].get<double>();
  const double n = v.norm();
  if (!(n > 0)) throw TransportError("embedding endpoint returned a zero vector");
  return v / n;
}

}  // namespace dotrag
