#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dotrag/embedding.hpp"
#include "dotrag/structured.hpp"

namespace dotrag {

struct LlmRequest {
  LlmStage stage;
  std::string prompt;
  // Machine-readable copy of the prompt inputs. Live backends ignore it; the
  // scripted mock uses it to synthesise "@auto" replies.
  nlohmann::json payload = nlohmann::json::object();
};

/// Raw text generation. Implementations must accept concurrent calls.
class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual std::string generate(const LlmRequest& request) = 0;
};

/// Text embedding. Implementations must accept concurrent calls and return
/// unit-norm vectors of dimension dim().
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual Embedding embed(std::string_view text) = 0;
  virtual Eigen::Index dim() const = 0;
};

/// Deterministic rule-driven LLM. Rules are tried in order; the first whose
/// stage matches and whose substrings all occur in the prompt wins. Otherwise
/// the stage default applies. Pure function of (request, script).
class ScriptedMock final : public LlmBackend {
 public:
  static constexpr std::string_view kAuto = "@auto";

  struct Rule {
    LlmStage stage;
    std::vector<std::string> contains;
    std::string response;
  };

  ScriptedMock();

  /// {"defaults": {"<stage>": "<reply>"}, "rules": [{"stage", "contains", "response"}]}
  static ScriptedMock from_json(const nlohmann::json& script);
  static ScriptedMock from_file(const std::filesystem::path& path);

  void add_rule(Rule rule) { rules_.push_back(std::move(rule)); }
  void set_default(LlmStage stage, std::string response);
  const std::string& default_for(LlmStage stage) const { return defaults_[static_cast<std::size_t>(stage)]; }

  std::string generate(const LlmRequest& request) override;

 private:
  std::vector<Rule> rules_;
  std::array<std::string, kAllStages.size()> defaults_;
};

/// Reply an "@auto" default produces for `request`, built from its payload.
std::string auto_reply(const LlmRequest& request);

/// Token-hash bag-of-words embedder: lowercased alphanumeric tokens are
/// hashed with the seed into `dim` signed buckets, summed and normalised.
class MockEmbedder final : public Embedder {
 public:
  MockEmbedder(Eigen::Index dim, std::uint64_t seed);
  Embedding embed(std::string_view text) override;
  Eigen::Index dim() const override { return dim_; }

 private:
  Eigen::Index dim_;
  std::uint64_t seed_;
};

/// Bounds concurrent requests to a live endpoint.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(unsigned cap);
  void acquire() { slots_.acquire(); }
  void release() { slots_.release(); }

 private:
  std::counting_semaphore<1024> slots_;
};

struct HttpSettings {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;
  std::string chat_model = "gpt-4o-mini";
  std::string embed_model = "text-embedding-3-small";
  Eigen::Index embed_dim = 1536;
  unsigned max_in_flight = 4;
  double timeout_seconds = 120;
};

/// Reads DOTRAG_BASE_URL, DOTRAG_API_KEY, DOTRAG_LLM_MODEL, DOTRAG_EMBED_MODEL
/// on top of `base`.
HttpSettings http_settings_from_env(HttpSettings base = {});

/// OpenAI-compatible /chat/completions client.
class OpenAiChatBackend final : public LlmBackend {
 public:
  OpenAiChatBackend(HttpSettings settings, std::shared_ptr<InFlightLimiter> limiter);
  std::string generate(const LlmRequest& request) override;

 private:
  HttpSettings settings_;
  std::shared_ptr<InFlightLimiter> limiter_;
};

/// OpenAI-compatible /embeddings client; normalises returned vectors.
class OpenAiEmbedder final : public Embedder {
 public:
  OpenAiEmbedder(HttpSettings settings, std::shared_ptr<InFlightLimiter> limiter);
  Embedding embed(std::string_view text) override;
  Eigen::Index dim() const override { return settings_.embed_dim; }

 private:
  HttpSettings settings_;
  std::shared_ptr<InFlightLimiter> limiter_;
};

struct Completion {
  StageResponse response;
  std::string raw;
  int attempts = 0;
};

/// Wraps a backend with per-stage parsing, bounded parse retries and call
/// counting. Transport failures are not retried.
class LlmClient {
 public:
  explicit LlmClient(std::shared_ptr<LlmBackend> backend, int parse_retries = 2);

  Completion complete(const LlmRequest& request);

  template <typename T>
  T complete_as(const LlmRequest& request) {
    return std::get<T>(complete(request).response);
  }

  int parse_retries() const noexcept { return parse_retries_; }
  std::uint64_t calls() const noexcept;
  std::uint64_t calls(LlmStage stage) const noexcept { return counts_[static_cast<std::size_t>(stage)].load(); }

 private:
  std::shared_ptr<LlmBackend> backend_;
  int parse_retries_;
  std::array<std::atomic<std::uint64_t>, kAllStages.size()> counts_{};
};

/// The LLM and the embedder every stage shares.
struct ProviderPair {
  std::shared_ptr<LlmClient> llm;
  std::shared_ptr<Embedder> embedder;
};

}  // namespace dotrag
