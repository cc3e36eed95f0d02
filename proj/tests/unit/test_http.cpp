// Live client against a loopback server.
#include "dotrag/providers.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include <httplib.h>

#include "test_support.hpp"

using namespace dotrag;
using json = nlohmann::json;

namespace {

class LoopbackServer {
 public:
  LoopbackServer() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int n = ++chat_hits;
      last_auth = req.get_header_value("Authorization");
      last_body = json::parse(req.body);
      if (fail_status) {
        res.status = fail_status;
        res.set_content("overloaded", "text/plain");
        return;
      }
      const std::string content = n <= bad_replies ? "I think it is partial." : "```result\nverdict: partial\n```";
      json reply = {{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})}};
      res.set_content(reply.dump(), "application/json");
    });
    server_.Post("/v1/embeddings", [this](const httplib::Request&, httplib::Response& res) {
      json values = json::array();
      for (int i = 0; i < embed_dim; ++i) values.push_back(i == 0 ? 3.0 : (i == 1 ? 4.0 : 0.0));
      res.set_content(json{{"data", json::array({{{"embedding", values}}})}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LoopbackServer() {
    server_.stop();
    thread_.join();
  }

  HttpSettings settings() const {
    HttpSettings s;
    s.base_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1";
    s.api_key = "test-key";
    s.embed_dim = 4;
    s.timeout_seconds = 5;
    return s;
  }

  std::atomic<int> chat_hits{0};
  int bad_replies = 0;
  int fail_status = 0;
  int embed_dim = 4;
  std::string last_auth;
  json last_body;

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

LlmRequest judge_request() { return {LlmStage::path_judgment, "Judge: Tesla --[ceo]--> Elon Musk", {}}; }

}  // namespace

TEST(HttpBackend, RetriesNonConformingText) {
  LoopbackServer server;
  server.bad_replies = 2;
  LlmClient client(std::make_shared<OpenAiChatBackend>(server.settings(), std::make_shared<InFlightLimiter>(2)), 2);
  const auto done = client.complete(judge_request());
  EXPECT_EQ(done.attempts, 3);
  EXPECT_EQ(server.chat_hits.load(), 3);
  EXPECT_EQ(server.last_auth, "Bearer test-key");
  EXPECT_EQ(server.last_body["messages"][0]["content"], judge_request().prompt);
}

TEST(HttpBackend, ParseFailureAfterBoundKeepsRawText) {
  LoopbackServer server;
  server.bad_replies = 100;
  LlmClient client(std::make_shared<OpenAiChatBackend>(server.settings(), nullptr), 1);
  try {
    client.complete(judge_request());
    FAIL() << "expected ResponseParseError";
  } catch (const ResponseParseError& e) {
    EXPECT_EQ(e.raw(), "I think it is partial.");
  }
  EXPECT_EQ(server.chat_hits.load(), 2);
}

TEST(HttpBackend, HttpErrorIsTransportFailureWithoutRetry) {
  LoopbackServer server;
  server.fail_status = 503;
  LlmClient client(std::make_shared<OpenAiChatBackend>(server.settings(), nullptr), 2);
  EXPECT_THROW(client.complete(judge_request()), TransportError);
  EXPECT_EQ(server.chat_hits.load(), 1);
}

TEST(HttpBackend, UnreachableEndpoint) {
  HttpSettings s;
  s.base_url = "http://127.0.0.1:1/v1";
  s.timeout_seconds = 2;
  OpenAiChatBackend backend(s, nullptr);
  EXPECT_THROW(backend.generate(judge_request()), TransportError);
  s.base_url = "no-scheme";
  EXPECT_THROW(OpenAiChatBackend(s, nullptr), ConfigError);
}

TEST(HttpEmbedder, NormalisesAndChecksDimension) {
  LoopbackServer server;
  OpenAiEmbedder embedder(server.settings(), nullptr);
  const auto v = embedder.embed("Tesla");
  ASSERT_EQ(v.size(), 4);
  EXPECT_NEAR(v(0), 0.6, 1e-12);
  EXPECT_NEAR(v(1), 0.8, 1e-12);
  server.embed_dim = 3;
  EXPECT_THROW(embedder.embed("Tesla"), DimensionError);
}
