#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "flavoraxis/providers.hpp"
#include "test_util.hpp"

using namespace flavoraxis;
using namespace flavoraxis::providers;

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Canonical, KeyIgnoresConstructionOrderButNotContent) {
  LlmRequest a{"m", "p", {{"type", "OBJECT"}, {"x", 1}}, 0.1, 100};
  LlmRequest b{"m", "p", {{"x", 1}, {"type", "OBJECT"}}, 0.1, 100};
  EXPECT_EQ(request_key(canonical_request(a)), request_key(canonical_request(b)));
  b.temperature = 0.2;
  EXPECT_NE(request_key(canonical_request(a)), request_key(canonical_request(b)));
  EXPECT_NE(request_key(canonical_request("m", "t")), request_key(canonical_request("m2", "t")));
}

TEST(Transcripts, RecordThenReplay) {
  testutil::TempDir dir;
  TranscriptStore store(dir.path());
  int calls = 0;
  FunctionLlmClient live([&](const LlmRequest& r) {
    ++calls;
    return "echo:" + r.prompt;
  });
  FunctionEmbedder live_emb([&](const std::string& t) { return std::vector<double>{double(t.size()), 0.5}; }, "e1");
  RecordingLlmClient rec(live, store);
  RecordingEmbedder rec_emb(live_emb, store);
  LlmRequest req{"m", "hello", {{"type", "STRING"}}, 0.1, 10};
  EXPECT_EQ(rec.complete(req), "echo:hello");
  EXPECT_EQ(rec_emb.embed("abcd"), (std::vector<double>{4, 0.5}));

  ReplayLlmClient replay(store);
  ReplayEmbedder replay_emb(store, "e1");
  EXPECT_EQ(replay.complete(req), "echo:hello");
  EXPECT_EQ(replay_emb.embed("abcd"), (std::vector<double>{4, 0.5}));
  EXPECT_EQ(calls, 1);

  req.prompt = "unseen";
  try {
    replay.complete(req);
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_FALSE(e.retryable());
  }
  ReplayEmbedder other(store, "e2");
  EXPECT_THROW(other.embed("abcd"), ProviderError);
}

TEST(TableEmbedder, ParsesTsvAndRejectsJunk) {
  auto t = TableEmbedder::parse("# c\nsalt\t1\t2\n\nolive oil\t0.5\t-1\n", "tab");
  EXPECT_EQ(t.embed("olive oil"), (std::vector<double>{0.5, -1}));
  EXPECT_EQ(t.model(), "tab");
  EXPECT_THROW(t.embed("pepper"), ProviderError);
  EXPECT_THROW(TableEmbedder::parse("x\t1\tzz\n", "tab"), DataError);
}

TEST(Config, ModesAndDefaults) {
  auto c = provider_config_from_json(nlohmann::json::parse(R"({"base_url": "http://h", "mode": "live"})"));
  EXPECT_EQ(c.complete_path, "/v1/complete");
  EXPECT_EQ(c.retries, 2);
  EXPECT_THROW(provider_config_from_json(nlohmann::json::parse(R"({"mode": "cached"})")), DataError);
  ProviderConfig r;
  r.mode = "replay";
  EXPECT_THROW(make_providers(r), DataError);
  r.fixture_dir = testutil::fixture("matching/transcripts").string();
  auto s = make_providers(r);
  EXPECT_TRUE(s.llm && s.embedder);
}

namespace {

struct FakeServer {
  httplib::Server svr;
  int port = 0;
  std::thread th;
  std::atomic<int> hits{0};
  std::string last_auth;

  FakeServer() {
    svr.Post("/v1/complete", [this](const httplib::Request& req, httplib::Response& res) {
      last_auth = req.get_header_value("Authorization");
      const auto body = nlohmann::json::parse(req.body);
      const auto prompt = body.at("prompt").get<std::string>();
      if (prompt == "flaky" && hits++ < 2) {
        res.status = 503;
        return;
      }
      if (prompt == "bad") {
        res.status = 400;
        res.set_content("nope", "text/plain");
        return;
      }
      if (prompt == "down") {
        res.status = 500;
        return;
      }
      res.set_content(nlohmann::json{{"text", "ok:" + prompt}}.dump(), "application/json");
    });
    svr.Post("/v1/embed", [](const httplib::Request& req, httplib::Response& res) {
      const auto body = nlohmann::json::parse(req.body);
      res.set_content(nlohmann::json{{"embedding", {body.at("text").get<std::string>().size(), 1.0}}}.dump(),
                      "application/json");
    });
    port = svr.bind_to_any_port("127.0.0.1");
    th = std::thread([this] { svr.listen_after_bind(); });
    svr.wait_until_ready();
  }
  ~FakeServer() {
    svr.stop();
    th.join();
  }

  ProviderConfig config() const {
    ProviderConfig c;
    c.base_url = "http://127.0.0.1:" + std::to_string(port);
    c.mode = "live";
    c.embed_model = "e";
    c.timeout_seconds = 5;
    return c;
  }
};

}  // namespace

TEST(Http, CompletionRetriesServerErrorsAndSendsToken) {
  FakeServer s;
  auto cfg = s.config();
  cfg.token_env = "FLAVORAXIS_TEST_TOKEN";
  ::setenv("FLAVORAXIS_TEST_TOKEN", "sekrit", 1);
  HttpLlmClient llm(cfg);
  LlmRequest req{"m", "flaky", {}, 0.1, 10};
  EXPECT_EQ(llm.complete(req), "ok:flaky");
  EXPECT_EQ(s.hits.load(), 3);
  EXPECT_EQ(s.last_auth, "Bearer sekrit");
  ::unsetenv("FLAVORAXIS_TEST_TOKEN");
}

TEST(Http, ClientErrorIsNotRetryableAndExhaustionIs) {
  FakeServer s;
  auto cfg = s.config();
  cfg.retries = 1;
  HttpLlmClient llm(cfg);
  try {
    llm.complete({"m", "bad", {}, 0.1, 10});
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_FALSE(e.retryable());
  }
  try {
    llm.complete({"m", "down", {}, 0.1, 10});
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_TRUE(e.retryable());
  }
}

TEST(Http, EmbedderAndRecordMode) {
  FakeServer s;
  testutil::TempDir dir;
  auto cfg = s.config();
  cfg.mode = "record";
  cfg.fixture_dir = dir.path().string();
  {
    auto stack = make_providers(cfg);
    EXPECT_EQ(stack.embedder->embed("abc"), (std::vector<double>{3, 1}));
    EXPECT_EQ(stack.llm->complete({"m", "hi", {}, 0.1, 10}), "ok:hi");
  }
  cfg.mode = "replay";
  cfg.base_url = "http://127.0.0.1:1";
  auto replay = make_providers(cfg);
  EXPECT_EQ(replay.embedder->embed("abc"), (std::vector<double>{3, 1}));
  EXPECT_EQ(replay.llm->complete({"m", "hi", {}, 0.1, 10}), "ok:hi");
}
