#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
// <resolv.h> (via httplib) defines _res, which Eigen uses as a parameter name.
#ifdef _res
#undef _res
#endif
#include <json.hpp>
#include <openssl/evp.h>

#include "flavoraxis/error.hpp"
#include "flavoraxis/text.hpp"

namespace flavoraxis::providers {

struct LlmRequest {
  std::string model;
  std::string prompt;
  nlohmann::json response_schema;
  double temperature = 0.1;
  int max_output_tokens = 16000;
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  // Raw response text (the structured-output JSON document).
  virtual std::string complete(const LlmRequest& req) = 0;
};

class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual std::vector<double> embed(const std::string& text) = 0;
  virtual std::string model() const { return ""; }
};

// ---------------------------------------------------------------------------
// Content addressing

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

// nlohmann::json (not ordered_json) sorts keys, so dump() is canonical.
inline nlohmann::json canonical_request(const LlmRequest& r) {
  return {{"kind", "llm"},
          {"model", r.model},
          {"prompt", r.prompt},
          {"schema", r.response_schema},
          {"temperature", r.temperature},
          {"max_output_tokens", r.max_output_tokens}};
}

inline nlohmann::json canonical_request(const std::string& model, const std::string& text) {
  return {{"kind", "embed"}, {"model", model}, {"text", text}};
}

inline std::string request_key(const nlohmann::json& canonical) { return sha256_hex(canonical.dump()); }

// One JSON file per request/response pair, named by the request hash.
class TranscriptStore {
 public:
  explicit TranscriptStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const { return dir_; }

  std::filesystem::path path_for(const std::string& key) const { return dir_ / (key + ".json"); }

  std::optional<nlohmann::json> find(const nlohmann::json& request) const {
    const auto p = path_for(request_key(request));
    if (!std::filesystem::exists(p)) return std::nullopt;
    auto doc = nlohmann::json::parse(text::read_file(p.string()));
    return doc.at("response");
  }

  std::string save(const nlohmann::json& request, const nlohmann::json& response) {
    std::lock_guard<std::mutex> lock(mu_);
    std::filesystem::create_directories(dir_);
    const auto key = request_key(request);
    nlohmann::json doc{{"request", request}, {"response", response}};
    text::write_file(path_for(key).string(), doc.dump(2) + "\n");
    return key;
  }

 private:
  std::filesystem::path dir_;
  std::mutex mu_;
};

class RecordingLlmClient : public LlmClient {
 public:
  RecordingLlmClient(LlmClient& inner, TranscriptStore& store) : inner_(inner), store_(store) {}
  std::string complete(const LlmRequest& req) override {
    auto resp = inner_.complete(req);
    store_.save(canonical_request(req), resp);
    return resp;
  }

 private:
  LlmClient& inner_;
  TranscriptStore& store_;
};

class ReplayLlmClient : public LlmClient {
 public:
  explicit ReplayLlmClient(const TranscriptStore& store) : store_(store) {}
  std::string complete(const LlmRequest& req) override {
    const auto canon = canonical_request(req);
    auto hit = store_.find(canon);
    if (!hit) throw ProviderError("no recorded response for request " + request_key(canon), false);
    return hit->get<std::string>();
  }

 private:
  const TranscriptStore& store_;
};

class RecordingEmbedder : public TextEmbedder {
 public:
  RecordingEmbedder(TextEmbedder& inner, TranscriptStore& store) : inner_(inner), store_(store) {}
  std::vector<double> embed(const std::string& t) override {
    auto v = inner_.embed(t);
    store_.save(canonical_request(inner_.model(), t), v);
    return v;
  }
  std::string model() const override { return inner_.model(); }

 private:
  TextEmbedder& inner_;
  TranscriptStore& store_;
};

class ReplayEmbedder : public TextEmbedder {
 public:
  ReplayEmbedder(const TranscriptStore& store, std::string model) : store_(store), model_(std::move(model)) {}
  std::vector<double> embed(const std::string& t) override {
    const auto canon = canonical_request(model_, t);
    auto hit = store_.find(canon);
    if (!hit) throw ProviderError("no recorded embedding for '" + t + "'", false);
    return hit->get<std::vector<double>>();
  }
  std::string model() const override { return model_; }

 private:
  const TranscriptStore& store_;
  std::string model_;
};

// Adapters around plain functions, mostly for tests and scripted fixtures.
class FunctionLlmClient : public LlmClient {
 public:
  explicit FunctionLlmClient(std::function<std::string(const LlmRequest&)> fn) : fn_(std::move(fn)) {}
  std::string complete(const LlmRequest& req) override { return fn_(req); }

 private:
  std::function<std::string(const LlmRequest&)> fn_;
};

class FunctionEmbedder : public TextEmbedder {
 public:
  FunctionEmbedder(std::function<std::vector<double>(const std::string&)> fn, std::string model = "function")
      : fn_(std::move(fn)), model_(std::move(model)) {}
  std::vector<double> embed(const std::string& t) override { return fn_(t); }
  std::string model() const override { return model_; }

 private:
  std::function<std::vector<double>(const std::string&)> fn_;
  std::string model_;
};

// Embeddings looked up from a TSV table `text<TAB>v1..vD`.
class TableEmbedder : public TextEmbedder {
 public:
  TableEmbedder(std::map<std::string, std::vector<double>> table, std::string model)
      : table_(std::move(table)), model_(std::move(model)) {}

  static TableEmbedder parse(std::string_view tsv, std::string model) {
    std::map<std::string, std::vector<double>> t;
    std::size_t line_no = 0;
    for (const auto& line : text::lines(tsv)) {
      ++line_no;
      if (text::trim(line).empty() || line[0] == '#') continue;
      const auto f = text::split(line, '\t');
      std::vector<double> v;
      for (std::size_t i = 1; i < f.size(); ++i) {
        auto x = text::parse_double(f[i]);
        if (!x) throw DataError("embedding table line " + std::to_string(line_no) + ": bad value");
        v.push_back(*x);
      }
      t[std::string(f[0])] = std::move(v);
    }
    return TableEmbedder(std::move(t), std::move(model));
  }

  std::vector<double> embed(const std::string& t) override {
    auto it = table_.find(t);
    if (it == table_.end()) throw ProviderError("embedding table has no entry for '" + t + "'", false);
    return it->second;
  }
  std::string model() const override { return model_; }

 private:
  std::map<std::string, std::vector<double>> table_;
  std::string model_;
};

// ---------------------------------------------------------------------------
// HTTP providers

// Generic JSON-over-HTTP transport. Completion requests POST
//   {model, prompt, response_schema, temperature, max_output_tokens}
// to base_url + complete_path and expect {"text": "..."}; embedding requests
// POST {model, text} to base_url + embed_path and expect {"embedding": [...]}.
// The bearer token is read from the environment variable named by token_env.
struct ProviderConfig {
  std::string base_url;
  std::string model;
  std::string embed_model;
  std::string token_env;
  std::string complete_path = "/v1/complete";
  std::string embed_path = "/v1/embed";
  std::string fixture_dir;
  std::string mode = "replay";  // live | record | replay
  double temperature = 0.1;
  int max_output_tokens = 16000;
  int timeout_seconds = 120;
  int retries = 2;
};

inline ProviderConfig provider_config_from_json(const nlohmann::json& j) {
  ProviderConfig c;
  c.base_url = j.value("base_url", c.base_url);
  c.model = j.value("model", c.model);
  c.embed_model = j.value("embed_model", c.embed_model);
  c.token_env = j.value("token_env", c.token_env);
  c.complete_path = j.value("complete_path", c.complete_path);
  c.embed_path = j.value("embed_path", c.embed_path);
  c.fixture_dir = j.value("fixture_dir", c.fixture_dir);
  c.mode = j.value("mode", c.mode);
  c.temperature = j.value("temperature", c.temperature);
  c.max_output_tokens = j.value("max_output_tokens", c.max_output_tokens);
  c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
  c.retries = j.value("retries", c.retries);
  if (c.mode != "live" && c.mode != "record" && c.mode != "replay") {
    throw DataError("provider config: mode must be live, record or replay");
  }
  return c;
}

inline ProviderConfig load_provider_config(const std::string& path) {
  try {
    return provider_config_from_json(nlohmann::json::parse(text::read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

namespace detail {

inline nlohmann::json post_json(const ProviderConfig& cfg, const std::string& path, const nlohmann::json& body) {
  httplib::Client cli(cfg.base_url);
  cli.set_connection_timeout(cfg.timeout_seconds, 0);
  cli.set_read_timeout(cfg.timeout_seconds, 0);
  httplib::Headers headers;
  if (!cfg.token_env.empty()) {
    if (const char* tok = std::getenv(cfg.token_env.c_str()); tok && *tok) {
      headers.emplace("Authorization", std::string("Bearer ") + tok);
    }
  }
  std::string last;
  for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
    if (attempt) std::this_thread::sleep_for(std::chrono::milliseconds(250 << attempt));
    auto res = cli.Post(path, headers, body.dump(), "application/json");
    if (!res) {
      last = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500 || res->status == 429) {
      last = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) throw ProviderError("HTTP " + std::to_string(res->status) + ": " + res->body, false);
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw ProviderError(std::string("unparseable provider response: ") + e.what(), false);
    }
  }
  throw ProviderError(last, true);
}

}  // namespace detail

class HttpLlmClient : public LlmClient {
 public:
  explicit HttpLlmClient(ProviderConfig cfg) : cfg_(std::move(cfg)) {}
  std::string complete(const LlmRequest& req) override {
    nlohmann::json body{{"model", req.model},
                        {"prompt", req.prompt},
                        {"response_schema", req.response_schema},
                        {"temperature", req.temperature},
                        {"max_output_tokens", req.max_output_tokens}};
    const auto resp = detail::post_json(cfg_, cfg_.complete_path, body);
    if (!resp.contains("text") || !resp["text"].is_string()) throw ProviderError("response has no text field", false);
    return resp["text"].get<std::string>();
  }

 private:
  ProviderConfig cfg_;
};

class HttpEmbedder : public TextEmbedder {
 public:
  explicit HttpEmbedder(ProviderConfig cfg) : cfg_(std::move(cfg)) {}
  std::vector<double> embed(const std::string& t) override {
    const auto resp = detail::post_json(cfg_, cfg_.embed_path, {{"model", cfg_.embed_model}, {"text", t}});
    try {
      return resp.at("embedding").get<std::vector<double>>();
    } catch (const nlohmann::json::exception&) {
      throw ProviderError("response has no embedding field", false);
    }
  }
  std::string model() const override { return cfg_.embed_model; }

 private:
  ProviderConfig cfg_;
};

// Owns the client stack selected by a config: live, live + recording, or
// replay from fixture_dir.
struct ProviderStack {
  std::unique_ptr<TranscriptStore> store;
  std::unique_ptr<LlmClient> live_llm;
  std::unique_ptr<TextEmbedder> live_embed;
  std::unique_ptr<LlmClient> llm;
  std::unique_ptr<TextEmbedder> embedder;
};

inline ProviderStack make_providers(const ProviderConfig& cfg) {
  ProviderStack s;
  if (cfg.mode != "live") {
    if (cfg.fixture_dir.empty()) throw DataError("provider config: " + cfg.mode + " mode needs fixture_dir");
    s.store = std::make_unique<TranscriptStore>(cfg.fixture_dir);
  }
  if (cfg.mode == "replay") {
    s.llm = std::make_unique<ReplayLlmClient>(*s.store);
    s.embedder = std::make_unique<ReplayEmbedder>(*s.store, cfg.embed_model);
    return s;
  }
  s.live_llm = std::make_unique<HttpLlmClient>(cfg);
  s.live_embed = std::make_unique<HttpEmbedder>(cfg);
  if (cfg.mode == "record") {
    s.llm = std::make_unique<RecordingLlmClient>(*s.live_llm, *s.store);
    s.embedder = std::make_unique<RecordingEmbedder>(*s.live_embed, *s.store);
  } else {
    s.llm = std::move(s.live_llm);
    s.embedder = std::move(s.live_embed);
  }
  return s;
}

}  // namespace flavoraxis::providers
