#include <gtest/gtest.h>

#include <chrono>
#include <thread>

#include "flavoraxis/service.hpp"
#include "test_util.hpp"

using namespace flavoraxis;
using Json = nlohmann::json;

namespace {

// A running service over a scratch copy of the workspace fixture.
class Running {
 public:
  explicit Running(std::string token = "") {
    std::filesystem::copy(testutil::fixture("workspace"), dir_.path(), std::filesystem::copy_options::recursive);
    service::Options opt;
    opt.token = std::move(token);
    svc_ = std::make_unique<service::Service>(workspace::Workspace::open(dir_.path()), opt);
    port_ = svc_->bind_any_port("127.0.0.1");
    th_ = std::thread([this] { svc_->listen_after_bind(); });
    svc_->wait_until_ready();
    cli_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    cli_->set_read_timeout(60, 0);
  }
  ~Running() {
    svc_->stop();
    th_.join();
  }

  httplib::Result get(const std::string& path) { return cli_->Get(path); }
  httplib::Result post(const std::string& path, const std::string& body, const std::string& token = "") {
    httplib::Headers h;
    if (!token.empty()) h.emplace("Authorization", "Bearer " + token);
    return cli_->Post(path, h, body, "application/json");
  }

  // Starts a recompute and polls until it settles.
  Json recompute(const std::string& token = "") {
    auto r = post("/api/recompute", "{}", token);
    EXPECT_EQ(r->status, 202);
    const auto id = Json::parse(r->body)["id"].get<std::size_t>();
    for (int i = 0; i < 600; ++i) {
      auto j = Json::parse(get("/api/jobs/" + std::to_string(id))->body);
      if (j["status"] != "running") return j;
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    return Json{{"status", "timeout"}};
  }

  const testutil::TempDir& dir() const { return dir_; }

 private:
  testutil::TempDir dir_{"svc"};
  std::unique_ptr<service::Service> svc_;
  int port_ = 0;
  std::thread th_;
  std::unique_ptr<httplib::Client> cli_;
};

}  // namespace

TEST(Service, HealthCarriesManifestHashHeader) {
  Running s;
  auto r = s.get("/api/health");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  const auto body = Json::parse(r->body);
  EXPECT_EQ(body["status"], "ok");
  EXPECT_EQ(r->get_header_value("X-Manifest-Hash"), body["manifest_hash"]);
  EXPECT_EQ(body["manifest_hash"].get<std::string>().size(), 64u);
}

TEST(Service, GroupsAndIngredients) {
  Running s;
  auto g = Json::parse(s.get("/api/groups")->body);
  EXPECT_EQ(g["group_count"], 42);
  EXPECT_TRUE(g["baseline_cosine"].is_number());
  const auto& basil = g["groups"][0];
  EXPECT_EQ(basil["canonical_id"], 101);
  EXPECT_EQ(basil["members"].size(), 3u);
  auto ing = Json::parse(s.get("/api/ingredients")->body);
  EXPECT_EQ(ing["count"], 42);
  EXPECT_TRUE(ing["ingredients"][0].contains("cuisines"));
}

TEST(Service, MergeReducesGroupCountChangesHashAndPersists) {
  Running s;
  const auto before = s.get("/api/health")->get_header_value("X-Manifest-Hash");
  auto r = s.post("/api/overrides", R"({"op": "merge", "sources": [102], "target": 101})");
  ASSERT_EQ(r->status, 200) << r->body;
  auto j = Json::parse(r->body);
  EXPECT_EQ(j["group_count"], 41);
  EXPECT_EQ(j["log_length"], 1);
  const auto after = r->get_header_value("X-Manifest-Hash");
  EXPECT_NE(before, after);
  EXPECT_EQ(Json::parse(s.get("/api/groups")->body)["group_count"], 41);
  // Reopening the workspace from disk replays the appended log.
  auto ws = workspace::Workspace::open(s.dir().path());
  EXPECT_EQ(ws.groups().size(), 41u);
  EXPECT_EQ(ws.manifest_hash(), after);
}

TEST(Service, MalformedAndInvalidOverridesAre400AndLeaveLogAlone) {
  Running s;
  EXPECT_EQ(s.post("/api/overrides", "{not json")->status, 400);
  EXPECT_EQ(s.post("/api/overrides", R"({"op": "explode"})")->status, 400);
  EXPECT_EQ(s.post("/api/overrides", R"({"op": "merge", "sources": [999], "target": 101})")->status, 400);
  EXPECT_EQ(s.post("/api/overrides", R"({"actions": []})")->status, 400);
  EXPECT_FALSE(std::filesystem::exists(s.dir().path() / "overrides.json"));
  EXPECT_EQ(Json::parse(s.get("/api/groups")->body)["group_count"], 42);
}

TEST(Service, DimensionsNeedRecomputeAndUnknownIs404) {
  Running s;
  EXPECT_EQ(s.get("/api/dimensions/nonesuch")->status, 404);
  EXPECT_EQ(s.get("/api/dimensions/sweet")->status, 404);
  EXPECT_EQ(s.get("/api/culture")->status, 404);
  const auto job = s.recompute();
  ASSERT_EQ(job["status"], "done") << job.dump();
  auto r = s.get("/api/dimensions/sweet");
  ASSERT_EQ(r->status, 200);
  auto d = Json::parse(r->body);
  EXPECT_EQ(d["n"], 42);
  EXPECT_GT(d["spearman"]["statistic"].get<double>(), 0.8);
  EXPECT_DOUBLE_EQ(d["permutation"]["p_value"].get<double>(), 0.01);
  EXPECT_EQ(d["provenance"]["manifest_hash"], job["manifest_hash"]);
  EXPECT_EQ(s.get("/api/dimensions/nonesuch")->status, 404);
  auto c = Json::parse(s.get("/api/culture")->body);
  EXPECT_EQ(c["purity"]["k"], 5);
  EXPECT_TRUE(std::filesystem::exists(s.dir().path() / "reports" / "dimensions" / "sweet.json"));
  EXPECT_EQ(s.get("/api/jobs/999")->status, 404);
}

TEST(Service, ReportsFromDiskServedAfterRestart) {
  testutil::TempDir keep("svc_keep");
  {
    Running s;
    ASSERT_EQ(s.recompute()["status"], "done");
    std::filesystem::copy(s.dir().path(), keep.path(), std::filesystem::copy_options::recursive);
  }
  service::Service svc(workspace::Workspace::open(keep.path()), {});
  const int port = svc.bind_any_port("127.0.0.1");
  std::thread th([&] { svc.listen_after_bind(); });
  svc.wait_until_ready();
  httplib::Client cli("127.0.0.1", port);
  EXPECT_EQ(cli.Get("/api/dimensions/sweet")->status, 200);
  svc.stop();
  th.join();
}

TEST(Service, BearerTokenGuardsPostsOnly) {
  Running s("t0ken");
  EXPECT_EQ(s.get("/api/groups")->status, 200);
  EXPECT_EQ(s.post("/api/recompute", "{}")->status, 401);
  EXPECT_EQ(s.post("/api/recompute", "{}", "wrong")->status, 401);
  EXPECT_EQ(s.post("/api/overrides", R"({"op": "rename", "canonical_id": 101, "name": "thai basil"})")->status, 401);
  auto r = s.post("/api/overrides", R"({"op": "rename", "canonical_id": 101, "name": "thai basil"})", "t0ken");
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(s.recompute("t0ken")["status"], "done");
}

TEST(Service, ProjectionHasPoleAxisAndReadersRunDuringJobs) {
  Running s;
  auto r = s.get("/api/projection3d");
  ASSERT_EQ(r->status, 200);
  auto j = Json::parse(r->body);
  EXPECT_FALSE(j["points"].empty());
  ASSERT_TRUE(j["pole_axis"].is_object());
  EXPECT_TRUE(j["points"][0].contains("along"));
  auto job = s.post("/api/recompute", "{}");
  ASSERT_EQ(job->status, 202);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(s.get("/api/groups")->status, 200);
  const auto id = Json::parse(job->body)["id"].get<std::size_t>();
  for (int i = 0; i < 600; ++i) {
    if (Json::parse(s.get("/api/jobs/" + std::to_string(id))->body)["status"] != "running") break;
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}
