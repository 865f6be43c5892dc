#pragma once

// JSON-over-HTTP view of a workspace. Readers share a lock; override appends
// and report installs take it exclusively. Recomputation runs as a background
// job (one at a time) on a snapshot and is only started by POST /api/recompute.

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>

#include "flavoraxis/workspace.hpp"

#include <httplib.h>
#include <json.hpp>

namespace flavoraxis::service {

struct Job {
  std::size_t id = 0;
  std::string status;  // running | done | failed
  std::string error;
  std::string manifest_hash;
};

inline nlohmann::ordered_json to_json(const Job& j) {
  nlohmann::ordered_json o;
  o["id"] = j.id;
  o["status"] = j.status;
  o["manifest_hash"] = j.manifest_hash;
  if (!j.error.empty()) o["error"] = j.error;
  return o;
}

struct Options {
  // When non-empty, POST endpoints require "Authorization: Bearer <token>".
  std::string token;
  bool write_reports = true;
};

class Service {
 public:
  Service(workspace::Workspace ws, Options opt) : ws_(std::move(ws)), opt_(std::move(opt)), hash_(ws_.manifest_hash()) {
    load_reports();
    routes();
  }
  ~Service() { stop(); }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds and serves on the calling thread until stop().
  bool listen(const std::string& host, int port) { return server_.listen(host, port); }
  int bind_any_port(const std::string& host) { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void wait_until_ready() { server_.wait_until_ready(); }

  void stop() {
    server_.stop();
    std::lock_guard lk(job_mu_);
    if (worker_.joinable()) worker_.join();
  }

  // Blocks until the current job (if any) finishes.
  void wait_for_jobs() {
    std::lock_guard lk(job_mu_);
    if (worker_.joinable()) worker_.join();
  }

 private:
  using Json = nlohmann::ordered_json;

  void reply(httplib::Response& res, int status, Json body) {
    std::string hash;
    {
      std::lock_guard lk(hash_mu_);
      hash = hash_;
    }
    if (body.is_object() && !body.contains("manifest_hash")) body["manifest_hash"] = hash;
    res.status = status;
    res.set_header("X-Manifest-Hash", hash);
    res.set_content(body.dump(), "application/json");
  }

  void error(httplib::Response& res, int status, const std::string& msg) { reply(res, status, Json{{"error", msg}}); }

  bool authorized(const httplib::Request& req, httplib::Response& res) {
    if (opt_.token.empty() || req.get_header_value("Authorization") == "Bearer " + opt_.token) return true;
    error(res, 401, "missing or wrong bearer token");
    return false;
  }

  Json groups_body() const {
    Json groups = Json::array();
    for (const auto& g : ws_.groups()) groups.push_back(workspace::to_json(g));
    Json j;
    j["group_count"] = groups.size();
    j["groups"] = groups;
    return j;
  }

  Json variant_baseline() const {
    for (const auto& [id, members] : ws_.map().groups()) {
      if (members.size() >= 2) {
        const auto& m = ws_.manifest();
        return curation::variant_noise(ws_.raw(), ws_.map(), 1, Seed{m.seed}).baseline;
      }
    }
    return Json();
  }

  void routes() {
    server_.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, Json{{"status", "ok"}});
    });

    server_.Get("/api/ingredients", [this](const httplib::Request&, httplib::Response& res) {
      Json list = Json::array();
      {
        std::shared_lock lk(mu_);
        const auto& tags = ws_.cuisine_tags();
        for (const auto& g : ws_.groups()) {
          Json e;
          e["id"] = g.canonical_id;
          e["name"] = g.name;
          e["categories"] = g.categories;
          e["variant_count"] = g.members.size();
          if (tags) {
            auto it = tags->tags.find(g.name);
            e["cuisines"] = it == tags->tags.end() ? std::vector<std::string>{} : it->second;
          }
          list.push_back(std::move(e));
        }
      }
      reply(res, 200, Json{{"count", list.size()}, {"ingredients", list}});
    });

    server_.Get("/api/groups", [this](const httplib::Request&, httplib::Response& res) {
      Json j;
      {
        std::shared_lock lk(mu_);
        j = groups_body();
        j["baseline_cosine"] = variant_baseline();
        j["audit"] = ws_.audit();
      }
      reply(res, 200, std::move(j));
    });

    server_.Post("/api/overrides", [this](const httplib::Request& req, httplib::Response& res) {
      if (!authorized(req, res)) return;
      curation::OverrideSet actions;
      try {
        const auto body = nlohmann::json::parse(req.body);
        if (body.is_object() && body.contains("actions")) {
          actions = curation::overrides_from_json(body);
        } else {
          actions.actions.push_back(curation::action_from_json(body));
        }
      } catch (const nlohmann::json::exception& e) {
        return error(res, 400, std::string("malformed JSON: ") + e.what());
      } catch (const DataError& e) {
        return error(res, 400, e.what());
      }
      if (actions.actions.empty()) return error(res, 400, "no actions");
      Json j;
      try {
        std::unique_lock lk(mu_);
        const auto audit = ws_.append_overrides(actions);
        std::lock_guard hl(hash_mu_);
        hash_ = ws_.manifest_hash();
        j = groups_body();
        j["applied"] = audit;
        j["log_length"] = ws_.overrides().actions.size();
      } catch (const DataError& e) {
        return error(res, 400, e.what());
      } catch (const InvalidArgument& e) {
        return error(res, 400, e.what());
      }
      reply(res, 200, std::move(j));
    });

    server_.Get(R"(/api/dimensions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string name = req.matches[1];
      Json body;
      {
        std::shared_lock lk(mu_);
        if (!ws_.labels().count(name)) return error(res, 404, "unknown dimension '" + name + "'");
        auto it = dimensions_.find(name);
        if (it == dimensions_.end()) {
          return error(res, 404, "no report for '" + name + "' yet; POST /api/recompute");
        }
        body = it->second;
      }
      reply(res, 200, std::move(body));
    });

    server_.Get("/api/culture", [this](const httplib::Request&, httplib::Response& res) {
      Json body;
      {
        std::shared_lock lk(mu_);
        if (!ws_.cuisine_tags()) return error(res, 404, "workspace has no cuisine tags");
        if (!culture_) return error(res, 404, "no culture report yet; POST /api/recompute");
        body = *culture_;
      }
      reply(res, 200, std::move(body));
    });

    server_.Get("/api/projection3d", [this](const httplib::Request&, httplib::Response& res) {
      Json body;
      try {
        std::shared_lock lk(mu_);
        if (!ws_.coords()) return error(res, 404, "workspace has no 3D coordinates");
        body = projection_body();
      } catch (const InvalidArgument& e) {
        return error(res, 422, e.what());
      } catch (const DataError& e) {
        return error(res, 422, e.what());
      }
      reply(res, 200, std::move(body));
    });

    server_.Post("/api/recompute", [this](const httplib::Request& req, httplib::Response& res) {
      if (!authorized(req, res)) return;
      reply(res, 202, to_json(start_job()));
    });

    server_.Get(R"(/api/jobs/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto id = static_cast<std::size_t>(std::stoull(req.matches[1]));
      std::optional<Job> job;
      {
        std::lock_guard lk(jobs_mu_);
        auto it = jobs_.find(id);
        if (it != jobs_.end()) job = it->second;
      }
      if (!job) return error(res, 404, "unknown job");
      reply(res, 200, to_json(*job));
    });
  }

  Json projection_body() const {
    const auto& coords = *ws_.coords();
    const auto& cur = ws_.curated();
    const auto& tags = ws_.cuisine_tags();
    Json points = Json::array();
    for (const auto& [id, x] : coords) {
      Json p{{"id", id}, {"x", x[0]}, {"y", x[1]}, {"z", x[2]}};
      if (auto r = cur.find_id(id)) {
        const auto& name = cur.entity(*r).name;
        p["name"] = name;
        p["categories"] = ws_.map().catalog.at(id).categories;
        if (tags) {
          auto it = tags->tags.find(name);
          p["cuisines"] = it == tags->tags.end() ? std::vector<std::string>{} : it->second;
        }
      }
      points.push_back(std::move(p));
    }
    Json j;
    j["points"] = points;
    j["pole_axis"] = Json();
    if (ws_.poles()) {
      std::vector<std::int64_t> sweet, savoury;
      for (const auto& [name, v] : ws_.poles()->labels) {
        const auto* s = std::get_if<std::string>(&v);
        auto r = cur.find_name(name);
        if (!s || !r || !coords.count(cur.entity(*r).id)) continue;
        if (*s == "sweet") sweet.push_back(cur.entity(*r).id);
        if (*s == "savoury") savoury.push_back(cur.entity(*r).id);
      }
      if (!sweet.empty() && !savoury.empty()) {
        const auto pp = axes::pole_plane_projection(coords, sweet, savoury);
        const auto s3 = [](const axes::Vec3& v) { return Json::array({v[0], v[1], v[2]}); };
        j["pole_axis"] = {{"origin", s3(pp.origin)},
                          {"direction", s3(pp.axis)},
                          {"basis_u", s3(pp.basis_u)},
                          {"basis_v", s3(pp.basis_v)},
                          {"n_sweet", sweet.size()},
                          {"n_savoury", savoury.size()}};
        for (auto& p : j["points"]) {
          const auto id = p["id"].get<std::int64_t>();
          p["along"] = pp.along.at(id);
          p["planar"] = pp.planar.at(id);
        }
      }
    }
    return j;
  }

  Job start_job() {
    std::lock_guard lk(job_mu_);
    {
      std::lock_guard jl(jobs_mu_);
      if (running_ && jobs_.count(*running_)) return jobs_.at(*running_);
    }
    if (worker_.joinable()) worker_.join();
    workspace::Snapshot snap;
    {
      std::shared_lock sl(mu_);
      snap = workspace::snapshot(ws_);
    }
    Job job{++next_job_, "running", "", snap.manifest_hash};
    {
      std::lock_guard jl(jobs_mu_);
      jobs_[job.id] = job;
      running_ = job.id;
    }
    worker_ = std::thread([this, id = job.id, snap = std::move(snap)] {
      std::string err;
      try {
        auto dims = workspace::dimension_reports(snap);
        auto cult = workspace::culture_report(snap);
        auto noise = workspace::noise_report(snap);
        std::unique_lock wl(mu_);
        if (opt_.write_reports) write_reports(dims, cult, noise);
        dimensions_ = std::move(dims);
        culture_ = std::move(cult);
      } catch (const std::exception& e) {
        err = e.what();
      }
      std::lock_guard jl(jobs_mu_);
      jobs_[id].status = err.empty() ? "done" : "failed";
      jobs_[id].error = err;
      running_.reset();
    });
    return job;
  }

  void write_reports(const std::map<std::string, Json>& dims, const std::optional<Json>& cult, const Json& noise) {
    const auto root = ws_.dir() / "reports";
    std::filesystem::create_directories(root / "dimensions");
    for (const auto& [name, j] : dims) text::write_file((root / "dimensions" / (name + ".json")).string(), j.dump(2) + "\n");
    if (cult) text::write_file((root / "culture.json").string(), cult->dump(2) + "\n");
    text::write_file((root / "noise.json").string(), noise.dump(2) + "\n");
  }

  // Reports from an earlier session are served as-is; their provenance says
  // which manifest produced them.
  void load_reports() {
    const auto root = ws_.dir() / "reports";
    std::error_code ec;
    if (std::filesystem::is_directory(root / "dimensions", ec)) {
      for (const auto& e : std::filesystem::directory_iterator(root / "dimensions")) {
        if (e.path().extension() != ".json") continue;
        const auto name = e.path().stem().string();
        if (!ws_.labels().count(name)) continue;
        try {
          dimensions_[name] = Json::parse(text::read_file(e.path().string()));
        } catch (const nlohmann::json::exception&) {
        }
      }
    }
    if (std::filesystem::exists(root / "culture.json", ec)) {
      try {
        culture_ = Json::parse(text::read_file((root / "culture.json").string()));
      } catch (const nlohmann::json::exception&) {
      }
    }
  }

  workspace::Workspace ws_;
  Options opt_;
  httplib::Server server_;
  mutable std::shared_mutex mu_;
  std::map<std::string, Json> dimensions_;
  std::optional<Json> culture_;
  std::mutex hash_mu_;
  std::string hash_;

  std::mutex job_mu_;  // serializes job start / join
  std::mutex jobs_mu_;
  std::map<std::size_t, Job> jobs_;
  std::optional<std::size_t> running_;
  std::size_t next_job_ = 0;
  std::thread worker_;
};

}  // namespace flavoraxis::service
