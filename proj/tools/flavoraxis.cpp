// flavoraxis command-line entry point. Every subcommand reads flat files and
// writes flat reports; JSON reports carry a provenance block with the seed
// and the sha256 of every input file.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "flavoraxis/axes.hpp"
#include "flavoraxis/crossval.hpp"
#include "flavoraxis/culture.hpp"
#include "flavoraxis/curation.hpp"
#include "flavoraxis/matchdb.hpp"
#include "flavoraxis/providers.hpp"
#include "flavoraxis/service.hpp"
#include "flavoraxis/synth.hpp"
#include "flavoraxis/tagger.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;
using namespace flavoraxis;

namespace {

struct Provenance {
  std::string command;
  std::optional<std::uint64_t> seed;
  Json inputs = Json::object();
  Json parameters = Json::object();

  void input(const std::string& key, const std::string& path) {
    if (path.empty()) return;
    inputs[key] = {{"file", fs::path(path).filename().string()},
                   {"sha256", providers::sha256_hex(text::read_file(path))}};
  }
  void inputs_list(const std::string& key, const std::vector<std::string>& paths) {
    Json arr = Json::array();
    for (const auto& p : paths) {
      arr.push_back({{"file", fs::path(p).filename().string()}, {"sha256", providers::sha256_hex(text::read_file(p))}});
    }
    if (!arr.empty()) inputs[key] = arr;
  }
  Json to_json() const {
    Json j;
    j["command"] = command;
    if (seed) j["seed"] = *seed;
    j["parameters"] = parameters;
    j["inputs"] = inputs;
    return j;
  }
};

Json with_provenance(Json report, const Provenance& p) {
  report["provenance"] = p.to_json();
  return report;
}

void write_json(const std::string& path, const Json& j) { text::write_file(path, j.dump(2) + "\n"); }

std::string in_dir(const std::string& dir, const std::string& file) { return (fs::path(dir) / file).string(); }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

std::vector<std::string> read_names(const std::string& path) {
  std::vector<std::string> out;
  for (const auto& l : text::lines(text::read_file(path))) {
    auto t = std::string(text::trim(l));
    if (!t.empty() && t[0] != '#') out.push_back(t);
  }
  if (out.empty()) throw DataError(path + ": no names");
  return out;
}

std::set<std::int64_t> read_ids(const std::string& path) {
  std::set<std::int64_t> out;
  std::size_t n = 0;
  for (const auto& l : text::lines(text::read_file(path))) {
    ++n;
    auto t = text::trim(l);
    if (t.empty() || t[0] == '#') continue;
    auto id = text::parse_int(t);
    if (!id) throw DataError(path + " line " + std::to_string(n) + ": not an id");
    out.insert(*id);
  }
  return out;
}

curation::ConsolidationMap load_map(const std::string& map, const std::string& catalog) {
  return curation::load_consolidation_map(map, catalog.empty() ? std::nullopt : std::optional<std::string>(catalog));
}

curation::ConsolidationMap load_map_with_overrides(const std::string& map, const std::string& catalog,
                                                   const std::string& overrides, std::vector<std::string>* audit) {
  auto m = load_map(map, catalog);
  if (overrides.empty()) return m;
  auto r = curation::apply_overrides(m, curation::load_overrides(overrides));
  if (audit) *audit = std::move(r.audit);
  return std::move(r.map);
}

// Scripted completion provider: a JSON object from ingredient name to the
// response text. The request's ingredient is the longest table key that
// appears double-quoted in the prompt.
providers::FunctionLlmClient table_llm(const std::string& path) {
  const auto j = nlohmann::json::parse(text::read_file(path));
  std::map<std::string, std::string> table;
  for (const auto& [k, v] : j.items()) table[k] = v.is_string() ? v.get<std::string>() : v.dump();
  return providers::FunctionLlmClient([table](const providers::LlmRequest& req) {
    const std::string* best = nullptr;
    const std::string* key = nullptr;
    for (const auto& [k, v] : table) {
      if (req.prompt.find("\"" + k + "\"") != std::string::npos && (!key || k.size() > key->size())) {
        key = &k;
        best = &v;
      }
    }
    if (!best) throw ProviderError("response table has no entry for this prompt", false);
    return *best;
  });
}

// Provider flags shared by match and tag.
struct ProviderFlags {
  std::string config;
  std::string replay;
  std::string record;
  std::string embed_table;
  std::string llm_table;
  std::string embed_model = "table";

  void add(CLI::App* app, bool with_embed) {
    app->add_option("--provider-config", config, "provider config JSON (live / record / replay)");
    app->add_option("--replay", replay, "replay recorded transcripts from this directory");
    app->add_option("--record", record, "record transcripts of the table providers into this directory");
    app->add_option("--llm-table", llm_table, "scripted responses: JSON object ingredient -> response");
    if (with_embed) {
      app->add_option("--embed-table", embed_table, "text vectors: TSV text<TAB>v1..vD");
      app->add_option("--embed-model", embed_model, "model name recorded with table embeddings");
    }
  }
};

struct Providers {
  std::unique_ptr<providers::TranscriptStore> store;
  std::unique_ptr<providers::LlmClient> base_llm;
  std::unique_ptr<providers::TextEmbedder> base_embed;
  std::unique_ptr<providers::LlmClient> llm_wrap;
  std::unique_ptr<providers::TextEmbedder> embed_wrap;
  providers::ProviderStack stack;
  providers::LlmClient* llm = nullptr;
  providers::TextEmbedder* embedder = nullptr;
};

Providers make(const ProviderFlags& f) {
  Providers p;
  const int sources = !f.config.empty() + !f.replay.empty() + !(f.llm_table.empty() && f.embed_table.empty());
  if (sources > 1) throw CLI::ValidationError("use one of --provider-config, --replay or the table providers");
  if (!f.record.empty() && (f.llm_table.empty() && f.embed_table.empty())) {
    throw CLI::ValidationError("--record needs --llm-table or --embed-table (live recording uses --provider-config)");
  }
  if (!f.config.empty()) {
    p.stack = providers::make_providers(providers::load_provider_config(f.config));
    p.llm = p.stack.llm.get();
    p.embedder = p.stack.embedder.get();
  } else if (!f.replay.empty()) {
    if (!fs::is_directory(f.replay)) throw DataError("transcript directory not found: " + f.replay);
    p.store = std::make_unique<providers::TranscriptStore>(f.replay);
    p.base_llm = std::make_unique<providers::ReplayLlmClient>(*p.store);
    p.base_embed = std::make_unique<providers::ReplayEmbedder>(*p.store, f.embed_model);
    p.llm = p.base_llm.get();
    p.embedder = p.base_embed.get();
  } else {
    if (!f.llm_table.empty()) {
      p.base_llm = std::make_unique<providers::FunctionLlmClient>(table_llm(f.llm_table));
      p.llm = p.base_llm.get();
    }
    if (!f.embed_table.empty()) {
      p.base_embed = std::make_unique<providers::TableEmbedder>(
          providers::TableEmbedder::parse(text::read_file(f.embed_table), f.embed_model));
      p.embedder = p.base_embed.get();
    }
    if (!f.record.empty()) {
      p.store = std::make_unique<providers::TranscriptStore>(f.record);
      if (p.llm) {
        p.llm_wrap = std::make_unique<providers::RecordingLlmClient>(*p.llm, *p.store);
        p.llm = p.llm_wrap.get();
      }
      if (p.embedder) {
        p.embed_wrap = std::make_unique<providers::RecordingEmbedder>(*p.embedder, *p.store);
        p.embedder = p.embed_wrap.get();
      }
    }
  }
  return p;
}

std::string data_path(const std::string& rel) { return std::string(FLAVORAXIS_DATA_DIR) + "/" + rel; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Embedding-axis analysis of ingredient vectors"};
  app.require_subcommand(1);
  unsigned workers = 1;
  app.add_option("--workers", workers, "worker threads for parallel stages")->check(CLI::Range(1u, 256u));

  // ---- pairs
  auto* pairs = app.add_subcommand("pairs", "all unordered pairwise cosines, or paired similarity vs a random baseline");
  std::string p_emb, p_out, p_paired;
  std::uint64_t p_seed = 0;
  pairs->add_option("--embeddings", p_emb, "embeddings TSV")->required();
  pairs->add_option("--out", p_out, "output (CSV, or JSON with --paired)")->required();
  pairs->add_option("--paired", p_paired, "CSV id_a,id_b of designated pairs");
  pairs->add_option("--seed", p_seed, "seed for the random-pair baseline");

  // ---- consolidate
  auto* cons = app.add_subcommand("consolidate", "average raw vectors into canonical ingredients");
  std::string c_emb, c_map, c_cat, c_ovr, c_out, c_map_out, c_cat_out, c_back;
  cons->add_option("--embeddings", c_emb, "raw embeddings TSV")->required();
  cons->add_option("--map", c_map, "consolidation map CSV")->required();
  cons->add_option("--catalog", c_cat, "canonical catalog CSV");
  cons->add_option("--overrides", c_ovr, "override log JSON");
  cons->add_option("--out", c_out, "curated embeddings TSV")->required();
  cons->add_option("--map-out", c_map_out, "write the map after overrides");
  cons->add_option("--catalog-out", c_cat_out, "write the catalog after overrides");
  cons->add_option("--categories-out", c_back, "category tags back-projected to original names (labels JSON)");

  // ---- noise
  auto* noise = app.add_subcommand("noise", "within-group similarity of consolidated variants");
  std::string n_emb, n_map, n_cat, n_ovr, n_out;
  std::size_t n_top = 50;
  std::uint64_t n_seed = 0;
  noise->add_option("--embeddings", n_emb, "raw embeddings TSV")->required();
  noise->add_option("--map", n_map, "consolidation map CSV")->required();
  noise->add_option("--catalog", n_cat, "canonical catalog CSV");
  noise->add_option("--overrides", n_ovr, "override log JSON");
  noise->add_option("--top-k", n_top, "groups with most variants")->check(CLI::PositiveNumber);
  noise->add_option("--seed", n_seed, "seed for the cross-group baseline");
  noise->add_option("--out", n_out, "report JSON")->required();

  // ---- analyze
  auto* analyze = app.add_subcommand("analyze", "axis construction and separation statistics for one dimension");
  std::string a_emb, a_labels, a_dim, a_measured, a_subset, a_out = ".";
  bool a_tercile = false, a_log = false;
  std::size_t a_perm = 0;
  std::uint64_t a_seed = 0;
  analyze->add_option("--embeddings", a_emb, "embeddings TSV")->required();
  analyze->add_option("--labels", a_labels, "label set JSON")->required();
  analyze->add_option("--dimension", a_dim, "expected dimension name (checked against the label file)");
  analyze->add_option("--measured", a_measured, "numeric measurements to correlate with the label axis");
  analyze->add_option("--subset", a_subset, "ids (one per line): evaluate subset and complement separately");
  analyze->add_flag("--tercile", a_tercile, "tercile poles regardless of label kind");
  analyze->add_flag("--log10", a_log, "log10-transform numeric values (non-positive values dropped)");
  analyze->add_option("--permutations", a_perm, "label shuffles for a permutation p (0 = off)");
  analyze->add_option("--seed", a_seed, "permutation seed");
  analyze->add_option("--out-dir", a_out, "report directory");

  // ---- crossval
  auto* cv = app.add_subcommand("crossval", "repeated k-fold out-of-sample evaluation");
  std::string v_emb, v_labels, v_out, v_folds, v_metric;
  std::size_t v_k = 10, v_rep = 20;
  std::uint64_t v_seed = 0;
  bool v_tercile = false, v_log = false;
  cv->add_option("--embeddings", v_emb, "embeddings TSV")->required();
  cv->add_option("--labels", v_labels, "label set JSON")->required();
  cv->add_option("--k", v_k, "folds")->check(CLI::Range(std::size_t{2}, std::size_t{1000}));
  cv->add_option("--repeats", v_rep, "repeats")->check(CLI::PositiveNumber);
  cv->add_option("--seed", v_seed, "master seed");
  cv->add_option("--metric", v_metric, "spearman_rho or cohens_d (default by label kind)")
      ->check(CLI::IsMember({"spearman_rho", "cohens_d"}));
  cv->add_flag("--tercile", v_tercile, "tercile poles");
  cv->add_flag("--log10", v_log, "log10-transform numeric values");
  cv->add_option("--out", v_out, "report JSON")->required();
  cv->add_option("--folds-csv", v_folds, "per-fold results CSV");

  // ---- culture
  auto* cult = app.add_subcommand("culture", "cuisine cluster purity, tightness and profiles");
  std::string u_emb, u_tags, u_out = ".", u_cmp_emb, u_cmp_tags;
  std::vector<std::string> u_axes;
  std::size_t u_k = 10, u_sub = 0, u_iter = 200, u_perm = 999;
  std::uint64_t u_seed = 0;
  cult->add_option("--embeddings", u_emb, "embeddings TSV")->required();
  cult->add_option("--tags", u_tags, "cuisine tags JSON")->required();
  cult->add_option("--k", u_k, "neighbours")->check(CLI::PositiveNumber);
  cult->add_option("--subsample", u_sub, "also report purity with the pool subsampled to this size");
  cult->add_option("--iterations", u_iter, "subsampling iterations");
  cult->add_option("--axes", u_axes, "label sets whose axes profile the cuisine centroids");
  cult->add_option("--permutations", u_perm, "tag shuffles for profile p-values");
  cult->add_option("--seed", u_seed, "master seed");
  cult->add_option("--compare-embeddings", u_cmp_emb, "second space (e.g. raw) for paired comparisons");
  cult->add_option("--compare-tags", u_cmp_tags, "tags for the second space");
  cult->add_option("--out-dir", u_out, "report directory");

  // ---- match
  auto* match = app.add_subcommand("match", "map ingredient names to measurement-database entries");
  std::string m_names, m_db, m_proc, m_syn, m_map, m_cat, m_out, m_nutrient, m_labels_out, m_prompt;
  ProviderFlags m_prov;
  double m_accept = matchdb::kRuleAcceptScore;
  match->add_option("--names", m_names, "ingredient names, one per line")->required();
  match->add_option("--db", m_db, "database CSV entry_id,description,nutrient,value,units")->required();
  match->add_option("--processing-words", m_proc, "processing word list")->default_str("bundled list");
  match->add_option("--synonyms", m_syn, "synonym CSV from,to")->default_str("bundled list");
  match->add_option("--map", m_map, "consolidation map (variant names become aliases)");
  match->add_option("--catalog", m_cat, "canonical catalog CSV");
  match->add_option("--validation-prompt", m_prompt, "validation prompt JSON");
  match->add_option("--rule-accept", m_accept, "minimum rule score accepted without the later layers");
  m_prov.add(match, true);
  match->add_option("--out", m_out, "match table CSV")->required();
  match->add_option("--nutrient", m_nutrient, "nutrient (or a+b+c) to join into a numeric label set");
  match->add_option("--labels-out", m_labels_out, "numeric label set JSON for --nutrient");

  // ---- tag
  auto* tag = app.add_subcommand("tag", "batch classification into label sets");
  std::string t_names, t_schema, t_out = ".";
  ProviderFlags t_prov;
  std::size_t t_batch = 0, t_rounds = 3;
  unsigned t_flight = 1;
  tag->add_option("--names", t_names, "ingredient names, one per line")->required();
  tag->add_option("--schema", t_schema, "dimension family schema JSON")->required();
  t_prov.add(tag, false);
  tag->add_option("--batch-size", t_batch, "override the schema batch size");
  tag->add_option("--max-rounds", t_rounds, "re-submission rounds")->check(CLI::PositiveNumber);
  tag->add_option("--in-flight", t_flight, "concurrent batches")->check(CLI::Range(1u, 64u));
  tag->add_option("--out-dir", t_out, "label sets and run log");

  // ---- geometry
  auto* geo = app.add_subcommand("geometry", "inter-axis cosines, MDS layout and partial correlations");
  std::string g_emb, g_out, g_csv, g_coords, g_poles, g_proj;
  std::vector<std::string> g_labels;
  geo->add_option("--embeddings", g_emb, "embeddings TSV");
  geo->add_option("--labels", g_labels, "label sets, one axis each (2 or more)");
  geo->add_option("--out", g_out, "report JSON");
  geo->add_option("--matrix-csv", g_csv, "cosine matrix CSV");
  geo->add_option("--coords", g_coords, "3D coordinates CSV id,x,y,z for the pole-plane projection");
  geo->add_option("--poles", g_poles, "categorical labels with sweet / savoury values");
  geo->add_option("--projection-out", g_proj, "pole-plane projection JSON");

  // ---- synth
  auto* syn = app.add_subcommand("synth", "write a seeded synthetic corpus");
  std::string s_kind = "gradient", s_out = ".";
  std::uint64_t s_seed = 0;
  synth::GradientSpec s_grad;
  synth::ClusterSpec s_clu;
  syn->add_option("--kind", s_kind, "gradient or clusters")->check(CLI::IsMember({"gradient", "clusters"}));
  syn->add_option("--seed", s_seed, "seed");
  syn->add_option("--dim", s_grad.dim, "vector dimension")->check(CLI::Range(std::size_t{2}, std::size_t{100000}));
  syn->add_option("--levels", s_grad.levels, "gradient levels");
  syn->add_option("--per-level", s_grad.per_level, "entities per level");
  syn->add_option("--snr", s_grad.snr, "step : noise-norm ratio");
  syn->add_option("--clusters", s_clu.clusters, "cluster count");
  syn->add_option("--n", s_clu.n, "entities (clusters)");
  syn->add_option("--out-dir", s_out, "output directory");

  // ---- serve
  auto* serve = app.add_subcommand("serve", "HTTP/JSON service over a workspace");
  std::string w_dir, w_host = "127.0.0.1", w_token_env;
  int w_port = 8080;
  serve->add_option("--workspace", w_dir, "workspace directory with manifest.json")->required();
  serve->add_option("--host", w_host, "bind address");
  serve->add_option("--port", w_port, "port")->check(CLI::Range(1, 65535));
  serve->add_option("--token-env", w_token_env, "env var holding the shared bearer token for POST endpoints");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    std::cerr << sub->help();
    return 2;
  }

  try {
    if (*pairs) {
      const auto m = load_embeddings(p_emb);
      if (p_paired.empty()) {
        text::write_file(p_out, format_pairs_csv(pairwise(m, workers)));
      } else {
        std::vector<std::pair<std::int64_t, std::int64_t>> list;
        const auto rows = text::lines(text::read_file(p_paired));
        for (std::size_t i = 1; i < rows.size(); ++i) {
          if (text::trim(rows[i]).empty()) continue;
          const auto f = text::csv_fields(rows[i]);
          auto a = f.size() >= 2 ? text::parse_int(f[0]) : std::nullopt;
          auto b = f.size() >= 2 ? text::parse_int(f[1]) : std::nullopt;
          if (!a || !b) throw DataError(p_paired + " line " + std::to_string(i + 1) + ": expected id_a,id_b");
          list.emplace_back(*a, *b);
        }
        const auto r = axes::paired_similarity(m, list, Seed{p_seed});
        Provenance pv{"pairs", p_seed};
        pv.input("embeddings", p_emb);
        pv.input("paired", p_paired);
        Json j;
        j["pairs"] = list.size();
        j["mean"] = r.mean;
        j["baseline"] = r.baseline;
        j["lift"] = r.lift;
        j["baseline_pairs"] = r.baseline_pairs;
        j["cosines"] = r.cosines;
        write_json(p_out, with_provenance(j, pv));
      }
    } else if (*cons) {
      std::vector<std::string> audit;
      const auto raw = load_embeddings(c_emb);
      const auto map = load_map_with_overrides(c_map, c_cat, c_ovr, &audit);
      save_embeddings(curation::consolidate(raw, map), c_out);
      if (!c_map_out.empty()) text::write_file(c_map_out, curation::format_map_csv(map));
      if (!c_cat_out.empty()) text::write_file(c_cat_out, curation::format_catalog_csv(map));
      if (!c_back.empty()) save_labels(curation::back_project(map), c_back);
      for (const auto& a : audit) std::cerr << "override: " << a << "\n";
      std::cerr << map.catalog.size() << " canonical ingredients from " << map.entries.size() << " originals ("
                << map.removed_count() << " removed)\n";
    } else if (*noise) {
      const auto raw = load_embeddings(n_emb);
      const auto map = load_map_with_overrides(n_map, n_cat, n_ovr, nullptr);
      Provenance pv{"noise", n_seed};
      pv.parameters["top_k"] = n_top;
      pv.input("embeddings", n_emb);
      pv.input("map", n_map);
      pv.input("catalog", n_cat);
      pv.input("overrides", n_ovr);
      write_json(n_out, with_provenance(curation::to_json(curation::variant_noise(raw, map, n_top, Seed{n_seed})), pv));
    } else if (*analyze) {
      const auto m = load_embeddings(a_emb);
      const auto labels = load_labels(a_labels);
      if (!a_dim.empty() && labels.dimension != a_dim) {
        throw DataError(a_labels + ": dimension is '" + labels.dimension + "', expected '" + a_dim + "'");
      }
      const axes::AxisOptions opt{a_log, a_tercile};
      std::optional<LabelSet> measured;
      if (!a_measured.empty()) measured = load_labels(a_measured);
      ensure_dir(a_out);
      Provenance pv{"analyze", a_perm ? std::optional<std::uint64_t>(a_seed) : std::nullopt};
      pv.parameters = {{"tercile", a_tercile}, {"log10", a_log}, {"permutations", a_perm}};
      pv.input("embeddings", a_emb);
      pv.input("labels", a_labels);
      pv.input("measured", a_measured);
      pv.input("subset", a_subset);
      const auto base = labels.dimension;
      const auto restricted = axes::restrict_labels(labels, m);
      if (labels.kind == LabelKind::categorical) {
        const auto r = axes::categorical_delta(m, restricted);
        write_json(in_dir(a_out, base + ".json"), with_provenance(axes::to_json(r), pv));
      } else if (!a_subset.empty()) {
        const auto [in, out] = axes::subset_report(m, labels, measured, read_ids(a_subset), opt);
        Json j{{"subset", axes::to_json(in)}, {"complement", axes::to_json(out)}};
        write_json(in_dir(a_out, base + ".subset.json"), with_provenance(j, pv));
        text::write_file(in_dir(a_out, base + ".subset.csv"),
                         axes::dimension_csv_header() + axes::dimension_csv_row(in) + axes::dimension_csv_row(out));
      } else {
        const auto r = measured ? axes::evaluate_measured(m, restricted, axes::restrict_labels(*measured, m), opt)
                                : axes::evaluate(m, restricted, opt);
        auto j = axes::to_json(r);
        if (a_perm) j["permutation"] = axes::to_json(axes::permutation_test(m, restricted, a_perm, Seed{a_seed}, opt, workers));
        const auto stem = measured ? r.dimension : base;
        write_json(in_dir(a_out, stem + ".json"), with_provenance(j, pv));
        text::write_file(in_dir(a_out, stem + ".csv"), axes::dimension_csv_header() + axes::dimension_csv_row(r));
      }
    } else if (*cv) {
      const auto m = load_embeddings(v_emb);
      const auto labels = axes::restrict_labels(load_labels(v_labels), m);
      crossval::CVConfig cfg;
      cfg.k = v_k;
      cfg.repeats = v_rep;
      cfg.seed = Seed{v_seed};
      cfg.options = {v_log, v_tercile};
      cfg.workers = workers;
      if (v_tercile) cfg.kind = axes::AxisKind::tercile_centroid;
      if (!v_metric.empty()) cfg.metric = v_metric == "cohens_d" ? crossval::Metric::cohens_d : crossval::Metric::spearman_rho;
      const auto r = crossval::cv_evaluate(m, labels, cfg);
      Provenance pv{"crossval", v_seed};
      pv.parameters = {{"k", v_k}, {"repeats", v_rep}, {"tercile", v_tercile}, {"log10", v_log}};
      pv.input("embeddings", v_emb);
      pv.input("labels", v_labels);
      write_json(v_out, with_provenance(crossval::to_json(r), pv));
      if (!v_folds.empty()) text::write_file(v_folds, crossval::folds_csv(r));
    } else if (*cult) {
      const auto m = load_embeddings(u_emb);
      const auto tags = culture::load_cuisine_tags(u_tags);
      ensure_dir(u_out);
      Provenance pv{"culture", u_seed};
      pv.parameters = {{"k", u_k}, {"subsample", u_sub}, {"iterations", u_iter}, {"permutations", u_perm}};
      pv.input("embeddings", u_emb);
      pv.input("tags", u_tags);
      pv.inputs_list("axes", u_axes);
      pv.input("compare_embeddings", u_cmp_emb);
      pv.input("compare_tags", u_cmp_tags);

      const auto purity = culture::knn_purity(m, tags, u_k, workers);
      write_json(in_dir(u_out, "purity.json"), with_provenance(culture::to_json(purity), pv));
      text::write_file(in_dir(u_out, "purity.csv"), culture::purity_csv(purity));
      const auto intra = culture::intra_cluster_similarity(m, tags);
      write_json(in_dir(u_out, "intra.json"), with_provenance(culture::to_json(intra), pv));
      text::write_file(in_dir(u_out, "intra.csv"), culture::intra_csv(intra));
      if (u_sub) {
        const auto sp = culture::subsampled_purity(m, tags, u_sub, u_iter, u_k, Seed{u_seed}, workers);
        write_json(in_dir(u_out, "subsampled.json"), with_provenance(culture::to_json(sp), pv));
        text::write_file(in_dir(u_out, "subsampled.csv"), culture::subsampled_csv(sp));
      }
      if (!u_axes.empty()) {
        std::vector<axes::Axis> list;
        for (const auto& path : u_axes) {
          const auto ls = axes::restrict_labels(load_labels(path), m);
          list.push_back(axes::build_axis(m, ls, axes::default_axis_kind(ls.kind)));
        }
        const auto prof = culture::cuisine_profiles(m, tags, list, u_perm, Seed{u_seed}, workers);
        write_json(in_dir(u_out, "profiles.json"), with_provenance(culture::to_json(prof), pv));
        text::write_file(in_dir(u_out, "profiles.csv"), culture::profiles_csv(prof));
      }
      if (!u_cmp_emb.empty()) {
        const auto m2 = load_embeddings(u_cmp_emb);
        const auto tags2 = u_cmp_tags.empty() ? tags : culture::load_cuisine_tags(u_cmp_tags);
        const auto intra2 = culture::intra_cluster_similarity(m2, tags2);
        const auto purity2 = culture::knn_purity(m2, tags2, u_k, workers);
        Json j;
        j["intra_paired"] = axes::to_json(culture::paired_by_cuisine(culture::by_cuisine(intra), culture::by_cuisine(intra2)));
        j["purity_paired"] =
            axes::to_json(culture::paired_by_cuisine(culture::by_cuisine(purity), culture::by_cuisine(purity2)));
        j["centroid_distance"] = culture::to_json(culture::centroid_distance_test(m, tags, m2, tags2));
        j["compare_intra"] = culture::to_json(intra2);
        j["compare_purity"] = culture::to_json(purity2);
        write_json(in_dir(u_out, "comparison.json"), with_provenance(j, pv));
      }
    } else if (*match) {
      const auto db = matchdb::load_db_entries(m_db);
      const auto idx = matchdb::build_index(db);
      for (const auto& w : idx.warnings) std::cerr << "warning: " << w << "\n";
      const auto voc = matchdb::load_vocabulary(m_proc.empty() ? data_path("processing_words.txt") : m_proc,
                                                m_syn.empty() ? data_path("synonyms.csv") : m_syn);
      std::map<std::string, std::vector<std::string>> aliases;
      if (!m_map.empty()) aliases = matchdb::aliases_from_map(load_map(m_map, m_cat));
      auto prov = make(m_prov);
      const auto prompt = m_prompt.empty() ? matchdb::default_validation_prompt()
                                           : matchdb::validation_prompt_from_json(nlohmann::json::parse(text::read_file(m_prompt)));
      const auto table = matchdb::match(read_names(m_names), db, idx, voc, aliases, prov.embedder, prov.llm, &prompt,
                                        {m_accept, workers});
      for (const auto& w : table.warnings) std::cerr << "warning: " << w << "\n";
      text::write_file(m_out, matchdb::match_table_csv(table));
      std::cerr << table.matched() << "/" << table.rows.size() << " matched\n";
      if (!m_nutrient.empty()) {
        if (m_labels_out.empty()) throw CLI::ValidationError("--nutrient needs --labels-out");
        save_labels(matchdb::join_measurements(table, db, m_nutrient), m_labels_out);
      }
    } else if (*tag) {
      const auto schema = tagger::load_schema(t_schema);
      auto prov = make(t_prov);
      if (!prov.llm) throw CLI::ValidationError("tag needs a completion provider");
      ensure_dir(t_out);
      tagger::CoverageOptions opt{t_rounds, t_batch, t_flight};
      Json log;
      try {
        const auto run = tagger::tag_to_coverage(read_names(t_names), schema, *prov.llm, opt);
        for (const auto& ls : run.labels) save_labels(ls, in_dir(t_out, ls.dimension + ".json"));
        log = {{"family", run.family}, {"ingredients", run.ingredients.size()}, {"rounds", run.rounds},
               {"attempts", run.attempts}, {"log", run.log}};
        write_json(in_dir(t_out, schema.family + ".run.json"), log);
      } catch (const tagger::CoverageError& e) {
        write_json(in_dir(t_out, schema.family + ".residual.json"), Json{{"residual", e.residual()}});
        throw;
      }
    } else if (*geo) {
      if (!g_labels.empty()) {
        if (g_emb.empty() || g_out.empty()) throw CLI::ValidationError("--labels needs --embeddings and --out");
        const auto m = load_embeddings(g_emb);
        std::vector<axes::GeometryInput> inputs;
        for (const auto& path : g_labels) {
          const auto ls = axes::restrict_labels(load_labels(path), m);
          inputs.push_back({axes::build_axis(m, ls, axes::default_axis_kind(ls.kind)), ls, {}});
        }
        const auto g = axes::axis_geometry(m, inputs);
        Provenance pv{"geometry", std::nullopt};
        pv.input("embeddings", g_emb);
        pv.inputs_list("labels", g_labels);
        write_json(g_out, with_provenance(axes::to_json(g), pv));
        if (!g_csv.empty()) text::write_file(g_csv, axes::geometry_matrix_csv(g));
      }
      if (!g_coords.empty()) {
        if (g_poles.empty() || g_proj.empty()) throw CLI::ValidationError("--coords needs --poles and --projection-out");
        if (g_emb.empty()) throw CLI::ValidationError("--coords needs --embeddings to resolve pole names");
        const auto m = load_embeddings(g_emb);
        const auto coords = axes::parse_coords3d(text::read_file(g_coords));
        const auto poles = load_labels(g_poles);
        std::vector<std::int64_t> sweet, savoury;
        for (const auto& [name, v] : poles.labels) {
          auto r = m.find_name(name);
          const auto* s = std::get_if<std::string>(&v);
          if (!r || !s) continue;
          if (*s == "sweet") sweet.push_back(m.entity(*r).id);
          if (*s == "savoury") savoury.push_back(m.entity(*r).id);
        }
        const auto pp = axes::pole_plane_projection(coords, sweet, savoury);
        Json pts = Json::array();
        for (const auto& [id, a] : pp.along) pts.push_back({{"id", id}, {"along", a}, {"planar", pp.planar.at(id)}});
        Provenance pv{"geometry", std::nullopt};
        pv.input("coords", g_coords);
        pv.input("poles", g_poles);
        pv.input("embeddings", g_emb);
        Json j{{"origin", pp.origin}, {"axis", pp.axis}, {"basis_u", pp.basis_u}, {"basis_v", pp.basis_v}, {"points", pts}};
        write_json(g_proj, with_provenance(j, pv));
      }
      if (g_labels.empty() && g_coords.empty()) throw CLI::ValidationError("geometry needs --labels or --coords");
    } else if (*syn) {
      ensure_dir(s_out);
      if (s_kind == "gradient") {
        const auto g = synth::planted_gradient(s_grad, Seed{s_seed});
        save_embeddings(g.matrix, in_dir(s_out, "embeddings.tsv"));
        save_labels(g.labels, in_dir(s_out, g.labels.dimension + ".json"));
      } else {
        s_clu.dim = s_grad.dim;
        const auto c = synth::gaussian_clusters(s_clu, Seed{s_seed});
        save_embeddings(c.matrix, in_dir(s_out, "embeddings.tsv"));
        write_json(in_dir(s_out, "tags.json"), culture::to_json(c.tags));
      }
    } else if (*serve) {
      service::Options opt;
      if (!w_token_env.empty()) {
        const char* t = std::getenv(w_token_env.c_str());
        if (!t || !*t) throw DataError("environment variable " + w_token_env + " is empty");
        opt.token = t;
      }
      service::Service svc(workspace::Workspace::open(w_dir), opt);
      std::cerr << "serving " << w_dir << " on http://" << w_host << ":" << w_port << "\n";
      if (!svc.listen(w_host, w_port)) throw DataError("cannot bind " + w_host + ":" + std::to_string(w_port));
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const tagger::CoverageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ProviderError& e) {
    std::cerr << "error: provider: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
