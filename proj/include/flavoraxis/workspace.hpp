#pragma once

// A workspace is a directory with a manifest.json naming its inputs (relative
// paths), the master seed and analysis settings. Reports derived from it carry
// the manifest hash: sha256 over the manifest text and every input's hash.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "flavoraxis/axes.hpp"
#include "flavoraxis/corpus.hpp"
#include "flavoraxis/culture.hpp"
#include "flavoraxis/curation.hpp"
#include "flavoraxis/providers.hpp"

namespace flavoraxis::workspace {

namespace fs = std::filesystem;

struct Settings {
  std::size_t noise_top_k = 50;
  std::size_t knn_k = 10;
  std::size_t permutations = 999;
};

struct Manifest {
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string embeddings;  // raw (pre-consolidation) vectors
  std::string map;
  std::string catalog;
  std::string overrides;  // created on the first POSTed action if absent
  std::string cuisine_tags;
  std::string coords3d;
  std::string poles;  // categorical labels with sweet / savoury values
  std::map<std::string, std::string> labels;
  Settings settings;
};

inline Manifest manifest_from_json(const nlohmann::json& j) {
  Manifest m;
  try {
    m.seed = j.at("seed").get<std::uint64_t>();
    m.workers = j.value("workers", 1u);
    const auto& in = j.at("inputs");
    m.embeddings = in.at("embeddings").get<std::string>();
    m.map = in.at("map").get<std::string>();
    m.catalog = in.value("catalog", std::string());
    m.overrides = in.value("overrides", std::string("overrides.json"));
    m.cuisine_tags = in.value("cuisine_tags", std::string());
    m.coords3d = in.value("coords3d", std::string());
    m.poles = in.value("poles", std::string());
    if (in.contains("labels")) m.labels = in.at("labels").get<std::map<std::string, std::string>>();
    if (j.contains("settings")) {
      const auto& s = j.at("settings");
      m.settings.noise_top_k = s.value("noise_top_k", m.settings.noise_top_k);
      m.settings.knn_k = s.value("knn_k", m.settings.knn_k);
      m.settings.permutations = s.value("permutations", m.settings.permutations);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("manifest: ") + e.what());
  }
  if (m.workers < 1) m.workers = 1;
  return m;
}

inline std::string file_hash(const fs::path& p) { return providers::sha256_hex(text::read_file(p.string())); }

struct GroupView {
  std::int64_t canonical_id = 0;
  std::string name;
  std::vector<std::string> categories;
  std::vector<std::pair<std::int64_t, std::string>> members;
  std::optional<double> mean_cosine;  // only with 2+ members
  std::optional<double> min_cosine;
};

class Workspace {
 public:
  static Workspace open(const fs::path& dir) {
    Workspace w;
    w.dir_ = dir;
    const auto mpath = dir / "manifest.json";
    w.manifest_text_ = text::read_file(mpath.string());
    try {
      w.manifest_ = manifest_from_json(nlohmann::json::parse(w.manifest_text_));
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(mpath.string() + ": " + e.what());
    }
    const auto& mf = w.manifest_;
    w.raw_ = load_embeddings(w.path(mf.embeddings));
    w.base_map_ = curation::load_consolidation_map(
        w.path(mf.map), mf.catalog.empty() ? std::nullopt : std::optional<std::string>(w.path(mf.catalog)));
    if (fs::exists(w.path(mf.overrides))) w.overrides_ = curation::load_overrides(w.path(mf.overrides));
    for (const auto& [name, rel] : mf.labels) {
      auto ls = load_labels(w.path(rel));
      if (ls.dimension != name) throw DataError(w.path(rel) + ": dimension is '" + ls.dimension + "', manifest says '" + name + "'");
      w.labels_.emplace(name, std::move(ls));
    }
    if (!mf.cuisine_tags.empty()) w.tags_ = culture::load_cuisine_tags(w.path(mf.cuisine_tags));
    if (!mf.coords3d.empty()) w.coords_ = axes::parse_coords3d(text::read_file(w.path(mf.coords3d)));
    if (!mf.poles.empty()) w.poles_ = load_labels(w.path(mf.poles));
    w.rebuild();
    return w;
  }

  const Manifest& manifest() const { return manifest_; }
  const fs::path& dir() const { return dir_; }
  const std::string& manifest_hash() const { return manifest_hash_; }
  const std::map<std::string, std::string>& input_hashes() const { return hashes_; }
  const EmbeddingMatrix& raw() const { return raw_; }
  const EmbeddingMatrix& curated() const { return curated_; }
  const curation::ConsolidationMap& map() const { return map_; }
  const curation::OverrideSet& overrides() const { return overrides_; }
  const std::vector<std::string>& audit() const { return audit_; }
  const std::map<std::string, LabelSet>& labels() const { return labels_; }
  const std::optional<culture::CuisineTags>& cuisine_tags() const { return tags_; }
  const std::optional<std::map<std::int64_t, axes::Vec3>>& coords() const { return coords_; }
  const std::optional<LabelSet>& poles() const { return poles_; }

  std::string path(const std::string& rel) const { return (dir_ / rel).string(); }

  // Validates `actions` against the current log, then appends and persists
  // them. Throws DataError (nothing written) if any action fails to apply.
  std::vector<std::string> append_overrides(const curation::OverrideSet& actions) {
    auto next = overrides_;
    next.actions.insert(next.actions.end(), actions.actions.begin(), actions.actions.end());
    auto result = curation::apply_overrides(base_map_, next);
    consolidate(raw_, result.map);
    text::write_file(path(manifest_.overrides), curation::overrides_to_json(next).dump(2) + "\n");
    const auto before = audit_.size();
    overrides_ = std::move(next);
    rebuild();
    return {audit_.begin() + static_cast<std::ptrdiff_t>(before), audit_.end()};
  }

  std::vector<GroupView> groups() const {
    std::vector<GroupView> out;
    for (const auto& [id, members] : map_.groups()) {
      const auto& info = map_.catalog.at(id);
      GroupView g{id, info.name, info.categories, {}, std::nullopt, std::nullopt};
      for (auto orig : members) g.members.emplace_back(orig, map_.entries.at(orig).original_name);
      if (members.size() >= 2) {
        double sum = 0.0, lo = 2.0;
        std::size_t pairs = 0;
        for (std::size_t i = 0; i < members.size(); ++i) {
          for (std::size_t j = i + 1; j < members.size(); ++j) {
            const double c =
                cosine(raw_.row(raw_.require_id(members[i])), raw_.row(raw_.require_id(members[j])));
            sum += c;
            lo = std::min(lo, c);
            ++pairs;
          }
        }
        g.mean_cosine = sum / static_cast<double>(pairs);
        g.min_cosine = lo;
      }
      out.push_back(std::move(g));
    }
    return out;
  }

  nlohmann::ordered_json provenance() const {
    nlohmann::ordered_json p;
    p["manifest_hash"] = manifest_hash_;
    p["seed"] = manifest_.seed;
    p["inputs"] = hashes_;
    return p;
  }

 private:
  void rebuild() {
    auto result = curation::apply_overrides(base_map_, overrides_);
    map_ = std::move(result.map);
    audit_ = std::move(result.audit);
    curated_ = consolidate(raw_, map_);
    rehash();
  }

  void rehash() {
    hashes_.clear();
    std::set<std::string> files{manifest_.embeddings, manifest_.map, manifest_.catalog, manifest_.cuisine_tags,
                                manifest_.coords3d, manifest_.poles};
    if (fs::exists(path(manifest_.overrides))) files.insert(manifest_.overrides);
    for (const auto& [name, rel] : manifest_.labels) files.insert(rel);
    files.erase("");
    for (const auto& f : files) hashes_[f] = file_hash(path(f));
    std::string material = manifest_text_;
    for (const auto& [f, h] : hashes_) material += "\n" + f + " " + h;
    manifest_hash_ = providers::sha256_hex(material);
  }

  static EmbeddingMatrix consolidate(const EmbeddingMatrix& raw, const curation::ConsolidationMap& m) {
    return curation::consolidate(raw, m);
  }

  fs::path dir_;
  std::string manifest_text_;
  Manifest manifest_;
  EmbeddingMatrix raw_;
  curation::ConsolidationMap base_map_;
  curation::OverrideSet overrides_;
  curation::ConsolidationMap map_;
  std::vector<std::string> audit_;
  EmbeddingMatrix curated_;
  std::map<std::string, LabelSet> labels_;
  std::optional<culture::CuisineTags> tags_;
  std::optional<std::map<std::int64_t, axes::Vec3>> coords_;
  std::optional<LabelSet> poles_;
  std::map<std::string, std::string> hashes_;
  std::string manifest_hash_;
};

inline nlohmann::ordered_json to_json(const GroupView& g) {
  nlohmann::ordered_json j;
  j["canonical_id"] = g.canonical_id;
  j["name"] = g.name;
  j["categories"] = g.categories;
  auto members = nlohmann::ordered_json::array();
  for (const auto& [id, name] : g.members) members.push_back({{"id", id}, {"name", name}});
  j["members"] = members;
  j["variant_count"] = g.members.size();
  j["mean_cosine"] = g.mean_cosine ? nlohmann::ordered_json(*g.mean_cosine) : nlohmann::ordered_json();
  j["min_cosine"] = g.min_cosine ? nlohmann::ordered_json(*g.min_cosine) : nlohmann::ordered_json();
  return j;
}

// ---------------------------------------------------------------------------
// Derived reports. Each takes an immutable snapshot so the service can run it
// off the writer lock.

struct Snapshot {
  std::string manifest_hash;
  nlohmann::ordered_json provenance;
  Manifest manifest;
  EmbeddingMatrix raw;
  curation::ConsolidationMap map;
  EmbeddingMatrix curated;
  std::map<std::string, LabelSet> labels;
  std::optional<culture::CuisineTags> tags;
};

inline Snapshot snapshot(const Workspace& w) {
  return {w.manifest_hash(), w.provenance(), w.manifest(), w.raw(), w.map(),
          w.curated(), w.labels(), w.cuisine_tags()};
}

inline nlohmann::ordered_json noise_report(const Snapshot& s) {
  nlohmann::ordered_json j;
  const auto g = s.map.groups();
  const bool any_multi = std::any_of(g.begin(), g.end(), [](const auto& kv) { return kv.second.size() >= 2; });
  if (any_multi) {
    j = curation::to_json(curation::variant_noise(s.raw, s.map, s.manifest.settings.noise_top_k, Seed{s.manifest.seed}));
  } else {
    j["groups"] = nlohmann::ordered_json::array();
  }
  j["provenance"] = s.provenance;
  return j;
}

// Dimension reports for every ordinal / binary / numeric / categorical label
// set. Evaluation failures are recorded in the report instead of aborting.
inline std::map<std::string, nlohmann::ordered_json> dimension_reports(const Snapshot& s) {
  std::map<std::string, nlohmann::ordered_json> out;
  for (const auto& [name, ls] : s.labels) {
    nlohmann::ordered_json j;
    try {
      const auto labels = axes::restrict_labels(ls, s.curated);
      if (ls.kind == LabelKind::categorical) {
        j = axes::to_json(axes::categorical_delta(s.curated, labels));
      } else if (ls.kind == LabelKind::tags) {
        continue;
      } else {
        j = axes::to_json(axes::evaluate(s.curated, labels));
        if (s.manifest.settings.permutations > 0) {
          j["permutation"] = axes::to_json(axes::permutation_test(s.curated, labels, s.manifest.settings.permutations,
                                                                  Seed{s.manifest.seed}, {}, s.manifest.workers));
        }
      }
    } catch (const InvalidArgument& e) {
      j = {{"dimension", name}, {"error", e.what()}};
    } catch (const DataError& e) {
      j = {{"dimension", name}, {"error", e.what()}};
    }
    j["provenance"] = s.provenance;
    out.emplace(name, std::move(j));
  }
  return out;
}

// Purity, intra-cluster similarity and (when axes can be built) profiles.
inline std::optional<nlohmann::ordered_json> culture_report(const Snapshot& s) {
  if (!s.tags) return std::nullopt;
  culture::CuisineTags tags = *s.tags;
  for (auto it = tags.tags.begin(); it != tags.tags.end();) {
    it = s.curated.find_name(it->first) ? std::next(it) : tags.tags.erase(it);
  }
  nlohmann::ordered_json j;
  const auto& st = s.manifest.settings;
  std::vector<std::string> skipped;
  try {
    j["purity"] = culture::to_json(culture::knn_purity(s.curated, tags, st.knn_k, s.manifest.workers));
    j["intra"] = culture::to_json(culture::intra_cluster_similarity(s.curated, tags));
  } catch (const InvalidArgument& e) {
    skipped.push_back(e.what());
  }
  std::vector<axes::Axis> list;
  for (const auto& [name, ls] : s.labels) {
    if (ls.kind != LabelKind::ordinal && ls.kind != LabelKind::binary) continue;
    try {
      list.push_back(axes::build_axis(s.curated, axes::restrict_labels(ls, s.curated), axes::default_axis_kind(ls.kind)));
    } catch (const InvalidArgument& e) {
      skipped.push_back(name + ": " + e.what());
    }
  }
  if (!list.empty()) {
    try {
      j["profiles"] = culture::to_json(
          culture::cuisine_profiles(s.curated, tags, list, st.permutations, Seed{s.manifest.seed}, s.manifest.workers));
    } catch (const InvalidArgument& e) {
      skipped.push_back(std::string("profiles: ") + e.what());
    }
  }
  j["notes"] = skipped;
  j["provenance"] = s.provenance;
  return j;
}

}  // namespace flavoraxis::workspace
