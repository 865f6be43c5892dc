#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "flavoraxis/corpus.hpp"
#include "flavoraxis/error.hpp"
#include "flavoraxis/random.hpp"
#include "flavoraxis/stats.hpp"
#include "flavoraxis/text.hpp"

namespace flavoraxis::curation {

inline constexpr std::array<std::string_view, 18> kCategories = {
    "Meat",   "Fish",  "Seafood", "Dairy", "Veg",       "Fruit",    "Herbs",  "Spice",   "Nuts",
    "Legumes", "Grain", "Fat",     "Sweet", "Condiment", "Beverage", "Pantry", "Protein", "Produce"};

inline bool is_category(std::string_view c) {
  return std::find(kCategories.begin(), kCategories.end(), c) != kCategories.end();
}

struct CanonicalInfo {
  std::string name;
  std::vector<std::string> categories;
  bool vegetarian = false;
  bool vegan = false;
};

struct MapEntry {
  std::string original_name;
  // nullopt marks a removed original.
  std::optional<std::int64_t> canonical;
};

// original id -> canonical id, plus the canonical catalog. Iteration order is
// by id everywhere, which keeps every derived artifact deterministic.
class ConsolidationMap {
 public:
  std::map<std::int64_t, MapEntry> entries;
  std::map<std::int64_t, CanonicalInfo> catalog;

  std::vector<std::int64_t> members(std::int64_t canonical) const {
    std::vector<std::int64_t> out;
    for (const auto& [orig, e] : entries) {
      if (e.canonical == canonical) out.push_back(orig);
    }
    return out;
  }

  std::map<std::int64_t, std::vector<std::int64_t>> groups() const {
    std::map<std::int64_t, std::vector<std::int64_t>> g;
    for (const auto& [id, info] : catalog) g[id];
    for (const auto& [orig, e] : entries) {
      if (e.canonical) g[*e.canonical].push_back(orig);
    }
    return g;
  }

  std::size_t removed_count() const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [](const auto& kv) { return !kv.second.canonical; }));
  }

  std::optional<std::int64_t> find_canonical_by_name(const std::string& name) const {
    for (const auto& [id, info] : catalog) {
      if (info.name == name) return id;
    }
    return std::nullopt;
  }

  void validate() const {
    std::set<std::string> names;
    for (const auto& [id, info] : catalog) {
      if (!names.insert(info.name).second) throw DataError("duplicate canonical name " + info.name);
      if (info.categories.size() > 3) {
        throw DataError("canonical " + info.name + " has more than 3 categories");
      }
      for (const auto& c : info.categories) {
        if (!is_category(c)) throw DataError("unknown category '" + c + "' on " + info.name);
      }
    }
    for (const auto& [orig, e] : entries) {
      if (e.canonical && !catalog.count(*e.canonical)) {
        throw DataError("original " + std::to_string(orig) + " maps to unknown canonical " +
                        std::to_string(*e.canonical));
      }
    }
  }
};

inline bool parse_flag(const std::string& s) {
  const auto l = text::lower(text::trim(s));
  return l == "1" || l == "true" || l == "yes" || l == "y";
}

// Map CSV: original_id,original_name,canonical_id,canonical_name (canonical_id
// empty for removals). Catalog CSV: canonical_id,name,categories,vegetarian,vegan
// with ';'-joined categories. Without a catalog, canonical names come from the map.
inline ConsolidationMap parse_consolidation_map(std::string_view map_csv,
                                                std::optional<std::string_view> catalog_csv = std::nullopt) {
  ConsolidationMap m;
  const auto rows = text::lines(map_csv);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (text::trim(rows[i]).empty()) continue;
    const auto f = text::csv_fields(rows[i]);
    const std::string where = "map line " + std::to_string(i + 1);
    if (f.size() < 4) throw DataError(where + ": expected 4 fields");
    auto orig = text::parse_int(f[0]);
    if (!orig) throw DataError(where + ": bad original_id");
    MapEntry e{std::string(text::trim(f[1])), std::nullopt};
    if (!text::trim(f[2]).empty()) {
      auto canon = text::parse_int(f[2]);
      if (!canon) throw DataError(where + ": bad canonical_id");
      e.canonical = *canon;
      const std::string cname(text::trim(f[3]));
      auto [it, inserted] = m.catalog.try_emplace(*canon, CanonicalInfo{cname, {}, false, false});
      if (!inserted && it->second.name != cname) {
        throw DataError(where + ": canonical " + std::to_string(*canon) + " named both " + it->second.name +
                        " and " + cname);
      }
    }
    if (!m.entries.emplace(*orig, std::move(e)).second) {
      throw DataError(where + ": duplicate original_id " + std::to_string(*orig));
    }
  }
  if (catalog_csv) {
    const auto crows = text::lines(*catalog_csv);
    for (std::size_t i = 1; i < crows.size(); ++i) {
      if (text::trim(crows[i]).empty()) continue;
      const auto f = text::csv_fields(crows[i]);
      const std::string where = "catalog line " + std::to_string(i + 1);
      if (f.size() < 5) throw DataError(where + ": expected 5 fields");
      auto id = text::parse_int(f[0]);
      if (!id) throw DataError(where + ": bad canonical_id");
      CanonicalInfo info;
      info.name = std::string(text::trim(f[1]));
      for (auto c : text::split(f[2], ';')) {
        if (!text::trim(c).empty()) info.categories.emplace_back(text::trim(c));
      }
      info.vegetarian = parse_flag(f[3]);
      info.vegan = parse_flag(f[4]);
      auto it = m.catalog.find(*id);
      if (it != m.catalog.end() && it->second.name != info.name) {
        throw DataError(where + ": catalog name " + info.name + " disagrees with map name " + it->second.name);
      }
      m.catalog[*id] = std::move(info);
    }
  }
  m.validate();
  return m;
}

inline ConsolidationMap load_consolidation_map(const std::string& map_path,
                                               const std::optional<std::string>& catalog_path = std::nullopt) {
  const auto map_csv = text::read_file(map_path);
  if (catalog_path) {
    const auto catalog_csv = text::read_file(*catalog_path);
    return parse_consolidation_map(map_csv, std::string_view(catalog_csv));
  }
  return parse_consolidation_map(map_csv);
}

inline std::string format_map_csv(const ConsolidationMap& m) {
  std::string out = "original_id,original_name,canonical_id,canonical_name\n";
  for (const auto& [orig, e] : m.entries) {
    out += std::to_string(orig) + "," + text::csv_escape(e.original_name) + ",";
    if (e.canonical) out += std::to_string(*e.canonical) + "," + text::csv_escape(m.catalog.at(*e.canonical).name);
    else out += ",";
    out += "\n";
  }
  return out;
}

inline std::string format_catalog_csv(const ConsolidationMap& m) {
  std::string out = "canonical_id,name,categories,vegetarian,vegan\n";
  for (const auto& [id, info] : m.catalog) {
    out += std::to_string(id) + "," + text::csv_escape(info.name) + "," +
           text::csv_escape(text::join(info.categories, ";")) + "," + (info.vegetarian ? "true" : "false") + "," +
           (info.vegan ? "true" : "false") + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Overrides

struct Merge {
  std::vector<std::int64_t> sources;
  std::int64_t target = 0;
};
struct Split {
  std::int64_t original_id = 0;
  std::int64_t canonical_id = 0;
  std::string name;
  std::optional<std::vector<std::string>> categories;
};
struct Rename {
  std::int64_t canonical_id = 0;
  std::string name;
};
struct Remove {
  std::int64_t original_id = 0;
};
struct Recategorize {
  std::int64_t canonical_id = 0;
  std::vector<std::string> categories;
};

using OverrideAction = std::variant<Merge, Split, Rename, Remove, Recategorize>;

struct OverrideSet {
  std::vector<OverrideAction> actions;
};

inline OverrideAction action_from_json(const nlohmann::json& j) {
  try {
    const auto op = j.at("op").get<std::string>();
    if (op == "merge") return Merge{j.at("sources").get<std::vector<std::int64_t>>(), j.at("target").get<std::int64_t>()};
    if (op == "split") {
      Split s{j.at("original_id").get<std::int64_t>(), j.at("canonical_id").get<std::int64_t>(),
              j.at("name").get<std::string>(), std::nullopt};
      if (j.contains("categories")) s.categories = j.at("categories").get<std::vector<std::string>>();
      return s;
    }
    if (op == "rename") return Rename{j.at("canonical_id").get<std::int64_t>(), j.at("name").get<std::string>()};
    if (op == "remove") return Remove{j.at("original_id").get<std::int64_t>()};
    if (op == "recategorize") {
      return Recategorize{j.at("canonical_id").get<std::int64_t>(), j.at("categories").get<std::vector<std::string>>()};
    }
    throw DataError("unknown override op '" + op + "'");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed override action: ") + e.what());
  }
}

inline nlohmann::ordered_json action_to_json(const OverrideAction& a) {
  nlohmann::ordered_json j;
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Merge>) {
          j["op"] = "merge";
          j["sources"] = x.sources;
          j["target"] = x.target;
        } else if constexpr (std::is_same_v<T, Split>) {
          j["op"] = "split";
          j["original_id"] = x.original_id;
          j["canonical_id"] = x.canonical_id;
          j["name"] = x.name;
          if (x.categories) j["categories"] = *x.categories;
        } else if constexpr (std::is_same_v<T, Rename>) {
          j["op"] = "rename";
          j["canonical_id"] = x.canonical_id;
          j["name"] = x.name;
        } else if constexpr (std::is_same_v<T, Remove>) {
          j["op"] = "remove";
          j["original_id"] = x.original_id;
        } else {
          j["op"] = "recategorize";
          j["canonical_id"] = x.canonical_id;
          j["categories"] = x.categories;
        }
      },
      a);
  return j;
}

// Override file: {"actions": [ {...}, ... ]}.
inline OverrideSet overrides_from_json(const nlohmann::json& j) {
  OverrideSet s;
  if (!j.contains("actions") || !j.at("actions").is_array()) throw DataError("override file needs an actions array");
  for (const auto& a : j.at("actions")) s.actions.push_back(action_from_json(a));
  return s;
}

inline nlohmann::ordered_json overrides_to_json(const OverrideSet& s) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& a : s.actions) arr.push_back(action_to_json(a));
  return {{"actions", arr}};
}

inline OverrideSet load_overrides(const std::string& path) {
  try {
    return overrides_from_json(nlohmann::json::parse(text::read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

struct OverrideResult {
  ConsolidationMap map;
  std::vector<std::string> audit;
};

namespace detail {

inline void require_canonical(const ConsolidationMap& m, std::int64_t id, std::size_t step) {
  if (!m.catalog.count(id)) {
    throw DataError("override " + std::to_string(step) + ": unknown canonical " + std::to_string(id));
  }
}

inline void require_original(const ConsolidationMap& m, std::int64_t id, std::size_t step) {
  if (!m.entries.count(id)) {
    throw DataError("override " + std::to_string(step) + ": unknown original " + std::to_string(id));
  }
}

inline void require_free_name(const ConsolidationMap& m, const std::string& name, std::size_t step,
                              std::optional<std::int64_t> self = std::nullopt) {
  auto other = m.find_canonical_by_name(name);
  if (other && other != self) {
    throw DataError("override " + std::to_string(step) + ": name '" + name + "' already used by canonical " +
                    std::to_string(*other));
  }
}

// Canonicals left without members are dropped from the catalog.
inline void drop_empty(ConsolidationMap& m, std::vector<std::string>& audit) {
  const auto g = m.groups();
  for (const auto& [id, members] : g) {
    if (members.empty()) {
      audit.push_back("dropped empty canonical " + std::to_string(id) + " (" + m.catalog.at(id).name + ")");
      m.catalog.erase(id);
    }
  }
}

}  // namespace detail

// Applies the ordered action log to a copy of `map`.
inline OverrideResult apply_overrides(const ConsolidationMap& map, const OverrideSet& overrides) {
  OverrideResult r{map, {}};
  auto& m = r.map;
  for (std::size_t step = 0; step < overrides.actions.size(); ++step) {
    std::visit(
        [&](const auto& a) {
          using T = std::decay_t<decltype(a)>;
          if constexpr (std::is_same_v<T, Merge>) {
            detail::require_canonical(m, a.target, step);
            for (auto s : a.sources) detail::require_canonical(m, s, step);
            for (auto s : a.sources) {
              if (s == a.target) continue;
              for (auto& [orig, e] : m.entries) {
                if (e.canonical == s) e.canonical = a.target;
              }
              m.catalog.erase(s);
              r.audit.push_back("merge " + std::to_string(s) + " -> " + std::to_string(a.target));
            }
          } else if constexpr (std::is_same_v<T, Split>) {
            detail::require_original(m, a.original_id, step);
            if (m.catalog.count(a.canonical_id)) {
              throw DataError("override " + std::to_string(step) + ": split target canonical " +
                              std::to_string(a.canonical_id) + " already exists");
            }
            detail::require_free_name(m, a.name, step);
            auto& e = m.entries.at(a.original_id);
            CanonicalInfo info{a.name, {}, false, false};
            if (e.canonical) info = CanonicalInfo{a.name, m.catalog.at(*e.canonical).categories,
                                                  m.catalog.at(*e.canonical).vegetarian,
                                                  m.catalog.at(*e.canonical).vegan};
            if (a.categories) info.categories = *a.categories;
            m.catalog.emplace(a.canonical_id, std::move(info));
            e.canonical = a.canonical_id;
            r.audit.push_back("split " + std::to_string(a.original_id) + " -> new canonical " +
                              std::to_string(a.canonical_id) + " (" + a.name + ")");
          } else if constexpr (std::is_same_v<T, Rename>) {
            detail::require_canonical(m, a.canonical_id, step);
            detail::require_free_name(m, a.name, step, a.canonical_id);
            r.audit.push_back("rename " + std::to_string(a.canonical_id) + " " + m.catalog.at(a.canonical_id).name +
                              " -> " + a.name);
            m.catalog.at(a.canonical_id).name = a.name;
          } else if constexpr (std::is_same_v<T, Remove>) {
            detail::require_original(m, a.original_id, step);
            m.entries.at(a.original_id).canonical.reset();
            r.audit.push_back("remove " + std::to_string(a.original_id));
          } else {
            detail::require_canonical(m, a.canonical_id, step);
            m.catalog.at(a.canonical_id).categories = a.categories;
            r.audit.push_back("recategorize " + std::to_string(a.canonical_id));
          }
        },
        overrides.actions[step]);
    detail::drop_empty(m, r.audit);
    try {
      m.validate();
    } catch (const DataError& e) {
      throw DataError("override " + std::to_string(step) + ": " + e.what());
    }
  }
  return r;
}

// One row per canonical id (ascending): the unweighted mean of the member
// vectors. Removed originals are excluded.
inline EmbeddingMatrix consolidate(const EmbeddingMatrix& raw, const ConsolidationMap& map) {
  std::map<std::int64_t, std::vector<std::size_t>> rows;
  for (const auto& [orig, e] : map.entries) {
    auto r = raw.find_id(orig);
    if (!r) throw DataError("consolidation map references unknown original id " + std::to_string(orig));
    if (e.canonical) rows[*e.canonical].push_back(*r);
  }
  std::vector<Entity> entities;
  std::vector<double> values;
  for (const auto& [id, info] : map.catalog) {
    auto it = rows.find(id);
    if (it == rows.end() || it->second.empty()) {
      throw DataError("canonical " + std::to_string(id) + " (" + info.name + ") has no members");
    }
    const auto mean = mean_of_rows(raw, it->second);
    entities.push_back({id, info.name});
    values.insert(values.end(), mean.begin(), mean.end());
  }
  return EmbeddingMatrix(std::move(entities), std::move(values), raw.dim());
}

// Category tags inherited by every original from its canonical.
inline LabelSet back_project(const ConsolidationMap& map) {
  LabelSet ls;
  ls.dimension = "category";
  ls.kind = LabelKind::tags;
  for (const auto& [orig, e] : map.entries) {
    if (!e.canonical) continue;
    ls.labels.emplace(e.original_name, map.catalog.at(*e.canonical).categories);
  }
  return ls;
}

// ---------------------------------------------------------------------------
// Variant noise

struct GroupNoise {
  std::int64_t canonical_id = 0;
  std::string name;
  std::size_t variant_count = 0;
  double mean_cosine = 0.0;
  double min_cosine = 0.0;
};

struct VariantNoiseReport {
  std::vector<GroupNoise> groups;
  double baseline = 0.0;
  std::size_t baseline_pairs = 0;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kBaselinePairs = 10000;

// Mean/min within-group cosine over all pairs for the top_k groups by variant
// count, plus a baseline from seeded random cross-group pairs.
inline VariantNoiseReport variant_noise(const EmbeddingMatrix& raw, const ConsolidationMap& map, std::size_t top_k,
                                        Seed seed, std::size_t baseline_pairs = kBaselinePairs) {
  if (top_k < 1) throw InvalidArgument("variant_noise: top_k must be at least 1");
  struct Group {
    std::int64_t id;
    std::vector<std::size_t> rows;
  };
  std::vector<Group> all;
  for (const auto& [id, members] : map.groups()) {
    Group g{id, {}};
    for (auto orig : members) g.rows.push_back(raw.require_id(orig));
    all.push_back(std::move(g));
  }
  std::vector<Group> multi;
  for (const auto& g : all) {
    if (g.rows.size() >= 2) multi.push_back(g);
  }
  if (multi.empty()) throw InvalidArgument("variant_noise: no group has 2 or more variants");
  std::stable_sort(multi.begin(), multi.end(),
                   [](const Group& a, const Group& b) { return a.rows.size() > b.rows.size(); });
  if (multi.size() > top_k) multi.resize(top_k);

  VariantNoiseReport report;
  report.seed = seed.master;
  for (const auto& g : multi) {
    GroupNoise gn{g.id, map.catalog.at(g.id).name, g.rows.size(), 0.0, 2.0};
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < g.rows.size(); ++i) {
      for (std::size_t j = i + 1; j < g.rows.size(); ++j) {
        const double c = cosine(raw.row(g.rows[i]), raw.row(g.rows[j]));
        sum += c;
        gn.min_cosine = std::min(gn.min_cosine, c);
        ++pairs;
      }
    }
    gn.mean_cosine = sum / static_cast<double>(pairs);
    report.groups.push_back(gn);
  }

  // Baseline over originals that still belong to some canonical.
  std::vector<std::pair<std::size_t, std::int64_t>> pool;
  for (const auto& g : all) {
    for (auto r : g.rows) pool.emplace_back(r, g.id);
  }
  const auto populated = std::count_if(all.begin(), all.end(), [](const Group& g) { return !g.rows.empty(); });
  if (populated >= 2 && baseline_pairs > 0) {
    Stream rng(seed, 0);
    double sum = 0.0;
    std::size_t drawn = 0;
    while (drawn < baseline_pairs) {
      const auto& a = pool[rng.below(pool.size())];
      const auto& b = pool[rng.below(pool.size())];
      if (a.second == b.second) continue;
      sum += cosine(raw.row(a.first), raw.row(b.first));
      ++drawn;
    }
    report.baseline = sum / static_cast<double>(drawn);
    report.baseline_pairs = drawn;
  }
  return report;
}

inline nlohmann::ordered_json to_json(const VariantNoiseReport& r) {
  nlohmann::ordered_json j;
  j["baseline"] = r.baseline;
  j["baseline_pairs"] = r.baseline_pairs;
  j["seed"] = r.seed;
  auto groups = nlohmann::ordered_json::array();
  for (const auto& g : r.groups) {
    groups.push_back({{"canonical_id", g.canonical_id},
                      {"name", g.name},
                      {"variant_count", g.variant_count},
                      {"mean_cosine", g.mean_cosine},
                      {"min_cosine", g.min_cosine}});
  }
  j["groups"] = groups;
  return j;
}

}  // namespace flavoraxis::curation
