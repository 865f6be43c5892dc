#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include <json.hpp>

#include "flavoraxis/error.hpp"
#include "flavoraxis/parallel.hpp"
#include "flavoraxis/text.hpp"

namespace flavoraxis {

struct Entity {
  std::int64_t id = 0;
  std::string name;
};

// n entities with fixed-dimension vectors, stored row-major. Immutable once
// constructed; every constructor path validates the invariants.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;

  EmbeddingMatrix(std::vector<Entity> entities, std::vector<double> values, std::size_t dim)
      : entities_(std::move(entities)), values_(std::move(values)), dim_(dim) {
    if (values_.size() != entities_.size() * dim_) {
      throw DataError("embedding matrix: expected " + std::to_string(entities_.size() * dim_) +
                      " values, got " + std::to_string(values_.size()));
    }
    if (!entities_.empty() && dim_ == 0) throw DataError("embedding matrix: dimension is zero");
    for (std::size_t r = 0; r < entities_.size(); ++r) {
      if (!by_id_.emplace(entities_[r].id, r).second) {
        throw DataError("duplicate id " + std::to_string(entities_[r].id));
      }
      if (!by_name_.emplace(entities_[r].name, r).second) {
        throw DataError("duplicate name " + entities_[r].name);
      }
      for (double v : row(r)) {
        if (!std::isfinite(v)) throw DataError("non-finite value for id " + std::to_string(entities_[r].id));
      }
    }
  }

  std::size_t size() const { return entities_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<Entity>& entities() const { return entities_; }
  const Entity& entity(std::size_t r) const { return entities_.at(r); }

  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values_).subspan(r * dim_, dim_);
  }

  std::optional<std::size_t> find_id(std::int64_t id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<std::size_t> find_name(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t require_id(std::int64_t id) const {
    if (auto r = find_id(id)) return *r;
    throw DataError("unknown id " + std::to_string(id));
  }

  std::size_t require_name(const std::string& name) const {
    if (auto r = find_name(name)) return *r;
    throw DataError("unknown entity " + name);
  }

  EmbeddingMatrix scaled(double factor) const {
    std::vector<double> v(values_);
    for (double& x : v) x *= factor;
    return EmbeddingMatrix(entities_, std::move(v), dim_);
  }

  EmbeddingMatrix select(std::span<const std::size_t> rows) const {
    std::vector<Entity> e;
    std::vector<double> v;
    e.reserve(rows.size());
    v.reserve(rows.size() * dim_);
    for (std::size_t r : rows) {
      e.push_back(entities_.at(r));
      auto src = row(r);
      v.insert(v.end(), src.begin(), src.end());
    }
    return EmbeddingMatrix(std::move(e), std::move(v), dim_);
  }

 private:
  std::vector<Entity> entities_;
  std::vector<double> values_;
  std::size_t dim_ = 0;
  std::unordered_map<std::int64_t, std::size_t> by_id_;
  std::unordered_map<std::string, std::size_t> by_name_;
};

// TSV: header `id<TAB>name<TAB>v1..vD`, then one entity per line. D is taken
// from the first data row and enforced on the rest.
inline EmbeddingMatrix parse_embeddings(std::string_view content) {
  const auto rows = text::lines(content);
  if (rows.empty()) throw DataError("embeddings: empty file");
  const auto header = text::split(rows[0], '\t');
  if (header.size() < 2 || text::trim(header[0]) != "id" || text::trim(header[1]) != "name") {
    throw DataError("embeddings: line 1: header must start with id<TAB>name");
  }
  std::vector<Entity> entities;
  std::vector<double> values;
  std::size_t dim = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (text::trim(rows[i]).empty()) continue;
    const auto fields = text::split(rows[i], '\t');
    if (fields.size() < 3) throw DataError("dimension mismatch at line " + std::to_string(line_no));
    const std::size_t d = fields.size() - 2;
    if (entities.empty()) dim = d;
    if (d != dim) throw DataError("dimension mismatch at line " + std::to_string(line_no));
    auto id = text::parse_int(fields[0]);
    if (!id) throw DataError("bad id at line " + std::to_string(line_no));
    Entity e{*id, std::string(text::trim(fields[1]))};
    for (std::size_t c = 2; c < fields.size(); ++c) {
      auto v = text::parse_double(fields[c]);
      if (!v || !std::isfinite(*v)) {
        throw DataError("non-finite value at line " + std::to_string(line_no));
      }
      values.push_back(*v);
    }
    entities.push_back(std::move(e));
  }
  // Uniqueness is checked here to report line numbers.
  std::unordered_map<std::int64_t, std::size_t> ids;
  std::unordered_map<std::string, std::size_t> names;
  for (std::size_t r = 0; r < entities.size(); ++r) {
    if (!ids.emplace(entities[r].id, r).second) {
      throw DataError("duplicate id " + std::to_string(entities[r].id) + " at line " +
                      std::to_string(r + 2));
    }
    if (!names.emplace(entities[r].name, r).second) {
      throw DataError("duplicate name " + entities[r].name + " at line " + std::to_string(r + 2));
    }
  }
  return EmbeddingMatrix(std::move(entities), std::move(values), dim);
}

inline EmbeddingMatrix load_embeddings(const std::string& path) {
  try {
    return parse_embeddings(text::read_file(path));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline std::string format_embeddings(const EmbeddingMatrix& m) {
  std::string out = "id\tname";
  for (std::size_t c = 0; c < m.dim(); ++c) out += "\tv" + std::to_string(c + 1);
  out += '\n';
  for (std::size_t r = 0; r < m.size(); ++r) {
    out += std::to_string(m.entity(r).id);
    out += '\t';
    out += m.entity(r).name;
    for (double v : m.row(r)) {
      out += '\t';
      out += text::round_trip(v);
    }
    out += '\n';
  }
  return out;
}

inline void save_embeddings(const EmbeddingMatrix& m, const std::string& path) {
  text::write_file(path, format_embeddings(m));
}

// ---------------------------------------------------------------------------
// Vector kernels

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double clamp_unit(double c) { return std::clamp(c, -1.0, 1.0); }

inline double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InvalidArgument("cosine: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  }
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw InvalidArgument("cosine: zero-norm vector");
  return clamp_unit(dot(a, b) / (na * nb));
}

inline std::vector<double> mean_of_rows(const EmbeddingMatrix& m, std::span<const std::size_t> rows) {
  std::vector<double> acc(m.dim(), 0.0);
  for (std::size_t r : rows) {
    auto v = m.row(r);
    for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += v[c];
  }
  if (!rows.empty()) {
    for (double& x : acc) x /= static_cast<double>(rows.size());
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Pairwise similarity

struct PairRow {
  std::int64_t id_a = 0;
  std::int64_t id_b = 0;
  double cosine = 0.0;
};

struct PairTable {
  std::vector<PairRow> rows;
};

// All C(n,2) cosines, ordered by (id_a, id_b) with id_a < id_b. Output order
// depends only on ids, so any worker count gives identical tables.
inline PairTable pairwise(const EmbeddingMatrix& m, unsigned workers = 1) {
  const std::size_t n = m.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return m.entity(a).id < m.entity(b).id; });

  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    norms[i] = norm(m.row(order[i]));
    if (norms[i] == 0.0) {
      throw InvalidArgument("pairwise: zero-norm vector for id " + std::to_string(m.entity(order[i]).id));
    }
  }

  PairTable table;
  table.rows.resize(n < 2 ? 0 : n * (n - 1) / 2);
  // Row block i starts after sum_{j<i} (n-1-j) pairs.
  auto offset = [n](std::size_t i) { return i * (2 * n - i - 1) / 2; };
  parallel_for(n, workers, [&](std::size_t i) {
    const auto a = m.row(order[i]);
    std::size_t out = offset(i);
    for (std::size_t j = i + 1; j < n; ++j, ++out) {
      const auto b = m.row(order[j]);
      table.rows[out] = {m.entity(order[i]).id, m.entity(order[j]).id,
                         clamp_unit(dot(a, b) / (norms[i] * norms[j]))};
    }
  });
  return table;
}

inline std::string format_pairs_csv(const PairTable& t) {
  std::string out = "id_a,id_b,cosine\n";
  out.reserve(out.size() + t.rows.size() * 28);
  for (const auto& r : t.rows) {
    out += std::to_string(r.id_a);
    out += ',';
    out += std::to_string(r.id_b);
    out += ',';
    out += text::fixed(r.cosine, 9);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Labels

enum class LabelKind { ordinal, binary, numeric, tags, categorical };

inline std::string to_string(LabelKind k) {
  switch (k) {
    case LabelKind::ordinal: return "ordinal";
    case LabelKind::binary: return "binary";
    case LabelKind::numeric: return "numeric";
    case LabelKind::tags: return "tags";
    case LabelKind::categorical: return "categorical";
  }
  return "?";
}

inline LabelKind label_kind_from(const std::string& s) {
  if (s == "ordinal") return LabelKind::ordinal;
  if (s == "binary") return LabelKind::binary;
  if (s == "numeric") return LabelKind::numeric;
  if (s == "tags") return LabelKind::tags;
  if (s == "categorical") return LabelKind::categorical;
  throw DataError("unknown label kind '" + s + "'");
}

using LabelValue = std::variant<std::string, double, std::vector<std::string>>;

// Labels for one dimension, keyed by entity name. Values marked "N/A" are
// not labels; they are recorded in `excluded` so cohort sizes stay auditable.
struct LabelSet {
  std::string dimension;
  LabelKind kind = LabelKind::ordinal;
  std::vector<std::string> scale;
  std::optional<std::string> units;
  std::map<std::string, LabelValue> labels;
  std::vector<std::string> excluded;

  std::size_t size() const { return labels.size(); }

  int level_of(const std::string& value) const {
    auto it = std::find(scale.begin(), scale.end(), value);
    if (it == scale.end()) return -1;
    return static_cast<int>(it - scale.begin());
  }

  // Ordinal rank, 1/0 for binary, the value for numeric.
  double numeric_value(const LabelValue& v) const {
    switch (kind) {
      case LabelKind::ordinal: return static_cast<double>(level_of(std::get<std::string>(v)));
      case LabelKind::binary: return std::get<std::string>(v) == "yes" ? 1.0 : 0.0;
      case LabelKind::numeric: return std::get<double>(v);
      default: throw InvalidArgument("labels '" + dimension + "' are not numeric-valued");
    }
  }

  void validate() const {
    for (const auto& [name, v] : labels) {
      switch (kind) {
        case LabelKind::ordinal:
          if (!std::holds_alternative<std::string>(v) || level_of(std::get<std::string>(v)) < 0) {
            throw DataError(dimension + ": value for " + name + " is not on the scale");
          }
          break;
        case LabelKind::binary:
          if (!std::holds_alternative<std::string>(v) ||
              (std::get<std::string>(v) != "yes" && std::get<std::string>(v) != "no")) {
            throw DataError(dimension + ": binary value for " + name + " must be yes or no");
          }
          break;
        case LabelKind::numeric:
          if (!std::holds_alternative<double>(v) || !std::isfinite(std::get<double>(v))) {
            throw DataError(dimension + ": numeric value for " + name + " is not finite");
          }
          break;
        case LabelKind::categorical:
          if (!std::holds_alternative<std::string>(v)) {
            throw DataError(dimension + ": categorical value for " + name + " must be a string");
          }
          break;
        case LabelKind::tags:
          if (!std::holds_alternative<std::vector<std::string>>(v)) {
            throw DataError(dimension + ": tags for " + name + " must be a list");
          }
          break;
      }
    }
    if (kind == LabelKind::ordinal && scale.size() < 2) {
      throw DataError(dimension + ": ordinal labels need a scale of at least two levels");
    }
  }
};

inline bool is_missing_token(const std::string& s) {
  return s == "N/A" || s == "n/a" || s == "NA";
}

inline LabelSet labels_from_json(const nlohmann::json& j) {
  LabelSet ls;
  try {
    ls.dimension = j.at("dimension").get<std::string>();
    ls.kind = label_kind_from(j.at("kind").get<std::string>());
    if (j.contains("scale")) ls.scale = j.at("scale").get<std::vector<std::string>>();
    if (j.contains("units") && !j.at("units").is_null()) ls.units = j.at("units").get<std::string>();
    for (const auto& [name, v] : j.at("labels").items()) {
      switch (ls.kind) {
        case LabelKind::numeric:
          if (v.is_string() && is_missing_token(v.get<std::string>())) {
            ls.excluded.push_back(name);
          } else if (v.is_number()) {
            ls.labels.emplace(name, v.get<double>());
          } else {
            throw DataError(ls.dimension + ": numeric value expected for " + name);
          }
          break;
        case LabelKind::tags:
          ls.labels.emplace(name, v.get<std::vector<std::string>>());
          break;
        case LabelKind::binary: {
          std::string s = v.is_boolean() ? (v.get<bool>() ? "yes" : "no") : text::lower(v.get<std::string>());
          if (is_missing_token(v.is_string() ? v.get<std::string>() : std::string{})) {
            ls.excluded.push_back(name);
          } else {
            ls.labels.emplace(name, s);
          }
          break;
        }
        default: {
          std::string s = v.is_number() ? v.dump() : v.get<std::string>();
          if (is_missing_token(s)) {
            ls.excluded.push_back(name);
          } else {
            ls.labels.emplace(name, s);
          }
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("labels: ") + e.what());
  }
  std::sort(ls.excluded.begin(), ls.excluded.end());
  ls.validate();
  return ls;
}

inline nlohmann::ordered_json labels_to_json(const LabelSet& ls) {
  nlohmann::ordered_json j;
  j["dimension"] = ls.dimension;
  j["kind"] = to_string(ls.kind);
  if (!ls.scale.empty()) j["scale"] = ls.scale;
  if (ls.units) j["units"] = *ls.units;
  nlohmann::ordered_json labels = nlohmann::ordered_json::object();
  for (const auto& [name, v] : ls.labels) {
    std::visit([&](const auto& x) { labels[name] = x; }, v);
  }
  for (const auto& name : ls.excluded) labels[name] = "N/A";
  j["labels"] = labels;
  return j;
}

inline LabelSet load_labels(const std::string& path) {
  try {
    return labels_from_json(nlohmann::json::parse(text::read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline void save_labels(const LabelSet& ls, const std::string& path) {
  text::write_file(path, labels_to_json(ls).dump(2) + "\n");
}

}  // namespace flavoraxis
