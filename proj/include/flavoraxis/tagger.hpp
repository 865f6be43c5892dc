#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "flavoraxis/corpus.hpp"
#include "flavoraxis/error.hpp"
#include "flavoraxis/parallel.hpp"
#include "flavoraxis/providers.hpp"
#include "flavoraxis/text.hpp"

namespace flavoraxis::tagger {

struct FieldSpec {
  std::string name;
  std::string dimension;  // LabelSet name; defaults to `name`
  LabelKind kind = LabelKind::categorical;
  std::vector<std::string> values;   // legal values (string kinds, and tag items)
  std::vector<std::string> scale;    // ordinal order, missing tokens excluded
  std::vector<std::string> missing;  // legal values meaning "no label"
  bool integer = false;
  std::optional<double> minimum;
  std::optional<double> maximum;
  std::optional<std::string> units;
};

struct DimensionSchema {
  std::string family;
  std::string prompt;  // contains {ingredients}
  std::size_t batch_size = 50;
  std::vector<std::size_t> alt_batch_sizes;
  std::string model;
  double temperature = 0.1;
  int max_output_tokens = 16000;
  std::vector<FieldSpec> fields;

  const FieldSpec* field(const std::string& n) const {
    for (const auto& f : fields) {
      if (f.name == n) return &f;
    }
    return nullptr;
  }
};

inline constexpr std::string_view kBatchPlaceholder = "{ingredients}";

inline DimensionSchema schema_from_json(const nlohmann::json& j) {
  DimensionSchema s;
  try {
    s.family = j.at("family").get<std::string>();
    s.prompt = j.at("prompt").get<std::string>();
    s.batch_size = j.value("batch_size", s.batch_size);
    s.alt_batch_sizes = j.value("alt_batch_sizes", s.alt_batch_sizes);
    s.model = j.value("model", s.model);
    s.temperature = j.value("temperature", s.temperature);
    s.max_output_tokens = j.value("max_output_tokens", s.max_output_tokens);
    for (const auto& fj : j.at("fields")) {
      FieldSpec f;
      f.name = fj.at("name").get<std::string>();
      f.dimension = fj.value("dimension", f.name);
      f.kind = label_kind_from(fj.at("kind").get<std::string>());
      f.values = fj.value("values", f.values);
      f.scale = fj.value("scale", f.scale);
      f.missing = fj.value("missing", f.missing);
      f.integer = fj.value("integer", false);
      if (fj.contains("minimum")) f.minimum = fj["minimum"].get<double>();
      if (fj.contains("maximum")) f.maximum = fj["maximum"].get<double>();
      if (fj.contains("units")) f.units = fj["units"].get<std::string>();
      s.fields.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("schema: " + std::string(e.what()));
  }
  if (s.prompt.find(kBatchPlaceholder) == std::string::npos) {
    throw DataError("schema " + s.family + ": prompt template lacks " + std::string(kBatchPlaceholder));
  }
  if (s.batch_size == 0) throw DataError("schema " + s.family + ": batch_size must be positive");
  if (s.fields.empty()) throw DataError("schema " + s.family + ": no fields");
  std::set<std::string> names;
  for (auto& f : s.fields) {
    if (!names.insert(f.name).second) throw DataError("schema " + s.family + ": duplicate field " + f.name);
    std::set<std::string> uniq(f.values.begin(), f.values.end());
    if (uniq.size() != f.values.size()) throw DataError("schema " + s.family + ": duplicate value in " + f.name);
    for (const auto& m : f.missing) {
      if (!uniq.count(m)) throw DataError("schema " + s.family + ": missing token " + m + " not a legal value");
    }
    if (f.kind == LabelKind::ordinal) {
      if (f.scale.empty()) {
        for (const auto& v : f.values) {
          if (std::find(f.missing.begin(), f.missing.end(), v) == f.missing.end()) f.scale.push_back(v);
        }
      }
      for (const auto& v : f.scale) {
        if (!uniq.count(v)) throw DataError("schema " + s.family + ": scale value " + v + " not legal in " + f.name);
      }
    }
    if (f.kind == LabelKind::binary && f.values.empty()) f.values = {"yes", "no"};
    if (f.kind != LabelKind::numeric && f.values.empty()) {
      throw DataError("schema " + s.family + ": field " + f.name + " has no value domain");
    }
  }
  return s;
}

inline DimensionSchema load_schema(const std::string& path) {
  try {
    return schema_from_json(nlohmann::json::parse(text::read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
}

// Structured-output schema sent with each request: an array of objects with
// every field required.
inline nlohmann::json response_schema(const DimensionSchema& s) {
  nlohmann::json props = nlohmann::json::object();
  nlohmann::json required = nlohmann::json::array();
  for (const auto& f : s.fields) {
    nlohmann::json p;
    if (f.kind == LabelKind::numeric) {
      p["type"] = f.integer ? "INTEGER" : "NUMBER";
    } else if (f.kind == LabelKind::tags) {
      p = {{"type", "ARRAY"}, {"items", {{"type", "STRING"}, {"enum", f.values}}}};
    } else {
      p = {{"type", "STRING"}, {"enum", f.values}};
    }
    props[f.name] = p;
    required.push_back(f.name);
  }
  return {{"type", "ARRAY"}, {"items", {{"type", "OBJECT"}, {"properties", props}, {"required", required}}}};
}

inline std::string render_prompt(const DimensionSchema& s, const std::vector<std::string>& names) {
  std::string list;
  for (std::size_t i = 0; i < names.size(); ++i) list += std::to_string(i + 1) + ". " + names[i] + "\n";
  std::string p = s.prompt;
  const auto at = p.find(kBatchPlaceholder);
  p.replace(at, kBatchPlaceholder.size(), list);
  return p;
}

// ---------------------------------------------------------------------------
// One batch

using Record = std::map<std::string, LabelValue>;

struct Reject {
  std::string ingredient;
  std::string reason;
};

struct BatchResult {
  std::vector<std::optional<Record>> records;  // aligned with the input names
  std::vector<Reject> rejects;
  std::optional<std::string> batch_error;
};

namespace detail {

inline bool contains(const std::vector<std::string>& v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

// Validated value for one field, or an error message.
inline std::variant<LabelValue, std::string> check_field(const FieldSpec& f, const nlohmann::json& v) {
  switch (f.kind) {
    case LabelKind::numeric: {
      if (!v.is_number()) return "field " + f.name + " is not a number";
      const double x = v.get<double>();
      if (!std::isfinite(x)) return "field " + f.name + " is not finite";
      if (f.integer && std::floor(x) != x) return "field " + f.name + " must be an integer";
      if (f.minimum && x < *f.minimum) return "field " + f.name + " below minimum";
      if (f.maximum && x > *f.maximum) return "field " + f.name + " above maximum";
      return LabelValue{x};
    }
    case LabelKind::tags: {
      if (!v.is_array()) return "field " + f.name + " is not a list";
      std::vector<std::string> out;
      for (const auto& item : v) {
        if (!item.is_string() || !contains(f.values, item.get<std::string>())) {
          return "field " + f.name + " has illegal item " + item.dump();
        }
        if (!contains(out, item.get<std::string>())) out.push_back(item.get<std::string>());
      }
      return LabelValue{out};
    }
    default: {
      if (v.is_number_integer() && f.kind == LabelKind::ordinal) {
        // Integer-coded levels such as NOVA may come back unquoted.
        const auto s = std::to_string(v.get<long long>());
        if (contains(f.values, s)) return LabelValue{s};
      }
      if (!v.is_string()) return "field " + f.name + " is not a string";
      auto s = v.get<std::string>();
      if (f.kind == LabelKind::binary) s = text::lower(s);
      if (!contains(f.values, s)) return "field " + f.name + " has illegal value '" + s + "'";
      return LabelValue{s};
    }
  }
}

}  // namespace detail

inline BatchResult validate_response(const std::vector<std::string>& names, const DimensionSchema& schema,
                                     const std::string& raw) {
  nlohmann::json arr;
  try {
    arr = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("unparseable response: ") + e.what());
  }
  if (!arr.is_array()) throw DataError("unparseable response: top level is not an array");
  BatchResult out;
  out.records.resize(names.size());
  if (arr.size() != names.size()) {
    out.batch_error = "response has " + std::to_string(arr.size()) + " records for " + std::to_string(names.size()) +
                      " ingredients";
    for (const auto& n : names) out.rejects.push_back({n, *out.batch_error});
    return out;
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto& obj = arr[i];
    if (!obj.is_object()) {
      out.rejects.push_back({names[i], "record is not an object"});
      continue;
    }
    Record rec;
    std::optional<std::string> err;
    for (const auto& f : schema.fields) {
      if (!obj.contains(f.name)) {
        err = "missing field " + f.name;
        break;
      }
      auto checked = detail::check_field(f, obj[f.name]);
      if (auto* msg = std::get_if<std::string>(&checked)) {
        err = *msg;
        break;
      }
      rec[f.name] = std::get<LabelValue>(checked);
    }
    if (err) out.rejects.push_back({names[i], *err});
    else out.records[i] = std::move(rec);
  }
  return out;
}

inline providers::LlmRequest batch_request(const std::vector<std::string>& names, const DimensionSchema& schema) {
  providers::LlmRequest req;
  req.model = schema.model;
  req.prompt = render_prompt(schema, names);
  req.response_schema = response_schema(schema);
  req.temperature = schema.temperature;
  req.max_output_tokens = schema.max_output_tokens;
  return req;
}

inline BatchResult tag_batch(const std::vector<std::string>& names, const DimensionSchema& schema,
                             providers::LlmClient& client, std::size_t batch_size = 0) {
  const std::size_t limit = batch_size ? batch_size : schema.batch_size;
  if (names.size() > limit) {
    throw InvalidArgument("tag_batch: " + std::to_string(names.size()) + " ingredients exceed batch size " +
                          std::to_string(limit));
  }
  if (names.empty()) return {};
  return validate_response(names, schema, client.complete(batch_request(names, schema)));
}

// ---------------------------------------------------------------------------
// Coverage loop

class CoverageError : public DataError {
 public:
  CoverageError(const std::string& what, std::vector<std::string> residual)
      : DataError(what), residual_(std::move(residual)) {}
  const std::vector<std::string>& residual() const { return residual_; }

 private:
  std::vector<std::string> residual_;
};

struct TagRun {
  std::string family;
  std::vector<std::string> ingredients;
  std::map<std::string, Record> records;
  std::map<std::string, std::size_t> attempts;
  std::size_t rounds = 0;
  std::vector<std::string> log;
  std::vector<LabelSet> labels;  // one per schema field
};

inline std::vector<LabelSet> to_label_sets(const DimensionSchema& schema, const std::map<std::string, Record>& recs) {
  std::vector<LabelSet> out;
  for (const auto& f : schema.fields) {
    LabelSet ls;
    ls.dimension = f.dimension;
    ls.kind = f.kind;
    ls.scale = f.scale;
    ls.units = f.units;
    for (const auto& [name, rec] : recs) {
      const auto& v = rec.at(f.name);
      if (auto* s = std::get_if<std::string>(&v); s && detail::contains(f.missing, *s)) {
        ls.excluded.push_back(name);
        continue;
      }
      ls.labels[name] = v;
    }
    out.push_back(std::move(ls));
  }
  return out;
}

struct CoverageOptions {
  std::size_t max_rounds = 3;
  std::size_t batch_size = 0;  // 0: schema default
  unsigned in_flight = 1;      // concurrent batches
};

// Re-submits every ingredient without a valid record until all are covered or
// max_rounds is reached. Transport and parse failures only affect their batch.
inline TagRun tag_to_coverage(const std::vector<std::string>& ingredients, const DimensionSchema& schema,
                              providers::LlmClient& client, const CoverageOptions& opt = {}) {
  if (opt.max_rounds < 1) throw InvalidArgument("tag_to_coverage: max_rounds must be at least 1");
  const std::size_t bs = opt.batch_size ? opt.batch_size : schema.batch_size;
  TagRun run;
  run.family = schema.family;
  std::set<std::string> seen;
  for (const auto& n : ingredients) {
    if (seen.insert(n).second) run.ingredients.push_back(n);
  }
  std::vector<std::string> residual = run.ingredients;
  while (!residual.empty() && run.rounds < opt.max_rounds) {
    ++run.rounds;
    std::vector<std::vector<std::string>> batches;
    for (std::size_t at = 0; at < residual.size(); at += bs) {
      batches.emplace_back(residual.begin() + static_cast<std::ptrdiff_t>(at),
                           residual.begin() + static_cast<std::ptrdiff_t>(std::min(residual.size(), at + bs)));
    }
    std::vector<BatchResult> results(batches.size());
    std::vector<std::string> errors(batches.size());
    parallel_for(batches.size(), opt.in_flight, [&](std::size_t b) {
      try {
        results[b] = tag_batch(batches[b], schema, client, bs);
      } catch (const ProviderError& e) {
        errors[b] = std::string("provider: ") + e.what();
      } catch (const DataError& e) {
        errors[b] = e.what();
      }
    });
    std::vector<std::string> next;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const std::string tag = "round " + std::to_string(run.rounds) + " batch " + std::to_string(b) + ": ";
      for (const auto& n : batches[b]) ++run.attempts[n];
      if (!errors[b].empty()) {
        run.log.push_back(tag + errors[b]);
        next.insert(next.end(), batches[b].begin(), batches[b].end());
        continue;
      }
      if (results[b].batch_error) run.log.push_back(tag + *results[b].batch_error);
      for (const auto& r : results[b].rejects) {
        if (!results[b].batch_error) run.log.push_back(tag + r.ingredient + ": " + r.reason);
      }
      for (std::size_t i = 0; i < batches[b].size(); ++i) {
        if (results[b].records[i]) run.records[batches[b][i]] = *results[b].records[i];
        else next.push_back(batches[b][i]);
      }
    }
    residual = std::move(next);
  }
  if (!residual.empty()) {
    throw CoverageError("tagging " + schema.family + ": " + std::to_string(residual.size()) +
                            " ingredients untagged after " + std::to_string(run.rounds) +
                            " rounds: " + text::join(residual, ", "),
                        residual);
  }
  run.labels = to_label_sets(schema, run.records);
  return run;
}

}  // namespace flavoraxis::tagger
