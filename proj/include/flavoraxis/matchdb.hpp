#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "flavoraxis/corpus.hpp"
#include "flavoraxis/curation.hpp"
#include "flavoraxis/error.hpp"
#include "flavoraxis/parallel.hpp"
#include "flavoraxis/providers.hpp"
#include "flavoraxis/text.hpp"

namespace flavoraxis::matchdb {

struct Amount {
  double value = 0.0;
  std::string units;
};

struct DbEntry {
  std::string entry_id;
  std::string description;
  std::map<std::string, Amount> values;
};

// Long-form CSV `entry_id,description,nutrient,amount,units`. An entry may
// appear on several rows; a row with an empty nutrient only declares it.
inline std::vector<DbEntry> parse_db_entries(std::string_view csv) {
  std::vector<DbEntry> out;
  std::map<std::string, std::size_t> at;
  const auto rows = text::lines(csv);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (text::trim(rows[i]).empty()) continue;
    const auto f = text::csv_fields(rows[i]);
    const std::string where = "db line " + std::to_string(i + 1);
    if (f.size() != 5) throw DataError(where + ": expected 5 fields");
    auto [it, fresh] = at.emplace(f[0], out.size());
    if (fresh) out.push_back({f[0], f[1], {}});
    auto& e = out[it->second];
    if (e.description != f[1]) throw DataError(where + ": entry " + f[0] + " has two descriptions");
    if (text::trim(f[2]).empty()) continue;
    auto v = text::parse_double(f[3]);
    if (!v || !std::isfinite(*v) || *v < 0) throw DataError(where + ": amount must be finite and >= 0");
    if (!e.values.emplace(f[2], Amount{*v, f[4]}).second) {
      throw DataError(where + ": duplicate nutrient " + f[2] + " for entry " + f[0]);
    }
  }
  return out;
}

inline std::vector<DbEntry> load_db_entries(const std::string& path) { return parse_db_entries(text::read_file(path)); }

// ---------------------------------------------------------------------------
// Normalization and stemming

// Lowercase; underscores and punctuation other than commas become spaces;
// whitespace collapsed; ", " between segments.
inline std::string normalize(std::string_view s) {
  std::string buf;
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) buf.push_back(static_cast<char>(std::tolower(c)));
    else if (ch == ',') buf.push_back(',');
    else buf.push_back(' ');
  }
  std::vector<std::string> segs;
  for (auto seg : text::split(buf, ',')) {
    std::string w;
    for (auto word : text::split(seg, ' ')) {
      if (word.empty()) continue;
      if (!w.empty()) w.push_back(' ');
      w.append(word);
    }
    if (!w.empty()) segs.push_back(w);
  }
  return text::join(segs, ", ");
}

inline std::vector<std::string> segments(const std::string& normalized) {
  std::vector<std::string> out;
  for (auto s : text::split(normalized, ',')) {
    auto t = text::trim(s);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

inline std::vector<std::string> words(const std::string& normalized) {
  std::vector<std::string> out;
  for (const auto& seg : segments(normalized)) {
    for (auto w : text::split(seg, ' ')) {
      if (!w.empty()) out.emplace_back(w);
    }
  }
  return out;
}

// Comma-free form: "spices, cumin seed" -> "spices cumin seed".
inline std::string plain(const std::string& normalized) { return text::join(words(normalized), " "); }

inline bool ends_with(const std::string& s, std::string_view suf) {
  return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

// Suffix stripping, one rule per word: ies->y; -es after o/ch/sh/x/ss/z;
// plural -s (not -ss, words over 3 letters); -ing/-ed when at least 4 letters
// remain.
inline std::string stem_word(const std::string& w) {
  if (w.size() > 4 && ends_with(w, "ies")) return w.substr(0, w.size() - 3) + "y";
  for (std::string_view suf : {"oes", "ches", "shes", "xes", "sses", "zes"}) {
    if (w.size() > suf.size() && ends_with(w, suf)) return w.substr(0, w.size() - 2);
  }
  if (w.size() > 3 && ends_with(w, "s") && !ends_with(w, "ss")) return w.substr(0, w.size() - 1);
  if (w.size() >= 7 && ends_with(w, "ing")) return w.substr(0, w.size() - 3);
  if (w.size() >= 6 && ends_with(w, "ed")) return w.substr(0, w.size() - 2);
  return w;
}

inline std::string stem_phrase(const std::string& phrase) {
  std::vector<std::string> out;
  for (const auto& w : words(phrase)) out.push_back(stem_word(w));
  return text::join(out, " ");
}

// ---------------------------------------------------------------------------
// Configuration data: processing words, preparation ranks, synonyms

struct Vocabulary {
  std::set<std::string> processing_words;
  std::map<std::string, std::string> synonyms;  // normalized source -> normalized target
};

inline std::set<std::string> parse_word_list(std::string_view content) {
  std::set<std::string> out;
  for (const auto& line : text::lines(content)) {
    auto t = text::trim(line);
    if (t.empty() || t[0] == '#') continue;
    out.insert(text::lower(t));
  }
  return out;
}

// CSV `from,to`.
inline std::map<std::string, std::string> parse_synonyms(std::string_view csv) {
  std::map<std::string, std::string> out;
  const auto rows = text::lines(csv);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (text::trim(rows[i]).empty() || rows[i][0] == '#') continue;
    const auto f = text::csv_fields(rows[i]);
    if (f.size() != 2) throw DataError("synonyms line " + std::to_string(i + 1) + ": expected from,to");
    out[normalize(f[0])] = normalize(f[1]);
  }
  return out;
}

inline Vocabulary load_vocabulary(const std::string& processing_words_path, const std::string& synonyms_path) {
  return {parse_word_list(text::read_file(processing_words_path)), parse_synonyms(text::read_file(synonyms_path))};
}

#ifdef FLAVORAXIS_DATA_DIR
inline Vocabulary default_vocabulary() {
  const std::string dir = FLAVORAXIS_DATA_DIR;
  return load_vocabulary(dir + "/processing_words.txt", dir + "/synonyms.csv");
}
#endif

// Preparation-state preference, lower is better. States not in the table,
// and descriptions naming no state, rank after every listed state.
inline constexpr double kUnknownPrepRank = 6.0;

inline const std::map<std::string, double>& prep_ranks() {
  static const std::map<std::string, double> r = {
      {"raw", 0.0},   {"fresh", 1.0},     {"whole", 1.5},    {"dried", 2.0},   {"ground", 2.5}, {"cooked", 3.0},
      {"boiled", 3.25}, {"roasted", 3.5}, {"baked", 3.75},   {"canned", 4.0},  {"frozen", 5.0},
  };
  return r;
}

// Rank of the most processed state named in the description.
inline double prep_rank(const std::string& normalized_description) {
  std::optional<double> worst;
  for (const auto& w : words(normalized_description)) {
    auto it = prep_ranks().find(w);
    if (it != prep_ranks().end()) worst = std::max(worst.value_or(it->second), it->second);
  }
  return worst.value_or(kUnknownPrepRank);
}

inline std::string strip_processing(const std::string& normalized, const std::set<std::string>& proc) {
  std::vector<std::string> segs;
  for (const auto& seg : segments(normalized)) {
    std::vector<std::string> kept;
    for (auto w : text::split(seg, ' ')) {
      if (!w.empty() && !proc.count(std::string(w))) kept.emplace_back(w);
    }
    if (!kept.empty()) segs.push_back(text::join(kept, " "));
  }
  return text::join(segs, ", ");
}

// ---------------------------------------------------------------------------
// Inverted index

struct IndexedEntry {
  std::size_t index = 0;  // position in the entry list
  std::string normalized;
  std::vector<std::string> forms;  // segments, comma form and plain form
  double prep_rank = kUnknownPrepRank;
};

struct Index {
  std::vector<IndexedEntry> entries;
  std::map<std::string, std::vector<std::size_t>> keys;  // key -> positions in `entries`
  std::vector<std::string> warnings;
};

inline Index build_index(const std::vector<DbEntry>& db) {
  Index idx;
  if (db.empty()) idx.warnings.push_back("empty database: index has no keys");
  for (std::size_t i = 0; i < db.size(); ++i) {
    const auto norm = normalize(db[i].description);
    if (norm.empty()) {
      idx.warnings.push_back("entry " + db[i].entry_id + " has an empty description; skipped");
      continue;
    }
    IndexedEntry e;
    e.index = i;
    e.normalized = norm;
    e.forms = segments(norm);
    e.forms.push_back(norm);
    e.forms.push_back(plain(norm));
    std::sort(e.forms.begin(), e.forms.end());
    e.forms.erase(std::unique(e.forms.begin(), e.forms.end()), e.forms.end());
    e.prep_rank = prep_rank(norm);
    std::set<std::string> keys;
    for (const auto& f : e.forms) {
      keys.insert(f);
      keys.insert(stem_phrase(f));
    }
    for (const auto& w : words(norm)) {
      keys.insert(w);
      keys.insert(stem_word(w));
    }
    const std::size_t pos = idx.entries.size();
    for (const auto& k : keys) idx.keys[k].push_back(pos);
    idx.entries.push_back(std::move(e));
  }
  return idx;
}

inline std::vector<std::size_t> lookup(const Index& idx, const std::string& key) {
  auto it = idx.keys.find(key);
  return it == idx.keys.end() ? std::vector<std::size_t>{} : it->second;
}

// ---------------------------------------------------------------------------
// Candidates

enum class Layer { rule, embed, llm };

inline std::string to_string(Layer l) {
  switch (l) {
    case Layer::rule: return "rule";
    case Layer::embed: return "embed";
    case Layer::llm: return "llm";
  }
  return "?";
}

struct MatchCandidate {
  std::string entry_id;
  std::string description;
  double score = 0.0;
  Layer layer = Layer::rule;
  double prep_rank = kUnknownPrepRank;
  std::string rationale;
};

inline constexpr double kExactScore = 1000.0;
inline constexpr double kProcessingScore = 900.0;
inline constexpr double kStemScore = 800.0;
inline constexpr double kConsolidationScore = 700.0;
inline constexpr double kSubstringScore = 600.0;
inline constexpr double kJaccardScore = 500.0;

namespace detail {

inline double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  const std::size_t uni = a.size() + b.size() - inter;
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

inline std::set<std::string> stemmed_words(const std::string& s) {
  std::set<std::string> out;
  for (const auto& w : words(s)) out.insert(stem_word(w));
  return out;
}

// Best tier for one entry, with rationale.
inline std::pair<double, std::string> score_entry(const std::string& q, const IndexedEntry& e, const Vocabulary& voc,
                                                  const std::vector<std::string>& aliases) {
  for (const auto& f : e.forms) {
    if (f == q) return {kExactScore, "exact match on '" + f + "'"};
  }
  const auto qs = strip_processing(q, voc.processing_words);
  if (!qs.empty()) {
    for (const auto& f : e.forms) {
      const auto fs = strip_processing(f, voc.processing_words);
      if (!fs.empty() && (fs == qs || plain(fs) == plain(qs))) {
        return {kProcessingScore, "match after removing processing words: '" + qs + "'"};
      }
    }
  }
  const auto qstem = stem_phrase(q);
  const auto qsstem = stem_phrase(qs);
  for (const auto& f : e.forms) {
    const auto fstem = stem_phrase(f);
    const auto fsstem = stem_phrase(strip_processing(f, voc.processing_words));
    if (fstem == qstem || (!qsstem.empty() && fsstem == qsstem)) {
      return {kStemScore, "stemmed match '" + fstem + "'"};
    }
  }
  for (const auto& a : aliases) {
    const auto astem = stem_phrase(a);
    for (const auto& f : e.forms) {
      if (f == a || stem_phrase(f) == astem) return {kConsolidationScore, "consolidated variant '" + a + "'"};
    }
  }
  double best = 0.0;
  std::string why;
  const auto qp = plain(q);
  for (const auto& f : e.forms) {
    const auto fp = plain(f);
    if (fp == qp || fp.empty() || qp.empty()) continue;
    const auto& shorter = fp.size() < qp.size() ? fp : qp;
    const auto& longer = fp.size() < qp.size() ? qp : fp;
    if (longer.find(shorter) == std::string::npos) continue;
    const double s = kSubstringScore * static_cast<double>(shorter.size()) / static_cast<double>(longer.size());
    if (s > best) {
      best = s;
      why = "substring '" + shorter + "' in '" + longer + "': 600*" + std::to_string(shorter.size()) + "/" +
            std::to_string(longer.size());
    }
  }
  const double j = jaccard(stemmed_words(q), stemmed_words(e.normalized));
  if (kJaccardScore * j > best) {
    best = kJaccardScore * j;
    why = "word overlap: 500*jaccard=" + text::fixed(j, 4);
  }
  return {best, why};
}

}  // namespace detail

// Total order: score desc, preparation rank asc, entry id asc.
inline bool candidate_before(const MatchCandidate& a, const MatchCandidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.prep_rank != b.prep_rank) return a.prep_rank < b.prep_rank;
  return a.entry_id < b.entry_id;
}

// Synonyms are applied to the whole name before lookup. `aliases` are other
// names of the same canonical ingredient (its consolidated variants).
inline std::vector<MatchCandidate> rule_match(const std::string& name, const Index& idx, const std::vector<DbEntry>& db,
                                              const Vocabulary& voc, const std::vector<std::string>& aliases = {}) {
  std::string q = normalize(name);
  if (auto it = voc.synonyms.find(q); it != voc.synonyms.end()) q = it->second;
  std::vector<std::string> al;
  for (const auto& a : aliases) {
    auto n = normalize(a);
    if (!n.empty() && n != q) al.push_back(n);
  }

  std::set<std::size_t> hits;
  auto add = [&](const std::string& key) {
    for (auto p : lookup(idx, key)) hits.insert(p);
  };
  for (const auto& probe : [&] {
         std::vector<std::string> v{q, plain(q), stem_phrase(q), strip_processing(q, voc.processing_words)};
         v.insert(v.end(), al.begin(), al.end());
         return v;
       }()) {
    add(probe);
    add(stem_phrase(probe));
    for (const auto& w : words(probe)) {
      add(w);
      add(stem_word(w));
    }
  }

  std::vector<MatchCandidate> out;
  for (auto p : hits) {
    const auto& e = idx.entries[p];
    auto [score, why] = detail::score_entry(q, e, voc, al);
    if (score <= 0.0) continue;
    out.push_back({db[e.index].entry_id, db[e.index].description, score, Layer::rule, e.prep_rank, why});
  }
  std::sort(out.begin(), out.end(), candidate_before);
  return out;
}

// ---------------------------------------------------------------------------
// Embedding and LLM layers

inline constexpr double kEmbedThreshold = 0.80;
inline constexpr std::size_t kEmbedTopK = 5;

inline std::vector<std::vector<double>> embed_entries(const std::vector<DbEntry>& db, providers::TextEmbedder& emb) {
  std::vector<std::vector<double>> out;
  out.reserve(db.size());
  for (const auto& e : db) {
    try {
      out.push_back(emb.embed(e.description));
    } catch (const ProviderError& err) {
      throw ProviderError("embedding entry " + e.entry_id + ": " + err.what(), err.retryable());
    }
  }
  return out;
}

// Top-5 entries by cosine between the name's text vector and each entry's,
// keeping only those >= 0.80.
inline std::vector<MatchCandidate> embed_match(const std::string& name, const std::vector<DbEntry>& db,
                                               const std::vector<std::vector<double>>& entry_vectors,
                                               providers::TextEmbedder& emb) {
  std::vector<double> q;
  try {
    q = emb.embed(name);
  } catch (const ProviderError& err) {
    throw ProviderError("embedding '" + name + "': " + err.what(), err.retryable());
  }
  std::vector<MatchCandidate> out;
  for (std::size_t i = 0; i < db.size(); ++i) {
    const double c = cosine(q, entry_vectors[i]);
    if (c < kEmbedThreshold) continue;
    out.push_back({db[i].entry_id, db[i].description, c, Layer::embed, prep_rank(normalize(db[i].description)),
                   "text-vector cosine " + text::fixed(c, 4)});
  }
  std::sort(out.begin(), out.end(), [](const MatchCandidate& a, const MatchCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.entry_id < b.entry_id;
  });
  if (out.size() > kEmbedTopK) out.resize(kEmbedTopK);
  return out;
}

struct ValidationPrompt {
  std::string template_text;  // placeholders {ingredient} and {candidates}
  nlohmann::json schema;
  std::string model;
  double temperature = 0.1;
  int max_output_tokens = 16000;
};

inline ValidationPrompt validation_prompt_from_json(const nlohmann::json& j) {
  ValidationPrompt p;
  try {
    p.template_text = j.at("prompt").get<std::string>();
    p.schema = j.at("response_schema");
    p.model = j.value("model", std::string());
    p.temperature = j.value("temperature", p.temperature);
    p.max_output_tokens = j.value("max_output_tokens", p.max_output_tokens);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("validation prompt: ") + e.what());
  }
  if (p.template_text.find("{ingredient}") == std::string::npos ||
      p.template_text.find("{candidates}") == std::string::npos) {
    throw DataError("validation prompt: template needs {ingredient} and {candidates}");
  }
  return p;
}

#ifdef FLAVORAXIS_DATA_DIR
inline ValidationPrompt default_validation_prompt() {
  return validation_prompt_from_json(
      nlohmann::json::parse(text::read_file(std::string(FLAVORAXIS_DATA_DIR) + "/schemas/match_validation.json")));
}
#endif

inline std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  for (std::size_t at = s.find(from); at != std::string::npos; at = s.find(from, at + to.size())) {
    s.replace(at, from.size(), to);
  }
  return s;
}

struct Validation {
  std::optional<std::size_t> chosen;  // index into the candidate list
  std::string reasoning;
  std::optional<std::string> warning;
};

inline Validation llm_validate(const std::string& name, const std::vector<MatchCandidate>& candidates,
                               providers::LlmClient& llm, const ValidationPrompt& prompt) {
  if (candidates.empty()) throw InvalidArgument("llm_validate: no candidates for " + name);
  std::string list;
  for (const auto& c : candidates) list += "\n- " + c.description;
  providers::LlmRequest req;
  req.model = prompt.model;
  req.prompt = replace_all(replace_all(prompt.template_text, "{ingredient}", name), "{candidates}", list);
  req.response_schema = prompt.schema;
  req.temperature = prompt.temperature;
  req.max_output_tokens = prompt.max_output_tokens;
  std::string raw;
  try {
    raw = llm.complete(req);
  } catch (const ProviderError& err) {
    throw ProviderError("validating '" + name + "': " + err.what(), err.retryable());
  }
  Validation v;
  std::string best;
  try {
    const auto j = nlohmann::json::parse(raw);
    best = j.at("best_match").get<std::string>();
    v.reasoning = j.value("reasoning", std::string());
  } catch (const nlohmann::json::exception&) {
    v.warning = name + ": unparseable validation response";
    return v;
  }
  if (best == "no_match") return v;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].description == best) {
      v.chosen = i;
      return v;
    }
  }
  v.warning = name + ": validator returned '" + best + "', which is not a candidate";
  return v;
}

// ---------------------------------------------------------------------------
// Pipeline

struct MatchRow {
  std::string ingredient;
  std::optional<std::string> entry_id;
  std::optional<Layer> layer;
  double score = 0.0;
  std::string rationale;
};

struct MatchTable {
  std::vector<MatchRow> rows;
  std::vector<std::string> warnings;

  std::size_t matched() const {
    return static_cast<std::size_t>(
        std::count_if(rows.begin(), rows.end(), [](const MatchRow& r) { return r.entry_id.has_value(); }));
  }
  double match_rate() const { return rows.empty() ? 0.0 : static_cast<double>(matched()) / rows.size(); }
};

// Minimum top rule score accepted at the rule layer; weaker names move on to
// the embedding layer.
inline constexpr double kRuleAcceptScore = 500.0;

struct MatchOptions {
  double rule_accept = kRuleAcceptScore;
  unsigned workers = 1;
};

// Aliases per ingredient name from a consolidation map: the original names of
// every canonical's members, keyed by canonical name.
inline std::map<std::string, std::vector<std::string>> aliases_from_map(const curation::ConsolidationMap& map) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& [id, members] : map.groups()) {
    auto& v = out[map.catalog.at(id).name];
    for (auto orig : members) v.push_back(map.entries.at(orig).original_name);
  }
  return out;
}

// Rule layer for every name; names without an accepted rule candidate go to
// the embedding layer, whose candidates are validated by the LLM. A name
// matched by an earlier layer is never revisited.
inline MatchTable match(const std::vector<std::string>& names, const std::vector<DbEntry>& db, const Index& idx,
                        const Vocabulary& voc, const std::map<std::string, std::vector<std::string>>& aliases,
                        providers::TextEmbedder* embedder, providers::LlmClient* llm,
                        const ValidationPrompt* prompt, const MatchOptions& opt = {}) {
  MatchTable t;
  t.rows.resize(names.size());
  static const std::vector<std::string> none;
  parallel_for(names.size(), opt.workers, [&](std::size_t i) {
    auto& row = t.rows[i];
    row.ingredient = names[i];
    auto it = aliases.find(names[i]);
    const auto cands = rule_match(names[i], idx, db, voc, it == aliases.end() ? none : it->second);
    if (!cands.empty() && cands.front().score >= opt.rule_accept) {
      row.entry_id = cands.front().entry_id;
      row.layer = Layer::rule;
      row.score = cands.front().score;
      row.rationale = cands.front().rationale;
    }
  });
  if (!embedder) return t;
  std::optional<std::vector<std::vector<double>>> vectors;
  for (auto& row : t.rows) {
    if (row.entry_id) continue;
    if (!vectors) vectors = embed_entries(db, *embedder);
    const auto cands = embed_match(row.ingredient, db, *vectors, *embedder);
    if (cands.empty() || !llm || !prompt) continue;
    const auto v = llm_validate(row.ingredient, cands, *llm, *prompt);
    if (v.warning) t.warnings.push_back(*v.warning);
    if (!v.chosen) continue;
    const auto& c = cands[*v.chosen];
    row.entry_id = c.entry_id;
    row.layer = Layer::llm;
    row.score = c.score;
    row.rationale = c.rationale + "; validated";
  }
  return t;
}

inline std::string match_table_csv(const MatchTable& t) {
  std::string s = "ingredient,entry_id,layer,score\n";
  for (const auto& r : t.rows) {
    s += text::csv_escape(r.ingredient) + ",";
    if (r.entry_id) {
      s += text::csv_escape(*r.entry_id) + "," + to_string(*r.layer) + "," + text::round_trip(r.score);
    } else {
      s += ",unmatched,";
    }
    s += "\n";
  }
  return s;
}

inline MatchTable parse_match_table(std::string_view csv) {
  MatchTable t;
  const auto rows = text::lines(csv);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (text::trim(rows[i]).empty()) continue;
    const auto f = text::csv_fields(rows[i]);
    if (f.size() != 4) throw DataError("match table line " + std::to_string(i + 1) + ": expected 4 fields");
    MatchRow r;
    r.ingredient = f[0];
    if (!f[1].empty()) {
      r.entry_id = f[1];
      if (f[2] == "rule") r.layer = Layer::rule;
      else if (f[2] == "embed") r.layer = Layer::embed;
      else if (f[2] == "llm") r.layer = Layer::llm;
      else throw DataError("match table line " + std::to_string(i + 1) + ": unknown layer " + f[2]);
      auto s = text::parse_double(f[3]);
      if (!s) throw DataError("match table line " + std::to_string(i + 1) + ": bad score");
      r.score = *s;
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Measurements

// `nutrient` may name a composite as "a+b+c": the value is the sum of the
// components present in the entry (at least one required).
inline LabelSet join_measurements(const MatchTable& t, const std::vector<DbEntry>& db, const std::string& nutrient) {
  std::vector<std::string> parts;
  for (auto p : text::split(nutrient, '+')) {
    auto s = std::string(text::trim(p));
    if (s.empty()) throw InvalidArgument("join_measurements: empty component in '" + nutrient + "'");
    parts.push_back(s);
  }
  std::map<std::string, const DbEntry*> by_id;
  for (const auto& e : db) by_id[e.entry_id] = &e;
  LabelSet ls;
  ls.dimension = nutrient;
  ls.kind = LabelKind::numeric;
  std::optional<std::string> units;
  for (const auto& r : t.rows) {
    if (!r.entry_id) continue;
    auto it = by_id.find(*r.entry_id);
    if (it == by_id.end()) throw DataError("match table references unknown entry " + *r.entry_id);
    double sum = 0.0;
    bool any = false;
    for (const auto& p : parts) {
      auto v = it->second->values.find(p);
      if (v == it->second->values.end()) continue;
      if (units && *units != v->second.units) {
        throw DataError("join_measurements: mixed units for " + nutrient + " (" + *units + " vs " + v->second.units +
                        ")");
      }
      units = v->second.units;
      sum += v->second.value;
      any = true;
    }
    if (any) ls.labels[r.ingredient] = sum;
  }
  if (ls.labels.empty()) throw InvalidArgument("join_measurements: no matched entry has " + nutrient);
  ls.units = units;
  return ls;
}

}  // namespace flavoraxis::matchdb
