#pragma once

// Seeded synthetic corpora with known structure: a planted ordinal gradient
// and labeled Gaussian clusters.

#include <cmath>
#include <string>
#include <vector>

#include "flavoraxis/corpus.hpp"
#include "flavoraxis/culture.hpp"
#include "flavoraxis/random.hpp"

namespace flavoraxis::synth {

inline std::vector<double> random_unit(Stream& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double len = 0.0;
  while (len == 0.0) {
    for (auto& x : v) x = rng.normal();
    len = norm(v);
  }
  for (auto& x : v) x /= len;
  return v;
}

// Gram-Schmidt b against unit a, renormalized.
inline std::vector<double> orthogonalize(std::vector<double> b, const std::vector<double>& a) {
  const double p = dot(b, a);
  for (std::size_t d = 0; d < b.size(); ++d) b[d] -= p * a[d];
  const double len = norm(b);
  for (auto& x : b) x /= len;
  return b;
}

struct GradientSpec {
  std::size_t levels = 5;
  std::size_t per_level = 200;
  std::size_t dim = 300;
  // Per-level step along the planted direction divided by the expected norm
  // of each entity's noise vector.
  double snr = 10.0;
  double step = 1.0;
  // Shared offset orthogonal to the gradient so no row sits near the origin.
  double offset = 5.0;
  std::string dimension = "planted";
  std::int64_t first_id = 1;
};

struct PlantedGradient {
  EmbeddingMatrix matrix;
  LabelSet labels;
  std::vector<double> direction;
};

inline std::vector<std::string> level_names(std::size_t levels) {
  std::vector<std::string> out;
  for (std::size_t l = 0; l < levels; ++l) out.push_back("L" + std::to_string(l));
  return out;
}

inline PlantedGradient planted_gradient(const GradientSpec& spec, Seed seed) {
  if (spec.levels < 2) throw InvalidArgument("planted_gradient: need at least 2 levels");
  if (spec.per_level < 1 || spec.dim < 2) throw InvalidArgument("planted_gradient: empty shape");
  if (!(spec.snr > 0.0)) throw InvalidArgument("planted_gradient: snr must be positive");
  Stream rng(seed, 0);
  PlantedGradient g;
  g.direction = random_unit(rng, spec.dim);
  const auto base = orthogonalize(random_unit(rng, spec.dim), g.direction);
  const double sigma = spec.step / (spec.snr * std::sqrt(static_cast<double>(spec.dim)));
  const double mid = static_cast<double>(spec.levels - 1) / 2.0;

  g.labels.dimension = spec.dimension;
  g.labels.kind = LabelKind::ordinal;
  g.labels.scale = level_names(spec.levels);

  std::vector<Entity> ents;
  std::vector<double> values;
  values.reserve(spec.levels * spec.per_level * spec.dim);
  std::int64_t id = spec.first_id;
  for (std::size_t l = 0; l < spec.levels; ++l) {
    const double t = (static_cast<double>(l) - mid) * spec.step;
    for (std::size_t i = 0; i < spec.per_level; ++i, ++id) {
      const std::string name = "e" + std::to_string(id);
      ents.push_back({id, name});
      for (std::size_t d = 0; d < spec.dim; ++d) {
        values.push_back(spec.offset * base[d] + t * g.direction[d] + sigma * rng.normal());
      }
      g.labels.labels.emplace(name, g.labels.scale[l]);
    }
  }
  g.matrix = EmbeddingMatrix(std::move(ents), std::move(values), spec.dim);
  return g;
}

// Same labels with the values permuted across entities.
inline LabelSet shuffled_labels(const LabelSet& ls, Seed seed) {
  std::vector<std::string> names;
  std::vector<LabelValue> vals;
  for (const auto& [n, v] : ls.labels) {
    names.push_back(n);
    vals.push_back(v);
  }
  Stream rng(seed, 0);
  rng.shuffle(vals);
  LabelSet out = ls;
  out.labels.clear();
  for (std::size_t i = 0; i < names.size(); ++i) out.labels.emplace(names[i], vals[i]);
  return out;
}

struct ClusterSpec {
  std::size_t clusters = 7;
  std::size_t n = 600;
  std::size_t dim = 300;
  // Distance between a cluster center and the shared offset, and the expected
  // norm of per-entity noise.
  double separation = 1.0;
  double spread = 0.5;
  double offset = 3.0;
  std::int64_t first_id = 1;
};

struct ClusterCorpus {
  EmbeddingMatrix matrix;
  culture::CuisineTags tags;
  std::vector<std::size_t> assignment;
};

inline std::vector<std::string> cluster_names(std::size_t k) {
  std::vector<std::string> out;
  for (std::size_t c = 0; c < k; ++c) out.push_back("C" + std::to_string(c));
  return out;
}

// Entities are assigned round-robin, so cluster sizes differ by at most one.
inline ClusterCorpus gaussian_clusters(const ClusterSpec& spec, Seed seed) {
  if (spec.clusters < 1 || spec.clusters > 64) throw InvalidArgument("gaussian_clusters: 1..64 clusters");
  if (spec.n < spec.clusters) throw InvalidArgument("gaussian_clusters: fewer entities than clusters");
  Stream rng(seed, 0);
  const auto base = random_unit(rng, spec.dim);
  std::vector<std::vector<double>> centers;
  for (std::size_t c = 0; c < spec.clusters; ++c) centers.push_back(orthogonalize(random_unit(rng, spec.dim), base));
  const double sigma = spec.spread / std::sqrt(static_cast<double>(spec.dim));

  ClusterCorpus out;
  out.tags.pool_spec = "synthetic";
  out.tags.clusters = cluster_names(spec.clusters);
  std::vector<Entity> ents;
  std::vector<double> values;
  values.reserve(spec.n * spec.dim);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const std::size_t c = i % spec.clusters;
    const std::int64_t id = spec.first_id + static_cast<std::int64_t>(i);
    const std::string name = "e" + std::to_string(id);
    ents.push_back({id, name});
    for (std::size_t d = 0; d < spec.dim; ++d) {
      values.push_back(spec.offset * base[d] + spec.separation * centers[c][d] + sigma * rng.normal());
    }
    out.tags.tags[name] = {out.tags.clusters[c]};
    out.assignment.push_back(c);
  }
  out.matrix = EmbeddingMatrix(std::move(ents), std::move(values), spec.dim);
  return out;
}

// Tags drawn uniformly from the catalog, one per entity, independent of geometry.
inline culture::CuisineTags random_tags(const culture::CuisineTags& tags, Seed seed) {
  Stream rng(seed, 0);
  culture::CuisineTags out;
  out.pool_spec = tags.pool_spec;
  out.clusters = tags.clusters;
  for (const auto& [name, list] : tags.tags) {
    out.tags[name] = {tags.clusters[rng.below(tags.clusters.size())]};
  }
  return out;
}

}  // namespace flavoraxis::synth
