#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include "flavoraxis/error.hpp"
#include "flavoraxis/parallel.hpp"
#include "flavoraxis/random.hpp"

namespace flavoraxis::stats {

enum class Method { exact, normal_approx, t_approx, permutation };

// one_sided is the upper tail: large statistics are evidence against the null.
enum class Sidedness { one_sided, two_sided };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::exact: return "exact";
    case Method::normal_approx: return "normal_approx";
    case Method::t_approx: return "t_approx";
    case Method::permutation: return "permutation";
  }
  return "?";
}

inline std::string to_string(Sidedness s) {
  return s == Sidedness::one_sided ? "one_sided" : "two_sided";
}

struct StatResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  std::size_t m = 0;
  Method method = Method::exact;
  Sidedness sidedness = Sidedness::two_sided;
  std::vector<std::string> notes;
};

inline double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Bessel-corrected (ddof = 1) variance.
inline double sample_variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return ss / static_cast<double>(v.size() - 1);
}

inline double sample_sd(std::span<const double> v) { return std::sqrt(sample_variance(v)); }

// Population (ddof = 0) variance.
inline double population_variance(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double mu = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return ss / static_cast<double>(v.size());
}

inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

inline double clamp_p(double p) { return std::clamp(p, 0.0, 1.0); }

// 1-based ranks with ties assigned the average of the ranks they span.
inline std::vector<double> midranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw InvalidArgument("pearson: constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline bool has_two_distinct(std::span<const double> v) {
  return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) != v.end();
}

// Spearman rho as Pearson on midranks; two-sided p from the t distribution
// with n - 2 degrees of freedom.
inline StatResult spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidArgument("spearman: length mismatch");
  if (x.size() < 3) throw InvalidArgument("spearman: need at least 3 observations");
  if (!has_two_distinct(x) || !has_two_distinct(y)) throw InvalidArgument("spearman: constant input");
  const auto rx = midranks(x);
  const auto ry = midranks(y);
  StatResult r;
  r.statistic = pearson(rx, ry);
  r.n = x.size();
  r.method = Method::t_approx;
  r.sidedness = Sidedness::two_sided;
  const double df = static_cast<double>(x.size() - 2);
  const double rho = r.statistic;
  if (std::abs(rho) >= 1.0) {
    r.p_value = 0.0;
  } else {
    const double t = rho * std::sqrt(df / ((1.0 + rho) * (1.0 - rho)));
    boost::math::students_t_distribution<double> dist(df);
    r.p_value = clamp_p(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
  }
  return r;
}

namespace detail {

// Visits every k-subset of [0, n) as a sorted index vector.
template <typename Fn>
void for_each_combination(std::size_t n, std::size_t k, Fn&& fn) {
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  while (true) {
    fn(std::span<const std::size_t>(idx));
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

constexpr double kTieEps = 1e-9;

}  // namespace detail

inline constexpr std::size_t kMannWhitneyExactLimit = 12;

// U counts pairs with a_i > b_j plus half the ties. Exact p enumerates every
// relabeling of the pooled midranks when n + m <= 12; otherwise a normal
// approximation with tie and continuity corrections. one_sided tests a > b.
inline StatResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                                 Sidedness sidedness = Sidedness::two_sided) {
  if (a.empty() || b.empty()) throw InvalidArgument("mann_whitney_u: empty group");
  const std::size_t n = a.size(), m = b.size(), total = n + m;
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = midranks(pooled);
  double r1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) r1 += ranks[i];
  const double offset = static_cast<double>(n * (n + 1)) / 2.0;
  const double u = r1 - offset;
  const double mu = static_cast<double>(n * m) / 2.0;

  StatResult r;
  r.statistic = u;
  r.n = n;
  r.m = m;
  r.sidedness = sidedness;

  if (total <= kMannWhitneyExactLimit) {
    std::size_t hits = 0, count = 0;
    detail::for_each_combination(total, n, [&](std::span<const std::size_t> pick) {
      double s = 0.0;
      for (std::size_t i : pick) s += ranks[i];
      const double uu = s - offset;
      const bool extreme = sidedness == Sidedness::two_sided
                               ? std::abs(uu - mu) >= std::abs(u - mu) - detail::kTieEps
                               : uu >= u - detail::kTieEps;
      hits += extreme ? 1 : 0;
      ++count;
    });
    r.method = Method::exact;
    r.p_value = clamp_p(static_cast<double>(hits) / static_cast<double>(count));
    return r;
  }

  // Tie-corrected variance.
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double N = static_cast<double>(total);
  const double var = static_cast<double>(n * m) / 12.0 * ((N + 1.0) - tie_term / (N * (N - 1.0)));
  r.method = Method::normal_approx;
  if (var <= 0.0) {
    r.p_value = 1.0;
    return r;
  }
  const double sd = std::sqrt(var);
  if (sidedness == Sidedness::two_sided) {
    const double z = (std::abs(u - mu) - 0.5) / sd;
    r.p_value = clamp_p(2.0 * normal_sf(z));
  } else {
    const double z = (u - mu - 0.5) / sd;
    r.p_value = clamp_p(normal_sf(z));
  }
  return r;
}

inline constexpr std::size_t kWilcoxonExactLimit = 20;

// W is the sum of the ranks of |delta| over positive deltas. Zero deltas are
// dropped. Exact p comes from the full sign-flip distribution (counted by
// dynamic programming over doubled midranks) when at most 20 nonzero deltas
// remain. one_sided tests deltas > 0.
inline StatResult wilcoxon_signed_rank(std::span<const double> deltas,
                                       Sidedness sidedness = Sidedness::two_sided) {
  std::vector<double> nz;
  for (double d : deltas) {
    if (d != 0.0) nz.push_back(d);
  }
  if (nz.empty()) throw InvalidArgument("wilcoxon_signed_rank: all deltas are zero");
  std::vector<double> mags(nz.size());
  for (std::size_t i = 0; i < nz.size(); ++i) mags[i] = std::abs(nz[i]);
  const auto ranks = midranks(mags);
  double w = 0.0, rank_sum = 0.0, rank_sq = 0.0;
  for (std::size_t i = 0; i < nz.size(); ++i) {
    if (nz[i] > 0) w += ranks[i];
    rank_sum += ranks[i];
    rank_sq += ranks[i] * ranks[i];
  }
  const double mu = rank_sum / 2.0;

  StatResult r;
  r.statistic = w;
  r.n = nz.size();
  r.sidedness = sidedness;
  if (nz.size() != deltas.size()) {
    r.notes.push_back("dropped " + std::to_string(deltas.size() - nz.size()) + " zero deltas");
  }

  if (nz.size() <= kWilcoxonExactLimit) {
    // Doubled midranks are integers.
    std::vector<std::size_t> doubled(nz.size());
    std::size_t max_sum = 0;
    for (std::size_t i = 0; i < nz.size(); ++i) {
      doubled[i] = static_cast<std::size_t>(std::llround(ranks[i] * 2.0));
      max_sum += doubled[i];
    }
    std::vector<double> ways(max_sum + 1, 0.0);
    ways[0] = 1.0;
    std::size_t reach = 0;
    for (std::size_t d : doubled) {
      for (std::size_t s = reach + 1; s-- > 0;) {
        if (ways[s] != 0.0) ways[s + d] += ways[s];
      }
      reach += d;
    }
    const double total = std::ldexp(1.0, static_cast<int>(nz.size()));
    const double w2 = w * 2.0, mu2 = mu * 2.0;
    double hits = 0.0;
    for (std::size_t s = 0; s <= max_sum; ++s) {
      if (ways[s] == 0.0) continue;
      const double ss = static_cast<double>(s);
      const bool extreme = sidedness == Sidedness::two_sided
                               ? std::abs(ss - mu2) >= std::abs(w2 - mu2) - detail::kTieEps
                               : ss >= w2 - detail::kTieEps;
      if (extreme) hits += ways[s];
    }
    r.method = Method::exact;
    r.p_value = clamp_p(hits / total);
    return r;
  }

  const double sd = std::sqrt(rank_sq / 4.0);
  r.method = Method::normal_approx;
  if (sidedness == Sidedness::two_sided) {
    r.p_value = clamp_p(2.0 * normal_sf((std::abs(w - mu) - 0.5) / sd));
  } else {
    r.p_value = clamp_p(normal_sf((w - mu - 0.5) / sd));
  }
  return r;
}

// (mean(a) - mean(b)) / pooled SD, where the pooled variance weights each
// group's Bessel-corrected variance by its degrees of freedom.
inline double cohens_d(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw InvalidArgument("cohens_d: each group needs at least 2 values");
  const double va = sample_variance(a), vb = sample_variance(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
  if (!(pooled > 0.0)) throw InvalidArgument("cohens_d: zero pooled variance");
  return (mean(a) - mean(b)) / std::sqrt(pooled);
}

// One-sample variant used for paired deltas: mean / SD.
inline double cohens_d_one_sample(std::span<const double> deltas) {
  if (deltas.size() < 2) throw InvalidArgument("cohens_d_one_sample: need at least 2 values");
  const double sd = sample_sd(deltas);
  if (!(sd > 0.0)) throw InvalidArgument("cohens_d_one_sample: zero variance");
  return mean(deltas) / sd;
}

// ---------------------------------------------------------------------------
// Resampling

inline double add_one_p(std::size_t exceed, std::size_t n) {
  return static_cast<double>(exceed + 1) / static_cast<double>(n + 1);
}

namespace detail {

inline bool at_least(double v, double observed, Sidedness s) {
  const double a = s == Sidedness::two_sided ? std::abs(v) : v;
  const double o = s == Sidedness::two_sided ? std::abs(observed) : observed;
  return a >= o - 1e-12 * std::max(1.0, std::abs(o));
}

}  // namespace detail

// Permutation test for a vector-valued statistic: every component shares the
// same shuffles. Shuffle i draws from substream (seed, i). p uses the add-one
// estimator (1 + #{stat >= observed}) / (N + 1).
template <typename T, typename Stat>
std::vector<StatResult> permutation_p_multi(const std::vector<T>& labels, Stat&& statistic,
                                            std::size_t num_shuffles, Seed seed,
                                            Sidedness sidedness = Sidedness::one_sided,
                                            unsigned workers = 1) {
  if (num_shuffles == 0) throw InvalidArgument("permutation_p: N must be at least 1");
  const std::vector<double> observed = statistic(std::span<const T>(labels));
  std::vector<std::vector<double>> draws(num_shuffles);
  parallel_for(num_shuffles, workers, [&](std::size_t i) {
    std::vector<T> shuffled(labels);
    Stream rng(seed, i);
    rng.shuffle(shuffled);
    try {
      draws[i] = statistic(std::span<const T>(shuffled));
    } catch (const std::exception& e) {
      throw ResamplingError("statistic failed on shuffle " + std::to_string(i) + ": " + e.what());
    }
    if (draws[i].size() != observed.size()) {
      throw ResamplingError("statistic changed arity on shuffle " + std::to_string(i));
    }
  });
  std::vector<StatResult> out(observed.size());
  for (std::size_t c = 0; c < observed.size(); ++c) {
    std::size_t exceed = 0;
    for (const auto& d : draws) exceed += detail::at_least(d[c], observed[c], sidedness) ? 1 : 0;
    out[c].statistic = observed[c];
    out[c].p_value = add_one_p(exceed, num_shuffles);
    out[c].n = labels.size();
    out[c].m = num_shuffles;
    out[c].method = Method::permutation;
    out[c].sidedness = sidedness;
  }
  return out;
}

template <typename T, typename Stat>
StatResult permutation_p(const std::vector<T>& labels, Stat&& statistic, std::size_t num_shuffles,
                         Seed seed, Sidedness sidedness = Sidedness::one_sided, unsigned workers = 1) {
  auto wrapped = [&](std::span<const T> l) { return std::vector<double>{statistic(l)}; };
  return permutation_p_multi(labels, wrapped, num_shuffles, seed, sidedness, workers).front();
}

// Percentile at q in [0, 1] with linear interpolation between order statistics.
inline double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(values.size() - 1, lo + 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

struct ResampleSummary {
  double mean = 0.0;
  double sd = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::vector<double> values;
};

inline ResampleSummary summarize(std::vector<double> values) {
  ResampleSummary s;
  s.mean = mean(values);
  s.sd = sample_sd(values);
  s.ci_low = percentile(values, 0.025);
  s.ci_high = percentile(values, 0.975);
  s.values = std::move(values);
  return s;
}

// Applies fn to `iterations` subsamples of the pool drawn without replacement.
// Subsample i comes from substream (seed, i) and keeps pool order.
template <typename T, typename Fn>
auto map_subsamples(std::span<const T> pool, std::size_t subsample_size, std::size_t iterations,
                    Fn&& fn, Seed seed, unsigned workers = 1) {
  if (subsample_size > pool.size()) {
    throw InvalidArgument("subsample of " + std::to_string(subsample_size) + " exceeds pool of " +
                          std::to_string(pool.size()));
  }
  using Result = std::invoke_result_t<Fn&, std::span<const T>>;
  std::vector<Result> out(iterations);
  parallel_for(iterations, workers, [&](std::size_t i) {
    Stream rng(seed, i);
    const auto picks = rng.sample_indices(pool.size(), subsample_size);
    std::vector<T> sub;
    sub.reserve(picks.size());
    for (std::size_t p : picks) sub.push_back(pool[p]);
    try {
      out[i] = fn(std::span<const T>(sub));
    } catch (const std::exception& e) {
      throw ResamplingError("statistic failed on iteration " + std::to_string(i) + ": " + e.what());
    }
  });
  return out;
}

template <typename T, typename Stat>
ResampleSummary bootstrap(std::span<const T> pool, std::size_t subsample_size, std::size_t iterations,
                          Stat&& statistic, Seed seed, unsigned workers = 1) {
  if (iterations < 2) throw InvalidArgument("bootstrap: need at least 2 iterations");
  auto values = map_subsamples(pool, subsample_size, iterations,
                               [&](std::span<const T> s) { return static_cast<double>(statistic(s)); },
                               seed, workers);
  return summarize(std::move(values));
}

// ---------------------------------------------------------------------------
// Regression

// Least-squares residuals of target on [1, covariates...].
inline std::vector<double> residualize(std::span<const double> target,
                                       const std::vector<std::vector<double>>& covariates) {
  const std::size_t n = target.size();
  const std::size_t p = covariates.size() + 1;
  if (n <= p) {
    throw InvalidArgument("residualize: need more than " + std::to_string(p) + " rows, got " +
                          std::to_string(n));
  }
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    y(i) = target[i];
  }
  for (std::size_t c = 0; c < covariates.size(); ++c) {
    if (covariates[c].size() != n) throw InvalidArgument("residualize: covariate size mismatch");
    for (std::size_t i = 0; i < n; ++i) x(i, c + 1) = covariates[c][i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < static_cast<Eigen::Index>(p)) throw InvalidArgument("residualize: design matrix is rank deficient");
  const Eigen::VectorXd beta = qr.solve(y);
  const Eigen::VectorXd resid = y - x * beta;
  return std::vector<double>(resid.data(), resid.data() + n);
}

}  // namespace flavoraxis::stats
