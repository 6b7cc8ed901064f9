// embeval/freq.hpp

// Copyright 2026  The embeval authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.
//
// Unsupervised frequency estimation over a k-NN graph:
//   kappa(e, beta, k) = sum_{i=1..k} exp(-beta * d_i^2)
// beta is chosen from a grid to maximize the population variance of
// ln(max(kappa, 1)), and quality is scored as the squared Pearson correlation
// against true counts in log space.  A K-means cluster-size baseline is
// provided for comparison.

#ifndef EMBEVAL_FREQ_HPP_
#define EMBEVAL_FREQ_HPP_

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "embeval/distance.hpp"
#include "embeval/embedding.hpp"
#include "embeval/error.hpp"
#include "embeval/knn.hpp"
#include "embeval/parallel.hpp"
#include "embeval/rng.hpp"
#include "embeval/stats.hpp"
#include "json.hpp"

namespace embeval {

struct DensityConfig {
  int64_t k = 2000;
  std::vector<double> beta_grid;  // empty: 49 log-spaced multipliers of 1/median(d^2)
  DistanceKind distance = DistanceKind::kCosine;
};

inline void validate(const DensityConfig &cfg) {
  if (cfg.k < 1) throw ConfigError("freq: k must be >= 1");
  for (double b : cfg.beta_grid) {
    if (!(b > 0.0)) throw ConfigError("freq: beta grid entries must be positive");
  }
}

namespace detail {
// exp(-t) underflows to 0 past this; distances are ascending so the tail can
// be skipped.
constexpr double kExpCut = 745.0;
}  // namespace detail

inline double density_estimate(std::span<const float> dists, double beta) {
  if (!(beta > 0.0)) throw ConfigError("density_estimate: beta must be positive");
  double kappa = 0.0;
  double prev = 0.0;
  for (float df : dists) {
    double d = static_cast<double>(df);
    if (d < 0.0) throw ValidationError("density_estimate: negative distance");
    if (d < prev) throw ValidationError("density_estimate: distances not ascending");
    prev = d;
    double t = beta * d * d;
    if (t > detail::kExpCut) break;
    kappa += std::exp(-t);
  }
  return std::max(kappa, DBL_MIN);
}

// One kappa per graph query, in query order.
inline std::vector<double> estimate_all(const KnnGraph &graph, double beta,
                                        int threads = 1) {
  std::vector<double> out(graph.num_queries());
  parallel_for(static_cast<size_t>(graph.num_queries()), threads,
               [&](size_t begin, size_t end) {
                 for (size_t q = begin; q < end; ++q) {
                   out[q] = density_estimate(graph.neighbor_distances(q), beta);
                 }
               });
  return out;
}

inline double log_estimate(double kappa) { return std::log(std::max(kappa, 1.0)); }

struct TuneResult {
  double beta = 0.0;
  double log_variance = 0.0;
  bool degenerate = false;
  std::vector<double> grid;
  std::vector<double> grid_variance;
};

// Default grid: 49 log-spaced multipliers 1e-3..1e3 of 1/median(positive d^2).
// No positive distance at all means every grid point is equivalent; the grid
// falls back to multipliers of 1 and tuning reports degeneracy.
inline std::vector<double> default_beta_grid(const KnnGraph &graph) {
  std::vector<float> sq;
  sq.reserve(graph.distances.size());
  for (float d : graph.distances) {
    if (d > 0.0f) sq.push_back(d * d);
  }
  double scale = 1.0;
  if (!sq.empty()) {
    size_t mid = sq.size() / 2;
    std::nth_element(sq.begin(), sq.begin() + mid, sq.end());
    scale = 1.0 / static_cast<double>(sq[mid]);
  }
  std::vector<double> grid;
  grid.reserve(49);
  for (int i = 0; i < 49; ++i) {
    double expo = -3.0 + 6.0 * static_cast<double>(i) / 48.0;
    grid.push_back(scale * std::pow(10.0, expo));
  }
  return grid;
}

inline TuneResult tune_beta(const KnnGraph &graph, const DensityConfig &cfg,
                            int threads = 1) {
  validate(cfg);
  if (graph.num_queries() == 0) throw ValidationError("tune_beta: empty graph");
  TuneResult res;
  res.grid = cfg.beta_grid.empty() ? default_beta_grid(graph) : cfg.beta_grid;
  std::sort(res.grid.begin(), res.grid.end());  // tie rule: smaller beta wins
  res.grid_variance.assign(res.grid.size(), 0.0);

  parallel_for(res.grid.size(), threads, [&](size_t begin, size_t end) {
    for (size_t g = begin; g < end; ++g) {
      const double beta = res.grid[g];
      double sum = 0.0, sumsq = 0.0;
      for (int64_t q = 0; q < graph.num_queries(); ++q) {
        double lk = log_estimate(density_estimate(graph.neighbor_distances(q), beta));
        sum += lk;
        sumsq += lk * lk;
      }
      const double n = static_cast<double>(graph.num_queries());
      double mean = sum / n;
      res.grid_variance[g] = std::max(0.0, sumsq / n - mean * mean);
    }
  });

  size_t best = 0;
  for (size_t g = 1; g < res.grid.size(); ++g) {
    if (res.grid_variance[g] > res.grid_variance[best]) best = g;
  }
  res.beta = res.grid[best];
  res.log_variance = res.grid_variance[best];
  if (res.log_variance == 0.0) {
    res.degenerate = true;
    res.beta = res.grid[0];
    res.log_variance = res.grid_variance[0];
  }
  return res;
}

inline double r_squared_log(const std::map<std::string, double> &estimates,
                            const std::map<std::string, int64_t> &truth) {
  if (estimates.size() != truth.size()) {
    throw ValidationError("r_squared_log: " + std::to_string(estimates.size()) +
                          " estimates vs " + std::to_string(truth.size()) + " truth ids");
  }
  std::vector<double> x, y;
  x.reserve(estimates.size());
  y.reserve(estimates.size());
  auto it = truth.begin();
  for (const auto &[id, kappa] : estimates) {
    if (it->first != id) {
      throw LookupError("r_squared_log: id mismatch, estimate '" + id + "' vs truth '" +
                        it->first + "'");
    }
    if (it->second < 1) {
      throw ValidationError("r_squared_log: truth count for '" + id + "' must be >= 1");
    }
    x.push_back(log_estimate(kappa));
    y.push_back(std::log(static_cast<double>(it->second)));
    ++it;
  }
  return r_squared(x, y, "log_estimates", "log_truth");
}

// ---------------------------------------------------------------------------
// K-means cluster-size baseline

namespace detail {

// Squared euclidean via norms and a dot product.
inline double center_sqdist(std::span<const float> x, double x_sq,
                            std::span<const float> c, double c_sq) {
  double d2 = x_sq + c_sq - 2.0 * static_cast<double>(dot_f32(x.data(), c.data(), x.size()));
  return std::max(d2, 0.0);
}

}  // namespace detail

inline std::map<std::string, double> kmeans_frequency_baseline(const EmbeddingSet &set,
                                                               int64_t K, uint64_t seed,
                                                               int threads = 1) {
  const int64_t n = set.count();
  const int64_t dim = set.dim();
  if (K < 1) throw ConfigError("kmeans: K must be >= 1");
  if (K > n) throw ConfigError("kmeans: K " + std::to_string(K) + " exceeds " +
                               std::to_string(n) + " points");

  std::vector<double> point_sq(n);
  for (int64_t i = 0; i < n; ++i) {
    std::span<const float> v = set.vec(i);
    point_sq[i] = static_cast<double>(dot_f32(v.data(), v.data(), v.size()));
  }

  // k-means++ seeding
  Rng rng(derive_seed(seed, "kmeans++"));
  std::vector<float> centers(static_cast<size_t>(K) * dim);
  std::vector<double> center_sq(K, 0.0);
  auto set_center = [&](int64_t c, std::span<const float> v, double v_sq) {
    std::copy(v.begin(), v.end(), centers.begin() + c * dim);
    center_sq[c] = v_sq;
  };
  auto center_span = [&](int64_t c) {
    return std::span<const float>(centers.data() + c * dim, static_cast<size_t>(dim));
  };
  {
    int64_t first = static_cast<int64_t>(rng.index(static_cast<uint64_t>(n)));
    set_center(0, set.vec(first), point_sq[first]);
    std::vector<double> d2(n);
    for (int64_t i = 0; i < n; ++i) {
      d2[i] = detail::center_sqdist(set.vec(i), point_sq[i], center_span(0), center_sq[0]);
    }
    for (int64_t c = 1; c < K; ++c) {
      double total = 0.0;
      for (int64_t i = 0; i < n; ++i) total += d2[i];
      int64_t pick;
      if (total > 0.0) {
        double r = rng.real() * total;
        double acc = 0.0;
        pick = n - 1;
        for (int64_t i = 0; i < n; ++i) {
          acc += d2[i];
          if (r < acc) {
            pick = i;
            break;
          }
        }
      } else {
        pick = static_cast<int64_t>(rng.index(static_cast<uint64_t>(n)));
      }
      set_center(c, set.vec(pick), point_sq[pick]);
      for (int64_t i = 0; i < n; ++i) {
        double nd = detail::center_sqdist(set.vec(i), point_sq[i], center_span(c),
                                          center_sq[c]);
        if (nd < d2[i]) d2[i] = nd;
      }
    }
  }

  // Lloyd iterations
  std::vector<int32_t> assign(n, 0);
  std::vector<double> assign_d2(n, 0.0);
  double prev_inertia = -1.0;
  for (int iter = 0; iter < 100; ++iter) {
    parallel_for(static_cast<size_t>(n), threads, [&](size_t begin, size_t end) {
      for (size_t i = begin; i < end; ++i) {
        double best_d2 = detail::center_sqdist(set.vec(i), point_sq[i], center_span(0),
                                               center_sq[0]);
        int32_t best_c = 0;
        for (int64_t c = 1; c < K; ++c) {
          double d2 = detail::center_sqdist(set.vec(i), point_sq[i], center_span(c),
                                            center_sq[c]);
          if (d2 < best_d2) {
            best_d2 = d2;
            best_c = static_cast<int32_t>(c);
          }
        }
        assign[i] = best_c;
        assign_d2[i] = best_d2;
      }
    });
    double inertia = 0.0;
    for (int64_t i = 0; i < n; ++i) inertia += assign_d2[i];

    // means in fixed point order
    std::vector<double> mean(static_cast<size_t>(K) * dim, 0.0);
    std::vector<int64_t> size(K, 0);
    for (int64_t i = 0; i < n; ++i) {
      double *m = mean.data() + static_cast<int64_t>(assign[i]) * dim;
      const float *v = set.vec(i).data();
      for (int64_t d = 0; d < dim; ++d) m[d] += static_cast<double>(v[d]);
      ++size[assign[i]];
    }
    for (int64_t c = 0; c < K; ++c) {
      if (size[c] == 0) continue;
      float *cc = centers.data() + c * dim;
      const double *m = mean.data() + c * dim;
      double sq = 0.0;
      for (int64_t d = 0; d < dim; ++d) {
        double v = m[d] / static_cast<double>(size[c]);
        cc[d] = static_cast<float>(v);
        sq += static_cast<double>(cc[d]) * static_cast<double>(cc[d]);
      }
      center_sq[c] = sq;
    }
    // empty clusters re-seed from the farthest point; marking its distance 0
    // keeps later empty clusters from picking the same point
    for (int64_t c = 0; c < K; ++c) {
      if (size[c] != 0) continue;
      int64_t far = 0;
      for (int64_t i = 1; i < n; ++i) {
        if (assign_d2[i] > assign_d2[far]) far = i;
      }
      set_center(c, set.vec(far), point_sq[far]);
      assign_d2[far] = 0.0;
    }

    if (prev_inertia >= 0.0) {
      double denom = prev_inertia > 0.0 ? prev_inertia : 1.0;
      if (std::abs(prev_inertia - inertia) < 1e-4 * denom) break;
    }
    prev_inertia = inertia;
  }

  // final assignment and cluster sizes
  parallel_for(static_cast<size_t>(n), threads, [&](size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) {
      double best_d2 = detail::center_sqdist(set.vec(i), point_sq[i], center_span(0),
                                             center_sq[0]);
      int32_t best_c = 0;
      for (int64_t c = 1; c < K; ++c) {
        double d2 = detail::center_sqdist(set.vec(i), point_sq[i], center_span(c),
                                          center_sq[c]);
        if (d2 < best_d2) {
          best_d2 = d2;
          best_c = static_cast<int32_t>(c);
        }
      }
      assign[i] = best_c;
    }
  });
  std::vector<int64_t> size(K, 0);
  for (int64_t i = 0; i < n; ++i) ++size[assign[i]];
  std::map<std::string, double> out;
  for (int64_t i = 0; i < n; ++i) {
    out[set.meta(i).id] = static_cast<double>(size[assign[i]]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report

struct FreqReport {
  std::map<std::string, double> estimates;  // id -> kappa
  double chosen_beta = 0.0;
  double log_variance = 0.0;
  std::optional<double> r_squared;
  bool degenerate = false;
  bool clamped = false;  // k was clamped to the index size
  int64_t k = 0;         // k actually used
  int64_t beta_grid_size = 0;
  DensityConfig config;
};

// Runs tuning and estimation over a prebuilt graph.  cfg.k must match the
// graph; clamping to the index size happens where the graph is built.
inline FreqReport freq_evaluate(const KnnGraph &graph, const DensityConfig &cfg,
                                const std::map<std::string, int64_t> *truth = nullptr,
                                int threads = 1) {
  validate(cfg);
  if (graph.k != cfg.k) {
    throw ValidationError("freq: graph built with k=" + std::to_string(graph.k) +
                          ", config k=" + std::to_string(cfg.k));
  }
  FreqReport report;
  report.config = cfg;
  report.k = cfg.k;
  TuneResult tuned = tune_beta(graph, cfg, threads);
  report.chosen_beta = tuned.beta;
  report.log_variance = tuned.log_variance;
  report.degenerate = tuned.degenerate;
  report.beta_grid_size = static_cast<int64_t>(tuned.grid.size());
  std::vector<double> kappa = estimate_all(graph, tuned.beta, threads);
  for (int64_t q = 0; q < graph.num_queries(); ++q) {
    if (!report.estimates.emplace(graph.query_ids[q], kappa[q]).second) {
      throw ValidationError("freq: duplicate query id '" + graph.query_ids[q] + "'");
    }
  }
  if (truth) report.r_squared = r_squared_log(report.estimates, *truth);
  return report;
}

inline nlohmann::json to_json(const FreqReport &r) {
  nlohmann::json j;
  j["chosen_beta"] = r.chosen_beta;
  j["log_variance"] = r.log_variance;
  if (r.r_squared) j["r_squared"] = *r.r_squared;
  j["k"] = r.k;
  j["clamped"] = r.clamped;
  j["degeneracy_warning"] = r.degenerate;
  j["config"] = {{"k", r.config.k},
                 {"distance", distance_name(r.config.distance)},
                 {"beta_grid_size", r.beta_grid_size}};
  return j;
}

inline void write_freq_tsv(const std::filesystem::path &path, const FreqReport &r,
                           const std::map<std::string, int64_t> *truth = nullptr) {
  std::string body = truth ? "id\tkappa\tlog_kappa\ttrue_count\n" : "id\tkappa\tlog_kappa\n";
  for (const auto &[id, kappa] : r.estimates) {
    body += id;
    body += '\t';
    body += fmt_g(kappa);
    body += '\t';
    body += fmt_g(log_estimate(kappa));
    if (truth) {
      auto it = truth->find(id);
      if (it == truth->end()) throw LookupError("freq tsv: no truth count for '" + id + "'");
      body += '\t';
      body += std::to_string(it->second);
    }
    body += '\n';
  }
  write_file(path, body);
}

}  // namespace embeval

#endif  // EMBEVAL_FREQ_HPP_
