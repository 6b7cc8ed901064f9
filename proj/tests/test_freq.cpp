// tests/test_freq.cpp

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

#include <catch2/catch_amalgamated.hpp>

#include <cfloat>
#include <cmath>
#include <map>
#include <vector>

#include "embeval/error.hpp"
#include "embeval/freq.hpp"
#include "embeval/knn.hpp"
#include "embeval/rng.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace embeval;

namespace {

// two tight gaussian blobs around distant centers
EmbeddingSet two_blobs(int64_t big, int64_t small, double sigma, uint64_t seed) {
  EmbeddingSet set(4, DistanceKind::kEuclidean);
  Rng rng(seed);
  std::vector<float> v(4);
  for (int64_t i = 0; i < big + small; ++i) {
    bool in_big = i < big;
    for (size_t d = 0; d < 4; ++d) {
      double center = d == 0 ? (in_big ? 0.0 : 10.0) : 0.0;
      v[d] = static_cast<float>(center + sigma * rng.gaussian());
    }
    EmbeddingMeta meta;
    meta.id = (in_big ? "a" : "b") + std::to_string(1000 + i);
    meta.speaker = "spk";
    meta.transcription = testing::trans(in_big ? "big" : "small");
    set.add(std::move(meta), v);
  }
  return set;
}

// graph with hand-picked neighbor distance lists, one row per query
KnnGraph hand_graph(std::vector<std::vector<float>> lists, int64_t k) {
  KnnGraph g;
  g.k = k;
  g.index_size = 1;
  g.index_ids = {"x"};
  g.offsets.push_back(0);
  for (size_t q = 0; q < lists.size(); ++q) {
    g.query_ids.push_back("q" + std::to_string(q));
    for (float d : lists[q]) {
      g.neighbors.push_back(0);
      g.distances.push_back(d);
    }
    g.offsets.push_back(static_cast<int64_t>(g.neighbors.size()));
  }
  return g;
}

}  // namespace

TEST_CASE("density estimate matches the scalar kernel sum", "[freq]") {
  std::vector<float> zeros = {0.0f, 0.0f, 0.0f, 0.0f, 0.0f};
  REQUIRE(density_estimate(zeros, 3.7) == 5.0);

  std::vector<float> dists = {0.0f, 1.0f, 2.0f};
  double want = 1.0 + std::exp(-1.0) + std::exp(-4.0);
  REQUIRE(density_estimate(dists, 1.0) == Catch::Approx(want).margin(1e-12));

  // beta -> 0+ recovers k
  REQUIRE(density_estimate(dists, 1e-300) == Catch::Approx(3.0).margin(1e-9));

  Rng rng(41);
  std::vector<double> d(10);
  std::vector<float> df(10);
  for (size_t i = 0; i < d.size(); ++i) d[i] = 2.0 * rng.real();
  std::sort(d.begin(), d.end());
  for (size_t i = 0; i < d.size(); ++i) df[i] = static_cast<float>(d[i]);
  std::vector<double> dd(df.begin(), df.end());
  for (double beta : {0.01, 0.5, 3.0, 100.0}) {
    REQUIRE(density_estimate(df, beta) ==
            Catch::Approx(oracle::kappa_scalar(dd, beta)).margin(1e-12));
  }
}

TEST_CASE("density estimate rejects bad input and never returns zero", "[freq]") {
  std::vector<float> neg = {-0.5f};
  REQUIRE_THROWS_AS(density_estimate(neg, 1.0), ValidationError);
  std::vector<float> unsorted = {1.0f, 0.5f};
  REQUIRE_THROWS_AS(density_estimate(unsorted, 1.0), ValidationError);
  std::vector<float> ok = {1.0f};
  REQUIRE_THROWS_AS(density_estimate(ok, 0.0), ConfigError);
  REQUIRE_THROWS_AS(density_estimate(ok, -1.0), ConfigError);

  // far past the exp underflow cutoff: clamped to the smallest positive double
  std::vector<float> huge = {1000.0f};
  double kappa = density_estimate(huge, 1.0);
  REQUIRE(kappa == DBL_MIN);
  REQUIRE(kappa > 0.0);

  // cutoff only skips the tail, never the head
  std::vector<float> mixed = {0.0f, 1000.0f};
  REQUIRE(density_estimate(mixed, 1.0) == 1.0);
}

TEST_CASE("kappa is monotone in beta and in any single distance", "[freq]") {
  Rng rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<float> d(8);
    for (auto &x : d) x = static_cast<float>(3.0 * rng.real());
    std::sort(d.begin(), d.end());
    double prev = density_estimate(d, 1e-4);
    REQUIRE(prev > 0.0);
    REQUIRE(prev <= 8.0);
    for (double beta : {0.01, 0.1, 1.0, 10.0, 100.0}) {
      double cur = density_estimate(d, beta);
      REQUIRE(cur > 0.0);
      REQUIRE(cur <= 8.0);
      REQUIRE(cur <= prev);
      prev = cur;
    }
    // bump the largest distance
    std::vector<float> bumped(d);
    bumped.back() += 0.5f;
    REQUIRE(density_estimate(bumped, 1.0) <= density_estimate(d, 1.0));
  }
}

TEST_CASE("estimate_all equals independent density estimates", "[freq]") {
  auto set = testing::random_set(40, 5, 0, 43);
  Index idx(set, DistanceKind::kCosine);
  KnnGraph g = build_graph(idx, set, 7, /*self_exclude=*/false);
  std::vector<double> all = estimate_all(g, 0.8, 3);
  REQUIRE(all.size() == 40);
  for (int64_t q = 0; q < 40; ++q) {
    REQUIRE(all[q] == density_estimate(g.neighbor_distances(q), 0.8));
    REQUIRE(all[q] >= 1.0);  // self term contributes exp(0)
  }
}

TEST_CASE("identical vectors saturate kappa at k", "[freq]") {
  EmbeddingSet set(3, DistanceKind::kEuclidean);
  for (int i = 0; i < 12; ++i) {
    EmbeddingMeta meta;
    meta.id = "v" + std::to_string(i);
    set.add(std::move(meta), std::vector<float>{1.0f, 2.0f, 3.0f});
  }
  Index idx(set, DistanceKind::kEuclidean);
  KnnGraph g = build_graph(idx, set, 5, false);
  for (double kappa : estimate_all(g, 2.5)) REQUIRE(kappa == 5.0);
}

TEST_CASE("beta tuning maximizes log variance over a sorted grid", "[freq]") {
  // q0 sits in a dense spot, q1 in a sparse one; kappa_1 = 1 + 2 exp(-beta)
  // decays toward 1 while kappa_0 stays at 3, so the log spread grows with beta
  KnnGraph g = hand_graph({{0.0f, 0.0f, 0.0f}, {0.0f, 1.0f, 1.0f}}, 3);
  DensityConfig cfg;
  cfg.k = 3;
  cfg.beta_grid = {5.0, 0.5, 0.05};  // deliberately unsorted
  TuneResult res = tune_beta(g, cfg);
  REQUIRE(res.grid == std::vector<double>{0.05, 0.5, 5.0});
  REQUIRE(res.beta == 5.0);
  REQUIRE(!res.degenerate);
  REQUIRE(res.grid_variance.size() == 3);
  REQUIRE(res.grid_variance[0] < res.grid_variance[1]);
  REQUIRE(res.grid_variance[1] < res.grid_variance[2]);

  // population variance of the two log estimates at each grid point, by hand
  for (size_t i = 0; i < res.grid.size(); ++i) {
    double lk0 = std::log(3.0);
    double lk1 = std::log(1.0 + 2.0 * std::exp(-res.grid[i]));
    double mean = 0.5 * (lk0 + lk1);
    double want = 0.5 * ((lk0 - mean) * (lk0 - mean) + (lk1 - mean) * (lk1 - mean));
    REQUIRE(res.grid_variance[i] == Catch::Approx(want).margin(1e-12));
  }
  REQUIRE(res.log_variance == res.grid_variance[2]);
}

TEST_CASE("tied variances resolve to the smaller beta", "[freq]") {
  // kappa_1 = 3 exp(-beta) drops below 1 past beta = ln 3, where the log
  // clamp freezes the spread: every beta beyond that point ties exactly
  KnnGraph g = hand_graph({{0.0f, 0.0f, 0.0f}, {1.0f, 1.0f, 1.0f}}, 3);
  DensityConfig cfg;
  cfg.k = 3;
  cfg.beta_grid = {8.0, 2.0, 0.5};
  TuneResult res = tune_beta(g, cfg);
  REQUIRE(res.beta == 2.0);
  REQUIRE(!res.degenerate);
  double half = 0.5 * std::log(3.0);
  REQUIRE(res.log_variance == Catch::Approx(half * half).margin(1e-12));
  REQUIRE(res.grid_variance[1] == res.grid_variance[2]);
}

TEST_CASE("degenerate graphs fall back to the grid minimum with a warning", "[freq]") {
  KnnGraph g = hand_graph({{0.0f}}, 1);
  DensityConfig cfg;
  cfg.k = 1;
  TuneResult res = tune_beta(g, cfg);
  REQUIRE(res.degenerate);
  REQUIRE(res.grid.size() == 49);
  REQUIRE(res.beta == res.grid.front());
  // no positive distance: the grid is the bare multiplier ladder
  REQUIRE(res.beta == Catch::Approx(1e-3).epsilon(1e-12));
  REQUIRE(res.log_variance == 0.0);

  KnnGraph empty;
  REQUIRE_THROWS_AS(tune_beta(empty, cfg), ValidationError);

  DensityConfig bad;
  bad.k = 0;
  REQUIRE_THROWS_AS(tune_beta(g, bad), ConfigError);
  bad.k = 1;
  bad.beta_grid = {1.0, 0.0};
  REQUIRE_THROWS_AS(tune_beta(g, bad), ConfigError);
}

TEST_CASE("tuning is deterministic and interior on clustered data", "[freq]") {
  auto set = two_blobs(40, 8, 0.3, 44);
  Index idx(set, DistanceKind::kEuclidean);
  KnnGraph g = build_graph(idx, set, 48, false);
  DensityConfig cfg;
  cfg.k = 48;
  cfg.distance = DistanceKind::kEuclidean;
  TuneResult a = tune_beta(g, cfg, 1);
  TuneResult b = tune_beta(g, cfg, 3);
  REQUIRE(a.beta == b.beta);
  REQUIRE(a.log_variance == b.log_variance);
  REQUIRE(!a.degenerate);
  REQUIRE(a.grid_variance.front() < a.log_variance);
  REQUIRE(a.grid_variance.back() < a.log_variance);
}

TEST_CASE("log-space r-squared matches the scalar Pearson oracle", "[freq]") {
  std::map<std::string, double> est = {{"a", 1.0}, {"b", 3.0}, {"c", 3.0}, {"d", 9.0}};
  std::map<std::string, int64_t> truth = {{"a", 1}, {"b", 2}, {"c", 4}, {"d", 8}};
  std::vector<double> x = {std::log(1.0), std::log(3.0), std::log(3.0), std::log(9.0)};
  std::vector<double> y = {std::log(1.0), std::log(2.0), std::log(4.0), std::log(8.0)};
  double r = oracle::pearson(x, y);
  REQUIRE(r_squared_log(est, truth) == Catch::Approx(r * r).margin(1e-12));

  // exact and proportional estimates are perfect in log space
  std::map<std::string, double> exact, prop, powed;
  for (const auto &[id, c] : truth) {
    exact[id] = static_cast<double>(c);
    prop[id] = 7.5 * static_cast<double>(c);
    powed[id] = std::pow(static_cast<double>(c), 2.5);
  }
  REQUIRE(r_squared_log(exact, truth) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(r_squared_log(prop, truth) == Catch::Approx(1.0).margin(1e-12));
  // exponent scaling is affine in log space too
  REQUIRE(r_squared_log(powed, truth) ==
          Catch::Approx(r_squared_log(exact, truth)).margin(1e-12));
}

TEST_CASE("r-squared validates its inputs", "[freq]") {
  std::map<std::string, double> est = {{"a", 2.0}, {"b", 4.0}};
  std::map<std::string, int64_t> truth = {{"a", 1}, {"b", 2}};
  std::map<std::string, int64_t> short_truth = {{"a", 1}};
  REQUIRE_THROWS_AS(r_squared_log(est, short_truth), ValidationError);
  std::map<std::string, int64_t> renamed = {{"a", 1}, {"z", 2}};
  REQUIRE_THROWS_AS(r_squared_log(est, renamed), LookupError);
  std::map<std::string, int64_t> zero_count = {{"a", 0}, {"b", 2}};
  REQUIRE_THROWS_AS(r_squared_log(est, zero_count), ValidationError);

  std::map<std::string, double> constant = {{"a", 2.0}, {"b", 2.0}};
  REQUIRE_THROWS_AS(r_squared_log(constant, truth), NumericError);
  REQUIRE_THROWS_WITH(r_squared_log(constant, truth),
                      Catch::Matchers::ContainsSubstring("log_estimates"));
}

TEST_CASE("cluster masses are recovered end to end", "[freq]") {
  // the tight-cluster limit: every within-cluster distance is 0 and every
  // cross-cluster distance is 10, so for any beta past the saturation point
  // kappa is exactly the cluster size and the variance ties resolve there
  auto set = two_blobs(100, 10, 0.0, 45);
  Index idx(set, DistanceKind::kEuclidean);
  KnnGraph g = build_graph(idx, set, 110, false, 2);
  DensityConfig cfg;
  cfg.k = 110;
  cfg.distance = DistanceKind::kEuclidean;
  std::map<std::string, int64_t> truth;
  for (int64_t i = 0; i < set.count(); ++i) {
    truth[set.meta(i).id] = set.meta(i).transcription->joined() == "big" ? 100 : 10;
  }
  FreqReport r = freq_evaluate(g, cfg, &truth, 2);
  REQUIRE(r.k == 110);
  REQUIRE(!r.degenerate);
  REQUIRE(r.r_squared);
  REQUIRE(*r.r_squared > 0.999);
  for (const auto &[id, kappa] : r.estimates) {
    double want = id[0] == 'a' ? 100.0 : 10.0;
    REQUIRE(kappa == Catch::Approx(want).margin(1e-6));
  }

  FreqReport again = freq_evaluate(g, cfg, &truth, 1);
  REQUIRE(again.estimates == r.estimates);
  REQUIRE(again.chosen_beta == r.chosen_beta);

  DensityConfig wrong;
  wrong.k = 16;
  REQUIRE_THROWS_AS(freq_evaluate(g, wrong), ValidationError);
  REQUIRE_THROWS_WITH(freq_evaluate(g, wrong),
                      Catch::Matchers::ContainsSubstring("graph built with k=110"));
}

TEST_CASE("freq report files carry estimates and truth", "[freq]") {
  testing::TempDir tmp("freq");
  auto set = two_blobs(12, 4, 0.05, 46);
  Index idx(set, DistanceKind::kEuclidean);
  KnnGraph g = build_graph(idx, set, 15, false);
  DensityConfig cfg;
  cfg.k = 15;
  cfg.distance = DistanceKind::kEuclidean;
  std::map<std::string, int64_t> truth;
  for (int64_t i = 0; i < set.count(); ++i) {
    truth[set.meta(i).id] = set.meta(i).transcription->joined() == "big" ? 12 : 4;
  }
  FreqReport r = freq_evaluate(g, cfg, &truth);
  write_freq_tsv(tmp / "freq.tsv", r, &truth);
  auto lines = read_lines(tmp / "freq.tsv");
  REQUIRE(lines[0] == "id\tkappa\tlog_kappa\ttrue_count");
  REQUIRE(lines.size() == 1 + r.estimates.size());
  auto cols = split(lines[1], '\t');
  REQUIRE(cols.size() == 4);
  REQUIRE(cols[0] == r.estimates.begin()->first);
  REQUIRE(parse_double(cols[1], "kappa") ==
          Catch::Approx(r.estimates.begin()->second).epsilon(1e-8));

  write_freq_tsv(tmp / "bare.tsv", r);
  REQUIRE(read_lines(tmp / "bare.tsv")[0] == "id\tkappa\tlog_kappa");

  nlohmann::json j = to_json(r);
  REQUIRE(j["k"] == 15);
  REQUIRE(j["r_squared"].get<double>() == *r.r_squared);
  REQUIRE(j["config"]["beta_grid_size"] == 49);
}

TEST_CASE("kmeans baseline sizes singleton and separable clusters", "[freq]") {
  auto singles = testing::random_set(12, 4, 0, 47, DistanceKind::kEuclidean);
  auto est = kmeans_frequency_baseline(singles, 12, 1);
  REQUIRE(est.size() == 12);
  for (const auto &[id, e] : est) REQUIRE(e == 1.0);

  auto blobs = two_blobs(30, 10, 0.05, 48);
  auto sizes = kmeans_frequency_baseline(blobs, 2, 2, 2);
  for (const auto &[id, e] : sizes) {
    REQUIRE(e == (id[0] == 'a' ? 30.0 : 10.0));
  }

  auto rerun = kmeans_frequency_baseline(blobs, 2, 2, 1);
  REQUIRE(rerun == sizes);

  REQUIRE_THROWS_AS(kmeans_frequency_baseline(blobs, 0, 1), ConfigError);
  REQUIRE_THROWS_AS(kmeans_frequency_baseline(blobs, 41, 1), ConfigError);
}
