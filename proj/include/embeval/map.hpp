// embeval/map.hpp

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
// Same-different mean average precision.  All unordered distinct-token pairs
// are ranked by ascending distance; a pair is positive when both tokens share
// a transcription.  AP = (1/P) sum over positive ranks r of precision@r,
// which is the exact integral of the precision-recall step curve.  Exact
// distance ties are scored with the average AP over all orderings of the tie
// group (mid-rank convention), so the result is permutation-invariant.

#ifndef EMBEVAL_MAP_HPP_
#define EMBEVAL_MAP_HPP_

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "embeval/corpus.hpp"
#include "embeval/distance.hpp"
#include "embeval/embedding.hpp"
#include "embeval/error.hpp"
#include "embeval/parallel.hpp"
#include "embeval/rng.hpp"
#include "json.hpp"

namespace embeval {

struct MapConfig {
  DistanceKind distance = DistanceKind::kCosine;
  std::optional<int64_t> max_pairs;  // subsample negatives above this total
  uint64_t seed = 0;
};

struct MapReport {
  double average_precision = 0.0;
  int64_t positive_pairs = 0;
  int64_t total_pairs = 0;  // pairs actually ranked
  bool subsampled = false;
  int64_t skipped_unlabeled = 0;
  MapConfig config;
};

namespace detail {

struct RankedPair {
  double dist;
  uint8_t positive;
};

// Expected sum of precision@rank over the positives of one tie group, averaged
// over all orderings.  g pairs in the group, p of them positive, r pairs and
// c positives strictly before the group.
inline double tie_group_ap(int64_t g, int64_t p, int64_t r, int64_t c) {
  if (p == 0) return 0.0;
  double sum = 0.0;
  const double frac = static_cast<double>(p) / static_cast<double>(g);
  const double step = g > 1 ? static_cast<double>(p - 1) / static_cast<double>(g - 1) : 0.0;
  for (int64_t t = 1; t <= g; ++t) {
    double expected_hits = static_cast<double>(c) + 1.0 + static_cast<double>(t - 1) * step;
    sum += frac * expected_hits / static_cast<double>(r + t);
  }
  return sum;
}

// AP of a ranked pair list (not yet sorted).  Sorts by distance and walks tie
// groups with the closed-form mid-rank contribution.
inline double average_precision(std::vector<RankedPair> &pairs, int64_t positives) {
  std::sort(pairs.begin(), pairs.end(),
            [](const RankedPair &a, const RankedPair &b) { return a.dist < b.dist; });
  double ap_sum = 0.0;
  int64_t seen = 0, hits = 0;
  size_t i = 0;
  while (i < pairs.size()) {
    size_t j = i;
    int64_t group_pos = 0;
    while (j < pairs.size() && pairs[j].dist == pairs[i].dist) {
      group_pos += pairs[j].positive;
      ++j;
    }
    ap_sum += tie_group_ap(static_cast<int64_t>(j - i), group_pos, seen, hits);
    seen += static_cast<int64_t>(j - i);
    hits += group_pos;
    i = j;
  }
  return ap_sum / static_cast<double>(positives);
}

}  // namespace detail

inline MapReport map_score(const EmbeddingSet &set, const MapConfig &cfg, int threads = 1) {
  MapReport report;
  report.config = cfg;

  std::vector<int32_t> rows;
  for (int64_t i = 0; i < set.count(); ++i) {
    if (set.meta(i).transcription) {
      rows.push_back(static_cast<int32_t>(i));
    } else {
      ++report.skipped_unlabeled;
    }
  }
  const int64_t n = static_cast<int64_t>(rows.size());
  if (n < 2) throw NumericError("map: task undefined, fewer than 2 labeled tokens");

  // type index per token, for O(1) positive checks
  std::map<Transcription, int32_t> type_ids;
  std::vector<int32_t> type_of(n);
  for (int64_t i = 0; i < n; ++i) {
    auto [it, _] = type_ids.emplace(*set.meta(rows[i]).transcription,
                                    static_cast<int32_t>(type_ids.size()));
    type_of[i] = it->second;
  }
  std::vector<int64_t> type_count(type_ids.size(), 0);
  for (int64_t i = 0; i < n; ++i) ++type_count[type_of[i]];
  int64_t positives = 0;
  for (int64_t c : type_count) positives += c * (c - 1) / 2;
  if (positives == 0) {
    throw NumericError("map: task undefined, no pair shares a transcription");
  }
  const int64_t all_pairs = n * (n - 1) / 2;
  if (cfg.max_pairs && *cfg.max_pairs < positives) {
    throw ConfigError("map: max_pairs " + std::to_string(*cfg.max_pairs) +
                      " is below the " + std::to_string(positives) + " positive pairs");
  }

  std::vector<double> norms(n, 0.0);
  if (cfg.distance == DistanceKind::kCosine) {
    std::vector<std::string> zero_ids;
    for (int64_t i = 0; i < n; ++i) {
      norms[i] = vector_norm(set.vec(rows[i]));
      if (norms[i] == 0.0) zero_ids.push_back(set.meta(rows[i]).id);
    }
    if (!zero_ids.empty()) {
      throw ValidationError("map: zero vectors under cosine distance: " + join(zero_ids, ' '));
    }
  }
  auto dist = [&](int64_t i, int64_t j) {
    if (cfg.distance == DistanceKind::kCosine) {
      return cosine_distance(set.vec(rows[i]), set.vec(rows[j]), norms[i], norms[j]);
    }
    return euclidean_distance(set.vec(rows[i]), set.vec(rows[j]));
  };

  std::vector<detail::RankedPair> ranked;
  if (!cfg.max_pairs || *cfg.max_pairs >= all_pairs) {
    // full enumeration, pair block per first index, parallel over rows
    std::vector<int64_t> offsets(n + 1, 0);
    for (int64_t i = 0; i < n; ++i) offsets[i + 1] = offsets[i] + (n - 1 - i);
    ranked.resize(all_pairs);
    parallel_for(static_cast<size_t>(n), threads, [&](size_t begin, size_t end) {
      for (size_t i = begin; i < end; ++i) {
        int64_t off = offsets[i];
        for (int64_t j = static_cast<int64_t>(i) + 1; j < n; ++j, ++off) {
          ranked[off].dist = dist(static_cast<int64_t>(i), j);
          ranked[off].positive = type_of[i] == type_of[j] ? 1 : 0;
        }
      }
    });
    report.total_pairs = all_pairs;
  } else {
    // all positives plus a seeded uniform sample of negatives
    report.subsampled = true;
    ranked.reserve(static_cast<size_t>(*cfg.max_pairs));
    std::vector<std::vector<int64_t>> members(type_ids.size());
    for (int64_t i = 0; i < n; ++i) members[type_of[i]].push_back(i);
    for (const auto &m : members) {
      for (size_t a = 0; a < m.size(); ++a) {
        for (size_t b = a + 1; b < m.size(); ++b) {
          ranked.push_back({dist(m[a], m[b]), 1});
        }
      }
    }
    const int64_t want_neg = *cfg.max_pairs - positives;
    // decode u in [0, all_pairs) to pair (i, j), i < j, by binary search on
    // row offsets offset(i) = i*n - i*(i+1)/2
    auto row_offset = [&](int64_t i) { return i * n - i * (i + 1) / 2; };
    Rng rng(derive_seed(cfg.seed, "map:negatives"));
    std::unordered_set<int64_t> taken;
    taken.reserve(static_cast<size_t>(want_neg) * 2);
    int64_t got = 0;
    while (got < want_neg) {
      int64_t u = static_cast<int64_t>(rng.index(static_cast<uint64_t>(all_pairs)));
      int64_t lo = 0, hi = n - 1;
      while (lo + 1 < hi) {
        int64_t mid = (lo + hi) / 2;
        if (row_offset(mid) <= u) lo = mid;
        else hi = mid;
      }
      int64_t i = row_offset(hi) <= u ? hi : lo;
      int64_t j = i + 1 + (u - row_offset(i));
      if (type_of[i] == type_of[j]) continue;
      if (!taken.insert(u).second) continue;
      ranked.push_back({dist(i, j), 0});
      ++got;
    }
    report.total_pairs = static_cast<int64_t>(ranked.size());
  }

  report.positive_pairs = positives;
  report.average_precision = detail::average_precision(ranked, positives);
  return report;
}

inline nlohmann::json to_json(const MapReport &r) {
  nlohmann::json j;
  j["average_precision"] = r.average_precision;
  j["positive_pairs"] = r.positive_pairs;
  j["total_pairs"] = r.total_pairs;
  j["subsampled"] = r.subsampled;
  j["skipped_unlabeled"] = r.skipped_unlabeled;
  nlohmann::json c;
  c["distance"] = distance_name(r.config.distance);
  if (r.config.max_pairs) c["max_pairs"] = *r.config.max_pairs;
  c["seed"] = r.config.seed;
  c["tie_policy"] = "mid_rank";
  c["pair_convention"] = "unordered_single_list";
  j["config"] = std::move(c);
  return j;
}

}  // namespace embeval

#endif  // EMBEVAL_MAP_HPP_
