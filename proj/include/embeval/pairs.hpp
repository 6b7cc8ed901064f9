// embeval/pairs.hpp

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
// Pair mining and pair objectives.  Candidate positive pairs are mined from a
// cosine k-NN graph above a similarity threshold; gold pairs are sampled from
// transcriptions.  The siamese objective
//   L_s(e, e', y) = y cos(e, e') - (1 - y) max(0, cos(e, e') - gamma)
// is evaluated exactly as printed, with its analytic gradient.
//
// Pair file: TSV id_a<TAB>id_b<TAB>similarity<TAB>y, sorted descending by
// similarity; similarity or y may be empty.

#ifndef EMBEVAL_PAIRS_HPP_
#define EMBEVAL_PAIRS_HPP_

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "embeval/corpus.hpp"
#include "embeval/distance.hpp"
#include "embeval/embedding.hpp"
#include "embeval/error.hpp"
#include "embeval/features.hpp"
#include "embeval/knn.hpp"
#include "embeval/rng.hpp"
#include "embeval/util.hpp"

namespace embeval {

struct Pair {
  std::string id_a;  // canonical: id_a < id_b
  std::string id_b;
  std::optional<double> similarity;
  std::optional<int> y;  // 1 positive, 0 negative
};

struct SiameseConfig {
  double gamma = 0.5;
};

inline void validate(const SiameseConfig &cfg) {
  if (!(cfg.gamma >= -1.0 && cfg.gamma < 1.0)) {
    throw ConfigError("siamese: gamma must lie in [-1, 1)");
  }
}

// Canonical order for pair files: similarity descending, then ids; pairs
// without similarity follow, ordered by ids.
inline void sort_pairs(std::vector<Pair> &pairs) {
  std::sort(pairs.begin(), pairs.end(), [](const Pair &a, const Pair &b) {
    if (a.similarity.has_value() != b.similarity.has_value()) {
      return a.similarity.has_value();
    }
    if (a.similarity && *a.similarity != *b.similarity) {
      return *a.similarity > *b.similarity;
    }
    if (a.id_a != b.id_a) return a.id_a < b.id_a;
    return a.id_b < b.id_b;
  });
}

// ---------------------------------------------------------------------------
// Mining

struct MineConfig {
  double threshold = 0.85;
  int64_t k = 50;
};

inline void validate(const MineConfig &cfg) {
  if (cfg.k < 1) throw ConfigError("mine_pairs: k must be >= 1");
  if (!(cfg.threshold >= -1.0 && cfg.threshold <= 1.0)) {
    throw ConfigError("mine_pairs: threshold must lie in [-1, 1]");
  }
}

// Mines pairs with cosine similarity above the threshold from each token's k
// nearest neighbors.  Pairs whose segments overlap in time within one file
// are dropped.  Output is deduplicated and sorted descending by similarity.
inline std::vector<Pair> mine_pairs(const Index &index, const EmbeddingSet &set,
                                    const MineConfig &cfg,
                                    std::span<const Segment> segments,
                                    int threads = 1) {
  validate(cfg);
  if (index.kind() != DistanceKind::kCosine) {
    throw ConfigError("mine_pairs: index must use cosine distance");
  }
  std::unordered_map<std::string, const Segment *> seg_by_id;
  for (const Segment &s : segments) seg_by_id.emplace(s.id, &s);

  KnnGraph graph = build_graph(index, set, cfg.k, /*self_exclude=*/true, threads);

  auto overlap = [&](const std::string &a, const std::string &b) {
    auto ia = seg_by_id.find(a);
    auto ib = seg_by_id.find(b);
    if (ia == seg_by_id.end()) throw LookupError("mine_pairs: no segment metadata for '" + a + "'");
    if (ib == seg_by_id.end()) throw LookupError("mine_pairs: no segment metadata for '" + b + "'");
    const Segment &sa = *ia->second;
    const Segment &sb = *ib->second;
    return sa.file_id == sb.file_id && sa.onset < sb.offset && sb.onset < sa.offset;
  };

  std::map<std::pair<std::string, std::string>, double> kept;
  for (int64_t q = 0; q < graph.num_queries(); ++q) {
    const std::string &qid = graph.query_ids[q];
    auto rows = graph.neighbor_rows(q);
    auto dists = graph.neighbor_distances(q);
    for (size_t r = 0; r < rows.size(); ++r) {
      double sim = 1.0 - static_cast<double>(dists[r]);
      if (!(sim > cfg.threshold)) break;  // distances ascending
      const std::string &nid = graph.index_ids[rows[r]];
      if (nid == qid) continue;
      std::pair<std::string, std::string> key =
          qid < nid ? std::make_pair(qid, nid) : std::make_pair(nid, qid);
      if (kept.count(key)) continue;
      if (overlap(key.first, key.second)) continue;
      kept.emplace(std::move(key), sim);
    }
  }

  std::vector<Pair> out;
  out.reserve(kept.size());
  for (const auto &[key, sim] : kept) {
    out.push_back({key.first, key.second, sim, std::nullopt});
  }
  sort_pairs(out);
  return out;
}

// ---------------------------------------------------------------------------
// Gold pairs

struct GoldPairsResult {
  std::vector<Pair> pairs;
  int64_t positives = 0;
  int64_t negatives = 0;
  bool pos_capped = false;
  bool neg_capped = false;
};

inline GoldPairsResult gold_pairs(std::span<const Segment> segments, int64_t n_pos,
                                  int64_t n_neg, uint64_t seed) {
  if (n_pos < 0 || n_neg < 0) throw ConfigError("gold_pairs: negative pair counts");
  std::map<Transcription, std::vector<int64_t>> types;
  for (size_t i = 0; i < segments.size(); ++i) {
    if (!segments[i].transcription) {
      throw ValidationError("gold_pairs: segment '" + segments[i].id + "' is unlabeled");
    }
    types[*segments[i].transcription].push_back(static_cast<int64_t>(i));
  }
  const int64_t n = static_cast<int64_t>(segments.size());
  const int64_t all_pairs = n * (n - 1) / 2;
  int64_t pos_pool = 0;
  for (const auto &[_, members] : types) {
    pos_pool += static_cast<int64_t>(members.size()) *
                (static_cast<int64_t>(members.size()) - 1) / 2;
  }
  const int64_t neg_pool = all_pairs - pos_pool;
  if (pos_pool == 0 && n_pos > 0) {
    throw NumericError("gold_pairs: no transcription has 2 tokens");
  }

  GoldPairsResult res;
  res.positives = std::min(n_pos, pos_pool);
  res.negatives = std::min(n_neg, neg_pool);
  res.pos_capped = res.positives < n_pos;
  res.neg_capped = res.negatives < n_neg;

  auto canonical = [&](int64_t i, int64_t j) {
    const std::string &a = segments[i].id;
    const std::string &b = segments[j].id;
    Pair p;
    if (a < b) {
      p.id_a = a;
      p.id_b = b;
    } else {
      p.id_a = b;
      p.id_b = a;
    }
    return p;
  };

  // positives: strata per type with triangular decode
  if (res.positives > 0) {
    std::vector<const std::vector<int64_t> *> strata;
    std::vector<int64_t> cum;
    int64_t acc = 0;
    for (const auto &[_, members] : types) {
      int64_t m = static_cast<int64_t>(members.size());
      if (m < 2) continue;
      strata.push_back(&members);
      acc += m * (m - 1) / 2;
      cum.push_back(acc);
    }
    Rng rng(derive_seed(seed, "gold:pos"));
    for (int64_t pick : rng.sample_indices(pos_pool, res.positives)) {
      size_t si = static_cast<size_t>(std::upper_bound(cum.begin(), cum.end(), pick) -
                                      cum.begin());
      int64_t idx = pick - (si == 0 ? 0 : cum[si - 1]);
      const auto &members = *strata[si];
      const int64_t m = static_cast<int64_t>(members.size());
      // pair index -> (a, b), a < b over m members
      int64_t a = 0;
      int64_t row = m - 1;
      while (idx >= row) {
        idx -= row;
        --row;
        ++a;
      }
      int64_t b = a + 1 + idx;
      Pair p = canonical(members[a], members[b]);
      p.y = 1;
      res.pairs.push_back(std::move(p));
    }
  }

  // negatives: rejection over the global pair index space
  if (res.negatives > 0) {
    Rng rng(derive_seed(seed, "gold:neg"));
    auto row_offset = [&](int64_t i) { return i * n - i * (i + 1) / 2; };
    std::unordered_set<int64_t> taken;
    int64_t got = 0;
    while (got < res.negatives) {
      int64_t u = static_cast<int64_t>(rng.index(static_cast<uint64_t>(all_pairs)));
      int64_t lo = 0, hi = n - 1;
      while (lo + 1 < hi) {
        int64_t mid = (lo + hi) / 2;
        if (row_offset(mid) <= u) lo = mid;
        else hi = mid;
      }
      int64_t i = row_offset(hi) <= u ? hi : lo;
      int64_t j = i + 1 + (u - row_offset(i));
      if (*segments[i].transcription == *segments[j].transcription) continue;
      if (!taken.insert(u).second) continue;
      Pair p = canonical(i, j);
      p.y = 0;
      res.pairs.push_back(std::move(p));
      ++got;
    }
  }
  sort_pairs(res.pairs);
  return res;
}

// Fills pair similarities from an embedding set (cosine).
inline void fill_similarities(std::vector<Pair> &pairs, const EmbeddingSet &set) {
  for (Pair &p : pairs) {
    int64_t a = set.at(p.id_a);
    int64_t b = set.at(p.id_b);
    double na = vector_norm(set.vec(a));
    double nb = vector_norm(set.vec(b));
    p.similarity = 1.0 - cosine_distance(set.vec(a), set.vec(b), na, nb);
  }
  sort_pairs(pairs);
}

// ---------------------------------------------------------------------------
// Objectives

inline double cosine_similarity_checked(std::span<const float> e,
                                        std::span<const float> ep) {
  double ne = vector_norm(e);
  double nep = vector_norm(ep);
  if (ne == 0.0 || nep == 0.0) {
    throw ValidationError("siamese: zero vector has no cosine similarity");
  }
  return 1.0 - cosine_distance(e, ep, ne, nep);
}

inline double siamese_objective(std::span<const float> e, std::span<const float> ep,
                                int y, const SiameseConfig &cfg) {
  validate(cfg);
  if (y != 0 && y != 1) throw ValidationError("siamese: y must be 0 or 1");
  double c = cosine_similarity_checked(e, ep);
  return static_cast<double>(y) * c -
         (1.0 - static_cast<double>(y)) * std::max(0.0, c - cfg.gamma);
}

struct SiameseGradient {
  std::vector<double> d_e;
  std::vector<double> d_ep;
  bool at_kink = false;  // cos == gamma exactly with y = 0; subgradient 0 used
};

inline SiameseGradient siamese_gradient(std::span<const float> e,
                                        std::span<const float> ep, int y,
                                        const SiameseConfig &cfg) {
  validate(cfg);
  if (y != 0 && y != 1) throw ValidationError("siamese: y must be 0 or 1");
  double ne = vector_norm(e);
  double nep = vector_norm(ep);
  if (ne == 0.0 || nep == 0.0) {
    throw ValidationError("siamese: zero vector has no cosine gradient");
  }
  double c = 1.0 - cosine_distance(e, ep, ne, nep);

  SiameseGradient g;
  g.d_e.assign(e.size(), 0.0);
  g.d_ep.assign(ep.size(), 0.0);
  double factor;  // dL/dcos
  if (y == 1) {
    factor = 1.0;
  } else if (c > cfg.gamma) {
    factor = -1.0;
  } else if (c == cfg.gamma) {
    g.at_kink = true;
    return g;
  } else {
    return g;
  }
  // dcos/de = ep/(|e||ep|) - cos * e/|e|^2, and symmetrically for ep
  for (size_t i = 0; i < e.size(); ++i) {
    double ei = static_cast<double>(e[i]);
    double epi = static_cast<double>(ep[i]);
    g.d_e[i] = factor * (epi / (ne * nep) - c * ei / (ne * ne));
    g.d_ep[i] = factor * (ei / (ne * nep) - c * epi / (nep * nep));
  }
  return g;
}

inline double mse(const FeatureMatrix &a, const FeatureMatrix &b) {
  if (a.frames != b.frames || a.dim != b.dim) {
    throw ValidationError("mse: shape mismatch, " + std::to_string(a.frames) + "x" +
                          std::to_string(a.dim) + " vs " + std::to_string(b.frames) +
                          "x" + std::to_string(b.dim));
  }
  if (a.data.empty()) throw ValidationError("mse: empty matrices");
  double sum = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(a.data.size());
}

// ---------------------------------------------------------------------------
// Pair file I/O

inline void write_pair_file(const std::filesystem::path &path,
                            std::span<const Pair> pairs) {
  std::string body = "id_a\tid_b\tsimilarity\ty\n";
  for (const Pair &p : pairs) {
    body += p.id_a;
    body += '\t';
    body += p.id_b;
    body += '\t';
    if (p.similarity) body += fmt_g(*p.similarity);
    body += '\t';
    if (p.y) body += std::to_string(*p.y);
    body += '\n';
  }
  write_file(path, body);
}

inline std::vector<Pair> load_pair_file(const std::filesystem::path &path) {
  std::vector<std::string> lines = read_lines(path);
  if (lines.empty() || lines[0] != "id_a\tid_b\tsimilarity\ty") {
    throw ParseError(path.string() + ": bad pair file header");
  }
  std::vector<Pair> out;
  for (size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    std::string where = path.string() + ": line " + std::to_string(ln + 1);
    std::vector<std::string> cols = split(lines[ln], '\t');
    if (cols.size() != 4) throw ParseError(where + ": expected 4 columns");
    Pair p;
    p.id_a = cols[0];
    p.id_b = cols[1];
    if (p.id_a >= p.id_b) throw ValidationError(where + ": ids not in canonical order");
    if (!cols[2].empty()) {
      double s = parse_double(cols[2], where);
      if (!std::isfinite(s)) throw ValidationError(where + ": non-finite similarity");
      p.similarity = s;
    }
    if (!cols[3].empty()) {
      int64_t y = parse_int(cols[3], where);
      if (y != 0 && y != 1) throw ValidationError(where + ": y must be 0 or 1");
      p.y = static_cast<int>(y);
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace embeval

#endif  // EMBEVAL_PAIRS_HPP_
