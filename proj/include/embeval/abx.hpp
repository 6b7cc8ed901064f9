// embeval/abx.hpp

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
// ABX discrimination error.  For an unordered contrast {A, B}, triplets draw
// a and x as distinct tokens of one type and b as a token of the other, in
// both role assignments.  A triplet scores 0 when d(a,x) < d(b,x), 1 when
// greater, 0.5 on an exact tie.  Errors average per contrast, then uniformly
// across contrasts.

#ifndef EMBEVAL_ABX_HPP_
#define EMBEVAL_ABX_HPP_

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "embeval/corpus.hpp"
#include "embeval/distance.hpp"
#include "embeval/embedding.hpp"
#include "embeval/error.hpp"
#include "embeval/parallel.hpp"
#include "embeval/rng.hpp"
#include "embeval/util.hpp"
#include "json.hpp"

namespace embeval {

enum class SpeakerMode { kAny, kWithinSpeaker };

inline std::string speaker_mode_name(SpeakerMode m) {
  return m == SpeakerMode::kAny ? "any" : "within_speaker";
}

inline SpeakerMode parse_speaker_mode(const std::string &s) {
  if (s == "any") return SpeakerMode::kAny;
  if (s == "within_speaker") return SpeakerMode::kWithinSpeaker;
  throw ConfigError("unknown speaker mode '" + s + "' (expected any or within_speaker)");
}

struct AbxConfig {
  DistanceKind distance = DistanceKind::kCosine;
  int64_t max_triplets_per_contrast = 1000;
  uint64_t seed = 0;
  SpeakerMode speaker_mode = SpeakerMode::kAny;
};

inline void validate(const AbxConfig &cfg) {
  if (cfg.max_triplets_per_contrast < 1) {
    throw ConfigError("abx: max_triplets_per_contrast must be >= 1");
  }
}

struct AbxContrastResult {
  Transcription type_a;  // canonical: type_a < type_b
  Transcription type_b;
  double error = 0.0;
  int64_t triplets = 0;
  bool sampled = false;
};

struct AbxReport {
  double global_error = 0.0;
  std::vector<AbxContrastResult> per_contrast;
  int64_t contrast_count = 0;     // contrasts scored
  int64_t omitted_contrasts = 0;  // type pairs with no valid triplet
  int64_t skipped_unlabeled = 0;
  AbxConfig config;
};

inline double triplet_decision(std::span<const float> e_a, std::span<const float> e_b,
                               std::span<const float> e_x, DistanceKind d) {
  double dax = distance(d, e_a, e_x);
  double dbx = distance(d, e_b, e_x);
  if (!std::isfinite(dax) || !std::isfinite(dbx)) {
    throw NumericError("abx: non-finite distance in triplet");
  }
  if (dax < dbx) return 0.0;
  if (dax > dbx) return 1.0;
  return 0.5;
}

namespace detail {

// One enumeration unit: a and x from rows s, b from rows o.
struct AbxStratum {
  const std::vector<int32_t> *s;
  const std::vector<int32_t> *o;
  int64_t size;  // |s| * (|s|-1) * |o|
};

inline int64_t stratum_size(size_t ns, size_t no) {
  return static_cast<int64_t>(ns) * static_cast<int64_t>(ns - 1) * static_cast<int64_t>(no);
}

}  // namespace detail

inline AbxReport abx_score(const EmbeddingSet &set, const AbxConfig &cfg, int threads = 1) {
  validate(cfg);
  AbxReport report;
  report.config = cfg;

  std::map<Transcription, std::vector<int32_t>> types;
  for (int64_t i = 0; i < set.count(); ++i) {
    if (!set.meta(i).transcription) {
      ++report.skipped_unlabeled;
      continue;
    }
    types[*set.meta(i).transcription].push_back(static_cast<int32_t>(i));
  }
  if (types.size() < 2) {
    throw NumericError("abx: task undefined, need at least 2 transcription types, have " +
                       std::to_string(types.size()));
  }

  std::vector<double> norms(set.count(), 0.0);
  if (cfg.distance == DistanceKind::kCosine) {
    std::vector<std::string> zero_ids;
    for (int64_t i = 0; i < set.count(); ++i) {
      norms[i] = vector_norm(set.vec(i));
      if (norms[i] == 0.0 && set.meta(i).transcription) zero_ids.push_back(set.meta(i).id);
    }
    if (!zero_ids.empty()) {
      throw ValidationError("abx: zero vectors under cosine distance: " + join(zero_ids, ' '));
    }
  }
  auto dist = [&](int32_t i, int32_t j) {
    if (cfg.distance == DistanceKind::kCosine) {
      return cosine_distance(set.vec(i), set.vec(j), norms[i], norms[j]);
    }
    return euclidean_distance(set.vec(i), set.vec(j));
  };

  // Within-speaker mode splits each type's tokens by speaker.
  std::map<Transcription, std::map<std::string, std::vector<int32_t>>> by_speaker;
  if (cfg.speaker_mode == SpeakerMode::kWithinSpeaker) {
    for (const auto &[t, rows] : types) {
      auto &m = by_speaker[t];
      for (int32_t r : rows) m[set.meta(r).speaker].push_back(r);
    }
  }

  // Candidate contrasts: unordered type pairs where one side has >= 2 tokens.
  struct Candidate {
    const Transcription *a;
    const Transcription *b;
    const std::vector<int32_t> *rows_a;
    const std::vector<int32_t> *rows_b;
  };
  std::vector<Candidate> candidates;
  for (auto ia = types.begin(); ia != types.end(); ++ia) {
    for (auto ib = std::next(ia); ib != types.end(); ++ib) {
      if (ia->second.size() < 2 && ib->second.size() < 2) continue;
      candidates.push_back({&ia->first, &ib->first, &ia->second, &ib->second});
    }
  }

  std::vector<AbxContrastResult> results(candidates.size());
  std::vector<char> scored(candidates.size(), 0);

  parallel_for(candidates.size(), threads, [&](size_t begin, size_t end) {
    std::vector<double> o_dists;
    for (size_t c = begin; c < end; ++c) {
      const Candidate &cand = candidates[c];
      std::vector<detail::AbxStratum> strata;
      if (cfg.speaker_mode == SpeakerMode::kAny) {
        if (cand.rows_a->size() >= 2 && !cand.rows_b->empty()) {
          strata.push_back({cand.rows_a, cand.rows_b,
                            detail::stratum_size(cand.rows_a->size(), cand.rows_b->size())});
        }
        if (cand.rows_b->size() >= 2 && !cand.rows_a->empty()) {
          strata.push_back({cand.rows_b, cand.rows_a,
                            detail::stratum_size(cand.rows_b->size(), cand.rows_a->size())});
        }
      } else {
        const auto &spk_a = by_speaker.at(*cand.a);
        const auto &spk_b = by_speaker.at(*cand.b);
        for (const auto &[spk, rows_a] : spk_a) {
          auto it = spk_b.find(spk);
          if (it == spk_b.end()) continue;
          const auto &rows_b = it->second;
          if (rows_a.size() >= 2 && !rows_b.empty()) {
            strata.push_back({&rows_a, &rows_b,
                              detail::stratum_size(rows_a.size(), rows_b.size())});
          }
          if (rows_b.size() >= 2 && !rows_a.empty()) {
            strata.push_back({&rows_b, &rows_a,
                              detail::stratum_size(rows_b.size(), rows_a.size())});
          }
        }
      }
      int64_t total = 0;
      for (const auto &st : strata) total += st.size;
      if (total == 0) continue;

      AbxContrastResult res;
      res.type_a = *cand.a;
      res.type_b = *cand.b;
      double err_sum = 0.0;
      if (total <= cfg.max_triplets_per_contrast) {
        // Exact enumeration.  Per probe x, sort the other-type distances once
        // and count b tokens strictly closer / tied by binary search.
        for (const auto &st : strata) {
          const auto &S = *st.s;
          const auto &O = *st.o;
          for (size_t xi = 0; xi < S.size(); ++xi) {
            o_dists.clear();
            for (int32_t b : O) o_dists.push_back(dist(b, S[xi]));
            std::sort(o_dists.begin(), o_dists.end());
            for (size_t ai = 0; ai < S.size(); ++ai) {
              if (ai == xi) continue;
              double dax = dist(S[ai], S[xi]);
              auto lo = std::lower_bound(o_dists.begin(), o_dists.end(), dax);
              auto hi = std::upper_bound(lo, o_dists.end(), dax);
              err_sum += static_cast<double>(lo - o_dists.begin()) +
                         0.5 * static_cast<double>(hi - lo);
            }
          }
        }
        res.triplets = total;
      } else {
        std::string key = res.type_a.joined() + "|" + res.type_b.joined();
        Rng rng(derive_seed(cfg.seed, "abx:" + key));
        std::vector<int64_t> cum(strata.size());
        int64_t acc = 0;
        for (size_t i = 0; i < strata.size(); ++i) {
          acc += strata[i].size;
          cum[i] = acc;
        }
        std::vector<int64_t> picks = rng.sample_indices(total, cfg.max_triplets_per_contrast);
        for (int64_t pick : picks) {
          size_t si = static_cast<size_t>(
              std::upper_bound(cum.begin(), cum.end(), pick) - cum.begin());
          int64_t idx = pick - (si == 0 ? 0 : cum[si - 1]);
          const auto &S = *strata[si].s;
          const auto &O = *strata[si].o;
          const int64_t per_x = static_cast<int64_t>(S.size() - 1) *
                                static_cast<int64_t>(O.size());
          int64_t xi = idx / per_x;
          int64_t rem = idx % per_x;
          int64_t ai = rem / static_cast<int64_t>(O.size());
          if (ai >= xi) ++ai;
          int64_t bi = rem % static_cast<int64_t>(O.size());
          double dax = dist(S[ai], S[xi]);
          double dbx = dist(O[bi], S[xi]);
          if (dax > dbx) err_sum += 1.0;
          else if (dax == dbx) err_sum += 0.5;
        }
        res.triplets = cfg.max_triplets_per_contrast;
        res.sampled = true;
      }
      res.error = err_sum / static_cast<double>(res.triplets);
      results[c] = std::move(res);
      scored[c] = 1;
    }
  });

  double err_total = 0.0;
  for (size_t c = 0; c < candidates.size(); ++c) {
    if (!scored[c]) continue;
    err_total += results[c].error;
    report.per_contrast.push_back(std::move(results[c]));
  }
  report.contrast_count = static_cast<int64_t>(report.per_contrast.size());
  int64_t all_pairs = static_cast<int64_t>(types.size()) *
                      (static_cast<int64_t>(types.size()) - 1) / 2;
  report.omitted_contrasts = all_pairs - report.contrast_count;
  if (report.contrast_count == 0) {
    throw NumericError("abx: no contrast has a valid triplet");
  }
  report.global_error = err_total / static_cast<double>(report.contrast_count);
  return report;
}

inline nlohmann::json to_json(const AbxReport &r) {
  nlohmann::json j;
  j["global_error"] = r.global_error;
  j["contrast_count"] = r.contrast_count;
  j["omitted_contrasts"] = r.omitted_contrasts;
  j["skipped_unlabeled"] = r.skipped_unlabeled;
  j["config"] = {{"distance", distance_name(r.config.distance)},
                 {"max_triplets_per_contrast", r.config.max_triplets_per_contrast},
                 {"seed", r.config.seed},
                 {"speaker_mode", speaker_mode_name(r.config.speaker_mode)},
                 {"tie_policy", "half_error"}};
  return j;
}

inline void write_abx_contrasts_tsv(const std::filesystem::path &path, const AbxReport &r) {
  std::string body = "contrast_a\tcontrast_b\terror\ttriplets\n";
  for (const AbxContrastResult &c : r.per_contrast) {
    body += c.type_a.joined();
    body += '\t';
    body += c.type_b.joined();
    body += '\t';
    body += fmt_g(c.error);
    body += '\t';
    body += std::to_string(c.triplets);
    body += '\n';
  }
  write_file(path, body);
}

}  // namespace embeval

#endif  // EMBEVAL_ABX_HPP_
