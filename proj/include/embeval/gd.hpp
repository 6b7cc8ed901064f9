// embeval/gd.hpp

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
// Gaussian downsampling: a variable-length frames x n matrix becomes a fixed
// l x n embedding.  Sample centers c_j = (j + 0.5) * T / l - 0.5 in frame
// index units, sigma = sigma_ratio * T / l, block_j is the Gaussian-weighted
// frame average around c_j, and the embedding is the block concatenation.

#ifndef EMBEVAL_GD_HPP_
#define EMBEVAL_GD_HPP_

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "embeval/corpus.hpp"
#include "embeval/embedding.hpp"
#include "embeval/error.hpp"
#include "embeval/features.hpp"
#include "embeval/parallel.hpp"

namespace embeval {

struct GdConfig {
  int64_t l = 10;
  double sigma_ratio = 0.4;
};

inline void validate(const GdConfig &cfg) {
  if (cfg.l < 1) throw ConfigError("gd: l must be >= 1");
  if (!(cfg.sigma_ratio > 0.0)) throw ConfigError("gd: sigma_ratio must be positive");
}

inline std::vector<float> gd_embed(const FeatureMatrix &feat, const GdConfig &cfg) {
  validate(cfg);
  const int64_t T = feat.frames;
  const int64_t n = feat.dim;
  if (T < 1) throw NumericError("gd_embed: degenerate input, 0 frames");
  const double spacing = static_cast<double>(T) / static_cast<double>(cfg.l);
  const double sigma = cfg.sigma_ratio * spacing;
  std::vector<float> out(static_cast<size_t>(cfg.l * n), 0.0f);
  std::vector<double> w(static_cast<size_t>(T));
  std::vector<double> acc(static_cast<size_t>(n));
  for (int64_t j = 0; j < cfg.l; ++j) {
    const double c = (static_cast<double>(j) + 0.5) * spacing - 0.5;
    double wsum = 0.0;
    for (int64_t i = 0; i < T; ++i) {
      double d = (static_cast<double>(i) - c) / sigma;
      w[i] = std::exp(-0.5 * d * d);
      wsum += w[i];
    }
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int64_t i = 0; i < T; ++i) {
      const double wi = w[i] / wsum;
      const float *row = feat.row(i);
      for (int64_t d = 0; d < n; ++d) acc[d] += wi * static_cast<double>(row[d]);
    }
    float *block = out.data() + j * n;
    for (int64_t d = 0; d < n; ++d) block[d] = static_cast<float>(acc[d]);
  }
  return out;
}

enum class FeaturizerKind { kReal, kOneHot };

inline std::string featurizer_name(FeaturizerKind k) {
  return k == FeaturizerKind::kReal ? "real" : "one_hot";
}

inline FeaturizerKind parse_featurizer(const std::string &s) {
  if (s == "real") return FeaturizerKind::kReal;
  if (s == "one_hot" || s == "onehot") return FeaturizerKind::kOneHot;
  throw ConfigError("unknown featurizer '" + s + "' (expected real or one_hot)");
}

struct EmbedOptions {
  GdConfig gd;
  FeaturizerKind featurizer = FeaturizerKind::kReal;
  DistanceKind distance_default = DistanceKind::kCosine;
  int threads = 1;
};

// Embeds every segment; the feature archive supplies frame geometry for both
// featurizers and frame values for the real one.  One-hot frames are rendered
// from the alignment over the archive's sorted phone inventory.  Output order
// follows segment order regardless of thread schedule.
inline EmbeddingSet embed_corpus(const FeatureArchive &feats,
                                 const AlignmentStore *alignments,
                                 std::span<const Segment> segments,
                                 const EmbedOptions &opt) {
  validate(opt.gd);
  const bool one_hot = opt.featurizer == FeaturizerKind::kOneHot;
  if (one_hot && alignments == nullptr) {
    throw ConfigError("embed_corpus: one_hot featurizer needs alignments");
  }
  std::map<PhoneLabel, int64_t> inventory;
  if (one_hot) {
    std::vector<PhoneLabel> phones = alignments->inventory();
    if (phones.empty()) throw DataError("embed_corpus: empty phone inventory");
    for (size_t i = 0; i < phones.size(); ++i) {
      inventory.emplace(phones[i], static_cast<int64_t>(i));
    }
  }
  const int64_t n = one_hot ? static_cast<int64_t>(inventory.size()) : feats.dim();
  const int64_t dim = opt.gd.l * n;

  std::map<std::string, std::vector<size_t>> by_file;
  for (size_t i = 0; i < segments.size(); ++i) {
    by_file[segments[i].file_id].push_back(i);
  }
  std::vector<std::vector<float>> vectors(segments.size());
  for (const auto &[file_id, seg_indices] : by_file) {
    if (!feats.has(file_id)) {
      throw LookupError("embed_corpus: feature archive has no file '" + file_id + "'");
    }
    const int64_t file_frames = feats.entries().at(file_id).frames;
    FeatureMatrix file_mat;
    const std::vector<PhoneInterval> *file_align = nullptr;
    if (one_hot) {
      file_align = &alignments->at(file_id);
    } else {
      file_mat = feats.load(file_id);
    }
    parallel_for(seg_indices.size(), opt.threads, [&](size_t begin, size_t end) {
      for (size_t s = begin; s < end; ++s) {
        const Segment &seg = segments[seg_indices[s]];
        FeatureMatrix sliced =
            one_hot ? one_hot_frames(seg, *file_align, inventory, feats.hop_s(),
                                     feats.window_s(), file_frames)
                    : slice_frames(file_mat, seg.onset, seg.offset, feats.hop_s(),
                                   feats.window_s());
        if (sliced.frames == 0) {
          throw NumericError("embed_corpus: segment '" + seg.id +
                             "' yields 0 frames, cannot embed");
        }
        vectors[seg_indices[s]] = gd_embed(sliced, opt.gd);
      }
    });
  }

  EmbeddingSet set(dim, opt.distance_default);
  for (size_t i = 0; i < segments.size(); ++i) {
    EmbeddingMeta meta;
    meta.id = segments[i].id;
    meta.speaker = segments[i].speaker;
    meta.transcription = segments[i].transcription;
    set.add(std::move(meta), vectors[i]);
  }
  return set;
}

}  // namespace embeval

#endif  // EMBEVAL_GD_HPP_
