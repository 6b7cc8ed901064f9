// embeval/synth.hpp

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
// Synthetic labeled corpora with Zipfian type frequencies.  Types are random
// unique phone strings; token counts follow normalized r^(-s) weights rounded
// by largest remainder to the exact total.  Tokens are rendered as per-phone
// prototype frames plus i.i.d. Gaussian noise plus a per-speaker offset, tiled
// into one recording per speaker.  Frame geometry uses hop = window = 10 ms so
// a token's span slices back to exactly its rendered frames.
//
// Generation is single-threaded on purpose: same seed, same bytes.

#ifndef EMBEVAL_SYNTH_HPP_
#define EMBEVAL_SYNTH_HPP_

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "embeval/corpus.hpp"
#include "embeval/error.hpp"
#include "embeval/features.hpp"
#include "embeval/rng.hpp"
#include "embeval/util.hpp"
#include "json.hpp"

namespace embeval {

struct SynthConfig {
  int64_t inventory_size = 33;
  int64_t num_types = 500;
  double zipf_exponent = 1.0;
  int64_t total_tokens = 20000;
  int64_t phones_per_type_min = 2;
  int64_t phones_per_type_max = 6;
  int64_t frames_per_phone_min = 5;
  int64_t frames_per_phone_max = 15;
  double noise_sigma = 0.1;
  int64_t prototype_dim = 13;
  int64_t speakers = 12;
  uint64_t seed = 0;
};

inline void validate(const SynthConfig &cfg) {
  if (cfg.inventory_size < 1) throw ConfigError("synth: inventory_size must be >= 1");
  if (cfg.num_types < 2) throw ConfigError("synth: num_types must be >= 2");
  if (cfg.total_tokens < cfg.num_types) {
    throw ConfigError("synth: total_tokens must be >= num_types");
  }
  if (!(cfg.zipf_exponent >= 0.0)) throw ConfigError("synth: zipf_exponent must be >= 0");
  if (cfg.phones_per_type_min < 1 || cfg.phones_per_type_max < cfg.phones_per_type_min) {
    throw ConfigError("synth: bad phones_per_type range");
  }
  if (cfg.frames_per_phone_min < 1 || cfg.frames_per_phone_max < cfg.frames_per_phone_min) {
    throw ConfigError("synth: bad frames_per_phone range");
  }
  if (!(cfg.noise_sigma >= 0.0)) throw ConfigError("synth: noise_sigma must be >= 0");
  if (cfg.prototype_dim < 1) throw ConfigError("synth: prototype_dim must be >= 1");
  if (cfg.speakers < 1) throw ConfigError("synth: speakers must be >= 1");
}

// Integer counts proportional to r^(-s), summing exactly to total.  Largest
// remainder; remainder ties go to the larger fraction, then the lower rank.
inline std::vector<int64_t> zipf_counts(int64_t num_types, double s, int64_t total) {
  if (num_types < 1) throw ConfigError("zipf_counts: num_types must be >= 1");
  if (total < 0) throw ConfigError("zipf_counts: negative total");
  std::vector<double> w(num_types);
  double wsum = 0.0;
  for (int64_t r = 0; r < num_types; ++r) {
    w[r] = std::pow(static_cast<double>(r + 1), -s);
    wsum += w[r];
  }
  std::vector<int64_t> counts(num_types);
  std::vector<std::pair<double, int64_t>> frac(num_types);
  int64_t assigned = 0;
  for (int64_t r = 0; r < num_types; ++r) {
    double quota = static_cast<double>(total) * w[r] / wsum;
    counts[r] = static_cast<int64_t>(std::floor(quota));
    frac[r] = {quota - std::floor(quota), r};
    assigned += counts[r];
  }
  std::sort(frac.begin(), frac.end(), [](const auto &a, const auto &b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (int64_t i = 0; i < total - assigned; ++i) ++counts[frac[i].second];
  return counts;
}

struct SynthOutput {
  std::filesystem::path items;
  std::filesystem::path alignments;
  std::filesystem::path features;  // archive directory
  std::filesystem::path truth;
  std::vector<int64_t> type_counts;  // by Zipf rank
};

namespace detail {

inline std::string zero_pad(int64_t v, int width) {
  std::string s = std::to_string(v);
  if (static_cast<int>(s.size()) < width) {
    s.insert(0, static_cast<size_t>(width) - s.size(), '0');
  }
  return s;
}

}  // namespace detail

inline SynthOutput generate_corpus(const SynthConfig &cfg,
                                   const std::filesystem::path &out_dir) {
  validate(cfg);
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  constexpr double kHop = 0.010;
  constexpr double kWindow = 0.010;

  // phone inventory and prototypes
  std::vector<PhoneLabel> inventory;
  for (int64_t p = 0; p < cfg.inventory_size; ++p) {
    inventory.push_back("p" + detail::zero_pad(p, 2));
  }
  Rng proto_rng(derive_seed(cfg.seed, "synth:prototypes"));
  std::vector<std::vector<float>> prototypes(cfg.inventory_size);
  for (auto &proto : prototypes) {
    proto.resize(cfg.prototype_dim);
    for (float &v : proto) v = static_cast<float>(proto_rng.gaussian());
  }

  // unique phone strings
  Rng type_rng(derive_seed(cfg.seed, "synth:types"));
  std::vector<std::vector<int64_t>> type_phones(cfg.num_types);
  std::set<std::vector<int64_t>> seen;
  for (int64_t t = 0; t < cfg.num_types; ++t) {
    bool ok = false;
    for (int tries = 0; tries < 100; ++tries) {
      int64_t len = type_rng.int_range(cfg.phones_per_type_min, cfg.phones_per_type_max);
      std::vector<int64_t> phones(len);
      for (int64_t &p : phones) {
        p = static_cast<int64_t>(type_rng.index(static_cast<uint64_t>(cfg.inventory_size)));
      }
      if (seen.insert(phones).second) {
        type_phones[t] = std::move(phones);
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw NumericError("synth: no unique phone string for type " + std::to_string(t) +
                         " after 100 retries; enlarge the inventory or shrink num_types");
    }
  }

  // speaker offsets, std 0.5 * noise_sigma
  Rng spk_rng(derive_seed(cfg.seed, "synth:speakers"));
  std::vector<std::vector<double>> spk_offset(cfg.speakers);
  for (auto &off : spk_offset) {
    off.resize(cfg.prototype_dim);
    for (double &v : off) v = 0.5 * cfg.noise_sigma * spk_rng.gaussian();
  }

  // token list by rank, shuffled into placement order
  std::vector<int64_t> counts = zipf_counts(cfg.num_types, cfg.zipf_exponent,
                                            cfg.total_tokens);
  std::vector<int32_t> token_type;
  token_type.reserve(cfg.total_tokens);
  for (int64_t t = 0; t < cfg.num_types; ++t) {
    for (int64_t c = 0; c < counts[t]; ++c) token_type.push_back(static_cast<int32_t>(t));
  }
  Rng place_rng(derive_seed(cfg.seed, "synth:placement"));
  place_rng.shuffle(token_type);

  const int id_width = static_cast<int>(std::to_string(cfg.total_tokens - 1).size());
  const int spk_width = static_cast<int>(std::to_string(cfg.speakers - 1).size());

  // render: token p goes to file p % speakers, appended in placement order
  Rng noise_rng(derive_seed(cfg.seed, "synth:noise"));
  std::vector<FeatureMatrix> file_mats(cfg.speakers);
  for (auto &m : file_mats) m.dim = cfg.prototype_dim;
  AlignmentStore alignments;
  std::vector<Segment> segments(cfg.total_tokens);
  std::vector<std::string> file_ids(cfg.speakers), speaker_ids(cfg.speakers);
  for (int64_t s = 0; s < cfg.speakers; ++s) {
    file_ids[s] = "f" + detail::zero_pad(s, std::max(2, spk_width));
    speaker_ids[s] = "spk" + detail::zero_pad(s, std::max(2, spk_width));
  }

  for (int64_t p = 0; p < cfg.total_tokens; ++p) {
    const int64_t spk = p % cfg.speakers;
    FeatureMatrix &mat = file_mats[spk];
    const std::vector<int64_t> &phones = type_phones[token_type[p]];
    const int64_t start_frame = mat.frames;
    Segment seg;
    seg.id = "s" + detail::zero_pad(p, id_width);
    seg.file_id = file_ids[spk];
    seg.speaker = speaker_ids[spk];
    Transcription trans;
    for (int64_t ph : phones) {
      int64_t nframes = noise_rng.int_range(cfg.frames_per_phone_min,
                                            cfg.frames_per_phone_max);
      PhoneInterval iv;
      iv.phone = inventory[ph];
      iv.onset = static_cast<double>(mat.frames) * kHop;
      const std::vector<float> &proto = prototypes[ph];
      const std::vector<double> &off = spk_offset[spk];
      for (int64_t f = 0; f < nframes; ++f) {
        size_t base = mat.data.size();
        mat.data.resize(base + cfg.prototype_dim);
        for (int64_t d = 0; d < cfg.prototype_dim; ++d) {
          double v = static_cast<double>(proto[d]) + off[d] +
                     cfg.noise_sigma * noise_rng.gaussian();
          mat.data[base + d] = static_cast<float>(v);
        }
        ++mat.frames;
      }
      iv.offset = static_cast<double>(mat.frames) * kHop;
      alignments.add(seg.file_id, std::move(iv));
      trans.phones.push_back(inventory[ph]);
    }
    seg.onset = static_cast<double>(start_frame) * kHop;
    seg.offset = static_cast<double>(mat.frames) * kHop;
    seg.transcription = std::move(trans);
    segments[p] = std::move(seg);
  }

  SynthOutput out;
  out.items = out_dir / "items.tsv";
  out.alignments = out_dir / "alignment.tsv";
  out.features = out_dir / "features";
  out.truth = out_dir / "truth.tsv";
  out.type_counts = counts;

  write_item_file(out.items, segments);
  alignments.save(out.alignments);
  FeatureArchiveWriter writer(out.features, cfg.prototype_dim, kHop, kWindow);
  for (int64_t s = 0; s < cfg.speakers; ++s) writer.add(file_ids[s], file_mats[s]);
  writer.finalize();
  write_truth_file(out.truth, segments);

  nlohmann::json echo;
  echo["inventory_size"] = cfg.inventory_size;
  echo["num_types"] = cfg.num_types;
  echo["zipf_exponent"] = cfg.zipf_exponent;
  echo["total_tokens"] = cfg.total_tokens;
  echo["phones_per_type"] = {cfg.phones_per_type_min, cfg.phones_per_type_max};
  echo["frames_per_phone"] = {cfg.frames_per_phone_min, cfg.frames_per_phone_max};
  echo["noise_sigma"] = cfg.noise_sigma;
  echo["prototype_dim"] = cfg.prototype_dim;
  echo["speakers"] = cfg.speakers;
  echo["seed"] = cfg.seed;
  echo["hop_s"] = kHop;
  echo["window_s"] = kWindow;
  write_file(out_dir / "synth_config.json", echo.dump(2) + "\n");
  return out;
}

}  // namespace embeval

#endif  // EMBEVAL_SYNTH_HPP_
