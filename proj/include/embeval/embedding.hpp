// embeval/embedding.hpp

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
// Fixed-size embedding sets and their on-disk archive.
//
// Archive layout: a directory holding
//   manifest.json  {"dim": D, "count": N, "distance_default": "cosine"|"euclidean",
//                   "normalized": false}
//   ids.tsv        id<TAB>speaker<TAB>phones   (phones space-separated, may be empty)
//   emb.bin        row-major float32 little-endian, count x dim, row order = ids.tsv

#ifndef EMBEVAL_EMBEDDING_HPP_
#define EMBEVAL_EMBEDDING_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "embeval/corpus.hpp"
#include "embeval/distance.hpp"
#include "embeval/error.hpp"
#include "embeval/util.hpp"
#include "json.hpp"

namespace embeval {

struct EmbeddingMeta {
  std::string id;
  std::string speaker;
  std::optional<Transcription> transcription;
};

// N embeddings of equal dimension with aligned metadata rows.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  explicit EmbeddingSet(int64_t dim, DistanceKind distance_default = DistanceKind::kCosine)
      : dim_(dim), distance_default_(distance_default) {
    if (dim <= 0) throw ValidationError("embedding set: dim must be positive");
  }

  int64_t dim() const { return dim_; }
  int64_t count() const { return static_cast<int64_t>(meta_.size()); }
  DistanceKind distance_default() const { return distance_default_; }
  void set_distance_default(DistanceKind k) { distance_default_ = k; }

  void add(EmbeddingMeta meta, std::span<const float> vec) {
    if (static_cast<int64_t>(vec.size()) != dim_) {
      throw ValidationError("embedding set: '" + meta.id + "' has dim " +
                            std::to_string(vec.size()) + ", set dim is " +
                            std::to_string(dim_));
    }
    if (meta.id.empty()) throw ValidationError("embedding set: empty id");
    if (!index_.emplace(meta.id, meta_.size()).second) {
      throw ValidationError("embedding set: duplicate id '" + meta.id + "'");
    }
    meta_.push_back(std::move(meta));
    data_.insert(data_.end(), vec.begin(), vec.end());
  }

  const EmbeddingMeta &meta(int64_t i) const { return meta_[i]; }
  std::span<const float> vec(int64_t i) const {
    return {data_.data() + i * dim_, static_cast<size_t>(dim_)};
  }
  const std::vector<float> &raw() const { return data_; }

  int64_t find(const std::string &id) const {
    auto it = index_.find(id);
    return it == index_.end() ? -1 : static_cast<int64_t>(it->second);
  }
  int64_t at(const std::string &id) const {
    int64_t i = find(id);
    if (i < 0) throw LookupError("embedding set: no id '" + id + "'");
    return i;
  }

  double pair_distance(int64_t i, int64_t j) const {
    return distance(distance_default_, vec(i), vec(j));
  }

 private:
  int64_t dim_ = 0;
  DistanceKind distance_default_ = DistanceKind::kCosine;
  std::vector<EmbeddingMeta> meta_;
  std::vector<float> data_;
  std::unordered_map<std::string, size_t> index_;
};

inline void save_embedding_set(const EmbeddingSet &set, const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json m;
  m["dim"] = set.dim();
  m["count"] = set.count();
  m["distance_default"] = distance_name(set.distance_default());
  m["normalized"] = false;
  write_file(dir / "manifest.json", m.dump(2) + "\n");

  std::string ids = "id\tspeaker\tphones\n";
  for (int64_t i = 0; i < set.count(); ++i) {
    const EmbeddingMeta &meta = set.meta(i);
    ids += meta.id;
    ids += '\t';
    ids += meta.speaker;
    ids += '\t';
    if (meta.transcription) ids += meta.transcription->joined();
    ids += '\n';
  }
  write_file(dir / "ids.tsv", ids);
  write_f32le(dir / "emb.bin", set.raw());
}

inline EmbeddingSet load_embedding_set(const std::filesystem::path &dir) {
  namespace fs = std::filesystem;
  fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) {
    throw DataError("embedding archive: missing " + manifest_path.string());
  }
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::exception &e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }
  int64_t dim = 0, count = 0;
  DistanceKind dk = DistanceKind::kCosine;
  try {
    dim = m.at("dim").get<int64_t>();
    count = m.at("count").get<int64_t>();
    dk = parse_distance(m.at("distance_default").get<std::string>());
  } catch (const nlohmann::json::exception &e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }
  if (dim <= 0) throw ValidationError(manifest_path.string() + ": dim must be positive");
  if (count < 0) throw ValidationError(manifest_path.string() + ": negative count");

  std::vector<std::string> lines = read_lines(dir / "ids.tsv");
  if (lines.empty() || lines[0] != "id\tspeaker\tphones") {
    throw ParseError((dir / "ids.tsv").string() + ": bad header, expected 'id\\tspeaker\\tphones'");
  }
  std::vector<float> values = read_f32le(dir / "emb.bin");
  if (static_cast<int64_t>(values.size()) != count * dim) {
    throw ValidationError((dir / "emb.bin").string() + " holds " +
                          std::to_string(values.size()) + " floats, manifest says " +
                          std::to_string(count * dim));
  }

  EmbeddingSet set(dim, dk);
  int64_t row = 0;
  for (size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    std::string where = (dir / "ids.tsv").string() + ": line " + std::to_string(ln + 1);
    std::vector<std::string> cols = split(lines[ln], '\t');
    if (cols.size() != 3) {
      throw ParseError(where + ": expected 3 columns, got " + std::to_string(cols.size()));
    }
    if (row >= count) throw ValidationError(where + ": more ids than manifest count");
    EmbeddingMeta meta;
    meta.id = cols[0];
    meta.speaker = cols[1];
    if (!cols[2].empty()) {
      Transcription t;
      for (std::string &p : split(cols[2], ' ')) {
        if (p.empty()) throw ParseError(where + ": empty phone in transcription");
        t.phones.push_back(std::move(p));
      }
      meta.transcription = std::move(t);
    }
    set.add(std::move(meta),
            std::span<const float>(values.data() + row * dim, static_cast<size_t>(dim)));
    ++row;
  }
  if (row != count) {
    throw ValidationError((dir / "ids.tsv").string() + ": " + std::to_string(row) +
                          " ids, manifest says " + std::to_string(count));
  }
  return set;
}

}  // namespace embeval

#endif  // EMBEVAL_EMBEDDING_HPP_
