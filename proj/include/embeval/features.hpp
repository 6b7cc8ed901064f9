// embeval/features.hpp

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
// Frame-level feature matrices and the on-disk feature archive.
//
// Archive layout: a directory holding manifest.json plus one raw binary per
// recording.  manifest.json:
//   {"dim": D, "hop_s": h, "window_s": w, "dtype": "f32le",
//    "files": [{"id": ..., "path": ..., "frames": N}, ...]}
// Each .bin is row-major float32 little-endian, frames x dim.
//
// Frame i of a file covers [i*hop_s, i*hop_s + window_s); its center is
// i*hop_s + window_s/2.  A frame belongs to a segment iff its center lies in
// [onset, offset).

#ifndef EMBEVAL_FEATURES_HPP_
#define EMBEVAL_FEATURES_HPP_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "embeval/corpus.hpp"
#include "embeval/error.hpp"
#include "embeval/util.hpp"
#include "json.hpp"

namespace embeval {

// Dense row-major frames x dim matrix.
struct FeatureMatrix {
  int64_t frames = 0;
  int64_t dim = 0;
  std::vector<float> data;  // frames * dim

  FeatureMatrix() = default;
  FeatureMatrix(int64_t n, int64_t d) : frames(n), dim(d), data(static_cast<size_t>(n * d), 0.0f) {
    if (n < 0 || d <= 0) throw ValidationError("feature matrix: bad shape");
  }

  float *row(int64_t i) { return data.data() + i * dim; }
  const float *row(int64_t i) const { return data.data() + i * dim; }
  std::span<const float> row_span(int64_t i) const {
    return {data.data() + i * dim, static_cast<size_t>(dim)};
  }
};

// Half-open frame index range [first, last) of frames whose center lies in
// [onset, offset).  Closed-form bounds refined by exact scalar checks so the
// result agrees with the literal per-frame loop.
inline std::pair<int64_t, int64_t> frame_range(double onset, double offset,
                                               double hop_s, double window_s,
                                               int64_t n_frames) {
  if (hop_s <= 0.0) throw ConfigError("frame_range: hop_s must be positive");
  if (n_frames <= 0) return {0, 0};
  auto center = [&](int64_t i) { return static_cast<double>(i) * hop_s + window_s / 2.0; };
  auto in_range = [&](int64_t i) { double c = center(i); return c >= onset && c < offset; };

  int64_t first = static_cast<int64_t>(std::ceil((onset - window_s / 2.0) / hop_s));
  first = std::max<int64_t>(first, 0);
  first = std::min(first, n_frames);
  while (first > 0 && in_range(first - 1)) --first;
  while (first < n_frames && !in_range(first) && center(first) < offset) ++first;

  int64_t last = static_cast<int64_t>(std::ceil((offset - window_s / 2.0) / hop_s));
  last = std::max(last, first);
  last = std::min(last, n_frames);
  while (last < n_frames && in_range(last)) ++last;
  while (last > first && !in_range(last - 1)) --last;

  if (first >= last) return {first, first};
  return {first, last};
}

// Copies the segment's frames out of a file's matrix.  May return zero rows
// (segment too short to contain a frame center).
inline FeatureMatrix slice_frames(const FeatureMatrix &file, double onset,
                                  double offset, double hop_s, double window_s) {
  auto [first, last] = frame_range(onset, offset, hop_s, window_s, file.frames);
  FeatureMatrix out(last - first, file.dim);
  std::copy(file.row(first), file.row(last), out.data.begin());
  return out;
}

// Renders one-hot phone indicator frames for a segment from its alignment.
// Column order follows `inventory`.  Each frame center is matched to the
// interval with onset <= center < offset (exact comparisons).
inline FeatureMatrix one_hot_frames(const Segment &seg,
                                    std::span<const PhoneInterval> intervals,
                                    const std::map<PhoneLabel, int64_t> &inventory,
                                    double hop_s, double window_s,
                                    int64_t file_frames) {
  auto [first, last] = frame_range(seg.onset, seg.offset, hop_s, window_s, file_frames);
  FeatureMatrix out(last - first, static_cast<int64_t>(inventory.size()));
  size_t iv = 0;
  for (int64_t f = first; f < last; ++f) {
    double c = static_cast<double>(f) * hop_s + window_s / 2.0;
    while (iv < intervals.size() && intervals[iv].offset <= c) ++iv;
    if (iv >= intervals.size() || intervals[iv].onset > c) {
      throw DataError("one_hot_frames: frame center " + fmt_g(c) +
                      " of segment '" + seg.id + "' not covered by alignment");
    }
    auto it = inventory.find(intervals[iv].phone);
    if (it == inventory.end()) {
      throw LookupError("one_hot_frames: phone '" + intervals[iv].phone +
                        "' missing from inventory");
    }
    out.row(f - first)[it->second] = 1.0f;
  }
  return out;
}

inline FeatureMatrix one_hot_frames(const Segment &seg,
                                    std::span<const PhoneInterval> intervals,
                                    std::span<const PhoneLabel> inventory,
                                    double hop_s, double window_s,
                                    int64_t file_frames) {
  std::map<PhoneLabel, int64_t> index;
  for (size_t i = 0; i < inventory.size(); ++i) {
    if (!index.emplace(inventory[i], static_cast<int64_t>(i)).second) {
      throw ValidationError("one_hot_frames: duplicate inventory phone '" + inventory[i] + "'");
    }
  }
  return one_hot_frames(seg, intervals, index, hop_s, window_s, file_frames);
}

// ---------------------------------------------------------------------------
// Feature archive

struct FeatureArchiveEntry {
  std::string id;
  std::string path;  // relative to the archive directory
  int64_t frames = 0;
};

class FeatureArchive {
 public:
  static FeatureArchive open(const std::filesystem::path &dir) {
    namespace fs = std::filesystem;
    fs::path manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path)) {
      throw DataError("feature archive: missing " + manifest_path.string());
    }
    nlohmann::json m;
    try {
      m = nlohmann::json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::exception &e) {
      throw ParseError(manifest_path.string() + ": " + e.what());
    }
    FeatureArchive a;
    a.dir_ = dir;
    try {
      a.dim_ = m.at("dim").get<int64_t>();
      a.hop_s_ = m.at("hop_s").get<double>();
      a.window_s_ = m.at("window_s").get<double>();
      std::string dtype = m.at("dtype").get<std::string>();
      if (dtype != "f32le") {
        throw ValidationError(manifest_path.string() + ": unsupported dtype '" + dtype + "'");
      }
      for (const auto &f : m.at("files")) {
        FeatureArchiveEntry e;
        e.id = f.at("id").get<std::string>();
        e.path = f.at("path").get<std::string>();
        e.frames = f.at("frames").get<int64_t>();
        if (!a.entries_.emplace(e.id, e).second) {
          throw ValidationError(manifest_path.string() + ": duplicate file id '" + e.id + "'");
        }
      }
    } catch (const nlohmann::json::exception &e) {
      throw ParseError(manifest_path.string() + ": " + e.what());
    }
    if (a.dim_ <= 0) throw ValidationError(manifest_path.string() + ": dim must be positive");
    if (a.hop_s_ <= 0.0) throw ValidationError(manifest_path.string() + ": hop_s must be positive");
    if (a.window_s_ <= 0.0) {
      throw ValidationError(manifest_path.string() + ": window_s must be positive");
    }
    return a;
  }

  int64_t dim() const { return dim_; }
  double hop_s() const { return hop_s_; }
  double window_s() const { return window_s_; }
  const std::map<std::string, FeatureArchiveEntry> &entries() const { return entries_; }

  bool has(const std::string &file_id) const { return entries_.count(file_id) != 0; }

  FeatureMatrix load(const std::string &file_id) const {
    auto it = entries_.find(file_id);
    if (it == entries_.end()) {
      throw LookupError("feature archive: no file '" + file_id + "'");
    }
    const FeatureArchiveEntry &e = it->second;
    std::vector<float> values = read_f32le(dir_ / e.path);
    if (static_cast<int64_t>(values.size()) != e.frames * dim_) {
      throw ValidationError("feature archive: '" + e.path + "' holds " +
                            std::to_string(values.size()) + " floats, manifest says " +
                            std::to_string(e.frames * dim_));
    }
    FeatureMatrix mat;
    mat.frames = e.frames;
    mat.dim = dim_;
    mat.data = std::move(values);
    return mat;
  }

  // Nominal duration of a file: frames * hop_s.
  std::map<std::string, double> durations() const {
    std::map<std::string, double> out;
    for (const auto &[id, e] : entries_) {
      out[id] = static_cast<double>(e.frames) * hop_s_;
    }
    return out;
  }

 private:
  std::filesystem::path dir_;
  int64_t dim_ = 0;
  double hop_s_ = 0.0;
  double window_s_ = 0.0;
  std::map<std::string, FeatureArchiveEntry> entries_;
};

// Archive-level slice for one segment; an empty slice is an error here (the
// batch embedder reports the segment id itself).
inline FeatureMatrix slice_features(const FeatureArchive &archive, const Segment &seg) {
  FeatureMatrix file = archive.load(seg.file_id);
  FeatureMatrix out = slice_frames(file, seg.onset, seg.offset, archive.hop_s(),
                                   archive.window_s());
  if (out.frames == 0) {
    throw NumericError("slice_features: degenerate segment '" + seg.id +
                       "', no frame center in [" + fmt_g(seg.onset) + ", " +
                       fmt_g(seg.offset) + ")");
  }
  return out;
}

class FeatureArchiveWriter {
 public:
  FeatureArchiveWriter(std::filesystem::path dir, int64_t dim, double hop_s,
                       double window_s)
      : dir_(std::move(dir)), dim_(dim), hop_s_(hop_s), window_s_(window_s) {
    if (dim <= 0) throw ConfigError("feature archive: dim must be positive");
    if (hop_s <= 0.0 || window_s <= 0.0) {
      throw ConfigError("feature archive: hop_s and window_s must be positive");
    }
    std::filesystem::create_directories(dir_);
  }

  void add(const std::string &file_id, const FeatureMatrix &mat) {
    if (mat.dim != dim_) {
      throw ValidationError("feature archive: '" + file_id + "' has dim " +
                            std::to_string(mat.dim) + ", archive dim is " +
                            std::to_string(dim_));
    }
    if (entries_.count(file_id)) {
      throw ValidationError("feature archive: duplicate file id '" + file_id + "'");
    }
    if (file_id.empty() || file_id.find('/') != std::string::npos ||
        file_id.find('\\') != std::string::npos) {
      throw ValidationError("feature archive: bad file id '" + file_id + "'");
    }
    FeatureArchiveEntry e;
    e.id = file_id;
    e.path = file_id + ".bin";
    e.frames = mat.frames;
    write_f32le(dir_ / e.path, mat.data);
    entries_.emplace(file_id, std::move(e));
  }

  void finalize() const {
    nlohmann::json m;
    m["dim"] = dim_;
    m["hop_s"] = hop_s_;
    m["window_s"] = window_s_;
    m["dtype"] = "f32le";
    nlohmann::json files = nlohmann::json::array();
    for (const auto &[_, e] : entries_) {
      files.push_back({{"id", e.id}, {"path", e.path}, {"frames", e.frames}});
    }
    m["files"] = std::move(files);
    write_file(dir_ / "manifest.json", m.dump(2) + "\n");
  }

 private:
  std::filesystem::path dir_;
  int64_t dim_;
  double hop_s_;
  double window_s_;
  std::map<std::string, FeatureArchiveEntry> entries_;
};

}  // namespace embeval

#endif  // EMBEVAL_FEATURES_HPP_
