// embeval/corpus.hpp

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
// Corpus data model: labeled segments of recordings, phone alignments and
// ground-truth frequency tables.
//
// File formats (all UTF-8 TSV with a header row):
//   item file:      id<TAB>file<TAB>speaker<TAB>onset<TAB>offset<TAB>phones
//                   `phones` is space-separated and may be empty (unlabeled).
//   alignment file: file<TAB>phone<TAB>onset<TAB>offset
//                   rows sorted by (file, onset); intervals contiguous and
//                   non-overlapping within a file.

#ifndef EMBEVAL_CORPUS_HPP_
#define EMBEVAL_CORPUS_HPP_

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "embeval/error.hpp"
#include "embeval/rng.hpp"
#include "embeval/util.hpp"

namespace embeval {

// A phone symbol: non-empty token with no whitespace.
using PhoneLabel = std::string;

inline void validate_phone_label(const PhoneLabel &p, const std::string &context) {
  if (p.empty()) throw ValidationError(context + ": empty phone label");
  for (char c : p) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      throw ValidationError(context + ": phone label contains whitespace: '" + p + "'");
    }
  }
}

// A phoneme n-gram.  Element-wise equality is the notion of "same type"
// throughout the library.
struct Transcription {
  std::vector<PhoneLabel> phones;

  Transcription() = default;
  explicit Transcription(std::vector<PhoneLabel> p) : phones(std::move(p)) {}

  size_t size() const { return phones.size(); }
  std::string joined() const { return join(phones, ' '); }

  bool operator==(const Transcription &o) const = default;
  auto operator<=>(const Transcription &o) const = default;
};

// One identified time span of a recording.
struct Segment {
  std::string id;
  std::string file_id;
  std::string speaker;
  double onset = 0.0;   // seconds
  double offset = 0.0;  // seconds
  std::optional<Transcription> transcription;

  double duration() const { return offset - onset; }
  bool labeled() const { return transcription.has_value(); }
};

struct PhoneInterval {
  PhoneLabel phone;
  double onset = 0.0;
  double offset = 0.0;
};

namespace detail {
// Slack for boundary comparisons on parsed time stamps.
constexpr double kTimeEps = 1e-9;
}  // namespace detail

// ---------------------------------------------------------------------------
// Item files

inline std::vector<Segment> load_item_file(const std::filesystem::path &path) {
  std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) {
    throw ParseError(path.string() + ": empty item file");
  }
  static const std::string kHeader = "id\tfile\tspeaker\tonset\toffset\tphones";
  if (lines[0] != kHeader) {
    throw ParseError(path.string() + ": line 1: bad header, expected '" + kHeader + "'");
  }
  std::vector<Segment> out;
  std::unordered_set<std::string> ids;
  for (size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    std::string where = path.string() + ": line " + std::to_string(ln + 1);
    std::vector<std::string> cols = split(lines[ln], '\t');
    if (cols.size() != 6) {
      throw ParseError(where + ": expected 6 columns, got " + std::to_string(cols.size()));
    }
    Segment seg;
    seg.id = cols[0];
    seg.file_id = cols[1];
    seg.speaker = cols[2];
    seg.onset = parse_double(cols[3], where);
    seg.offset = parse_double(cols[4], where);
    if (seg.id.empty()) throw ParseError(where + ": empty id");
    if (seg.file_id.empty()) throw ParseError(where + ": empty file id");
    if (seg.onset < 0.0) throw ParseError(where + ": negative onset");
    if (!(seg.offset > seg.onset)) {
      throw ParseError(where + ": offset " + cols[4] + " <= onset " + cols[3]);
    }
    if (!cols[5].empty()) {
      Transcription t;
      for (std::string &p : split(cols[5], ' ')) {
        if (p.empty()) throw ParseError(where + ": empty phone in transcription");
        t.phones.push_back(std::move(p));
      }
      seg.transcription = std::move(t);
    }
    if (!ids.insert(seg.id).second) {
      throw ValidationError(where + ": duplicate segment id '" + seg.id + "'");
    }
    out.push_back(std::move(seg));
  }
  return out;
}

inline void write_item_file(const std::filesystem::path &path,
                            std::span<const Segment> segments) {
  std::string body = "id\tfile\tspeaker\tonset\toffset\tphones\n";
  for (const Segment &s : segments) {
    body += s.id;
    body += '\t';
    body += s.file_id;
    body += '\t';
    body += s.speaker;
    body += '\t';
    body += fmt_fixed(s.onset, 3);
    body += '\t';
    body += fmt_fixed(s.offset, 3);
    body += '\t';
    if (s.transcription) body += s.transcription->joined();
    body += '\n';
  }
  write_file(path, body);
}

// ---------------------------------------------------------------------------
// Alignments

// Per-file phone intervals, immutable after loading.
class AlignmentStore {
 public:
  AlignmentStore() = default;

  static AlignmentStore load(const std::filesystem::path &path) {
    std::vector<std::string> lines = read_lines(path);
    if (lines.empty()) throw ParseError(path.string() + ": empty alignment file");
    static const std::string kHeader = "file\tphone\tonset\toffset";
    if (lines[0] != kHeader) {
      throw ParseError(path.string() + ": line 1: bad header, expected '" + kHeader + "'");
    }
    AlignmentStore store;
    std::string prev_file;
    for (size_t ln = 1; ln < lines.size(); ++ln) {
      if (lines[ln].empty()) continue;
      std::string where = path.string() + ": line " + std::to_string(ln + 1);
      std::vector<std::string> cols = split(lines[ln], '\t');
      if (cols.size() != 4) {
        throw ParseError(where + ": expected 4 columns, got " + std::to_string(cols.size()));
      }
      PhoneInterval iv;
      iv.phone = cols[1];
      iv.onset = parse_double(cols[2], where);
      iv.offset = parse_double(cols[3], where);
      validate_phone_label(iv.phone, where);
      if (!(iv.offset > iv.onset)) throw ParseError(where + ": offset <= onset");
      if (cols[0] != prev_file && store.files_.count(cols[0])) {
        throw ValidationError(where + ": rows for file '" + cols[0] + "' are not adjacent");
      }
      auto &file = store.files_[cols[0]];
      if (!file.empty()) {
        double gap = iv.onset - file.back().offset;
        if (gap < -detail::kTimeEps) {
          throw ValidationError(where + ": intervals overlap or are unsorted");
        }
        if (gap > detail::kTimeEps) {
          throw ValidationError(where + ": gap before interval (alignments must be contiguous)");
        }
      }
      file.push_back(std::move(iv));
      prev_file = cols[0];
    }
    return store;
  }

  void save(const std::filesystem::path &path) const {
    std::string body = "file\tphone\tonset\toffset\n";
    for (const auto &[file_id, intervals] : files_) {
      for (const PhoneInterval &iv : intervals) {
        body += file_id;
        body += '\t';
        body += iv.phone;
        body += '\t';
        body += fmt_fixed(iv.onset, 3);
        body += '\t';
        body += fmt_fixed(iv.offset, 3);
        body += '\n';
      }
    }
    write_file(path, body);
  }

  void add(const std::string &file_id, PhoneInterval iv) {
    auto &file = files_[file_id];
    if (!file.empty() && iv.onset < file.back().offset - detail::kTimeEps) {
      throw ValidationError("alignment intervals for '" + file_id + "' must be appended in order");
    }
    file.push_back(std::move(iv));
  }

  const std::vector<PhoneInterval> *find(const std::string &file_id) const {
    auto it = files_.find(file_id);
    return it == files_.end() ? nullptr : &it->second;
  }

  const std::vector<PhoneInterval> &at(const std::string &file_id) const {
    const auto *p = find(file_id);
    if (!p) throw LookupError("no alignment for file '" + file_id + "'");
    return *p;
  }

  // Sorted distinct phone labels across all files.
  std::vector<PhoneLabel> inventory() const {
    std::set<PhoneLabel> labels;
    for (const auto &[_, intervals] : files_) {
      for (const PhoneInterval &iv : intervals) labels.insert(iv.phone);
    }
    return std::vector<PhoneLabel>(labels.begin(), labels.end());
  }

  const std::map<std::string, std::vector<PhoneInterval>> &files() const { return files_; }

 private:
  std::map<std::string, std::vector<PhoneInterval>> files_;
};

// ---------------------------------------------------------------------------
// Segment transcription

// Transcribes [onset, offset) against a file's phone intervals.  A phone is
// included iff the overlap covers at least min_overlap of the phone's own
// duration (boundary inclusive).  Returns nullopt when no phone qualifies
// (very short segments inside a long phone); throws when the span is not
// covered by the alignment.
inline std::optional<Transcription> transcribe_segment(
    const Segment &seg, std::span<const PhoneInterval> intervals,
    double min_overlap = 0.5) {
  if (intervals.empty()) {
    throw DataError("alignment gap: no intervals for file '" + seg.file_id + "'");
  }
  if (seg.onset < intervals.front().onset - detail::kTimeEps ||
      seg.offset > intervals.back().offset + detail::kTimeEps) {
    throw DataError("alignment gap: segment '" + seg.id + "' [" +
                    fmt_g(seg.onset) + ", " + fmt_g(seg.offset) +
                    ") not covered by alignment of '" + seg.file_id + "'");
  }
  Transcription t;
  for (const PhoneInterval &iv : intervals) {
    if (iv.offset <= seg.onset) continue;
    if (iv.onset >= seg.offset) break;
    double overlap = std::min(seg.offset, iv.offset) - std::max(seg.onset, iv.onset);
    double needed = min_overlap * (iv.offset - iv.onset);
    if (overlap >= needed - detail::kTimeEps) t.phones.push_back(iv.phone);
  }
  if (t.phones.empty()) return std::nullopt;
  return t;
}

// ---------------------------------------------------------------------------
// Segment enumeration

enum class SegmentationMode { kGrid, kRandom };

struct SegmentationConfig {
  SegmentationMode mode = SegmentationMode::kGrid;
  double min_dur = 0.07;       // segments shorter than 70 ms are dropped
  double max_dur = 1.0;        // and capped at 1 s
  double onset_stride = 0.04;  // grid mode
  double dur_stride = 0.04;    // grid mode
  int64_t count = 0;           // random mode: number of segments
  uint64_t seed = 0;           // random mode
  double min_overlap = 0.5;    // transcription rule
};

inline void validate(const SegmentationConfig &cfg) {
  if (cfg.min_dur < 0.07) throw ConfigError("segmentation: min_dur must be >= 0.07 s");
  if (cfg.max_dur > 1.0) throw ConfigError("segmentation: max_dur must be <= 1.0 s");
  if (cfg.max_dur < cfg.min_dur) throw ConfigError("segmentation: max_dur < min_dur");
  if (cfg.mode == SegmentationMode::kGrid) {
    if (cfg.onset_stride <= 0.0 || cfg.dur_stride <= 0.0) {
      throw ConfigError("segmentation: grid strides must be positive");
    }
  } else if (cfg.count <= 0) {
    throw ConfigError("segmentation: random mode needs count > 0");
  }
  if (cfg.min_overlap <= 0.0 || cfg.min_overlap > 1.0) {
    throw ConfigError("segmentation: min_overlap must lie in (0, 1]");
  }
}

namespace detail {
inline std::string segment_auto_id(const std::string &file_id, double onset,
                                   double offset) {
  return file_id + ":" + std::to_string(std::llround(onset * 1000.0)) + "-" +
         std::to_string(std::llround(offset * 1000.0));
}
}  // namespace detail

// Enumerates candidate segments over per-file durations.  Grid mode walks
// every (onset, duration) pair on the configured strides; random mode draws
// exactly cfg.count segments (uniform duration, uniform onset, uniform over
// eligible files).  Files shorter than min_dur yield nothing.
inline std::vector<Segment> enumerate_segments(
    const std::map<std::string, double> &durations, const SegmentationConfig &cfg) {
  validate(cfg);
  std::vector<Segment> out;
  if (cfg.mode == SegmentationMode::kGrid) {
    for (const auto &[file_id, file_dur] : durations) {
      for (int64_t i = 0;; ++i) {
        double onset = static_cast<double>(i) * cfg.onset_stride;
        if (onset + cfg.min_dur > file_dur + detail::kTimeEps) break;
        for (int64_t j = 0;; ++j) {
          double dur = cfg.min_dur + static_cast<double>(j) * cfg.dur_stride;
          if (dur > cfg.max_dur + detail::kTimeEps) break;
          if (onset + dur > file_dur + detail::kTimeEps) break;
          Segment seg;
          seg.file_id = file_id;
          seg.onset = onset;
          seg.offset = onset + dur;
          seg.id = detail::segment_auto_id(file_id, seg.onset, seg.offset);
          out.push_back(std::move(seg));
        }
      }
    }
  } else {
    std::vector<std::pair<std::string, double>> eligible;
    for (const auto &[file_id, file_dur] : durations) {
      if (file_dur + detail::kTimeEps >= cfg.min_dur) eligible.emplace_back(file_id, file_dur);
    }
    if (eligible.empty()) return out;
    Rng rng(cfg.seed);
    std::unordered_set<std::string> used_ids;
    for (int64_t n = 0; n < cfg.count; ++n) {
      const auto &[file_id, file_dur] = eligible[rng.index(eligible.size())];
      double hi = std::min(cfg.max_dur, file_dur);
      double dur = rng.real(cfg.min_dur, hi);
      double onset = rng.real(0.0, file_dur - dur);
      Segment seg;
      seg.file_id = file_id;
      seg.onset = onset;
      seg.offset = onset + dur;
      std::string id = detail::segment_auto_id(file_id, seg.onset, seg.offset);
      int suffix = 2;
      while (!used_ids.insert(id).second) {
        id = detail::segment_auto_id(file_id, seg.onset, seg.offset) + "#" +
             std::to_string(suffix++);
      }
      seg.id = std::move(id);
      out.push_back(std::move(seg));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Frequency tables

struct FrequencyTable {
  std::map<Transcription, int64_t> counts;
  int64_t total_segments = 0;

  int64_t count(const Transcription &t) const {
    auto it = counts.find(t);
    return it == counts.end() ? 0 : it->second;
  }
};

inline FrequencyTable build_frequency_table(std::span<const Segment> segments) {
  FrequencyTable table;
  for (const Segment &seg : segments) {
    if (!seg.transcription) {
      throw ValidationError("frequency table: segment '" + seg.id + "' is unlabeled");
    }
    ++table.counts[*seg.transcription];
  }
  table.total_segments = static_cast<int64_t>(segments.size());
  return table;
}

// Truth maps (segment id -> count of its type), as written by truth.tsv.
inline std::map<std::string, int64_t> per_segment_counts(
    std::span<const Segment> segments) {
  FrequencyTable table = build_frequency_table(segments);
  std::map<std::string, int64_t> out;
  for (const Segment &seg : segments) {
    out[seg.id] = table.counts.at(*seg.transcription);
  }
  return out;
}

inline void write_truth_file(const std::filesystem::path &path,
                             std::span<const Segment> segments) {
  FrequencyTable table = build_frequency_table(segments);
  std::string body = "id\tcount\n";
  for (const Segment &seg : segments) {
    body += seg.id;
    body += '\t';
    body += std::to_string(table.counts.at(*seg.transcription));
    body += '\n';
  }
  write_file(path, body);
}

inline std::map<std::string, int64_t> load_truth_file(const std::filesystem::path &path) {
  std::vector<std::string> lines = read_lines(path);
  if (lines.empty() || lines[0] != "id\tcount") {
    throw ParseError(path.string() + ": bad truth file header, expected 'id\\tcount'");
  }
  std::map<std::string, int64_t> out;
  for (size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    std::string where = path.string() + ": line " + std::to_string(ln + 1);
    std::vector<std::string> cols = split(lines[ln], '\t');
    if (cols.size() != 2) throw ParseError(where + ": expected 2 columns");
    int64_t c = parse_int(cols[1], where);
    if (c < 1) throw ValidationError(where + ": count must be >= 1");
    if (!out.emplace(cols[0], c).second) {
      throw ValidationError(where + ": duplicate id '" + cols[0] + "'");
    }
  }
  return out;
}

}  // namespace embeval

#endif  // EMBEVAL_CORPUS_HPP_
