// embeval/pipeline.hpp

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
// Declarative pipeline runner (segment -> embed -> abx / map / freq / pairs)
// and the cross-metric correlation report.
//
// Config file: JSON object with sections corpus, segmentation, gd, abx, map,
// freq, pairs, plus output_dir, seed, threads.  Every effective value is
// echoed to <output_dir>/config_echo.json; stage reports embed digests of
// their exact inputs.  A failing stage leaves a FAILED marker naming the
// stage and cause.

#ifndef EMBEVAL_PIPELINE_HPP_
#define EMBEVAL_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "embeval/abx.hpp"
#include "embeval/corpus.hpp"
#include "embeval/embedding.hpp"
#include "embeval/error.hpp"
#include "embeval/features.hpp"
#include "embeval/freq.hpp"
#include "embeval/gd.hpp"
#include "embeval/knn.hpp"
#include "embeval/map.hpp"
#include "embeval/pairs.hpp"
#include "embeval/parallel.hpp"
#include "embeval/rng.hpp"
#include "embeval/stats.hpp"
#include "embeval/util.hpp"
#include "json.hpp"

namespace embeval {

namespace detail {

inline void check_keys(const nlohmann::json &j, const char *section,
                       std::initializer_list<const char *> allowed) {
  if (!j.is_object()) {
    throw ConfigError(std::string("config: section '") + section + "' must be an object");
  }
  for (const auto &[key, _] : j.items()) {
    bool ok = false;
    for (const char *a : allowed) {
      if (key == a) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw ConfigError(std::string("config: unknown key '") + key + "' in section '" +
                        section + "'");
    }
  }
}

template <typename T>
T get_or(const nlohmann::json &j, const char *key, T fallback, const char *section) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("config: bad value for '") + section + "." + key +
                      "': " + e.what());
  }
}

}  // namespace detail

struct PipelineConfig {
  // corpus
  std::string features_path;
  std::string alignments_path;  // optional
  std::string items_path;       // optional; absent -> segmentation stage runs
  std::string truth_path;       // optional

  SegmentationConfig segmentation;

  EmbedOptions gd;

  bool abx_enabled = true;
  AbxConfig abx;

  bool map_enabled = true;
  MapConfig map;

  bool freq_enabled = true;
  DensityConfig freq;
  bool freq_self_exclude = true;
  bool freq_dump_graph = false;

  bool pairs_enabled = false;
  MineConfig mine;
  int64_t gold_n_pos = 0;
  int64_t gold_n_neg = 0;

  std::string output_dir;
  uint64_t seed = 0;
  int threads = 0;
};

inline PipelineConfig parse_pipeline_config(const nlohmann::json &j) {
  using detail::check_keys;
  using detail::get_or;
  check_keys(j, "<root>",
             {"corpus", "segmentation", "gd", "abx", "map", "freq", "pairs",
              "output_dir", "seed", "threads"});
  PipelineConfig cfg;
  cfg.output_dir = get_or<std::string>(j, "output_dir", "", "<root>");
  if (cfg.output_dir.empty()) throw ConfigError("config: output_dir is required");
  cfg.seed = get_or<uint64_t>(j, "seed", 0, "<root>");
  cfg.threads = get_or<int>(j, "threads", 0, "<root>");

  if (!j.contains("corpus")) throw ConfigError("config: corpus section is required");
  {
    const auto &c = j.at("corpus");
    check_keys(c, "corpus", {"features", "alignments", "items", "truth"});
    cfg.features_path = get_or<std::string>(c, "features", "", "corpus");
    if (cfg.features_path.empty()) throw ConfigError("config: corpus.features is required");
    cfg.alignments_path = get_or<std::string>(c, "alignments", "", "corpus");
    cfg.items_path = get_or<std::string>(c, "items", "", "corpus");
    cfg.truth_path = get_or<std::string>(c, "truth", "", "corpus");
  }

  if (j.contains("segmentation")) {
    const auto &s = j.at("segmentation");
    check_keys(s, "segmentation",
               {"mode", "min_dur", "max_dur", "onset_stride", "dur_stride", "count",
                "min_overlap", "seed"});
    std::string mode = get_or<std::string>(s, "mode", "grid", "segmentation");
    if (mode == "grid") cfg.segmentation.mode = SegmentationMode::kGrid;
    else if (mode == "random") cfg.segmentation.mode = SegmentationMode::kRandom;
    else throw ConfigError("config: segmentation.mode must be grid or random");
    cfg.segmentation.min_dur = get_or<double>(s, "min_dur", 0.07, "segmentation");
    cfg.segmentation.max_dur = get_or<double>(s, "max_dur", 1.0, "segmentation");
    cfg.segmentation.onset_stride = get_or<double>(s, "onset_stride", 0.04, "segmentation");
    cfg.segmentation.dur_stride = get_or<double>(s, "dur_stride", 0.04, "segmentation");
    cfg.segmentation.count = get_or<int64_t>(s, "count", 0, "segmentation");
    cfg.segmentation.min_overlap = get_or<double>(s, "min_overlap", 0.5, "segmentation");
    cfg.segmentation.seed =
        get_or<uint64_t>(s, "seed", derive_seed(cfg.seed, "stage:segment"), "segmentation");
  } else {
    cfg.segmentation.seed = derive_seed(cfg.seed, "stage:segment");
  }

  if (j.contains("gd")) {
    const auto &g = j.at("gd");
    check_keys(g, "gd", {"l", "sigma_ratio", "featurizer", "distance"});
    cfg.gd.gd.l = get_or<int64_t>(g, "l", 10, "gd");
    cfg.gd.gd.sigma_ratio = get_or<double>(g, "sigma_ratio", 0.4, "gd");
    cfg.gd.featurizer =
        parse_featurizer(get_or<std::string>(g, "featurizer", "real", "gd"));
    cfg.gd.distance_default =
        parse_distance(get_or<std::string>(g, "distance", "cosine", "gd"));
  }

  if (j.contains("abx")) {
    const auto &a = j.at("abx");
    check_keys(a, "abx",
               {"enabled", "distance", "max_triplets_per_contrast", "speaker_mode", "seed"});
    cfg.abx_enabled = get_or<bool>(a, "enabled", true, "abx");
    cfg.abx.distance = parse_distance(get_or<std::string>(a, "distance", "cosine", "abx"));
    cfg.abx.max_triplets_per_contrast =
        get_or<int64_t>(a, "max_triplets_per_contrast", 1000, "abx");
    cfg.abx.speaker_mode =
        parse_speaker_mode(get_or<std::string>(a, "speaker_mode", "any", "abx"));
    cfg.abx.seed = get_or<uint64_t>(a, "seed", derive_seed(cfg.seed, "stage:abx"), "abx");
  } else {
    cfg.abx.seed = derive_seed(cfg.seed, "stage:abx");
  }

  if (j.contains("map")) {
    const auto &m = j.at("map");
    check_keys(m, "map", {"enabled", "distance", "max_pairs", "seed"});
    cfg.map_enabled = get_or<bool>(m, "enabled", true, "map");
    cfg.map.distance = parse_distance(get_or<std::string>(m, "distance", "cosine", "map"));
    if (m.contains("max_pairs") && !m.at("max_pairs").is_null()) {
      cfg.map.max_pairs = get_or<int64_t>(m, "max_pairs", 0, "map");
    }
    cfg.map.seed = get_or<uint64_t>(m, "seed", derive_seed(cfg.seed, "stage:map"), "map");
  } else {
    cfg.map.seed = derive_seed(cfg.seed, "stage:map");
  }

  if (j.contains("freq")) {
    const auto &f = j.at("freq");
    check_keys(f, "freq", {"enabled", "k", "distance", "self_exclude", "dump_graph"});
    cfg.freq_enabled = get_or<bool>(f, "enabled", true, "freq");
    cfg.freq.k = get_or<int64_t>(f, "k", 2000, "freq");
    cfg.freq.distance = parse_distance(get_or<std::string>(f, "distance", "cosine", "freq"));
    cfg.freq_self_exclude = get_or<bool>(f, "self_exclude", true, "freq");
    cfg.freq_dump_graph = get_or<bool>(f, "dump_graph", false, "freq");
  }

  if (j.contains("pairs")) {
    const auto &p = j.at("pairs");
    check_keys(p, "pairs", {"enabled", "threshold", "k", "n_pos", "n_neg", "seed"});
    cfg.pairs_enabled = get_or<bool>(p, "enabled", false, "pairs");
    cfg.mine.threshold = get_or<double>(p, "threshold", 0.85, "pairs");
    cfg.mine.k = get_or<int64_t>(p, "k", 50, "pairs");
    cfg.gold_n_pos = get_or<int64_t>(p, "n_pos", 0, "pairs");
    cfg.gold_n_neg = get_or<int64_t>(p, "n_neg", 0, "pairs");
  }
  return cfg;
}

inline PipelineConfig load_pipeline_config(const std::filesystem::path &path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_pipeline_config(j);
}

inline nlohmann::json echo_config(const PipelineConfig &cfg) {
  nlohmann::json j;
  j["corpus"] = {{"features", cfg.features_path},
                 {"alignments", cfg.alignments_path},
                 {"items", cfg.items_path},
                 {"truth", cfg.truth_path}};
  j["segmentation"] = {
      {"mode", cfg.segmentation.mode == SegmentationMode::kGrid ? "grid" : "random"},
      {"min_dur", cfg.segmentation.min_dur},
      {"max_dur", cfg.segmentation.max_dur},
      {"onset_stride", cfg.segmentation.onset_stride},
      {"dur_stride", cfg.segmentation.dur_stride},
      {"count", cfg.segmentation.count},
      {"min_overlap", cfg.segmentation.min_overlap},
      {"seed", cfg.segmentation.seed}};
  j["gd"] = {{"l", cfg.gd.gd.l},
             {"sigma_ratio", cfg.gd.gd.sigma_ratio},
             {"featurizer", featurizer_name(cfg.gd.featurizer)},
             {"distance", distance_name(cfg.gd.distance_default)}};
  j["abx"] = {{"enabled", cfg.abx_enabled},
              {"distance", distance_name(cfg.abx.distance)},
              {"max_triplets_per_contrast", cfg.abx.max_triplets_per_contrast},
              {"speaker_mode", speaker_mode_name(cfg.abx.speaker_mode)},
              {"seed", cfg.abx.seed}};
  nlohmann::json m = {{"enabled", cfg.map_enabled},
                      {"distance", distance_name(cfg.map.distance)},
                      {"seed", cfg.map.seed}};
  if (cfg.map.max_pairs) m["max_pairs"] = *cfg.map.max_pairs;
  j["map"] = std::move(m);
  j["freq"] = {{"enabled", cfg.freq_enabled},
               {"k", cfg.freq.k},
               {"distance", distance_name(cfg.freq.distance)},
               {"self_exclude", cfg.freq_self_exclude},
               {"dump_graph", cfg.freq_dump_graph}};
  j["pairs"] = {{"enabled", cfg.pairs_enabled},
                {"threshold", cfg.mine.threshold},
                {"k", cfg.mine.k},
                {"n_pos", cfg.gold_n_pos},
                {"n_neg", cfg.gold_n_neg}};
  j["output_dir"] = cfg.output_dir;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  return j;
}

// Runs every enabled stage; returns the run directory.  Reports carry config
// echoes plus digests of their exact inputs.
inline std::filesystem::path run_pipeline(const PipelineConfig &cfg) {
  namespace fs = std::filesystem;
  const fs::path out(cfg.output_dir);
  fs::create_directories(out);
  const int threads = resolve_threads(cfg.threads);
  std::string stage = "init";
  nlohmann::json run;
  run["stages"] = nlohmann::json::array();
  try {
    write_file(out / "config_echo.json", echo_config(cfg).dump(2) + "\n");

    stage = "load";
    FeatureArchive feats = FeatureArchive::open(cfg.features_path);
    std::optional<AlignmentStore> aligns;
    if (!cfg.alignments_path.empty()) aligns = AlignmentStore::load(cfg.alignments_path);

    stage = "segment";
    std::vector<Segment> segments;
    int64_t unlabeled = 0;
    if (!cfg.items_path.empty()) {
      segments = load_item_file(cfg.items_path);
    } else {
      if (!aligns) {
        throw ConfigError("segmentation needs corpus.alignments to label segments");
      }
      segments = enumerate_segments(feats.durations(), cfg.segmentation);
      for (Segment &seg : segments) {
        seg.speaker = seg.file_id;
        seg.transcription =
            transcribe_segment(seg, aligns->at(seg.file_id), cfg.segmentation.min_overlap);
      }
    }
    for (const Segment &seg : segments) {
      if (!seg.transcription) ++unlabeled;
    }
    write_item_file(out / "items.tsv", segments);
    std::string items_digest = digest_path(out / "items.tsv");
    run["stages"].push_back({{"name", "segment"},
                             {"segments", segments.size()},
                             {"unlabeled", unlabeled},
                             {"items_digest", items_digest}});

    stage = "embed";
    EmbeddingSet set = embed_corpus(feats, aligns ? &*aligns : nullptr, segments, cfg.gd);
    save_embedding_set(set, out / "embeddings");
    std::string emb_digest = digest_path(out / "embeddings");
    run["stages"].push_back({{"name", "embed"},
                             {"count", set.count()},
                             {"dim", set.dim()},
                             {"features_digest", digest_path(fs::path(cfg.features_path) /
                                                             "manifest.json")},
                             {"embeddings_digest", emb_digest}});

    if (cfg.abx_enabled) {
      stage = "abx";
      AbxReport report = abx_score(set, cfg.abx, threads);
      nlohmann::json rj = to_json(report);
      rj["inputs"] = {{"embeddings", emb_digest}};
      write_file(out / "abx.json", rj.dump(2) + "\n");
      write_abx_contrasts_tsv(out / "abx_contrasts.tsv", report);
      run["stages"].push_back({{"name", "abx"}, {"global_error", report.global_error}});
    }

    if (cfg.map_enabled) {
      stage = "map";
      MapReport report = map_score(set, cfg.map, threads);
      nlohmann::json rj = to_json(report);
      rj["inputs"] = {{"embeddings", emb_digest}};
      write_file(out / "map.json", rj.dump(2) + "\n");
      run["stages"].push_back(
          {{"name", "map"}, {"average_precision", report.average_precision}});
    }

    if (cfg.freq_enabled) {
      stage = "freq";
      const int64_t avail = cfg.freq_self_exclude ? set.count() - 1 : set.count();
      if (avail < 1) throw NumericError("freq: not enough embeddings for a graph");
      DensityConfig dc = cfg.freq;
      dc.k = std::min(dc.k, avail);
      Index index(set, dc.distance);
      KnnGraph graph = build_graph(index, set, dc.k, cfg.freq_self_exclude, threads);
      if (cfg.freq_dump_graph) save_graph(graph, out / "graph");
      std::optional<std::map<std::string, int64_t>> truth;
      if (!cfg.truth_path.empty()) truth = load_truth_file(cfg.truth_path);
      FreqReport report = freq_evaluate(graph, dc, truth ? &*truth : nullptr, threads);
      report.clamped = dc.k != cfg.freq.k;
      nlohmann::json rj = to_json(report);
      rj["inputs"] = {{"embeddings", emb_digest}};
      if (truth) rj["inputs"]["truth"] = digest_path(cfg.truth_path);
      write_file(out / "freq.json", rj.dump(2) + "\n");
      write_freq_tsv(out / "freq.tsv", report, truth ? &*truth : nullptr);
      nlohmann::json stage_j = {{"name", "freq"}, {"chosen_beta", report.chosen_beta}};
      if (report.r_squared) stage_j["r_squared"] = *report.r_squared;
      run["stages"].push_back(std::move(stage_j));
    }

    if (cfg.pairs_enabled) {
      stage = "pairs";
      Index index(set, DistanceKind::kCosine);
      std::vector<Pair> mined = mine_pairs(index, set, cfg.mine, segments, threads);
      write_pair_file(out / "mined_pairs.tsv", mined);
      nlohmann::json pj = {{"mined", mined.size()},
                           {"threshold", cfg.mine.threshold},
                           {"k", cfg.mine.k},
                           {"inputs", {{"embeddings", emb_digest}}}};
      if (cfg.gold_n_pos > 0 || cfg.gold_n_neg > 0) {
        std::vector<Segment> labeled;
        for (const Segment &s : segments) {
          if (s.transcription) labeled.push_back(s);
        }
        GoldPairsResult gold = gold_pairs(labeled, cfg.gold_n_pos, cfg.gold_n_neg,
                                          derive_seed(cfg.seed, "stage:pairs"));
        fill_similarities(gold.pairs, set);
        write_pair_file(out / "gold_pairs.tsv", gold.pairs);
        pj["gold_positives"] = gold.positives;
        pj["gold_negatives"] = gold.negatives;
        pj["gold_capped"] = gold.pos_capped || gold.neg_capped;
      }
      write_file(out / "pairs.json", pj.dump(2) + "\n");
      run["stages"].push_back({{"name", "pairs"}, {"mined", mined.size()}});
    }

    write_file(out / "run.json", run.dump(2) + "\n");
  } catch (const Error &e) {
    write_file(out / "FAILED", stage + ": " + e.what() + "\n");
    throw Error(stage + ": " + e.what(), e.exit_code());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cross-metric correlation (higher = better on all three columns)

struct RunRecord {
  std::string model_name;
  double abx_error = 0.0;
  double map_ap = 0.0;
  double freq_r2 = 0.0;
};

struct CorrelationReport {
  // column order: freq, map, abx (abx negated before correlating)
  double matrix[3][3] = {};
  int64_t n_models = 0;
};

inline CorrelationReport correlate(std::span<const RunRecord> records) {
  if (records.size() < 3) {
    throw ValidationError("correlate: need at least 3 run records, have " +
                          std::to_string(records.size()));
  }
  std::vector<double> cols[3];
  for (const RunRecord &r : records) {
    cols[0].push_back(r.freq_r2);
    cols[1].push_back(r.map_ap);
    cols[2].push_back(-r.abx_error);
  }
  static const char *kNames[3] = {"freq", "map", "abx"};
  CorrelationReport report;
  report.n_models = static_cast<int64_t>(records.size());
  for (int i = 0; i < 3; ++i) report.matrix[i][i] = 1.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      double r2 = r_squared(cols[i], cols[j], kNames[i], kNames[j]);
      report.matrix[i][j] = r2;
      report.matrix[j][i] = r2;
    }
  }
  return report;
}

inline std::vector<RunRecord> load_records(const std::filesystem::path &path) {
  std::vector<std::string> lines = read_lines(path);
  if (lines.empty() || lines[0] != "model\tabx_error\tmap_ap\tfreq_r2") {
    throw ParseError(path.string() +
                     ": bad records header, expected 'model\\tabx_error\\tmap_ap\\tfreq_r2'");
  }
  std::vector<RunRecord> out;
  for (size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    std::string where = path.string() + ": line " + std::to_string(ln + 1);
    std::vector<std::string> cols = split(lines[ln], '\t');
    if (cols.size() != 4) throw ParseError(where + ": expected 4 columns");
    RunRecord r;
    r.model_name = cols[0];
    r.abx_error = parse_double(cols[1], where);
    r.map_ap = parse_double(cols[2], where);
    r.freq_r2 = parse_double(cols[3], where);
    out.push_back(std::move(r));
  }
  return out;
}

inline nlohmann::json to_json(const CorrelationReport &r) {
  nlohmann::json j;
  j["n_models"] = r.n_models;
  j["columns"] = {"freq", "map", "abx"};
  j["abx_sign"] = "negated";
  nlohmann::json m = nlohmann::json::array();
  for (int i = 0; i < 3; ++i) {
    m.push_back({r.matrix[i][0], r.matrix[i][1], r.matrix[i][2]});
  }
  j["matrix"] = std::move(m);
  return j;
}

inline void write_correlation_tsv(const std::filesystem::path &path,
                                  const CorrelationReport &r) {
  static const char *kNames[3] = {"freq", "map", "abx"};
  std::string body = "\tfreq\tmap\tabx\n";
  for (int i = 0; i < 3; ++i) {
    body += kNames[i];
    for (int j = 0; j < 3; ++j) {
      body += '\t';
      body += fmt_g(r.matrix[i][j]);
    }
    body += '\n';
  }
  write_file(path, body);
}

}  // namespace embeval

#endif  // EMBEVAL_PIPELINE_HPP_
