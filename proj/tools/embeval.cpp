// tools/embeval.cpp

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
// Command line toolkit: synthetic corpora, segmentation, Gaussian
// downsampling embeddings, ABX / MAP / frequency evaluation, pair harvesting
// and the cross-metric correlation report.  Exit codes: 0 ok, 2 config
// error, 3 data error, 4 numeric or degeneracy error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
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
#include "embeval/pipeline.hpp"
#include "embeval/synth.hpp"
#include "embeval/util.hpp"

namespace {

using namespace embeval;
namespace fs = std::filesystem;

struct SynthArgs {
  std::string out;
  SynthConfig cfg;
};

int run_synth(const SynthArgs &a) {
  SynthOutput res = generate_corpus(a.cfg, a.out);
  int64_t tokens = 0;
  for (int64_t c : res.type_counts) tokens += c;
  std::cout << "synth: " << tokens << " tokens over " << res.type_counts.size()
            << " types -> " << a.out << '\n';
  return 0;
}

struct SegmentArgs {
  std::string features;
  std::string alignments;
  std::string out;
  std::string mode = "grid";
  SegmentationConfig cfg;
};

int run_segment(const SegmentArgs &a) {
  SegmentationConfig cfg = a.cfg;
  if (a.mode == "grid") cfg.mode = SegmentationMode::kGrid;
  else if (a.mode == "random") cfg.mode = SegmentationMode::kRandom;
  else throw ConfigError("segment: --mode must be grid or random");

  FeatureArchive feats = FeatureArchive::open(a.features);
  std::vector<Segment> segments = enumerate_segments(feats.durations(), cfg);
  int64_t unlabeled = 0;
  if (!a.alignments.empty()) {
    AlignmentStore aligns = AlignmentStore::load(a.alignments);
    for (Segment &seg : segments) {
      seg.speaker = seg.file_id;
      seg.transcription = transcribe_segment(seg, aligns.at(seg.file_id), cfg.min_overlap);
      if (!seg.transcription) ++unlabeled;
    }
  } else {
    for (Segment &seg : segments) seg.speaker = seg.file_id;
    unlabeled = static_cast<int64_t>(segments.size());
  }
  write_item_file(a.out, segments);
  std::cout << "segment: " << segments.size() << " segments (" << unlabeled
            << " unlabeled) -> " << a.out << '\n';
  return 0;
}

struct EmbedArgs {
  std::string features;
  std::string items;
  std::string alignments;
  std::string out;
  std::string featurizer = "real";
  std::string distance = "cosine";
  EmbedOptions opt;
};

int run_embed(const EmbedArgs &a, int threads) {
  EmbedOptions opt = a.opt;
  opt.featurizer = parse_featurizer(a.featurizer);
  opt.distance_default = parse_distance(a.distance);
  opt.threads = threads;

  FeatureArchive feats = FeatureArchive::open(a.features);
  std::optional<AlignmentStore> aligns;
  if (!a.alignments.empty()) aligns = AlignmentStore::load(a.alignments);
  std::vector<Segment> segments = load_item_file(a.items);
  EmbeddingSet set = embed_corpus(feats, aligns ? &*aligns : nullptr, segments, opt);
  save_embedding_set(set, a.out);
  std::cout << "embed: " << set.count() << " embeddings, dim " << set.dim() << " -> "
            << a.out << '\n';
  return 0;
}

struct EvalArgs {
  std::string embeddings;
  std::string out;
  std::string distance;  // empty: archive default
};

DistanceKind pick_distance(const std::string &flag, const EmbeddingSet &set) {
  return flag.empty() ? set.distance_default() : parse_distance(flag);
}

int run_eval_abx(const EvalArgs &a, const AbxConfig &base, int threads) {
  EmbeddingSet set = load_embedding_set(a.embeddings);
  AbxConfig cfg = base;
  cfg.distance = pick_distance(a.distance, set);
  AbxReport report = abx_score(set, cfg, threads);
  fs::create_directories(a.out);
  nlohmann::json j = to_json(report);
  j["inputs"] = {{"embeddings", digest_path(a.embeddings)}};
  write_file(fs::path(a.out) / "abx.json", j.dump(2) + "\n");
  write_abx_contrasts_tsv(fs::path(a.out) / "abx_contrasts.tsv", report);
  std::cout << "abx: global_error " << fmt_g(report.global_error) << " over "
            << report.contrast_count << " contrasts (" << report.omitted_contrasts
            << " omitted) -> " << a.out << '\n';
  return 0;
}

int run_eval_map(const EvalArgs &a, const MapConfig &base, int64_t max_pairs, int threads) {
  EmbeddingSet set = load_embedding_set(a.embeddings);
  MapConfig cfg = base;
  cfg.distance = pick_distance(a.distance, set);
  if (max_pairs > 0) cfg.max_pairs = max_pairs;
  MapReport report = map_score(set, cfg, threads);
  fs::create_directories(a.out);
  nlohmann::json j = to_json(report);
  j["inputs"] = {{"embeddings", digest_path(a.embeddings)}};
  write_file(fs::path(a.out) / "map.json", j.dump(2) + "\n");
  std::cout << "map: average_precision " << fmt_g(report.average_precision) << " over "
            << report.total_pairs << " pairs -> " << a.out << '\n';
  return 0;
}

struct FreqArgs {
  std::string embeddings;
  std::string out;
  std::string distance;
  std::string truth;
  int64_t k = 2000;
  bool self_exclude = true;
  bool dump_graph = false;
};

int run_freq(const FreqArgs &a, int threads) {
  EmbeddingSet set = load_embedding_set(a.embeddings);
  DensityConfig cfg;
  cfg.k = a.k;
  cfg.distance = a.distance.empty() ? set.distance_default() : parse_distance(a.distance);
  const int64_t avail = a.self_exclude ? set.count() - 1 : set.count();
  if (avail < 1) throw NumericError("freq: not enough embeddings for a graph");
  if (cfg.k > avail) {
    std::cerr << "embeval: warning: k clamped from " << cfg.k << " to " << avail << '\n';
    cfg.k = avail;
  }
  Index index(set, cfg.distance);
  KnnGraph graph = build_graph(index, set, cfg.k, a.self_exclude, threads);
  fs::create_directories(a.out);
  if (a.dump_graph) save_graph(graph, fs::path(a.out) / "graph");

  std::optional<std::map<std::string, int64_t>> truth;
  if (!a.truth.empty()) truth = load_truth_file(a.truth);
  FreqReport report = freq_evaluate(graph, cfg, truth ? &*truth : nullptr, threads);
  report.clamped = cfg.k != a.k;
  if (report.degenerate) {
    std::cerr << "embeval: warning: beta tuning degenerate, all grid variances zero\n";
  }
  nlohmann::json j = to_json(report);
  j["inputs"] = {{"embeddings", digest_path(a.embeddings)}};
  if (truth) j["inputs"]["truth"] = digest_path(a.truth);
  write_file(fs::path(a.out) / "freq.json", j.dump(2) + "\n");
  write_freq_tsv(fs::path(a.out) / "freq.tsv", report, truth ? &*truth : nullptr);
  std::cout << "freq: chosen_beta " << fmt_g(report.chosen_beta);
  if (report.r_squared) std::cout << ", r_squared " << fmt_g(*report.r_squared);
  std::cout << " -> " << a.out << '\n';
  return 0;
}

struct MineArgs {
  std::string embeddings;
  std::string items;
  std::string out;
  MineConfig cfg;
};

int run_mine_pairs(const MineArgs &a, int threads) {
  EmbeddingSet set = load_embedding_set(a.embeddings);
  std::vector<Segment> segments = load_item_file(a.items);
  Index index(set, DistanceKind::kCosine);
  std::vector<Pair> pairs = mine_pairs(index, set, a.cfg, segments, threads);
  write_pair_file(a.out, pairs);
  std::cout << "mine-pairs: " << pairs.size() << " pairs above "
            << fmt_g(a.cfg.threshold) << " -> " << a.out << '\n';
  return 0;
}

struct GoldArgs {
  std::string items;
  std::string embeddings;
  std::string out;
  int64_t n_pos = 0;
  int64_t n_neg = 0;
  uint64_t seed = 0;
};

int run_gold_pairs(const GoldArgs &a) {
  std::vector<Segment> all = load_item_file(a.items);
  std::vector<Segment> labeled;
  for (const Segment &s : all) {
    if (s.transcription) labeled.push_back(s);
  }
  GoldPairsResult res = gold_pairs(labeled, a.n_pos, a.n_neg, a.seed);
  if (res.pos_capped) {
    std::cerr << "embeval: warning: positives capped at " << res.positives << '\n';
  }
  if (res.neg_capped) {
    std::cerr << "embeval: warning: negatives capped at " << res.negatives << '\n';
  }
  if (!a.embeddings.empty()) {
    EmbeddingSet set = load_embedding_set(a.embeddings);
    fill_similarities(res.pairs, set);
  }
  write_pair_file(a.out, res.pairs);
  std::cout << "gold-pairs: " << res.positives << " positive, " << res.negatives
            << " negative -> " << a.out << '\n';
  return 0;
}

struct CorrelateArgs {
  std::string records;
  std::string out;
};

int run_correlate(const CorrelateArgs &a) {
  std::vector<RunRecord> records = load_records(a.records);
  CorrelationReport report = correlate(records);
  fs::create_directories(a.out);
  nlohmann::json j = to_json(report);
  j["inputs"] = {{"records", digest_path(a.records)}};
  write_file(fs::path(a.out) / "correlation.json", j.dump(2) + "\n");
  write_correlation_tsv(fs::path(a.out) / "correlation.tsv", report);
  static const char *kNames[3] = {"freq", "map", "abx"};
  std::cout << "correlate: " << report.n_models << " models\n";
  for (int i = 0; i < 3; ++i) {
    std::cout << "  " << kNames[i];
    for (int v = 0; v < 3; ++v) std::cout << '\t' << fmt_g(report.matrix[i][v]);
    std::cout << '\n';
  }
  return 0;
}

int run_run(const std::string &config_path, int threads_flag) {
  PipelineConfig cfg = load_pipeline_config(config_path);
  if (threads_flag != 0) cfg.threads = threads_flag;
  fs::path out = run_pipeline(cfg);
  std::cout << "run: complete -> " << out.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char *argv[]) {
  CLI::App app{"embedding evaluation toolkit (ABX, MAP, k-NN frequency estimation)"};
  app.require_subcommand(1);
  int threads = 0;

  SynthArgs synth;
  CLI::App *synth_cmd = app.add_subcommand("synth", "generate a synthetic Zipfian corpus");
  synth_cmd->add_option("--out", synth.out, "output corpus directory")->required();
  synth_cmd->add_option("--inventory", synth.cfg.inventory_size, "phone inventory size");
  synth_cmd->add_option("--types", synth.cfg.num_types, "number of types");
  synth_cmd->add_option("--zipf-exponent", synth.cfg.zipf_exponent, "Zipf exponent s");
  synth_cmd->add_option("--tokens", synth.cfg.total_tokens, "total token count");
  synth_cmd->add_option("--phones-min", synth.cfg.phones_per_type_min, "min phones per type");
  synth_cmd->add_option("--phones-max", synth.cfg.phones_per_type_max, "max phones per type");
  synth_cmd->add_option("--frames-min", synth.cfg.frames_per_phone_min, "min frames per phone");
  synth_cmd->add_option("--frames-max", synth.cfg.frames_per_phone_max, "max frames per phone");
  synth_cmd->add_option("--noise-sigma", synth.cfg.noise_sigma, "feature noise stddev");
  synth_cmd->add_option("--dim", synth.cfg.prototype_dim, "feature dimension");
  synth_cmd->add_option("--speakers", synth.cfg.speakers, "speaker count");
  synth_cmd->add_option("--seed", synth.cfg.seed, "random seed");

  SegmentArgs seg;
  CLI::App *seg_cmd = app.add_subcommand("segment", "enumerate and transcribe segments");
  seg_cmd->add_option("--features", seg.features, "feature archive directory")->required();
  seg_cmd->add_option("--out", seg.out, "output item file")->required();
  seg_cmd->add_option("--alignments", seg.alignments,
                      "alignment file; omit to leave segments unlabeled");
  seg_cmd->add_option("--mode", seg.mode, "grid|random (default grid)");
  seg_cmd->add_option("--min-dur", seg.cfg.min_dur, "min duration s");
  seg_cmd->add_option("--max-dur", seg.cfg.max_dur, "max duration s");
  seg_cmd->add_option("--onset-stride", seg.cfg.onset_stride, "grid onset stride s");
  seg_cmd->add_option("--dur-stride", seg.cfg.dur_stride, "grid duration stride s");
  seg_cmd->add_option("--count", seg.cfg.count, "random mode: segment count");
  seg_cmd->add_option("--min-overlap", seg.cfg.min_overlap,
                      "fraction of a phone that must be covered");
  seg_cmd->add_option("--seed", seg.cfg.seed, "random mode seed");
  seg_cmd->add_option("--threads", threads, "worker threads (0 = hardware)");

  EmbedArgs emb;
  CLI::App *emb_cmd = app.add_subcommand("embed", "Gaussian downsampling embeddings");
  emb_cmd->add_option("--features", emb.features, "feature archive directory")->required();
  emb_cmd->add_option("--items", emb.items, "item file")->required();
  emb_cmd->add_option("--out", emb.out, "output embedding archive directory")->required();
  emb_cmd->add_option("--alignments", emb.alignments,
                      "alignment file (required for --featurizer one_hot)");
  emb_cmd->add_option("--featurizer", emb.featurizer, "real|one_hot (default real)");
  emb_cmd->add_option("--l", emb.opt.gd.l, "GD block count");
  emb_cmd->add_option("--sigma-ratio", emb.opt.gd.sigma_ratio, "GD sigma ratio");
  emb_cmd->add_option("--distance", emb.distance,
                      "archive distance_default: cosine|euclidean");
  emb_cmd->add_option("--threads", threads, "worker threads (0 = hardware)");

  EvalArgs abx_args;
  AbxConfig abx_cfg;
  std::string abx_mode = "any";
  CLI::App *abx_cmd = app.add_subcommand("eval-abx", "ABX discrimination error");
  abx_cmd->add_option("--embeddings", abx_args.embeddings, "embedding archive")->required();
  abx_cmd->add_option("--out", abx_args.out, "output report directory")->required();
  abx_cmd->add_option("--distance", abx_args.distance,
                      "cosine|euclidean (default: archive distance_default)");
  abx_cmd->add_option("--max-triplets", abx_cfg.max_triplets_per_contrast,
                      "triplet cap per contrast");
  abx_cmd->add_option("--speaker-mode", abx_mode, "any|within|across (default any)");
  abx_cmd->add_option("--seed", abx_cfg.seed, "triplet sampling seed");
  abx_cmd->add_option("--threads", threads, "worker threads (0 = hardware)");

  EvalArgs map_args;
  MapConfig map_cfg;
  int64_t map_max_pairs = 0;
  CLI::App *map_cmd = app.add_subcommand("eval-map", "same-different mean average precision");
  map_cmd->add_option("--embeddings", map_args.embeddings, "embedding archive")->required();
  map_cmd->add_option("--out", map_args.out, "output report directory")->required();
  map_cmd->add_option("--distance", map_args.distance,
                      "cosine|euclidean (default: archive distance_default)");
  map_cmd->add_option("--max-pairs", map_max_pairs,
                      "subsample negatives above this many ranked pairs (0 = rank all)");
  map_cmd->add_option("--seed", map_cfg.seed, "negative subsampling seed");
  map_cmd->add_option("--threads", threads, "worker threads (0 = hardware)");

  FreqArgs freq;
  CLI::App *freq_cmd = app.add_subcommand("freq", "k-NN kernel density frequency estimation");
  freq_cmd->add_option("--embeddings", freq.embeddings, "embedding archive")->required();
  freq_cmd->add_option("--out", freq.out, "output report directory")->required();
  freq_cmd->add_option("--k", freq.k, "neighbors per query (clamped to index size)");
  freq_cmd->add_option("--distance", freq.distance,
                       "cosine|euclidean (default: archive distance_default)");
  freq_cmd->add_option("--truth", freq.truth, "truth file for R^2 against true counts");
  freq_cmd->add_flag("--self-exclude,!--no-self-exclude", freq.self_exclude,
                     "exclude each query from its own neighbor list (default on)");
  freq_cmd->add_flag("--dump-graph", freq.dump_graph, "write the k-NN graph");
  freq_cmd->add_option("--threads", threads, "worker threads (0 = hardware)");

  MineArgs mine;
  CLI::App *mine_cmd = app.add_subcommand("mine-pairs", "harvest high-similarity pairs");
  mine_cmd->add_option("--embeddings", mine.embeddings, "embedding archive")->required();
  mine_cmd->add_option("--items", mine.items, "item file (overlap filtering)")->required();
  mine_cmd->add_option("--out", mine.out, "output pair file")->required();
  mine_cmd->add_option("--threshold", mine.cfg.threshold, "cosine similarity threshold");
  mine_cmd->add_option("--k", mine.cfg.k, "neighbors probed per query");
  mine_cmd->add_option("--threads", threads, "worker threads (0 = hardware)");

  GoldArgs gold;
  CLI::App *gold_cmd = app.add_subcommand("gold-pairs", "sample transcription-matched pairs");
  gold_cmd->add_option("--items", gold.items, "item file")->required();
  gold_cmd->add_option("--out", gold.out, "output pair file")->required();
  gold_cmd->add_option("--n-pos", gold.n_pos, "positive pairs to sample");
  gold_cmd->add_option("--n-neg", gold.n_neg, "negative pairs to sample");
  gold_cmd->add_option("--embeddings", gold.embeddings,
                       "embedding archive; fills the similarity column");
  gold_cmd->add_option("--seed", gold.seed, "sampling seed");

  CorrelateArgs corr;
  CLI::App *corr_cmd = app.add_subcommand("correlate", "cross-metric correlation report");
  corr_cmd->add_option("--records", corr.records, "run record TSV")->required();
  corr_cmd->add_option("--out", corr.out, "output report directory")->required();

  std::string run_config;
  CLI::App *run_cmd = app.add_subcommand("run", "full pipeline from a config file");
  run_cmd->add_option("--config", run_config, "pipeline config JSON")->required();
  run_cmd->add_option("--threads", threads, "worker threads (0 = config value)");

  try {
    app.parse(argc, argv);
    if (*synth_cmd) return run_synth(synth);
    if (*seg_cmd) return run_segment(seg);
    if (*emb_cmd) return run_embed(emb, threads);
    if (*abx_cmd) {
      abx_cfg.speaker_mode = parse_speaker_mode(abx_mode);
      return run_eval_abx(abx_args, abx_cfg, threads);
    }
    if (*map_cmd) return run_eval_map(map_args, map_cfg, map_max_pairs, threads);
    if (*freq_cmd) return run_freq(freq, threads);
    if (*mine_cmd) return run_mine_pairs(mine, threads);
    if (*gold_cmd) return run_gold_pairs(gold);
    if (*corr_cmd) return run_correlate(corr);
    if (*run_cmd) return run_run(run_config, threads);
    return 0;
  } catch (const CLI::ParseError &e) {
    int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kExitConfig);
  } catch (const Error &e) {
    std::cerr << "embeval: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception &e) {
    std::cerr << "embeval: " << e.what() << '\n';
    return 1;
  }
}
